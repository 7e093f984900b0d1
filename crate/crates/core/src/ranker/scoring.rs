use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::RankerModel;
use crate::domain::{PodcastId, UserId};
use crate::features::UserFeatures;
use crate::{Error, Result};

/// Full catalog ordering for one user: score descending, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub user: UserId,
    pub items: Vec<(PodcastId, f64)>,
}

impl Ranking {
    pub fn from_scores(user: UserId, scores: &[f64]) -> Result<Ranking> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("podcast scores"));
        }
        let mut items: Vec<(PodcastId, f64)> = scores.iter().enumerate().map(|(i, &s)| (PodcastId::from(i), s)).collect();
        items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        Ok(Ranking { user, items })
    }

    pub fn podcasts(&self) -> Vec<PodcastId> {
        self.items.iter().map(|(p, _)| *p).collect()
    }

    pub fn top(&self, k: usize) -> &[(PodcastId, f64)] {
        &self.items[..k.min(self.items.len())]
    }
}

impl RankerModel {
    pub fn score_all(&self, features: &UserFeatures) -> Result<Ranking> {
        Ranking::from_scores(features.user, &self.scores(features)?)
    }
}
