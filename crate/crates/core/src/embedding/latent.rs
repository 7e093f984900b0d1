use serde::{Deserialize, Serialize};

use super::TrackEmbeddingTable;
use crate::data::SECONDS_PER_DAY;
use crate::domain::{ListenEvent, UserId};
use crate::{Error, Result};

pub const DEFAULT_HALF_LIFE_DAYS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLatentVector {
    pub user: UserId,
    pub v: Vec<f32>,
}

/// Recency-weighted mean of the input vectors of the listened tracks, with
/// weight `2^(-age_days / half_life_days)` per listen event.
pub fn user_latent(
    user: UserId,
    listens: &[ListenEvent],
    table: &TrackEmbeddingTable,
    now: i64,
    half_life_days: f64,
) -> Result<UserLatentVector> {
    if !(half_life_days > 0.0) {
        return Err(Error::config("half_life_days must be positive"));
    }
    let mut acc = vec![0.0f64; table.dim];
    let mut total = 0.0f64;
    for e in listens {
        if !table.contains(e.track) {
            return Err(Error::UnknownTrack(e.track.to_string()));
        }
        let age_days = (now - e.timestamp) as f64 / SECONDS_PER_DAY as f64;
        let w = (-age_days / half_life_days).exp2();
        for (a, &x) in acc.iter_mut().zip(table.input_vector(e.track)) {
            *a += w * f64::from(x);
        }
        total += w;
    }
    let v: Vec<f32> = if total > 0.0 {
        acc.iter().map(|a| (a / total) as f32).collect()
    } else {
        vec![0.0; table.dim]
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("user latent vector"));
    }
    Ok(UserLatentVector { user, v })
}
