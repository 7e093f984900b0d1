use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::domain::{Follow, UserId};
use crate::metrics::RelevanceJudgment;
use crate::{seeded_rng, Error, Result};

/// Training side of a user split: one instance per (user, podcast) follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainSet {
    /// Ascending.
    pub users: Vec<UserId>,
    pub instances: Vec<Follow>,
}

/// Held-out users, each with their full follow set as ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSet {
    /// Ascending by user.
    pub judgments: Vec<RelevanceJudgment>,
}

impl TestSet {
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.judgments.iter().map(|j| j.user)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Splits users who follow at least one podcast into disjoint train and test sets.
pub fn split_by_user(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(TrainSet, TestSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let follows = dataset.follows_by_user();
    let mut eligible: Vec<UserId> = (0..dataset.n_users())
        .filter(|&u| !follows[u].is_empty())
        .map(UserId::from)
        .collect();
    let n_test = (eligible.len() as f64 * test_fraction).round() as usize;
    if n_test == 0 {
        return Err(Error::EmptyTestSet);
    }
    eligible.shuffle(&mut seeded_rng(seed));
    let mut test_users = eligible[..n_test].to_vec();
    let mut train_users = eligible[n_test..].to_vec();
    test_users.sort_unstable();
    train_users.sort_unstable();

    let is_train: BTreeSet<UserId> = train_users.iter().copied().collect();
    let instances = dataset
        .follows
        .iter()
        .copied()
        .filter(|f| is_train.contains(&f.user))
        .collect();
    let judgments = test_users
        .iter()
        .map(|&u| RelevanceJudgment {
            user: u,
            relevant: follows[u.index()].iter().copied().collect(),
        })
        .collect();
    Ok((
        TrainSet {
            users: train_users,
            instances,
        },
        TestSet { judgments },
    ))
}
