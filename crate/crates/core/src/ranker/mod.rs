//! Podcast ranker: a user tower scored against per-podcast output vectors,
//! trained with sampled negatives, plus popularity baselines.

mod adam;
mod baseline;
mod checkpoint;
mod config;
pub mod loss;
mod model;
mod sampler;
mod scoring;
mod train;

pub use adam::Adam;
pub use baseline::{GroupCounts, GroupKey, PopularityBaseline, PopularityKey};
pub use checkpoint::{load_model, save_model};
pub use config::{Architecture, Objective, Proposal, RankerConfig};
pub use model::{ForwardCache, ModelShape, ParamStore, RankerModel, TensorSpec};
pub use sampler::NegativeSampler;
pub use scoring::Ranking;
pub use train::{train, EpochLog, TrainingData, TrainingLog};

use crate::domain::User;
use crate::features::UserFeatures;
use crate::Result;

/// What a recommender sees of a user at inference time.
#[derive(Debug, Clone, Copy)]
pub struct UserInput<'a> {
    pub user: &'a User,
    pub features: &'a UserFeatures,
}

/// Anything that can rank the full podcast catalog for a user.
pub trait Recommender: Sync {
    fn rank(&self, input: UserInput<'_>) -> Result<Ranking>;
}

impl Recommender for RankerModel {
    fn rank(&self, input: UserInput<'_>) -> Result<Ranking> {
        self.score_all(input.features)
    }
}

impl Recommender for PopularityBaseline {
    fn rank(&self, input: UserInput<'_>) -> Result<Ranking> {
        PopularityBaseline::rank(self, input.user)
    }
}
