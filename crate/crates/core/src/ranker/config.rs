use serde::{Deserialize, Serialize};

use crate::features::FeatureSelection;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Mlp,
    /// Direct linear map from the concatenated input to the user vector.
    LogisticRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Logistic loss on the positive and `negatives` sampled podcasts.
    Sampled,
    /// Softmax cross-entropy over the whole catalog.
    FullSoftmax,
}

/// Proposal distribution for negative podcasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Training follow counts raised to 0.75.
    Popularity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerConfig {
    pub demographic_embed_dim: usize,
    pub metadata_embed_dim: usize,
    pub hidden_layers: usize,
    pub hidden_dim: usize,
    pub user_embed_dim: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub selection: FeatureSelection,
    pub architecture: Architecture,
    pub objective: Objective,
    pub proposal: Proposal,
    /// L2 penalty added to every parameter gradient.
    pub weight_decay: f64,
    pub workers: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig::desk()
    }
}

impl RankerConfig {
    /// Small network sized for laptop-scale synthetic data.
    pub fn desk() -> Self {
        RankerConfig {
            demographic_embed_dim: 10,
            metadata_embed_dim: 10,
            hidden_layers: 2,
            hidden_dim: 64,
            user_embed_dim: 40,
            negatives: 128,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 64,
            seed: 1,
            selection: FeatureSelection {
                use_demographics: true,
                use_metadata: true,
                use_latent: true,
            },
            architecture: Architecture::Mlp,
            objective: Objective::Sampled,
            proposal: Proposal::Popularity,
            weight_decay: 0.0,
            workers: 1,
        }
    }

    /// Full-size network: 512 hidden units and 2048 negatives.
    pub fn full() -> Self {
        RankerConfig {
            hidden_dim: 512,
            negatives: 2048,
            ..RankerConfig::desk()
        }
    }

    /// Turns the config into the logistic-regression variant.
    pub fn logistic(mut self) -> Self {
        self.architecture = Architecture::LogisticRegression;
        self.hidden_layers = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        let dims = [
            ("demographic_embed_dim", self.demographic_embed_dim),
            ("metadata_embed_dim", self.metadata_embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("user_embed_dim", self.user_embed_dim),
            ("negatives", self.negatives),
            ("batch_size", self.batch_size),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be at least 1")));
        }
        if self.architecture == Architecture::LogisticRegression && self.hidden_layers != 0 {
            return Err(Error::config("logistic regression requires hidden_layers = 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        Ok(())
    }
}
