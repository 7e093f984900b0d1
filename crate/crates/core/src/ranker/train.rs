//! Minibatch training with Adam.
//!
//! Negatives are drawn on the calling thread before a batch is split across
//! workers, and per-chunk gradients are summed in chunk order, so a run is
//! reproducible for a fixed seed and worker count.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Adam, ModelShape, NegativeSampler, Objective, RankerConfig, RankerModel};
use crate::domain::Follow;
use crate::features::UserFeatures;
use crate::{seeded_rng, Error, Result};

/// Training instances plus the feature table they refer to.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    /// One instance per (user, followed podcast).
    pub instances: &'a [Follow],
    /// Indexed by user id.
    pub features: &'a [UserFeatures],
    pub shape: &'a ModelShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,wall_seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:.8},{:.3}", e.epoch, e.mean_loss, e.wall_seconds);
        }
        out
    }
}

/// Mean loss and summed gradient of a slice of instances.
fn chunk_gradient(
    model: &RankerModel,
    data: &TrainingData<'_>,
    chunk: &[(Follow, Vec<usize>)],
    objective: Objective,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.params.len()];
    let mut loss = 0.0;
    for (f, negatives) in chunk {
        let features = data
            .features
            .get(f.user.index())
            .ok_or_else(|| Error::Dimension(format!("no features for user {}", f.user)))?;
        loss += model.loss_and_grad(features, f.podcast.index(), negatives, objective, &mut grad)?;
    }
    Ok((loss, grad))
}

pub fn train(data: &TrainingData<'_>, config: &RankerConfig) -> Result<(RankerModel, TrainingLog)> {
    config.validate()?;
    if data.instances.is_empty() {
        return Err(Error::config("no training instances"));
    }
    let mut rng = seeded_rng(config.seed);
    let mut model = RankerModel::initialize(config, data.shape, &mut rng)?;
    let sampler = NegativeSampler::new(config.proposal, data.shape.n_podcasts, data.instances);
    if config.objective == Objective::Sampled && config.negatives >= data.shape.n_podcasts {
        return Err(Error::config(format!(
            "{} negatives requested from a catalog of {} podcasts",
            config.negatives, data.shape.n_podcasts
        )));
    }
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut order: Vec<Follow> = data.instances.to_vec();
    let mut log = TrainingLog::default();
    let started = Instant::now();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(Follow, Vec<usize>)> = batch
                .iter()
                .map(|&f| {
                    let negs = match config.objective {
                        Objective::Sampled => sampler.sample(f.podcast.index(), config.negatives, &mut rng)?,
                        Objective::FullSoftmax => Vec::new(),
                    };
                    Ok((f, negs))
                })
                .collect::<Result<_>>()?;
            let chunk = batch.len().div_ceil(config.workers);
            let parts: Vec<Result<(f64, Vec<f64>)>> = match &pool {
                Some(pool) => pool.install(|| {
                    batch
                        .par_chunks(chunk)
                        .map(|c| chunk_gradient(&model, data, c, config.objective))
                        .collect()
                }),
                None => vec![chunk_gradient(&model, data, &batch, config.objective)],
            };
            let mut loss = 0.0;
            let mut grad = vec![0.0; model.params.len()];
            for part in parts {
                let (l, g) = match part {
                    Err(Error::NonFinite(_)) => return Err(Error::RankerDiverged { epoch, batch: b }),
                    other => other?,
                };
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() {
                return Err(Error::RankerDiverged { epoch, batch: b });
            }
            let scale = 1.0 / batch.len() as f64;
            for (g, p) in grad.iter_mut().zip(&model.params.data) {
                *g = *g * scale + config.weight_decay * p;
            }
            adam.step(&mut model.params.data, &grad);
            if model.params.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::RankerDiverged { epoch, batch: b });
            }
            total += loss;
        }
        let mean_loss = total / order.len() as f64;
        log::debug!("ranker epoch {epoch}: mean loss {mean_loss:.5}");
        log.epochs.push(EpochLog {
            epoch,
            mean_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, log))
}
