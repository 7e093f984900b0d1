//! Cold-start podcast recommendation from music listening history.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`data`]: line-delimited dataset files, a synthetic generator with planted
//!   music/podcast structure, and the per-user train/test split.
//! * [`embedding`]: skip-gram track vectors learned from playlist co-occurrence
//!   and the recency-weighted user latent vector.
//! * [`features`]: per-user sparse (demographics, top-m metadata) and dense
//!   (latent) inputs.
//! * [`ranker`]: the MLP / logistic-regression ranker trained with sampled
//!   negatives, plus popularity baselines.
//! * [`metrics`]: precision, recall, nDCG and paired bootstrap tests.
//! * [`analysis`]: cohort breakdowns, popularity-rank histograms, category
//!   log-differences and genre association reports.
//! * [`pipeline`]: the nine-model roster and helpers that glue the above.

pub mod analysis;
pub mod data;
pub mod domain;
pub mod embedding;
mod error;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod ranker;
pub mod vocab;

pub use error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
///
/// ChaCha keeps streams identical across platforms and crate versions, which the
/// byte-reproducibility guarantees rely on.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
