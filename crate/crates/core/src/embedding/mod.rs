//! Track embeddings from playlist co-occurrence and user latent vectors.

mod checkpoint;
mod latent;
mod skipgram;

pub use checkpoint::{read_table, write_table};
pub use latent::{user_latent, UserLatentVector, DEFAULT_HALF_LIFE_DAYS};
pub use skipgram::{generate_pairs, train_skipgram, train_skipgram_traced, SkipGramConfig};

use crate::domain::TrackId;

/// Input ("published") and output vectors for every track, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEmbeddingTable {
    pub n_tracks: usize,
    pub dim: usize,
    pub input_vectors: Vec<f32>,
    pub output_vectors: Vec<f32>,
}

impl TrackEmbeddingTable {
    pub fn input_vector(&self, track: TrackId) -> &[f32] {
        let i = track.index() * self.dim;
        &self.input_vectors[i..i + self.dim]
    }

    pub fn output_vector(&self, track: TrackId) -> &[f32] {
        let i = track.index() * self.dim;
        &self.output_vectors[i..i + self.dim]
    }

    pub fn contains(&self, track: TrackId) -> bool {
        track.index() < self.n_tracks
    }

    pub fn is_finite(&self) -> bool {
        self.input_vectors.iter().chain(&self.output_vectors).all(|x| x.is_finite())
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += f64::from(x) * f64::from(y);
        na += f64::from(x) * f64::from(x);
        nb += f64::from(y) * f64::from(y);
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}
