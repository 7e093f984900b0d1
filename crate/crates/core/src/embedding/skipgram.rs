//! Skip-gram with negative sampling over playlists.
//!
//! The context window is the whole playlist: every track predicts every other
//! track of the same playlist. For long playlists at most
//! `max_contexts_per_center` contexts are sampled per center and epoch.

use std::sync::atomic::{AtomicU32, Ordering};

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::TrackEmbeddingTable;
use crate::domain::{Playlist, TrackId};
use crate::{seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly over training.
    pub learning_rate: f32,
    pub negatives_per_pair: usize,
    pub seed: u64,
    /// 1 = deterministic; more workers update the shared tables without locks.
    pub workers: usize,
    pub max_contexts_per_center: usize,
    /// Share of playlists held out for the per-epoch loss monitor.
    pub holdout_fraction: f64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 40,
            epochs: 5,
            learning_rate: 0.025,
            negatives_per_pair: 5,
            seed: 1,
            workers: 1,
            max_contexts_per_center: 20,
            holdout_fraction: 0.02,
        }
    }
}

impl SkipGramConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config("skip-gram dim must be at least 1"));
        }
        if self.negatives_per_pair < 1 {
            return Err(Error::config("negatives_per_pair must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("skip-gram learning_rate must be positive"));
        }
        if self.workers < 1 || self.max_contexts_per_center < 1 {
            return Err(Error::config("workers and max_contexts_per_center must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::config("holdout_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// All ordered `(center, context)` pairs of distinct positions in the playlist.
pub fn generate_pairs(playlist: &Playlist) -> Vec<(TrackId, TrackId)> {
    let t = &playlist.tracks;
    if t.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(t.len() * (t.len() - 1));
    for (i, &center) in t.iter().enumerate() {
        for (j, &context) in t.iter().enumerate() {
            if i != j {
                out.push((center, context));
            }
        }
    }
    out
}

/// f32 cells shared between hogwild workers. Relaxed loads/stores compile to
/// plain moves, so the single-worker path pays nothing for it.
struct SharedMatrix(Vec<AtomicU32>);

impl SharedMatrix {
    fn from_slice(v: &[f32]) -> Self {
        SharedMatrix(v.iter().map(|x| AtomicU32::new(x.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, i: usize, x: f32) {
        self.0[i].store(x.to_bits(), Ordering::Relaxed)
    }

    fn into_vec(self) -> Vec<f32> {
        self.0.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

/// Cumulative unigram^0.75 distribution over tracks.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn initial_table(n_tracks: usize, dim: usize, rng: &mut Rng) -> TrackEmbeddingTable {
    let bound = 0.5 / dim as f32;
    let input_vectors = (0..n_tracks * dim).map(|_| rng.random_range(-bound..=bound)).collect();
    let output_vectors = (0..n_tracks * dim).map(|_| rng.random_range(-bound..=bound)).collect();
    TrackEmbeddingTable {
        n_tracks,
        dim,
        input_vectors,
        output_vectors,
    }
}

struct Trainer<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    dim: usize,
    noise: &'a NoiseTable,
    negatives: usize,
}

impl Trainer<'_> {
    /// One SGD step on a pair; returns the pre-update score of the positive.
    fn step(&self, center: usize, context: usize, lr: f32, rng: &mut Rng, grad: &mut [f32]) -> f32 {
        let d = self.dim;
        let ci = center * d;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut positive_score = 0.0;
        for n in 0..=self.negatives {
            let (target, label) = if n == 0 {
                (context, 1.0)
            } else {
                let t = self.noise.sample(rng);
                if t == context {
                    continue;
                }
                (t, 0.0)
            };
            let ti = target * d;
            let mut f = 0.0f32;
            for j in 0..d {
                f += self.input.get(ci + j) * self.output.get(ti + j);
            }
            if n == 0 {
                positive_score = f;
            }
            let g = (label - sigmoid(f)) * lr;
            for j in 0..d {
                let out = self.output.get(ti + j);
                grad[j] += g * out;
                self.output.set(ti + j, out + g * self.input.get(ci + j));
            }
        }
        for j in 0..d {
            self.input.set(ci + j, self.input.get(ci + j) + grad[j]);
        }
        positive_score
    }
}

fn monitor_loss(table_in: &SharedMatrix, table_out: &SharedMatrix, dim: usize, sample: &[(usize, usize, Vec<usize>)]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let dot = |a: usize, b: usize| -> f64 {
        (0..dim)
            .map(|j| f64::from(table_in.get(a * dim + j)) * f64::from(table_out.get(b * dim + j)))
            .sum()
    };
    let total: f64 = sample
        .iter()
        .map(|(c, o, negs)| {
            -(log_sigmoid(dot(*c, *o)) + negs.iter().map(|&n| log_sigmoid(-dot(*c, n))).sum::<f64>())
        })
        .sum();
    total / sample.len() as f64
}

/// Trains track vectors. See [`train_skipgram_traced`] for the loss trace.
pub fn train_skipgram(playlists: &[Playlist], n_tracks: usize, config: &SkipGramConfig) -> Result<TrackEmbeddingTable> {
    train_skipgram_traced(playlists, n_tracks, config).map(|(t, _)| t)
}

/// Trains track vectors and returns the monitor loss before training and
/// after every epoch (`epochs + 1` values), measured on a fixed sample of
/// pairs from held-out playlists with fixed negatives.
pub fn train_skipgram_traced(
    playlists: &[Playlist],
    n_tracks: usize,
    config: &SkipGramConfig,
) -> Result<(TrackEmbeddingTable, Vec<f64>)> {
    config.validate()?;
    if playlists.is_empty() {
        return Err(Error::config("skip-gram training needs at least one playlist"));
    }
    if let Some(t) = playlists.iter().flat_map(|p| &p.tracks).find(|t| t.index() >= n_tracks) {
        return Err(Error::UnknownTrack(t.to_string()));
    }
    let mut rng = seeded_rng(config.seed);
    let init = initial_table(n_tracks, config.dim, &mut rng);

    // Hold out a few playlists for the loss monitor.
    let n_holdout = if playlists.len() >= 10 {
        ((playlists.len() as f64 * config.holdout_fraction).round() as usize).min(playlists.len() - 1)
    } else {
        0
    };
    let mut order: Vec<usize> = (0..playlists.len()).collect();
    order.shuffle(&mut rng);
    let mut holdout = order[..n_holdout].to_vec();
    let mut train: Vec<usize> = order[n_holdout..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();

    let mut counts = vec![0u64; n_tracks];
    for &p in &train {
        for t in &playlists[p].tracks {
            counts[t.index()] += 1;
        }
    }
    let noise = NoiseTable::new(&counts);

    let monitor_source: Vec<(TrackId, TrackId)> = if holdout.is_empty() {
        train.iter().flat_map(|&p| generate_pairs(&playlists[p])).collect()
    } else {
        holdout.iter().flat_map(|&p| generate_pairs(&playlists[p])).collect()
    };
    let n_monitor = monitor_source.len().min(2000);
    let monitor: Vec<(usize, usize, Vec<usize>)> = index::sample(&mut rng, monitor_source.len(), n_monitor)
        .into_iter()
        .map(|i| {
            let (c, o) = monitor_source[i];
            let negs = (0..config.negatives_per_pair).map(|_| noise.sample(&mut rng)).collect();
            (c.index(), o.index(), negs)
        })
        .collect();

    let trainer = Trainer {
        input: SharedMatrix::from_slice(&init.input_vectors),
        output: SharedMatrix::from_slice(&init.output_vectors),
        dim: config.dim,
        noise: &noise,
        negatives: config.negatives_per_pair,
    };
    let mut trace = vec![monitor_loss(&trainer.input, &trainer.output, config.dim, &monitor)];

    let pairs_per_epoch: usize = train
        .iter()
        .map(|&p| {
            let l = playlists[p].tracks.len();
            if l < 2 { 0 } else { l * (l - 1).min(config.max_contexts_per_center) }
        })
        .sum();
    let total_pairs = (pairs_per_epoch * config.epochs).max(1) as f32;

    for epoch in 0..config.epochs {
        // Pair list for this epoch, with per-center context sampling for long playlists.
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(pairs_per_epoch);
        for &p in &train {
            let tracks = &playlists[p].tracks;
            let l = tracks.len();
            if l < 2 {
                continue;
            }
            for (i, &center) in tracks.iter().enumerate() {
                if l - 1 <= config.max_contexts_per_center {
                    pairs.extend(tracks.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &o)| (center.0, o.0)));
                } else {
                    for j in index::sample(&mut rng, l - 1, config.max_contexts_per_center) {
                        let j = if j >= i { j + 1 } else { j };
                        pairs.push((center.0, tracks[j].0));
                    }
                }
            }
        }
        pairs.shuffle(&mut rng);
        let done_before = (epoch * pairs_per_epoch) as f32;

        let run_shard = |shard: &[(u32, u32)], offset: usize, rng: &mut Rng| -> Result<()> {
            let mut grad = vec![0.0f32; config.dim];
            for (k, &(c, o)) in shard.iter().enumerate() {
                let progress = (done_before + (offset + k) as f32) / total_pairs;
                let lr = config.learning_rate * (1.0 - progress).max(1e-4);
                let score = trainer.step(c as usize, o as usize, lr, rng, &mut grad);
                if !score.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::SkipGramDiverged { epoch, pair: offset + k });
                }
            }
            Ok(())
        };

        if config.workers == 1 {
            run_shard(&pairs, 0, &mut rng)?;
        } else {
            let chunk = pairs.len().div_ceil(config.workers).max(1);
            let seeds: Vec<u64> = (0..config.workers).map(|_| rng.random()).collect();
            std::thread::scope(|s| {
                let handles: Vec<_> = pairs
                    .chunks(chunk)
                    .zip(&seeds)
                    .enumerate()
                    .map(|(w, (shard, &seed))| {
                        let run_shard = &run_shard;
                        s.spawn(move || run_shard(shard, w * chunk, &mut seeded_rng(seed)))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("skip-gram worker panicked"))
                    .collect::<Result<Vec<()>>>()
            })?;
        }
        let loss = monitor_loss(&trainer.input, &trainer.output, config.dim, &monitor);
        log::debug!("skip-gram epoch {epoch}: monitor loss {loss:.5}");
        trace.push(loss);
    }

    let table = TrackEmbeddingTable {
        n_tracks,
        dim: config.dim,
        input_vectors: trainer.input.into_vec(),
        output_vectors: trainer.output.into_vec(),
    };
    Ok((table, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PlaylistId;
    use crate::embedding::cosine;

    fn playlist(ids: &[u32]) -> Playlist {
        Playlist {
            id: PlaylistId(0),
            tracks: ids.iter().map(|&t| TrackId(t)).collect(),
        }
    }

    #[test]
    fn pairs_cover_every_ordered_pair() {
        let (a, b, c) = (TrackId(0), TrackId(1), TrackId(2));
        assert_eq!(
            generate_pairs(&playlist(&[0, 1, 2])),
            vec![(a, b), (a, c), (b, a), (b, c), (c, a), (c, b)]
        );
        assert_eq!(generate_pairs(&playlist(&[0, 1])), vec![(a, b), (b, a)]);
        assert!(generate_pairs(&playlist(&[0])).is_empty());
        for l in 0..12u32 {
            let ids: Vec<u32> = (0..l).collect();
            let n = l as usize;
            assert_eq!(generate_pairs(&playlist(&ids)).len(), n * n.saturating_sub(1));
        }
    }

    /// Two track communities; playlists never mix them.
    pub(crate) fn two_communities(n_tracks: usize, n_playlists: usize, seed: u64) -> Vec<Playlist> {
        let mut rng = seeded_rng(seed);
        let half = n_tracks / 2;
        (0..n_playlists)
            .map(|i| {
                let base = if i % 2 == 0 { 0 } else { half };
                let picked = index::sample(&mut rng, half, 10);
                Playlist {
                    id: PlaylistId(i as u32),
                    tracks: picked.into_iter().map(|t| TrackId((base + t) as u32)).collect(),
                }
            })
            .collect()
    }

    pub(crate) fn community_gap(table: &TrackEmbeddingTable) -> f64 {
        let half = table.n_tracks / 2;
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for a in 0..table.n_tracks {
            for b in (a + 1)..table.n_tracks {
                let c = cosine(table.input_vector(TrackId(a as u32)), table.input_vector(TrackId(b as u32)));
                if (a < half) == (b < half) {
                    within += c;
                    nw += 1;
                } else {
                    cross += c;
                    nc += 1;
                }
            }
        }
        within / nw as f64 - cross / nc as f64
    }

    #[test]
    fn separates_planted_communities() {
        let playlists = two_communities(100, 400, 3);
        let table = train_skipgram(&playlists, 100, &SkipGramConfig::default()).unwrap();
        let gap = community_gap(&table);
        assert!(gap > 0.2, "gap {gap}");
    }

    #[test]
    fn zero_epochs_returns_initialisation_and_training_is_deterministic() {
        let playlists = two_communities(40, 50, 1);
        let cfg = SkipGramConfig { epochs: 0, ..SkipGramConfig::default() };
        let t0 = train_skipgram(&playlists, 40, &cfg).unwrap();
        let expected = initial_table(40, cfg.dim, &mut seeded_rng(cfg.seed));
        assert_eq!(t0, expected);

        let cfg = SkipGramConfig { epochs: 2, ..SkipGramConfig::default() };
        assert_eq!(
            train_skipgram(&playlists, 40, &cfg).unwrap(),
            train_skipgram(&playlists, 40, &cfg).unwrap()
        );
    }

    #[test]
    fn monitor_loss_does_not_increase_beyond_tolerance() {
        let playlists = two_communities(100, 400, 5);
        let cfg = SkipGramConfig { epochs: 8, ..SkipGramConfig::default() };
        let (_, trace) = train_skipgram_traced(&playlists, 100, &cfg).unwrap();
        assert_eq!(trace.len(), 9);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "trace {trace:?}");
        }
        assert!(trace.last().unwrap() < &trace[0]);
    }

    #[test]
    fn parallel_workers_train_finite_tables() {
        let playlists = two_communities(100, 400, 7);
        let cfg = SkipGramConfig { workers: 3, ..SkipGramConfig::default() };
        let table = train_skipgram(&playlists, 100, &cfg).unwrap();
        assert!(table.is_finite());
        assert!(community_gap(&table) > 0.2);
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let playlists = two_communities(20, 20, 1);
        let cfg = SkipGramConfig { learning_rate: 1e30, ..SkipGramConfig::default() };
        assert!(matches!(
            train_skipgram(&playlists, 20, &cfg),
            Err(Error::SkipGramDiverged { epoch: 0, .. })
        ));
    }

    #[test]
    fn long_playlists_cap_contexts() {
        let ids: Vec<u32> = (0..30).collect();
        let playlists = vec![playlist(&ids)];
        let cfg = SkipGramConfig { epochs: 1, max_contexts_per_center: 4, ..SkipGramConfig::default() };
        assert!(train_skipgram(&playlists, 30, &cfg).unwrap().is_finite());
    }
}
