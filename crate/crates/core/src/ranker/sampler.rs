use rand::seq::index;

use super::Proposal;
use crate::domain::Follow;
use crate::{Error, Result, Rng};

/// Draws negative podcasts without replacement, never returning the positive.
#[derive(Debug, Clone, PartialEq)]
pub enum NegativeSampler {
    Uniform { n_podcasts: usize },
    /// Per-podcast proposal weights (follow count to the 0.75).
    Weighted { weights: Vec<f64> },
}

impl NegativeSampler {
    pub fn new(proposal: Proposal, n_podcasts: usize, follows: &[Follow]) -> Self {
        match proposal {
            Proposal::Uniform => NegativeSampler::Uniform { n_podcasts },
            Proposal::Popularity => {
                let mut counts = vec![0u64; n_podcasts];
                for f in follows {
                    counts[f.podcast.index()] += 1;
                }
                NegativeSampler::Weighted {
                    weights: counts.iter().map(|&c| (c as f64).powf(0.75)).collect(),
                }
            }
        }
    }

    pub fn n_podcasts(&self) -> usize {
        match self {
            NegativeSampler::Uniform { n_podcasts } => *n_podcasts,
            NegativeSampler::Weighted { weights } => weights.len(),
        }
    }

    pub fn sample(&self, positive: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        let n = self.n_podcasts();
        if k >= n {
            return Err(Error::config(format!(
                "{k} negatives requested from a catalog of {n} podcasts"
            )));
        }
        if positive >= n {
            return Err(Error::Dimension(format!("positive podcast {positive} outside catalog of {n}")));
        }
        let shift = |i: usize| if i >= positive { i + 1 } else { i };
        match self {
            NegativeSampler::Uniform { .. } => Ok(index::sample(rng, n - 1, k).into_iter().map(shift).collect()),
            NegativeSampler::Weighted { weights } => {
                let mut out: Vec<usize> = index::sample_weighted(rng, n - 1, |i| weights[shift(i)], k)
                    .map_err(|e| Error::config(format!("invalid proposal weights: {e}")))?
                    .into_iter()
                    .map(shift)
                    .collect();
                if out.len() < k {
                    // Not enough podcasts with positive weight: fill uniformly from the rest.
                    let rest: Vec<usize> = (0..n).filter(|&i| i != positive && !(weights[i] > 0.0)).collect();
                    out.extend(index::sample(rng, rest.len(), k - out.len()).into_iter().map(|i| rest[i]));
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PodcastId, UserId};
    use crate::seeded_rng;

    fn follows(counts: &[usize]) -> Vec<Follow> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(p, &c)| {
                (0..c).map(move |u| Follow {
                    user: UserId(u as u32),
                    podcast: PodcastId(p as u32),
                })
            })
            .collect()
    }

    #[test]
    fn forced_set_and_errors() {
        let mut rng = seeded_rng(1);
        for proposal in [Proposal::Uniform, Proposal::Popularity] {
            let s = NegativeSampler::new(proposal, 3, &follows(&[1, 1, 1]));
            let mut got = s.sample(0, 2, &mut rng).unwrap();
            got.sort_unstable();
            assert_eq!(got, vec![1, 2]);
            assert!(matches!(s.sample(0, 3, &mut rng), Err(Error::Config(_))));
        }
    }

    #[test]
    fn zero_weight_podcasts_fill_the_remainder() {
        let s = NegativeSampler::new(Proposal::Popularity, 6, &follows(&[3, 0, 2, 0, 0, 0]));
        let mut rng = seeded_rng(2);
        for _ in 0..100 {
            let mut got = s.sample(2, 4, &mut rng).unwrap();
            assert!(got.contains(&0));
            got.sort_unstable();
            got.dedup();
            assert_eq!(got.len(), 4);
            assert!(!got.contains(&2));
        }
    }

    #[test]
    fn uniform_frequencies() {
        let n = 1000;
        let s = NegativeSampler::Uniform { n_podcasts: n };
        let mut rng = seeded_rng(3);
        let mut counts = vec![0u64; n];
        // 10 draws per call: 10^7 draws keep each id's 5% band above 4 standard errors.
        let calls = 1_000_000;
        for _ in 0..calls {
            for i in s.sample(0, 10, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        let expected = (calls * 10) as f64 / 999.0;
        for &c in &counts[1..] {
            assert!((c as f64 / expected - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn popularity_law() {
        // podcast 1 has four times the follows of podcast 2; podcast 0 is the positive
        let s = NegativeSampler::new(Proposal::Popularity, 3, &follows(&[1, 40, 10]));
        let mut rng = seeded_rng(4);
        let mut counts = [0u64; 3];
        for _ in 0..1_000_000 {
            for i in s.sample(0, 1, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let ratio = counts[1] as f64 / counts[2] as f64;
        let law = 4f64.powf(0.75);
        assert!((ratio / law - 1.0).abs() < 0.10, "ratio {ratio} vs {law}");
    }
}
