//! Synthetic datasets with planted music/podcast structure.
//!
//! Every user has a latent taste cluster. Tracks, artists, genre subtrees and
//! podcasts each belong to one cluster; a user's listens and follows come from
//! their cluster with probability `1 - noise` and uniformly otherwise.
//!
//! Two optional mechanisms (off by default) make the benchmark richer:
//!
//! * `audience_boost`: every podcast has a target age bucket and gender, and
//!   in-cluster follow draws are up-weighted for matching users. This gives
//!   demographic features real signal beyond country.
//! * `eclectic_rate`: a share of users split their listening between two
//!   clusters and favour the "eclectic" shows of those two clusters, which
//!   single-cluster listeners never pick deliberately. Whether a show suits a
//!   user is then a non-additive function of what they listen to.
//! * `mainstream_share`: single-cluster users draw this share of their
//!   follows from a global pool of mainstream shows (those tagged `popular`),
//!   which eclectic users avoid. Mainstream appeal is then high at every
//!   cluster but low for listeners between clusters.
//! * `genre_focus` / `genre_boost`: every user has a favourite genre inside
//!   their cluster. In-cluster listens come from it with probability
//!   `genre_focus`, and in-cluster follow draws are up-weighted by
//!   `1 + genre_boost` for podcasts tagged with it. Playlists mix the whole
//!   cluster, so this taste is visible in listen metadata but barely in
//!   playlist co-occurrence.

use rand::Rng as _;
use rand::seq::{IndexedRandom, SliceRandom};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    Dataset, DatasetManifest, EntityCounts, FollowRecord, Line, ListenRecord, PlaylistRecord, PodcastRecord,
    RawDataset, TrackRecord, UserRecord, SECONDS_PER_DAY,
};
use crate::domain::{AgeBucket, Gender};
use crate::{seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_clusters: usize,
    pub n_users: usize,
    pub n_tracks: usize,
    pub n_podcasts: usize,
    pub n_playlists: usize,
    pub n_countries: usize,
    pub follows_per_user_mean: f64,
    pub listens_per_user_min: usize,
    pub listens_per_user_max: usize,
    pub playlist_len_mean: f64,
    /// Probability that a listen or follow ignores the user's cluster.
    pub noise: f64,
    pub seed: u64,
    pub window_days: u32,
    pub window_end: i64,
    pub genres_per_cluster: usize,
    pub micro_genres_per_genre: usize,
    pub tracks_per_artist: usize,
    /// Probability that a user's country is their cluster's home country.
    pub country_affinity: f64,
    /// Zipf exponent of podcast popularity inside a cluster.
    pub popularity_exponent: f64,
    /// Share of each cluster's most popular podcasts tagged `popular`.
    pub popular_fraction: f64,
    pub audience_boost: f64,
    pub eclectic_rate: f64,
    pub eclectic_podcast_fraction: f64,
    pub eclectic_follow_share: f64,
    pub mainstream_share: f64,
    pub genre_focus: f64,
    pub genre_boost: f64,
    /// Probability that a playlist slot holds a uniformly drawn track.
    pub playlist_noise: f64,
    /// Share of each cluster's tracks that can appear in playlists.
    pub playlist_coverage: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_clusters: 8,
            n_users: 500,
            n_tracks: 800,
            n_podcasts: 100,
            n_playlists: 1000,
            n_countries: 5,
            follows_per_user_mean: 2.9,
            listens_per_user_min: 20,
            listens_per_user_max: 60,
            playlist_len_mean: 10.0,
            noise: 0.3,
            seed: 7,
            window_days: 90,
            window_end: 1_700_000_000,
            genres_per_cluster: 2,
            micro_genres_per_genre: 3,
            tracks_per_artist: 8,
            country_affinity: 0.3,
            popularity_exponent: 1.0,
            popular_fraction: 0.1,
            audience_boost: 0.0,
            eclectic_rate: 0.0,
            eclectic_podcast_fraction: 0.15,
            eclectic_follow_share: 0.6,
            mainstream_share: 0.0,
            genre_focus: 0.0,
            genre_boost: 0.0,
            playlist_noise: 0.0,
            playlist_coverage: 1.0,
        }
    }
}

impl SyntheticConfig {
    /// The model-comparison benchmark: 5000 users, 200 podcasts, 8 clusters,
    /// noise 0.3, with every optional mechanism enabled.
    pub fn benchmark(seed: u64) -> Self {
        SyntheticConfig {
            n_users: 5000,
            n_tracks: 2000,
            n_podcasts: 200,
            n_playlists: 4000,
            seed,
            audience_boost: 4.5,
            eclectic_rate: 0.4,
            mainstream_share: 0.5,
            genre_focus: 0.5,
            genre_boost: 2.0,
            playlist_coverage: 0.3,
            ..SyntheticConfig::default()
        }
    }

    /// 500-user version of [`SyntheticConfig::benchmark`].
    pub fn desk(seed: u64) -> Self {
        SyntheticConfig {
            n_users: 500,
            n_tracks: 800,
            n_podcasts: 100,
            n_playlists: 1000,
            ..SyntheticConfig::benchmark(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("noise", self.noise)?;
        unit("country_affinity", self.country_affinity)?;
        unit("popular_fraction", self.popular_fraction)?;
        unit("eclectic_rate", self.eclectic_rate)?;
        unit("eclectic_podcast_fraction", self.eclectic_podcast_fraction)?;
        unit("eclectic_follow_share", self.eclectic_follow_share)?;
        unit("genre_focus", self.genre_focus)?;
        unit("mainstream_share", self.mainstream_share)?;
        unit("playlist_noise", self.playlist_noise)?;
        unit("playlist_coverage", self.playlist_coverage)?;
        for (name, v) in [
            ("n_clusters", self.n_clusters),
            ("n_users", self.n_users),
            ("n_tracks", self.n_tracks),
            ("n_podcasts", self.n_podcasts),
            ("n_playlists", self.n_playlists),
            ("n_countries", self.n_countries),
            ("genres_per_cluster", self.genres_per_cluster),
            ("micro_genres_per_genre", self.micro_genres_per_genre),
            ("tracks_per_artist", self.tracks_per_artist),
            ("listens_per_user_max", self.listens_per_user_max),
            ("window_days", self.window_days as usize),
        ] {
            if v < 1 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.listens_per_user_min > self.listens_per_user_max {
            return Err(Error::config("listens_per_user_min exceeds listens_per_user_max"));
        }
        if self.follows_per_user_mean < 1.0 || !self.follows_per_user_mean.is_finite() {
            return Err(Error::config("follows_per_user_mean must be at least 1"));
        }
        if self.playlist_len_mean < 2.0 || !self.playlist_len_mean.is_finite() {
            return Err(Error::config("playlist_len_mean must be at least 2"));
        }
        if self.audience_boost < 0.0 || self.popularity_exponent < 0.0 || self.genre_boost < 0.0 {
            return Err(Error::config("audience_boost, genre_boost and popularity_exponent must be non-negative"));
        }
        if self.n_tracks < 2 * self.n_clusters {
            return Err(Error::config(format!(
                "{} tracks cannot populate {} clusters (need 2 per cluster)",
                self.n_tracks, self.n_clusters
            )));
        }
        if self.n_podcasts < self.n_clusters {
            return Err(Error::config(format!(
                "{} podcasts cannot populate {} clusters",
                self.n_podcasts, self.n_clusters
            )));
        }
        if self.eclectic_rate > 0.0 && self.n_clusters < 2 {
            return Err(Error::config("eclectic users need at least 2 clusters"));
        }
        if self.eclectic_rate > 0.0 && self.n_podcasts < 2 * self.n_clusters {
            return Err(Error::config("eclectic podcasts need at least 2 podcasts per cluster"));
        }
        Ok(())
    }
}

/// What the generator planted, for tests and diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedStructure {
    pub user_cluster: Vec<usize>,
    pub user_secondary_cluster: Vec<Option<usize>>,
    pub track_cluster: Vec<usize>,
    pub podcast_cluster: Vec<usize>,
    pub podcast_eclectic: Vec<bool>,
    /// Genre index (within its cluster) of every podcast.
    pub podcast_genre: Vec<usize>,
    /// Favourite genre (within the user's cluster); `None` when the genre knobs are off.
    pub user_genre: Vec<Option<usize>>,
    /// Meta-genre index owned by each cluster.
    pub cluster_meta_genre: Vec<usize>,
}

fn block_of(i: usize, n: usize, k: usize) -> usize {
    i * k / n
}

fn weighted_pick(rng: &mut Rng, items: &[usize], weight: impl Fn(usize) -> f64) -> usize {
    let total: f64 = items.iter().map(|&i| weight(i)).sum();
    let mut x = rng.random::<f64>() * total;
    for &i in items {
        x -= weight(i);
        if x < 0.0 {
            return i;
        }
    }
    *items.last().expect("non-empty pool")
}

const GENDER_WEIGHTS: [f64; 4] = [0.45, 0.45, 0.05, 0.05];
const AGE_WEIGHTS: [f64; 8] = [0.05, 0.2, 0.2, 0.15, 0.15, 0.1, 0.05, 0.1];

fn pick_index(rng: &mut Rng, weights: &[f64]) -> usize {
    let idx: Vec<usize> = (0..weights.len()).collect();
    weighted_pick(rng, &idx, |i| weights[i])
}

/// Generates a dataset; identical configs give identical datasets.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let cfg = config;
    let k = cfg.n_clusters;
    let mut rng = seeded_rng(cfg.seed);
    let width = |n: usize| n.to_string().len().max(4);
    let (uw, tw, pw, lw) = (width(cfg.n_users), width(cfg.n_tracks), width(cfg.n_podcasts), width(cfg.n_playlists));

    // Tracks: contiguous cluster blocks; artists own consecutive tracks and one micro-genre.
    let micro_per_cluster = cfg.genres_per_cluster * cfg.micro_genres_per_genre;
    let mut tracks = Vec::with_capacity(cfg.n_tracks);
    let mut track_cluster = Vec::with_capacity(cfg.n_tracks);
    let mut cluster_tracks = vec![Vec::new(); k];
    let mut genre_tracks = vec![vec![Vec::new(); cfg.genres_per_cluster]; k];
    for t in 0..cfg.n_tracks {
        let c = block_of(t, cfg.n_tracks, k);
        let local = cluster_tracks[c].len();
        let artist = local / cfg.tracks_per_artist;
        let micro = artist % micro_per_cluster;
        let genre = micro / cfg.micro_genres_per_genre;
        tracks.push(Line {
            line: t + 1,
            value: TrackRecord {
                id: format!("t{t:0tw$}"),
                artist: format!("a{c:02}-{artist:04}"),
                meta_genre: format!("meta{c:02}"),
                genre: format!("genre{c:02}-{genre:02}"),
                micro_genre: format!("micro{c:02}-{genre:02}-{:02}", micro % cfg.micro_genres_per_genre),
            },
        });
        track_cluster.push(c);
        cluster_tracks[c].push(t);
        genre_tracks[c][genre].push(t);
    }

    // Podcasts: contiguous cluster blocks with a shuffled Zipf popularity inside each block.
    let mut podcast_cluster = Vec::with_capacity(cfg.n_podcasts);
    let mut cluster_podcasts = vec![Vec::new(); k];
    let mut podcast_genre = Vec::with_capacity(cfg.n_podcasts);
    for p in 0..cfg.n_podcasts {
        let c = block_of(p, cfg.n_podcasts, k);
        podcast_cluster.push(c);
        podcast_genre.push(cluster_podcasts[c].len() % cfg.genres_per_cluster);
        cluster_podcasts[c].push(p);
    }
    let mut popularity = vec![0.0; cfg.n_podcasts];
    let mut popular = vec![false; cfg.n_podcasts];
    let mut eclectic = vec![false; cfg.n_podcasts];
    for members in &cluster_podcasts {
        let mut order = members.clone();
        order.shuffle(&mut rng);
        let n_popular = (cfg.popular_fraction * order.len() as f64).ceil() as usize;
        for (rank, &p) in order.iter().enumerate() {
            popularity[p] = 1.0 / ((rank + 1) as f64).powf(cfg.popularity_exponent);
            popular[p] = rank < n_popular;
        }
        if cfg.eclectic_rate > 0.0 {
            let n_eclectic = ((cfg.eclectic_podcast_fraction * members.len() as f64).ceil() as usize)
                .clamp(1, members.len() - 1);
            let mut pick = members.clone();
            pick.shuffle(&mut rng);
            for &p in &pick[..n_eclectic] {
                eclectic[p] = true;
            }
        }
    }
    let audience: Vec<(usize, usize)> = (0..cfg.n_podcasts)
        .map(|_| (rng.random_range(0..AgeBucket::ALL.len()), rng.random_range(0..2)))
        .collect();
    let regular_pool: Vec<Vec<usize>> = cluster_podcasts
        .iter()
        .map(|m| m.iter().copied().filter(|&p| !eclectic[p]).collect())
        .collect();
    let mainstream_pool: Vec<usize> = (0..cfg.n_podcasts).filter(|&p| popular[p] && !eclectic[p]).collect();
    let eclectic_pool: Vec<Vec<usize>> = cluster_podcasts
        .iter()
        .map(|m| m.iter().copied().filter(|&p| eclectic[p]).collect())
        .collect();

    let countries: Vec<String> = (0..cfg.n_countries).map(|c| format!("country{c:02}")).collect();
    let (start, end) = (
        cfg.window_end - i64::from(cfg.window_days) * SECONDS_PER_DAY,
        cfg.window_end,
    );
    let follow_extra = Poisson::new(cfg.follows_per_user_mean - 1.0).ok();

    let mut users = Vec::with_capacity(cfg.n_users);
    let mut listens = Vec::new();
    let mut follows = Vec::new();
    let mut user_cluster = Vec::with_capacity(cfg.n_users);
    let mut user_secondary = Vec::with_capacity(cfg.n_users);
    let mut user_genre = Vec::with_capacity(cfg.n_users);
    let genre_taste = cfg.genre_focus > 0.0 || cfg.genre_boost > 0.0;
    for u in 0..cfg.n_users {
        let uid = format!("u{u:0uw$}");
        let c = rng.random_range(0..k);
        let secondary = if cfg.eclectic_rate > 0.0 && rng.random::<f64>() < cfg.eclectic_rate {
            let mut c2 = rng.random_range(0..k - 1);
            if c2 >= c {
                c2 += 1;
            }
            Some(c2)
        } else {
            None
        };
        let country = if rng.random::<f64>() < cfg.country_affinity {
            c % cfg.n_countries
        } else {
            rng.random_range(0..cfg.n_countries)
        };
        let gender = pick_index(&mut rng, &GENDER_WEIGHTS);
        let age = pick_index(&mut rng, &AGE_WEIGHTS);
        let favourite = genre_taste.then(|| rng.random_range(0..cfg.genres_per_cluster));
        let account_age_days = (rng.random::<f64>() * 2000f64.ln()).exp().floor() as u32;
        users.push(Line {
            line: u + 1,
            value: UserRecord {
                id: uid.clone(),
                country: countries[country].clone(),
                gender: Gender::ALL[gender].as_str().to_owned(),
                age_bucket: AgeBucket::ALL[age].as_str().to_owned(),
                account_age_days: Some(account_age_days.max(1)),
            },
        });

        let taste_cluster = |rng: &mut Rng| match secondary {
            Some(c2) if rng.random::<f64>() < 0.5 => c2,
            _ => c,
        };

        let n_listens = rng.random_range(cfg.listens_per_user_min..=cfg.listens_per_user_max);
        for _ in 0..n_listens {
            let t = if rng.random::<f64>() < cfg.noise {
                rng.random_range(0..cfg.n_tracks)
            } else {
                let cluster = taste_cluster(&mut rng);
                let pool = match favourite {
                    Some(g) if cluster == c && !genre_tracks[c][g].is_empty() && rng.random::<f64>() < cfg.genre_focus => {
                        &genre_tracks[c][g]
                    }
                    _ => &cluster_tracks[cluster],
                };
                pool[rng.random_range(0..pool.len())]
            };
            listens.push(Line {
                line: listens.len() + 1,
                value: ListenRecord {
                    user: uid.clone(),
                    track: tracks[t].value.id.clone(),
                    ts: rng.random_range(start..=end),
                },
            });
        }

        let extra = follow_extra.map_or(0, |d| d.sample(&mut rng) as usize);
        let n_follows = (1 + extra).min(cfg.n_podcasts);
        let affinity = |p: usize| {
            let (a, g) = audience[p];
            let boost = |hit: bool| if hit { 1.0 + cfg.audience_boost } else { 1.0 };
            let genre = match favourite {
                Some(fg) if podcast_cluster[p] == c && podcast_genre[p] == fg => 1.0 + cfg.genre_boost,
                _ => 1.0,
            };
            popularity[p] * boost(a == age) * boost(g == gender) * genre
        };
        let mut chosen: Vec<usize> = Vec::with_capacity(n_follows);
        let mut attempts = 0;
        while chosen.len() < n_follows && attempts < 100 * n_follows {
            attempts += 1;
            let p = if rng.random::<f64>() < cfg.noise {
                rng.random_range(0..cfg.n_podcasts)
            } else if secondary.is_none()
                && cfg.mainstream_share > 0.0
                && !mainstream_pool.is_empty()
                && rng.random::<f64>() < cfg.mainstream_share
            {
                weighted_pick(&mut rng, &mainstream_pool, affinity)
            } else if let Some(c2) = secondary.filter(|_| rng.random::<f64>() < cfg.eclectic_follow_share) {
                let pool = if rng.random::<f64>() < 0.5 { &eclectic_pool[c] } else { &eclectic_pool[c2] };
                weighted_pick(&mut rng, pool, affinity)
            } else {
                let cluster = taste_cluster(&mut rng);
                weighted_pick(&mut rng, &regular_pool[cluster], affinity)
            };
            if !chosen.contains(&p) {
                chosen.push(p);
            }
        }
        for p in chosen {
            follows.push(Line {
                line: follows.len() + 1,
                value: FollowRecord {
                    user: uid.clone(),
                    podcast: format!("pod{p:0pw$}"),
                },
            });
        }
        user_cluster.push(c);
        user_secondary.push(secondary);
        user_genre.push(favourite);
    }

    let playlist_extra = Poisson::new(cfg.playlist_len_mean - 2.0).ok();
    let mut playlists = Vec::with_capacity(cfg.n_playlists);
    for l in 0..cfg.n_playlists {
        let pool = &cluster_tracks[rng.random_range(0..k)];
        let pool = &pool[..((cfg.playlist_coverage * pool.len() as f64).ceil() as usize).clamp(1, pool.len())];
        let len = (2 + playlist_extra.map_or(0, |d| d.sample(&mut rng) as usize)).min(pool.len());
        let mut picked: Vec<usize> = pool.choose_multiple(&mut rng, len).copied().collect();
        if cfg.playlist_noise > 0.0 {
            for i in 0..picked.len() {
                if rng.random::<f64>() < cfg.playlist_noise {
                    let t = rng.random_range(0..cfg.n_tracks);
                    if !picked.contains(&t) {
                        picked[i] = t;
                    }
                }
            }
        }
        let picked: Vec<String> = picked.iter().map(|&t| tracks[t].value.id.clone()).collect();
        playlists.push(Line {
            line: l + 1,
            value: PlaylistRecord {
                id: format!("pl{l:0lw$}"),
                tracks: picked,
            },
        });
    }

    let podcasts: Vec<Line<PodcastRecord>> = (0..cfg.n_podcasts)
        .map(|p| {
            let mut categories = vec![format!("cluster{:02}", podcast_cluster[p])];
            if popular[p] {
                categories.push("popular".to_owned());
            }
            Line {
                line: p + 1,
                value: PodcastRecord {
                    id: format!("pod{p:0pw$}"),
                    categories,
                },
            }
        })
        .collect();

    let counts = EntityCounts {
        users: users.len(),
        listens: listens.len(),
        tracks: tracks.len(),
        playlists: playlists.len(),
        follows: follows.len(),
        podcasts: Some(podcasts.len()),
    };
    let raw = RawDataset {
        users,
        listens,
        tracks,
        playlists,
        follows,
        podcasts: Some(podcasts),
        manifest: DatasetManifest {
            window_days: cfg.window_days,
            window_end: cfg.window_end,
            countries,
            counts,
            seed: Some(cfg.seed),
        },
    };
    let mut dataset = Dataset::from_raw(raw)?;
    dataset.planted = Some(PlantedStructure {
        user_cluster,
        user_secondary_cluster: user_secondary,
        track_cluster,
        podcast_cluster,
        podcast_eclectic: eclectic,
        podcast_genre,
        user_genre,
        cluster_meta_genre: (0..k).collect(),
    });
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn noise_free_follows_stay_in_cluster() {
        let cfg = SyntheticConfig {
            n_clusters: 2,
            noise: 0.0,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let planted = ds.planted.as_ref().unwrap();
        for f in &ds.follows {
            assert_eq!(planted.podcast_cluster[f.podcast.index()], planted.user_cluster[f.user.index()]);
        }
        for l in &ds.listens {
            assert_eq!(planted.track_cluster[l.track.index()], planted.user_cluster[l.user.index()]);
        }
    }

    #[test]
    fn full_noise_is_independent_of_cluster() {
        let cfg = SyntheticConfig {
            n_users: 5000,
            noise: 1.0,
            seed: 11,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let planted = ds.planted.as_ref().unwrap();
        let k = cfg.n_clusters;
        let mut table = vec![vec![0.0f64; k]; k];
        for f in &ds.follows {
            table[planted.user_cluster[f.user.index()]][planted.podcast_cluster[f.podcast.index()]] += 1.0;
        }
        let total: f64 = table.iter().flatten().sum();
        let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let mut stat = 0.0;
        for i in 0..k {
            for j in 0..k {
                let expected = rows[i] * cols[j] / total;
                stat += (table[i][j] - expected).powi(2) / expected;
            }
        }
        let critical = ChiSquared::new(((k - 1) * (k - 1)) as f64).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SyntheticConfig::desk(3);
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = SyntheticConfig::desk(4);
        assert_ne!(generate_synthetic(&cfg).unwrap().follows, generate_synthetic(&other).unwrap().follows);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad_noise = SyntheticConfig { noise: 1.5, ..SyntheticConfig::default() };
        assert!(matches!(generate_synthetic(&bad_noise), Err(Error::Config(_))));
        let too_few = SyntheticConfig { n_podcasts: 3, ..SyntheticConfig::default() };
        assert!(matches!(generate_synthetic(&too_few), Err(Error::Config(_))));
    }

    #[test]
    fn genre_subtrees_are_cluster_aligned_and_follows_average_near_target() {
        let ds = generate_synthetic(&SyntheticConfig::benchmark(1)).unwrap();
        let planted = ds.planted.as_ref().unwrap();
        for t in &ds.tracks {
            let c = planted.track_cluster[t.track.index()];
            assert_eq!(ds.taxonomy.meta_genres[t.meta_genre.index()], format!("meta{c:02}"));
        }
        let mean = ds.follows.len() as f64 / ds.n_users() as f64;
        assert!((mean - 2.9).abs() < 0.1, "mean follows {mean}");
        assert!(ds.playlists.iter().all(|p| p.tracks.len() >= 2));
    }
}
