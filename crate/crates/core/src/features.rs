//! Per-user ranker inputs: demographics, top-m listened metadata, latent vector.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::domain::{AgeBucket, ArtistId, CountryId, Gender, GenreId, GenreLevel, ListenEvent, TrackMetadata, User, UserId};
use crate::embedding::{user_latent, TrackEmbeddingTable, UserLatentVector, DEFAULT_HALF_LIFE_DAYS};
use crate::{Error, Result};

pub const DEFAULT_TOP_M: usize = 10;

/// Which feature families feed the ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub use_demographics: bool,
    pub use_metadata: bool,
    pub use_latent: bool,
}

impl FeatureSelection {
    pub fn new(use_demographics: bool, use_metadata: bool, use_latent: bool) -> Result<Self> {
        let s = FeatureSelection {
            use_demographics,
            use_metadata,
            use_latent,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_demographics || self.use_metadata || self.use_latent {
            Ok(())
        } else {
            Err(Error::config("feature selection must enable at least one feature family"))
        }
    }
}

/// Sparse input groups, each with its own embedding table in the ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseGroup {
    Country,
    Gender,
    AgeBucket,
    Artists,
    MetaGenres,
    Genres,
    MicroGenres,
}

impl SparseGroup {
    pub const ALL: [SparseGroup; 7] = [
        SparseGroup::Country,
        SparseGroup::Gender,
        SparseGroup::AgeBucket,
        SparseGroup::Artists,
        SparseGroup::MetaGenres,
        SparseGroup::Genres,
        SparseGroup::MicroGenres,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SparseGroup::Country => "country",
            SparseGroup::Gender => "gender",
            SparseGroup::AgeBucket => "age_bucket",
            SparseGroup::Artists => "artists",
            SparseGroup::MetaGenres => "meta_genres",
            SparseGroup::Genres => "genres",
            SparseGroup::MicroGenres => "micro_genres",
        }
    }

    pub fn is_demographic(self) -> bool {
        matches!(self, SparseGroup::Country | SparseGroup::Gender | SparseGroup::AgeBucket)
    }

    pub fn enabled(self, selection: &FeatureSelection) -> bool {
        if self.is_demographic() {
            selection.use_demographics
        } else {
            selection.use_metadata
        }
    }

    /// Vocabulary size of the group for a dataset.
    pub fn cardinality(self, dataset: &Dataset) -> usize {
        match self {
            SparseGroup::Country => dataset.vocab.countries.len(),
            SparseGroup::Gender => Gender::ALL.len(),
            SparseGroup::AgeBucket => AgeBucket::ALL.len(),
            SparseGroup::Artists => dataset.vocab.artists.len(),
            SparseGroup::MetaGenres => dataset.taxonomy.len(GenreLevel::MetaGenre),
            SparseGroup::Genres => dataset.taxonomy.len(GenreLevel::Genre),
            SparseGroup::MicroGenres => dataset.taxonomy.len(GenreLevel::MicroGenre),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseFeatureBundle {
    pub country: Option<CountryId>,
    pub gender: Option<Gender>,
    pub age_bucket: Option<AgeBucket>,
    /// Descending play count, ties by ascending id.
    pub top_artists: Vec<ArtistId>,
    pub top_meta_genres: Vec<GenreId>,
    pub top_genres: Vec<GenreId>,
    pub top_micro_genres: Vec<GenreId>,
}

impl SparseFeatureBundle {
    /// Dense ids of the entries of one group.
    pub fn entries(&self, group: SparseGroup) -> Vec<u32> {
        match group {
            SparseGroup::Country => self.country.iter().map(|c| c.0).collect(),
            SparseGroup::Gender => self.gender.iter().map(|g| g.index() as u32).collect(),
            SparseGroup::AgeBucket => self.age_bucket.iter().map(|a| a.index() as u32).collect(),
            SparseGroup::Artists => self.top_artists.iter().map(|a| a.0).collect(),
            SparseGroup::MetaGenres => self.top_meta_genres.iter().map(|g| g.0).collect(),
            SparseGroup::Genres => self.top_genres.iter().map(|g| g.0).collect(),
            SparseGroup::MicroGenres => self.top_micro_genres.iter().map(|g| g.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DenseFeatureBundle {
    pub latent: Option<UserLatentVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub user: UserId,
    pub sparse: SparseFeatureBundle,
    pub dense: DenseFeatureBundle,
}

/// A user and their listens inside the observation window.
#[derive(Debug, Clone, Copy)]
pub struct UserProfile<'a> {
    pub user: &'a User,
    pub listens: &'a [ListenEvent],
}

/// Shared inputs for feature construction.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    /// Indexed by track id.
    pub tracks: &'a [TrackMetadata],
    pub table: Option<&'a TrackEmbeddingTable>,
    /// Reference time for recency weights.
    pub now: i64,
    pub half_life_days: f64,
    pub m: usize,
}

impl<'a> FeatureContext<'a> {
    pub fn for_dataset(dataset: &'a Dataset, table: Option<&'a TrackEmbeddingTable>) -> Self {
        FeatureContext {
            tracks: &dataset.tracks,
            table,
            now: dataset.manifest.window_end,
            half_life_days: DEFAULT_HALF_LIFE_DAYS,
            m: DEFAULT_TOP_M,
        }
    }
}

/// The `m` most frequent ids, count descending then id ascending.
fn top_m(ids: impl Iterator<Item = u32>, m: usize) -> Vec<u32> {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for id in ids {
        *counts.entry(id).or_default() += 1;
    }
    let mut ranked: Vec<(u32, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(m).map(|(id, _)| id).collect()
}

pub fn build_features(profile: UserProfile<'_>, selection: &FeatureSelection, ctx: &FeatureContext<'_>) -> Result<UserFeatures> {
    selection.validate()?;
    if ctx.m < 1 {
        return Err(Error::config("top-m must be at least 1"));
    }
    let mut sparse = SparseFeatureBundle::default();
    if selection.use_demographics {
        let d = profile.user.demographics;
        sparse.country = Some(d.country);
        sparse.gender = Some(d.gender);
        sparse.age_bucket = Some(d.age_bucket);
    }
    if selection.use_metadata {
        let mut meta = Vec::with_capacity(profile.listens.len());
        for e in profile.listens {
            let t = ctx
                .tracks
                .get(e.track.index())
                .ok_or_else(|| Error::UnknownTrack(e.track.to_string()))?;
            meta.push(t);
        }
        sparse.top_artists = top_m(meta.iter().map(|t| t.artist.0), ctx.m).into_iter().map(ArtistId).collect();
        let level = |l: GenreLevel| -> Vec<GenreId> {
            top_m(meta.iter().map(|t| t.genre_at(l).0), ctx.m).into_iter().map(GenreId).collect()
        };
        sparse.top_meta_genres = level(GenreLevel::MetaGenre);
        sparse.top_genres = level(GenreLevel::Genre);
        sparse.top_micro_genres = level(GenreLevel::MicroGenre);
    }
    let mut dense = DenseFeatureBundle::default();
    if selection.use_latent {
        let table = ctx
            .table
            .ok_or_else(|| Error::config("latent features requested without an embedding table"))?;
        dense.latent = Some(user_latent(profile.user.id, profile.listens, table, ctx.now, ctx.half_life_days)?);
    }
    Ok(UserFeatures {
        user: profile.user.id,
        sparse,
        dense,
    })
}

/// Features for every user of the dataset, indexed by user id.
pub fn build_all(dataset: &Dataset, selection: &FeatureSelection, ctx: &FeatureContext<'_>) -> Result<Vec<UserFeatures>> {
    let listens = dataset.listens_by_user();
    dataset
        .users
        .iter()
        .zip(&listens)
        .map(|(user, l)| build_features(UserProfile { user, listens: l }, selection, ctx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Demographics, TrackId};
    use proptest::prelude::*;

    const ALL: FeatureSelection = FeatureSelection {
        use_demographics: true,
        use_metadata: true,
        use_latent: true,
    };

    fn track(id: u32, artist: u32, genre: u32, micro: u32) -> TrackMetadata {
        TrackMetadata {
            track: TrackId(id),
            artist: ArtistId(artist),
            meta_genre: GenreId(genre / 2),
            genre: GenreId(genre),
            micro_genre: GenreId(micro),
        }
    }

    fn user() -> User {
        User {
            id: UserId(0),
            demographics: Demographics {
                country: CountryId(1),
                gender: Gender::Female,
                age_bucket: AgeBucket::Unknown,
            },
            account_age_days: None,
        }
    }

    fn listens(tracks: &[u32]) -> Vec<ListenEvent> {
        tracks
            .iter()
            .map(|&t| ListenEvent {
                user: UserId(0),
                track: TrackId(t),
                timestamp: 0,
            })
            .collect()
    }

    fn table(n: usize) -> TrackEmbeddingTable {
        TrackEmbeddingTable {
            n_tracks: n,
            dim: 2,
            input_vectors: (0..2 * n).map(|i| i as f32).collect(),
            output_vectors: vec![0.0; 2 * n],
        }
    }

    fn build(tracks: &[TrackMetadata], played: &[u32], m: usize) -> UserFeatures {
        let u = user();
        let l = listens(played);
        let t = table(tracks.len());
        let ctx = FeatureContext {
            tracks,
            table: Some(&t),
            now: 0,
            half_life_days: 30.0,
            m,
        };
        build_features(UserProfile { user: &u, listens: &l }, &ALL, &ctx).unwrap()
    }

    #[test]
    fn top_artist_by_count_then_id() {
        // track 0 by artist X=0, track 1 by artist Y=1
        let tracks = [track(0, 0, 0, 0), track(1, 1, 1, 1)];
        let f = build(&tracks, &[0, 0, 0, 0, 0, 1, 1, 1], 1);
        assert_eq!(f.sparse.top_artists, vec![ArtistId(0)]);
        let f = build(&tracks, &[1, 1, 1, 0, 0, 0], 1);
        assert_eq!(f.sparse.top_artists, vec![ArtistId(0)]);
    }

    #[test]
    fn genre_counts_aggregate_over_tracks() {
        // genre 3 ("blues") on tracks 0 and 1, genre 5 ("hip hop") on track 2
        let tracks = [track(0, 0, 3, 0), track(1, 1, 3, 1), track(2, 2, 5, 2)];
        let f = build(&tracks, &[0, 0, 1, 1, 2], 2);
        assert_eq!(f.sparse.top_genres, vec![GenreId(3), GenreId(5)]);
        assert_eq!(f.sparse.country, Some(CountryId(1)));
        assert_eq!(f.sparse.entries(SparseGroup::AgeBucket), vec![AgeBucket::Unknown.index() as u32]);
    }

    #[test]
    fn zero_listens_and_disabled_groups() {
        let tracks = [track(0, 0, 0, 0)];
        let f = build(&tracks, &[], 10);
        assert!(f.sparse.top_artists.is_empty() && f.sparse.top_micro_genres.is_empty());
        assert_eq!(f.dense.latent.unwrap().v, vec![0.0, 0.0]);

        let u = user();
        let ctx = FeatureContext {
            tracks: &tracks,
            table: None,
            now: 0,
            half_life_days: 30.0,
            m: 10,
        };
        let demo_only = FeatureSelection::new(true, false, false).unwrap();
        let f = build_features(UserProfile { user: &u, listens: &listens(&[0]) }, &demo_only, &ctx).unwrap();
        assert!(f.sparse.top_artists.is_empty() && f.dense.latent.is_none());
        assert!(build_features(UserProfile { user: &u, listens: &[] }, &ALL, &ctx).is_err());
        let ctx = FeatureContext { m: 0, ..ctx };
        assert!(matches!(
            build_features(UserProfile { user: &u, listens: &[] }, &demo_only, &ctx),
            Err(Error::Config(_))
        ));
        assert!(FeatureSelection::new(false, false, false).is_err());
    }

    proptest! {
        #[test]
        fn top_lists_are_bounded_unique_and_hierarchy_consistent(
            played in prop::collection::vec(0u32..12, 0..60),
            m in 1usize..6,
        ) {
            // 12 tracks, 6 micro-genres, each micro-genre under genre micro/2.
            let tracks: Vec<_> = (0..12).map(|t| track(t, t % 4, (t % 6) / 2, t % 6)).collect();
            let f = build(&tracks, &played, m);
            for g in SparseGroup::ALL.iter().filter(|g| !g.is_demographic()) {
                let e = f.sparse.entries(*g);
                let mut d = e.clone();
                d.sort_unstable();
                d.dedup();
                prop_assert!(e.len() <= m && d.len() == e.len());
            }
            prop_assert_eq!(&f, &build(&tracks, &played, m));
            for g in 0..3u32 {
                let genre_count = played.iter().filter(|&&t| tracks[t as usize].genre.0 == g).count();
                let micro_sum: usize = (0..6u32)
                    .filter(|mg| mg / 2 == g)
                    .map(|mg| played.iter().filter(|&&t| tracks[t as usize].micro_genre.0 == mg).count())
                    .sum();
                prop_assert_eq!(genre_count, micro_sum);
            }
        }
    }
}
