//! Bijective maps between external string identifiers and dense indices.
//!
//! Dense ids are assigned in ascending order of the external id, so the same
//! input always yields the same numbering regardless of record order.

use std::collections::HashMap;

use crate::data::RawDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from defining records; a repeated id is an error.
    pub fn from_unique<I, S>(kind: &'static str, ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = ids.into_iter().map(Into::into).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId {
                kind,
                id: w[0].clone(),
            });
        }
        Ok(Self::from_sorted(names))
    }

    /// Builds a vocabulary from references, collapsing repeats.
    pub fn from_references<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = ids.into_iter().map(Into::into).collect();
        names.sort_unstable();
        names.dedup();
        Self::from_sorted(names)
    }

    fn from_sorted(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocabulary { names, index }
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabularies {
    pub users: Vocabulary,
    pub tracks: Vocabulary,
    pub artists: Vocabulary,
    pub podcasts: Vocabulary,
    pub playlists: Vocabulary,
    pub countries: Vocabulary,
    pub meta_genres: Vocabulary,
    pub genres: Vocabulary,
    pub micro_genres: Vocabulary,
    pub categories: Vocabulary,
}

/// Entities with defining records (users, tracks, playlists, podcasts when a
/// podcast file is present, countries from the manifest) must be unique;
/// artists, genres and categories are collected from references.
pub fn build_vocabularies(raw: &RawDataset) -> Result<Vocabularies> {
    let users = Vocabulary::from_unique("user", raw.users.iter().map(|r| r.value.id.as_str()))?;
    let tracks = Vocabulary::from_unique("track", raw.tracks.iter().map(|r| r.value.id.as_str()))?;
    let playlists =
        Vocabulary::from_unique("playlist", raw.playlists.iter().map(|r| r.value.id.as_str()))?;
    let countries = Vocabulary::from_unique(
        "country",
        raw.manifest.countries.iter().map(String::as_str),
    )?;
    let podcasts = match &raw.podcasts {
        Some(records) => Vocabulary::from_unique("podcast", records.iter().map(|r| r.value.id.as_str()))?,
        None => Vocabulary::from_references(raw.follows.iter().map(|r| r.value.podcast.as_str())),
    };
    let categories = Vocabulary::from_references(
        raw.podcasts
            .iter()
            .flatten()
            .flat_map(|r| r.value.categories.iter().map(String::as_str)),
    );
    let artists = Vocabulary::from_references(raw.tracks.iter().map(|r| r.value.artist.as_str()));
    let meta_genres =
        Vocabulary::from_references(raw.tracks.iter().map(|r| r.value.meta_genre.as_str()));
    let genres = Vocabulary::from_references(raw.tracks.iter().map(|r| r.value.genre.as_str()));
    let micro_genres =
        Vocabulary::from_references(raw.tracks.iter().map(|r| r.value.micro_genre.as_str()));

    Ok(Vocabularies {
        users,
        tracks,
        artists,
        podcasts,
        playlists,
        countries,
        meta_genres,
        genres,
        micro_genres,
        categories,
    })
}
