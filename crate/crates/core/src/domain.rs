//! Entity and identifier types shared by every other module.
//!
//! Identifiers are dense `u32` indices assigned by [`crate::vocab`]; they are
//! only meaningful together with the vocabulary that produced them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

macro_rules! dense_id {
    ($($(#[$meta:meta])* $name:ident;)*) => {$(
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            #[inline]
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    )*};
}

dense_id! {
    TrackId;
    ArtistId;
    PodcastId;
    UserId;
    PlaylistId;
    CountryId;
    /// Index into one level of the [`GenreTaxonomy`].
    GenreId;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Neutral,
    None,
}

impl Gender {
    pub const ALL: [Gender; 4] = [Gender::Male, Gender::Female, Gender::Neutral, Gender::None];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Neutral => "neutral",
            Gender::None => "none",
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Gender::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown gender `{s}`")))
    }
}

/// Self-reported age range. `Unknown` is a category of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBucket {
    Under18,
    From18To24,
    From25To29,
    From30To34,
    From35To44,
    From45To54,
    Over55,
    Unknown,
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 8] = [
        AgeBucket::Under18,
        AgeBucket::From18To24,
        AgeBucket::From25To29,
        AgeBucket::From30To34,
        AgeBucket::From35To44,
        AgeBucket::From45To54,
        AgeBucket::Over55,
        AgeBucket::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBucket::Under18 => "<18",
            AgeBucket::From18To24 => "18-24",
            AgeBucket::From25To29 => "25-29",
            AgeBucket::From30To34 => "30-34",
            AgeBucket::From35To44 => "35-44",
            AgeBucket::From45To54 => "45-54",
            AgeBucket::Over55 => "55+",
            AgeBucket::Unknown => "unknown",
        }
    }
}

impl FromStr for AgeBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgeBucket::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown age bucket `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Demographics {
    pub country: CountryId,
    pub gender: Gender,
    pub age_bucket: AgeBucket,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub id: UserId,
    pub demographics: Demographics,
    /// Days since account creation; present in synthetic data, optional otherwise.
    pub account_age_days: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListenEvent {
    pub user: UserId,
    pub track: TrackId,
    /// Epoch seconds.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenreLevel {
    MetaGenre,
    Genre,
    MicroGenre,
}

impl GenreLevel {
    pub const ALL: [GenreLevel; 3] = [GenreLevel::MetaGenre, GenreLevel::Genre, GenreLevel::MicroGenre];

    pub fn as_str(self) -> &'static str {
        match self {
            GenreLevel::MetaGenre => "meta_genre",
            GenreLevel::Genre => "genre",
            GenreLevel::MicroGenre => "micro_genre",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenreLabel {
    pub level: GenreLevel,
    pub name: String,
    pub id: GenreId,
}

/// One primary artist and exactly one genre label per taxonomy level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackMetadata {
    pub track: TrackId,
    pub artist: ArtistId,
    pub meta_genre: GenreId,
    pub genre: GenreId,
    pub micro_genre: GenreId,
}

impl TrackMetadata {
    pub fn genre_at(&self, level: GenreLevel) -> GenreId {
        match level {
            GenreLevel::MetaGenre => self.meta_genre,
            GenreLevel::Genre => self.genre,
            GenreLevel::MicroGenre => self.micro_genre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Follow {
    pub user: UserId,
    pub podcast: PodcastId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Playlist {
    pub id: PlaylistId,
    pub tracks: Vec<TrackId>,
}

/// Three-level genre tree stored as explicit parent links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenreTaxonomy {
    pub meta_genres: Vec<String>,
    /// `(name, parent meta-genre)`
    pub genres: Vec<(String, GenreId)>,
    /// `(name, parent genre)`
    pub micro_genres: Vec<(String, GenreId)>,
}

impl GenreTaxonomy {
    pub fn len(&self, level: GenreLevel) -> usize {
        match level {
            GenreLevel::MetaGenre => self.meta_genres.len(),
            GenreLevel::Genre => self.genres.len(),
            GenreLevel::MicroGenre => self.micro_genres.len(),
        }
    }

    pub fn name(&self, level: GenreLevel, id: GenreId) -> &str {
        match level {
            GenreLevel::MetaGenre => &self.meta_genres[id.index()],
            GenreLevel::Genre => &self.genres[id.index()].0,
            GenreLevel::MicroGenre => &self.micro_genres[id.index()].0,
        }
    }

    pub fn label(&self, level: GenreLevel, id: GenreId) -> GenreLabel {
        GenreLabel {
            level,
            name: self.name(level, id).to_owned(),
            id,
        }
    }

    /// Parent one level up, `None` for meta-genres.
    pub fn parent(&self, level: GenreLevel, id: GenreId) -> Option<GenreId> {
        match level {
            GenreLevel::MetaGenre => None,
            GenreLevel::Genre => Some(self.genres[id.index()].1),
            GenreLevel::MicroGenre => Some(self.micro_genres[id.index()].1),
        }
    }
}
