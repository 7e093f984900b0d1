//! Dataset ingestion, export and splitting.
//!
//! A dataset directory holds one JSON object per line per entity type:
//!
//! | file              | record                                                         |
//! |-------------------|----------------------------------------------------------------|
//! | `users.jsonl`     | `{"id", "country", "gender", "age_bucket", "account_age_days"?}` |
//! | `listens.jsonl`   | `{"user", "track", "ts"}`                                      |
//! | `tracks.jsonl`    | `{"id", "artist", "meta_genre", "genre", "micro_genre"}`       |
//! | `playlists.jsonl` | `{"id", "tracks": [...]}`                                      |
//! | `follows.jsonl`   | `{"user", "podcast"}`                                          |
//! | `podcasts.jsonl`  | `{"id", "categories": [...]}` (optional)                       |
//! | `manifest.json`   | window, declared countries, entity counts, generator seed      |

mod split;
mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    AgeBucket, ArtistId, CountryId, Demographics, Follow, Gender, GenreId, GenreTaxonomy, ListenEvent,
    Playlist, PlaylistId, PodcastId, TrackId, TrackMetadata, User, UserId,
};
use crate::vocab::{build_vocabularies, Vocabularies};
use crate::{Error, Result};

pub use split::{split_by_user, TestSet, TrainSet};
pub use synthetic::{generate_synthetic, PlantedStructure, SyntheticConfig};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub country: String,
    pub gender: String,
    pub age_bucket: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account_age_days: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListenRecord {
    pub user: String,
    pub track: String,
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: String,
    pub artist: String,
    pub meta_genre: String,
    pub genre: String,
    pub micro_genre: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaylistRecord {
    pub id: String,
    pub tracks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowRecord {
    pub user: String,
    pub podcast: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodcastRecord {
    pub id: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub users: usize,
    pub listens: usize,
    pub tracks: usize,
    pub playlists: usize,
    pub follows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub podcasts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default = "default_window_days")]
    pub window_days: u32,
    /// End of the listening window, epoch seconds.
    pub window_end: i64,
    /// The closed set of countries users may report.
    pub countries: Vec<String>,
    pub counts: EntityCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_window_days() -> u32 {
    90
}

impl DatasetManifest {
    pub fn window_start(&self) -> i64 {
        self.window_end - i64::from(self.window_days) * SECONDS_PER_DAY
    }
}

/// A parsed record together with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line<T> {
    pub line: usize,
    pub value: T,
}

/// Records exactly as they appear in the files, before id resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub users: Vec<Line<UserRecord>>,
    pub listens: Vec<Line<ListenRecord>>,
    pub tracks: Vec<Line<TrackRecord>>,
    pub playlists: Vec<Line<PlaylistRecord>>,
    pub follows: Vec<Line<FollowRecord>>,
    pub podcasts: Option<Vec<Line<PodcastRecord>>>,
    pub manifest: DatasetManifest,
}

/// Paths of the files making up one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSet {
    pub users: PathBuf,
    pub listens: PathBuf,
    pub tracks: PathBuf,
    pub playlists: PathBuf,
    pub follows: PathBuf,
    pub podcasts: PathBuf,
    pub manifest: PathBuf,
}

impl FileSet {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        FileSet {
            users: dir.join("users.jsonl"),
            listens: dir.join("listens.jsonl"),
            tracks: dir.join("tracks.jsonl"),
            playlists: dir.join("playlists.jsonl"),
            follows: dir.join("follows.jsonl"),
            podcasts: dir.join("podcasts.jsonl"),
            manifest: dir.join("manifest.json"),
        }
    }
}

/// Fully cross-referenced dataset. Entity vectors are indexed by their dense id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabularies,
    pub taxonomy: GenreTaxonomy,
    pub users: Vec<User>,
    pub listens: Vec<ListenEvent>,
    pub tracks: Vec<TrackMetadata>,
    pub playlists: Vec<Playlist>,
    pub follows: Vec<Follow>,
    /// Category ids (into `vocab.categories`) per podcast; empty when unknown.
    pub podcast_categories: Vec<Vec<u32>>,
    pub manifest: DatasetManifest,
    /// Ground truth of the generator; `None` for loaded datasets.
    pub planted: Option<PlantedStructure>,
}

impl Dataset {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn n_podcasts(&self) -> usize {
        self.vocab.podcasts.len()
    }

    pub fn user_name(&self, user: UserId) -> &str {
        self.vocab.users.name(user.0)
    }

    pub fn podcast_name(&self, podcast: PodcastId) -> &str {
        self.vocab.podcasts.name(podcast.0)
    }

    /// Listens grouped per user, in file order.
    pub fn listens_by_user(&self) -> Vec<Vec<ListenEvent>> {
        let mut out = vec![Vec::new(); self.n_users()];
        for l in &self.listens {
            out[l.user.index()].push(*l);
        }
        out
    }

    /// Followed podcasts per user, ascending.
    pub fn follows_by_user(&self) -> Vec<Vec<PodcastId>> {
        let mut out = vec![Vec::new(); self.n_users()];
        for f in &self.follows {
            out[f.user.index()].push(f.podcast);
        }
        for v in &mut out {
            v.sort_unstable();
        }
        out
    }

    pub fn counts(&self) -> EntityCounts {
        EntityCounts {
            users: self.users.len(),
            listens: self.listens.len(),
            tracks: self.tracks.len(),
            playlists: self.playlists.len(),
            follows: self.follows.len(),
            podcasts: self.manifest.counts.podcasts.map(|_| self.n_podcasts()),
        }
    }

    /// Resolves string ids, builds the genre tree and checks referential integrity.
    pub fn from_raw(raw: RawDataset) -> Result<Dataset> {
        let vocab = build_vocabularies(&raw)?;
        let manifest = raw.manifest.clone();

        let taxonomy = build_taxonomy(&raw.tracks, &vocab)?;

        let mut users = Vec::with_capacity(raw.users.len());
        let mut sorted_users: Vec<&Line<UserRecord>> = raw.users.iter().collect();
        sorted_users.sort_by(|a, b| a.value.id.cmp(&b.value.id));
        for rec in sorted_users {
            let file = "users.jsonl";
            let r = &rec.value;
            let country = vocab.countries.id(&r.country).ok_or_else(|| Error::DanglingReference {
                file: file.into(),
                line: rec.line,
                kind: "country",
                id: r.country.clone(),
            })?;
            let gender: Gender = r.gender.parse().map_err(|_| Error::Malformed {
                file: file.into(),
                line: rec.line,
                message: format!("unknown gender `{}`", r.gender),
            })?;
            let age_bucket: AgeBucket = r.age_bucket.parse().map_err(|_| Error::Malformed {
                file: file.into(),
                line: rec.line,
                message: format!("unknown age bucket `{}`", r.age_bucket),
            })?;
            users.push(User {
                id: UserId(vocab.users.id(&r.id).expect("user vocabulary built from records")),
                demographics: Demographics {
                    country: CountryId(country),
                    gender,
                    age_bucket,
                },
                account_age_days: r.account_age_days,
            });
        }

        let mut tracks = Vec::with_capacity(raw.tracks.len());
        let mut sorted_tracks: Vec<&Line<TrackRecord>> = raw.tracks.iter().collect();
        sorted_tracks.sort_by(|a, b| a.value.id.cmp(&b.value.id));
        for rec in sorted_tracks {
            let r = &rec.value;
            tracks.push(TrackMetadata {
                track: TrackId(vocab.tracks.id(&r.id).expect("track vocabulary built from records")),
                artist: ArtistId(vocab.artists.id(&r.artist).expect("artist collected from tracks")),
                meta_genre: GenreId(vocab.meta_genres.id(&r.meta_genre).expect("collected")),
                genre: GenreId(vocab.genres.id(&r.genre).expect("collected")),
                micro_genre: GenreId(vocab.micro_genres.id(&r.micro_genre).expect("collected")),
            });
        }

        let (start, end) = (manifest.window_start(), manifest.window_end);
        let mut listens = Vec::with_capacity(raw.listens.len());
        for rec in &raw.listens {
            let file = "listens.jsonl";
            let r = &rec.value;
            let user = resolve(&vocab.users, &r.user, file, rec.line, "user")?;
            let track = resolve(&vocab.tracks, &r.track, file, rec.line, "track")?;
            if r.ts < start || r.ts > end {
                return Err(Error::OutsideWindow {
                    file: file.into(),
                    line: rec.line,
                    timestamp: r.ts,
                    window_days: manifest.window_days,
                    window_end: end,
                });
            }
            listens.push(ListenEvent {
                user: UserId(user),
                track: TrackId(track),
                timestamp: r.ts,
            });
        }

        let mut playlists = Vec::with_capacity(raw.playlists.len());
        let mut sorted_playlists: Vec<&Line<PlaylistRecord>> = raw.playlists.iter().collect();
        sorted_playlists.sort_by(|a, b| a.value.id.cmp(&b.value.id));
        for rec in sorted_playlists {
            let file = "playlists.jsonl";
            let r = &rec.value;
            if r.tracks.len() < 2 {
                return Err(Error::Malformed {
                    file: file.into(),
                    line: rec.line,
                    message: format!("playlist `{}` has {} track(s); at least 2 required", r.id, r.tracks.len()),
                });
            }
            let tracks = r
                .tracks
                .iter()
                .map(|t| resolve(&vocab.tracks, t, file, rec.line, "track").map(TrackId))
                .collect::<Result<Vec<_>>>()?;
            playlists.push(Playlist {
                id: PlaylistId(vocab.playlists.id(&r.id).expect("playlist vocabulary built from records")),
                tracks,
            });
        }

        let mut follows = Vec::with_capacity(raw.follows.len());
        let mut seen = HashSet::new();
        for rec in &raw.follows {
            let file = "follows.jsonl";
            let r = &rec.value;
            let user = resolve(&vocab.users, &r.user, file, rec.line, "user")?;
            let podcast = resolve(&vocab.podcasts, &r.podcast, file, rec.line, "podcast")?;
            let follow = Follow {
                user: UserId(user),
                podcast: PodcastId(podcast),
            };
            if !seen.insert(follow) {
                return Err(Error::Malformed {
                    file: file.into(),
                    line: rec.line,
                    message: format!("duplicate follow ({}, {})", r.user, r.podcast),
                });
            }
            follows.push(follow);
        }

        let mut podcast_categories = vec![Vec::new(); vocab.podcasts.len()];
        for rec in raw.podcasts.iter().flatten() {
            let id = vocab.podcasts.id(&rec.value.id).expect("podcast vocabulary built from records");
            let mut cats: Vec<u32> = rec
                .value
                .categories
                .iter()
                .map(|c| vocab.categories.id(c).expect("collected"))
                .collect();
            cats.sort_unstable();
            cats.dedup();
            podcast_categories[id as usize] = cats;
        }

        let dataset = Dataset {
            vocab,
            taxonomy,
            users,
            listens,
            tracks,
            playlists,
            follows,
            podcast_categories,
            manifest,
            planted: None,
        };
        check_counts(&dataset.manifest.counts, &dataset.counts())?;
        Ok(dataset)
    }

    /// Converts back to string-keyed records (inverse of [`Dataset::from_raw`]).
    pub fn to_raw(&self) -> RawDataset {
        let v = &self.vocab;
        let numbered = |i: usize| i + 1;
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| Line {
                line: numbered(i),
                value: UserRecord {
                    id: v.users.name(u.id.0).to_owned(),
                    country: v.countries.name(u.demographics.country.0).to_owned(),
                    gender: u.demographics.gender.as_str().to_owned(),
                    age_bucket: u.demographics.age_bucket.as_str().to_owned(),
                    account_age_days: u.account_age_days,
                },
            })
            .collect();
        let listens = self
            .listens
            .iter()
            .enumerate()
            .map(|(i, l)| Line {
                line: numbered(i),
                value: ListenRecord {
                    user: v.users.name(l.user.0).to_owned(),
                    track: v.tracks.name(l.track.0).to_owned(),
                    ts: l.timestamp,
                },
            })
            .collect();
        let tracks = self
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| Line {
                line: numbered(i),
                value: TrackRecord {
                    id: v.tracks.name(t.track.0).to_owned(),
                    artist: v.artists.name(t.artist.0).to_owned(),
                    meta_genre: v.meta_genres.name(t.meta_genre.0).to_owned(),
                    genre: v.genres.name(t.genre.0).to_owned(),
                    micro_genre: v.micro_genres.name(t.micro_genre.0).to_owned(),
                },
            })
            .collect();
        let playlists = self
            .playlists
            .iter()
            .enumerate()
            .map(|(i, p)| Line {
                line: numbered(i),
                value: PlaylistRecord {
                    id: v.playlists.name(p.id.0).to_owned(),
                    tracks: p.tracks.iter().map(|t| v.tracks.name(t.0).to_owned()).collect(),
                },
            })
            .collect();
        let follows = self
            .follows
            .iter()
            .enumerate()
            .map(|(i, f)| Line {
                line: numbered(i),
                value: FollowRecord {
                    user: v.users.name(f.user.0).to_owned(),
                    podcast: v.podcasts.name(f.podcast.0).to_owned(),
                },
            })
            .collect();
        let podcasts = self.manifest.counts.podcasts.map(|_| {
            self.podcast_categories
                .iter()
                .enumerate()
                .map(|(i, cats)| Line {
                    line: numbered(i),
                    value: PodcastRecord {
                        id: v.podcasts.name(i as u32).to_owned(),
                        categories: cats.iter().map(|c| v.categories.name(*c).to_owned()).collect(),
                    },
                })
                .collect()
        });
        RawDataset {
            users,
            listens,
            tracks,
            playlists,
            follows,
            podcasts,
            manifest: self.manifest.clone(),
        }
    }
}

fn resolve(
    vocab: &crate::vocab::Vocabulary,
    id: &str,
    file: &str,
    line: usize,
    kind: &'static str,
) -> Result<u32> {
    vocab.id(id).ok_or_else(|| Error::DanglingReference {
        file: file.into(),
        line,
        kind,
        id: id.to_owned(),
    })
}

fn check_counts(declared: &EntityCounts, actual: &EntityCounts) -> Result<()> {
    let pairs = [
        ("users", declared.users, actual.users),
        ("listens", declared.listens, actual.listens),
        ("tracks", declared.tracks, actual.tracks),
        ("playlists", declared.playlists, actual.playlists),
        ("follows", declared.follows, actual.follows),
    ];
    for (entity, declared, actual) in pairs {
        if declared != actual {
            return Err(Error::ManifestMismatch {
                entity,
                declared,
                actual,
            });
        }
    }
    if let (Some(d), Some(a)) = (declared.podcasts, actual.podcasts) {
        if d != a {
            return Err(Error::ManifestMismatch {
                entity: "podcasts",
                declared: d,
                actual: a,
            });
        }
    }
    Ok(())
}

fn build_taxonomy(tracks: &[Line<TrackRecord>], vocab: &Vocabularies) -> Result<GenreTaxonomy> {
    let mut genre_parent: BTreeMap<u32, (u32, usize)> = BTreeMap::new();
    let mut micro_parent: BTreeMap<u32, (u32, usize)> = BTreeMap::new();
    for rec in tracks {
        let r = &rec.value;
        let meta = vocab.meta_genres.id(&r.meta_genre).expect("collected");
        let genre = vocab.genres.id(&r.genre).expect("collected");
        let micro = vocab.micro_genres.id(&r.micro_genre).expect("collected");
        for (child, parent, map, what) in [
            (genre, meta, &mut genre_parent, "genre"),
            (micro, genre, &mut micro_parent, "micro-genre"),
        ] {
            match map.get(&child) {
                Some(&(p, first_line)) if p != parent => {
                    return Err(Error::Malformed {
                        file: "tracks.jsonl".into(),
                        line: rec.line,
                        message: format!(
                            "{what} `{}` has conflicting parents (first seen on line {first_line})",
                            if what == "genre" { &r.genre } else { &r.micro_genre }
                        ),
                    });
                }
                Some(_) => {}
                None => {
                    map.insert(child, (parent, rec.line));
                }
            }
        }
    }
    Ok(GenreTaxonomy {
        meta_genres: vocab.meta_genres.names().to_vec(),
        genres: vocab
            .genres
            .names()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), GenreId(genre_parent[&(i as u32)].0)))
            .collect(),
        micro_genres: vocab
            .micro_genres
            .names()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), GenreId(micro_parent[&(i as u32)].0)))
            .collect(),
    })
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<Line<T>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(Line { line: i + 1, value });
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads every file of the set; `podcasts.jsonl` is optional.
pub fn read_raw(files: &FileSet) -> Result<RawDataset> {
    let manifest_text = fs::read_to_string(&files.manifest).map_err(|e| Error::io(&files.manifest, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&manifest_text).map_err(|e| Error::Malformed {
        file: "manifest.json".into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let podcasts = if files.podcasts.exists() {
        Some(read_jsonl(&files.podcasts)?)
    } else {
        None
    };
    Ok(RawDataset {
        users: read_jsonl(&files.users)?,
        listens: read_jsonl(&files.listens)?,
        tracks: read_jsonl(&files.tracks)?,
        playlists: read_jsonl(&files.playlists)?,
        follows: read_jsonl(&files.follows)?,
        podcasts,
        manifest,
    })
}

pub fn load_dataset(files: &FileSet) -> Result<Dataset> {
    Dataset::from_raw(read_raw(files)?)
}

/// Writes the dataset into `dir` (created if missing). Output is a pure
/// function of the dataset, so equal datasets give byte-identical files.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = FileSet::in_dir(dir);
    let raw = dataset.to_raw();
    write_jsonl(&files.users, raw.users.iter().map(|l| &l.value))?;
    write_jsonl(&files.listens, raw.listens.iter().map(|l| &l.value))?;
    write_jsonl(&files.tracks, raw.tracks.iter().map(|l| &l.value))?;
    write_jsonl(&files.playlists, raw.playlists.iter().map(|l| &l.value))?;
    write_jsonl(&files.follows, raw.follows.iter().map(|l| &l.value))?;
    if let Some(podcasts) = &raw.podcasts {
        write_jsonl(&files.podcasts, podcasts.iter().map(|l| &l.value))?;
    }
    let mut manifest = dataset.manifest.clone();
    manifest.counts = dataset.counts();
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&files.manifest, text + "\n").map_err(|e| Error::io(&files.manifest, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line<T>(line: usize, value: T) -> Line<T> {
        Line { line, value }
    }

    pub(crate) fn fixture() -> RawDataset {
        let end = 1_700_000_000;
        RawDataset {
            users: vec![
                line(1, UserRecord {
                    id: "u2".into(),
                    country: "SE".into(),
                    gender: "female".into(),
                    age_bucket: "25-29".into(),
                    account_age_days: None,
                }),
                line(2, UserRecord {
                    id: "u1".into(),
                    country: "US".into(),
                    gender: "none".into(),
                    age_bucket: "unknown".into(),
                    account_age_days: Some(12),
                }),
            ],
            listens: vec![
                line(1, ListenRecord { user: "u1".into(), track: "t1".into(), ts: end - 10 }),
                line(2, ListenRecord { user: "u2".into(), track: "t2".into(), ts: end - 3 * SECONDS_PER_DAY }),
            ],
            tracks: vec![
                line(1, TrackRecord {
                    id: "t2".into(),
                    artist: "a1".into(),
                    meta_genre: "rap".into(),
                    genre: "hip hop".into(),
                    micro_genre: "east coast hip hop".into(),
                }),
                line(2, TrackRecord {
                    id: "t1".into(),
                    artist: "a2".into(),
                    meta_genre: "folk".into(),
                    genre: "blues".into(),
                    micro_genre: "texas blues".into(),
                }),
            ],
            playlists: vec![line(1, PlaylistRecord { id: "p1".into(), tracks: vec!["t1".into(), "t2".into()] })],
            follows: vec![
                line(1, FollowRecord { user: "u1".into(), podcast: "pod-b".into() }),
                line(2, FollowRecord { user: "u2".into(), podcast: "pod-a".into() }),
            ],
            podcasts: None,
            manifest: DatasetManifest {
                window_days: 90,
                window_end: end,
                countries: vec!["US".into(), "SE".into()],
                counts: EntityCounts { users: 2, listens: 2, tracks: 2, playlists: 1, follows: 2, podcasts: None },
                seed: None,
            },
        }
    }

    #[test]
    fn resolves_fixture() {
        let ds = Dataset::from_raw(fixture()).unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.counts(), ds.manifest.counts);
        assert_eq!(ds.user_name(UserId(0)), "u1");
        assert_eq!(ds.users[0].account_age_days, Some(12));
        assert_eq!(ds.n_podcasts(), 2);
        // "blues" < "hip hop"; its parent is "folk" which sorts before "rap".
        assert_eq!(ds.taxonomy.name(crate::domain::GenreLevel::Genre, GenreId(0)), "blues");
        assert_eq!(ds.taxonomy.parent(crate::domain::GenreLevel::Genre, GenreId(0)), Some(GenreId(0)));
    }

    #[test]
    fn dangling_user_in_follows_is_reported() {
        let mut raw = fixture();
        raw.follows[1].value.user = "u99".into();
        match Dataset::from_raw(raw).unwrap_err() {
            Error::DanglingReference { file, line, kind, id } => {
                assert_eq!((file.as_str(), line, kind, id.as_str()), ("follows.jsonl", 2, "user", "u99"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn listen_older_than_window_is_rejected() {
        let mut raw = fixture();
        raw.listens[0].value.ts = raw.manifest.window_end - 91 * SECONDS_PER_DAY;
        assert!(matches!(Dataset::from_raw(raw).unwrap_err(), Error::OutsideWindow { line: 1, .. }));
    }

    #[test]
    fn conflicting_genre_parent_is_rejected() {
        let mut raw = fixture();
        raw.tracks[1].value.genre = "hip hop".into();
        assert!(matches!(Dataset::from_raw(raw).unwrap_err(), Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn manifest_counts_must_match() {
        let mut raw = fixture();
        raw.manifest.counts.listens = 3;
        assert!(matches!(
            Dataset::from_raw(raw).unwrap_err(),
            Error::ManifestMismatch { entity: "listens", .. }
        ));
    }

    #[test]
    fn files_round_trip_and_malformed_lines_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::from_raw(fixture()).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&FileSet::in_dir(dir.path())).unwrap();
        assert_eq!(back, ds);

        let path = dir.path().join("follows.jsonl");
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"user\": \"u1\"\n");
        fs::write(&path, text).unwrap();
        match load_dataset(&FileSet::in_dir(dir.path())).unwrap_err() {
            Error::Malformed { file, line, .. } => assert_eq!((file.as_str(), line), ("follows.jsonl", 3)),
            e => panic!("unexpected {e:?}"),
        }
    }
}
