//! Popularity rankings per country or per (country, gender, age bucket) group.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Ranking;
use crate::domain::{AgeBucket, CountryId, Demographics, Follow, Gender, User};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityKey {
    Country,
    CountryDemographics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub country: CountryId,
    pub gender: Option<Gender>,
    pub age_bucket: Option<AgeBucket>,
}

impl PopularityKey {
    pub fn group(self, d: &Demographics) -> GroupKey {
        match self {
            PopularityKey::Country => GroupKey {
                country: d.country,
                gender: None,
                age_bucket: None,
            },
            PopularityKey::CountryDemographics => GroupKey {
                country: d.country,
                gender: Some(d.gender),
                age_bucket: Some(d.age_bucket),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub key: GroupKey,
    pub counts: Vec<u64>,
}

/// Follow counts per key group plus global counts for unseen groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityBaseline {
    pub key: PopularityKey,
    pub n_podcasts: usize,
    pub global: Vec<u64>,
    pub groups: Vec<GroupCounts>,
}

impl PopularityBaseline {
    /// `users` is indexed by user id.
    pub fn fit(follows: &[Follow], users: &[User], n_podcasts: usize, key: PopularityKey) -> Result<Self> {
        if follows.is_empty() {
            return Err(Error::config("popularity baseline needs training follows"));
        }
        let mut global = vec![0u64; n_podcasts];
        let mut groups: BTreeMap<GroupKey, Vec<u64>> = BTreeMap::new();
        for f in follows {
            let user = users
                .get(f.user.index())
                .ok_or_else(|| Error::Dimension(format!("follow references unknown user {}", f.user)))?;
            let p = f.podcast.index();
            if p >= n_podcasts {
                return Err(Error::Dimension(format!("podcast {} outside catalog of {n_podcasts}", f.podcast)));
            }
            global[p] += 1;
            groups.entry(key.group(&user.demographics)).or_insert_with(|| vec![0; n_podcasts])[p] += 1;
        }
        Ok(PopularityBaseline {
            key,
            n_podcasts,
            global,
            groups: groups.into_iter().map(|(key, counts)| GroupCounts { key, counts }).collect(),
        })
    }

    /// Counts used for a user: their group's, or global ones for unseen groups.
    pub fn counts_for(&self, d: &Demographics) -> &[u64] {
        let key = self.key.group(d);
        match self.groups.binary_search_by(|g| g.key.cmp(&key)) {
            Ok(i) => &self.groups[i].counts,
            Err(_) => &self.global,
        }
    }

    pub fn rank(&self, user: &User) -> Result<Ranking> {
        let scores: Vec<f64> = self.counts_for(&user.demographics).iter().map(|&c| c as f64).collect();
        Ranking::from_scores(user.id, &scores)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PodcastId, UserId};

    fn user(id: u32, country: u32) -> User {
        User {
            id: UserId(id),
            demographics: Demographics {
                country: CountryId(country),
                gender: Gender::Female,
                age_bucket: AgeBucket::From25To29,
            },
            account_age_days: None,
        }
    }

    fn follow(u: u32, p: u32) -> Follow {
        Follow { user: UserId(u), podcast: PodcastId(p) }
    }

    #[test]
    fn per_country_counts_fallback_and_ties() {
        let users = vec![user(0, 0), user(1, 0), user(2, 0), user(3, 1)];
        let follows = vec![follow(0, 1), follow(1, 1), follow(2, 1), follow(0, 2), follow(3, 3), follow(3, 0)];
        let b = PopularityBaseline::fit(&follows, &users, 4, PopularityKey::Country).unwrap();
        let ids = |r: Ranking| r.podcasts().iter().map(|p| p.0).collect::<Vec<_>>();
        assert_eq!(ids(b.rank(&users[0]).unwrap()), vec![1, 2, 0, 3]);
        // country 1: podcasts 0 and 3 tie at one follow
        assert_eq!(ids(b.rank(&users[3]).unwrap()), vec![0, 3, 1, 2]);
        // unseen country: global counts 1:3, 0,2,3:1
        assert_eq!(ids(b.rank(&user(9, 5)).unwrap()), vec![1, 0, 2, 3]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        b.save(&path).unwrap();
        assert_eq!(PopularityBaseline::load(&path).unwrap(), b);
    }

    #[test]
    fn demographic_groups_split_countries() {
        let mut other = user(1, 0);
        other.demographics.gender = Gender::Male;
        let users = vec![user(0, 0), other];
        let follows = vec![follow(0, 0), follow(1, 1), follow(1, 2)];
        let b = PopularityBaseline::fit(&follows, &users, 3, PopularityKey::CountryDemographics).unwrap();
        assert_eq!(b.rank(&users[0]).unwrap().podcasts()[0], PodcastId(0));
        assert_eq!(b.rank(&users[1]).unwrap().podcasts()[0], PodcastId(1));
        assert!(PopularityBaseline::fit(&[], &users, 3, PopularityKey::Country).is_err());
    }
}
