//! Post-hoc diagnostics over evaluation output: cohort breakdowns,
//! popularity-rank histograms, category log-differences and genre
//! association reports. Every report renders to CSV.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::domain::{GenreId, GenreLabel, GenreLevel, ListenEvent, PodcastId, TrackMetadata, User, UserId};
use crate::metrics::{Metric, MetricReport};
use crate::{seeded_rng, Error, Result};

/// Marker written to CSV where a value is undefined.
pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortDimension {
    Country,
    AccountAgeBucket,
    AgeBucket,
    Gender,
}

impl CohortDimension {
    pub const ALL: [CohortDimension; 4] = [
        CohortDimension::Country,
        CohortDimension::AccountAgeBucket,
        CohortDimension::AgeBucket,
        CohortDimension::Gender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CohortDimension::Country => "country",
            CohortDimension::AccountAgeBucket => "account_age_bucket",
            CohortDimension::AgeBucket => "age_bucket",
            CohortDimension::Gender => "gender",
        }
    }
}

/// Time-on-platform bucket for an account age in days.
pub fn account_age_bucket(days: u32) -> &'static str {
    match days {
        0..=89 => "<3m",
        90..=364 => "3-12m",
        365..=729 => "1-2y",
        _ => "2y+",
    }
}

/// Cohort of a user, or `None` when the dimension is not recorded for them.
pub fn cohort_label(dataset: &Dataset, user: &User, dimension: CohortDimension) -> Option<String> {
    let d = &user.demographics;
    match dimension {
        CohortDimension::Country => Some(dataset.vocab.countries.name(d.country.0).to_string()),
        CohortDimension::AccountAgeBucket => user.account_age_days.map(|a| account_age_bucket(a).to_string()),
        CohortDimension::AgeBucket => Some(d.age_bucket.as_str().to_string()),
        CohortDimension::Gender => Some(d.gender.as_str().to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub cohort: String,
    pub n_users: usize,
    pub model: String,
    pub value: f64,
    pub baseline_value: f64,
    /// `value / baseline_value - 1`; `None` when the baseline scores 0.
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub dimension: CohortDimension,
    pub metric: Metric,
    pub baseline: String,
    /// Cohorts ascending, models in report order within a cohort.
    pub rows: Vec<CohortRow>,
}

impl CohortReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,cohort,n_users,model,metric,value,baseline,baseline_value,relative_improvement\n");
        for r in &self.rows {
            let rel = r.relative_improvement.map_or(UNDEFINED.to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{},{:.6},{}",
                self.dimension.as_str(),
                r.cohort,
                r.n_users,
                r.model,
                self.metric,
                r.value,
                self.baseline,
                r.baseline_value,
                rel
            );
        }
        out
    }
}

/// Per-cohort metric means for every model against a named baseline.
///
/// Returns `None` when some test user lacks the dimension (e.g. no account
/// ages in the dataset).
pub fn cohort_breakdown(
    report: &MetricReport,
    dataset: &Dataset,
    dimension: CohortDimension,
    metric: Metric,
    baseline: &str,
) -> Result<Option<CohortReport>> {
    let base = report
        .model(baseline)
        .ok_or_else(|| Error::config(format!("baseline model {baseline} not in report")))?;
    let mut cohort_of = Vec::with_capacity(base.users.len());
    for u in &base.users {
        let user = dataset
            .users
            .get(u.index())
            .ok_or_else(|| Error::Dimension(format!("unknown user {u}")))?;
        match cohort_label(dataset, user, dimension) {
            Some(c) => cohort_of.push(c),
            None => {
                log::warn!("{} not recorded for user {}; skipping breakdown", dimension.as_str(), u);
                return Ok(None);
            }
        }
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in cohort_of.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    let mean_over = |values: &[f64], idx: &[usize]| idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
    let missing = || Error::config(format!("metric {metric} missing from report"));
    let base_values = base.per_user(metric).ok_or_else(missing)?;
    let mut rows = Vec::new();
    for (cohort, idx) in &members {
        let baseline_value = mean_over(base_values, idx);
        for model in &report.models {
            if model.users != base.users {
                return Err(Error::MismatchedUsers);
            }
            let value = mean_over(model.per_user(metric).ok_or_else(missing)?, idx);
            rows.push(CohortRow {
                cohort: cohort.to_string(),
                n_users: idx.len(),
                model: model.model.clone(),
                value,
                baseline_value,
                relative_improvement: (baseline_value > 0.0).then(|| value / baseline_value - 1.0),
            });
        }
    }
    Ok(Some(CohortReport {
        dimension,
        metric,
        baseline: baseline.to_string(),
        rows,
    }))
}

/// 1-based popularity rank of every podcast: follow count descending, ties by id.
pub fn popularity_ranks(follow_counts: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..follow_counts.len()).collect();
    order.sort_by(|&a, &b| follow_counts[b].cmp(&follow_counts[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; follow_counts.len()];
    for (r, p) in order.into_iter().enumerate() {
        ranks[p] = r + 1;
    }
    ranks
}

/// Histogram over popularity ranks of recommended podcasts, one per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityDistribution {
    /// `histograms[m][r - 1]` counts recommendations at popularity rank `r`.
    pub models: Vec<(String, Vec<u64>)>,
}

impl PopularityDistribution {
    pub fn histogram(&self, model: &str) -> Option<&[u64]> {
        self.models.iter().find(|(m, _)| m == model).map(|(_, h)| h.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,popularity_rank,count\n");
        for (model, hist) in &self.models {
            for (r, c) in hist.iter().enumerate() {
                let _ = writeln!(out, "{model},{},{c}", r + 1);
            }
        }
        out
    }
}

/// Maps each recommended podcast to its global popularity rank.
///
/// `recommendations` holds, per model, each sampled user's top list.
pub fn popularity_distribution(recommendations: &[(String, Vec<Vec<PodcastId>>)], follow_counts: &[u64]) -> Result<PopularityDistribution> {
    let ranks = popularity_ranks(follow_counts);
    let mut models = Vec::with_capacity(recommendations.len());
    for (model, lists) in recommendations {
        let mut hist = vec![0u64; follow_counts.len()];
        for p in lists.iter().flatten() {
            let r = *ranks
                .get(p.index())
                .ok_or_else(|| Error::Dimension(format!("podcast {p} outside catalog")))?;
            hist[r - 1] += 1;
        }
        models.push((model.clone(), hist));
    }
    Ok(PopularityDistribution { models })
}

/// Shannon entropy (nats) of a histogram.
pub fn entropy(hist: &[u64]) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

/// Seeded sample of `min(n, users.len())` users, ascending.
pub fn sample_users(users: &[UserId], n: usize, seed: u64) -> Vec<UserId> {
    let mut picked: Vec<UserId> = index::sample(&mut seeded_rng(seed), users.len(), n.min(users.len()))
        .into_iter()
        .map(|i| users[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Category shares of a podcast multiset; each podcast spreads a unit weight
/// evenly over its categories.
pub fn category_shares(podcasts: &[PodcastId], categories: &[Vec<u32>], n_categories: usize) -> Result<Vec<f64>> {
    let mut shares = vec![0.0; n_categories];
    let mut total = 0.0;
    for p in podcasts {
        let cats = categories
            .get(p.index())
            .ok_or_else(|| Error::Dimension(format!("podcast {p} outside catalog")))?;
        if cats.is_empty() {
            return Err(Error::config(format!("podcast {p} has no category")));
        }
        let w = 1.0 / cats.len() as f64;
        for &c in cats {
            *shares
                .get_mut(c as usize)
                .ok_or_else(|| Error::Dimension(format!("category {c} outside vocabulary")))? += w;
        }
        total += 1.0;
    }
    if total > 0.0 {
        shares.iter_mut().for_each(|s| *s /= total);
    }
    Ok(shares)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBiasRow {
    pub model: String,
    pub top_n: usize,
    pub category: String,
    pub organic_share: f64,
    pub recommended_share: f64,
    /// `ln(recommended / organic)`: `None` when the organic share is 0,
    /// negative infinity when the category is never recommended.
    pub log_difference: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryBiasReport {
    pub rows: Vec<CategoryBiasRow>,
}

impl CategoryBiasReport {
    /// Mean `|log difference|` over finite values for one model and cutoff.
    pub fn mean_abs(&self, model: &str, top_n: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model && r.top_n == top_n)
            .filter_map(|r| r.log_difference)
            .filter(|v| v.is_finite())
            .map(f64::abs)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,top_n,category,organic_share,recommended_share,log_difference_ln\n");
        for r in &self.rows {
            let v = match r.log_difference {
                None => UNDEFINED.to_string(),
                Some(v) if v == f64::NEG_INFINITY => "-inf".to_string(),
                Some(v) => format!("{v:.6}"),
            };
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{}",
                r.model, r.top_n, r.category, r.organic_share, r.recommended_share, v
            );
        }
        out
    }
}

/// `ln(x2 / x1)` per category, x1 from organic follows and x2 from the
/// recommendations.
pub fn category_log_difference(
    model: &str,
    top_n: usize,
    organic: &[PodcastId],
    recommended: &[PodcastId],
    categories: &[Vec<u32>],
    category_names: &[String],
) -> Result<Vec<CategoryBiasRow>> {
    let x1 = category_shares(organic, categories, category_names.len())?;
    let x2 = category_shares(recommended, categories, category_names.len())?;
    Ok(category_names
        .iter()
        .enumerate()
        .map(|(c, name)| CategoryBiasRow {
            model: model.to_string(),
            top_n,
            category: name.clone(),
            organic_share: x1[c],
            recommended_share: x2[c],
            log_difference: (x1[c] > 0.0).then(|| if x2[c] > 0.0 { (x2[c] / x1[c]).ln() } else { f64::NEG_INFINITY }),
        })
        .collect())
}

/// Number of globally most-listened genres dropped from association reports.
pub const EXCLUDED_TOP_GENRES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreShare {
    pub label: GenreLabel,
    pub share: f64,
}

/// Listening genres of the users who get `podcast` in their top list, most
/// frequent first, after removing the globally most-listened genres.
///
/// `listens_by_user` is indexed by user id; `all_listens` defines global genre popularity.
#[allow(clippy::too_many_arguments)]
pub fn genre_association_report(
    top_lists: &[(UserId, Vec<PodcastId>)],
    podcast: PodcastId,
    listens_by_user: &[Vec<ListenEvent>],
    all_listens: &[ListenEvent],
    tracks: &[TrackMetadata],
    taxonomy: &crate::domain::GenreTaxonomy,
    level: GenreLevel,
    top_g: usize,
) -> Vec<GenreShare> {
    let genre = |e: &ListenEvent| tracks[e.track.index()].genre_at(level);
    let mut global: HashMap<GenreId, u64> = HashMap::new();
    for e in all_listens {
        *global.entry(genre(e)).or_default() += 1;
    }
    let mut global: Vec<(GenreId, u64)> = global.into_iter().collect();
    global.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let excluded: BTreeSet<GenreId> = global.iter().take(EXCLUDED_TOP_GENRES).map(|(g, _)| *g).collect();

    let mut counts: HashMap<GenreId, u64> = HashMap::new();
    for (user, list) in top_lists {
        if !list.contains(&podcast) {
            continue;
        }
        for e in listens_by_user.get(user.index()).map_or(&[][..], Vec::as_slice) {
            let g = genre(e);
            if !excluded.contains(&g) {
                *counts.entry(g).or_default() += 1;
            }
        }
    }
    let total: u64 = counts.values().sum();
    let mut ranked: Vec<(GenreId, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(top_g)
        .map(|(g, c)| GenreShare {
            label: taxonomy.label(level, g),
            share: c as f64 / total as f64,
        })
        .collect()
}

pub fn genre_report_csv(rows: &[(String, PodcastId, String, Vec<GenreShare>)]) -> String {
    let mut out = String::from("model,podcast,level,rank,genre,share\n");
    for (model, _, podcast, shares) in rows {
        for (i, s) in shares.iter().enumerate() {
            let _ = writeln!(out, "{model},{podcast},{},{},{},{:.6}", s.label.level.as_str(), i + 1, s.label.name, s.share);
        }
    }
    out
}
