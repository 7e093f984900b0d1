//! Ranking metrics with binary relevance, per-user reports and paired bootstrap tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{PodcastId, UserId};
use crate::{seeded_rng, Error, Result};

/// A held-out user and the podcasts they follow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub user: UserId,
    pub relevant: BTreeSet<PodcastId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    Ndcg(usize),
    Precision(usize),
    Recall(usize),
}

/// Column set of the model comparison table.
pub const TABLE_METRICS: [Metric; 5] = [
    Metric::Ndcg(10),
    Metric::Ndcg(50),
    Metric::Precision(1),
    Metric::Precision(10),
    Metric::Recall(10),
];

impl Metric {
    pub fn k(self) -> usize {
        match self {
            Metric::Ndcg(k) | Metric::Precision(k) | Metric::Recall(k) => k,
        }
    }

    pub fn compute(self, ranking: &[PodcastId], relevant: &BTreeSet<PodcastId>) -> Result<f64> {
        match self {
            Metric::Ndcg(k) => ndcg_at_k(ranking, relevant, k),
            Metric::Precision(k) => precision_at_k(ranking, relevant, k),
            Metric::Recall(k) => recall_at_k(ranking, relevant, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Precision(k) => write!(f, "precision@{k}"),
            Metric::Recall(k) => write!(f, "recall@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("unknown metric {s:?}"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        match name {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "precision" => Ok(Metric::Precision(k)),
            "recall" => Ok(Metric::Recall(k)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

fn hits(ranking: &[PodcastId], relevant: &BTreeSet<PodcastId>, k: usize) -> usize {
    ranking.iter().take(k).filter(|p| relevant.contains(p)).count()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::config("k must be at least 1"))
    } else {
        Ok(())
    }
}

/// `|top-k ∩ relevant| / k`; the ranking must hold at least `k` items.
pub fn precision_at_k(ranking: &[PodcastId], relevant: &BTreeSet<PodcastId>, k: usize) -> Result<f64> {
    check_k(k)?;
    if ranking.len() < k {
        return Err(Error::RankingTooShort { len: ranking.len(), k });
    }
    Ok(hits(ranking, relevant, k) as f64 / k as f64)
}

/// `|top-k ∩ relevant| / |relevant|`.
pub fn recall_at_k(ranking: &[PodcastId], relevant: &BTreeSet<PodcastId>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::EmptyRelevant(k as u32));
    }
    Ok(hits(ranking, relevant, k) as f64 / relevant.len() as f64)
}

/// Binary-gain nDCG with a `1 / log2(rank + 1)` discount.
pub fn ndcg_at_k(ranking: &[PodcastId], relevant: &BTreeSet<PodcastId>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::EmptyRelevant(k as u32));
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, p)| relevant.contains(p))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=relevant.len().min(k)).map(discount).sum();
    Ok(dcg / idcg)
}

/// Per-user metric values for one model, users ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub users: Vec<UserId>,
    pub values: BTreeMap<Metric, Vec<f64>>,
}

impl ModelMetrics {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        let v = self.values.get(&metric)?;
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }

    pub fn per_user(&self, metric: Metric) -> Option<&[f64]> {
        self.values.get(&metric).map(Vec::as_slice)
    }

    /// Concatenates reports from independent runs (e.g. several seeds).
    pub fn pooled(model: &str, parts: &[&ModelMetrics]) -> ModelMetrics {
        let mut out = ModelMetrics {
            model: model.to_string(),
            users: Vec::new(),
            values: BTreeMap::new(),
        };
        for p in parts {
            out.users.extend(&p.users);
            for (m, v) in &p.values {
                out.values.entry(*m).or_default().extend(v);
            }
        }
        out
    }
}

/// Metrics of several models on the same test users, in roster order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    pub models: Vec<ModelMetrics>,
}

impl MetricReport {
    pub fn model(&self, name: &str) -> Option<&ModelMetrics> {
        self.models.iter().find(|m| m.model == name)
    }

    /// One row per model, one column per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for m in &self.metrics {
            out.push(',');
            out.push_str(&m.to_string());
        }
        out.push('\n');
        for model in &self.models {
            out.push_str(&model.model);
            for m in &self.metrics {
                out.push(',');
                if let Some(v) = model.mean(*m) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per (model, user) with every metric value.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for model in &self.models {
            for (i, user) in model.users.iter().enumerate() {
                let mut row = serde_json::Map::new();
                row.insert("model".into(), model.model.clone().into());
                row.insert("user".into(), user.0.into());
                for m in &self.metrics {
                    if let Some(v) = model.values.get(m) {
                        row.insert(m.to_string(), v[i].into());
                    }
                }
                out.push_str(&serde_json::to_string(&row)?);
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn write(&self, csv_path: &Path, jsonl_path: &Path) -> Result<()> {
        for (path, body) in [(csv_path, self.to_csv()), (jsonl_path, self.to_jsonl()?)] {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Scores every test user with `rank`, which returns the full ranking for a user.
pub fn evaluate_model(
    model: &str,
    judgments: &[RelevanceJudgment],
    metrics: &[Metric],
    mut rank: impl FnMut(UserId) -> Result<Vec<PodcastId>>,
) -> Result<ModelMetrics> {
    if judgments.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut order: Vec<&RelevanceJudgment> = judgments.iter().collect();
    order.sort_by_key(|j| j.user);
    let mut values: BTreeMap<Metric, Vec<f64>> = metrics.iter().map(|&m| (m, Vec::with_capacity(order.len()))).collect();
    for j in &order {
        let ranking = rank(j.user)?;
        for &m in metrics {
            values.get_mut(&m).expect("metric present").push(m.compute(&ranking, &j.relevant)?);
        }
    }
    Ok(ModelMetrics {
        model: model.to_string(),
        users: order.iter().map(|j| j.user).collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Means differ.
    TwoSided,
    /// Mean of `a` exceeds mean of `b`.
    Greater,
}

/// Paired bootstrap over users on the mean difference `a - b`.
///
/// Resampled differences are centered on the observed one; the p-value is
/// `(1 + #extreme) / (1 + n_resamples)`.
pub fn paired_bootstrap(
    a: &ModelMetrics,
    b: &ModelMetrics,
    metric: Metric,
    n_resamples: usize,
    seed: u64,
    alternative: Alternative,
) -> Result<f64> {
    if n_resamples == 0 {
        return Err(Error::config("n_resamples must be at least 1"));
    }
    if a.users != b.users {
        return Err(Error::MismatchedUsers);
    }
    let missing = || Error::config(format!("metric {metric} missing from report"));
    let va = a.per_user(metric).ok_or_else(missing)?;
    let vb = b.per_user(metric).ok_or_else(missing)?;
    if va.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let diffs: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = seeded_rng(seed);
    let mut extreme = 0usize;
    for _ in 0..n_resamples {
        let mut s = 0.0;
        for _ in 0..n {
            s += diffs[rng.random_range(0..n)];
        }
        let centered = s / n as f64 - observed;
        let hit = match alternative {
            Alternative::TwoSided => centered.abs() >= observed.abs(),
            Alternative::Greater => centered >= observed,
        };
        extreme += usize::from(hit);
    }
    Ok((1 + extreme) as f64 / (1 + n_resamples) as f64)
}

/// Kendall rank correlation between two orderings of the same item set.
pub fn kendall_tau(a: &[PodcastId], b: &[PodcastId]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Dimension(format!(
            "kendall tau needs two equal-length rankings of at least 2 items, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let pos_b: BTreeMap<PodcastId, usize> = b.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let rank_b: Vec<usize> = a
        .iter()
        .map(|p| pos_b.get(p).copied())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Dimension("kendall tau rankings hold different items".into()))?;
    let n = rank_b.len();
    let mut concordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            concordant += if rank_b[i] < rank_b[j] { 1 } else { -1 };
        }
    }
    Ok(concordant as f64 / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> Vec<PodcastId> {
        v.iter().map(|&p| PodcastId(p)).collect()
    }

    fn set(v: &[u32]) -> BTreeSet<PodcastId> {
        ids(v).into_iter().collect()
    }

    #[test]
    fn worked_examples() {
        let r = ids(&[5, 1, 2, 3, 4, 0, 6, 7, 8, 9]);
        assert_eq!(precision_at_k(&r, &set(&[5]), 1).unwrap(), 1.0);
        assert_eq!(precision_at_k(&r, &set(&[1, 4, 9, 42]), 10).unwrap(), 0.3);
        assert_eq!(recall_at_k(&r, &set(&[1, 4]), 10).unwrap(), 1.0);
        assert_eq!(recall_at_k(&r, &set(&[1, 40, 41, 42]), 10).unwrap(), 0.25);
        assert_eq!(recall_at_k(&r, &set(&[40]), 10).unwrap(), 0.0);
        assert_eq!(ndcg_at_k(&r, &set(&[5]), 10).unwrap(), 1.0);
        assert!((ndcg_at_k(&r, &set(&[2]), 10).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&r, &set(&[5, 1]), 10).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let r = ids(&[0, 1]);
        assert!(matches!(precision_at_k(&r, &set(&[0]), 3), Err(Error::RankingTooShort { len: 2, k: 3 })));
        assert!(matches!(recall_at_k(&r, &set(&[]), 1), Err(Error::EmptyRelevant(_))));
        assert!(matches!(ndcg_at_k(&r, &set(&[]), 1), Err(Error::EmptyRelevant(_))));
        assert!(precision_at_k(&r, &set(&[0]), 0).is_err());
        assert!("mrr@10".parse::<Metric>().is_err());
        assert_eq!("ndcg@50".parse::<Metric>().unwrap(), Metric::Ndcg(50));
    }

    fn report(model: &str, users: &[u32], vals: &[f64]) -> ModelMetrics {
        ModelMetrics {
            model: model.into(),
            users: users.iter().map(|&u| UserId(u)).collect(),
            values: [(Metric::Ndcg(10), vals.to_vec())].into_iter().collect(),
        }
    }

    #[test]
    fn two_user_fixture_and_table_layout() {
        let judgments = vec![
            RelevanceJudgment { user: UserId(1), relevant: set(&[2]) },
            RelevanceJudgment { user: UserId(0), relevant: set(&[0, 3]) },
        ];
        let rankings: BTreeMap<UserId, Vec<PodcastId>> = [
            (UserId(0), ids(&[0, 1, 2, 3])),
            (UserId(1), ids(&[0, 1, 2, 3])),
        ]
        .into_iter()
        .collect();
        let metrics = [Metric::Precision(1), Metric::Recall(2), Metric::Ndcg(4)];
        let m = evaluate_model("m", &judgments, &metrics, |u| Ok(rankings[&u].clone())).unwrap();
        assert_eq!(m.users, vec![UserId(0), UserId(1)]);
        // user 0: p@1 1, r@2 0.5, ndcg (1 + 1/log2 5)/(1 + 1/log2 3); user 1: 0, 0, 0.5
        let n0 = (1.0 + 1.0 / 5f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert_eq!(m.mean(Metric::Precision(1)), Some(0.5));
        assert_eq!(m.mean(Metric::Recall(2)), Some(0.25));
        assert!((m.mean(Metric::Ndcg(4)).unwrap() - (n0 + 0.5) / 2.0).abs() < 1e-12);

        let rep = MetricReport { metrics: metrics.to_vec(), models: vec![m.clone(), ModelMetrics { model: "n".into(), ..m }] };
        let csv = rep.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "model,precision@1,recall@2,ndcg@4");
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(rep.to_jsonl().unwrap().lines().count(), 4);
    }

    #[test]
    fn bootstrap_examples() {
        let users: Vec<u32> = (0..1000).collect();
        let a = report("a", &users, &[0.9; 1000]);
        let b = report("b", &users, &[0.1; 1000]);
        assert_eq!(paired_bootstrap(&a, &a, Metric::Ndcg(10), 200, 1, Alternative::TwoSided).unwrap(), 1.0);
        assert!(paired_bootstrap(&a, &b, Metric::Ndcg(10), 2000, 1, Alternative::TwoSided).unwrap() < 0.001);
        assert!(paired_bootstrap(&a, &b, Metric::Ndcg(10), 2000, 1, Alternative::Greater).unwrap() < 0.001);
        assert!(matches!(
            paired_bootstrap(&a, &b, Metric::Ndcg(10), 0, 1, Alternative::TwoSided),
            Err(Error::Config(_))
        ));
        let c = report("c", &users[1..], &[0.5; 999]);
        assert!(matches!(
            paired_bootstrap(&a, &c, Metric::Ndcg(10), 10, 1, Alternative::TwoSided),
            Err(Error::MismatchedUsers)
        ));
    }

    #[test]
    fn one_sided_bootstrap_does_not_reject_when_a_is_worse() {
        let users: Vec<u32> = (0..200).collect();
        let vals_a: Vec<f64> = users.iter().map(|&u| if u % 3 == 0 { 0.2 } else { 0.4 }).collect();
        let vals_b: Vec<f64> = users.iter().map(|&u| if u % 2 == 0 { 0.5 } else { 0.3 }).collect();
        let a = report("a", &users, &vals_a);
        let b = report("b", &users, &vals_b);
        assert!(paired_bootstrap(&a, &b, Metric::Ndcg(10), 500, 3, Alternative::Greater).unwrap() > 0.5);
    }

    #[test]
    fn kendall_tau_extremes() {
        let a = ids(&[0, 1, 2, 3]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &ids(&[3, 2, 1, 0])).unwrap(), -1.0);
        assert!((kendall_tau(&a, &ids(&[1, 0, 2, 3])).unwrap() - 4.0 / 6.0).abs() < 1e-12);
        assert!(kendall_tau(&a, &ids(&[0, 1, 2, 9])).is_err());
    }

    fn ranking_and_relevant() -> impl Strategy<Value = (Vec<PodcastId>, BTreeSet<PodcastId>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                Just((0..n as u32).collect::<Vec<_>>()).prop_shuffle(),
                prop::collection::btree_set(0..n as u32, 1..=n),
            )
                .prop_map(|(r, rel)| (ids(&r), rel.into_iter().map(PodcastId).collect()))
        })
    }

    proptest! {
        #[test]
        fn bounded_and_monotone((r, rel) in ranking_and_relevant()) {
            let mut prev_recall = 0.0;
            let mut prev_ndcg = 0.0;
            for k in 1..=r.len() {
                let p = precision_at_k(&r, &rel, k).unwrap();
                let rc = recall_at_k(&r, &rel, k).unwrap();
                let n = ndcg_at_k(&r, &rel, k).unwrap();
                for v in [p, rc, n] {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
                prop_assert!(rc >= prev_recall);
                // IDCG is cut at k, so it only stops growing once k covers every relevant item.
                if k > rel.len() {
                    prop_assert!(n >= prev_ndcg - 1e-12);
                }
                prev_recall = rc;
                prev_ndcg = n;
            }
            prop_assert_eq!(precision_at_k(&r, &rel, 1).unwrap(), ndcg_at_k(&r, &rel, 1).unwrap());
        }

        #[test]
        fn ndcg_ignores_order_below_k((r, rel) in ranking_and_relevant(), k in 1usize..30, seed in any::<u64>()) {
            let k = k.min(r.len());
            let mut tail = r[k..].to_vec();
            use rand::seq::SliceRandom;
            tail.shuffle(&mut seeded_rng(seed));
            let permuted: Vec<_> = r[..k].iter().copied().chain(tail).collect();
            prop_assert_eq!(ndcg_at_k(&r, &rel, k).unwrap(), ndcg_at_k(&permuted, &rel, k).unwrap());
        }
    }
}
