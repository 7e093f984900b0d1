//! The nine-model roster and the glue that trains, evaluates and analyses it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    category_log_difference, cohort_breakdown, entropy, genre_association_report, popularity_distribution,
    sample_users, CategoryBiasReport, CohortDimension, CohortReport, GenreShare, PopularityDistribution,
};
use crate::data::{split_by_user, Dataset, TestSet, TrainSet};
use crate::domain::{GenreLevel, PodcastId, UserId};
use crate::embedding::{train_skipgram, SkipGramConfig, TrackEmbeddingTable, DEFAULT_HALF_LIFE_DAYS};
use crate::features::{build_all, FeatureContext, FeatureSelection, UserFeatures, DEFAULT_TOP_M};
use crate::metrics::{evaluate_model, Metric, MetricReport, TABLE_METRICS};
use crate::ranker::{
    train, Architecture, ModelShape, PopularityBaseline, PopularityKey, RankerConfig, RankerModel, Recommender,
    TrainingData, TrainingLog, UserInput,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    CountryPopularity,
    DemoPopularity,
    Logreg,
    Cf,
    MetadataCf,
    DemoCf,
    DemoMetadata,
    CfMetadata,
    DemoCfMetadata,
}

impl ModelKind {
    /// Comparison table order.
    pub const ALL: [ModelKind; 9] = [
        ModelKind::CountryPopularity,
        ModelKind::DemoPopularity,
        ModelKind::Logreg,
        ModelKind::Cf,
        ModelKind::MetadataCf,
        ModelKind::DemoCf,
        ModelKind::DemoMetadata,
        ModelKind::CfMetadata,
        ModelKind::DemoCfMetadata,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CountryPopularity => "country_popularity",
            ModelKind::DemoPopularity => "demo_popularity",
            ModelKind::Logreg => "logreg",
            ModelKind::Cf => "cf",
            ModelKind::MetadataCf => "metadata_cf",
            ModelKind::DemoCf => "demo_cf",
            ModelKind::DemoMetadata => "demo_metadata",
            ModelKind::CfMetadata => "cf_metadata",
            ModelKind::DemoCfMetadata => "demo_cf_metadata",
        }
    }

    pub fn popularity_key(self) -> Option<PopularityKey> {
        match self {
            ModelKind::CountryPopularity => Some(PopularityKey::Country),
            ModelKind::DemoPopularity => Some(PopularityKey::CountryDemographics),
            _ => None,
        }
    }

    pub fn is_baseline(self) -> bool {
        self.popularity_key().is_some()
    }

    /// Feature families of a trained model; `None` for popularity baselines.
    pub fn selection(self) -> Option<FeatureSelection> {
        let s = |use_demographics, use_metadata, use_latent| {
            Some(FeatureSelection {
                use_demographics,
                use_metadata,
                use_latent,
            })
        };
        match self {
            ModelKind::CountryPopularity | ModelKind::DemoPopularity => None,
            ModelKind::Logreg | ModelKind::Cf => s(false, false, true),
            ModelKind::MetadataCf => s(false, true, false),
            ModelKind::DemoCf => s(true, false, true),
            ModelKind::DemoMetadata => s(true, true, false),
            ModelKind::CfMetadata => s(false, true, true),
            ModelKind::DemoCfMetadata => s(true, true, true),
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelKind::Logreg => Some(Architecture::LogisticRegression),
            k if k.is_baseline() => None,
            _ => Some(Architecture::Mlp),
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self.selection().is_some_and(|s| s.use_latent)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model {s:?}")))
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.name().to_string()
    }
}

/// Settings for everything downstream of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub roster: Vec<ModelKind>,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub top_m: usize,
    pub half_life_days: f64,
    pub skipgram: SkipGramConfig,
    /// Shared ranker settings; selection and architecture come from the model.
    pub ranker: RankerConfig,
    pub bootstrap_resamples: usize,
    /// Users sampled for the popularity and category analyses.
    pub analysis_users: usize,
    pub analysis_seed: u64,
    /// Model the cohort breakdown compares against.
    pub cohort_baseline: ModelKind,
    pub genre_level: GenreLevel,
    pub genre_top_g: usize,
    /// Most-followed podcasts covered by the genre association report.
    pub genre_podcasts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            roster: ModelKind::ALL.to_vec(),
            test_fraction: 0.2,
            split_seed: 1,
            top_m: DEFAULT_TOP_M,
            half_life_days: DEFAULT_HALF_LIFE_DAYS,
            skipgram: SkipGramConfig::default(),
            ranker: RankerConfig::desk(),
            bootstrap_resamples: 1000,
            analysis_users: 1000,
            analysis_seed: 1,
            cohort_baseline: ModelKind::DemoPopularity,
            genre_level: GenreLevel::Genre,
            genre_top_g: 10,
            genre_podcasts: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::config("model roster is empty"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie in (0, 1)"));
        }
        if self.top_m < 1 {
            return Err(Error::config("top_m must be at least 1"));
        }
        if !(self.half_life_days > 0.0) {
            return Err(Error::config("half_life_days must be positive"));
        }
        if self.bootstrap_resamples < 1 {
            return Err(Error::config("bootstrap_resamples must be at least 1"));
        }
        let mut ranker = self.ranker.clone();
        ranker.hidden_layers = ranker.hidden_layers.max(1);
        ranker.architecture = Architecture::Mlp;
        ranker.validate()
    }

    pub fn needs_embeddings(&self) -> bool {
        self.roster.iter().any(|k| k.needs_embeddings())
    }

    /// Ranker settings for one model. Negatives are capped at catalog size - 1.
    pub fn ranker_config(&self, kind: ModelKind, n_podcasts: usize) -> Option<RankerConfig> {
        let mut cfg = self.ranker.clone();
        cfg.selection = kind.selection()?;
        cfg.architecture = kind.architecture()?;
        if cfg.architecture == Architecture::LogisticRegression {
            cfg.hidden_layers = 0;
        }
        if cfg.negatives >= n_podcasts {
            log::warn!(
                "{kind}: {} negatives exceed the catalog of {n_podcasts}; using {}",
                cfg.negatives,
                n_podcasts.saturating_sub(1)
            );
            cfg.negatives = n_podcasts.saturating_sub(1).max(1);
        }
        Some(cfg)
    }

    pub fn feature_context<'a>(&self, dataset: &'a Dataset, table: Option<&'a TrackEmbeddingTable>) -> FeatureContext<'a> {
        FeatureContext {
            half_life_days: self.half_life_days,
            m: self.top_m,
            ..FeatureContext::for_dataset(dataset, table)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Popularity(PopularityBaseline),
    Ranker(RankerModel),
}

impl TrainedModel {
    pub fn recommender(&self) -> &dyn Recommender {
        match self {
            TrainedModel::Popularity(b) => b,
            TrainedModel::Ranker(m) => m,
        }
    }
}

/// Everything shared by the roster: split and (optionally) track embeddings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: TrainSet,
    pub test: TestSet,
    pub table: Option<TrackEmbeddingTable>,
}

pub fn prepare(dataset: &Dataset, cfg: &ExperimentConfig, table: Option<TrackEmbeddingTable>) -> Result<Prepared> {
    cfg.validate()?;
    let (train, test) = split_by_user(dataset, cfg.test_fraction, cfg.split_seed)?;
    let table = match table {
        Some(t) => Some(t),
        None if cfg.needs_embeddings() => Some(train_skipgram(&dataset.playlists, dataset.n_tracks(), &cfg.skipgram)?),
        None => None,
    };
    if let Some(t) = &table {
        if t.n_tracks != dataset.n_tracks() {
            return Err(Error::Dimension(format!(
                "embedding table covers {} tracks, dataset has {}",
                t.n_tracks,
                dataset.n_tracks()
            )));
        }
    }
    Ok(Prepared { train, test, table })
}

/// Per-user features for a model (all users, indexed by id); empty for baselines.
pub fn model_features(kind: ModelKind, dataset: &Dataset, table: Option<&TrackEmbeddingTable>, cfg: &ExperimentConfig) -> Result<Vec<UserFeatures>> {
    match kind.selection() {
        None => Ok(dataset
            .users
            .iter()
            .map(|u| UserFeatures {
                user: u.id,
                sparse: Default::default(),
                dense: Default::default(),
            })
            .collect()),
        Some(sel) => build_all(dataset, &sel, &cfg.feature_context(dataset, table)),
    }
}

pub fn model_shape(kind: ModelKind, dataset: &Dataset, table: Option<&TrackEmbeddingTable>) -> Option<ModelShape> {
    let sel = kind.selection()?;
    Some(ModelShape::for_dataset(dataset, &sel, table.map_or(0, |t| t.dim)))
}

pub fn train_model(
    kind: ModelKind,
    dataset: &Dataset,
    prepared: &Prepared,
    cfg: &ExperimentConfig,
) -> Result<(TrainedModel, Option<TrainingLog>)> {
    if let Some(key) = kind.popularity_key() {
        let b = PopularityBaseline::fit(&prepared.train.instances, &dataset.users, dataset.n_podcasts(), key)?;
        return Ok((TrainedModel::Popularity(b), None));
    }
    let table = prepared.table.as_ref();
    if kind.needs_embeddings() && table.is_none() {
        return Err(Error::config(format!("{kind} needs track embeddings")));
    }
    let rcfg = cfg.ranker_config(kind, dataset.n_podcasts()).expect("ranker model");
    let features = model_features(kind, dataset, table, cfg)?;
    let shape = model_shape(kind, dataset, table).expect("ranker model");
    let data = TrainingData {
        instances: &prepared.train.instances,
        features: &features,
        shape: &shape,
    };
    log::info!("training {kind} on {} instances", data.instances.len());
    let (model, log) = train(&data, &rcfg)?;
    Ok((TrainedModel::Ranker(model), Some(log)))
}

/// Full rankings of the given users, in the order given.
pub fn rank_users(model: &TrainedModel, features: &[UserFeatures], dataset: &Dataset, users: &[UserId]) -> Result<Vec<Vec<PodcastId>>> {
    users
        .iter()
        .map(|&u| {
            let input = UserInput {
                user: &dataset.users[u.index()],
                features: &features[u.index()],
            };
            Ok(model.recommender().rank(input)?.podcasts())
        })
        .collect()
}

pub fn evaluate_roster(
    models: &[(ModelKind, TrainedModel)],
    dataset: &Dataset,
    prepared: &Prepared,
    cfg: &ExperimentConfig,
) -> Result<MetricReport> {
    let mut report = MetricReport {
        metrics: TABLE_METRICS.to_vec(),
        models: Vec::with_capacity(models.len()),
    };
    for (kind, model) in models {
        let features = model_features(*kind, dataset, prepared.table.as_ref(), cfg)?;
        let m = evaluate_model(kind.name(), &prepared.test.judgments, &TABLE_METRICS, |u| {
            Ok(rank_users(model, &features, dataset, &[u])?.remove(0))
        })?;
        report.models.push(m);
    }
    Ok(report)
}

/// Train and evaluate every model of the roster in memory.
pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig, table: Option<TrackEmbeddingTable>) -> Result<ExperimentRun> {
    let prepared = prepare(dataset, cfg, table)?;
    let mut models = Vec::with_capacity(cfg.roster.len());
    let mut logs = Vec::new();
    for &kind in &cfg.roster {
        let (model, log) = train_model(kind, dataset, &prepared, cfg)?;
        if let Some(log) = log {
            logs.push((kind, log));
        }
        models.push((kind, model));
    }
    let report = evaluate_roster(&models, dataset, &prepared, cfg)?;
    Ok(ExperimentRun {
        prepared,
        models,
        logs,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub prepared: Prepared,
    pub models: Vec<(ModelKind, TrainedModel)>,
    pub logs: Vec<(ModelKind, TrainingLog)>,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutputs {
    pub cohorts: Vec<CohortReport>,
    pub popularity: PopularityDistribution,
    /// Entropy (nats) of each model's popularity-rank histogram.
    pub entropies: Vec<(String, f64)>,
    pub categories: CategoryBiasReport,
    /// (model, podcast id, podcast name, genres).
    pub genres: Vec<(String, PodcastId, String, Vec<GenreShare>)>,
}

impl AnalysisOutputs {
    pub fn entropy_csv(&self) -> String {
        let mut out = String::from("model,entropy_nats\n");
        for (m, e) in &self.entropies {
            out.push_str(&format!("{m},{e:.6}\n"));
        }
        out
    }
}

pub fn analyze(
    models: &[(ModelKind, TrainedModel)],
    report: &MetricReport,
    dataset: &Dataset,
    prepared: &Prepared,
    cfg: &ExperimentConfig,
) -> Result<AnalysisOutputs> {
    let mut cohorts = Vec::new();
    if report.model(cfg.cohort_baseline.name()).is_some() {
        for dim in CohortDimension::ALL {
            if let Some(c) = cohort_breakdown(report, dataset, dim, Metric::Ndcg(10), cfg.cohort_baseline.name())? {
                cohorts.push(c);
            }
        }
    } else {
        log::warn!("cohort baseline {} not in roster; skipping cohort breakdown", cfg.cohort_baseline);
    }

    let test_users: Vec<UserId> = prepared.test.users().collect();
    let sampled = sample_users(&test_users, cfg.analysis_users, cfg.analysis_seed);
    let mut follow_counts = vec![0u64; dataset.n_podcasts()];
    for f in &prepared.train.instances {
        follow_counts[f.podcast.index()] += 1;
    }
    let organic: Vec<PodcastId> = prepared
        .test
        .judgments
        .iter()
        .filter(|j| sampled.binary_search(&j.user).is_ok())
        .flat_map(|j| j.relevant.iter().copied())
        .collect();
    let has_categories = dataset.podcast_categories.iter().all(|c| !c.is_empty()) && !dataset.vocab.categories.is_empty();

    let mut top10 = Vec::with_capacity(models.len());
    let mut categories = CategoryBiasReport::default();
    let mut genres = Vec::new();
    let by_user = dataset.listens_by_user();
    let mut genre_podcasts: Vec<usize> = (0..dataset.n_podcasts()).collect();
    genre_podcasts.sort_by(|&a, &b| follow_counts[b].cmp(&follow_counts[a]).then(a.cmp(&b)));
    genre_podcasts.truncate(cfg.genre_podcasts);

    for (kind, model) in models {
        let features = model_features(*kind, dataset, prepared.table.as_ref(), cfg)?;
        let rankings = rank_users(model, &features, dataset, &sampled)?;
        let lists: Vec<Vec<PodcastId>> = rankings.iter().map(|r| r[..r.len().min(10)].to_vec()).collect();
        if has_categories {
            for n in [1, 10] {
                let recommended: Vec<PodcastId> = rankings.iter().flat_map(|r| r[..r.len().min(n)].iter().copied()).collect();
                categories.rows.extend(category_log_difference(
                    kind.name(),
                    n,
                    &organic,
                    &recommended,
                    &dataset.podcast_categories,
                    dataset.vocab.categories.names(),
                )?);
            }
        }
        if !kind.is_baseline() {
            let pairs: Vec<(UserId, Vec<PodcastId>)> = sampled.iter().copied().zip(lists.iter().cloned()).collect();
            for &p in &genre_podcasts {
                let p = PodcastId::from(p);
                let shares = genre_association_report(
                    &pairs,
                    p,
                    &by_user,
                    &dataset.listens,
                    &dataset.tracks,
                    &dataset.taxonomy,
                    cfg.genre_level,
                    cfg.genre_top_g,
                );
                genres.push((kind.name().to_string(), p, dataset.podcast_name(p).to_string(), shares));
            }
        }
        top10.push((kind.name().to_string(), lists));
    }
    let popularity = popularity_distribution(&top10, &follow_counts)?;
    let entropies = popularity.models.iter().map(|(m, h)| (m.clone(), entropy(h))).collect();
    Ok(AnalysisOutputs {
        cohorts,
        popularity,
        entropies,
        categories,
        genres,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    #[test]
    fn roster_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("popularity".parse::<ModelKind>().is_err());
        let selections: std::collections::BTreeSet<_> = ModelKind::ALL
            .iter()
            .filter(|k| k.architecture() == Some(Architecture::Mlp))
            .map(|k| {
                let s = k.selection().unwrap();
                (s.use_demographics, s.use_metadata, s.use_latent)
            })
            .collect();
        // MLP models cover every non-empty feature combination except demographics alone.
        assert_eq!(selections.len(), 6);
        assert!(!selections.contains(&(true, false, false)));
    }

    #[test]
    fn small_experiment_runs_end_to_end() {
        let ds = generate_synthetic(&SyntheticConfig {
            n_users: 200,
            n_tracks: 200,
            n_podcasts: 30,
            n_playlists: 200,
            n_clusters: 3,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let cfg = ExperimentConfig {
            ranker: RankerConfig { epochs: 2, hidden_dim: 16, ..RankerConfig::desk() },
            skipgram: SkipGramConfig { epochs: 1, dim: 8, ..SkipGramConfig::default() },
            ..ExperimentConfig::default()
        };
        let run = run_experiment(&ds, &cfg, None).unwrap();
        assert_eq!(run.report.models.len(), 9);
        assert_eq!(run.logs.len(), 7);
        let csv = run.report.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 6);
        let a = analyze(&run.models, &run.report, &ds, &run.prepared, &cfg).unwrap();
        assert_eq!(a.cohorts.len(), 4);
        let n_sampled = run.prepared.test.len().min(cfg.analysis_users) as u64;
        for (_, h) in &a.popularity.models {
            assert_eq!(h.iter().sum::<u64>(), 10 * n_sampled);
        }
        assert!(!a.categories.rows.is_empty());
        assert_eq!(a.genres.len(), 7 * cfg.genre_podcasts);
    }
}
