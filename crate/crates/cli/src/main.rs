//! `crossrec` command-line driver.
//!
//! Output layout under the output directory:
//! `data/`, `embeddings/`, `models/`, `reports/`, `analysis/`, plus
//! `config/<command>.toml` holding the resolved configuration of the last run.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossrec::data::{generate_synthetic, load_dataset, write_dataset, Dataset, FileSet};
use crossrec::embedding::{read_table, train_skipgram_traced, write_table, TrackEmbeddingTable};
use crossrec::metrics::MetricReport;
use crossrec::pipeline::{self, ModelKind, Prepared, TrainedModel};
use crossrec::ranker::{load_model, save_model, PopularityBaseline, UserInput};
use crossrec::Error;
use serde::Serialize;

use config::{Overrides, Preset, RunConfig};

/// Exit status plus message for a failed command.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn missing(path: &Path, what: &str) -> Self {
        Failure {
            code: 3,
            message: format!("missing artifact {}: {what}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 2,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            Error::RankerDiverged { .. } | Error::SkipGramDiverged { .. } => 4,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "crossrec", version, about = "Cross-domain podcast recommendation from music listening")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file overriding the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training threads; 1 gives byte-identical reruns.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, env = "CROSSREC_OUT")]
    out: Option<PathBuf>,
    /// Comma-separated model roster.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset into `<out>/data`.
    Generate,
    /// Train skip-gram track embeddings on the playlists.
    TrainEmbeddings,
    /// Train every model of the roster.
    TrainRanker,
    /// Score the test split and write the metric table.
    Evaluate,
    /// Cohort, popularity, category and genre analyses.
    Analyze,
    /// Print the top-k podcasts for one user as JSON.
    Recommend {
        /// External user id.
        #[arg(long)]
        user: String,
        #[arg(long, default_value = "demo_cf_metadata")]
        model: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::TrainEmbeddings => "train-embeddings",
            Command::TrainRanker => "train-ranker",
            Command::Evaluate => "evaluate",
            Command::Analyze => "analyze",
            Command::Recommend { .. } => "recommend",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let g = cli.global;
    let cfg = config::resolve(&Overrides {
        config: g.config,
        preset: g.preset,
        seed: g.seed,
        workers: g.workers,
        out: g.out,
        models: g.models,
    })?;
    if !matches!(cli.command, Command::Recommend { .. }) {
        write_file(&cfg.out_dir.join("config").join(format!("{}.toml", cli.command.name())), &cfg.to_toml())?;
    }
    match cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::TrainEmbeddings => cmd_train_embeddings(&cfg),
        Command::TrainRanker => cmd_train_ranker(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg).map(|_| ()),
        Command::Analyze => cmd_analyze(&cfg),
        Command::Recommend { user, model, k } => cmd_recommend(&cfg, &user, &model, k),
    }
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(())
}

fn require(path: &Path, what: &str) -> CmdResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::missing(path, what))
    }
}

fn embeddings_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("embeddings").join("tracks.xrsg")
}

fn model_path(cfg: &RunConfig, kind: ModelKind) -> PathBuf {
    let ext = if kind.is_baseline() { "json" } else { "xrrk" };
    cfg.out_dir.join("models").join(format!("{}.{ext}", kind.name()))
}

fn cmd_generate(cfg: &RunConfig) -> CmdResult {
    let dataset = generate_synthetic(&cfg.synthetic)?;
    let dir = cfg.out_dir.join("data");
    write_dataset(&dataset, &dir)?;
    log::info!("wrote {} users to {}", dataset.n_users(), dir.display());
    Ok(())
}

fn load(cfg: &RunConfig) -> CmdResult<Dataset> {
    let files = FileSet::in_dir(cfg.dataset_dir());
    require(&files.manifest, "dataset manifest (run `generate` first)")?;
    Ok(load_dataset(&files)?)
}

fn cmd_train_embeddings(cfg: &RunConfig) -> CmdResult {
    let dataset = load(cfg)?;
    let (table, losses) = train_skipgram_traced(&dataset.playlists, dataset.n_tracks(), &cfg.experiment.skipgram)?;
    let path = embeddings_path(cfg);
    write_file(&path.with_extension("loss.csv"), &loss_csv(&losses))?;
    write_table(&table, &path)?;
    Ok(())
}

fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,heldout_loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l:.8}\n"));
    }
    out
}

/// Dataset, split and (when the roster needs it) the embedding table.
fn prepare(cfg: &RunConfig) -> CmdResult<(Dataset, Prepared)> {
    let dataset = load(cfg)?;
    let table: Option<TrackEmbeddingTable> = if cfg.experiment.needs_embeddings() {
        let path = embeddings_path(cfg);
        require(&path, "track embeddings (run `train-embeddings` first)")?;
        Some(read_table(&path)?)
    } else {
        None
    };
    let prepared = pipeline::prepare(&dataset, &cfg.experiment, table)?;
    Ok((dataset, prepared))
}

fn cmd_train_ranker(cfg: &RunConfig) -> CmdResult {
    let (dataset, prepared) = prepare(cfg)?;
    for &kind in &cfg.experiment.roster {
        let (model, log) = pipeline::train_model(kind, &dataset, &prepared, &cfg.experiment)?;
        let path = model_path(cfg, kind);
        write_file(&path, "")?;
        match &model {
            TrainedModel::Popularity(b) => b.save(&path)?,
            TrainedModel::Ranker(m) => save_model(m, &path)?,
        }
        if let Some(log) = log {
            write_file(&path.with_extension("log.csv"), &log.to_csv())?;
        }
    }
    Ok(())
}

fn load_models(cfg: &RunConfig, roster: &[ModelKind]) -> CmdResult<Vec<(ModelKind, TrainedModel)>> {
    roster
        .iter()
        .map(|&kind| {
            let path = model_path(cfg, kind);
            require(&path, &format!("{kind} model (run `train-ranker` first)"))?;
            let model = if kind.is_baseline() {
                TrainedModel::Popularity(PopularityBaseline::load(&path)?)
            } else {
                TrainedModel::Ranker(load_model(&path)?)
            };
            Ok((kind, model))
        })
        .collect()
}

fn cmd_evaluate(cfg: &RunConfig) -> CmdResult<(Dataset, Prepared, Vec<(ModelKind, TrainedModel)>, MetricReport)> {
    let (dataset, prepared) = prepare(cfg)?;
    let models = load_models(cfg, &cfg.experiment.roster)?;
    let report = pipeline::evaluate_roster(&models, &dataset, &prepared, &cfg.experiment)?;
    let dir = cfg.out_dir.join("reports");
    write_file(&dir.join("metrics.csv"), &report.to_csv())?;
    write_file(&dir.join("metrics.jsonl"), &report.to_jsonl()?)?;
    Ok((dataset, prepared, models, report))
}

fn cmd_analyze(cfg: &RunConfig) -> CmdResult {
    let (dataset, prepared, models, report) = cmd_evaluate(cfg)?;
    let a = pipeline::analyze(&models, &report, &dataset, &prepared, &cfg.experiment)?;
    let dir = cfg.out_dir.join("analysis");
    for c in &a.cohorts {
        write_file(&dir.join(format!("cohort_{}.csv", c.dimension.as_str())), &c.to_csv())?;
    }
    write_file(&dir.join("popularity.csv"), &a.popularity.to_csv())?;
    write_file(&dir.join("entropy.csv"), &a.entropy_csv())?;
    write_file(&dir.join("categories.csv"), &a.categories.to_csv())?;
    write_file(&dir.join("genres.csv"), &crossrec::analysis::genre_report_csv(&a.genres))?;
    Ok(())
}

#[derive(Serialize)]
struct Recommendation<'a> {
    user: &'a str,
    model: &'a str,
    items: Vec<Item<'a>>,
}

#[derive(Serialize)]
struct Item<'a> {
    podcast: &'a str,
    score: f64,
}

fn cmd_recommend(cfg: &RunConfig, user: &str, model: &str, k: usize) -> CmdResult {
    let kind: ModelKind = model.parse()?;
    let dataset = load(cfg)?;
    let uid = dataset
        .vocab
        .users
        .id(user)
        .ok_or_else(|| Failure::config(format!("unknown user {user:?}")))?;
    let table = if kind.needs_embeddings() {
        let path = embeddings_path(cfg);
        require(&path, "track embeddings (run `train-embeddings` first)")?;
        Some(read_table(&path)?)
    } else {
        None
    };
    let (_, trained) = load_models(cfg, &[kind])?.remove(0);
    let features = pipeline::model_features(kind, &dataset, table.as_ref(), &cfg.experiment)?;
    let input = UserInput {
        user: &dataset.users[uid as usize],
        features: &features[uid as usize],
    };
    let ranking = trained.recommender().rank(input)?;
    let out = Recommendation {
        user,
        model: kind.name(),
        items: ranking
            .top(k)
            .iter()
            .map(|&(p, score)| Item {
                podcast: dataset.podcast_name(p),
                score,
            })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(())
}
