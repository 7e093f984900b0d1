//! Run configuration: a preset, overlaid by an optional TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use crossrec::data::SyntheticConfig;
use crossrec::pipeline::ExperimentConfig;
use crossrec::ranker::RankerConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 500 users, 100 podcasts, small network.
    Desk,
    /// 5000 users, 200 podcasts, 512 hidden units, 2048 negatives.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Existing dataset to ingest; the synthetic generator is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (synthetic, ranker) = match preset {
            // The desk catalog has 100 podcasts, below the default negative count.
            Preset::Desk => (SyntheticConfig::desk(7), RankerConfig { negatives: 64, ..RankerConfig::desk() }),
            Preset::Full => (SyntheticConfig::benchmark(7), RankerConfig::full()),
        };
        RunConfig {
            out_dir: PathBuf::from("crossrec-out"),
            data_dir: None,
            synthetic,
            experiment: ExperimentConfig {
                ranker,
                ..ExperimentConfig::default()
            },
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| self.out_dir.join("data"))
    }

    /// Applies a single seed to every random stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.synthetic.seed = seed;
        let e = &mut self.experiment;
        e.split_seed = seed;
        e.analysis_seed = seed;
        e.skipgram.seed = seed;
        e.ranker.seed = seed;
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.experiment.skipgram.workers = workers;
        self.experiment.ranker.workers = workers;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }
}

/// Overlay flags and environment shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub models: Option<Vec<String>>,
}

pub fn resolve(o: &Overrides) -> Result<RunConfig, Failure> {
    let base = RunConfig::preset(o.preset.unwrap_or(Preset::Desk));
    let mut cfg = match &o.config {
        None => base,
        Some(path) => merge_file(base, path)?,
    };
    if let Some(seed) = o.seed {
        cfg.set_seed(seed);
    }
    if let Some(workers) = o.workers {
        if workers < 1 {
            return Err(Failure::config("--workers must be at least 1"));
        }
        cfg.set_workers(workers);
    }
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
    if let Some(models) = &o.models {
        cfg.experiment.roster = models
            .iter()
            .map(|m| m.parse())
            .collect::<crossrec::Result<_>>()?;
    }
    cfg.synthetic.validate()?;
    cfg.experiment.validate()?;
    Ok(cfg)
}

fn merge_file(base: RunConfig, path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::missing(path, &e.to_string()))?;
    let file: toml::Table = toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut merged = toml::Table::try_from(&base).expect("run config serializes to TOML");
    overlay(&mut merged, file);
    merged
        .try_into()
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_only_what_it_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[synthetic]\nn_users = 42\n[experiment.ranker]\nepochs = 3\n").unwrap();
        let cfg = resolve(&Overrides {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.synthetic.n_users, 42);
        assert_eq!(cfg.synthetic.n_podcasts, SyntheticConfig::desk(0).n_podcasts);
        assert_eq!(cfg.experiment.ranker.epochs, 3);
        assert_eq!(cfg.experiment.ranker.seed, 9);
        let round: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[synthetic]\nnoize = 0.1\n").unwrap();
        let err = resolve(&Overrides {
            config: Some(path),
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(err.code, 2);
    }
}
