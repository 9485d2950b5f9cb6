//! Experiment harness: run configuration, strategy x seed matrices,
//! per-run CSV files and the cross-seed summary.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, EmbeddingDataset, SplitSpec, SyntheticSpec};
use crate::engine::{run_al_labelled, EngineConfig, RunRecord};
use crate::head::TrainConfig;
use crate::error::{Error, Result};
use crate::format::read_embedding_file;
use crate::strategy::{CealOptions, MalOptions, Strategy, StrategyKind};
use crate::uncertainty::Measure;

/// Feature noise used by the ablation matrix when none is configured.
pub const DEFAULT_ABLATION_NOISE: f64 = 2.0;

/// Flat, JSON-serialisable run configuration. Every key has a matching
/// command-line flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub strategy: String,
    pub strategies: Vec<String>,
    pub shots: usize,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub out: PathBuf,
    /// `nct`, `breakhis` or `synthetic`; supplies defaults for the four
    /// training keys below.
    pub preset: String,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub wd: Option<f64>,
    pub train_fraction: f64,
    pub ablate_no_pseudo: bool,
    pub ablate_no_subarrays: bool,
    pub ablate_entropy_only: bool,
    pub ablate_noise: Option<f64>,
    pub baseline_seed: bool,
    pub ceal_delta0: f64,
    pub ceal_delta_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ceal = CealOptions::default();
        Self {
            data: None,
            synthetic: None,
            strategy: "mal".into(),
            strategies: Vec::new(),
            shots: 10,
            seeds: vec![1],
            jobs: 1,
            out: PathBuf::from("results"),
            preset: "nct".into(),
            lr: None,
            batch: None,
            epochs: None,
            wd: None,
            train_fraction: 0.8,
            ablate_no_pseudo: false,
            ablate_no_subarrays: false,
            ablate_entropy_only: false,
            ablate_noise: None,
            baseline_seed: false,
            ceal_delta0: ceal.delta0,
            ceal_delta_step: ceal.delta_step,
        }
    }
}

/// One column of an experiment: a named strategy plus its engine settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub strategy: Strategy,
    pub engine: EngineConfig,
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.as_ref().display()))
        })?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("bad config file: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.synthetic) {
            (None, None) => return Err(Error::config("one of `data` or `synthetic` is required")),
            (Some(_), Some(_)) => {
                return Err(Error::config("`data` and `synthetic` are mutually exclusive"))
            }
            (Some(path), None) if !path.exists() => {
                return Err(Error::config(format!("data file {} does not exist", path.display())))
            }
            (None, Some(spec)) => {
                SyntheticSpec::parse(spec)?;
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.shots == 0 {
            return Err(Error::config("shots must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be at least 1"));
        }
        self.strategy.parse::<StrategyKind>()?;
        for s in &self.strategies {
            s.parse::<StrategyKind>()?;
        }
        if let Some(sigma) = self.ablate_noise {
            if !(sigma >= 0.0) {
                return Err(Error::config("ablate_noise must be non-negative"));
            }
        }
        self.engine_config()?.train.validate()
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let base = TrainConfig::preset(&self.preset)?;
        Ok(TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            batch_size: self.batch.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            weight_decay: self.wd.unwrap_or(base.weight_decay),
            ..base
        })
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        Ok(EngineConfig {
            train: self.train_config()?,
            baseline_seed: self.baseline_seed,
            feature_noise: self.ablate_noise,
            ..EngineConfig::default()
        })
    }

    fn mal_options(&self) -> MalOptions {
        MalOptions {
            pseudo_guard: !self.ablate_no_pseudo,
            subarrays: !self.ablate_no_subarrays,
            measure: if self.ablate_entropy_only {
                Measure::Entropy
            } else {
                Measure::MarginEntropy
            },
        }
    }

    fn build_strategy(&self, kind: StrategyKind) -> Strategy {
        match kind {
            StrategyKind::Mal => Strategy::Mal(self.mal_options()),
            StrategyKind::Ceal => Strategy::Ceal(CealOptions {
                delta0: self.ceal_delta0,
                delta_step: self.ceal_delta_step,
            }),
            other => other.into(),
        }
    }

    fn label_for(&self, kind: StrategyKind) -> String {
        let mut label = kind.name().to_string();
        if kind == StrategyKind::Mal {
            if self.ablate_no_pseudo {
                label.push_str("-no-pseudo");
            }
            if self.ablate_no_subarrays {
                label.push_str("-no-subarrays");
            }
            if self.ablate_entropy_only {
                label.push_str("-entropy-only");
            }
        }
        if self.ablate_noise.is_some_and(|s| s > 0.0) {
            label.push_str("-noisy-features");
        }
        label
    }

    /// The single strategy named by `strategy`.
    pub fn run_specs(&self) -> Result<Vec<RunSpec>> {
        let kind: StrategyKind = self.strategy.parse()?;
        Ok(vec![RunSpec {
            label: self.label_for(kind),
            strategy: self.build_strategy(kind),
            engine: self.engine_config()?,
        }])
    }

    /// Every strategy in `strategies` (all seven when empty).
    pub fn sweep_specs(&self) -> Result<Vec<RunSpec>> {
        let kinds: Vec<StrategyKind> = if self.strategies.is_empty() {
            StrategyKind::ALL.to_vec()
        } else {
            self.strategies
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?
        };
        let engine = self.engine_config()?;
        Ok(kinds
            .into_iter()
            .map(|kind| RunSpec {
                label: self.label_for(kind),
                strategy: self.build_strategy(kind),
                engine,
            })
            .collect())
    }

    /// Full selector plus one variant per disabled component: pseudo-label
    /// guard, sub-arrays, margin-entropy (entropy instead), and feature
    /// quality (Gaussian noise).
    pub fn ablation_specs(&self) -> Result<Vec<RunSpec>> {
        let engine = EngineConfig {
            feature_noise: None,
            ..self.engine_config()?
        };
        let full = MalOptions::default();
        let noise = self.ablate_noise.unwrap_or(DEFAULT_ABLATION_NOISE);
        let variant = |label: &str, opts: MalOptions, feature_noise: Option<f64>| RunSpec {
            label: label.to_string(),
            strategy: Strategy::Mal(opts),
            engine: EngineConfig {
                feature_noise,
                ..engine
            },
        };
        Ok(vec![
            variant("mal", full, None),
            variant("mal-no-pseudo", MalOptions { pseudo_guard: false, ..full }, None),
            variant("mal-no-subarrays", MalOptions { subarrays: false, ..full }, None),
            variant(
                "mal-entropy-only",
                MalOptions {
                    measure: Measure::Entropy,
                    ..full
                },
                None,
            ),
            variant("mal-noisy-features", full, Some(noise)),
        ])
    }

    /// Reads the embedding file or generates the synthetic set.
    pub fn load_dataset(&self) -> Result<EmbeddingDataset> {
        match (&self.data, &self.synthetic) {
            (Some(path), _) => read_embedding_file(path),
            (None, Some(spec)) => SyntheticSpec::parse(spec)?.generate(),
            (None, None) => Err(Error::config("one of `data` or `synthetic` is required")),
        }
    }
}

/// Runs every `(spec, seed)` pair on up to `jobs` threads. The split for a
/// seed is shared by all specs. Results come back in spec-major, seed-minor
/// order regardless of scheduling.
pub fn run_matrix(
    dataset: &EmbeddingDataset,
    specs: &[RunSpec],
    seeds: &[u64],
    shots: usize,
    train_fraction: f64,
    jobs: usize,
) -> Result<Vec<RunRecord>> {
    let tasks: Vec<(&RunSpec, u64)> = specs
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(spec, seed)| {
                let split = split(dataset, &SplitSpec::new(train_fraction, seed))?;
                run_al_labelled(
                    dataset,
                    &split,
                    spec.strategy,
                    &spec.label,
                    shots,
                    &spec.engine,
                    seed,
                )
            })
            .collect::<Result<Vec<_>>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(work)
}

/// One CSV row per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub strategy: String,
    pub seed: u64,
    pub cycle: usize,
    pub labels_used: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub fallback: bool,
    pub pseudo_labelled: usize,
}

pub fn csv_rows(record: &RunRecord) -> Vec<CsvRow> {
    record
        .cycles
        .iter()
        .map(|c| CsvRow {
            strategy: record.strategy.clone(),
            seed: record.seed,
            cycle: c.cycle,
            labels_used: c.labels_used,
            accuracy: c.accuracy,
            macro_f1: c.macro_f1,
            fallback: c.fallback,
            pseudo_labelled: c.pseudo_labelled,
        })
        .collect()
}

pub fn csv_file_name(record: &RunRecord) -> String {
    format!("results_{}_{}.csv", record.strategy, record.seed)
}

/// Writes `results_<strategy>_<seed>.csv` into `dir`. Wall-clock times are
/// left out so identical runs produce identical files.
pub fn write_run_csv(record: &RunRecord, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(csv_file_name(record));
    let mut writer = csv::Writer::from_path(&path)?;
    for row in csv_rows(record) {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(path)
}

pub fn read_run_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Mean and sample standard deviation (`n - 1` denominator); the deviation
/// is `None` for fewer than two values.
pub fn mean_and_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: usize,
    pub labels_used: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: Option<f64>,
    pub macro_f1_mean: f64,
    pub macro_f1_std: Option<f64>,
    pub fallback_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub cycles: Vec<CycleSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub shots: usize,
    pub strategies: Vec<StrategySummary>,
}

/// Groups records by strategy label (first-seen order) and aggregates each
/// cycle across seeds.
pub fn summarize(records: &[RunRecord]) -> Summary {
    let mut labels: Vec<&str> = Vec::new();
    for r in records {
        if !labels.contains(&r.strategy.as_str()) {
            labels.push(&r.strategy);
        }
    }
    let strategies = labels
        .into_iter()
        .map(|label| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.strategy == label).collect();
            let n_cycles = runs.iter().map(|r| r.cycles.len()).min().unwrap_or(0);
            let cycles = (0..n_cycles)
                .map(|c| {
                    let acc: Vec<f64> = runs.iter().map(|r| r.cycles[c].accuracy).collect();
                    let f1: Vec<f64> = runs.iter().map(|r| r.cycles[c].macro_f1).collect();
                    let (accuracy_mean, accuracy_std) = mean_and_std(&acc);
                    let (macro_f1_mean, macro_f1_std) = mean_and_std(&f1);
                    CycleSummary {
                        cycle: runs[0].cycles[c].cycle,
                        labels_used: runs[0].cycles[c].labels_used,
                        accuracy_mean,
                        accuracy_std,
                        macro_f1_mean,
                        macro_f1_std,
                        fallback_runs: runs.iter().filter(|r| r.cycles[c].fallback).count(),
                    }
                })
                .collect();
            StrategySummary {
                strategy: label.to_string(),
                config_hash: runs[0].config_hash.clone(),
                seeds: runs.iter().map(|r| r.seed).collect(),
                cycles,
            }
        })
        .collect();
    Summary {
        shots: records.iter().map(|r| r.cycles.len()).max().unwrap_or(0),
        strategies,
    }
}

/// Writes every run CSV and `summary.json` into `dir`, creating it.
pub fn write_outputs(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = records
        .iter()
        .map(|r| write_run_csv(r, dir))
        .collect::<Result<Vec<_>>>()?;
    let summary_path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summarize(records))?;
    json.push('\n');
    fs::write(&summary_path, json)?;
    written.push(summary_path);
    Ok(written)
}
