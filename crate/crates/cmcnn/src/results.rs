//! `results.json`: everything a search or baseline run produced, in a
//! versioned schema. Wall-clock fields end in `_seconds`; all other fields
//! are reproducible from the recorded seed.

use std::fs;
use std::path::Path;

use cmcnn_core::compensatory::{ModelColumn, SearchMode};
use cmcnn_core::ga::{FitnessMetric, GenerationRecord, Selection};
use cmcnn_core::{Averaging, FunctionSet, Genome, PartitionMethod};
use serde::{Deserialize, Serialize};

use crate::checkpoint::check_header;
use crate::config::{DataSource, EvaluatorKind, ExperimentConfig, TrainSettings};
use crate::error::{io_at, Error, Result};

pub const RESULTS_FORMAT: &str = "cmcnn-results";
pub const RESULTS_VERSION: u32 = 1;

/// The settings that determine a run's outcome (thread count and output
/// location deliberately left out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub data_source: DataSource,
    pub partition: PartitionMethod,
    pub n_train: usize,
    pub n_test: usize,
    pub num_classes: usize,
    pub input_shape: (usize, usize, usize),
    pub arch_grid: Vec<usize>,
    pub reference_m: usize,
    pub base_channels: usize,
    pub w: f64,
    pub population: usize,
    pub generations: usize,
    pub mutation_prob: f64,
    pub seed: u64,
    pub evaluator: EvaluatorKind,
    pub selection: Selection,
    pub fitness: FitnessMetric,
    pub averaging: Averaging,
    pub functions: FunctionSet,
    pub train: TrainSettings,
}

impl ExperimentRecord {
    pub fn new(
        cfg: &ExperimentConfig,
        input_shape: (usize, usize, usize),
        num_classes: usize,
    ) -> Self {
        let s = &cfg.search;
        Self {
            data_source: cfg.data.source,
            partition: cfg.data.partition,
            n_train: cfg.data.n_train,
            n_test: cfg.data.n_test,
            num_classes,
            input_shape,
            arch_grid: s.arch_grid.clone(),
            reference_m: s.reference_m,
            base_channels: s.base_channels,
            w: s.w,
            population: s.population,
            generations: s.generations,
            mutation_prob: s.mutation_prob,
            seed: s.seed,
            evaluator: s.evaluator,
            selection: s.selection,
            fitness: s.fitness,
            averaging: s.averaging,
            functions: s.functions.clone(),
            train: cfg.train.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub genome: Genome,
    pub seed: u64,
    pub f1_train: f64,
    pub f1_test: f64,
    pub alpha_train: f64,
    pub alpha_test: f64,
    pub t_train_seconds: f64,
    pub t_predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchResult {
    pub model_id: String,
    pub n_conv_layers: usize,
    pub reference_layers: usize,
    pub size_ratio: f64,
    pub param_bytes: u64,
    pub master_seed: u64,
    pub best: BestRecord,
    pub evaluations: usize,
    pub failures: usize,
    /// Mean over every model trained during the search.
    pub mean_t_train_seconds: f64,
    pub mean_t_predict_seconds: f64,
    /// Whole search for this architecture.
    pub search_seconds: f64,
    pub history: Vec<GenerationRecord>,
    /// Relative to the output directory.
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerSummary {
    pub model_id: String,
    pub genome: Genome,
    pub n_conv_layers: usize,
    pub reference_layers: usize,
    pub size_ratio: f64,
    pub alpha_train: f64,
    pub alpha_test: f64,
    pub f1_train: f64,
    pub f1_test: f64,
    pub t_train_seconds: f64,
    pub t_predict_seconds: f64,
    pub param_bytes: u64,
}

impl WinnerSummary {
    pub fn of(arch: &ArchResult) -> Self {
        Self {
            model_id: arch.model_id.clone(),
            genome: arch.best.genome.clone(),
            n_conv_layers: arch.n_conv_layers,
            reference_layers: arch.reference_layers,
            size_ratio: arch.size_ratio,
            alpha_train: arch.best.alpha_train,
            alpha_test: arch.best.alpha_test,
            f1_train: arch.best.f1_train,
            f1_test: arch.best.f1_test,
            t_train_seconds: arch.best.t_train_seconds,
            t_predict_seconds: arch.best.t_predict_seconds,
            param_bytes: arch.param_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: SearchMode,
    pub architectures: Vec<ArchResult>,
    pub winner: WinnerSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub complete: bool,
    pub experiment: ExperimentRecord,
    pub runs: Vec<RunResult>,
    pub total_seconds: f64,
}

impl ResultsFile {
    pub fn new(command: &str, experiment: ExperimentRecord) -> Self {
        Self {
            format: RESULTS_FORMAT.into(),
            version: RESULTS_VERSION,
            command: command.into(),
            complete: false,
            experiment,
            runs: Vec::new(),
            total_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(io_at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        check_header(path, &raw, RESULTS_FORMAT, RESULTS_VERSION)?;
        serde_json::from_value(raw).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn columns(&self) -> impl Iterator<Item = (&RunResult, &ArchResult)> {
        self.runs
            .iter()
            .flat_map(|run| run.architectures.iter().map(move |a| (run, a)))
    }

    pub fn model_columns(&self) -> Vec<ModelColumn> {
        self.columns()
            .map(|(_, a)| ModelColumn {
                id: a.model_id.clone(),
                n_conv_layers: a.n_conv_layers,
                reference_layers: a.reference_layers,
                f1_train: a.best.f1_train,
                f1_test: a.best.f1_test,
            })
            .collect()
    }
}

/// Removes every `*_seconds` field, recursively.
pub fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_seconds"));
            map.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// `results.json` text with wall-clock fields removed, for comparing runs.
pub fn timing_free(text: &str) -> Result<String> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    strip_timing(&mut value);
    Ok(serde_json::to_string_pretty(&value)?)
}
