//! Experiment configuration, read from TOML with dotted keys such as
//! `search.arch_grid = [4, 6, 8, 10]` and overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use cmcnn_core::ga::{FitnessMetric, Selection};
use cmcnn_core::{
    ArchSpec, Averaging, FunctionSet, GaConfig, PartitionMethod, PartitionSpec, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};

pub const DATA_DIR_ENV: &str = "CMCNN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Cifar10,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    /// Train and score a CNN per genome.
    #[default]
    Cnn,
    /// Fraction of RELU genes; no training.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub dir: Option<PathBuf>,
    pub partition: PartitionMethod,
    pub n_train: usize,
    pub n_test: usize,
    pub synthetic_classes: usize,
    pub synthetic_side: usize,
    pub synthetic_separation: f32,
    pub synthetic_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Cifar10,
            dir: None,
            partition: PartitionMethod::First,
            n_train: 2000,
            n_test: 500,
            synthetic_classes: 10,
            synthetic_side: 32,
            synthetic_separation: 1.0,
            synthetic_seed: 0,
        }
    }
}

impl DataConfig {
    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            method: self.partition,
            train_count: self.n_train,
            test_count: self.n_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub arch_grid: Vec<usize>,
    pub reference_m: usize,
    pub base_channels: usize,
    pub w: f64,
    pub population: usize,
    pub generations: usize,
    pub mutation_prob: f64,
    pub seed: u64,
    pub jobs: usize,
    pub evaluator: EvaluatorKind,
    pub selection: Selection,
    pub fitness: FitnessMetric,
    pub averaging: Averaging,
    pub functions: FunctionSet,
    pub with_baseline: bool,
    pub enumeration_cap: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            arch_grid: vec![4, 6, 8, 10],
            reference_m: 10,
            base_channels: 16,
            w: cmcnn_core::compensatory::DEFAULT_WEIGHT,
            population: 4,
            generations: 5,
            mutation_prob: 1.0,
            seed: 0,
            jobs: 1,
            evaluator: EvaluatorKind::Cnn,
            selection: Selection::Roulette,
            fitness: FitnessMetric::TrainF1,
            averaging: Averaging::Macro,
            functions: FunctionSet::standard(),
            with_baseline: false,
            enumeration_cap: cmcnn_core::ga::DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub out: PathBuf,
    /// Per-architecture progress lines on stderr.
    pub progress: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("cmcnn-out"),
            progress: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub search: SearchConfig,
    pub train: TrainSettings,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        toml::from_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            seed,
        }
    }

    pub fn ga_config(&self) -> GaConfig {
        let s = &self.search;
        GaConfig {
            population_size: s.population,
            generations: s.generations,
            mutation_prob: s.mutation_prob,
            function_set: s.functions.clone(),
            fitness_metric: s.fitness,
            selection: s.selection,
            train: self.train_config(s.seed),
            master_seed: s.seed,
        }
    }

    /// One architecture per grid entry for samples of `input_shape` with
    /// `num_classes` classes.
    pub fn arch_specs(
        &self,
        input_shape: (usize, usize, usize),
        num_classes: usize,
    ) -> Result<Vec<ArchSpec>> {
        self.search
            .arch_grid
            .iter()
            .map(|&n| {
                let arch = ArchSpec {
                    n_conv_layers: n,
                    reference_layers: self.search.reference_m,
                    base_channels: self.search.base_channels,
                    num_classes,
                    input_shape,
                };
                arch.validate()?;
                Ok(arch)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        if s.arch_grid.is_empty() {
            return Err(Error::Config("search.arch_grid is empty".into()));
        }
        if let Some(&n) = s.arch_grid.iter().find(|&&n| n == 0 || n > s.reference_m) {
            return Err(Error::Config(format!(
                "grid entry {n} outside 1..={} (search.reference_m)",
                s.reference_m
            )));
        }
        let mut sorted = s.arch_grid.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != s.arch_grid.len() {
            return Err(Error::Config(
                "search.arch_grid has duplicate entries".into(),
            ));
        }
        if !(0.0..=1.0).contains(&s.w) {
            return Err(Error::Config(format!("search.w = {} outside [0,1]", s.w)));
        }
        if s.jobs == 0 {
            return Err(Error::Config("search.jobs must be >= 1".into()));
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::Config(
                "data.n_train and data.n_test must be >= 1".into(),
            ));
        }
        if self.data.source == DataSource::Synthetic
            && (self.data.synthetic_classes < 2
                || self.data.synthetic_side == 0
                || self.data.synthetic_separation <= 0.0)
        {
            return Err(Error::Config(
                "synthetic data needs >= 2 classes, a positive side and a positive separation"
                    .into(),
            ));
        }
        self.ga_config().validate()?;
        Ok(())
    }
}
