//! Command-line flags. Every flag overrides the matching config-file key.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cmcnn_core::{Genome, PartitionMethod};

use crate::config::{DataSource, EvaluatorKind, ExperimentConfig, DATA_DIR_ENV};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "cmcnn",
    version,
    about = "Compressed multi-function CNN search"
)]
pub struct Cli {
    /// TOML experiment file (dotted keys, e.g. `search.arch_grid = [4, 6]`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve activations for each architecture and pick the best by alpha.
    Search {
        #[command(flatten)]
        flags: Overrides,
        /// Also run random selection with the same budget.
        #[arg(long)]
        with_baseline: bool,
    },
    /// Random selection with the genetic search's evaluation budget.
    Baseline {
        #[command(flatten)]
        flags: Overrides,
    },
    /// Score every activation string of one depth.
    Enumerate {
        #[command(flatten)]
        flags: Overrides,
        /// Number of conv layers.
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Largest search space to attempt.
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Render tables from one or more results files.
    Report {
        /// `results.json` files to merge.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Directory for tables.txt, tables.csv and tables.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Model ids to tabulate, in order (e.g. CM4_GA,CM4,M10).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
    },
    /// Train a single fixed activation string.
    Train {
        #[command(flatten)]
        flags: Overrides,
        /// Hyphen-separated activations, e.g. RELU-TANH-ELU-RELU.
        #[arg(long)]
        genome: Genome,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// CIFAR-10 binary directory.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub data_source: Option<DataSource>,
    #[arg(long, value_parser = parse_partition)]
    pub partition: Option<PartitionMethod>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Conv-layer counts to compare, e.g. 4,6,8,10.
    #[arg(long, value_delimiter = ',')]
    pub arch_grid: Option<Vec<usize>>,
    /// Conv layers of the uncompressed reference.
    #[arg(long)]
    pub reference_m: Option<usize>,
    /// Weight of F1 against size in alpha.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for population evaluation.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorKind>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_partition(s: &str) -> std::result::Result<PartitionMethod, String> {
    match s {
        "first" => Ok(PartitionMethod::First),
        "second" => Ok(PartitionMethod::Second),
        _ => Err(format!("expected `first` or `second`, got `{s}`")),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($flag:ident => $($target:tt)+) => {
                if let Some(v) = &self.$flag {
                    cfg.$($target)+ = v.clone();
                }
            };
        }
        if let Some(dir) = &self.data_dir {
            cfg.data.dir = Some(dir.clone());
        }
        set!(data_source => data.source);
        set!(partition => data.partition);
        set!(n_train => data.n_train);
        set!(n_test => data.n_test);
        set!(arch_grid => search.arch_grid);
        set!(reference_m => search.reference_m);
        set!(w => search.w);
        set!(population => search.population);
        set!(generations => search.generations);
        set!(mutation_prob => search.mutation_prob);
        set!(seed => search.seed);
        set!(jobs => search.jobs);
        set!(evaluator => search.evaluator);
        set!(epochs => train.epochs);
        set!(batch_size => train.batch_size);
        set!(learning_rate => train.learning_rate);
        set!(out => output.out);
    }
}

/// The config file (or defaults) with `flags` applied on top.
pub fn resolve_config(file: Option<&PathBuf>, flags: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match file {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    flags.apply(&mut cfg);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::try_parse_from([
            "cmcnn",
            "search",
            "--arch-grid",
            "4,6",
            "--w",
            "0.5",
            "--partition",
            "second",
            "--evaluator",
            "surrogate",
        ])
        .unwrap();
        let Command::Search {
            flags,
            with_baseline,
        } = cli.command
        else {
            panic!("expected search");
        };
        assert!(!with_baseline);
        let mut cfg = ExperimentConfig::from_toml("search.w = 0.9\nsearch.population = 6").unwrap();
        flags.apply(&mut cfg);
        assert_eq!(cfg.search.arch_grid, vec![4, 6]);
        assert_eq!(cfg.search.w, 0.5);
        assert_eq!(cfg.search.population, 6);
        assert_eq!(cfg.data.partition, PartitionMethod::Second);
        assert_eq!(cfg.search.evaluator, EvaluatorKind::Surrogate);
    }

    #[test]
    fn genome_flag_parses() {
        let cli = Cli::try_parse_from(["cmcnn", "train", "--genome", "RELU-TANH"]).unwrap();
        let Command::Train { genome, .. } = cli.command else {
            panic!("expected train");
        };
        assert_eq!(genome.to_string(), "RELU-TANH");
        assert!(Cli::try_parse_from(["cmcnn", "train", "--genome", "RELU-FOO"]).is_err());
    }
}
