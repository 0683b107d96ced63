//! The subcommands, as library functions writing into an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cmcnn_core::compensatory::{
    check_grid, search_architecture, select_best, ArchOutcome, SearchMode,
};
use cmcnn_core::data::{synthetic_blobs, CIFAR_CLASSES, CIFAR_SHAPE};
use cmcnn_core::ga::{exhaustive_search, Enumeration};
use cmcnn_core::genome::search_space_size;
use cmcnn_core::{ArchSpec, Genome, LabeledImageSet, ModelScores};

use crate::checkpoint::Checkpoint;
use crate::cifar::load_cifar10;
use crate::config::{DataSource, EvaluatorKind, ExperimentConfig, DATA_DIR_ENV};
use crate::engine::{fit_and_score, AnyEvaluator, CnnEvaluator, SurrogatePool};
use crate::error::{io_at, Error, Result};
use crate::report::{build_report, render_text, write_tables};
use crate::results::{
    ArchResult, BestRecord, ExperimentRecord, ResultsFile, RunResult, WinnerSummary,
};

pub const RESULTS_FILE: &str = "results.json";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const ENUMERATION_FILE: &str = "enumeration.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
/// Present while a run is in progress; left behind if it fails.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Train and test sets per the data configuration.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let d = &cfg.data;
    let (train, test) = match d.source {
        DataSource::Cifar10 => {
            let dir = d.dir.clone().ok_or_else(|| {
                Error::Config(format!(
                    "no CIFAR-10 directory: pass --data-dir or set {DATA_DIR_ENV}"
                ))
            })?;
            load_cifar10(&dir)?
        }
        DataSource::Synthetic => {
            // One draw, split into train and test pools so both share the
            // class means. Classes are interleaved, so whole rounds of
            // `classes` samples keep both pools balanced.
            let classes = d.synthetic_classes;
            let train_rounds = d.n_train.div_ceil(classes);
            let test_rounds = d.n_test.div_ceil(classes);
            let shape = (3, d.synthetic_side, d.synthetic_side);
            let pool = synthetic_blobs(
                classes,
                train_rounds + test_rounds,
                shape,
                d.synthetic_separation,
                d.synthetic_seed,
            )?;
            let split = train_rounds * classes;
            (pool.slice(0..split), pool.slice(split..pool.len()))
        }
    };
    Ok(d.partition_spec().apply(&train, &test)?)
}

/// Sample shape and class count the architectures are built for.
fn data_shape(
    cfg: &ExperimentConfig,
    data: Option<&(LabeledImageSet, LabeledImageSet)>,
) -> ((usize, usize, usize), usize) {
    match (data, cfg.data.source) {
        (Some((train, _)), _) => (train.sample_shape(), train.num_classes()),
        (None, DataSource::Cifar10) => (CIFAR_SHAPE, CIFAR_CLASSES),
        (None, DataSource::Synthetic) => (
            (3, cfg.data.synthetic_side, cfg.data.synthetic_side),
            cfg.data.synthetic_classes,
        ),
    }
}

fn needs_data(cfg: &ExperimentConfig) -> bool {
    cfg.search.evaluator == EvaluatorKind::Cnn
}

fn make_evaluator<'a>(
    cfg: &ExperimentConfig,
    arch: &ArchSpec,
    data: Option<&'a (LabeledImageSet, LabeledImageSet)>,
) -> Result<AnyEvaluator<'a>> {
    let jobs = cfg.search.jobs;
    match (cfg.search.evaluator, data) {
        (EvaluatorKind::Surrogate, _) => {
            Ok(AnyEvaluator::Surrogate(SurrogatePool::new(arch, jobs)?))
        }
        (EvaluatorKind::Cnn, Some((train, test))) => {
            Ok(AnyEvaluator::Cnn(Box::new(CnnEvaluator::new(
                *arch,
                train,
                test,
                cfg.train_config(cfg.search.seed),
                cfg.search.fitness,
                cfg.search.averaging,
                jobs,
            )?)))
        }
        (EvaluatorKind::Cnn, None) => Err(Error::Config("CNN evaluation needs a dataset".into())),
    }
}

fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    let marker = out.join(INCOMPLETE_MARKER);
    fs::write(&marker, "run in progress or failed\n").map_err(io_at(&marker))
}

fn finish_out_dir(out: &Path) -> Result<()> {
    let marker = out.join(INCOMPLETE_MARKER);
    fs::remove_file(&marker).map_err(io_at(&marker))
}

fn arch_result(
    outcome: &ArchOutcome,
    evaluator: &AnyEvaluator,
    search_seconds: f64,
    checkpoint: Option<String>,
) -> ArchResult {
    let stats = evaluator.stats();
    let best = &outcome.search.best;
    let scores = best.scores.unwrap_or_default();
    ArchResult {
        model_id: outcome.model_id.clone(),
        n_conv_layers: outcome.arch.n_conv_layers,
        reference_layers: outcome.arch.reference_layers,
        size_ratio: outcome.record.size_ratio,
        param_bytes: outcome.arch.param_bytes(),
        master_seed: outcome.master_seed,
        best: BestRecord {
            genome: best.genome.clone(),
            seed: best.seed,
            f1_train: outcome.record.f1_train,
            f1_test: outcome.record.f1_test,
            alpha_train: outcome.record.alpha_train,
            alpha_test: outcome.record.alpha_test,
            t_train_seconds: scores.t_train_seconds,
            t_predict_seconds: scores.t_predict_seconds,
        },
        evaluations: outcome.search.evaluations,
        failures: stats.failures,
        mean_t_train_seconds: stats.mean_train_seconds(),
        mean_t_predict_seconds: stats.mean_predict_seconds(),
        search_seconds,
        history: outcome.search.history.clone(),
        checkpoint,
    }
}

/// Saves the trained model behind `outcome`'s best individual. The evaluator
/// normally still holds it; otherwise it is retrained from its seed.
fn save_checkpoint(
    cfg: &ExperimentConfig,
    out: &Path,
    outcome: &ArchOutcome,
    evaluator: &mut AnyEvaluator,
    data: &(LabeledImageSet, LabeledImageSet),
) -> Result<String> {
    let best = &outcome.search.best;
    let model = match evaluator.take_best() {
        Some(b) if b.seed == best.seed && b.model.genome() == &best.genome => b.model,
        _ => {
            fit_and_score(
                &outcome.arch,
                &best.genome,
                best.seed,
                &cfg.train_config(cfg.search.seed),
                &data.0,
                &data.1,
                cfg.search.averaging,
            )?
            .0
        }
    };
    let dir = out.join(CHECKPOINT_DIR);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let name = format!("{CHECKPOINT_DIR}/{}.json", outcome.model_id);
    Checkpoint::from_model(&model).save(&out.join(&name))?;
    Ok(name)
}

/// Runs the compensatory search (and/or the random-selection baseline) over
/// the architecture grid and writes `results.json`, the tables, the
/// per-generation log and one checkpoint per architecture.
pub fn run_search(
    cfg: &ExperimentConfig,
    modes: &[SearchMode],
    command: &str,
) -> Result<ResultsFile> {
    cfg.validate()?;
    let started = Instant::now();
    let out = cfg.output.out.clone();
    create_out_dir(&out)?;
    let data = if needs_data(cfg) {
        Some(prepare_data(cfg)?)
    } else {
        None
    };
    let (shape, classes) = data_shape(cfg, data.as_ref());
    let archs = cfg.arch_specs(shape, classes)?;
    check_grid(&archs)?;
    let ga = cfg.ga_config();

    let mut log = csv::Writer::from_path(out.join(GENERATIONS_FILE))?;
    log.write_record([
        "mode",
        "model",
        "generation",
        "evaluations",
        "best_fitness",
        "mean_fitness",
        "best_genome",
        "failures",
    ])?;

    let mut results = ResultsFile::new(command, ExperimentRecord::new(cfg, shape, classes));
    for &mode in modes {
        let mut architectures = Vec::with_capacity(archs.len());
        let mut records = Vec::with_capacity(archs.len());
        for arch in &archs {
            let mut evaluator = make_evaluator(cfg, arch, data.as_ref())?;
            let t0 = Instant::now();
            let outcome = search_architecture(arch, &ga, cfg.search.w, mode, &mut evaluator)?;
            let search_seconds = t0.elapsed().as_secs_f64();
            for g in &outcome.search.history {
                log.write_record([
                    mode_name(mode),
                    &outcome.model_id,
                    &g.generation.to_string(),
                    &g.evaluations.to_string(),
                    &g.best_fitness.to_string(),
                    &g.mean_fitness.to_string(),
                    &g.best_genome.to_string(),
                    &g.failures.to_string(),
                ])?;
            }
            log.flush().map_err(io_at(&out.join(GENERATIONS_FILE)))?;
            let checkpoint = match &data {
                Some(d) => Some(save_checkpoint(cfg, &out, &outcome, &mut evaluator, d)?),
                None => None,
            };
            if cfg.output.progress {
                eprintln!(
                    "{}: {} F1_train {:.4} F1_test {:.4} alpha {:.4} ({:.1} s)",
                    outcome.model_id,
                    outcome.search.best.genome,
                    outcome.record.f1_train,
                    outcome.record.f1_test,
                    outcome.record.alpha_train,
                    search_seconds
                );
            }
            records.push(outcome.record);
            architectures.push(arch_result(
                &outcome,
                &evaluator,
                search_seconds,
                checkpoint,
            ));
        }
        let winner = select_best(&records).expect("grid is non-empty");
        results.runs.push(RunResult {
            mode,
            winner: WinnerSummary::of(&architectures[winner]),
            architectures,
        });
    }
    results.complete = true;
    results.total_seconds = started.elapsed().as_secs_f64();
    results.save(&out.join(RESULTS_FILE))?;
    write_tables(&build_report(std::slice::from_ref(&results), None)?, &out)?;
    finish_out_dir(&out)?;
    Ok(results)
}

pub fn mode_name(mode: SearchMode) -> &'static str {
    match mode {
        SearchMode::Genetic => "genetic",
        SearchMode::Random => "random",
    }
}

pub fn space_header(n: usize, m: usize) -> Result<String> {
    let s = search_space_size(n, m)?;
    Ok(format!(
        "{} genomes ({} multi-function, {} single-function)",
        s.total, s.multi_function, s.single_function
    ))
}

/// Scores every genome of length `n` and writes the ranked listing.
pub fn run_enumerate(cfg: &ExperimentConfig, n: usize) -> Result<(String, Enumeration)> {
    cfg.validate()?;
    let set = &cfg.search.functions;
    let cap = cfg.search.enumeration_cap;
    let header = match space_header(n, set.len()) {
        Ok(h) => h,
        Err(Error::Core(cmcnn_core::Error::Unrepresentable { .. })) => {
            format!("{}^{} genomes", set.len(), n)
        }
        Err(e) => return Err(e),
    };
    let data = if needs_data(cfg) {
        Some(prepare_data(cfg)?)
    } else {
        None
    };
    let (shape, classes) = data_shape(cfg, data.as_ref());
    let arch = ArchSpec {
        n_conv_layers: n,
        reference_layers: cfg.search.reference_m.max(n),
        base_channels: cfg.search.base_channels,
        num_classes: classes,
        input_shape: shape,
    };
    arch.validate()?;
    let mut evaluator = make_evaluator(cfg, &arch, data.as_ref())?;
    let listing = exhaustive_search(n, set, &mut evaluator, cap, cfg.search.seed)?;
    let out = &cfg.output.out;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let mut w = csv::Writer::from_path(out.join(ENUMERATION_FILE))?;
    w.write_record(["rank", "genome", "fitness", "failed"])?;
    for (rank, ind) in listing.ranked().into_iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            ind.genome.to_string(),
            ind.fitness.unwrap_or(0.0).to_string(),
            ind.failed.to_string(),
        ])?;
    }
    w.flush().map_err(io_at(&out.join(ENUMERATION_FILE)))?;
    Ok((header, listing))
}

/// Renders tables from one or more results files into `out`.
pub fn run_report(paths: &[PathBuf], out: &Path, models: Option<&[String]>) -> Result<String> {
    let results = paths
        .iter()
        .map(|p| ResultsFile::load(p))
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&results, models)?;
    write_tables(&report, out)?;
    Ok(render_text(&report))
}

/// Trains one fixed genome and saves its checkpoint.
pub fn run_train(cfg: &ExperimentConfig, genome: &Genome) -> Result<(ModelScores, PathBuf)> {
    let data = prepare_data(cfg)?;
    let (shape, classes) = data_shape(cfg, Some(&data));
    let arch = ArchSpec {
        n_conv_layers: genome.len(),
        reference_layers: cfg.search.reference_m.max(genome.len()),
        base_channels: cfg.search.base_channels,
        num_classes: classes,
        input_shape: shape,
    };
    let (model, scores) = fit_and_score(
        &arch,
        genome,
        cfg.search.seed,
        &cfg.train_config(cfg.search.seed),
        &data.0,
        &data.1,
        cfg.search.averaging,
    )?;
    let out = &cfg.output.out;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let path = out.join(format!("train-{}.json", genome.to_hyphenated()));
    Checkpoint::from_model(&model).save(&path)?;
    Ok((scores, path))
}
