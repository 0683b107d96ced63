//! Timed training and scoring, and evaluators that spread a population over
//! a thread pool. Each candidate owns its model and seed, so the results do
//! not depend on the number of threads.

use std::time::Instant;

use cmcnn_core::ga::{FitnessMetric, ModelScores};
use cmcnn_core::metrics::f1_score;
use cmcnn_core::surrogate::SurrogateEvaluator;
use cmcnn_core::{
    build_model, predict, train, ArchSpec, Averaging, Candidate, Evaluation, Evaluator, Genome,
    LabeledImageSet, Model, TrainConfig,
};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Trains `genome` on `train_set` with the given seed and scores it on both
/// sets. `t_train_seconds` covers training only; `t_predict_seconds` covers
/// predicting the whole test set.
pub fn fit_and_score(
    arch: &ArchSpec,
    genome: &Genome,
    seed: u64,
    cfg: &TrainConfig,
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
    averaging: Averaging,
) -> cmcnn_core::Result<(Model<f32>, ModelScores)> {
    let model = build_model::<f32>(arch, genome, seed)?;
    let cfg = TrainConfig { seed, ..*cfg };
    let started = Instant::now();
    let (model, _) = train(model, train_set, &cfg)?;
    let t_train = started.elapsed().as_secs_f64();
    let train_pred = predict(&model, train_set)?;
    let f1_train = f1_score(train_set.labels(), &train_pred, arch.num_classes, averaging)?;
    let started = Instant::now();
    let test_pred = predict(&model, test_set)?;
    let t_predict = started.elapsed().as_secs_f64();
    let f1_test = f1_score(test_set.labels(), &test_pred, arch.num_classes, averaging)?;
    let scores = ModelScores {
        f1_train,
        f1_test,
        t_train_seconds: t_train,
        t_predict_seconds: t_predict,
        param_bytes: model.param_bytes(),
    };
    Ok((model, scores))
}

pub fn fitness_of(scores: &ModelScores, metric: FitnessMetric) -> f64 {
    match metric {
        FitnessMetric::TrainF1 => scores.f1_train,
        FitnessMetric::TestF1 => scores.f1_test,
    }
}

pub fn thread_pool(jobs: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Totals over every evaluation an evaluator has performed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalStats {
    pub evaluations: usize,
    pub failures: usize,
    pub t_train_seconds: f64,
    pub t_predict_seconds: f64,
}

impl EvalStats {
    fn record(&mut self, result: &cmcnn_core::Result<Evaluation>) {
        self.evaluations += 1;
        match result {
            Ok(e) => {
                if let Some(s) = e.scores {
                    self.t_train_seconds += s.t_train_seconds;
                    self.t_predict_seconds += s.t_predict_seconds;
                }
            }
            Err(_) => self.failures += 1,
        }
    }

    pub fn mean_train_seconds(&self) -> f64 {
        self.mean(self.t_train_seconds)
    }

    pub fn mean_predict_seconds(&self) -> f64 {
        self.mean(self.t_predict_seconds)
    }

    fn mean(&self, total: f64) -> f64 {
        let ok = self.evaluations - self.failures;
        if ok == 0 {
            0.0
        } else {
            total / ok as f64
        }
    }
}

/// The trained model behind the best fitness seen so far.
pub struct BestModel {
    pub fitness: f64,
    pub seed: u64,
    pub model: Model<f32>,
}

/// Trains a CNN per candidate, `jobs` at a time.
pub struct CnnEvaluator<'a> {
    arch: ArchSpec,
    train_set: &'a LabeledImageSet,
    test_set: &'a LabeledImageSet,
    train_cfg: TrainConfig,
    metric: FitnessMetric,
    averaging: Averaging,
    pool: ThreadPool,
    best: Option<BestModel>,
    pub stats: EvalStats,
}

impl<'a> CnnEvaluator<'a> {
    pub fn new(
        arch: ArchSpec,
        train_set: &'a LabeledImageSet,
        test_set: &'a LabeledImageSet,
        train_cfg: TrainConfig,
        metric: FitnessMetric,
        averaging: Averaging,
        jobs: usize,
    ) -> Result<Self> {
        Ok(Self {
            arch,
            train_set,
            test_set,
            train_cfg,
            metric,
            averaging,
            pool: thread_pool(jobs)?,
            best: None,
            stats: EvalStats::default(),
        })
    }

    pub fn take_best(&mut self) -> Option<BestModel> {
        self.best.take()
    }
}

impl Evaluator for CnnEvaluator<'_> {
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<cmcnn_core::Result<Evaluation>> {
        let trained: Vec<_> = self.pool.install(|| {
            batch
                .par_iter()
                .map(|c| {
                    fit_and_score(
                        &self.arch,
                        &c.genome,
                        c.seed,
                        &self.train_cfg,
                        self.train_set,
                        self.test_set,
                        self.averaging,
                    )
                })
                .collect()
        });
        let mut out = Vec::with_capacity(batch.len());
        for (c, result) in batch.iter().zip(trained) {
            let result = result.map(|(model, scores)| {
                let fitness = fitness_of(&scores, self.metric);
                if self.best.as_ref().is_none_or(|b| fitness > b.fitness) {
                    self.best = Some(BestModel {
                        fitness,
                        seed: c.seed,
                        model,
                    });
                }
                Evaluation {
                    fitness,
                    scores: Some(scores),
                }
            });
            self.stats.record(&result);
            out.push(result);
        }
        out
    }
}

/// The RELU-fraction landscape, scored on the same thread pool.
pub struct SurrogatePool {
    inner: SurrogateEvaluator,
    pool: ThreadPool,
    pub stats: EvalStats,
}

impl SurrogatePool {
    pub fn new(arch: &ArchSpec, jobs: usize) -> Result<Self> {
        Ok(Self {
            inner: SurrogateEvaluator::new(arch),
            pool: thread_pool(jobs)?,
            stats: EvalStats::default(),
        })
    }
}

impl Evaluator for SurrogatePool {
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<cmcnn_core::Result<Evaluation>> {
        let inner = self.inner;
        let out: Vec<_> = self.pool.install(|| {
            batch
                .par_iter()
                .map(|c| Ok(inner.score(&c.genome)))
                .collect()
        });
        for r in &out {
            self.stats.record(r);
        }
        out
    }
}

/// Either evaluator, chosen by configuration.
pub enum AnyEvaluator<'a> {
    Cnn(Box<CnnEvaluator<'a>>),
    Surrogate(SurrogatePool),
}

impl AnyEvaluator<'_> {
    pub fn stats(&self) -> EvalStats {
        match self {
            AnyEvaluator::Cnn(e) => e.stats,
            AnyEvaluator::Surrogate(e) => e.stats,
        }
    }

    pub fn take_best(&mut self) -> Option<BestModel> {
        match self {
            AnyEvaluator::Cnn(e) => e.take_best(),
            AnyEvaluator::Surrogate(_) => None,
        }
    }
}

impl Evaluator for AnyEvaluator<'_> {
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<cmcnn_core::Result<Evaluation>> {
        match self {
            AnyEvaluator::Cnn(e) => e.evaluate(batch),
            AnyEvaluator::Surrogate(e) => e.evaluate(batch),
        }
    }
}
