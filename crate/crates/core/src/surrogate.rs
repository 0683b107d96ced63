//! Cheap deterministic fitness landscapes that stand in for CNN training when
//! checking the search machinery.

use crate::activation::Activation;
use crate::arch::ArchSpec;
use crate::error::Result;
use crate::ga::{Candidate, Evaluation, Evaluator, ModelScores};
use crate::genome::Genome;
use alloc::vec::Vec;

/// Fraction of genes equal to RELU. Unique optimum: all RELU.
pub fn relu_fraction(genome: &Genome) -> f64 {
    let hits = genome
        .genes()
        .iter()
        .filter(|&&g| g == Activation::Relu)
        .count();
    hits as f64 / genome.len() as f64
}

/// Surrogate evaluator reporting [`relu_fraction`] as fitness and as both
/// train and test F1, with zero timings and the architecture's size.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateEvaluator {
    pub param_bytes: u64,
}

impl SurrogateEvaluator {
    pub fn new(arch: &ArchSpec) -> Self {
        Self {
            param_bytes: arch.param_bytes(),
        }
    }

    pub fn score(&self, genome: &Genome) -> Evaluation {
        let f = relu_fraction(genome);
        Evaluation {
            fitness: f,
            scores: Some(ModelScores {
                f1_train: f,
                f1_test: f,
                t_train_seconds: 0.0,
                t_predict_seconds: 0.0,
                param_bytes: self.param_bytes,
            }),
        }
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<Result<Evaluation>> {
        batch.iter().map(|c| Ok(self.score(&c.genome))).collect()
    }
}
