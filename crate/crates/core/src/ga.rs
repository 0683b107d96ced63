//! Genetic search over activation strings for one fixed architecture, plus
//! the exhaustive and random-selection searches used as references.
//!
//! One run:
//! 1. draw `N` genomes uniformly at random and evaluate them;
//! 2. per generation, pick `N/2` parent pairs (roulette wheel by default),
//!    cross each pair at a uniform point `k` in `2..=n-1`, mutate each child
//!    once with probability `mutation_prob`, evaluate the children;
//! 3. pool parents and children and keep the best `N` (stable by fitness, so
//!    the incumbent elite can never be displaced by an equal newcomer).
//!
//! Fitness evaluation is delegated to an [`Evaluator`], which receives whole
//! batches so that implementations may train candidates concurrently.

use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::arch::ArchSpec;
use crate::error::{Error, Result};
use crate::genome::{
    crossover, genome_at, mutate, random_genome, search_space_size, FunctionSet, Genome,
};
use crate::rng::{Purpose, Streams};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMetric {
    #[default]
    TrainF1,
    TestF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Roulette,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_prob: f64,
    pub function_set: FunctionSet,
    pub fitness_metric: FitnessMetric,
    pub selection: Selection,
    pub train: TrainConfig,
    pub master_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 4,
            generations: 5,
            mutation_prob: 1.0,
            function_set: FunctionSet::standard(),
            fitness_metric: FitnessMetric::TrainF1,
            selection: Selection::Roulette,
            train: TrainConfig::default(),
            master_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || !self.population_size.is_multiple_of(2) {
            return Err(Error::Config(alloc::format!(
                "population size must be a positive even number, got {}",
                self.population_size
            )));
        }
        if self.function_set.len() < 2 {
            return Err(Error::Config(
                "function set needs at least two functions".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Config(alloc::format!(
                "mutation probability {} outside [0,1]",
                self.mutation_prob
            )));
        }
        self.train.validate()
    }

    /// Models trained by a full run: `N * (M + 1)`.
    pub fn evaluation_budget(&self) -> usize {
        self.population_size * (self.generations + 1)
    }
}

/// Measurements of one trained candidate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelScores {
    pub f1_train: f64,
    pub f1_test: f64,
    pub t_train_seconds: f64,
    pub t_predict_seconds: f64,
    pub param_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub scores: Option<ModelScores>,
}

impl Evaluation {
    pub fn fitness_only(fitness: f64) -> Self {
        Self {
            fitness,
            scores: None,
        }
    }
}

/// A genome queued for evaluation with the seed its model must use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub genome: Genome,
    pub seed: u64,
}

pub trait Evaluator {
    /// Returns one result per candidate, in order.
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<Result<Evaluation>>;
}

/// Sequential evaluator backed by a closure.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: FnMut(&Candidate) -> Result<Evaluation>,
{
    fn evaluate(&mut self, batch: &[Candidate]) -> Vec<Result<Evaluation>> {
        batch.iter().map(&mut self.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub seed: u64,
    /// `None` until evaluated.
    pub fitness: Option<f64>,
    pub scores: Option<ModelScores>,
    /// The evaluator failed; fitness was forced to 0.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Individual {
    fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_genome: Genome,
    pub evaluations: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
    pub population: Vec<Individual>,
    pub evaluations: usize,
}

fn evaluate_genomes<E: Evaluator + ?Sized>(
    genomes: Vec<Genome>,
    seeds: &mut dyn RngCore,
    evaluator: &mut E,
) -> Vec<Individual> {
    let batch: Vec<Candidate> = genomes
        .into_iter()
        .map(|genome| Candidate {
            genome,
            seed: seeds.next_u64(),
        })
        .collect();
    let results = evaluator.evaluate(&batch);
    assert_eq!(
        results.len(),
        batch.len(),
        "evaluator must answer every candidate"
    );
    batch
        .into_iter()
        .zip(results)
        .map(|(c, r)| match r {
            Ok(e) if e.fitness.is_finite() => Individual {
                genome: c.genome,
                seed: c.seed,
                fitness: Some(e.fitness),
                scores: e.scores,
                failed: false,
                failure: None,
            },
            Ok(e) => failed(c, alloc::format!("non-finite fitness {}", e.fitness)),
            Err(err) => failed(c, alloc::format!("{err}")),
        })
        .collect()
}

fn failed(c: Candidate, why: String) -> Individual {
    Individual {
        genome: c.genome,
        seed: c.seed,
        fitness: Some(0.0),
        scores: None,
        failed: true,
        failure: Some(why),
    }
}

/// First individual with the highest fitness.
fn best_of(pop: &[Individual]) -> &Individual {
    let mut best = &pop[0];
    for ind in &pop[1..] {
        if ind.fitness_or_zero() > best.fitness_or_zero() {
            best = ind;
        }
    }
    best
}

fn record(
    generation: usize,
    pop: &[Individual],
    best: &Individual,
    evaluations: usize,
) -> GenerationRecord {
    let mean = pop.iter().map(Individual::fitness_or_zero).sum::<f64>() / pop.len() as f64;
    GenerationRecord {
        generation,
        best_fitness: best.fitness_or_zero(),
        mean_fitness: mean,
        best_genome: best.genome.clone(),
        evaluations,
        failures: pop.iter().filter(|i| i.failed).count(),
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], selection: Selection, rng: &mut R) -> usize {
    if selection == Selection::Roulette {
        if let Ok(dist) = WeightedIndex::new(weights.iter().map(|w| w.max(0.0))) {
            return dist.sample(rng);
        }
    }
    rng.random_range(0..weights.len())
}

/// `count` parent pairs; the two members of a pair are distinct individuals.
fn select_pairs<R: Rng + ?Sized>(
    pop: &[Individual],
    count: usize,
    selection: Selection,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let weights: Vec<f64> = pop.iter().map(Individual::fitness_or_zero).collect();
    (0..count)
        .map(|_| {
            let first = pick(&weights, selection, rng);
            let others: Vec<usize> = (0..pop.len()).filter(|&i| i != first).collect();
            let other_weights: Vec<f64> = others.iter().map(|&i| weights[i]).collect();
            let second = others[pick(&other_weights, selection, rng)];
            (first, second)
        })
        .collect()
}

/// Evolves activation strings for `arch` and returns the best individual seen
/// together with one history record per generation (generation 0 being the
/// random initial population).
pub fn run_ga<E: Evaluator + ?Sized>(
    arch: &ArchSpec,
    cfg: &GaConfig,
    evaluator: &mut E,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    arch.validate()?;
    let n = arch.n_conv_layers;
    let size = cfg.population_size;
    let set = &cfg.function_set;
    let streams = Streams::new(cfg.master_seed);

    let mut init = streams.rng(Purpose::Init, 0);
    let genomes = (0..size)
        .map(|_| random_genome(n, set, &mut init))
        .collect::<Result<Vec<_>>>()?;
    let mut population =
        evaluate_genomes(genomes, &mut streams.rng(Purpose::Evaluation, 0), evaluator);
    let mut evaluations = population.len();
    let mut best = best_of(&population).clone();
    let mut history = alloc::vec![record(0, &population, &best, evaluations)];

    for generation in 1..=cfg.generations {
        let g = generation as u64;
        let mut sel = streams.rng(Purpose::Selection, g);
        let mut cx = streams.rng(Purpose::Crossover, g);
        let mut mu = streams.rng(Purpose::Mutation, g);

        let pairs = select_pairs(&population, size / 2, cfg.selection, &mut sel);
        let mut children = Vec::with_capacity(size);
        for (a, b) in pairs {
            let (pa, pb) = (&population[a].genome, &population[b].genome);
            if n >= 3 {
                let k = cx.random_range(2..=n - 1);
                let (c1, c2) = crossover(pa, pb, k)?;
                children.push(c1);
                children.push(c2);
            } else {
                children.push(pa.clone());
                children.push(pb.clone());
            }
        }
        for child in &mut children {
            if mu.random_bool(cfg.mutation_prob) {
                let j = mu.random_range(1..=n);
                *child = mutate(child, j, set, &mut mu)?;
            }
        }

        let offspring = evaluate_genomes(
            children,
            &mut streams.rng(Purpose::Evaluation, g),
            evaluator,
        );
        evaluations += offspring.len();
        population.extend(offspring);
        population.sort_by(|x, y| y.fitness_or_zero().total_cmp(&x.fitness_or_zero()));
        population.truncate(size);

        if population[0].fitness_or_zero() > best.fitness_or_zero() {
            best = population[0].clone();
        }
        history.push(record(generation, &population, &best, evaluations));
    }

    Ok(SearchOutcome {
        best,
        history,
        population,
        evaluations,
    })
}

/// Random model selection with the GA's budget: `N * (M + 1)` uniformly
/// drawn genomes, evaluated `N` at a time, best kept.
pub fn random_search<E: Evaluator + ?Sized>(
    arch: &ArchSpec,
    cfg: &GaConfig,
    evaluator: &mut E,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    arch.validate()?;
    let n = arch.n_conv_layers;
    let streams = Streams::new(cfg.master_seed);
    let mut draws = streams.rng(Purpose::Baseline, 0);
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut best: Option<Individual> = None;
    let mut last = Vec::new();
    let mut evaluations = 0;
    for round in 0..=cfg.generations {
        let genomes = (0..cfg.population_size)
            .map(|_| random_genome(n, &cfg.function_set, &mut draws))
            .collect::<Result<Vec<_>>>()?;
        let mut seeds = streams.rng(Purpose::Baseline, 1 + round as u64);
        let batch = evaluate_genomes(genomes, &mut seeds, evaluator);
        evaluations += batch.len();
        let round_best = best_of(&batch);
        if best
            .as_ref()
            .is_none_or(|b| round_best.fitness_or_zero() > b.fitness_or_zero())
        {
            best = Some(round_best.clone());
        }
        let b = best.as_ref().expect("set above");
        history.push(record(round, &batch, b, evaluations));
        last = batch;
    }
    Ok(SearchOutcome {
        best: best.expect("at least one round"),
        history,
        population: last,
        evaluations,
    })
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    /// Every genome in lexicographic order with its fitness.
    pub entries: Vec<Individual>,
}

impl Enumeration {
    /// Highest fitness; ties go to the lexicographically first genome.
    pub fn best(&self) -> &Individual {
        best_of(&self.entries)
    }

    /// Entries by descending fitness, lexicographic within ties.
    pub fn ranked(&self) -> Vec<&Individual> {
        let mut v: Vec<&Individual> = self.entries.iter().collect();
        v.sort_by(|a, b| b.fitness_or_zero().total_cmp(&a.fitness_or_zero()));
        v
    }
}

/// Evaluates all `m^n` genomes. Refuses spaces larger than `cap`.
pub fn exhaustive_search<E: Evaluator + ?Sized>(
    n: usize,
    set: &FunctionSet,
    evaluator: &mut E,
    cap: u64,
    master_seed: u64,
) -> Result<Enumeration> {
    let total = match search_space_size(n, set.len()) {
        Ok(space) => space.total,
        Err(Error::Unrepresentable { .. }) => {
            return Err(Error::SpaceTooLarge {
                size: alloc::format!("{}^{}", set.len(), n),
                cap,
            })
        }
        Err(e) => return Err(e),
    };
    if total > cap as u128 {
        return Err(Error::SpaceTooLarge {
            size: alloc::format!("{total}"),
            cap,
        });
    }
    let mut seeds = Streams::new(master_seed).rng(Purpose::Enumeration, 0);
    let mut entries = Vec::with_capacity(total as usize);
    const CHUNK: u128 = 4096;
    let mut start = 0u128;
    while start < total {
        let end = (start + CHUNK).min(total);
        let genomes = (start..end).map(|i| genome_at(i, n, set)).collect();
        entries.extend(evaluate_genomes(genomes, &mut seeds, evaluator));
        start = end;
    }
    Ok(Enumeration { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::surrogate::relu_fraction;

    fn surrogate() -> FnEvaluator<impl FnMut(&Candidate) -> Result<Evaluation>> {
        FnEvaluator(|c: &Candidate| Ok(Evaluation::fitness_only(relu_fraction(&c.genome))))
    }

    fn small_arch(n: usize) -> ArchSpec {
        ArchSpec {
            n_conv_layers: n,
            reference_layers: 10,
            base_channels: 2,
            num_classes: 2,
            input_shape: (1, 64, 64),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = GaConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.population_size = 3;
        assert!(cfg.validate().is_err());
        cfg.population_size = 4;
        cfg.function_set = FunctionSet::new(alloc::vec![Activation::Relu]).unwrap();
        assert!(cfg.validate().is_err());
        cfg.function_set = FunctionSet::standard();
        cfg.mutation_prob = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_generations_returns_best_initial() {
        let cfg = GaConfig {
            generations: 0,
            master_seed: 3,
            ..GaConfig::default()
        };
        let out = run_ga(&small_arch(4), &cfg, &mut surrogate()).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.evaluations, 4);
        let top = out
            .population
            .iter()
            .map(|i| i.fitness.unwrap())
            .fold(f64::MIN, f64::max);
        assert_eq!(out.best.fitness, Some(top));
    }

    #[test]
    fn budget_matches_formula() {
        let cfg = GaConfig {
            generations: 7,
            ..GaConfig::default()
        };
        let ga = run_ga(&small_arch(5), &cfg, &mut surrogate()).unwrap();
        let rnd = random_search(&small_arch(5), &cfg, &mut surrogate()).unwrap();
        assert_eq!(ga.evaluations, 32);
        assert_eq!(rnd.evaluations, 32);
    }

    #[test]
    fn failures_score_zero_and_search_continues() {
        let mut calls = 0;
        let mut flaky = FnEvaluator(|c: &Candidate| {
            calls += 1;
            if calls % 3 == 0 {
                Err(Error::Domain("boom".into()))
            } else {
                Ok(Evaluation::fitness_only(relu_fraction(&c.genome)))
            }
        });
        let cfg = GaConfig {
            generations: 4,
            ..GaConfig::default()
        };
        let out = run_ga(&small_arch(4), &cfg, &mut flaky).unwrap();
        assert_eq!(out.history.len(), 5);
        assert!(!out.best.failed);
    }

    #[test]
    fn short_genomes_evolve_by_mutation_only() {
        let cfg = GaConfig {
            generations: 10,
            ..GaConfig::default()
        };
        let out = run_ga(&small_arch(2), &cfg, &mut surrogate()).unwrap();
        assert_eq!(out.evaluations, 44);
        assert!(out.best.fitness.unwrap() >= out.history[0].best_fitness);
    }

    #[test]
    fn exhaustive_tie_rule_and_cap() {
        let set = FunctionSet::standard();
        let mut constant = FnEvaluator(|_: &Candidate| Ok(Evaluation::fitness_only(0.5)));
        let e = exhaustive_search(3, &set, &mut constant, 1000, 0).unwrap();
        assert_eq!(e.entries.len(), 64);
        assert_eq!(
            e.best().genome,
            Genome::uniform(Activation::Relu, 3).unwrap()
        );

        let mut tanh = FnEvaluator(|c: &Candidate| {
            Ok(Evaluation::fitness_only(
                if c.genome.genes()[0] == Activation::Tanh {
                    1.0
                } else {
                    0.0
                },
            ))
        });
        let e = exhaustive_search(1, &set, &mut tanh, 1000, 0).unwrap();
        assert_eq!(
            e.best().genome,
            Genome::uniform(Activation::Tanh, 1).unwrap()
        );

        let err =
            exhaustive_search(10, &set, &mut surrogate(), DEFAULT_ENUMERATION_CAP, 0).unwrap_err();
        assert_eq!(
            err,
            Error::SpaceTooLarge {
                size: "1048576".into(),
                cap: 65_536
            }
        );
    }

    #[test]
    fn ranked_listing_is_descending_and_complete() {
        let e = exhaustive_search(3, &FunctionSet::standard(), &mut surrogate(), 1000, 0).unwrap();
        let ranked = e.ranked();
        assert_eq!(ranked.len(), 64);
        assert!(ranked.windows(2).all(|w| w[0].fitness >= w[1].fitness));
    }
}
