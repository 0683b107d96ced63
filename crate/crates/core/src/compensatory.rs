//! Trading accuracy against model size: `alpha = w*F + (1-w)*(1-S)` where `F`
//! is an F1 score and `S = n/m` the size ratio of a compressed model with `n`
//! conv layers against the `m`-layer reference.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::ArchSpec;
use crate::error::{Error, Result};
use crate::ga::{random_search, run_ga, Evaluator, GaConfig, ModelScores, SearchOutcome};
use crate::rng::{Purpose, Streams};

pub const DEFAULT_WEIGHT: f64 = 0.7;

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} outside [0,1]")))
    }
}

/// Compensatory fitness. `f` and `w` in `[0,1]`, `s` in `(0,1]`.
pub fn alpha(f: f64, s: f64, w: f64) -> Result<f64> {
    unit("F", f)?;
    unit("w", w)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("S = {s} outside (0,1]")));
    }
    Ok(w * f + (1.0 - w) * (1.0 - s))
}

/// `n / m` for `1 <= n <= m`.
pub fn size_ratio(n: usize, m: usize) -> Result<f64> {
    if n == 0 || n > m {
        return Err(Error::Domain(format!("need 1 <= n <= m, got n={n} m={m}")));
    }
    Ok(n as f64 / m as f64)
}

/// Energy estimate `C * T * speed^exponent` for a constant `C`, run time `T`
/// and processor speed.
pub fn estimate_energy(c: f64, t: f64, speed: f64, exponent: f64) -> Result<f64> {
    if [c, t, speed, exponent].iter().any(|v| !v.is_finite()) || c < 0.0 || t < 0.0 || speed <= 0.0
    {
        return Err(Error::Domain(format!(
            "energy inputs must be finite with C,T >= 0 and speed > 0 (C={c}, T={t}, speed={speed})"
        )));
    }
    Ok(c * t * num_traits::Float::powf(speed, exponent))
}

/// Display id: `CM<n>` for compressed models, `M<m>` for the reference, with
/// a `_GA` suffix when the activations were evolved.
pub fn model_id(n: usize, m: usize, evolved: bool) -> String {
    let stem = if n == m {
        format!("M{m}")
    } else {
        format!("CM{n}")
    };
    if evolved {
        format!("{stem}_GA")
    } else {
        stem
    }
}

/// One evaluated architecture with both compensatory scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub n_conv_layers: usize,
    pub reference_layers: usize,
    pub size_ratio: f64,
    pub w: f64,
    pub f1_train: f64,
    pub f1_test: f64,
    pub alpha_train: f64,
    pub alpha_test: f64,
    pub t_train_seconds: f64,
    pub t_predict_seconds: f64,
    pub param_bytes: u64,
}

impl EvalRecord {
    pub fn new(n: usize, m: usize, w: f64, scores: &ModelScores) -> Result<Self> {
        let s = size_ratio(n, m)?;
        Ok(Self {
            n_conv_layers: n,
            reference_layers: m,
            size_ratio: s,
            w,
            f1_train: scores.f1_train,
            f1_test: scores.f1_test,
            alpha_train: alpha(scores.f1_train, s, w)?,
            alpha_test: alpha(scores.f1_test, s, w)?,
            t_train_seconds: scores.t_train_seconds,
            t_predict_seconds: scores.t_predict_seconds,
            param_bytes: scores.param_bytes,
        })
    }
}

/// Index of the record with the largest training alpha; ties go to fewer
/// conv layers, then to the earlier record.
pub fn select_best(records: &[EvalRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let rb = &records[b];
                if r.alpha_train > rb.alpha_train
                    || (r.alpha_train == rb.alpha_train && r.n_conv_layers < rb.n_conv_layers)
                {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Genetic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchOutcome {
    pub arch: ArchSpec,
    pub model_id: String,
    pub master_seed: u64,
    pub search: SearchOutcome,
    pub record: EvalRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatoryOutcome {
    pub mode: SearchMode,
    pub w: f64,
    pub architectures: Vec<ArchOutcome>,
    pub winner: usize,
}

impl CompensatoryOutcome {
    pub fn winner(&self) -> &ArchOutcome {
        &self.architectures[self.winner]
    }
}

/// Per-architecture master seed, keyed by layer count so a run over a subset
/// of the grid reproduces the same per-architecture searches.
pub fn architecture_seed(master: u64, n: usize) -> u64 {
    Streams::new(master).derive_seed(Purpose::Architecture, n as u64)
}

/// Runs the search for one architecture and scores its best individual.
/// The search is seeded from [`architecture_seed`] and `reference_m` gives
/// the size ratio's denominator.
pub fn search_architecture<E: Evaluator + ?Sized>(
    arch: &ArchSpec,
    cfg: &GaConfig,
    w: f64,
    mode: SearchMode,
    evaluator: &mut E,
) -> Result<ArchOutcome> {
    unit("w", w)?;
    arch.validate()?;
    let n = arch.n_conv_layers;
    let m = arch.reference_layers;
    let seed = architecture_seed(cfg.master_seed, n);
    let arch_cfg = GaConfig {
        master_seed: seed,
        ..cfg.clone()
    };
    let search = match mode {
        SearchMode::Genetic => run_ga(arch, &arch_cfg, evaluator)?,
        SearchMode::Random => random_search(arch, &arch_cfg, evaluator)?,
    };
    let fitness = search.best.fitness.unwrap_or(0.0);
    let scores = search.best.scores.unwrap_or(ModelScores {
        f1_train: fitness,
        f1_test: fitness,
        param_bytes: arch.param_bytes(),
        ..ModelScores::default()
    });
    let record = EvalRecord::new(n, m, w, &scores)?;
    Ok(ArchOutcome {
        arch: *arch,
        model_id: model_id(n, m, mode == SearchMode::Genetic),
        master_seed: seed,
        search,
        record,
    })
}

/// Searches activations for every architecture in `archs`, scores each
/// best individual with alpha over its training F1 and picks the winner.
/// `evaluator_for` builds the evaluator used for one architecture.
pub fn run_compensatory<E, F>(
    archs: &[ArchSpec],
    cfg: &GaConfig,
    w: f64,
    mode: SearchMode,
    mut evaluator_for: F,
) -> Result<CompensatoryOutcome>
where
    E: Evaluator,
    F: FnMut(&ArchSpec) -> Result<E>,
{
    unit("w", w)?;
    cfg.validate()?;
    check_grid(archs)?;
    let mut architectures = Vec::with_capacity(archs.len());
    for arch in archs {
        let mut evaluator = evaluator_for(arch)?;
        architectures.push(search_architecture(arch, cfg, w, mode, &mut evaluator)?);
    }
    let records: Vec<EvalRecord> = architectures.iter().map(|a| a.record).collect();
    let winner = select_best(&records).expect("grid is non-empty");
    Ok(CompensatoryOutcome {
        mode,
        w,
        architectures,
        winner,
    })
}

/// A grid must be non-empty and share one reference depth.
pub fn check_grid(archs: &[ArchSpec]) -> Result<()> {
    let Some(first) = archs.first() else {
        return Err(Error::Config("architecture grid is empty".into()));
    };
    for arch in archs {
        arch.validate()?;
        if arch.reference_layers != first.reference_layers {
            return Err(Error::Config(format!(
                "mixed reference depths {} and {} in one grid",
                first.reference_layers, arch.reference_layers
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMetric {
    #[serde(rename = "F1_train")]
    F1Train,
    #[serde(rename = "F1_test")]
    F1Test,
    #[serde(rename = "Fit_train")]
    FitTrain,
    #[serde(rename = "Fit_test")]
    FitTest,
}

impl TableMetric {
    pub const ALL: [TableMetric; 4] = [
        TableMetric::F1Train,
        TableMetric::F1Test,
        TableMetric::FitTrain,
        TableMetric::FitTest,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TableMetric::F1Train => "F1_train",
            TableMetric::F1Test => "F1_test",
            TableMetric::FitTrain => "Fit_train",
            TableMetric::FitTest => "Fit_test",
        }
    }
}

/// A model that can appear as a comparison-table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelColumn {
    pub id: String,
    pub n_conv_layers: usize,
    pub reference_layers: usize,
    pub f1_train: f64,
    pub f1_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub value: f64,
    /// Equal to the row maximum.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: TableMetric,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub w: f64,
    pub models: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Four-row comparison over the requested model ids, alpha recomputed from
/// each model's F1 and size ratio.
pub fn build_comparison_table(
    requested: &[String],
    available: &[ModelColumn],
    w: f64,
) -> Result<ComparisonTable> {
    unit("w", w)?;
    if requested.is_empty() {
        return Err(Error::Report("no models requested".into()));
    }
    let mut columns = Vec::with_capacity(requested.len());
    for id in requested {
        let col = available
            .iter()
            .find(|c| &c.id == id)
            .ok_or_else(|| Error::Report(format!("no results for model {id}")))?;
        let s = size_ratio(col.n_conv_layers, col.reference_layers)?;
        columns.push([
            col.f1_train,
            col.f1_test,
            alpha(col.f1_train, s, w)?,
            alpha(col.f1_test, s, w)?,
        ]);
    }
    let rows = TableMetric::ALL
        .iter()
        .enumerate()
        .map(|(r, &metric)| {
            let max = columns
                .iter()
                .map(|c| c[r])
                .fold(f64::NEG_INFINITY, f64::max);
            TableRow {
                metric,
                cells: columns
                    .iter()
                    .map(|c| TableCell {
                        value: c[r],
                        best: c[r] == max,
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(ComparisonTable {
        w,
        models: requested.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::SurrogateEvaluator;
    use alloc::vec;

    #[test]
    fn alpha_endpoints_and_domain() {
        assert_eq!(alpha(0.8, 0.4, 1.0).unwrap(), 0.8);
        assert!((alpha(0.8, 0.4, 0.0).unwrap() - 0.6).abs() < 1e-15);
        assert!((alpha(0.5, 1.0, 0.7).unwrap() - 0.35).abs() < 1e-15);
        assert!(alpha(1.1, 0.4, 0.7).is_err());
        assert!(alpha(0.5, 0.0, 0.7).is_err());
        assert!(alpha(0.5, 0.4, -0.1).is_err());
        assert!(alpha(f64::NAN, 0.4, 0.7).is_err());
    }

    #[test]
    fn size_ratio_and_energy() {
        assert_eq!(size_ratio(4, 10).unwrap(), 0.4);
        assert!(size_ratio(0, 10).is_err());
        assert!(size_ratio(11, 10).is_err());
        assert_eq!(estimate_energy(2.0, 3.0, 2.0, 2.0).unwrap(), 24.0);
        assert!(estimate_energy(1.0, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn model_ids() {
        assert_eq!(model_id(4, 10, true), "CM4_GA");
        assert_eq!(model_id(10, 10, false), "M10");
    }

    fn rec(n: usize, f: f64) -> EvalRecord {
        EvalRecord::new(
            n,
            10,
            0.7,
            &ModelScores {
                f1_train: f,
                f1_test: f,
                ..ModelScores::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn selection_prefers_alpha_then_fewer_layers() {
        assert_eq!(select_best(&[]), None);
        assert_eq!(select_best(&[rec(8, 0.9), rec(4, 0.8)]), Some(1));
        // alpha(0.8, 0.6) == alpha(0.6, ~0.133): build an exact tie instead.
        let mut a = rec(6, 0.5);
        let mut b = rec(4, 0.5);
        a.alpha_train = 0.5;
        b.alpha_train = 0.5;
        assert_eq!(select_best(&[a, b]), Some(1));
        assert_eq!(select_best(&[b, a]), Some(0));
    }

    #[test]
    fn table_flags_row_maxima_and_rejects_unknown_models() {
        let cols = vec![
            ModelColumn {
                id: "A".into(),
                n_conv_layers: 4,
                reference_layers: 10,
                f1_train: 0.9,
                f1_test: 0.7,
            },
            ModelColumn {
                id: "B".into(),
                n_conv_layers: 10,
                reference_layers: 10,
                f1_train: 0.9,
                f1_test: 0.8,
            },
        ];
        let ids = vec!["A".into(), "B".into()];
        let t = build_comparison_table(&ids, &cols, 0.7).unwrap();
        let flags: Vec<Vec<bool>> = t
            .rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.best).collect())
            .collect();
        assert_eq!(
            flags,
            vec![
                vec![true, true],
                vec![false, true],
                vec![true, false],
                vec![true, false]
            ]
        );
        assert!(matches!(
            build_comparison_table(&["C".into()], &cols, 0.7),
            Err(Error::Report(_))
        ));
    }

    #[test]
    fn compensatory_run_over_surrogate_grid() {
        let archs: Vec<ArchSpec> = [4, 6, 8, 10].iter().map(|&n| ArchSpec::cifar(n)).collect();
        let cfg = GaConfig {
            generations: 30,
            ..GaConfig::default()
        };
        let out = run_compensatory(&archs, &cfg, 0.7, SearchMode::Genetic, |a| {
            Ok(SurrogateEvaluator::new(a))
        })
        .unwrap();
        assert_eq!(out.architectures.len(), 4);
        assert_eq!(out.winner().arch.n_conv_layers, 4);
        let again = run_compensatory(&archs[..1], &cfg, 0.7, SearchMode::Genetic, |a| {
            Ok(SurrogateEvaluator::new(a))
        })
        .unwrap();
        assert_eq!(again.architectures[0].search, out.architectures[0].search);
        assert!(
            run_compensatory(&[], &cfg, 0.7, SearchMode::Genetic, |a| Ok(
                SurrogateEvaluator::new(a)
            ))
            .is_err()
        );
    }
}
