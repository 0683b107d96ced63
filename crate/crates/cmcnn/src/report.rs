//! Comparison and properties tables rendered as aligned text, CSV and JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cmcnn_core::compensatory::{build_comparison_table, ComparisonTable, SearchMode};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};
use crate::results::{ArchResult, ResultsFile, WinnerSummary};

pub const TABLES_FORMAT: &str = "cmcnn-tables";
pub const TABLES_VERSION: u32 = 1;

/// One column of the properties table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProperties {
    pub model_id: String,
    pub n_conv_layers: usize,
    pub size_kb: u64,
    pub size_ratio: f64,
    /// Mean over all models trained in the search.
    pub mean_t_train_seconds: f64,
    /// Whole search for this architecture.
    pub search_seconds: f64,
    pub mean_t_predict_seconds: f64,
}

impl ModelProperties {
    fn of(a: &ArchResult) -> Self {
        Self {
            model_id: a.model_id.clone(),
            n_conv_layers: a.n_conv_layers,
            size_kb: kilobytes(a.param_bytes),
            size_ratio: a.size_ratio,
            mean_t_train_seconds: a.mean_t_train_seconds,
            search_seconds: a.search_seconds,
            mean_t_predict_seconds: a.mean_t_predict_seconds,
        }
    }
}

pub fn kilobytes(bytes: u64) -> u64 {
    (bytes as f64 / 1024.0).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub mode: SearchMode,
    #[serde(flatten)]
    pub summary: WinnerSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub comparison: ComparisonTable,
    pub properties: Vec<ModelProperties>,
    pub winners: Vec<Winner>,
}

/// Collects every model from `results` and tabulates `models` (default: all
/// of them, by depth with the evolved model first).
pub fn build_report(results: &[ResultsFile], models: Option<&[String]>) -> Result<Report> {
    let Some(first) = results.first() else {
        return Err(Error::Config("no results to report".into()));
    };
    let w = first.experiment.w;
    if let Some(other) = results.iter().find(|r| r.experiment.w != w) {
        return Err(Error::Config(format!(
            "results mix weights {w} and {}",
            other.experiment.w
        )));
    }
    let mut archs: Vec<&ArchResult> = Vec::new();
    let mut winners = Vec::new();
    for file in results {
        for run in &file.runs {
            winners.push(Winner {
                mode: run.mode,
                summary: run.winner.clone(),
            });
        }
        for (_, a) in file.columns() {
            if archs.iter().any(|b| b.model_id == a.model_id) {
                return Err(Error::Config(format!(
                    "model {} appears in more than one run",
                    a.model_id
                )));
            }
            archs.push(a);
        }
    }
    let requested: Vec<String> = match models {
        Some(ids) => ids.to_vec(),
        None => {
            let mut sorted = archs.clone();
            sorted.sort_by_key(|a| (a.n_conv_layers, !a.model_id.ends_with("_GA")));
            sorted.iter().map(|a| a.model_id.clone()).collect()
        }
    };
    let columns: Vec<_> = results.iter().flat_map(|r| r.model_columns()).collect();
    let comparison = build_comparison_table(&requested, &columns, w)?;
    let properties = requested
        .iter()
        .map(|id| {
            let a = archs
                .iter()
                .find(|a| &a.model_id == id)
                .expect("checked by the comparison table");
            ModelProperties::of(a)
        })
        .collect();
    Ok(Report {
        comparison,
        properties,
        winners,
    })
}

fn grid(title: &str, header: &[String], rows: &[(String, Vec<String>)]) -> String {
    let label_width = rows
        .iter()
        .map(|(l, _)| l.len())
        .chain([6])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|(_, cells)| cells[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    writeln!(out, "{title}").unwrap();
    write!(out, "{:<label_width$}", "Model:").unwrap();
    for (h, w) in header.iter().zip(&widths) {
        write!(out, "  {h:>w$}").unwrap();
    }
    out.push('\n');
    for (label, cells) in rows {
        write!(out, "{label:<label_width$}").unwrap();
        for (cell, w) in cells.iter().zip(&widths) {
            write!(out, "  {cell:>w$}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn render_text(report: &Report) -> String {
    let t = &report.comparison;
    let rows: Vec<(String, Vec<String>)> = t
        .rows
        .iter()
        .map(|r| {
            let cells = r
                .cells
                .iter()
                .map(|c| format!("{:.3}{}", c.value, if c.best { "*" } else { " " }))
                .collect();
            (r.metric.label().to_string(), cells)
        })
        .collect();
    let mut out = grid(
        &format!("Model comparisons (w = {}, * = row maximum)", t.w),
        &t.models,
        &rows,
    );
    out.push('\n');

    let p = &report.properties;
    let row = |label: &str, f: &dyn Fn(&ModelProperties) -> String| {
        (label.to_string(), p.iter().map(f).collect())
    };
    let rows = vec![
        row("No. of CLs", &|m| m.n_conv_layers.to_string()),
        row("Model Size (KB)", &|m| m.size_kb.to_string()),
        row("S", &|m| format!("{:.1}", m.size_ratio)),
        row("Avg. T_train per model (s)", &|m| {
            format!("{:.2}", m.mean_t_train_seconds)
        }),
        row("T_train whole search (s)", &|m| {
            format!("{:.2}", m.search_seconds)
        }),
        row("Avg. T_predict (s)", &|m| {
            format!("{:.3}", m.mean_t_predict_seconds)
        }),
    ];
    let ids: Vec<String> = p.iter().map(|m| m.model_id.clone()).collect();
    out.push_str(&grid("Properties of different models", &ids, &rows));

    for w in &report.winners {
        let s = &w.summary;
        let mode = match w.mode {
            SearchMode::Genetic => "genetic search",
            SearchMode::Random => "random selection",
        };
        writeln!(
            out,
            "\nBest compensatory model ({mode}): {} {} n={} m={} S={:.1} alpha_train={:.4} alpha_test={:.4} F1_train={:.4} F1_test={:.4} size={} bytes",
            s.model_id,
            s.genome.to_hyphenated(),
            s.n_conv_layers,
            s.reference_layers,
            s.size_ratio,
            s.alpha_train,
            s.alpha_test,
            s.f1_train,
            s.f1_test,
            s.param_bytes
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub metric: String,
    pub model: String,
    pub value: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesJson {
    pub format: String,
    pub version: u32,
    pub w: f64,
    pub comparison: Vec<CellRecord>,
    pub properties: Vec<ModelProperties>,
    pub winners: Vec<Winner>,
}

pub fn comparison_cells(table: &ComparisonTable) -> Vec<CellRecord> {
    table
        .rows
        .iter()
        .flat_map(|r| {
            r.cells.iter().zip(&table.models).map(|(c, id)| CellRecord {
                metric: r.metric.label().into(),
                model: id.clone(),
                value: c.value,
                best: c.best,
            })
        })
        .collect()
}

pub fn tables_json(report: &Report) -> TablesJson {
    TablesJson {
        format: TABLES_FORMAT.into(),
        version: TABLES_VERSION,
        w: report.comparison.w,
        comparison: comparison_cells(&report.comparison),
        properties: report.properties.clone(),
        winners: report.winners.clone(),
    }
}

/// Long-format CSV: `table,metric,model,value,best`.
pub fn render_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "metric", "model", "value", "best"])?;
    for c in comparison_cells(&report.comparison) {
        w.write_record([
            "comparison",
            &c.metric,
            &c.model,
            &c.value.to_string(),
            &c.best.to_string(),
        ])?;
    }
    for p in &report.properties {
        let props: [(&str, String); 6] = [
            ("n_conv_layers", p.n_conv_layers.to_string()),
            ("size_kb", p.size_kb.to_string()),
            ("size_ratio", p.size_ratio.to_string()),
            ("mean_t_train_seconds", p.mean_t_train_seconds.to_string()),
            ("search_seconds", p.search_seconds.to_string()),
            (
                "mean_t_predict_seconds",
                p.mean_t_predict_seconds.to_string(),
            ),
        ];
        for (name, value) in props {
            w.write_record(["properties", name, &p.model_id, &value, ""])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `tables.txt`, `tables.csv` and `tables.json` into `dir`.
pub fn write_tables(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let txt = dir.join("tables.txt");
    fs::write(&txt, render_text(report)).map_err(io_at(&txt))?;
    let csv_path = dir.join("tables.csv");
    fs::write(&csv_path, render_csv(report)?).map_err(io_at(&csv_path))?;
    let json = dir.join("tables.json");
    let mut text = serde_json::to_string_pretty(&tables_json(report))?;
    text.push('\n');
    fs::write(&json, text).map_err(io_at(&json))
}
