//! Machine-readable run outputs: `record.json`, `trace.csv` and `scores.csv`.

use std::fs;
use std::path::Path;

use agufs_core::{AgufsConfig, EvalReport, FeatureRanking, SolverTrace, Warning};
use serde::{Deserialize, Serialize};

use crate::data::{LabelColumn, Standardize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub path: String,
    pub samples: usize,
    pub features: usize,
    pub classes: Option<usize>,
    pub label_column: LabelColumn,
    pub standardize: Standardize,
    /// Features that were constant and zeroed by standardization.
    pub constant_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub timestamp: String,
    pub data: DataSummary,
    pub config: AgufsConfig,
    pub ranking: FeatureRanking,
    /// Wall-clock fields are zeroed; `trace.csv` keeps them.
    pub trace: SolverTrace,
    pub eval: Option<EvalReport>,
    pub warnings: Vec<Warning>,
}

impl RunRecord {
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn timestamp_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn strip_timings(trace: &SolverTrace) -> SolverTrace {
    let mut t = trace.clone();
    for r in &mut t.iterations {
        r.w_step_secs = 0.0;
        r.f_step_secs = 0.0;
        r.s_step_secs = 0.0;
        r.elapsed_secs = 0.0;
    }
    t
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub previous_objective_same_beta: f64,
    pub relative_change: f64,
    pub regression: f64,
    pub sparsity: f64,
    pub distance: f64,
    pub prior: f64,
    pub indicator: f64,
    pub w_residual: f64,
    pub f_residual: f64,
    pub s_row_sum_deviation: f64,
    pub w_inner_iters: usize,
    pub f_inner_iters: usize,
    pub w_step_secs: f64,
    pub f_step_secs: f64,
    pub s_step_secs: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreRow {
    pub feature: usize,
    pub name: Option<String>,
    pub score: f64,
    pub rank: usize,
    pub selected: bool,
}

pub fn trace_rows(trace: &SolverTrace) -> Vec<TraceRow> {
    trace
        .iterations
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            objective: r.objective,
            previous_objective_same_beta: r.previous_objective_same_beta,
            relative_change: r.relative_change,
            regression: r.terms.regression,
            sparsity: r.terms.sparsity,
            distance: r.terms.distance,
            prior: r.terms.prior,
            indicator: r.terms.indicator,
            w_residual: r.w_residual,
            f_residual: r.f_residual,
            s_row_sum_deviation: r.s_row_sum_deviation,
            w_inner_iters: r.w_inner_objectives.len(),
            // the first entry is the warm-start value, not an update
            f_inner_iters: r.f_inner_objectives.len().saturating_sub(1),
            w_step_secs: r.w_step_secs,
            f_step_secs: r.f_step_secs,
            s_step_secs: r.s_step_secs,
            elapsed_secs: r.elapsed_secs,
        })
        .collect()
}

pub fn score_rows(ranking: &FeatureRanking, names: Option<&[String]>) -> Vec<ScoreRow> {
    let mut rank = vec![0; ranking.scores.len()];
    for (r, &f) in ranking.order.iter().enumerate() {
        rank[f] = r + 1;
    }
    ranking
        .scores
        .iter()
        .enumerate()
        .map(|(f, &score)| ScoreRow {
            feature: f,
            name: names.and_then(|n| n.get(f).cloned()),
            score,
            rank: rank[f],
            selected: ranking.selected.contains(&f),
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `record.json`, `trace.csv` (from the untruncated `trace`) and
/// `scores.csv` into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    record: &RunRecord,
    trace: &SolverTrace,
    feature_names: Option<&[String]>,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let json = record.to_json().map_err(std::io::Error::other)?;
    fs::write(dir.join("record.json"), json)?;
    write_rows(&dir.join("trace.csv"), &trace_rows(trace)).map_err(std::io::Error::other)?;
    write_rows(&dir.join("scores.csv"), &score_rows(&record.ranking, feature_names))
        .map_err(std::io::Error::other)?;
    Ok(())
}

pub fn read_scores(path: &Path) -> csv::Result<Vec<ScoreRow>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
