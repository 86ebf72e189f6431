//! Comparison tables built purely from the dump files in a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mcr_core::dump::{DumpError, Method, TreeDump};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no dumps found in {0}")]
    EmptyRunDir(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dump { path: PathBuf, source: DumpError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRow {
    pub method: Method,
    pub entry_id: String,
    pub file: String,
    pub complete: bool,
    pub reward: Option<f64>,
    pub n_prompts: Option<usize>,
    /// Absent for methods without a tree and for failed entries.
    pub d_max: Option<usize>,
    /// Generated nodes, root excluded.
    pub generated: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub entries: usize,
    pub failed: usize,
    pub mean_reward: f64,
    pub mean_n_prompts: f64,
    pub mean_d_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub rows: Vec<MethodRow>,
    pub entries: Vec<EntryRow>,
}

/// Dump files look like `<method>__<entry>.json`.
fn is_dump_file(path: &Path) -> bool {
    let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
        return false;
    };
    name.ends_with(".json")
        && name
            .split_once("__")
            .is_some_and(|(m, _)| m.parse::<Method>().is_ok())
}

pub fn load_dumps(run_dir: &Path) -> Result<Vec<(PathBuf, TreeDump)>, ReportError> {
    let io = |source| ReportError::Io {
        path: run_dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_dump_file(p))
        .collect();
    paths.sort();
    let mut dumps = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        let dump = TreeDump::from_json(&text).map_err(|source| ReportError::Dump {
            path: path.clone(),
            source,
        })?;
        dumps.push((path, dump));
    }
    if dumps.is_empty() {
        return Err(ReportError::EmptyRunDir(run_dir.to_path_buf()));
    }
    Ok(dumps)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn build_report(run_dir: &Path) -> Result<Report, ReportError> {
    let dumps = load_dumps(run_dir)?;
    let entries: Vec<EntryRow> = dumps
        .iter()
        .map(|(path, d)| {
            let error = match &d.status {
                mcr_core::dump::DumpStatus::Complete => None,
                mcr_core::dump::DumpStatus::Aborted { error } => Some(error.clone()),
            };
            let complete = error.is_none();
            let metrics = d.metrics.filter(|_| complete);
            EntryRow {
                method: d.method,
                entry_id: d.entry_id.clone(),
                file: path.file_name().unwrap().to_string_lossy().into_owned(),
                complete,
                reward: metrics.map(|m| m.best_reward),
                n_prompts: metrics.map(|m| m.n_prompts),
                d_max: metrics
                    .filter(|_| d.method.reports_depth())
                    .map(|m| m.d_max),
                generated: d.nodes.len().saturating_sub(1),
                error,
            }
        })
        .collect();

    let mut by_method: BTreeMap<Method, Vec<&EntryRow>> = BTreeMap::new();
    for row in &entries {
        by_method.entry(row.method).or_default().push(row);
    }
    let rows = Method::ALL
        .into_iter()
        .filter_map(|method| {
            let all = by_method.get(&method)?;
            let ok: Vec<&&EntryRow> = all.iter().filter(|r| r.complete).collect();
            Some(MethodRow {
                method,
                entries: ok.len(),
                failed: all.len() - ok.len(),
                mean_reward: mean(ok.iter().filter_map(|r| r.reward)),
                mean_n_prompts: mean(ok.iter().filter_map(|r| r.n_prompts.map(|n| n as f64))),
                mean_d_max: (method.reports_depth() && !ok.is_empty())
                    .then(|| mean(ok.iter().filter_map(|r| r.d_max.map(|d| d as f64)))),
            })
        })
        .collect();
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
        entries,
    })
}

fn label(method: Method) -> &'static str {
    match method {
        Method::Cot => "CoT",
        Method::Sc => "Self-consistency",
        Method::Tot => "ToT (BFS)",
        Method::Mcr => "MCR",
    }
}

/// Whole numbers print without decimals, the rest with two.
fn compact(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

const DASH: &str = "–";

pub fn render_markdown(report: &Report) -> String {
    let mut out = String::new();
    out.push_str("| Method | Reward | N_P | d_max | Entries |\n|---|---|---|---|---|\n");
    for row in &report.rows {
        let failed = if row.failed > 0 {
            format!(" ({} failed)", row.failed)
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "| {} | {:.2} | {} | {} | {}{failed} |",
            label(row.method),
            row.mean_reward,
            compact(row.mean_n_prompts),
            row.mean_d_max.map(compact).unwrap_or_else(|| DASH.into()),
            row.entries,
        );
    }
    out.push_str("\nValues are averaged over completed entries.\n\n");
    out.push_str("| Method | Entry | Reward | N_P | d_max | Generated nodes | Status |\n|---|---|---|---|---|---|---|\n");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            e.method.as_str(),
            e.entry_id,
            e.reward
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| DASH.into()),
            e.n_prompts
                .map(|n| n.to_string())
                .unwrap_or_else(|| DASH.into()),
            e.d_max
                .map(|d| d.to_string())
                .unwrap_or_else(|| DASH.into()),
            e.generated,
            e.error
                .as_deref()
                .map(|m| format!("failed: {m}"))
                .unwrap_or_else(|| "ok".into()),
        );
    }
    out
}

/// Writes `report.md` and `report.json` into the run directory.
pub fn write_report(run_dir: &Path, report: &Report) -> std::io::Result<()> {
    crate::runner::write_atomic(&run_dir.join("report.md"), &render_markdown(report))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    crate::runner::write_atomic(&run_dir.join("report.json"), &json)
}
