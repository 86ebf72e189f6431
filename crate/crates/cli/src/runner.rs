//! Per-entry method runs with atomic, resumable dump files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use mcr_core::baselines::{run_cot, run_self_consistency, run_tot_bfs};
use mcr_core::dataset::DatasetEntry;
use mcr_core::dump::{Method, TreeDump};
use mcr_core::env::{Backend, CachedBackend, EnvError, Environment, HttpBackend, MockBackend};
use mcr_core::{run_search, ActionSpace};
use thiserror::Error;

use crate::config::{BackendKind, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot prepare output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot open response cache {path}: {source}")]
    Cache {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start backend: {0}")]
    Backend(#[from] EnvError),
}

/// File name of an entry's dump; characters outside `[A-Za-z0-9._-]` become `_`.
pub fn dump_file_name(method: Method, entry_id: &str) -> String {
    let safe: String = entry_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{}__{safe}.json", method.as_str())
}

pub fn dump_path(out_dir: &Path, method: Method, entry_id: &str) -> PathBuf {
    out_dir.join(dump_file_name(method, entry_id))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// True when a complete dump for this entry already exists.
pub fn is_done(path: &Path) -> bool {
    fs::read_to_string(path)
        .ok()
        .and_then(|text| TreeDump::from_json(&text).ok())
        .is_some_and(|d| d.is_complete())
}

/// Builds the configured backend, fronted by the response cache when one is set.
pub fn build_backend(config: &RunConfig, out_dir: &Path) -> Result<Arc<dyn Backend>, RunError> {
    let cache = match (&config.cache, config.backend) {
        (Some(path), _) => Some(path.clone()),
        (None, BackendKind::Http) => Some(out_dir.join("cache.jsonl")),
        (None, BackendKind::Mock) => None,
    };
    let inner: Arc<dyn Backend> = match config.backend {
        BackendKind::Mock => Arc::new(MockBackend::new(config.mock.profile(config.seed))?),
        BackendKind::Http => Arc::new(HttpBackend::from_env(config.http.clone())?),
    };
    Ok(match cache {
        Some(path) => Arc::new(
            CachedBackend::open(inner, &path).map_err(|source| RunError::Cache { path, source })?,
        ),
        None => inner,
    })
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunSummary {
    pub completed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// Runs one method over one entry and returns its dump.
pub fn run_entry(
    method: Method,
    entry: &DatasetEntry,
    config: &RunConfig,
    env: &Environment,
) -> TreeDump {
    let query = entry.root_query();
    let echo = serde_json::to_value(config).expect("config serializes");
    let fp = env.fingerprint();
    let space = ActionSpace::default();
    let aborted = |partial: &mcr_core::Tree, error: &dyn std::fmt::Display| {
        TreeDump::aborted(method, &entry.id, echo.clone(), fp.clone(), partial, error)
    };
    match method {
        Method::Cot => match run_cot(&query, env) {
            Ok(out) => TreeDump::from_outcome(method, &entry.id, echo.clone(), fp.clone(), &out),
            Err(e) => aborted(&mcr_core::Tree::new(), &e),
        },
        Method::Sc => match run_self_consistency(&query, env, config.sc_trials) {
            Ok(out) => TreeDump::from_self_consistency(&entry.id, echo.clone(), fp.clone(), &out),
            Err(e) => aborted(&mcr_core::Tree::new(), &e),
        },
        Method::Tot => match run_tot_bfs(&query, env, &space, config.tot) {
            Ok(out) => TreeDump::from_outcome(method, &entry.id, echo.clone(), fp.clone(), &out),
            Err(abort) => aborted(&abort.partial, &abort.error),
        },
        Method::Mcr => {
            let search = match config.search(config.seed) {
                Ok(s) => s,
                Err(e) => return aborted(&mcr_core::Tree::new(), &e),
            };
            let mut progress = |p: &mcr_core::engine::Progress| {
                if p.simulation.is_multiple_of(50) {
                    info!(
                        "{}: simulation {} best reward {:.3}",
                        entry.id, p.simulation, p.best_reward
                    );
                }
            };
            match run_search(&query, env, &space, search, &mut progress) {
                Ok(out) => {
                    TreeDump::from_outcome(method, &entry.id, echo.clone(), fp.clone(), &out)
                }
                Err(abort) => aborted(&abort.partial, &abort.error),
            }
        }
    }
}

/// Runs `method` over every entry, skipping entries with a complete dump unless `force`.
///
/// Failures are recorded as aborted dumps and in the summary; the run continues.
pub fn run_entries(
    method: Method,
    entries: &[DatasetEntry],
    config: &RunConfig,
    env: &Environment,
    out_dir: &Path,
    force: bool,
) -> Result<RunSummary, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::OutputDir {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut summary = RunSummary::default();
    for entry in entries {
        let path = dump_path(out_dir, method, &entry.id);
        if !force && is_done(&path) {
            info!("{}: complete dump exists, skipping", entry.id);
            summary.skipped.push(entry.id.clone());
            continue;
        }
        info!("{}: running {}", entry.id, method.as_str());
        let dump = run_entry(method, entry, config, env);
        let status = dump.status.clone();
        if let Err(e) = write_atomic(&path, &dump.to_json()) {
            summary.failed.push((
                entry.id.clone(),
                format!("cannot write {}: {e}", path.display()),
            ));
            continue;
        }
        match status {
            mcr_core::dump::DumpStatus::Complete => summary.completed.push(entry.id.clone()),
            mcr_core::dump::DumpStatus::Aborted { error } => {
                warn!("{}: {error}", entry.id);
                summary.failed.push((entry.id.clone(), error));
            }
        }
    }
    Ok(summary)
}
