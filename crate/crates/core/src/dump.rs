//! Versioned JSON document for a finished (or aborted) run, plus Graphviz export.
//!
//! Numbers are written as decimal strings with 17 significant digits so that a
//! dump read back reproduces every statistic bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{SelfConsistencyOutcome, Trial};
use crate::engine::SearchOutcome;
use crate::tree::{Edge, Node, NodeId, RunMetrics, Tree, TreeError};

pub const DUMP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mcr,
    Cot,
    Sc,
    Tot,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cot, Method::Sc, Method::Tot, Method::Mcr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcr => "mcr",
            Method::Cot => "cot",
            Method::Sc => "sc",
            Method::Tot => "tot",
        }
    }

    /// Whether tree depth is meaningful for the method.
    pub fn reports_depth(self) -> bool {
        matches!(self, Method::Mcr | Method::Tot)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum DumpStatus {
    Complete,
    Aborted { error: String },
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {found} (expected {DUMP_SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl From<serde_json::Error> for DumpError {
    fn from(e: serde_json::Error) -> Self {
        DumpError::Malformed {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub schema_version: u32,
    pub method: Method,
    pub entry_id: String,
    pub status: DumpStatus,
    /// Effective configuration the run used.
    pub config: serde_json::Value,
    /// Backend fingerprint.
    pub backend: String,
    /// Absent for aborted runs that never evaluated a prompt.
    pub metrics: Option<RunMetrics>,
    pub best_node: Option<NodeId>,
    /// Simulations that hit the depth guard.
    #[serde(default)]
    pub truncated: usize,
    /// Per-trial records for self-consistency runs.
    #[serde(default)]
    pub trials: Vec<Trial>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
}

impl TreeDump {
    pub fn new(
        method: Method,
        entry_id: impl Into<String>,
        config: serde_json::Value,
        backend: impl Into<String>,
        tree: &Tree,
    ) -> Self {
        Self {
            schema_version: DUMP_SCHEMA_VERSION,
            method,
            entry_id: entry_id.into(),
            status: DumpStatus::Complete,
            config,
            backend: backend.into(),
            metrics: tree.metrics().ok(),
            best_node: tree.best_node().ok(),
            truncated: 0,
            trials: Vec::new(),
            nodes: tree.nodes().to_vec(),
            edges: tree.edges().to_vec(),
        }
    }

    pub fn from_outcome(
        method: Method,
        entry_id: impl Into<String>,
        config: serde_json::Value,
        backend: impl Into<String>,
        outcome: &SearchOutcome,
    ) -> Self {
        let mut dump = Self::new(method, entry_id, config, backend, &outcome.tree);
        dump.metrics = Some(outcome.metrics);
        dump.best_node = Some(outcome.best);
        dump.truncated = outcome.truncated;
        dump
    }

    pub fn from_self_consistency(
        entry_id: impl Into<String>,
        config: serde_json::Value,
        backend: impl Into<String>,
        outcome: &SelfConsistencyOutcome,
    ) -> Self {
        let mut dump = Self::new(Method::Sc, entry_id, config, backend, &outcome.tree);
        dump.metrics = Some(outcome.metrics);
        dump.trials = outcome.trials.clone();
        dump
    }

    /// Records a failed run with whatever partial tree it left behind.
    pub fn aborted(
        method: Method,
        entry_id: impl Into<String>,
        config: serde_json::Value,
        backend: impl Into<String>,
        partial: &Tree,
        error: impl std::fmt::Display,
    ) -> Self {
        let mut dump = Self::new(method, entry_id, config, backend, partial);
        dump.status = DumpStatus::Aborted {
            error: error.to_string(),
        };
        dump
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DumpError> {
        let header: Header = serde_json::from_str(text)?;
        if header.schema_version != DUMP_SCHEMA_VERSION {
            return Err(DumpError::Version {
                found: header.schema_version,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds and validates the stored tree.
    pub fn tree(&self) -> Result<Tree, DumpError> {
        Ok(Tree::from_parts(self.nodes.clone(), self.edges.clone())?)
    }

    pub fn is_complete(&self) -> bool {
        self.status == DumpStatus::Complete
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: nodes labeled with id, depth and reward; edges with action and N/V.
pub fn to_dot(tree: &Tree) -> String {
    let mut out =
        String::from("digraph prompt_tree {\n  node [shape=box, fontname=\"monospace\"];\n");
    for node in tree.nodes() {
        let reward = node
            .reward
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "-".into());
        let cands = node.candidates().join(", ");
        let _ = writeln!(
            out,
            "  {} [label=\"{} d={} R={}\\n{}\"];",
            node.id,
            node.id,
            node.depth,
            reward,
            escape(&cands)
        );
    }
    for edge in tree.edges() {
        if let Some(child) = edge.child {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{} N={} V={:.3}\"];",
                edge.key.parent,
                child,
                escape(&edge.key.action.to_string()),
                edge.stats.visits,
                edge.stats.value
            );
        }
    }
    out.push_str("}\n");
    out
}
