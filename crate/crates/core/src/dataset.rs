//! Query datasets stored as JSON lines, one entry per line.
//!
//! ```text
//! {"id": "oc-oh", "kind": "open_catalysis", "adsorbate": "*OH"}
//! {"id": "bfr-01", "kind": "biofuel_qr", "question": "Which catalysts ..."}
//! ```
//!
//! `k` may be given explicitly; it defaults to 5 for open_catalysis and 3 for
//! biofuel_qr. Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::RootQuery;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    OpenCatalysis,
    BiofuelQr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub kind: DatasetKind,
    pub adsorbates: Vec<String>,
    pub question_text: Option<String>,
    pub k: usize,
}

impl DatasetEntry {
    pub fn root_query(&self) -> RootQuery {
        match self.kind {
            DatasetKind::OpenCatalysis => RootQuery::OpenCatalysis {
                adsorbate: self.adsorbates[0].clone(),
                k: self.k,
            },
            DatasetKind::BiofuelQr => RootQuery::BiofuelQr {
                question_id: self.id.clone(),
                k: self.k,
            },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    kind: DatasetKind,
    adsorbate: Option<String>,
    question: Option<String>,
    k: Option<usize>,
}

fn validate(raw: RawEntry) -> Result<DatasetEntry, String> {
    if raw.id.trim().is_empty() {
        return Err("empty id".into());
    }
    let (adsorbates, default_k) = match raw.kind {
        DatasetKind::OpenCatalysis => match raw.adsorbate {
            Some(a) if !a.trim().is_empty() => (vec![a], 5),
            _ => return Err("open_catalysis entries need an adsorbate".into()),
        },
        DatasetKind::BiofuelQr => {
            if raw.adsorbate.is_some() {
                return Err(
                    "biofuel_qr entries always score CO2 and H2; drop the adsorbate field".into(),
                );
            }
            (vec!["CO2".to_string(), "H2".to_string()], 3)
        }
    };
    let k = raw.k.unwrap_or(default_k);
    if k == 0 {
        return Err("k must be positive".into());
    }
    Ok(DatasetEntry {
        id: raw.id,
        kind: raw.kind,
        adsorbates,
        question_text: raw.question,
        k,
    })
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(trimmed).map_err(|e| DatasetError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        let entry = validate(raw).map_err(|message| DatasetError::Schema {
            line: line_no,
            message,
        })?;
        if !seen.insert(entry.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: entry.id,
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
