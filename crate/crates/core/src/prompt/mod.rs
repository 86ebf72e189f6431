//! Prompt states and the action space that edits them.
//!
//! A [`PromptState`] is the set of template fields that renders to one concrete
//! query. Actions are discrete edits to those fields; the [`ActionSpace`] decides
//! which edits are legal from a given state and assigns them uniform priors.

mod action;
mod render;

pub use action::{Action, ActionKind, ActionSpace, LegalityRules, Vocabulary, VocabularyError};
pub use render::{candidate_statement, catalyst_label_text, render_prompt};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PromptError {
    #[error("action {0} is not legal in this state")]
    IllegalAction(Action),
    #[error("property {0:?} appears more than once")]
    DuplicateProperty(String),
    #[error("property {0:?} is not in the vocabulary")]
    UnknownProperty(String),
}

/// Base kind of catalyst requested by the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalystBase {
    Unary,
    Binary,
    Trinary,
    Generic,
}

impl CatalystBase {
    pub const ALL: [CatalystBase; 4] = [
        CatalystBase::Unary,
        CatalystBase::Binary,
        CatalystBase::Trinary,
        CatalystBase::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalystBase::Unary => "unary catalyst",
            CatalystBase::Binary => "binary catalyst",
            CatalystBase::Trinary => "trinary catalyst",
            CatalystBase::Generic => "catalyst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CatalystLabel {
    pub base: CatalystBase,
    pub oxide: bool,
}

impl Default for CatalystLabel {
    fn default() -> Self {
        Self {
            base: CatalystBase::Generic,
            oxide: false,
        }
    }
}

/// How the next answer should relate to the parent's candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    DifferentFrom,
    SimilarTo,
    NewElementsTo,
    ElementsFrom,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::DifferentFrom,
        Relation::SimilarTo,
        Relation::NewElementsTo,
        Relation::ElementsFrom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::DifferentFrom => "different from",
            Relation::SimilarTo => "similar to",
            Relation::NewElementsTo => "new elements to",
            Relation::ElementsFrom => "elements from",
        }
    }

    /// Phrase placed before the bracketed candidate list in the prompt.
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::DifferentFrom => "that are different from",
            Relation::SimilarTo => "that are similar to",
            Relation::NewElementsTo => "that introduce new elements to",
            Relation::ElementsFrom => "that include elements from",
        }
    }
}

/// Dataset-specific part of the root query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "dataset", rename_all = "snake_case")]
pub enum RootQuery {
    OpenCatalysis { adsorbate: String, k: usize },
    BiofuelQr { question_id: String, k: usize },
}

impl RootQuery {
    pub fn k(&self) -> usize {
        match self {
            RootQuery::OpenCatalysis { k, .. } | RootQuery::BiofuelQr { k, .. } => *k,
        }
    }

    /// Adsorbates whose energies make up the reward for this query.
    pub fn adsorbates(&self) -> Vec<String> {
        match self {
            RootQuery::OpenCatalysis { adsorbate, .. } => vec![adsorbate.clone()],
            RootQuery::BiofuelQr { .. } => vec!["CO2".to_string(), "H2".to_string()],
        }
    }
}

/// Template-filling state of one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptState {
    pub include_props: Vec<String>,
    pub exclude_props: Vec<String>,
    pub catalyst_label: CatalystLabel,
    pub relation_to_prev: Option<Relation>,
    pub prev_candidates: Option<Vec<String>>,
    pub root_query: RootQuery,
}

impl PromptState {
    pub fn root(root_query: RootQuery) -> Self {
        Self {
            include_props: Vec::new(),
            exclude_props: Vec::new(),
            catalyst_label: CatalystLabel::default(),
            relation_to_prev: None,
            prev_candidates: None,
            root_query,
        }
    }

    /// True when the state carries a non-empty candidate list from its parent.
    pub fn has_candidates(&self) -> bool {
        self.prev_candidates.as_ref().is_some_and(|c| !c.is_empty())
    }

    /// Sets the inherited candidate list. An empty list is stored as absent.
    pub fn with_candidates(mut self, candidates: &[String]) -> Self {
        self.prev_candidates = if candidates.is_empty() {
            None
        } else {
            Some(candidates.to_vec())
        };
        self
    }

    /// Checks list uniqueness and vocabulary membership.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<(), PromptError> {
        check_list(&self.include_props, &vocab.include_properties)?;
        check_list(&self.exclude_props, &vocab.exclude_properties)
    }
}

fn check_list(values: &[String], allowed: &[String]) -> Result<(), PromptError> {
    for (i, v) in values.iter().enumerate() {
        if !allowed.contains(v) {
            return Err(PromptError::UnknownProperty(v.clone()));
        }
        if values[..i].contains(v) {
            return Err(PromptError::DuplicateProperty(v.clone()));
        }
    }
    Ok(())
}
