use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CatalystBase, PromptError, PromptState, Relation};

const EMBEDDED_VOCABULARY: &str = include_str!("../../assets/actions.json");
const VOCABULARY_VERSION: u32 = 1;

/// One edit to a prompt state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Action {
    AddInclude(String),
    AddExclude(String),
    ChangeCatalystType(CatalystBase),
    ToggleOxide,
    ChangeRelation(Relation),
    RepeatPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    AddInclude,
    AddExclude,
    ChangeCatalystType,
    ToggleOxide,
    ChangeRelation,
    RepeatPrompt,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::AddInclude(_) => ActionKind::AddInclude,
            Action::AddExclude(_) => ActionKind::AddExclude,
            Action::ChangeCatalystType(_) => ActionKind::ChangeCatalystType,
            Action::ToggleOxide => ActionKind::ToggleOxide,
            Action::ChangeRelation(_) => ActionKind::ChangeRelation,
            Action::RepeatPrompt => ActionKind::RepeatPrompt,
        }
    }

    pub fn is_repeat(&self) -> bool {
        matches!(self, Action::RepeatPrompt)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::AddInclude(p) => write!(f, "AddInclude({p})"),
            Action::AddExclude(p) => write!(f, "AddExclude({p})"),
            Action::ChangeCatalystType(b) => write!(f, "ChangeCatalystType({})", b.as_str()),
            Action::ToggleOxide => f.write_str("ToggleOxide"),
            Action::ChangeRelation(r) => write!(f, "ChangeRelation({})", r.as_str()),
            Action::RepeatPrompt => f.write_str("RepeatPrompt"),
        }
    }
}

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("vocabulary file: {0}")]
    Io(#[from] std::io::Error),
    #[error("vocabulary file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported vocabulary version {found} (expected {VOCABULARY_VERSION})")]
    Version { found: u32 },
    #[error("vocabulary list {0} is empty or contains duplicates")]
    BadList(&'static str),
}

/// Property vocabularies for the include/exclude actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub version: u32,
    pub include_properties: Vec<String>,
    pub exclude_properties: Vec<String>,
}

impl Vocabulary {
    pub fn from_json(text: &str) -> Result<Self, VocabularyError> {
        let vocab: Vocabulary = serde_json::from_str(text)?;
        if vocab.version != VOCABULARY_VERSION {
            return Err(VocabularyError::Version {
                found: vocab.version,
            });
        }
        if !unique_non_empty(&vocab.include_properties) {
            return Err(VocabularyError::BadList("include_properties"));
        }
        if !unique_non_empty(&vocab.exclude_properties) {
            return Err(VocabularyError::BadList("exclude_properties"));
        }
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self, VocabularyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_json(EMBEDDED_VOCABULARY).expect("embedded vocabulary is valid")
    }
}

fn unique_non_empty(values: &[String]) -> bool {
    !values.is_empty()
        && values
            .iter()
            .enumerate()
            .all(|(i, v)| !values[..i].contains(v))
}

/// Which impossibility rules are enforced.
///
/// The default enforces all three. [`LegalityRules::unconstrained`] turns every
/// enumerated action legal, which is what the node-count analysis of
/// breadth-first search assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityRules {
    /// Adding a property already in the list is impossible.
    pub no_duplicate_properties: bool,
    /// Setting a relation without an inherited candidate list is impossible.
    pub relation_needs_candidates: bool,
    /// A state holding candidates but no relation must set the relation next.
    pub relation_first: bool,
}

impl Default for LegalityRules {
    fn default() -> Self {
        Self {
            no_duplicate_properties: true,
            relation_needs_candidates: true,
            relation_first: true,
        }
    }
}

impl LegalityRules {
    pub fn unconstrained() -> Self {
        Self {
            no_duplicate_properties: false,
            relation_needs_candidates: false,
            relation_first: false,
        }
    }
}

/// The enumerated action table plus the rules that filter it.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    vocab: Arc<Vocabulary>,
    rules: LegalityRules,
    table: Arc<Vec<Action>>,
}

impl Default for ActionSpace {
    fn default() -> Self {
        Self::new(Vocabulary::default(), LegalityRules::default())
    }
}

impl ActionSpace {
    pub fn new(vocab: Vocabulary, rules: LegalityRules) -> Self {
        let mut table = Vec::new();
        table.extend(
            vocab
                .include_properties
                .iter()
                .cloned()
                .map(Action::AddInclude),
        );
        table.extend(
            vocab
                .exclude_properties
                .iter()
                .cloned()
                .map(Action::AddExclude),
        );
        table.extend(
            CatalystBase::ALL
                .into_iter()
                .map(Action::ChangeCatalystType),
        );
        table.push(Action::ToggleOxide);
        table.extend(Relation::ALL.into_iter().map(Action::ChangeRelation));
        table.push(Action::RepeatPrompt);
        Self {
            vocab: Arc::new(vocab),
            rules,
            table: Arc::new(table),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn rules(&self) -> LegalityRules {
        self.rules
    }

    /// Every action in table order, legal or not.
    pub fn table(&self) -> &[Action] {
        &self.table
    }

    /// Position of an action in the table; used for tie-breaking.
    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.table.iter().position(|a| a == action)
    }

    pub fn is_legal(&self, state: &PromptState, action: &Action) -> bool {
        if !self.table.contains(action) {
            return false;
        }
        let candidates = state.has_candidates();
        if self.rules.relation_first
            && candidates
            && state.relation_to_prev.is_none()
            && action.kind() != ActionKind::ChangeRelation
        {
            return false;
        }
        match action {
            Action::AddInclude(p) => {
                !(self.rules.no_duplicate_properties && state.include_props.contains(p))
            }
            Action::AddExclude(p) => {
                !(self.rules.no_duplicate_properties && state.exclude_props.contains(p))
            }
            Action::ChangeRelation(_) => !self.rules.relation_needs_candidates || candidates,
            Action::ChangeCatalystType(_) | Action::ToggleOxide | Action::RepeatPrompt => true,
        }
    }

    /// Legal actions in table order.
    pub fn legal_actions(&self, state: &PromptState) -> Vec<Action> {
        self.table
            .iter()
            .filter(|a| self.is_legal(state, a))
            .cloned()
            .collect()
    }

    /// Uniform prior over the legal actions, in table order.
    pub fn prior(&self, state: &PromptState) -> Vec<(Action, f64)> {
        let legal = self.legal_actions(state);
        assert!(
            !legal.is_empty(),
            "every state has at least one legal action"
        );
        let p = 1.0 / legal.len() as f64;
        legal.into_iter().map(|a| (a, p)).collect()
    }

    /// Prior of a single action; zero when the action is illegal.
    pub fn prior_of(&self, state: &PromptState, action: &Action) -> f64 {
        if !self.is_legal(state, action) {
            return 0.0;
        }
        1.0 / self.legal_actions(state).len() as f64
    }

    /// Applies a legal action. The inherited candidate list is left untouched.
    pub fn apply_action(
        &self,
        state: &PromptState,
        action: &Action,
    ) -> Result<PromptState, PromptError> {
        if !self.is_legal(state, action) {
            return Err(PromptError::IllegalAction(action.clone()));
        }
        let mut next = state.clone();
        match action {
            Action::AddInclude(p) => push_unique(&mut next.include_props, p),
            Action::AddExclude(p) => push_unique(&mut next.exclude_props, p),
            Action::ChangeCatalystType(base) => next.catalyst_label.base = *base,
            Action::ToggleOxide => next.catalyst_label.oxide = !next.catalyst_label.oxide,
            Action::ChangeRelation(r) => next.relation_to_prev = Some(*r),
            Action::RepeatPrompt => {}
        }
        Ok(next)
    }
}

// Under unconstrained rules a repeated property is a no-op rather than a duplicate.
fn push_unique(list: &mut Vec<String>, value: &str) {
    if !list.iter().any(|v| v == value) {
        list.push(value.to_string());
    }
}
