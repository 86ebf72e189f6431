//! Monte Carlo tree search over prompt templates for catalyst discovery queries.
//!
//! A query to a completion model is built from a template whose fields
//! (properties to include or exclude, catalyst type, relation to a previous
//! answer) are edited by discrete actions. The search explores sequences of
//! those edits, scoring every generated prompt by the adsorption energies the
//! model reports for the catalysts it proposes.
//!
//! Modules:
//! - [`prompt`]: prompt states, actions, legality and rendering
//! - [`tree`]: the search tree, backpropagation and run metrics
//! - [`engine`]: the tree search itself
//! - [`reward`]: energy queries, reply parsing and reward aggregation
//! - [`env`]: completion backends (HTTP, seeded mock), cache and rate limiting
//! - [`baselines`]: chain-of-thought, self-consistency and breadth-first search
//! - [`dump`], [`dataset`]: on-disk formats

pub mod baselines;
pub mod dataset;
pub mod dump;
pub mod engine;
pub mod env;
pub mod num;
pub mod prompt;
pub mod reward;
pub mod tree;

pub use engine::{run_search, Mcts, SearchConfig, SearchOutcome};
pub use prompt::{Action, ActionSpace, PromptState, RootQuery};
pub use tree::{NodeId, RunMetrics, Tree};
