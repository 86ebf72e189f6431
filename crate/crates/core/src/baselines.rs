//! Comparison methods: chain-of-thought, self-consistency and breadth-first
//! tree-of-thoughts, built from the same prompt, reward and environment parts
//! as the tree search.

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, SearchAbort, SearchOutcome};
use crate::env::{EnvError, Environment};
use crate::prompt::{render_prompt, ActionSpace, PromptState, RootQuery};
use crate::reward::{evaluate_prompt, PromptEvaluation};
use crate::tree::{NodeId, RunMetrics, Tree};

/// Single step-by-step prompt, scored once.
pub fn run_cot(query: &RootQuery, env: &Environment) -> Result<SearchOutcome, EngineError> {
    let state = PromptState::root(query.clone());
    let prompt = render_prompt(&state);
    let eval = evaluate_prompt(env, query, &prompt, 0)?;
    let mut tree = Tree::new();
    let root = tree.add_root(state, prompt)?;
    tree.record(root, eval)?;
    let metrics = tree.metrics()?;
    Ok(SearchOutcome {
        best: root,
        tree,
        metrics,
        truncated: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub sample: u32,
    #[serde(with = "crate::num::f64")]
    pub reward: f64,
    pub candidates: Vec<String>,
    /// Parse or environment failure; the trial then counts as reward 0.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelfConsistencyOutcome {
    pub trials: Vec<Trial>,
    pub best_trial: usize,
    /// Single-node tree holding the best trial.
    pub tree: Tree,
    pub metrics: RunMetrics,
}

/// Reward of the best trial, recomputed from stored trials.
pub fn max_trial_reward(trials: &[Trial]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if best.is_none_or(|(_, r)| t.reward > r) {
            best = Some((i, t.reward));
        }
    }
    best
}

/// Samples the root prompt `trials` times and keeps the highest-reward answer.
///
/// Trial `i` is sent with sample index `i`, so trial 0 is the chain-of-thought query.
pub fn run_self_consistency(
    query: &RootQuery,
    env: &Environment,
    trials: usize,
) -> Result<SelfConsistencyOutcome, EngineError> {
    if trials == 0 {
        return Err(EngineError::InvalidConfig(
            "self-consistency needs at least one trial".into(),
        ));
    }
    let state = PromptState::root(query.clone());
    let prompt = render_prompt(&state);
    let mut records = Vec::with_capacity(trials);
    let mut evals: Vec<Option<PromptEvaluation>> = Vec::with_capacity(trials);
    let mut last_error: Option<EnvError> = None;
    for i in 0..trials {
        let sample = i as u32;
        match evaluate_prompt(env, query, &prompt, sample) {
            Ok(eval) => {
                records.push(Trial {
                    sample,
                    reward: eval.reward,
                    candidates: eval.candidates.clone(),
                    failure: eval.failure.clone(),
                });
                evals.push(Some(eval));
            }
            Err(err) => {
                records.push(Trial {
                    sample,
                    reward: 0.0,
                    candidates: Vec::new(),
                    failure: Some(err.to_string()),
                });
                evals.push(None);
                last_error = Some(err);
            }
        }
    }
    if records.iter().all(|t| t.failure.is_some()) {
        return Err(match last_error {
            Some(err) => EngineError::Environment(err),
            None => EngineError::InvalidConfig(format!("all {trials} trials failed to parse")),
        });
    }
    // Ties and all-zero cases fall back to the first answered trial.
    let (best_trial, _) = max_trial_reward(&records).expect("at least one trial");
    let best_trial = if evals[best_trial].is_some() {
        best_trial
    } else {
        evals
            .iter()
            .position(Option::is_some)
            .expect("some trial answered")
    };
    let mut tree = Tree::new();
    let root = tree.add_root(state, prompt)?;
    tree.record(root, evals[best_trial].clone().expect("answered"))?;
    let mut metrics = tree.metrics()?;
    metrics.n_prompts = trials;
    Ok(SelfConsistencyOutcome {
        trials: records,
        best_trial,
        tree,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotConfig {
    /// Nodes expanded per level.
    pub branching: usize,
    /// Actions tried per expanded node.
    pub action_cap: usize,
    pub depth: usize,
}

impl Default for TotConfig {
    fn default() -> Self {
        Self {
            branching: 6,
            action_cap: 12,
            depth: 5,
        }
    }
}

/// Breadth-first tree-of-thoughts.
///
/// At every level the `branching` best nodes of the previous level are
/// expanded with their first `action_cap` legal actions by prior (table order
/// breaks the ties that uniform priors produce). Created edges carry one visit
/// and no value.
pub fn run_tot_bfs(
    query: &RootQuery,
    env: &Environment,
    space: &ActionSpace,
    config: TotConfig,
) -> Result<SearchOutcome, SearchAbort> {
    let mut tree = Tree::new();
    match expand_levels(query, env, space, config, &mut tree) {
        Ok(()) => {
            let best = tree.best_node().expect("root evaluated");
            let metrics = tree.metrics().expect("root evaluated");
            Ok(SearchOutcome {
                best,
                tree,
                metrics,
                truncated: 0,
            })
        }
        Err(error) => Err(SearchAbort {
            error,
            partial: Box::new(tree),
        }),
    }
}

fn expand_levels(
    query: &RootQuery,
    env: &Environment,
    space: &ActionSpace,
    config: TotConfig,
    tree: &mut Tree,
) -> Result<(), EngineError> {
    let state = PromptState::root(query.clone());
    let prompt = render_prompt(&state);
    let eval = evaluate_prompt(env, query, &prompt, 0)?;
    let root = tree.add_root(state, prompt)?;
    tree.record(root, eval)?;

    let mut frontier = vec![root];
    for _ in 0..config.depth {
        let mut level: Vec<NodeId> = Vec::new();
        for &parent in &frontier {
            let parent_state = tree.node(parent)?.state.clone();
            let candidates = tree.node(parent)?.candidates().to_vec();
            let mut ranked: Vec<(usize, _)> =
                space.prior(&parent_state).into_iter().enumerate().collect();
            // Stable sort keeps table order among equal priors.
            ranked.sort_by(|(_, (_, a)), (_, (_, b))| b.total_cmp(a));
            for (_, (action, prior)) in ranked.into_iter().take(config.action_cap) {
                let key = tree.next_key(parent, &action);
                let child = space
                    .apply_action(&parent_state, &action)?
                    .with_candidates(&candidates);
                let prompt = render_prompt(&child);
                let sample = key.occurrence + u32::from(action.is_repeat());
                let eval = evaluate_prompt(env, query, &prompt, sample)?;
                tree.visit(&key, prior)?;
                let id = tree.add_node(key, prior, child, prompt, sample)?;
                tree.record(id, eval)?;
                level.push(id);
            }
        }
        if level.is_empty() {
            break;
        }
        frontier = top_by_reward(tree, &level, config.branching);
    }
    Ok(())
}

/// The `n` highest-reward nodes, ties to the lower id.
fn top_by_reward(tree: &Tree, ids: &[NodeId], n: usize) -> Vec<NodeId> {
    let mut ranked: Vec<(NodeId, f64)> = ids
        .iter()
        .map(|&id| (id, tree.node(id).ok().and_then(|n| n.reward).unwrap_or(0.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(id, _)| id).collect()
}
