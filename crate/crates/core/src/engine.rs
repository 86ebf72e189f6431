//! Monte Carlo tree search over prompt states.
//!
//! Each simulation walks from the root, picking actions with the exploration
//! policy, until it reaches a prompt that is not yet in the tree. That prompt is
//! sent to the environment, scored, stored, and its reward is propagated back
//! up the path with discounting.
//!
//! RNG consumption: one `ChaCha8Rng` per run, seeded from `rng_seed`, drawn from
//! only when a traversal reaches a leaf and samples an action from the prior.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment};
use crate::prompt::{render_prompt, Action, ActionSpace, PromptError, PromptState, RootQuery};
use crate::reward::evaluate_prompt;
use crate::tree::{EdgeKey, NodeId, RunMetrics, Tree, TreeError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("node {0} has no legal actions")]
    NoLegalActions(NodeId),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Discount applied per level of distance during backpropagation.
    pub gamma: f64,
    /// Exploration weight.
    pub c: f64,
    /// Number of simulations, i.e. prompts generated after the root.
    pub budget: usize,
    /// Depth at which a traversal is forced to open a new node.
    pub max_depth_guard: usize,
    pub rng_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            c: 15.0,
            budget: 300,
            max_depth_guard: 50,
            rng_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(EngineError::InvalidConfig(format!(
                "c {} must be finite and >= 0",
                self.c
            )));
        }
        if self.max_depth_guard == 0 {
            return Err(EngineError::InvalidConfig(
                "max_depth_guard must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Exploration score of one arm.
///
/// The mean-value term is dropped for unvisited arms.
pub fn policy_score(value: f64, visits: u64, prior: f64, total_visits: u64, c: f64) -> f64 {
    let exploit = if visits > 0 {
        value / visits as f64
    } else {
        0.0
    };
    exploit + c * prior * (total_visits as f64).sqrt() / (1.0 + visits as f64)
}

/// Statistics of one selectable action at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub value: f64,
    pub visits: u64,
    pub prior: f64,
}

/// Index of the highest-scoring arm; the first one wins ties.
pub fn argmax_policy(arms: &[Arm], total_visits: u64, c: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, arm) in arms.iter().enumerate() {
        let score = policy_score(arm.value, arm.visits, arm.prior, total_visits, c);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub simulation: usize,
    pub node: NodeId,
    pub reward: f64,
    pub best_reward: f64,
}

/// Result of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub node: NodeId,
    /// The traversal hit `max_depth_guard` and opened a node there.
    pub truncated: bool,
}

/// Search state for one run.
pub struct Mcts<'a> {
    env: &'a Environment,
    space: &'a ActionSpace,
    config: SearchConfig,
    rng: ChaCha8Rng,
    tree: Tree,
    truncated: usize,
}

impl<'a> Mcts<'a> {
    pub fn new(
        env: &'a Environment,
        space: &'a ActionSpace,
        config: SearchConfig,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            env,
            space,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            tree: Tree::new(),
            truncated: 0,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn into_tree(self) -> Tree {
        self.tree
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    /// Simulations that hit the depth guard so far.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    /// Sends the root prompt and stores it as node 0.
    pub fn evaluate_root(&mut self, query: &RootQuery) -> Result<NodeId, EngineError> {
        let state = PromptState::root(query.clone());
        let prompt = render_prompt(&state);
        let eval = evaluate_prompt(self.env, query, &prompt, 0)?;
        let root = self.tree.add_root(state, prompt)?;
        self.tree.record(root, eval)?;
        Ok(root)
    }

    /// Visit and value totals for an action; repeat occurrences are pooled.
    fn arm(&self, node: NodeId, action: &Action, prior: f64) -> Arm {
        let mut arm = Arm {
            value: 0.0,
            visits: 0,
            prior,
        };
        for edge in self
            .tree
            .out_edges(node)
            .filter(|e| &e.key.action == action)
        {
            arm.value += edge.stats.value;
            arm.visits += edge.stats.visits;
        }
        arm
    }

    /// Picks the next action at `node`: a prior sample at leaves, the policy argmax elsewhere.
    pub fn select_action(&mut self, node: NodeId) -> Result<Action, EngineError> {
        let state = &self.tree.node(node)?.state;
        let prior = self.space.prior(state);
        if prior.is_empty() {
            return Err(EngineError::NoLegalActions(node));
        }
        if self.tree.is_leaf(node) {
            // Priors are uniform over legal actions.
            let i = self.rng.random_range(0..prior.len());
            return Ok(prior[i].0.clone());
        }
        let total: u64 = self.tree.out_edges(node).map(|e| e.stats.visits).sum();
        let arms: Vec<Arm> = prior.iter().map(|(a, p)| self.arm(node, a, *p)).collect();
        let i =
            argmax_policy(&arms, total, self.config.c).ok_or(EngineError::NoLegalActions(node))?;
        Ok(prior[i].0.clone())
    }

    /// Runs one simulation and returns the node it added.
    ///
    /// Visit counts along the path are committed together with the new node, so
    /// an environment failure leaves the tree unchanged.
    pub fn simulate_once(&mut self) -> Result<Simulation, EngineError> {
        let mut current = self.tree.root().ok_or(TreeError::EmptyTree)?.id;
        let mut path: Vec<(EdgeKey, f64)> = Vec::new();
        let mut truncated = false;
        let (key, action) = loop {
            let action = self.select_action(current)?;
            let node = self.tree.node(current)?;
            let prior = self.space.prior_of(&node.state, &action);
            let mut key = self.tree.next_key(current, &action);
            match self.tree.child(&key) {
                Some(child) if node.depth + 1 < self.config.max_depth_guard => {
                    path.push((key, prior));
                    current = child;
                }
                Some(_) => {
                    while self.tree.child(&key).is_some() {
                        key.occurrence += 1;
                    }
                    truncated = true;
                    break (key, action);
                }
                None => break (key, action),
            }
        };

        let parent = self.tree.node(current)?;
        let state = self
            .space
            .apply_action(&parent.state, &action)?
            .with_candidates(parent.candidates());
        let prompt = render_prompt(&state);
        let sample = key.occurrence + u32::from(action.is_repeat());
        let eval = evaluate_prompt(self.env, &state.root_query, &prompt, sample)?;
        let reward = eval.reward;
        let prior = self.space.prior_of(&parent.state, &action);

        for (k, p) in &path {
            self.tree.visit(k, *p)?;
        }
        self.tree.visit(&key, prior)?;
        let id = self.tree.add_node(key, prior, state, prompt, sample)?;
        self.tree.record(id, eval)?;
        self.tree.backpropagate(id, reward, self.config.gamma)?;
        if truncated {
            self.truncated += 1;
            debug!("simulation truncated at depth guard, node {id}");
        }
        Ok(Simulation {
            node: id,
            truncated,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: NodeId,
    pub tree: Tree,
    pub metrics: RunMetrics,
    pub truncated: usize,
}

/// A failed run together with whatever tree had been built.
#[derive(Debug, Clone, Error)]
#[error("search aborted: {error}")]
pub struct SearchAbort {
    pub error: EngineError,
    pub partial: Box<Tree>,
}

/// Evaluates the root, then runs `config.budget` simulations.
pub fn run_search(
    query: &RootQuery,
    env: &Environment,
    space: &ActionSpace,
    config: SearchConfig,
    progress: &mut dyn FnMut(&Progress),
) -> Result<SearchOutcome, SearchAbort> {
    let mut mcts = Mcts::new(env, space, config).map_err(|error| SearchAbort {
        error,
        partial: Box::default(),
    })?;
    let result = (|| {
        mcts.evaluate_root(query)?;
        let mut best = mcts.tree.metrics()?.best_reward;
        for simulation in 1..=config.budget {
            let sim = mcts.simulate_once()?;
            let reward = mcts.tree.node(sim.node)?.reward.unwrap_or(0.0);
            best = best.max(reward);
            progress(&Progress {
                simulation,
                node: sim.node,
                reward,
                best_reward: best,
            });
        }
        Ok::<_, EngineError>(())
    })();
    match result {
        Ok(()) => {
            let truncated = mcts.truncated;
            let tree = mcts.into_tree();
            Ok(SearchOutcome {
                best: tree.best_node().expect("root is evaluated"),
                metrics: tree.metrics().expect("root is evaluated"),
                tree,
                truncated,
            })
        }
        Err(error) => Err(SearchAbort {
            error,
            partial: Box::new(mcts.into_tree()),
        }),
    }
}
