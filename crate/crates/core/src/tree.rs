//! The prompt tree: evaluated prompt nodes and per-edge search statistics.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{Action, PromptState};
use crate::reward::{PromptEvaluation, RewardEvaluation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Identifies an edge. Deterministic actions always use occurrence 0; each
/// traversal of `RepeatPrompt` opens a new occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub parent: NodeId,
    pub action: Action,
    pub occurrence: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Traversals through the edge.
    pub visits: u64,
    /// Total discounted reward of everything evaluated below the edge.
    #[serde(with = "crate::num::f64")]
    pub value: f64,
    #[serde(with = "crate::num::f64")]
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub key: EdgeKey,
    pub stats: EdgeStats,
    pub child: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub raw_text: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub state: PromptState,
    pub rendered_prompt: String,
    pub depth: usize,
    pub parent: Option<EdgeKey>,
    /// Sample index the answer request was sent with.
    pub sample: u32,
    pub answer: Option<Answer>,
    #[serde(with = "crate::num::opt")]
    pub reward: Option<f64>,
    pub reward_detail: Option<RewardEvaluation>,
    pub failure: Option<String>,
}

impl Node {
    pub fn is_evaluated(&self) -> bool {
        self.reward.is_some()
    }

    pub fn candidates(&self) -> &[String] {
        self.answer
            .as_ref()
            .map(|a| a.candidates.as_slice())
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TreeError {
    #[error("tree is empty")]
    EmptyTree,
    #[error("tree already has a root")]
    RootExists,
    #[error("unknown parent {0}")]
    UnknownParent(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge ({}, {}, {}) already has a child", .0.parent, .0.action, .0.occurrence)]
    DuplicateEdge(EdgeKey),
    #[error("node {0} has no reward")]
    NotEvaluated(NodeId),
    #[error("inconsistent tree: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(with = "crate::num::f64")]
    pub best_reward: f64,
    /// Number of evaluated prompts.
    pub n_prompts: usize,
    pub d_max: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<EdgeKey, usize>,
    out_edges: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a tree from stored nodes and edges, checking its invariants.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, TreeError> {
        let mut tree = Tree {
            out_edges: vec![Vec::new(); nodes.len()],
            nodes,
            edges: Vec::new(),
            index: HashMap::new(),
        };
        for edge in edges {
            let parent = edge.key.parent;
            if parent.0 >= tree.nodes.len() {
                return Err(TreeError::UnknownParent(parent));
            }
            if tree.index.contains_key(&edge.key) {
                return Err(TreeError::DuplicateEdge(edge.key));
            }
            tree.index.insert(edge.key.clone(), tree.edges.len());
            tree.out_edges[parent.0].push(tree.edges.len());
            tree.edges.push(edge);
        }
        tree.validate()?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> Option<&Node> {
        self.nodes.first()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id.0).ok_or(TreeError::UnknownNode(id))
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&Edge> {
        self.index.get(key).map(|&i| &self.edges[i])
    }

    /// Edges leaving a node, in creation order.
    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.out_edges
            .get(id.0)
            .into_iter()
            .flatten()
            .map(|&i| &self.edges[i])
    }

    /// True when no child node has been realized below `id`.
    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.out_edges(id).all(|e| e.child.is_none())
    }

    pub fn child(&self, key: &EdgeKey) -> Option<NodeId> {
        self.edge(key).and_then(|e| e.child)
    }

    /// Key a new traversal of `action` from `parent` would use.
    pub fn next_key(&self, parent: NodeId, action: &Action) -> EdgeKey {
        let occurrence = if action.is_repeat() {
            self.out_edges(parent)
                .filter(|e| e.key.action.is_repeat())
                .count() as u32
        } else {
            0
        };
        EdgeKey {
            parent,
            action: action.clone(),
            occurrence,
        }
    }

    pub fn add_root(
        &mut self,
        state: PromptState,
        rendered_prompt: String,
    ) -> Result<NodeId, TreeError> {
        if !self.nodes.is_empty() {
            return Err(TreeError::RootExists);
        }
        self.nodes.push(Node {
            id: NodeId(0),
            state,
            rendered_prompt,
            depth: 0,
            parent: None,
            sample: 0,
            answer: None,
            reward: None,
            reward_detail: None,
            failure: None,
        });
        self.out_edges.push(Vec::new());
        Ok(NodeId(0))
    }

    /// Returns the edge for `key`, creating it with zero statistics if needed.
    pub fn ensure_edge(&mut self, key: &EdgeKey, prior: f64) -> Result<&mut Edge, TreeError> {
        if key.parent.0 >= self.nodes.len() {
            return Err(TreeError::UnknownParent(key.parent));
        }
        let idx = match self.index.get(key) {
            Some(&i) => i,
            None => {
                let i = self.edges.len();
                self.edges.push(Edge {
                    key: key.clone(),
                    stats: EdgeStats {
                        visits: 0,
                        value: 0.0,
                        prior,
                    },
                    child: None,
                });
                self.index.insert(key.clone(), i);
                self.out_edges[key.parent.0].push(i);
                i
            }
        };
        Ok(&mut self.edges[idx])
    }

    /// Increments the visit count of an edge, creating it if needed.
    pub fn visit(&mut self, key: &EdgeKey, prior: f64) -> Result<(), TreeError> {
        self.ensure_edge(key, prior)?.stats.visits += 1;
        Ok(())
    }

    /// Appends a node below `key`. The edge is created if absent.
    pub fn add_node(
        &mut self,
        key: EdgeKey,
        prior: f64,
        state: PromptState,
        rendered_prompt: String,
        sample: u32,
    ) -> Result<NodeId, TreeError> {
        let depth = self
            .nodes
            .get(key.parent.0)
            .ok_or(TreeError::UnknownParent(key.parent))?
            .depth
            + 1;
        if self.child(&key).is_some() {
            return Err(TreeError::DuplicateEdge(key));
        }
        let id = NodeId(self.nodes.len());
        self.ensure_edge(&key, prior)?.child = Some(id);
        self.nodes.push(Node {
            id,
            state,
            rendered_prompt,
            depth,
            parent: Some(key),
            sample,
            answer: None,
            reward: None,
            reward_detail: None,
            failure: None,
        });
        self.out_edges.push(Vec::new());
        Ok(id)
    }

    /// Stores an answer and its reward on a node.
    pub fn record(&mut self, id: NodeId, eval: PromptEvaluation) -> Result<(), TreeError> {
        let node = self.nodes.get_mut(id.0).ok_or(TreeError::UnknownNode(id))?;
        node.answer = Some(Answer {
            raw_text: eval.raw_answer,
            candidates: eval.candidates,
        });
        node.reward = Some(eval.reward);
        node.reward_detail = eval.detail;
        node.failure = eval.failure;
        Ok(())
    }

    /// Adds `gamma^(t - t') * reward` to every edge on the root path of a leaf at depth `t`,
    /// where `t'` is the depth of the edge's parent.
    pub fn backpropagate(
        &mut self,
        leaf: NodeId,
        reward: f64,
        gamma: f64,
    ) -> Result<(), TreeError> {
        let leaf_depth = self.node(leaf)?.depth;
        let mut current = leaf;
        while let Some(key) = self.nodes[current.0].parent.clone() {
            let parent_depth = self.nodes[key.parent.0].depth;
            let idx = *self
                .index
                .get(&key)
                .ok_or_else(|| TreeError::Inconsistent(format!("missing edge above {current}")))?;
            self.edges[idx].stats.value += gamma.powi((leaf_depth - parent_depth) as i32) * reward;
            current = key.parent;
        }
        Ok(())
    }

    /// Evaluated node with the highest reward; ties go to the lowest id.
    pub fn best_node(&self) -> Result<NodeId, TreeError> {
        let mut best: Option<(NodeId, f64)> = None;
        for node in &self.nodes {
            if let Some(r) = node.reward {
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((node.id, r));
                }
            }
        }
        best.map(|(id, _)| id).ok_or(TreeError::EmptyTree)
    }

    pub fn metrics(&self) -> Result<RunMetrics, TreeError> {
        let best = self.best_node()?;
        Ok(RunMetrics {
            best_reward: self.nodes[best.0].reward.unwrap_or(0.0),
            n_prompts: self.nodes.iter().filter(|n| n.is_evaluated()).count(),
            d_max: self.nodes.iter().map(|n| n.depth).max().unwrap_or(0),
        })
    }

    /// Checks structural invariants: ids, parent links, depths and edge/child agreement.
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |msg: String| Err(TreeError::Inconsistent(msg));
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != NodeId(i) {
                return bad(format!("node at position {i} has id {}", node.id));
            }
            if node.reward.is_some() != node.answer.is_some() {
                return bad(format!(
                    "{} has a reward without an answer or vice versa",
                    node.id
                ));
            }
            match &node.parent {
                None if i == 0 => {
                    if node.depth != 0 {
                        return bad("root depth is not 0".into());
                    }
                }
                None => return bad(format!("{} has no parent", node.id)),
                Some(key) => {
                    if key.parent.0 >= i {
                        return bad(format!("{} points at a later parent", node.id));
                    }
                    if node.depth != self.nodes[key.parent.0].depth + 1 {
                        return bad(format!("{} has the wrong depth", node.id));
                    }
                    if self.child(key) != Some(node.id) {
                        return bad(format!("edge above {} does not point at it", node.id));
                    }
                }
            }
        }
        for edge in &self.edges {
            if let Some(child) = edge.child {
                let ok = self
                    .nodes
                    .get(child.0)
                    .is_some_and(|n| n.parent.as_ref() == Some(&edge.key));
                if !ok {
                    return bad(format!("edge into {child} is not that node's parent edge"));
                }
            }
        }
        Ok(())
    }
}
