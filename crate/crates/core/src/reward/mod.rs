//! Reward evaluation for a prompt's candidate list.
//!
//! The model is asked for adsorption energies of each candidate; the reward is
//! the mean absolute energy per adsorbate, summed over the query's adsorbates.

mod parse;

pub use parse::{format_energy_list, parse_candidates, parse_energy_list, ParseError};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, Purpose};
use crate::prompt::RootQuery;

/// Attempts per adsorbate before the reward is declared unavailable.
pub const MAX_REWARD_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RewardError {
    #[error("reward prompt needs at least one candidate")]
    EmptyCandidateList,
    #[error("no parseable energy list for {adsorbate} after {attempts} attempts")]
    RewardUnavailable { adsorbate: String, attempts: u32 },
    #[error(transparent)]
    Environment(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsorbateEnergy {
    pub adsorbate: String,
    pub raw_reply: String,
    #[serde(with = "crate::num::vec")]
    pub energies: Vec<f64>,
    #[serde(with = "crate::num::f64")]
    pub mean_abs: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvaluation {
    pub per_adsorbate: Vec<AdsorbateEnergy>,
    #[serde(with = "crate::num::f64")]
    pub total: f64,
}

impl RewardEvaluation {
    /// Sums per-adsorbate means in order.
    pub fn from_parts(per_adsorbate: Vec<AdsorbateEnergy>) -> Self {
        let total = per_adsorbate.iter().map(|a| a.mean_abs).sum();
        Self {
            per_adsorbate,
            total,
        }
    }
}

pub fn mean_abs(energies: &[f64]) -> f64 {
    if energies.is_empty() {
        return 0.0;
    }
    energies.iter().map(|e| e.abs()).sum::<f64>() / energies.len() as f64
}

pub fn build_reward_prompt(adsorbate: &str, candidates: &[String]) -> Result<String, RewardError> {
    if candidates.is_empty() {
        return Err(RewardError::EmptyCandidateList);
    }
    Ok(format!(
        "Generate a list of adsorption energies, in eV, for the adsorbate {adsorbate} to the \
         surface of each of the following catalysts: {}. Return the adsorption energies as a \
         list of only {} numbers in the order specified.",
        candidates.join(", "),
        candidates.len()
    ))
}

fn energy_for(
    env: &Environment,
    adsorbate: &str,
    candidates: &[String],
) -> Result<AdsorbateEnergy, RewardError> {
    let prompt = build_reward_prompt(adsorbate, candidates)?;
    for attempt in 0..MAX_REWARD_ATTEMPTS {
        let reply = env.complete(&prompt, Purpose::Reward, attempt)?;
        match parse_energy_list(&reply, candidates.len()) {
            Ok(energies) => {
                return Ok(AdsorbateEnergy {
                    adsorbate: adsorbate.to_string(),
                    raw_reply: reply,
                    mean_abs: mean_abs(&energies),
                    energies,
                    attempts: attempt + 1,
                })
            }
            Err(err) => warn!(
                "reward reply for {adsorbate} unparseable ({err}); attempt {}",
                attempt + 1
            ),
        }
    }
    Err(RewardError::RewardUnavailable {
        adsorbate: adsorbate.to_string(),
        attempts: MAX_REWARD_ATTEMPTS,
    })
}

/// Queries energies for every adsorbate and sums the mean absolute values.
///
/// Adsorbates are queried concurrently; results keep the input order.
pub fn compute_reward(
    env: &Environment,
    adsorbates: &[String],
    candidates: &[String],
) -> Result<RewardEvaluation, RewardError> {
    if candidates.is_empty() {
        return Err(RewardError::EmptyCandidateList);
    }
    let results: Vec<Result<AdsorbateEnergy, RewardError>> = if adsorbates.len() <= 1 {
        adsorbates
            .iter()
            .map(|a| energy_for(env, a, candidates))
            .collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = adsorbates
                .iter()
                .map(|a| scope.spawn(move || energy_for(env, a, candidates)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("reward worker panicked"))
                .collect()
        })
    };
    Ok(RewardEvaluation::from_parts(
        results.into_iter().collect::<Result<_, _>>()?,
    ))
}

/// Outcome of sending one prompt and scoring its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEvaluation {
    pub raw_answer: String,
    pub candidates: Vec<String>,
    #[serde(with = "crate::num::f64")]
    pub reward: f64,
    pub detail: Option<RewardEvaluation>,
    /// Set when the answer or its energies could not be parsed; reward is then 0.
    pub failure: Option<String>,
}

/// Sends a rendered prompt, parses its candidates and computes the reward.
///
/// Parse failures yield a zero reward with `failure` set; only environment
/// errors abort.
pub fn evaluate_prompt(
    env: &Environment,
    query: &RootQuery,
    prompt: &str,
    sample: u32,
) -> Result<PromptEvaluation, EnvError> {
    let raw_answer = env.complete(prompt, Purpose::Answer, sample)?;
    let candidates = match parse_candidates(&raw_answer, query.k()) {
        Ok(c) => c,
        Err(err) => {
            return Ok(PromptEvaluation {
                raw_answer,
                candidates: Vec::new(),
                reward: 0.0,
                detail: None,
                failure: Some(err.to_string()),
            })
        }
    };
    match compute_reward(env, &query.adsorbates(), &candidates) {
        Ok(detail) => Ok(PromptEvaluation {
            raw_answer,
            candidates,
            reward: detail.total,
            detail: Some(detail),
            failure: None,
        }),
        Err(RewardError::Environment(err)) => Err(err),
        Err(err) => Ok(PromptEvaluation {
            raw_answer,
            candidates,
            reward: 0.0,
            detail: None,
            failure: Some(err.to_string()),
        }),
    }
}
