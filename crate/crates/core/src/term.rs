//! Temporal reputation scoring.
//!
//! A report earns a round-score `1 / (f · t)` when it agrees with a randomly
//! drawn peer from the same task (`f` is the sampled frequency of the answer,
//! `t` the report time) and `0` otherwise. Scores of one round are min-max
//! normalized jointly, folded into a geometrically discounted cumulative score
//! and mapped through a Gompertz curve into a reputation in `(0, 1)`.
//!
//! Normalization needs the whole round, so updates are staged: raw scores for
//! every agent first, then [`normalize_round`], then one [`TermModel::update`]
//! per agent.

use serde::{Deserialize, Serialize};

use crate::error::TermError;
use crate::model::{AgentId, AgentState, AnswerId, Report};

/// Raw round-score of `report` against `peer_answer`.
pub fn round_score(report: &Report, peer_answer: AnswerId, freq: f64) -> Result<f64, TermError> {
    raw_round_score(report.answer, peer_answer, freq, report.time)
}

pub fn raw_round_score(
    answer: AnswerId,
    peer_answer: AnswerId,
    freq: f64,
    time: f64,
) -> Result<f64, TermError> {
    if !(time > 0.0) {
        return Err(TermError::NonPositiveTime(time));
    }
    if answer != peer_answer {
        return Ok(0.0);
    }
    if !(freq > 0.0) {
        return Err(TermError::ZeroFrequency);
    }
    Ok(1.0 / (freq * time))
}

/// Min-max maps scores onto `[0, 1]`; a degenerate round maps to all zeros.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let (min, max) = min_max(raw);
    if max == min {
        return vec![0.0; raw.len()];
    }
    let span = max - min;
    raw.iter().map(|&x| ((x - min) / span).clamp(0.0, 1.0)).collect()
}

fn min_max(raw: &[f64]) -> (f64, f64) {
    raw.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundScoreEntry {
    pub agent: AgentId,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundScoreTable {
    pub round: u32,
    pub entries: Vec<RoundScoreEntry>,
    pub min_raw: f64,
    pub max_raw: f64,
}

impl RoundScoreTable {
    pub fn normalized(&self, agent: AgentId) -> Option<f64> {
        self.entries.iter().find(|e| e.agent == agent).map(|e| e.normalized)
    }
}

pub fn normalize_round(round: u32, raw: &[(AgentId, f64)]) -> Result<RoundScoreTable, TermError> {
    if raw.is_empty() {
        return Err(TermError::EmptyRound);
    }
    let values: Vec<f64> = raw.iter().map(|(_, v)| *v).collect();
    let (min_raw, max_raw) = min_max(&values);
    let normalized = normalize_scores(&values);
    let entries = raw
        .iter()
        .zip(normalized)
        .map(|(&(agent, raw), normalized)| RoundScoreEntry { agent, raw, normalized })
        .collect();
    Ok(RoundScoreTable { round, entries, min_raw, max_raw })
}

/// `Σ_k λ^(j-k) |φ|_k` over the history, newest entry weighted by 1.
pub fn cumulative_score(history: &[f64], lambda: f64) -> f64 {
    history.iter().fold(0.0, |acc, &phi| acc * lambda + phi)
}

/// `a · exp(b · exp(c · ψ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gompertz {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for Gompertz {
    fn default() -> Self {
        Self { a: 1.0, b: -1.0, c: -0.5 }
    }
}

impl Gompertz {
    #[inline]
    pub fn eval(&self, psi: f64) -> f64 {
        self.a * (self.b * (self.c * psi).exp()).exp()
    }

    pub fn is_valid(&self) -> bool {
        self.a.is_finite() && self.a > 0.0 && self.b < 0.0 && self.c < 0.0
    }
}

pub fn gompertz(psi: f64) -> f64 {
    Gompertz::default().eval(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermModel {
    pub lambda: f64,
    pub gompertz: Gompertz,
}

impl Default for TermModel {
    fn default() -> Self {
        Self { lambda: 0.9, gompertz: Gompertz::default() }
    }
}

impl TermModel {
    pub fn new(lambda: f64, gompertz: Gompertz) -> Self {
        Self { lambda, gompertz }
    }

    /// Reputation of an agent with no history.
    pub fn initial_score(&self) -> f64 {
        self.gompertz.eval(0.0)
    }

    /// Appends `normalized` to the agent's history and recomputes ψ and Ω.
    /// At most one update per agent per round.
    pub fn update(&self, agent: &mut AgentState, round: u32, normalized: f64) -> Result<(), TermError> {
        if agent.last_term_round == Some(round) {
            return Err(TermError::DoubleUpdate { agent: agent.id, round });
        }
        if !(0.0..=1.0).contains(&normalized) {
            return Err(TermError::OutOfRange(normalized));
        }
        agent.history.push(normalized);
        agent.cumulative_score = cumulative_score(&agent.history, self.lambda);
        agent.term_score = self.gompertz.eval(agent.cumulative_score);
        agent.last_term_round = Some(round);
        Ok(())
    }
}
