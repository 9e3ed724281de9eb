//! Closed-form expected rewards, fairness constants and incentive conditions.
//!
//! Notation: `q` is the probability that a peer reports answer `y`, `q′` the
//! probability given the agent's own evaluation is `y`, `r` the probability
//! that the agent's reputation exceeds its peer's, `n` the number of tasks in
//! the frequency sample, `α` the reward scale and `β` the decay value.
//!
//! The frequency of an answer counts one report from each of the `n - 1`
//! other tasks plus the paired peer's report.

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;
use crate::model::validate_distribution;

/// Probability that at least one of `n - 1` independent draws hits `y`.
#[inline]
fn coverage(q: f64, n: u32) -> f64 {
    1.0 - (1.0 - q).powi(n as i32 - 1)
}

/// Expected single-pairing RPTSC reward of a report `y`.
pub fn expected_reward_rptsc(q: f64, q_prime: f64, n: u32, alpha: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    alpha * (q_prime / q - 1.0) * coverage(q, n)
}

/// Expected reward given that the peer matches.
pub fn optimal_reward(q: f64, n: u32, alpha: f64) -> Result<f64, AnalyticsError> {
    if q <= 0.0 {
        return Err(AnalyticsError::ZeroProbability);
    }
    Ok(expected_reward_rptsc(q, 1.0, n, alpha))
}

/// Two-chance expected reward.
pub fn expected_reward_reform_k2(q: f64, q_prime: f64, r: f64, n: u32, alpha: f64, beta: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    alpha * beta * (q_prime / q - 1.0 + r * (1.0 - q_prime) * q_prime / q) * coverage(q, n)
}

/// `k`-chance expected reward.
///
/// With `E_1 = E′` and `E_k = (1 - r)E′ + r(q′M′ + (1 - q′)E_{k-1})`:
/// `E_k = (r q′ M′ + (1 - r)E′) Σ_{j<k-1} ρ^j + ρ^{k-1} E′`, `ρ = r(1 - q′)`,
/// all scaled by `β`.
pub fn expected_reward_reform_k(
    q: f64,
    q_prime: f64,
    r: f64,
    n: u32,
    alpha: f64,
    beta: f64,
    k: u32,
) -> Result<f64, AnalyticsError> {
    if k < 1 {
        return Err(AnalyticsError::K);
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    let e = expected_reward_rptsc(q, q_prime, n, alpha);
    let m = expected_reward_rptsc(q, 1.0, n, alpha);
    let rho = r * (1.0 - q_prime);
    let series: f64 = (0..k - 1).map(|j| rho.powi(j as i32)).sum();
    Ok(beta * ((r * q_prime * m + (1.0 - r) * e) * series + rho.powi(k as i32 - 1) * e))
}

/// Expected reward of an agent reporting `y` at random, two chances.
pub fn expected_reward_random(p: f64, r: f64, n: u32, alpha: f64, beta: f64) -> f64 {
    alpha * beta * r * (1.0 - p) * coverage(p, n)
}

/// `k`-chance reward of a report whose peer matches with probability equal to
/// its prior frequency.
pub fn expected_reward_random_k(p: f64, r: f64, n: u32, alpha: f64, beta: f64, k: u32) -> Result<f64, AnalyticsError> {
    expected_reward_reform_k(p, p, r, n, alpha, beta, k)
}

/// Agent beliefs about evaluations, peer reports and relative reputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefModel {
    /// Prior over answers.
    pub prior: Vec<f64>,
    /// `posterior[x][y]`: probability a peer reports `y` given own evaluation `x`.
    pub posterior: Vec<Vec<f64>>,
    pub r: f64,
    pub n: u32,
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

impl BeliefModel {
    /// Uniform prior over `answers`, posterior `accuracy` on the diagonal and
    /// the rest spread evenly.
    pub fn symmetric(answers: usize, accuracy: f64, r: f64, n: u32, alpha: f64) -> Self {
        let off = if answers > 1 { (1.0 - accuracy) / (answers - 1) as f64 } else { 0.0 };
        let posterior = (0..answers)
            .map(|x| (0..answers).map(|y| if x == y { accuracy } else { off }).collect())
            .collect();
        Self { prior: vec![1.0 / answers as f64; answers], posterior, r, n, alpha, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        validate_distribution(&self.prior, self.prior.len()).map_err(AnalyticsError::Prior)?;
        if let Some((index, &value)) = self.prior.iter().enumerate().find(|(_, p)| !(**p > 0.0 && **p < 1.0)) {
            if self.prior.len() > 1 || value != 1.0 {
                return Err(AnalyticsError::NotFullyMixed { index, value });
            }
        }
        if self.posterior.len() != self.prior.len() {
            return Err(AnalyticsError::PosteriorShape { expected: self.prior.len(), got: self.posterior.len() });
        }
        for (row, p) in self.posterior.iter().enumerate() {
            validate_distribution(p, self.prior.len()).map_err(|source| AnalyticsError::PosteriorRow { row, source })?;
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(AnalyticsError::R(self.r));
        }
        if self.n < 1 {
            return Err(AnalyticsError::N);
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(AnalyticsError::Alpha(self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(AnalyticsError::Beta(self.beta));
        }
        Ok(())
    }

    pub fn answers(&self) -> usize {
        self.prior.len()
    }

    fn diag(&self, x: usize) -> f64 {
        self.posterior[x][x]
    }

    /// Per-evaluation `(q, q′)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.answers()).map(|x| (self.prior[x], self.diag(x)))
    }
}

/// Expected RPTSC reward before the evaluation is known.
pub fn pre_eval_expected_rptsc(b: &BeliefModel) -> f64 {
    b.pairs().map(|(p, pp)| p * expected_reward_rptsc(p, pp, b.n, b.alpha)).sum()
}

/// Expected two-chance reward before the evaluation is known.
pub fn pre_eval_expected_reform(b: &BeliefModel) -> f64 {
    b.pairs()
        .map(|(p, pp)| p * expected_reward_reform_k2(p, pp, b.r, b.n, b.alpha, b.beta))
        .sum()
}

pub fn pre_eval_expected_reform_k(b: &BeliefModel, k: u32) -> Result<f64, AnalyticsError> {
    b.pairs()
        .map(|(p, pp)| expected_reward_reform_k(p, pp, b.r, b.n, b.alpha, b.beta, k).map(|e| p * e))
        .sum()
}

/// Expected two-chance reward of a random reporter drawing from the prior.
pub fn pre_eval_expected_random(b: &BeliefModel) -> f64 {
    b.prior.iter().map(|&p| p * expected_reward_random(p, b.r, b.n, b.alpha, b.beta)).sum()
}

/// Strength of the self-predicting belief, per evaluation; smaller is stronger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPredictor {
    pub delta: Vec<f64>,
}

impl SelfPredictor {
    pub fn max(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }
}

fn lift(b: &BeliefModel, x: usize, y: usize) -> f64 {
    b.posterior[x][y] / b.prior[y]
}

fn check_self_predicting(b: &BeliefModel) -> Result<(), AnalyticsError> {
    for x in 0..b.answers() {
        for y in (0..b.answers()).filter(|&y| y != x) {
            if !(lift(b, x, x) > lift(b, x, y)) {
                return Err(AnalyticsError::SelfPredicting { x, y });
            }
        }
    }
    Ok(())
}

/// `Δ_x = max_{y≠x} (p′_{y|x} / p_y) / (p′_{x|x} / p_x)`, clamped to `[0, 1]`.
pub fn self_predictor(b: &BeliefModel) -> Result<SelfPredictor, AnalyticsError> {
    b.validate()?;
    check_self_predicting(b)?;
    let delta = (0..b.answers())
        .map(|x| {
            let own = lift(b, x, x);
            (0..b.answers())
                .filter(|&y| y != x)
                .map(|y| lift(b, x, y) / own)
                .fold(0.0, f64::max)
                .clamp(0.0, 1.0)
        })
        .collect();
    Ok(SelfPredictor { delta })
}

/// Variant measuring lifts above 1: `max_{y≠x} (lift_y - 1) / (lift_x - 1)`.
pub fn self_predictor_shifted(b: &BeliefModel) -> Result<SelfPredictor, AnalyticsError> {
    b.validate()?;
    check_self_predicting(b)?;
    let delta = (0..b.answers())
        .map(|x| {
            let own = lift(b, x, x) - 1.0;
            if own <= 0.0 {
                return 1.0;
            }
            (0..b.answers())
                .filter(|&y| y != x)
                .map(|y| (lift(b, x, y) - 1.0) / own)
                .fold(0.0, f64::max)
                .clamp(0.0, 1.0)
        })
        .collect();
    Ok(SelfPredictor { delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Expected single-pairing reward exceeds the effort cost gap.
    pub a: bool,
    /// Expected `k`-chance reward minus `αβ` covers the effort cost gap.
    pub a1: bool,
    /// `(1 - (1 - p_x)^n) / (1 - p_x^n) ≥ Δ_x` for every `x`.
    pub b1: bool,
    /// `p_x / p_y ≥ Δ_x` for every `x`, `y`.
    pub b2: bool,
    pub rptsc_reward: f64,
    pub reform_reward: f64,
    pub cost_gap: f64,
    pub delta: Vec<f64>,
}

pub fn check_assumptions(
    b: &BeliefModel,
    cost_high: f64,
    cost_low: f64,
    k: u32,
) -> Result<AssumptionReport, AnalyticsError> {
    let sp = self_predictor(b)?;
    let gap = cost_high - cost_low;
    let rptsc_reward = pre_eval_expected_rptsc(b);
    let reform_reward = pre_eval_expected_reform_k(b, k)?;
    let n = b.n as i32;
    let b1 = b.prior.iter().zip(&sp.delta).all(|(&p, &d)| {
        let den = 1.0 - p.powi(n);
        den <= 0.0 || (1.0 - (1.0 - p).powi(n)) / den >= d
    });
    let b2 = b
        .prior
        .iter()
        .zip(&sp.delta)
        .all(|(&px, &d)| b.prior.iter().all(|&py| px / py >= d));
    Ok(AssumptionReport {
        a: rptsc_reward > gap,
        a1: reform_reward - b.alpha * b.beta >= gap,
        b1,
        b2,
        rptsc_reward,
        reform_reward,
        cost_gap: gap,
        delta: sp.delta,
    })
}

fn inv_gamma(b: &BeliefModel, weight: impl Fn(f64) -> f64) -> f64 {
    b.pairs()
        .map(|(q, qp)| b.alpha * weight(qp) * (1.0 - qp) * coverage(q, b.n))
        .sum()
}

fn gamma_from_inverse(inv: f64) -> f64 {
    if inv == 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv
    }
}

/// Fairness constant of single-pairing RPTSC; `+∞` when the gap vanishes.
pub fn gamma_rptsc(b: &BeliefModel) -> f64 {
    gamma_from_inverse(inv_gamma(b, |_| 1.0))
}

/// Fairness constant with two chances.
pub fn gamma_reform(b: &BeliefModel) -> f64 {
    gamma_from_inverse(inv_gamma(b, |qp| 1.0 - b.r * qp))
}

/// Expected reward of an even split between two pairings (`R-1`) and of a
/// reputation-ordered split (`R-2`), given match reward `g` and mismatch
/// reward `l`.
pub fn approach_comparison(g: f64, l: f64, r: f64) -> (f64, f64) {
    (0.5 * g + 0.5 * l, (0.5 + r / 4.0) * g + (0.5 - r / 4.0) * l)
}
