//! Monte-Carlo pairing oracle shared by the integration and acceptance tests.
//!
//! A report of answer `0` is paired against synthetic peers: each draw agrees
//! with probability `q′` and sits below the agent's reputation with
//! probability `r`. Frequency counts are one binomial draw per report over the
//! `n - 1` other tasks, as in the simulator.

#![allow(dead_code)]

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use reform_core::analytics::{
    expected_reward_random, expected_reward_reform_k, expected_reward_reform_k2, expected_reward_rptsc,
    optimal_reward,
};
use reform_core::error::PairingError;
use reform_core::model::AnswerId;
use reform_core::reform::{run_pairing, settle_single, PairingInput, PeerSource, PeerView};
use reform_core::reward::{DecayFactor, FrequencySample, Rptsc};

pub const ORACLE_NS: [u32; 3] = [2, 5, 50];
pub const ORACLE_KS: [u32; 4] = [1, 2, 4, 8];
pub const ORACLE_SIGMAS: f64 = 4.0;

struct Synthetic {
    q_prime: f64,
    r: f64,
}

impl PeerSource for Synthetic {
    fn draw(&mut self, rng: &mut dyn RngCore) -> Result<PeerView, PairingError> {
        let answer = if rng.gen::<f64>() < self.q_prime { AnswerId(0) } else { AnswerId(1) };
        let omega = if rng.gen::<f64>() < self.r { 0.0 } else { 1.0 };
        Ok(PeerView { answer, omega })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub q: f64,
    pub q_prime: f64,
    pub r: f64,
    pub n: u32,
    pub k: u32,
    pub alpha: f64,
    pub time: f64,
    pub rate: f64,
}

impl GridPoint {
    pub fn beta(&self) -> f64 {
        (-self.rate * self.time).exp()
    }

    fn decay(&self) -> DecayFactor {
        DecayFactor::Exponential { rate: self.rate }
    }
}

pub fn random_grid(seed: u64, points: usize) -> Vec<GridPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|i| GridPoint {
            q: rng.gen_range(0.05..0.95),
            q_prime: rng.gen_range(0.0..=1.0),
            r: rng.gen_range(0.0..=1.0),
            n: ORACLE_NS[i % ORACLE_NS.len()],
            k: ORACLE_KS[(i / ORACLE_NS.len()) % ORACLE_KS.len()],
            alpha: rng.gen_range(0.5..20.0),
            time: rng.gen_range(0.1..1.0),
            rate: rng.gen_range(0.0..1.0),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    /// Single pairing.
    Rptsc,
    /// Single pairing, peer always agrees.
    Optimal,
    /// Two chances.
    TwoChance,
    /// `k` chances.
    Series,
    /// Two chances, answer drawn at its prior rate.
    RandomReport,
}

impl Formula {
    pub const ALL: [Formula; 5] =
        [Formula::Rptsc, Formula::Optimal, Formula::TwoChance, Formula::Series, Formula::RandomReport];
}

#[derive(Debug, Clone, Copy)]
pub struct OracleCheck {
    pub formula: Formula,
    pub point: GridPoint,
    pub expected: f64,
    pub mean: f64,
    pub se: f64,
}

impl OracleCheck {
    /// Deviation in standard errors; exact agreement when the estimate has
    /// no spread.
    pub fn z(&self) -> f64 {
        let diff = (self.mean - self.expected).abs();
        if self.se > 0.0 {
            diff / self.se
        } else if diff <= 1e-9 * (1.0 + self.expected.abs()) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn ok(&self) -> bool {
        self.z() <= ORACLE_SIGMAS
    }
}

fn expected(formula: Formula, p: &GridPoint) -> f64 {
    let b = p.beta();
    match formula {
        Formula::Rptsc => b * expected_reward_rptsc(p.q, p.q_prime, p.n, p.alpha),
        Formula::Optimal => b * optimal_reward(p.q, p.n, p.alpha).unwrap(),
        Formula::TwoChance => expected_reward_reform_k2(p.q, p.q_prime, p.r, p.n, p.alpha, b),
        Formula::Series => expected_reward_reform_k(p.q, p.q_prime, p.r, p.n, p.alpha, b, p.k).unwrap(),
        Formula::RandomReport => expected_reward_random(p.q, p.r, p.n, p.alpha, b),
    }
}

/// Mean and standard error of the realized reward over `trials` reports.
pub fn simulate(formula: Formula, p: &GridPoint, trials: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let binom = Binomial::new(u64::from(p.n - 1), p.q).unwrap();
    let scheme = Rptsc { alpha: p.alpha };
    let decay = p.decay();
    let input = PairingInput { answer: AnswerId(0), time: p.time, omega: 0.5 };
    let q_prime = match formula {
        Formula::Optimal => 1.0,
        Formula::RandomReport => p.q,
        _ => p.q_prime,
    };
    let mut peers = Synthetic { q_prime, r: p.r };
    let (mut sum, mut sq) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let b = binom.sample(&mut rng) as u32;
        let freq = FrequencySample::from_counts(vec![b, p.n - 1 - b]);
        let out = match formula {
            Formula::Rptsc | Formula::Optimal => settle_single(&input, &mut peers, &scheme, &decay, &freq, &mut rng),
            Formula::TwoChance | Formula::RandomReport => {
                run_pairing(&input, &mut peers, &scheme, &decay, &freq, 2, &mut rng)
            }
            Formula::Series => run_pairing(&input, &mut peers, &scheme, &decay, &freq, p.k, &mut rng),
        }
        .unwrap();
        sum += out.reward;
        sq += out.reward * out.reward;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Every formula at every grid point, `trials` reports each.
pub fn run_oracle(grid: &[GridPoint], trials: u64, seed: u64) -> Vec<OracleCheck> {
    let jobs: Vec<(usize, Formula)> =
        (0..grid.len()).flat_map(|i| Formula::ALL.into_iter().map(move |f| (i, f))).collect();
    jobs.par_iter()
        .map(|&(i, formula)| {
            let p = grid[i];
            let stream = seed ^ ((i as u64) << 8 | formula as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (mean, se) = simulate(formula, &p, trials, stream);
            OracleCheck { formula, point: p, expected: expected(formula, &p), mean, se }
        })
        .collect()
}
