//! Measurements over experiment records: normalized rewards, empirical
//! fairness, reputation ordering, budgets and incentive probes.
//!
//! Everything except the probes is a pure function of the record.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytics::{optimal_reward, BeliefModel};
use crate::config::{MixEntry, SimConfig};
use crate::error::{MetricsError, SimError};
use crate::model::{AgentId, AnswerId, Strategy, StrategyKind};
use crate::reward::apply_decay;
use crate::simulator::{run_with_overrides, ExperimentRecord, ReportRecord};

/// Rounds dropped by the "after warm-up" variants.
pub const WARM_UP_ROUNDS: u32 = 10;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5EED_B007;
/// Minimum samples per reputation bin.
pub const MIN_BIN_SAMPLES: usize = 30;
/// Reputation bins of the qualitative fairness test.
pub const FAIRNESS_BINS: usize = 4;
/// Final rounds averaged for trend comparisons.
pub const TAIL_ROUNDS: u32 = 50;

fn z_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Expected reward of a truthful report given a match, averaged over the
/// truth prior, with the record's sample size and α.
pub fn reference_optimal_reward(cfg: &SimConfig) -> Result<f64, MetricsError> {
    let n = cfg.sample_size();
    let alpha = cfg.mechanism.alpha;
    let prior = cfg.truth_prior();
    let m: f64 = prior
        .iter()
        .filter(|p| **p > 0.0)
        .map(|&p| p * optimal_reward(p, n, alpha).unwrap_or(0.0))
        .sum();
    if m > 0.0 {
        Ok(m)
    } else {
        Err(MetricsError::ZeroOptimalReward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub round: u32,
    pub strategy: StrategyKind,
    pub mean_reward: f64,
    pub normalized: f64,
}

/// Mean reward per strategy per round divided by `optimal`.
pub fn normalized_rewards(record: &ExperimentRecord, optimal: f64) -> Result<Vec<NormalizedRow>, MetricsError> {
    if optimal == 0.0 {
        return Err(MetricsError::ZeroOptimalReward);
    }
    Ok(record
        .ledgers
        .iter()
        .flat_map(|l| {
            l.aggregates.iter().map(move |a| NormalizedRow {
                round: l.round,
                strategy: a.strategy,
                mean_reward: a.mean_reward,
                normalized: a.mean_reward / optimal,
            })
        })
        .collect())
}

/// Average normalized reward of `strategy` over the last `window` rounds.
pub fn tail_mean(rows: &[NormalizedRow], strategy: StrategyKind, window: u32) -> Option<f64> {
    let last = rows.iter().map(|r| r.round).max()?;
    let from = (last + 1).saturating_sub(window);
    mean(rows.iter().filter(|r| r.strategy == strategy && r.round >= from).map(|r| r.normalized))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn gamma_of(gap: f64) -> f64 {
    if gap == 0.0 {
        f64::INFINITY
    } else {
        1.0 / gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// γ with every trustworthy report weighted equally.
    pub gamma: f64,
    /// Bootstrap 95% interval for `gamma`, resampling rounds.
    pub ci_low: f64,
    pub ci_high: f64,
    /// γ with each answer weighted equally.
    pub gamma_uniform: f64,
    /// γ over rounds after the warm-up.
    pub gamma_after_warm_up: f64,
    /// Mean gap between the match reward and the realized reward.
    pub mean_gap: f64,
    pub round_gaps: Vec<f64>,
}

/// Gap between what a report would have earned on a match and what it earned.
pub fn optimal_gap(record: &ExperimentRecord, r: &ReportRecord) -> f64 {
    let cfg = &record.config;
    let scheme = cfg.mechanism.name.scheme(cfg.mechanism.alpha);
    apply_decay(scheme.on_match(r.match_freq), r.report.time, &cfg.mechanism.decay) - r.outcome.reward
}

/// Fairness constant: the inverse of the mean gap between match reward and
/// realized reward over trustworthy reports, averaged per round.
pub fn empirical_gamma(record: &ExperimentRecord) -> Result<GammaEstimate, MetricsError> {
    if record.ledgers.is_empty() {
        return Err(MetricsError::EmptyRecord);
    }
    let answers = record.config.tasks.answers as usize;
    let mut round_gaps = Vec::new();
    let mut uniform_gaps = Vec::new();
    let mut rounds = Vec::new();
    for l in &record.ledgers {
        let mut per_answer = vec![(0usize, 0.0); answers];
        for r in l.reports.iter().filter(|r| r.strategy == StrategyKind::Trustworthy) {
            let g = optimal_gap(record, r);
            let e = &mut per_answer[r.report.answer.index()];
            e.0 += 1;
            e.1 += g;
        }
        let (n, s) = per_answer.iter().fold((0, 0.0), |(n, s), e| (n + e.0, s + e.1));
        if n == 0 {
            continue;
        }
        round_gaps.push(s / n as f64);
        rounds.push(l.round);
        uniform_gaps.push(mean(per_answer.iter().filter(|e| e.0 > 0).map(|e| e.1 / e.0 as f64)).unwrap_or(0.0));
    }
    if round_gaps.is_empty() {
        return Err(MetricsError::NoTrustworthyReports);
    }
    let mean_gap = round_gaps.iter().sum::<f64>() / round_gaps.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let k = round_gaps.len();
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| gamma_of((0..k).map(|_| round_gaps[rng.gen_range(0..k)]).sum::<f64>() / k as f64))
        .collect();
    boot.sort_by(f64::total_cmp);
    let late: Vec<f64> = rounds
        .iter()
        .zip(&round_gaps)
        .filter(|(r, _)| **r >= WARM_UP_ROUNDS)
        .map(|(_, g)| *g)
        .collect();
    Ok(GammaEstimate {
        gamma: gamma_of(mean_gap),
        ci_low: percentile(&boot, 0.025),
        ci_high: percentile(&boot, 0.975),
        gamma_uniform: gamma_of(uniform_gaps.iter().sum::<f64>() / uniform_gaps.len() as f64),
        gamma_after_warm_up: mean(late.iter().copied()).map_or(f64::NAN, gamma_of),
        mean_gap,
        round_gaps,
    })
}

/// How often a strategy's reputation strictly exceeds its peer's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutrankRate {
    pub strategy: StrategyKind,
    /// Over all pairings.
    pub r: f64,
    /// Over pairings whose answers disagreed.
    pub r_on_mismatch: f64,
    pub per_round: Vec<f64>,
}

pub fn empirical_r(record: &ExperimentRecord, strategy: StrategyKind, from_round: u32) -> Option<OutrankRate> {
    let mut tot = (0u64, 0u64, 0u64, 0u64);
    let mut per_round = Vec::new();
    for l in &record.ledgers {
        let mut rt = (0u64, 0u64);
        for r in l.reports.iter().filter(|r| r.strategy == strategy) {
            let o = &r.outcome;
            rt.0 += u64::from(o.outranked);
            rt.1 += u64::from(o.pairings_used);
            if l.round >= from_round {
                tot.0 += u64::from(o.outranked);
                tot.1 += u64::from(o.pairings_used);
                tot.2 += u64::from(o.outranked_on_mismatch);
                tot.3 += u64::from(o.pairings_used - u32::from(o.matched));
            }
        }
        per_round.push(if rt.1 > 0 { rt.0 as f64 / rt.1 as f64 } else { f64::NAN });
    }
    (tot.1 > 0).then(|| OutrankRate {
        strategy,
        r: tot.0 as f64 / tot.1 as f64,
        r_on_mismatch: if tot.3 > 0 { tot.2 as f64 / tot.3 as f64 } else { f64::NAN },
        per_round,
    })
}

/// Symmetric beliefs of a trustworthy agent in a population of trustworthy
/// and uniformly random reporters under a uniform truth prior, with the
/// given outrank probability. `None` for other setups.
pub fn implied_beliefs(cfg: &SimConfig, r: f64) -> Option<BeliefModel> {
    let k = cfg.tasks.answers as usize;
    if k < 2 || cfg.tasks.truth_prior.as_ref().is_some_and(|p| p.iter().any(|x| (x - p[0]).abs() > 1e-12)) {
        return None;
    }
    let total: f64 = cfg.population.mix.iter().map(|e| e.fraction).sum();
    let mut own = None;
    let mut agree = 0.0;
    for e in &cfg.population.mix {
        let w = e.fraction / total;
        match &e.strategy {
            Strategy::Trustworthy { accuracy, .. } => {
                let a = *own.get_or_insert(*accuracy);
                agree += w * (a * accuracy + (1.0 - a) * (1.0 - accuracy) / (k - 1) as f64);
            }
            Strategy::Random { prior: None, .. } => agree += w / k as f64,
            _ => return None,
        }
    }
    own?;
    Some(BeliefModel::symmetric(k, agree, r.clamp(0.0, 1.0), cfg.sample_size(), cfg.mechanism.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub answer: AnswerId,
    pub bin: usize,
    pub omega_low: f64,
    pub omega_high: f64,
    pub count: usize,
    pub mean_reward: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Pass when no adjacent pair of bins shows a significant decrease.
    pub verdict: Verdict,
    /// Whether the lowest and highest bins differ significantly for some answer.
    pub distinguishable: bool,
    pub table: Vec<BinRow>,
}

/// Groups trustworthy reports after `from_round` by answer and by quantile
/// bin of their reputation before the round, then tests that mean reward
/// does not fall from one bin to the next (one-sided, family-wise 5%).
///
/// The pre-round reputation is used so that the bin does not include the
/// current round's own match.
pub fn qualitative_fairness_test(
    record: &ExperimentRecord,
    bins: usize,
    from_round: u32,
) -> Result<FairnessReport, MetricsError> {
    if bins < 2 {
        return Err(MetricsError::Bins(bins));
    }
    let reports: Vec<&ReportRecord> = record
        .ledgers
        .iter()
        .filter(|l| l.round >= from_round)
        .flat_map(|l| l.reports.iter())
        .filter(|r| r.strategy == StrategyKind::Trustworthy)
        .collect();
    if reports.is_empty() {
        return Err(MetricsError::NoTrustworthyReports);
    }
    let mut omegas: Vec<f64> = reports.iter().map(|r| r.omega_before).collect();
    omegas.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (0..=bins).map(|b| percentile(&omegas, b as f64 / bins as f64)).collect();
    let bin_of = |w: f64| edges[1..bins].iter().take_while(|&&e| w > e).count();

    let answers = record.config.tasks.answers as usize;
    let mut groups: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); bins]; answers];
    for r in &reports {
        groups[r.report.answer.index()][bin_of(r.omega_before)].push(r.outcome.reward);
    }
    let mut table = Vec::new();
    for (a, row) in groups.iter().enumerate() {
        for (b, xs) in row.iter().enumerate() {
            let (m, se) = if xs.is_empty() { (f64::NAN, f64::INFINITY) } else { mean_se(xs) };
            table.push(BinRow {
                answer: AnswerId(a as u16),
                bin: b,
                omega_low: edges[b],
                omega_high: edges[b + 1],
                count: xs.len(),
                mean_reward: m,
                se,
            });
        }
    }
    let populated: Vec<&[BinRow]> = table.chunks(bins).filter(|c| c.iter().any(|r| r.count > 0)).collect();
    let enough = populated.iter().all(|c| c.iter().all(|r| r.count >= MIN_BIN_SAMPLES));
    let tests = populated.len() * (bins - 1);
    let z_one = z_quantile(1.0 - 0.05 / tests.max(1) as f64);
    let z_two = z_quantile(1.0 - 0.025 / populated.len().max(1) as f64);
    let z = |lo: &BinRow, hi: &BinRow| (hi.mean_reward - lo.mean_reward) / (lo.se.powi(2) + hi.se.powi(2)).sqrt();
    let decreasing = populated.iter().any(|c| c.windows(2).any(|w| z(&w[0], &w[1]) < -z_one));
    let distinguishable = populated.iter().any(|c| z(&c[0], &c[bins - 1]).abs() > z_two);
    let verdict = if !enough {
        Verdict::Inconclusive
    } else if decreasing {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(FairnessReport { verdict, distinguishable, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetComparison {
    pub reform_per_agent: f64,
    pub rptsc_per_agent: f64,
    /// Relative overhead in reward units.
    pub raw_overhead: f64,
    /// Relative overhead after dividing each budget by its α.
    pub normalized_overhead: f64,
}

/// Mean budget per agent per round.
pub fn per_agent_budget(record: &ExperimentRecord) -> f64 {
    let reports: usize = record.ledgers.iter().map(|l| l.reports.len()).sum();
    record.ledgers.iter().map(|l| l.budget).sum::<f64>() / reports.max(1) as f64
}

pub fn budget_comparison(reform: &ExperimentRecord, rptsc: &ExperimentRecord) -> BudgetComparison {
    let a = per_agent_budget(reform);
    let b = per_agent_budget(rptsc);
    let an = a / reform.config.mechanism.alpha;
    let bn = b / rptsc.config.mechanism.alpha;
    BudgetComparison {
        reform_per_agent: a,
        rptsc_per_agent: b,
        raw_overhead: (a - b) / b,
        normalized_overhead: (an - bn) / bn,
    }
}

/// Effort costs used for utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub high: f64,
    pub low: f64,
}

impl Default for Costs {
    fn default() -> Self {
        Self { high: 1.0, low: 0.0 }
    }
}

impl Costs {
    pub fn of(&self, high_effort: bool) -> f64 {
        if high_effort {
            self.high
        } else {
            self.low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// Mean per-round utility of the deviant minus that of the same agent
    /// playing trustworthy, on identical random streams.
    pub mean_gap: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

/// Paired runs in which one agent switches to `deviant`; repeated over
/// `replicates` consecutive seeds. The designated agent is the lowest-id
/// trustworthy agent of each run.
pub fn deviation_probe(
    cfg: &SimConfig,
    deviant: &Strategy,
    replicates: u32,
    costs: Costs,
) -> Result<DeviationReport, SimError> {
    let mut gaps = Vec::new();
    for rep in 0..u64::from(replicates.max(1)) {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(rep) & (i64::MAX as u64);
        let base = run_with_overrides(&c, &[])?;
        let Some(id) = base.ledgers[0]
            .reports
            .iter()
            .find(|r| r.strategy == StrategyKind::Trustworthy)
            .map(|r| r.report.agent)
        else {
            return Err(MetricsError::NoTrustworthyReports.into());
        };
        let dev = run_with_overrides(&c, &[(id, deviant.clone())])?;
        let utility = |rec: &ExperimentRecord, l: usize| {
            let r = &rec.ledgers[l].reports[id.0 as usize];
            debug_assert_eq!(r.report.agent, AgentId(id.0));
            r.outcome.reward - costs.of(r.high_effort)
        };
        gaps.extend((0..base.ledgers.len()).map(|l| utility(&dev, l) - utility(&base, l)));
    }
    let (m, se) = mean_se(&gaps);
    let se = if se.is_finite() { se } else { 0.0 };
    Ok(DeviationReport { mean_gap: m, se, ci_low: m - 1.96 * se, ci_high: m + 1.96 * se, samples: gaps.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean_reward: f64,
    pub mean_raw_score: f64,
    pub mean_normalized_score: f64,
    pub mean_omega: f64,
}

fn summarize(record: &ExperimentRecord) -> ScoreSummary {
    let all: Vec<&ReportRecord> = record.ledgers.iter().flat_map(|l| l.reports.iter()).collect();
    let avg = |f: &dyn Fn(&ReportRecord) -> f64| all.iter().map(|r| f(r)).sum::<f64>() / all.len().max(1) as f64;
    ScoreSummary {
        mean_reward: avg(&|r| r.outcome.reward),
        mean_raw_score: avg(&|r| r.raw_score),
        mean_normalized_score: avg(&|r| r.normalized_score),
        mean_omega: avg(&|r| r.omega),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollusionReport {
    pub colluding: ScoreSummary,
    pub truthful: ScoreSummary,
}

/// Runs `cfg` once with every agent reporting answer 0 and once with every
/// agent trustworthy, both on the trustworthy solve-time distribution.
pub fn collusion_probe(cfg: &SimConfig) -> Result<CollusionReport, SimError> {
    let truthful_strategy = cfg
        .population
        .mix
        .iter()
        .find(|e| matches!(e.strategy, Strategy::Trustworthy { .. }))
        .map(|e| e.strategy.clone())
        .unwrap_or_else(|| Strategy::trustworthy(0.9));
    let time = match &truthful_strategy {
        Strategy::Trustworthy { solve_time, .. } => *solve_time,
        _ => unreachable!(),
    };
    let with_mix = |s: Strategy| {
        let mut c = cfg.clone();
        c.population.mix = vec![MixEntry { fraction: 1.0, strategy: s }];
        c
    };
    let colluding = run_with_overrides(
        &with_mix(Strategy::SingleReport { fixed_answer: AnswerId(0), report_time: time }),
        &[],
    )?;
    let truthful = run_with_overrides(&with_mix(truthful_strategy), &[])?;
    Ok(CollusionReport { colluding: summarize(&colluding), truthful: summarize(&truthful) })
}
