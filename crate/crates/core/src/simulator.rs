//! Round-based simulation engine.
//!
//! Each round: draw tasks, assign every agent to one task, collect reports,
//! score them for reputation against a random co-worker, normalize the round
//! and update reputations, then settle rewards against the updated (frozen)
//! reputations. Per-report work runs on the rayon pool; every draw comes from
//! a substream keyed by round, agent and purpose, and results are gathered in
//! agent order, so the thread count never changes the output.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{strategy_counts, validate_config, SimConfig};
use crate::error::SimError;
use crate::model::{sample_categorical, AgentId, AgentState, AnswerId, AnswerSpace, Report, RewardOutcome, Strategy, StrategyKind, Task, TaskId};
use crate::reform::{run_pairing, select_peer, settle_single, PairingInput, TaskPeers};
use crate::reward::{sample_frequency, PeerFactorScheme};
use crate::rng::{Purpose, RngPolicy};
use crate::term::{normalize_round, round_score, RoundScoreTable};

/// Everything recorded about one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report: Report,
    pub strategy: StrategyKind,
    pub high_effort: bool,
    pub correct: bool,
    /// Reputation before this round's update.
    pub omega_before: f64,
    /// Reputation used for settlement.
    pub omega: f64,
    pub raw_score: f64,
    pub normalized_score: f64,
    /// Answer frequency the report would see if its peer matched.
    pub match_freq: f64,
    pub outcome: RewardOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: StrategyKind,
    pub count: u32,
    pub total_reward: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub round: u32,
    /// One record per agent, in agent order.
    pub reports: Vec<ReportRecord>,
    pub scores: RoundScoreTable,
    /// Sum of all rewards paid; penalties count negative.
    pub budget: f64,
    pub aggregates: Vec<StrategyAggregate>,
}

impl RoundLedger {
    pub fn aggregate(&self, kind: StrategyKind) -> Option<&StrategyAggregate> {
        self.aggregates.iter().find(|a| a.strategy == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: SimConfig,
    pub ledgers: Vec<RoundLedger>,
}

/// `m` agents in the configured proportions, strategies shuffled over ids.
pub fn build_population(cfg: &SimConfig, policy: &RngPolicy) -> Vec<AgentState> {
    let counts = strategy_counts(cfg);
    let mut strategies: Vec<Strategy> = cfg
        .population
        .mix
        .iter()
        .zip(counts)
        .flat_map(|(e, c)| std::iter::repeat_n(e.strategy.clone(), c as usize))
        .collect();
    strategies.shuffle(&mut policy.stream(0, 0, Purpose::Population));
    let omega0 = cfg.term.initial_score();
    strategies
        .into_iter()
        .enumerate()
        .map(|(i, s)| AgentState::new(AgentId(i as u32), s, omega0))
        .collect()
}

pub fn generate_tasks(cfg: &SimConfig, round: u32, policy: &RngPolicy) -> Vec<Task> {
    let prior = cfg.truth_prior();
    (0..cfg.tasks.per_round)
        .map(|t| Task {
            id: TaskId(t),
            true_answer: sample_categorical(&prior, &mut policy.stream(round, t, Purpose::TaskTruth)),
            deadline: cfg.tasks.deadline,
        })
        .collect()
}

/// Task index for each of `agents`: `agents / tasks` per task, leftovers one
/// per task along a shuffled task order, slots shuffled over agents.
pub fn assign_tasks(agents: usize, tasks: usize, round: u32, policy: &RngPolicy) -> Vec<usize> {
    let mut rng = policy.stream(round, 0, Purpose::Assignment);
    let base = agents / tasks;
    let mut order: Vec<usize> = (0..tasks).collect();
    order.shuffle(&mut rng);
    let mut slots: Vec<usize> = (0..tasks).flat_map(|t| std::iter::repeat_n(t, base)).collect();
    slots.extend(order.into_iter().take(agents % tasks));
    slots.shuffle(&mut rng);
    slots
}

pub fn assign_and_report(
    population: &[AgentState],
    tasks: &[Task],
    round: u32,
    answers: &AnswerSpace,
    policy: &RngPolicy,
    min_per_task: usize,
) -> Result<Vec<Report>, SimError> {
    if population.len() < tasks.len() * min_per_task.max(2) {
        return Err(crate::error::ConfigError::TooFewAgents {
            agents: population.len() as u32,
            tasks: tasks.len() as u32,
            per_task: min_per_task.max(2) as u32,
        }
        .into());
    }
    let slots = assign_tasks(population.len(), tasks.len(), round, policy);
    Ok(population
        .par_iter()
        .zip(slots.par_iter())
        .map(|(agent, &t)| {
            let task = &tasks[t];
            let mut rng = policy.stream(round, agent.id.0, Purpose::Report);
            let (answer, time) = agent.strategy.report(task, answers, &mut rng);
            Report { agent: agent.id, task: task.id, round, answer, time }
        })
        .collect())
}

pub struct Simulation {
    cfg: SimConfig,
    answers: AnswerSpace,
    scheme: Box<dyn PeerFactorScheme>,
    population: Vec<AgentState>,
    policy: RngPolicy,
    next_round: u32,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        Self::with_overrides(cfg, &[])
    }

    /// Like [`Simulation::new`] with the strategies of some agents replaced.
    pub fn with_overrides(cfg: &SimConfig, overrides: &[(AgentId, Strategy)]) -> Result<Self, SimError> {
        let cfg = validate_config(cfg)?;
        let answers = cfg.answer_space();
        let policy = RngPolicy::new(cfg.seed);
        let mut population = build_population(&cfg, &policy);
        for (id, s) in overrides {
            s.validate(&answers).map_err(|source| crate::error::ConfigError::Strategy { index: id.0 as usize, source })?;
            if let Some(a) = population.get_mut(id.0 as usize) {
                a.strategy = s.clone();
            }
        }
        let scheme = cfg.mechanism.name.scheme(cfg.mechanism.alpha);
        Ok(Self { cfg, answers, scheme, population, policy, next_round: 0 })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn population(&self) -> &[AgentState] {
        &self.population
    }

    pub fn run_round(&mut self) -> Result<RoundLedger, SimError> {
        let round = self.next_round;
        let cfg = &self.cfg;
        let policy = &self.policy;
        let tasks = generate_tasks(cfg, round, policy);
        let reports = assign_and_report(
            &self.population,
            &tasks,
            round,
            &self.answers,
            policy,
            cfg.population.agents_per_task as usize,
        )?;

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tasks.len()];
        let mut own_pos = vec![0usize; reports.len()];
        for (i, r) in reports.iter().enumerate() {
            let m = &mut members[r.task.0 as usize];
            own_pos[i] = m.len();
            m.push(i);
        }
        let by_task: Vec<Vec<AnswerId>> =
            members.iter().map(|m| m.iter().map(|&i| reports[i].answer).collect()).collect();
        let answers: Vec<AnswerId> = reports.iter().map(|r| r.answer).collect();
        let sample_size = cfg.sample_size() as usize;
        let n_answers = self.answers.len();

        // reputation round-scores
        let scored: Vec<_> = reports
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let t = r.task.0 as usize;
                let freq = sample_frequency(
                    &by_task,
                    t,
                    sample_size,
                    n_answers,
                    &mut policy.stream(round, r.agent.0, Purpose::FrequencySample),
                )?;
                let pos = select_peer(members[t].len(), own_pos[i], &mut policy.stream(round, r.agent.0, Purpose::TermPeer))?;
                let peer_answer = answers[members[t][pos]];
                let phi = round_score(r, peer_answer, freq.freq_with_peer(r.answer, peer_answer))?;
                Ok::<_, SimError>((freq, phi))
            })
            .collect::<Result<_, _>>()?;

        let raw: Vec<(AgentId, f64)> = reports.iter().zip(&scored).map(|(r, (_, phi))| (r.agent, *phi)).collect();
        let table = normalize_round(round, &raw)?;
        let omega_before: Vec<f64> = reports.iter().map(|r| self.population[r.agent.0 as usize].term_score).collect();
        for (r, e) in reports.iter().zip(&table.entries) {
            cfg.term.update(&mut self.population[r.agent.0 as usize], round, e.normalized)?;
        }
        let omegas: Vec<f64> = reports.iter().map(|r| self.population[r.agent.0 as usize].term_score).collect();

        // settlement against the frozen snapshot
        let chances = cfg.chances();
        let scheme: &dyn PeerFactorScheme = self.scheme.as_ref();
        let decay = cfg.mechanism.decay;
        let outcomes: Vec<RewardOutcome> = reports
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let t = r.task.0 as usize;
                let mut peers = TaskPeers { members: &members[t], own: own_pos[i], answers: &answers, omegas: &omegas };
                let input = PairingInput { answer: r.answer, time: r.time, omega: omegas[i] };
                let mut rng = policy.stream(round, r.agent.0, Purpose::Pairing);
                let freq = &scored[i].0;
                if cfg.mechanism.name.uses_chances() {
                    run_pairing(&input, &mut peers, scheme, &decay, freq, chances, &mut rng)
                } else {
                    settle_single(&input, &mut peers, scheme, &decay, freq, &mut rng)
                }
            })
            .collect::<Result<_, _>>()?;

        let records: Vec<ReportRecord> = reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let agent = &self.population[r.agent.0 as usize];
                ReportRecord {
                    report: *r,
                    strategy: agent.strategy.kind(),
                    high_effort: agent.strategy.high_effort(),
                    correct: r.answer == tasks[r.task.0 as usize].true_answer,
                    omega_before: omega_before[i],
                    omega: omegas[i],
                    raw_score: scored[i].1,
                    normalized_score: table.entries[i].normalized,
                    match_freq: scored[i].0.matched_freq(r.answer),
                    outcome: outcomes[i],
                }
            })
            .collect();

        let budget = records.iter().map(|r| r.outcome.reward).sum();
        let aggregates = aggregate(&records);
        self.next_round += 1;
        Ok(RoundLedger { round, reports: records, scores: table, budget, aggregates })
    }
}

fn aggregate(records: &[ReportRecord]) -> Vec<StrategyAggregate> {
    StrategyKind::ALL
        .into_iter()
        .filter_map(|kind| {
            let (count, total) = records
                .iter()
                .filter(|r| r.strategy == kind)
                .fold((0u32, 0.0), |(c, s), r| (c + 1, s + r.outcome.reward));
            (count > 0).then(|| StrategyAggregate {
                strategy: kind,
                count,
                total_reward: total,
                mean_reward: total / f64::from(count),
            })
        })
        .collect()
}

/// Runs all rounds on the current rayon pool.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentRecord, SimError> {
    run_with_overrides(cfg, &[])
}

pub fn run_with_overrides(cfg: &SimConfig, overrides: &[(AgentId, Strategy)]) -> Result<ExperimentRecord, SimError> {
    let mut sim = Simulation::with_overrides(cfg, overrides)?;
    let ledgers = (0..sim.cfg.rounds).map(|_| sim.run_round()).collect::<Result<_, _>>()?;
    Ok(ExperimentRecord { config: sim.cfg, ledgers })
}

/// Runs on a dedicated pool of `threads` workers (`None` for the global pool).
pub fn run_experiment_with_threads(cfg: &SimConfig, threads: Option<usize>) -> Result<ExperimentRecord, SimError> {
    match threads {
        None => run_experiment(cfg),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(|| run_experiment(cfg)),
    }
}

/// Worker count from `REFORM_SIM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("REFORM_SIM_THREADS").ok()?.trim().parse().ok().filter(|&t| t > 0)
}
