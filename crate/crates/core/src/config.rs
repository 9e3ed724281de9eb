//! Experiment configuration.
//!
//! Serialized as nested sections (`[tasks]`, `[population]`, `[mechanism]`,
//! `[term]`) in TOML or JSON. [`validate_config`] checks every invariant and
//! returns a normalized copy: mix fractions sum to one and `sample_size` is
//! filled in.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ModelError};
use crate::model::{validate_distribution, AnswerSpace, Strategy, TimeDist};
use crate::reward::{DecayFactor, OutputAgreement, PeerFactorScheme, Pts, Rptsc};
use crate::term::{Gompertz, TermModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// RPTSC inside the k-chance pairing loop.
    ReformRptsc,
    /// Plain RPTSC, one pairing.
    Rptsc,
    OutputAgreement,
    Pts,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] =
        [Mechanism::ReformRptsc, Mechanism::Rptsc, Mechanism::OutputAgreement, Mechanism::Pts];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::ReformRptsc => "reform-rptsc",
            Mechanism::Rptsc => "rptsc",
            Mechanism::OutputAgreement => "output-agreement",
            Mechanism::Pts => "pts",
        }
    }

    pub fn uses_chances(self) -> bool {
        matches!(self, Mechanism::ReformRptsc)
    }

    pub fn scheme(self, alpha: f64) -> Box<dyn PeerFactorScheme> {
        match self {
            Mechanism::ReformRptsc | Mechanism::Rptsc => Box::new(Rptsc { alpha }),
            Mechanism::OutputAgreement => Box::new(OutputAgreement { alpha }),
            Mechanism::Pts => Box::new(Pts { alpha }),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mechanism {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub per_round: u32,
    /// Size of the answer space; answers are labelled `0..answers`.
    pub answers: u16,
    pub deadline: f64,
    /// Distribution of true answers; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixEntry {
    pub fraction: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub agents: u32,
    /// Minimum number of agents sharing a task.
    pub agents_per_task: u32,
    pub mix: Vec<MixEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub name: Mechanism,
    pub k: u32,
    pub alpha: f64,
    #[serde(default)]
    pub decay: DecayFactor,
    /// Tasks contributing to the frequency sample, own task included.
    /// Defaults to `tasks.per_round`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub rounds: u32,
    pub tasks: TaskConfig,
    pub population: PopulationConfig,
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub term: TermModel,
}

/// Random agents in the reference setup answer on the same clock as
/// trustworthy ones.
pub const REFERENCE_RANDOM_TIME: TimeDist = TimeDist::SOLVE;

impl Default for SimConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl SimConfig {
    /// 200 rounds, 50 tasks of 3 answers, 750 agents (60% trustworthy at
    /// accuracy 0.9, 40% random), k = 2, α = 11, frequency sample over all tasks.
    pub fn reference() -> Self {
        Self {
            seed: 2024,
            rounds: 200,
            tasks: TaskConfig { per_round: 50, answers: 3, deadline: 1.0, truth_prior: None },
            population: PopulationConfig {
                agents: 750,
                agents_per_task: 2,
                mix: vec![
                    MixEntry { fraction: 0.6, strategy: Strategy::trustworthy(0.9) },
                    MixEntry { fraction: 0.4, strategy: Strategy::random(REFERENCE_RANDOM_TIME) },
                ],
            },
            mechanism: MechanismConfig {
                name: Mechanism::ReformRptsc,
                k: 2,
                alpha: 11.0,
                decay: DecayFactor::Constant,
                sample_size: Some(50),
            },
            term: TermModel::default(),
        }
    }

    /// The plain RPTSC counterpart of `self`: same population and seed,
    /// one pairing, α = `alpha`.
    pub fn baseline(&self, alpha: f64) -> Self {
        let mut b = self.clone();
        b.mechanism.name = Mechanism::Rptsc;
        b.mechanism.k = 1;
        b.mechanism.alpha = alpha;
        b
    }

    pub fn answer_space(&self) -> AnswerSpace {
        AnswerSpace::numbered(self.tasks.answers as usize).expect("validated answer count")
    }

    pub fn truth_prior(&self) -> Vec<f64> {
        match &self.tasks.truth_prior {
            Some(p) => p.clone(),
            None => {
                let n = self.tasks.answers as usize;
                vec![1.0 / n as f64; n]
            }
        }
    }

    pub fn sample_size(&self) -> u32 {
        self.mechanism.sample_size.unwrap_or(self.tasks.per_round)
    }

    /// Effective number of pairings per report.
    pub fn chances(&self) -> u32 {
        if self.mechanism.name.uses_chances() {
            self.mechanism.k
        } else {
            1
        }
    }
}

pub fn validate_config(cfg: &SimConfig) -> Result<SimConfig, ConfigError> {
    let mut out = cfg.clone();
    let m = &cfg.mechanism;
    if m.k < 1 {
        return Err(ConfigError::K);
    }
    let lambda = cfg.term.lambda;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(ConfigError::Lambda(lambda));
    }
    if !(m.alpha > 0.0 && m.alpha.is_finite()) {
        return Err(ConfigError::Alpha(m.alpha));
    }
    if cfg.rounds < 1 {
        return Err(ConfigError::Rounds);
    }
    if cfg.seed > i64::MAX as u64 {
        return Err(ConfigError::Seed);
    }
    let t = &cfg.tasks;
    if t.per_round < 2 {
        return Err(ConfigError::Tasks(t.per_round));
    }
    if t.answers < 1 {
        return Err(ConfigError::Answers(ModelError::EmptyAnswerSpace));
    }
    if !(t.deadline > 0.0 && t.deadline.is_finite()) {
        return Err(ConfigError::Deadline(t.deadline));
    }
    if let Some(p) = &t.truth_prior {
        validate_distribution(p, t.answers as usize).map_err(ConfigError::TruthPrior)?;
    }
    let p = &cfg.population;
    if p.agents_per_task < 2 {
        return Err(ConfigError::AgentsPerTask(p.agents_per_task));
    }
    if u64::from(p.agents) < u64::from(t.per_round) * u64::from(p.agents_per_task) {
        return Err(ConfigError::TooFewAgents {
            agents: p.agents,
            tasks: t.per_round,
            per_task: p.agents_per_task,
        });
    }
    let s = cfg.sample_size();
    if s < 2 || s > t.per_round {
        return Err(ConfigError::SampleSize(s));
    }
    let g: Gompertz = cfg.term.gompertz;
    if !g.is_valid() {
        return Err(ConfigError::Gompertz { a: g.a, b: g.b, c: g.c });
    }
    m.decay.validate(t.deadline).map_err(ConfigError::Decay)?;

    let total: f64 = p.mix.iter().map(|e| e.fraction).sum();
    if p.mix.is_empty()
        || p.mix.iter().any(|e| !(e.fraction >= 0.0 && e.fraction.is_finite()))
        || !(total > 0.0)
    {
        return Err(ConfigError::StrategyMix);
    }
    let answers = cfg.answer_space();
    for (index, e) in p.mix.iter().enumerate() {
        e.strategy.validate(&answers).map_err(|source| ConfigError::Strategy { index, source })?;
    }
    if (total - 1.0).abs() > 1e-12 {
        for e in &mut out.population.mix {
            e.fraction /= total;
        }
    }
    out.mechanism.sample_size = Some(s);
    Ok(out)
}

/// Agents per mix entry: `floor(m · w)` each, remainder to the first
/// trustworthy entry (or the first entry when there is none).
pub fn strategy_counts(cfg: &SimConfig) -> Vec<u32> {
    let m = cfg.population.agents;
    let total: f64 = cfg.population.mix.iter().map(|e| e.fraction).sum();
    let mut counts: Vec<u32> = cfg
        .population
        .mix
        .iter()
        .map(|e| (f64::from(m) * e.fraction / total + 1e-9).floor() as u32)
        .collect();
    let assigned: u32 = counts.iter().sum();
    let target = cfg
        .population
        .mix
        .iter()
        .position(|e| matches!(e.strategy, Strategy::Trustworthy { .. }))
        .unwrap_or(0);
    counts[target] += m.saturating_sub(assigned);
    counts
}
