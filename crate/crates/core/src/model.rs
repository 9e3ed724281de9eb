//! Domain vocabulary shared by every stage of the pipeline: answers, tasks,
//! agents, reports and the behavioural strategies that generate reports.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub u32);

/// Dense index into an [`AnswerSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerId(pub u16);

impl AnswerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered, finite set of distinct answer labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpace {
    labels: Vec<String>,
}

impl AnswerSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ModelError::EmptyAnswerSpace);
        }
        if labels.len() > u16::MAX as usize {
            return Err(ModelError::AnswerSpaceTooLarge(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(ModelError::DuplicateAnswer(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// `0..len` labelled by their decimal index.
    pub fn numbered(len: usize) -> Result<Self, ModelError> {
        Self::new((0..len).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, answer: AnswerId) -> bool {
        answer.index() < self.labels.len()
    }

    pub fn label(&self, answer: AnswerId) -> Option<&str> {
        self.labels.get(answer.index()).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = AnswerId> {
        (0..self.labels.len() as u16).map(AnswerId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub true_answer: AnswerId,
    pub deadline: f64,
}

/// Report time drawn uniformly from `[lo, hi] * deadline`.
///
/// Both bounds are fractions of the task deadline with `0 < lo <= hi <= 1`,
/// so sampled times always land in `(0, deadline]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDist {
    pub lo: f64,
    pub hi: f64,
}

impl TimeDist {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Default solve time of a trustworthy agent.
    pub const SOLVE: TimeDist = TimeDist::new(0.5, 1.0);
    /// Early reporting, used to stress the temporal side of the mechanism.
    pub const EARLY: TimeDist = TimeDist::new(0.05, 0.2);

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo > 0.0
            && self.lo <= self.hi
            && self.hi <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::TimeDist { lo: self.lo, hi: self.hi })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, deadline: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let frac = self.lo + (self.hi - self.lo) * u;
        (frac * deadline).clamp(f64::MIN_POSITIVE, deadline)
    }
}

/// Behavioural strategy of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Strategy {
    /// High effort; reports its evaluation, which is correct with probability
    /// `accuracy` and otherwise uniform over the remaining answers.
    Trustworthy { accuracy: f64, solve_time: TimeDist },
    /// Low effort; reports a draw from `prior` (uniform when absent).
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<Vec<f64>>,
        report_time: TimeDist,
    },
    /// Low effort; always reports the same answer.
    SingleReport { fixed_answer: AnswerId, report_time: TimeDist },
    /// High effort, but reports an answer other than its evaluation
    /// (the next answer in the space, cyclically).
    Misreport { accuracy: f64, solve_time: TimeDist },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Trustworthy,
    Random,
    SingleReport,
    Misreport,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Trustworthy,
        StrategyKind::Random,
        StrategyKind::SingleReport,
        StrategyKind::Misreport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Trustworthy => "trustworthy",
            StrategyKind::Random => "random",
            StrategyKind::SingleReport => "single-report",
            StrategyKind::Misreport => "misreport",
        }
    }

    /// Short tag used in tables (`TA`, `RA`, ...).
    pub fn tag(self) -> &'static str {
        match self {
            StrategyKind::Trustworthy => "TA",
            StrategyKind::Random => "RA",
            StrategyKind::SingleReport => "SR",
            StrategyKind::Misreport => "MR",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Strategy {
    pub fn trustworthy(accuracy: f64) -> Self {
        Strategy::Trustworthy { accuracy, solve_time: TimeDist::SOLVE }
    }

    pub fn random(report_time: TimeDist) -> Self {
        Strategy::Random { prior: None, report_time }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Trustworthy { .. } => StrategyKind::Trustworthy,
            Strategy::Random { .. } => StrategyKind::Random,
            Strategy::SingleReport { .. } => StrategyKind::SingleReport,
            Strategy::Misreport { .. } => StrategyKind::Misreport,
        }
    }

    /// Whether the strategy pays the high-effort cost.
    pub fn high_effort(&self) -> bool {
        matches!(self, Strategy::Trustworthy { .. } | Strategy::Misreport { .. })
    }

    pub fn validate(&self, answers: &AnswerSpace) -> Result<(), ModelError> {
        match self {
            Strategy::Trustworthy { accuracy, solve_time }
            | Strategy::Misreport { accuracy, solve_time } => {
                if !(0.0..=1.0).contains(accuracy) {
                    return Err(ModelError::Accuracy(*accuracy));
                }
                solve_time.validate()
            }
            Strategy::Random { prior, report_time } => {
                if let Some(p) = prior {
                    validate_distribution(p, answers.len())?;
                }
                report_time.validate()
            }
            Strategy::SingleReport { fixed_answer, report_time } => {
                if !answers.contains(*fixed_answer) {
                    return Err(ModelError::UnknownAnswer(*fixed_answer));
                }
                report_time.validate()
            }
        }
    }

    /// Draws the (answer, time) pair this strategy submits for `task`.
    pub fn report<R: Rng + ?Sized>(
        &self,
        task: &Task,
        answers: &AnswerSpace,
        rng: &mut R,
    ) -> (AnswerId, f64) {
        let n = answers.len();
        match self {
            Strategy::Trustworthy { accuracy, solve_time } => {
                let eval = noisy_evaluation(task.true_answer, *accuracy, n, rng);
                (eval, solve_time.sample(task.deadline, rng))
            }
            Strategy::Misreport { accuracy, solve_time } => {
                let eval = noisy_evaluation(task.true_answer, *accuracy, n, rng);
                let lie = AnswerId(((eval.index() + 1) % n) as u16);
                (lie, solve_time.sample(task.deadline, rng))
            }
            Strategy::Random { prior, report_time } => {
                let answer = match prior {
                    Some(p) => sample_categorical(p, rng),
                    None => AnswerId(rng.gen_range(0..n) as u16),
                };
                (answer, report_time.sample(task.deadline, rng))
            }
            Strategy::SingleReport { fixed_answer, report_time } => {
                (*fixed_answer, report_time.sample(task.deadline, rng))
            }
        }
    }
}

fn noisy_evaluation<R: Rng + ?Sized>(truth: AnswerId, accuracy: f64, n: usize, rng: &mut R) -> AnswerId {
    if n == 1 || rng.gen::<f64>() < accuracy {
        return truth;
    }
    // uniform over the n - 1 wrong answers
    let mut pick = rng.gen_range(0..n - 1);
    if pick >= truth.index() {
        pick += 1;
    }
    AnswerId(pick as u16)
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> AnswerId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return AnswerId(i as u16);
        }
    }
    // rounding slack lands on the last non-zero entry
    let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1);
    AnswerId(last as u16)
}

pub(crate) fn validate_distribution(p: &[f64], len: usize) -> Result<(), ModelError> {
    if p.len() != len {
        return Err(ModelError::DistributionLength { expected: len, got: p.len() });
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(ModelError::NegativeProbability);
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::DistributionSum(sum));
    }
    Ok(())
}

/// Per-agent state carried across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub strategy: Strategy,
    /// Normalized round-scores, most recent last.
    pub history: Vec<f64>,
    pub cumulative_score: f64,
    pub term_score: f64,
    pub last_term_round: Option<u32>,
}

impl AgentState {
    /// Fresh agent with an empty history. Its reputation starts at the
    /// Gompertz value of a zero cumulative score.
    pub fn new(id: AgentId, strategy: Strategy, initial_term_score: f64) -> Self {
        Self {
            id,
            strategy,
            history: Vec::new(),
            cumulative_score: 0.0,
            term_score: initial_term_score,
            last_term_round: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub agent: AgentId,
    pub task: TaskId,
    pub round: u32,
    pub answer: AnswerId,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub reward: f64,
    pub pairings_used: u32,
    pub matched: bool,
    pub penalized: bool,
    /// Pairings in which the agent's reputation strictly exceeded the peer's.
    pub outranked: u32,
    /// The subset of `outranked` where the answers disagreed.
    pub outranked_on_mismatch: u32,
}
