use thiserror::Error;

use crate::model::{AgentId, AnswerId, TaskId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("answer space must not be empty")]
    EmptyAnswerSpace,
    #[error("answer space has {0} labels, more than fit in an answer id")]
    AnswerSpaceTooLarge(usize),
    #[error("duplicate answer label {0:?}")]
    DuplicateAnswer(String),
    #[error("answer id {} is outside the answer space", .0.0)]
    UnknownAnswer(AnswerId),
    #[error("accuracy ∈ [0,1] required, got {0}")]
    Accuracy(f64),
    #[error("time distribution needs 0 < lo <= hi <= 1, got lo={lo} hi={hi}")]
    TimeDist { lo: f64, hi: f64 },
    #[error("distribution has {got} entries, answer space has {expected}")]
    DistributionLength { expected: usize, got: usize },
    #[error("probabilities must be finite and non-negative")]
    NegativeProbability,
    #[error("probabilities must sum to 1 within 1e-9, got {0}")]
    DistributionSum(f64),
}

/// First violated configuration invariant, named by field.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("k ≥ 1 required")]
    K,
    #[error("λ ∈ (0,1) required, got {0}")]
    Lambda(f64),
    #[error("α > 0 required, got {0}")]
    Alpha(f64),
    #[error("rounds ≥ 1 required")]
    Rounds,
    #[error("tasks_per_round ≥ 2 required, got {0}")]
    Tasks(u32),
    #[error("agents_per_task ≥ 2 required, got {0}")]
    AgentsPerTask(u32),
    #[error("agents ≥ tasks_per_round · agents_per_task required ({agents} < {tasks} · {per_task})")]
    TooFewAgents { agents: u32, tasks: u32, per_task: u32 },
    #[error("sample_size ∈ [2, tasks_per_round] required, got {0}")]
    SampleSize(u32),
    #[error("deadline > 0 required, got {0}")]
    Deadline(f64),
    #[error("gompertz requires a > 0, b < 0, c < 0 (got a={a}, b={b}, c={c})")]
    Gompertz { a: f64, b: f64, c: f64 },
    #[error("decay: {0}")]
    Decay(String),
    #[error("strategy_mix must be non-empty with non-negative fractions and a positive total")]
    StrategyMix,
    #[error("seed must fit in a signed 64-bit integer")]
    Seed,
    #[error("strategy_mix[{index}]: {source}")]
    Strategy { index: usize, source: ModelError },
    #[error("truth_prior: {0}")]
    TruthPrior(ModelError),
    #[error("answers: {0}")]
    Answers(ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TermError {
    #[error("matched report has zero frequency")]
    ZeroFrequency,
    #[error("report time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("round has no scores to normalize")]
    EmptyRound,
    #[error("agent {} already updated in round {round}", agent.0)]
    DoubleUpdate { agent: AgentId, round: u32 },
    #[error("normalized score {0} outside [0,1]")]
    OutOfRange(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("task {} has no reports to sample", .0.0)]
    EmptyTask(TaskId),
    #[error("frequency sample needs at least 2 tasks, got {0}")]
    TooFewTasks(usize),
    #[error("sample of {requested} reports exceeds {available} tasks")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unknown decay descriptor {0:?}")]
    Decay(String),
    #[error("unknown scheme {0:?}")]
    Scheme(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("task needs at least 2 reports for peer selection, got {0}")]
    NoPeer(usize),
    #[error("k ≥ 1 required")]
    ZeroChances,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("prior must be fully mixed: entry {index} = {value}")]
    NotFullyMixed { index: usize, value: f64 },
    #[error("prior: {0}")]
    Prior(ModelError),
    #[error("posterior row {row}: {source}")]
    PosteriorRow { row: usize, source: ModelError },
    #[error("posterior has {got} rows, answer space has {expected}")]
    PosteriorShape { expected: usize, got: usize },
    #[error("r ∈ [0,1] required, got {0}")]
    R(f64),
    #[error("n ≥ 1 required")]
    N,
    #[error("α > 0 required, got {0}")]
    Alpha(f64),
    #[error("β ∈ (0,1] required, got {0}")]
    Beta(f64),
    #[error("optimal reward undefined for q = 0")]
    ZeroProbability,
    #[error("self-predicting condition violated for evaluation {x}, alternative {y}")]
    SelfPredicting { x: usize, y: usize },
    #[error("k ≥ 1 required")]
    K,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("serialize: {0}")]
    Serialize(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("optimal reward is zero, normalized rewards are undefined")]
    ZeroOptimalReward,
    #[error("record has no rounds")]
    EmptyRecord,
    #[error("record has no trustworthy reports")]
    NoTrustworthyReports,
    #[error("at least 2 reputation bins required, got {0}")]
    Bins(usize),
}
