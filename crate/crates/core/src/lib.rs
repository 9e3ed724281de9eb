//! Reputation-aware peer-prediction rewards for crowdsourcing.
//!
//! Agents report answers to tasks; each report is paid by comparison with a
//! randomly drawn peer report of the same task. A temporal reputation score
//! decides whether an agent that disagrees with its peer is re-paired (up to
//! `k` pairings) or penalized. The crate contains the scoring pieces, closed
//! forms for expected rewards and fairness, a round-based simulator, and the
//! metrics used to evaluate it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod reform;
pub mod reward;
pub mod rng;
pub mod simulator;
pub mod term;

pub use config::{validate_config, Mechanism, SimConfig};
pub use error::{AnalyticsError, ConfigError, IoError, PairingError, RewardError, SimError, TermError};
pub use model::{AgentId, AgentState, AnswerId, AnswerSpace, Report, RewardOutcome, Strategy, TaskId};
