//! Peer-factor reward schemes, time decay and frequency sampling.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::RewardError;
use crate::model::AnswerId;

/// A peer-prediction reward rule, split into its match and mismatch branches
/// so the k-chance pairing loop can choose between them.
pub trait PeerFactorScheme: Send + Sync {
    fn name(&self) -> &'static str;
    /// Reward when the answers agree; `freq` includes the paired peer's report.
    fn on_match(&self, freq: f64) -> f64;
    /// Reward when they disagree; `freq` is the agent's answer frequency.
    fn on_mismatch(&self, freq: f64) -> f64;

    fn peer_factor(&self, matched: bool, freq: f64) -> f64 {
        if matched {
            self.on_match(freq)
        } else {
            self.on_mismatch(freq)
        }
    }
}

/// `α(1/f - 1)` on a match, `-α` on a mismatch, `0` when the answer was not
/// seen in the sample at all.
pub fn rptsc_peer_factor(matched: bool, freq: f64, alpha: f64) -> f64 {
    if freq <= 0.0 {
        0.0
    } else if matched {
        alpha * (1.0 / freq - 1.0)
    } else {
        -alpha
    }
}

pub fn output_agreement_peer_factor(matched: bool, alpha: f64) -> f64 {
    if matched {
        alpha
    } else {
        0.0
    }
}

pub fn pts_peer_factor(matched: bool, freq: f64, alpha: f64) -> f64 {
    if matched && freq > 0.0 {
        alpha / freq
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rptsc {
    pub alpha: f64,
}

impl PeerFactorScheme for Rptsc {
    fn name(&self) -> &'static str {
        "rptsc"
    }
    fn on_match(&self, freq: f64) -> f64 {
        rptsc_peer_factor(true, freq, self.alpha)
    }
    fn on_mismatch(&self, freq: f64) -> f64 {
        rptsc_peer_factor(false, freq, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputAgreement {
    pub alpha: f64,
}

impl PeerFactorScheme for OutputAgreement {
    fn name(&self) -> &'static str {
        "output-agreement"
    }
    fn on_match(&self, _freq: f64) -> f64 {
        output_agreement_peer_factor(true, self.alpha)
    }
    fn on_mismatch(&self, _freq: f64) -> f64 {
        output_agreement_peer_factor(false, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pts {
    pub alpha: f64,
}

impl PeerFactorScheme for Pts {
    fn name(&self) -> &'static str {
        "pts"
    }
    fn on_match(&self, freq: f64) -> f64 {
        pts_peer_factor(true, freq, self.alpha)
    }
    fn on_mismatch(&self, freq: f64) -> f64 {
        pts_peer_factor(false, freq, self.alpha)
    }
}

/// Multiplier applied to a reward according to report time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DecayFactor {
    #[default]
    Constant,
    /// `exp(-rate · t)`.
    Exponential { rate: f64 },
    /// `1 - slope · t`.
    Linear { slope: f64 },
}

impl DecayFactor {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            DecayFactor::Constant => 1.0,
            DecayFactor::Exponential { rate } => (-rate * t).exp(),
            DecayFactor::Linear { slope } => 1.0 - slope * t,
        }
    }

    /// Checks the factor stays in `(0, 1]` over `[0, deadline]`.
    pub fn validate(&self, deadline: f64) -> Result<(), String> {
        match *self {
            DecayFactor::Constant => Ok(()),
            DecayFactor::Exponential { rate } if rate.is_finite() && rate >= 0.0 => Ok(()),
            DecayFactor::Exponential { rate } => Err(format!("exponential rate must be ≥ 0, got {rate}")),
            DecayFactor::Linear { slope } if slope >= 0.0 && slope * deadline < 1.0 => Ok(()),
            DecayFactor::Linear { slope } => {
                Err(format!("linear slope {slope} drives the factor to 0 before the deadline {deadline}"))
            }
        }
    }
}

pub fn apply_decay(value: f64, t: f64, decay: &DecayFactor) -> f64 {
    value * decay.factor(t)
}

impl fmt::Display for DecayFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayFactor::Constant => f.write_str("constant"),
            DecayFactor::Exponential { rate } => write!(f, "exp:{rate}"),
            DecayFactor::Linear { slope } => write!(f, "linear:{slope}"),
        }
    }
}

impl FromStr for DecayFactor {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RewardError::Decay(s.to_string());
        let s_trim = s.trim();
        if s_trim == "constant" {
            return Ok(DecayFactor::Constant);
        }
        let (kind, arg) = s_trim.split_once(':').ok_or_else(bad)?;
        let v: f64 = arg.trim().parse().map_err(|_| bad())?;
        if !v.is_finite() {
            return Err(bad());
        }
        match kind.trim() {
            "exp" => Ok(DecayFactor::Exponential { rate: v }),
            "linear" => Ok(DecayFactor::Linear { slope: v }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for DecayFactor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DecayFactor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Answer counts over one randomly chosen report from each sampled task other
/// than the agent's own.
///
/// The frequency used for a pairing adds the paired peer's report to these
/// counts, so the denominator is `sampled + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySample {
    counts: Vec<u32>,
    sampled: u32,
}

impl FrequencySample {
    pub fn from_counts(counts: Vec<u32>) -> Self {
        let sampled = counts.iter().sum();
        Self { counts, sampled }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn sampled(&self) -> u32 {
        self.sampled
    }

    /// Reports behind each frequency: the sample plus the paired peer.
    pub fn total(&self) -> u32 {
        self.sampled + 1
    }

    fn count(&self, answer: AnswerId) -> u32 {
        self.counts.get(answer.index()).copied().unwrap_or(0)
    }

    /// Frequency of `answer` once the peer's report is pooled in.
    pub fn freq_with_peer(&self, answer: AnswerId, peer_answer: AnswerId) -> f64 {
        let c = self.count(answer) + u32::from(answer == peer_answer);
        f64::from(c) / f64::from(self.total())
    }

    /// Frequency of `answer` assuming the peer agrees with it.
    pub fn matched_freq(&self, answer: AnswerId) -> f64 {
        f64::from(self.count(answer) + 1) / f64::from(self.total())
    }
}

/// Draws one report uniformly from each of `sample_size - 1` distinct tasks
/// other than `target_task` and counts their answers.
///
/// `reports_by_task[t]` lists the answers submitted for task `t`. When
/// `sample_size` equals the number of tasks every other task is used.
pub fn sample_frequency<R: Rng + ?Sized>(
    reports_by_task: &[Vec<AnswerId>],
    target_task: usize,
    sample_size: usize,
    n_answers: usize,
    rng: &mut R,
) -> Result<FrequencySample, RewardError> {
    let n = reports_by_task.len();
    if n < 2 || sample_size < 2 {
        return Err(RewardError::TooFewTasks(n.min(sample_size)));
    }
    if sample_size > n {
        return Err(RewardError::SampleTooLarge { requested: sample_size, available: n });
    }
    let mut counts = vec![0u32; n_answers];
    let mut draw = |task: usize, rng: &mut R| -> Result<(), RewardError> {
        let reports = &reports_by_task[task];
        if reports.is_empty() {
            return Err(RewardError::EmptyTask(crate::model::TaskId(task as u32)));
        }
        let a = reports[rng.gen_range(0..reports.len())];
        counts[a.index()] += 1;
        Ok(())
    };
    if sample_size == n {
        for task in (0..n).filter(|&t| t != target_task) {
            draw(task, rng)?;
        }
    } else {
        for i in index::sample(rng, n - 1, sample_size - 1).into_iter() {
            let task = if i >= target_task { i + 1 } else { i };
            draw(task, rng)?;
        }
    }
    Ok(FrequencySample::from_counts(counts))
}
