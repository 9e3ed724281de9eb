//! k-chance peer pairing.
//!
//! An agent whose answer disagrees with its peer gets another pairing only
//! when its reputation strictly exceeds the peer's. A match pays the scheme's
//! match branch and stops; a mismatch against an equal or better-reputed peer,
//! or on the last chance, pays the mismatch branch. With `k = 1` the loop is
//! exactly the underlying scheme, which [`settle_single`] also computes
//! directly.

use rand::Rng;

use crate::error::PairingError;
use crate::model::{AnswerId, RewardOutcome};
use crate::reward::{apply_decay, DecayFactor, FrequencySample, PeerFactorScheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerView {
    pub answer: AnswerId,
    pub omega: f64,
}

/// Supplies independent uniform peer draws for one report.
pub trait PeerSource {
    fn draw(&mut self, rng: &mut dyn rand::RngCore) -> Result<PeerView, PairingError>;
}

/// Uniform choice among `members` other than position `own`.
pub fn select_peer<R: Rng + ?Sized>(members: usize, own: usize, rng: &mut R) -> Result<usize, PairingError> {
    if members < 2 {
        return Err(PairingError::NoPeer(members));
    }
    let pick = rng.gen_range(0..members - 1);
    Ok(if pick >= own { pick + 1 } else { pick })
}

/// The other reports of one task, viewed through a frozen reputation snapshot.
#[derive(Debug, Clone, Copy)]
pub struct TaskPeers<'a> {
    /// Report indices submitted for the task, the agent's own included.
    pub members: &'a [usize],
    /// Position of the agent's own report inside `members`.
    pub own: usize,
    /// Answer of every report in the round, by report index.
    pub answers: &'a [AnswerId],
    /// Reputation of every report's author, by report index.
    pub omegas: &'a [f64],
}

impl PeerSource for TaskPeers<'_> {
    fn draw(&mut self, rng: &mut dyn rand::RngCore) -> Result<PeerView, PairingError> {
        let pos = select_peer(self.members.len(), self.own, rng)?;
        let idx = self.members[pos];
        Ok(PeerView { answer: self.answers[idx], omega: self.omegas[idx] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingInput {
    pub answer: AnswerId,
    pub time: f64,
    pub omega: f64,
}

fn settle(
    input: &PairingInput,
    peer: PeerView,
    scheme: &dyn PeerFactorScheme,
    freq: &FrequencySample,
) -> (bool, f64) {
    let matched = input.answer == peer.answer;
    let f = freq.freq_with_peer(input.answer, peer.answer);
    (matched, if matched { scheme.on_match(f) } else { scheme.on_mismatch(f) })
}

/// Runs up to `k` pairings for one report.
pub fn run_pairing(
    input: &PairingInput,
    peers: &mut dyn PeerSource,
    scheme: &dyn PeerFactorScheme,
    decay: &DecayFactor,
    freq: &FrequencySample,
    k: u32,
    rng: &mut dyn rand::RngCore,
) -> Result<RewardOutcome, PairingError> {
    if k == 0 {
        return Err(PairingError::ZeroChances);
    }
    let mut outranked = 0;
    let mut outranked_on_mismatch = 0;
    for l in 1..=k {
        let peer = peers.draw(rng)?;
        let above = input.omega > peer.omega;
        outranked += u32::from(above);
        let (matched, value) = settle(input, peer, scheme, freq);
        if !matched {
            outranked_on_mismatch += u32::from(above);
        }
        if matched || !above || l == k {
            return Ok(RewardOutcome {
                reward: apply_decay(value, input.time, decay),
                pairings_used: l,
                matched,
                penalized: !matched,
                outranked,
                outranked_on_mismatch,
            });
        }
    }
    unreachable!("loop returns on the last chance")
}

/// One pairing under the bare scheme.
pub fn settle_single(
    input: &PairingInput,
    peers: &mut dyn PeerSource,
    scheme: &dyn PeerFactorScheme,
    decay: &DecayFactor,
    freq: &FrequencySample,
    rng: &mut dyn rand::RngCore,
) -> Result<RewardOutcome, PairingError> {
    let peer = peers.draw(rng)?;
    let above = u32::from(input.omega > peer.omega);
    let (matched, value) = settle(input, peer, scheme, freq);
    Ok(RewardOutcome {
        reward: apply_decay(value, input.time, decay),
        pairings_used: 1,
        matched,
        penalized: !matched,
        outranked: above,
        outranked_on_mismatch: if matched { 0 } else { above },
    })
}
