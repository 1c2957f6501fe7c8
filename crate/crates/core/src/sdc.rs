//! Secure dense coding over a W state.
//!
//! Alice holds qubit 1 of `W_{N+1}` and users `1..=N` hold qubits `2..=N+1`.
//! She encodes a Pauli op on qubit 1 and hands it to one receiver, who
//! Bell-measures it together with his own qubit. Every other user (a
//! bystander) measures in the computational basis. The round succeeds only
//! when all bystander bits are 0; then the Bell outcome identifies the op.
//! With three parties the success probability is 2/3.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bellmeas::measure_bell;
use crate::canon::{w_n, BellOutcome, PauliOp, Posterior};
use crate::error::{QError, Result};
use crate::qstate::{QubitId, StateVector, PROB_FLOOR};

pub const MIN_USERS: usize = 2;
pub const MAX_USERS: usize = 11;

/// A receiving user, numbered from 1. User `k` holds qubit `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub usize);

impl UserId {
    pub const BOB: UserId = UserId(1);
    pub const CHARLIE: UserId = UserId(2);

    pub fn qubit(self) -> QubitId {
        QubitId(self.0 + 1)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            1 => f.write_str("bob"),
            2 => f.write_str("charlie"),
            k => write!(f, "user{k}"),
        }
    }
}

impl std::str::FromStr for UserId {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "bob" => Ok(UserId::BOB),
            "charlie" => Ok(UserId::CHARLIE),
            other => other
                .trim_start_matches("user")
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .map(UserId)
                .ok_or_else(|| QError::invalid(format!("unknown user {s:?}"))),
        }
    }
}

fn check_users(n_users: usize, receiver: UserId) -> Result<()> {
    if !(MIN_USERS..=MAX_USERS).contains(&n_users) {
        return Err(QError::invalid(format!(
            "user count {n_users} is outside {MIN_USERS}..={MAX_USERS}"
        )));
    }
    if receiver.0 == 0 || receiver.0 > n_users {
        return Err(QError::invalid(format!(
            "receiver {receiver} is not one of {n_users} users"
        )));
    }
    Ok(())
}

fn bystanders(n_users: usize, receiver: UserId) -> Vec<UserId> {
    (1..=n_users).map(UserId).filter(|&u| u != receiver).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdcStatus {
    Success,
    Abort,
}

impl fmt::Display for SdcStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdcStatus::Success => "success",
            SdcStatus::Abort => "abort",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SdcTrial {
    pub encoded_op: PauliOp,
    pub n_users: usize,
    pub receiver: UserId,
    pub bell_outcome: BellOutcome,
    /// Bystanders in ascending order, paired with `bystander_bits`.
    pub bystanders: Vec<UserId>,
    pub bystander_bits: Vec<u8>,
    pub status: SdcStatus,
    pub decoded_op: Option<PauliOp>,
}

impl SdcTrial {
    pub fn bit_of(&self, user: UserId) -> Option<u8> {
        self.bystanders
            .iter()
            .position(|&u| u == user)
            .map(|k| self.bystander_bits[k])
    }

    fn bits_string(&self) -> String {
        self.bystander_bits.iter().map(|b| char::from(b'0' + b)).collect()
    }
}

/// Decode table for the success branch: Bell outcome to op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdcDecodeTable {
    map: BTreeMap<BellOutcome, PauliOp>,
}

impl SdcDecodeTable {
    /// Reads the success-branch outcome of each op off the exact joint
    /// distribution and checks the result is a bijection.
    pub fn build(n_users: usize, receiver: UserId) -> Result<Self> {
        let mut map = BTreeMap::new();
        for op in PauliOp::ALL {
            let dist = joint_distribution(n_users, receiver, op)?;
            let success: Vec<BellOutcome> = dist
                .iter()
                .filter(|b| b.bits.iter().all(|&x| x == 0) && b.probability > PROB_FLOOR)
                .map(|b| b.bell)
                .collect();
            if success.len() != 1 {
                return Err(QError::invalid(format!(
                    "op {op} has {} success-branch outcomes",
                    success.len()
                )));
            }
            if map.insert(success[0], op).is_some() {
                return Err(QError::invalid(format!("outcome {} decodes to two ops", success[0])));
            }
        }
        Ok(Self { map })
    }

    pub fn lookup(&self, b: BellOutcome) -> PauliOp {
        self.map[&b]
    }

    pub fn rows(&self) -> impl Iterator<Item = (BellOutcome, PauliOp)> + '_ {
        self.map.iter().map(|(&b, &op)| (b, op))
    }
}

pub fn sdc_decode_table() -> &'static SdcDecodeTable {
    static TABLE: OnceLock<SdcDecodeTable> = OnceLock::new();
    TABLE.get_or_init(|| SdcDecodeTable::build(2, UserId::BOB).expect("three-party table is a bijection"))
}

/// `None` means abort (some bystander read 1).
pub fn decode_sdc(b: BellOutcome, bystander_bits: &[u8]) -> Option<PauliOp> {
    if bystander_bits.iter().any(|&x| x != 0) {
        return None;
    }
    Some(sdc_decode_table().lookup(b))
}

pub fn encoded_w_state(n_users: usize, op: PauliOp) -> Result<StateVector> {
    w_n(n_users + 1)?.apply_pauli(QubitId(1), op)
}

pub fn run_sdc_n_party<R: Rng + ?Sized>(
    n_users: usize,
    receiver: UserId,
    op: PauliOp,
    rng: &mut R,
) -> Result<SdcTrial> {
    check_users(n_users, receiver)?;
    let state = encoded_w_state(n_users, op)?;
    let (bell_outcome, residual) = measure_bell(&state, QubitId(1), receiver.qubit(), rng)?;
    let mut state = residual.expect("at least one bystander qubit remains");
    let bystanders = bystanders(n_users, receiver);
    let mut bystander_bits = Vec::with_capacity(bystanders.len());
    for u in &bystanders {
        let (bit, post) = state.measure_computational(u.qubit(), rng)?;
        bystander_bits.push(bit);
        state = post;
    }
    let decoded_op = decode_sdc(bell_outcome, &bystander_bits);
    Ok(SdcTrial {
        encoded_op: op,
        n_users,
        receiver,
        bell_outcome,
        bystanders,
        bystander_bits,
        status: if decoded_op.is_some() {
            SdcStatus::Success
        } else {
            SdcStatus::Abort
        },
        decoded_op,
    })
}

/// Three-party round with Bob as receiver.
pub fn run_sdc_round<R: Rng + ?Sized>(op: PauliOp, rng: &mut R) -> SdcTrial {
    run_sdc_n_party(2, UserId::BOB, op, rng).expect("three-party round is always valid")
}

/// One joint outcome of the receiver's Bell measurement and the bystander readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct SdcBranch {
    pub bell: BellOutcome,
    /// Bystander bits in ascending user order.
    pub bits: Vec<u8>,
    pub probability: f64,
}

/// Exact joint distribution, by contracting the full register against each
/// Bell outcome on (1, receiver) and each bystander bit pattern.
pub fn joint_distribution(n_users: usize, receiver: UserId, op: PauliOp) -> Result<Vec<SdcBranch>> {
    check_users(n_users, receiver)?;
    let state = encoded_w_state(n_users, op)?;
    let n = state.n_qubits();
    let rq = receiver.qubit().0;
    let others: Vec<usize> = bystanders(n_users, receiver).iter().map(|u| u.qubit().0).collect();
    let bit_at = |idx: usize, label: usize| (idx >> (n - label)) & 1;
    let bells = BellOutcome::ALL.map(|b| b.amplitudes());
    let mut acc: BTreeMap<(usize, usize), num_complex::Complex64> = BTreeMap::new();
    for (idx, amp) in state.support() {
        let pattern = others.iter().fold(0usize, |p, &l| (p << 1) | bit_at(idx, l));
        let (a, b) = (bit_at(idx, 1), bit_at(idx, rq));
        for (k, phi) in bells.iter().enumerate() {
            *acc.entry((k, pattern)).or_default() += phi[a][b].conj() * amp;
        }
    }
    Ok(acc
        .into_iter()
        .map(|((k, pattern), a)| SdcBranch {
            bell: BellOutcome::ALL[k],
            bits: (0..others.len())
                .map(|j| ((pattern >> (others.len() - 1 - j)) & 1) as u8)
                .collect(),
            probability: a.norm_sqr(),
        })
        .filter(|b| b.probability > PROB_FLOOR)
        .collect())
}

pub fn success_probability(n_users: usize, receiver: UserId, op: PauliOp) -> Result<f64> {
    Ok(joint_distribution(n_users, receiver, op)?
        .iter()
        .filter(|b| b.bits.iter().all(|&x| x == 0))
        .map(|b| b.probability)
        .sum())
}

fn posterior_from(mut weight: impl FnMut(&SdcBranch) -> bool, n_users: usize, receiver: UserId) -> Result<Posterior> {
    let mut w = [0.0; 4];
    for op in PauliOp::ALL {
        w[op.index()] = joint_distribution(n_users, receiver, op)?
            .iter()
            .filter(|b| weight(b))
            .map(|b| b.probability)
            .sum();
    }
    Ok(Posterior::from_weights(w))
}

/// Receiver's posterior over ops from his Bell outcome alone.
pub fn receiver_posterior(n_users: usize, receiver: UserId, b: BellOutcome) -> Result<Posterior> {
    posterior_from(|br| br.bell == b, n_users, receiver)
}

/// A bystander's posterior over ops from his own bit alone.
pub fn bystander_posterior(n_users: usize, receiver: UserId, user: UserId, bit: u8) -> Result<Posterior> {
    let pos = bystanders(n_users, receiver)
        .iter()
        .position(|&u| u == user)
        .ok_or_else(|| QError::invalid(format!("{user} is not a bystander")))?;
    posterior_from(|br| br.bits[pos] == bit, n_users, receiver)
}

pub fn bob_alone_posterior(b: BellOutcome) -> Posterior {
    receiver_posterior(2, UserId::BOB, b).expect("three-party setup is valid")
}

pub fn bob_alone_guess(b: BellOutcome) -> PauliOp {
    bob_alone_posterior(b).guess()
}

pub fn charlie_alone_posterior(bit: u8) -> Posterior {
    bystander_posterior(2, UserId::BOB, UserId::CHARLIE, bit).expect("three-party setup is valid")
}

/// What a single user can guess without cooperation, as a lookup table
/// precomputed from the exact posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct SoloGuesser {
    pub user: UserId,
    is_receiver: bool,
    by_outcome: [PauliOp; 4],
    by_bit: [PauliOp; 2],
}

impl SoloGuesser {
    pub fn new(n_users: usize, receiver: UserId, user: UserId) -> Result<Self> {
        check_users(n_users, receiver)?;
        let is_receiver = user == receiver;
        let mut by_outcome = [PauliOp::I; 4];
        let mut by_bit = [PauliOp::I; 2];
        if is_receiver {
            for b in BellOutcome::ALL {
                by_outcome[b.index()] = receiver_posterior(n_users, receiver, b)?.guess();
            }
        } else {
            for bit in 0..2u8 {
                by_bit[bit as usize] = bystander_posterior(n_users, receiver, user, bit)?.guess();
            }
        }
        Ok(Self {
            user,
            is_receiver,
            by_outcome,
            by_bit,
        })
    }

    pub fn guess(&self, trial: &SdcTrial) -> PauliOp {
        if self.is_receiver {
            self.by_outcome[trial.bell_outcome.index()]
        } else {
            let bit = trial.bit_of(self.user).expect("guesser is a bystander in this trial");
            self.by_bit[bit as usize]
        }
    }

    /// Exact probability the guess is right under a uniform op.
    pub fn accuracy(&self, n_users: usize, receiver: UserId) -> Result<f64> {
        let pos = bystanders(n_users, receiver).iter().position(|&u| u == self.user);
        let mut total = 0.0;
        for op in PauliOp::ALL {
            for br in joint_distribution(n_users, receiver, op)? {
                let g = if self.is_receiver {
                    self.by_outcome[br.bell.index()]
                } else {
                    self.by_bit[br.bits[pos.expect("bystander")] as usize]
                };
                if g == op {
                    total += br.probability / 4.0;
                }
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheatReport {
    pub receiver: UserId,
    pub bob_solo_accuracy: f64,
    pub charlie_solo_accuracy: f64,
    /// Charlie lies; Bob still decodes alone with `bob_solo_accuracy`.
    pub charlie_cheat_success: f64,
    pub bob_cheat_success: f64,
}

/// Analytic three-party cheat probabilities with the given receiver.
pub fn cheat_report(receiver: UserId) -> Result<CheatReport> {
    check_users(2, receiver)?;
    let bob = SoloGuesser::new(2, receiver, UserId::BOB)?.accuracy(2, receiver)?;
    let charlie = SoloGuesser::new(2, receiver, UserId::CHARLIE)?.accuracy(2, receiver)?;
    Ok(CheatReport {
        receiver,
        bob_solo_accuracy: bob,
        charlie_solo_accuracy: charlie,
        charlie_cheat_success: 1.0 - bob,
        bob_cheat_success: 1.0 - charlie,
    })
}

/// Per-trial log rows: `seed,op,receiver,bell_outcome,bystander_bits,status,decoded_op`.
pub fn write_trials_csv<W: Write>(seed: u64, trials: &[SdcTrial], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| QError::invalid(format!("csv write failed: {e}"));
    w.write_record([
        "seed",
        "op",
        "receiver",
        "bell_outcome",
        "bystander_bits",
        "status",
        "decoded_op",
    ])
    .map_err(io)?;
    for t in trials {
        w.write_record([
            seed.to_string(),
            t.encoded_op.to_string(),
            t.receiver.to_string(),
            t.bell_outcome.to_string(),
            t.bits_string(),
            t.status.to_string(),
            t.decoded_op.map_or_else(String::new, |op| op.to_string()),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| QError::invalid(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial_stream;
    use BellOutcome::{PhiMinus, PhiPlus, PsiMinus, PsiPlus};

    #[test]
    fn decode_table_matches_success_branches() {
        let t = sdc_decode_table();
        assert_eq!(t.lookup(PsiPlus), PauliOp::I);
        assert_eq!(t.lookup(PhiPlus), PauliOp::X);
        assert_eq!(t.lookup(PhiMinus), PauliOp::IY);
        assert_eq!(t.lookup(PsiMinus), PauliOp::Z);
        assert_eq!(decode_sdc(PhiMinus, &[0]), Some(PauliOp::IY));
        assert_eq!(decode_sdc(PsiMinus, &[0]), Some(PauliOp::Z));
        for b in BellOutcome::ALL {
            assert_eq!(decode_sdc(b, &[1]), None);
        }
    }

    #[test]
    fn identity_success_branch_is_psi_plus() {
        for k in 0..300 {
            let t = run_sdc_round(PauliOp::I, &mut trial_stream(4, k));
            if t.status == SdcStatus::Success {
                assert_eq!(t.bell_outcome, PsiPlus);
                assert_eq!(t.decoded_op, Some(PauliOp::I));
            } else {
                assert_eq!(t.bystander_bits, vec![1]);
                assert!(matches!(t.bell_outcome, PhiPlus | PhiMinus));
            }
        }
    }

    #[test]
    fn x_abort_branch_is_psi_split() {
        let dist = joint_distribution(2, UserId::BOB, PauliOp::X).unwrap();
        let abort: Vec<_> = dist.iter().filter(|b| b.bits == [1]).collect();
        let total: f64 = abort.iter().map(|b| b.probability).sum();
        assert!((total - 1.0 / 3.0).abs() < 1e-12);
        for b in abort {
            assert!(matches!(b.bell, PsiPlus | PsiMinus));
            assert!((b.probability / total - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn success_probabilities() {
        for op in PauliOp::ALL {
            assert!((success_probability(2, UserId::BOB, op).unwrap() - 2.0 / 3.0).abs() < 1e-12);
            assert!((success_probability(3, UserId(2), op).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn solo_posteriors() {
        let p = bob_alone_posterior(PsiPlus);
        let want = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 0.0];
        for (a, b) in p.probs.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(bob_alone_guess(PsiPlus), PauliOp::I);
        for bit in 0..2 {
            let c = charlie_alone_posterior(bit);
            assert!(c.probs.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        }
        for b in BellOutcome::ALL {
            assert!((bob_alone_posterior(b).probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cheat_report_values() {
        let r = cheat_report(UserId::BOB).unwrap();
        assert!((r.bob_solo_accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.charlie_solo_accuracy - 0.25).abs() < 1e-12);
        assert!((r.charlie_cheat_success - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.bob_cheat_success - 0.75).abs() < 1e-12);
        let flipped = cheat_report(UserId::CHARLIE).unwrap();
        assert!((flipped.charlie_solo_accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((flipped.bob_solo_accuracy - 0.25).abs() < 1e-12);
        assert!(cheat_report(UserId(3)).is_err());
    }

    #[test]
    fn n_party_argument_checks() {
        let mut rng = trial_stream(0, 0);
        assert!(run_sdc_n_party(1, UserId::BOB, PauliOp::I, &mut rng).is_err());
        assert!(run_sdc_n_party(12, UserId::BOB, PauliOp::I, &mut rng).is_err());
        assert!(run_sdc_n_party(3, UserId(4), PauliOp::I, &mut rng).is_err());
        assert!(run_sdc_n_party(3, UserId(0), PauliOp::I, &mut rng).is_err());
    }

    #[test]
    fn two_users_reduce_to_three_party_round() {
        for k in 0..50 {
            let a = run_sdc_n_party(2, UserId::BOB, PauliOp::Z, &mut trial_stream(8, k)).unwrap();
            let b = run_sdc_round(PauliOp::Z, &mut trial_stream(8, k));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn user_parsing() {
        assert_eq!("bob".parse::<UserId>().unwrap(), UserId::BOB);
        assert_eq!("Charlie".parse::<UserId>().unwrap(), UserId::CHARLIE);
        assert_eq!("user5".parse::<UserId>().unwrap(), UserId(5));
        assert_eq!("3".parse::<UserId>().unwrap(), UserId(3));
        assert!("0".parse::<UserId>().is_err());
        assert!("eve".parse::<UserId>().is_err());
    }

    #[test]
    fn csv_rows() {
        let trials: Vec<_> = (0..3)
            .map(|k| run_sdc_round(PauliOp::X, &mut trial_stream(5, k)))
            .collect();
        let mut buf = Vec::new();
        write_trials_csv(5, &trials, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,op,receiver,bell_outcome,bystander_bits,status,decoded_op"
        );
        assert_eq!(lines.count(), 3);
    }
}
