//! Attack models against the secret-sharing channel and the GHZ parity
//! check used to detect them.
//!
//! The check: each party holding a qubit of a fresh GHZ triple measures X or
//! Y, chosen uniformly. Draws with an odd number of Y choices are
//! inconclusive and re-drawn. On the rest the product of the three +-1
//! results must be +1 for XXX and -1 for XYY, YXY, YYX.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellmeas::{encoded_two_ghz, triple_probabilities, BellTriple};
use crate::canon::{ghz3, PauliOp};
use crate::error::{QError, Result};
use crate::harness::{trial_stream, wilson_interval, GENERATOR, Z95, Z99};
use crate::qss::{
    marginal_information, qss_decode_table, run_qss_round_with, DeclarationPolicy, KnownOutcomes, OpChoice, Party,
    QssDecode, QssTranscript,
};
use crate::qstate::{c, mat_mul, ry, Gate2, QubitId, StateVector, HADAMARD, S_DAG, S_GATE};

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    /// Unitary taking this basis onto the computational one.
    fn rotate_to_z(self) -> Gate2 {
        match self {
            Basis::Z => PauliOp::I.matrix(),
            Basis::X => HADAMARD,
            Basis::Y => mat_mul(&HADAMARD, &S_DAG),
        }
    }

    fn rotate_from_z(self) -> Gate2 {
        match self {
            Basis::Z => PauliOp::I.matrix(),
            Basis::X => HADAMARD,
            Basis::Y => mat_mul(&S_GATE, &HADAMARD),
        }
    }

    /// The Pauli observable measured in this basis.
    fn observable(self) -> Gate2 {
        let z = c(0.0, 0.0);
        match self {
            Basis::Z => PauliOp::Z.matrix(),
            Basis::X => PauliOp::X.matrix(),
            Basis::Y => [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]],
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Basis::Z),
            "x" => Ok(Basis::X),
            "y" => Ok(Basis::Y),
            other => Err(QError::invalid(format!("unknown basis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    /// Each attacked qubit controls an `Ry(coupling)` on a fresh ancilla.
    /// `coupling = pi` is a full controlled flip, `0` leaves the channel alone.
    AncillaEntangle {
        coupling: f64,
    },
    /// Measure each attacked qubit in `basis` and resend the eigenstate found.
    InterceptResend {
        basis: Basis,
    },
    /// Bob keeps Charlie's qubits and forwards `|prepared>` instead.
    SubstituteQubit {
        prepared: u8,
    },
    /// Bob withholds his declaration until the others have spoken. Leaves
    /// the quantum channel untouched.
    LateDeclarer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryModel {
    #[serde(flatten)]
    pub kind: AttackKind,
    /// Party whose incoming qubits are attacked.
    pub target: Party,
}

impl AdversaryModel {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            target: Party::Bob,
        }
    }

    pub fn intercept_resend(target: Party, basis: Basis) -> Self {
        Self {
            kind: AttackKind::InterceptResend { basis },
            target,
        }
    }

    pub fn ancilla(target: Party, coupling: f64) -> Self {
        Self {
            kind: AttackKind::AncillaEntangle { coupling },
            target,
        }
    }

    /// Bob replaces the qubits travelling to Charlie.
    pub fn substitute(prepared: u8) -> Self {
        Self {
            kind: AttackKind::SubstituteQubit { prepared },
            target: Party::Charlie,
        }
    }

    pub fn late_declarer() -> Self {
        Self {
            kind: AttackKind::LateDeclarer,
            target: Party::Bob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AttackKind::AncillaEntangle { coupling } if !coupling.is_finite() => {
                return Err(QError::invalid("ancilla coupling must be finite"));
            }
            AttackKind::SubstituteQubit { prepared } if prepared > 1 => {
                return Err(QError::invalid("prepared qubit must be |0> or |1>"));
            }
            _ => {}
        }
        if self.touches_channel() && self.target == Party::Alice {
            return Err(QError::invalid("Alice's qubits never leave her lab"));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.kind == AttackKind::None
    }

    fn touches_channel(&self) -> bool {
        !matches!(self.kind, AttackKind::None | AttackKind::LateDeclarer)
    }

    fn check_qubits(&self) -> Vec<QubitId> {
        match self.target {
            Party::Alice => vec![],
            Party::Bob => vec![QubitId(2)],
            Party::Charlie => vec![QubitId(3)],
        }
    }

    fn message_qubits(&self) -> Vec<QubitId> {
        match self.target {
            Party::Alice => vec![],
            Party::Bob => vec![QubitId(2), QubitId(5)],
            Party::Charlie => vec![QubitId(3), QubitId(6)],
        }
    }

    /// Applies the attack to a check-round GHZ triple (qubits 1..3).
    pub fn disturb_check<R: Rng + ?Sized>(&self, s: &StateVector, rng: &mut R) -> Result<StateVector> {
        self.disturb(s, &self.check_qubits(), rng)
    }

    /// Applies the attack to an encoded six-qubit message register.
    pub fn disturb_message<R: Rng + ?Sized>(&self, s: &StateVector, rng: &mut R) -> Result<StateVector> {
        self.disturb(s, &self.message_qubits(), rng)
    }

    fn disturb<R: Rng + ?Sized>(&self, s: &StateVector, qubits: &[QubitId], rng: &mut R) -> Result<StateVector> {
        let mut state = s.clone();
        for &q in qubits {
            state = match self.kind {
                AttackKind::None | AttackKind::LateDeclarer => state,
                AttackKind::InterceptResend { basis } => {
                    let rotated = state.apply_gate(q, &basis.rotate_to_z())?;
                    let (_, collapsed) = rotated.measure_computational(q, rng)?;
                    collapsed.apply_gate(q, &basis.rotate_from_z())?
                }
                AttackKind::AncillaEntangle { coupling } => couple_ancilla(&state, q, coupling)?,
                AttackKind::SubstituteQubit { prepared } => substitute(&state, q, prepared)?,
            };
        }
        Ok(state)
    }

    /// Exact ensemble `{(p_k, psi_k)}` after the attack. Deterministic
    /// attacks give a single branch.
    pub fn disturb_check_exact(&self, s: &StateVector) -> Result<Vec<(f64, StateVector)>> {
        self.disturb_exact(s, &self.check_qubits())
    }

    pub fn disturb_message_exact(&self, s: &StateVector) -> Result<Vec<(f64, StateVector)>> {
        self.disturb_exact(s, &self.message_qubits())
    }

    fn disturb_exact(&self, s: &StateVector, qubits: &[QubitId]) -> Result<Vec<(f64, StateVector)>> {
        let mut ensemble = vec![(1.0, s.clone())];
        for &q in qubits {
            let mut next = Vec::with_capacity(ensemble.len() * 2);
            for (p, state) in ensemble {
                match self.kind {
                    AttackKind::None | AttackKind::LateDeclarer => next.push((p, state)),
                    AttackKind::InterceptResend { basis } => {
                        let rotated = state.apply_gate(q, &basis.rotate_to_z())?;
                        for bit in 0..2 {
                            if let Some((pb, post)) = rotated.project_computational(q, bit)? {
                                next.push((p * pb, post.apply_gate(q, &basis.rotate_from_z())?));
                            }
                        }
                    }
                    AttackKind::AncillaEntangle { coupling } => next.push((p, couple_ancilla(&state, q, coupling)?)),
                    AttackKind::SubstituteQubit { prepared } => next.push((p, substitute(&state, q, prepared)?)),
                }
            }
            ensemble = next;
        }
        Ok(ensemble)
    }
}

impl fmt::Display for AdversaryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AttackKind::None => f.write_str("none"),
            AttackKind::AncillaEntangle { coupling } => {
                write!(f, "ancilla-entangle(coupling={coupling})@{}", self.target)
            }
            AttackKind::InterceptResend { basis } => {
                write!(f, "intercept-resend({basis:?})@{}", self.target)
            }
            AttackKind::SubstituteQubit { prepared } => {
                write!(f, "substitute-qubit(|{prepared}>)@{}", self.target)
            }
            AttackKind::LateDeclarer => f.write_str("late-declarer@bob"),
        }
    }
}

fn couple_ancilla(s: &StateVector, q: QubitId, coupling: f64) -> Result<StateVector> {
    let (with_ancilla, a) = s.append_qubit(0)?;
    with_ancilla.apply_controlled(q, a, &ry(coupling))
}

/// Appends `|prepared>` and swaps it into `q`; the original content of `q`
/// stays in the register on the new label, held by the attacker.
fn substitute(s: &StateVector, q: QubitId, prepared: u8) -> Result<StateVector> {
    let (with_fresh, fresh) = s.append_qubit(prepared)?;
    with_fresh.swap(q, fresh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// X-like or Y-like local measurement in a check round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckBasis {
    X,
    Y,
}

impl CheckBasis {
    fn basis(self) -> Basis {
        match self {
            CheckBasis::X => Basis::X,
            CheckBasis::Y => Basis::Y,
        }
    }
}

/// The four conclusive basis settings with the parity an honest GHZ triple gives.
pub const CONCLUSIVE_SETTINGS: [([CheckBasis; 3], i8); 4] = [
    ([CheckBasis::X, CheckBasis::X, CheckBasis::X], 1),
    ([CheckBasis::X, CheckBasis::Y, CheckBasis::Y], -1),
    ([CheckBasis::Y, CheckBasis::X, CheckBasis::Y], -1),
    ([CheckBasis::Y, CheckBasis::Y, CheckBasis::X], -1),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRound {
    /// Alice, Bob, Charlie.
    pub bases: [CheckBasis; 3],
    pub results: [i8; 3],
    pub verdict: Verdict,
    /// Inconclusive draws discarded before this one.
    pub redraws: u32,
}

/// Parity rule: pass iff the product of results equals the honest parity
/// of the basis setting. `None` for inconclusive settings.
pub fn parity_verdict(bases: [CheckBasis; 3], results: [i8; 3]) -> Option<Verdict> {
    let expected = CONCLUSIVE_SETTINGS.iter().find(|(b, _)| *b == bases)?.1;
    let product: i8 = results.iter().product();
    Some(if product == expected {
        Verdict::Pass
    } else {
        Verdict::Fail
    })
}

/// One conclusive GHZ parity check on a fresh triple under `model`.
pub fn check_round<R: Rng + ?Sized>(model: &AdversaryModel, rng: &mut R) -> Result<CheckRound> {
    let mut redraws = 0u32;
    let bases = loop {
        let b: [CheckBasis; 3] = std::array::from_fn(|_| {
            if rng.gen::<bool>() {
                CheckBasis::Y
            } else {
                CheckBasis::X
            }
        });
        if b.iter().filter(|&&x| x == CheckBasis::Y).count() % 2 == 0 {
            break b;
        }
        redraws += 1;
    };
    let mut state = model.disturb_check(&ghz3(), rng)?;
    let mut results = [0i8; 3];
    for (k, basis) in bases.iter().enumerate() {
        let q = QubitId(k + 1);
        let rotated = state.apply_gate(q, &basis.basis().rotate_to_z())?;
        let (bit, post) = rotated.measure_computational(q, rng)?;
        results[k] = if bit == 0 { 1 } else { -1 };
        state = post;
    }
    let verdict = parity_verdict(bases, results).expect("bases are conclusive");
    Ok(CheckRound {
        bases,
        results,
        verdict,
        redraws,
    })
}

/// Per-conclusive-round failure probability, from the attacked ensemble:
/// `P(fail | setting) = (1 - parity * <P_A P_B P_C>) / 2`, averaged over the
/// four equally likely conclusive settings.
pub fn check_fail_probability(model: &AdversaryModel) -> Result<f64> {
    let ensemble = model.disturb_check_exact(&ghz3())?;
    let mut total = 0.0;
    for (bases, parity) in CONCLUSIVE_SETTINGS {
        let mut expectation = 0.0;
        for (p, psi) in &ensemble {
            let mut applied = psi.clone();
            for (k, b) in bases.iter().enumerate() {
                applied = applied.apply_gate(QubitId(k + 1), &b.basis().observable())?;
            }
            expectation += p * psi.inner(&applied)?.re;
        }
        total += (1.0 - parity as f64 * expectation) / 2.0;
    }
    Ok(total / CONCLUSIVE_SETTINGS.len() as f64)
}

/// Probability that a session with `check_rounds` conclusive checks catches
/// an attack with per-round failure probability `fail`.
pub fn session_detection_probability(fail: f64, check_rounds: u64) -> f64 {
    1.0 - (1.0 - fail).powf(check_rounds as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackStatistics {
    pub model: AdversaryModel,
    /// Draws including inconclusive ones.
    pub rounds: u64,
    pub conclusive_rounds: u64,
    pub failures: u64,
    pub detection_probability: f64,
    pub ci95: [f64; 2],
    pub ci99: [f64; 2],
    pub analytic: f64,
    pub seed: u64,
    pub generator: &'static str,
}

/// Runs `conclusive_rounds` check rounds; round `k` uses stream `(seed, k)`.
pub fn run_check_rounds(model: &AdversaryModel, conclusive_rounds: u64, seed: u64) -> Result<AttackStatistics> {
    model.validate()?;
    if conclusive_rounds == 0 {
        return Err(QError::invalid("need at least one check round"));
    }
    let (draws, failures) = (0..conclusive_rounds)
        .into_par_iter()
        .map(|k| {
            let r = check_round(model, &mut trial_stream(seed, k))?;
            Ok((1 + r.redraws as u64, (r.verdict == Verdict::Fail) as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let estimate = failures as f64 / conclusive_rounds as f64;
    let ci95 = wilson_interval(failures, conclusive_rounds, Z95);
    let ci99 = wilson_interval(failures, conclusive_rounds, Z99);
    Ok(AttackStatistics {
        model: *model,
        rounds: draws,
        conclusive_rounds,
        failures,
        detection_probability: estimate,
        ci95: [ci95.0, ci95.1],
        ci99: [ci99.0, ci99.1],
        analytic: check_fail_probability(model)?,
        seed,
        generator: GENERATOR,
    })
}

/// Exact outcome distribution of a message round under `model` for a fixed op.
pub fn message_outcome_distribution(model: &AdversaryModel, op: PauliOp) -> Result<[f64; 64]> {
    let mut dist = [0.0; 64];
    for (p, psi) in model.disturb_message_exact(&encoded_two_ghz(op))? {
        let probs = triple_probabilities(&psi)?;
        for (d, q) in dist.iter_mut().zip(probs) {
            *d += p * q;
        }
    }
    Ok(dist)
}

/// Exact message-round rates under a uniformly random encoded op.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MessageRoundRates {
    /// Decoded op differs from the encoded one, inconsistent included.
    pub error_rate: f64,
    pub inconsistent_rate: f64,
}

pub fn message_round_rates(model: &AdversaryModel) -> Result<MessageRoundRates> {
    let table = qss_decode_table();
    let mut error = 0.0;
    let mut inconsistent = 0.0;
    for op in PauliOp::ALL {
        let dist = message_outcome_distribution(model, op)?;
        for t in BellTriple::all() {
            let p = dist[t.index()] / 4.0;
            match table.lookup(t) {
                QssDecode::Inconsistent => {
                    inconsistent += p;
                    error += p;
                }
                QssDecode::Op(d) if d != op => error += p,
                QssDecode::Op(_) => {}
            }
        }
    }
    Ok(MessageRoundRates {
        error_rate: error,
        inconsistent_rate: inconsistent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TamperStatistics {
    pub model: AdversaryModel,
    pub rounds: u64,
    pub inconsistent: u64,
    pub inconsistent_rate: f64,
    /// Rounds where a public comparison with Alice's op exposes the attack.
    pub mismatches: u64,
    pub detection_rate: f64,
    pub detection_ci99: [f64; 2],
    pub analytic: MessageRoundRates,
    pub seed: u64,
    pub generator: &'static str,
    #[serde(skip)]
    pub transcripts: Vec<QssTranscript>,
}

/// Message rounds under `model` with a random op per round; tallies
/// inconsistent triples and decode mismatches.
pub fn tamper_statistics(model: &AdversaryModel, rounds: u64, seed: u64) -> Result<TamperStatistics> {
    model.validate()?;
    if rounds == 0 {
        return Err(QError::invalid("need at least one round"));
    }
    let transcripts: Vec<QssTranscript> = (0..rounds)
        .into_par_iter()
        .map(|k| {
            run_qss_round_with(
                OpChoice::Random,
                model,
                &DeclarationPolicy::Random,
                k,
                &mut trial_stream(seed, k),
            )
        })
        .collect::<Result<_>>()?;
    let inconsistent = transcripts
        .iter()
        .filter(|t| t.decoded_op == QssDecode::Inconsistent)
        .count() as u64;
    let mismatches = transcripts.iter().filter(|t| !t.decoded_correctly()).count() as u64;
    let ci = wilson_interval(mismatches, rounds, Z99);
    Ok(TamperStatistics {
        model: *model,
        rounds,
        inconsistent,
        inconsistent_rate: inconsistent as f64 / rounds as f64,
        mismatches,
        detection_rate: mismatches as f64 / rounds as f64,
        detection_ci99: [ci.0, ci.1],
        analytic: message_round_rates(model)?,
        seed,
        generator: GENERATOR,
        transcripts,
    })
}

/// Bob keeps the qubits bound for Charlie and forwards `|prepared>` states.
pub fn substitute_qubit_attack(prepared: u8, rounds: u64, seed: u64) -> Result<TamperStatistics> {
    tamper_statistics(&AdversaryModel::substitute(prepared), rounds, seed)
}

/// What Bob knows when he must declare under `order`: his own outcome plus
/// every declaration made before his turn.
fn bob_knowledge(order: [Party; 3], t: BellTriple) -> KnownOutcomes {
    let outcomes = t.as_array();
    let mut known = KnownOutcomes::default().with(Party::Bob, outcomes[Party::Bob.pair_index()]);
    for &p in order.iter().take_while(|&&p| p != Party::Bob) {
        known = known.with(p, outcomes[p.pair_index()]);
    }
    known
}

/// Bob's guess accuracy when forced to commit at his turn in `order`.
pub fn bob_accuracy_for_order(order: [Party; 3]) -> f64 {
    crate::bellmeas::decomposition_tables()
        .iter()
        .flat_map(|table| table.branches.iter().map(move |b| (table.op, b)))
        .filter(|(op, b)| marginal_information(bob_knowledge(order, b.triple())).guess() == *op)
        .map(|(_, b)| b.probability() / 4.0)
        .sum()
}

/// Expected success of the late-declaring Bob, composed over the orders the policy produces.
pub fn late_declarer_analytic(policy: &DeclarationPolicy) -> f64 {
    policy
        .order_distribution()
        .into_iter()
        .map(|(order, w)| w * bob_accuracy_for_order(order))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LateDeclarerReport {
    pub policy: DeclarationPolicy,
    pub analytic: f64,
    pub rounds: u64,
    pub successes: u64,
    pub empirical: f64,
    pub ci99: [f64; 2],
    pub seed: u64,
    pub generator: &'static str,
}

/// Simulates honest rounds under `policy`; each round Bob guesses the op
/// from what he knows at his turn to declare.
pub fn late_declarer_attack(policy: &DeclarationPolicy, rounds: u64, seed: u64) -> Result<LateDeclarerReport> {
    policy.validate()?;
    if rounds == 0 {
        return Err(QError::invalid("need at least one round"));
    }
    let model = AdversaryModel::late_declarer();
    let successes: u64 = (0..rounds)
        .into_par_iter()
        .map(|k| {
            let t = run_qss_round_with(OpChoice::Random, &model, policy, k, &mut trial_stream(seed, k))?;
            let guess = marginal_information(bob_knowledge(t.declaration_order, t.triple())).guess();
            Ok((guess == t.encoded_op) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let ci = wilson_interval(successes, rounds, Z99);
    Ok(LateDeclarerReport {
        policy: *policy,
        analytic: late_declarer_analytic(policy),
        rounds,
        successes,
        empirical: successes as f64 / rounds as f64,
        ci99: [ci.0, ci.1],
        seed,
        generator: GENERATOR,
    })
}
