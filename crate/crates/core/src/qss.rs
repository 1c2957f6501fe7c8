//! Three-party secret sharing by entanglement swapping of two GHZ triples.
//!
//! Alice holds qubits 1 and 4, Bob 2 and 5, Charlie 3 and 6. Alice encodes a
//! Pauli op on qubit 1, then the three parties Bell-measure their pairs in
//! the fixed order (1,4), (2,5), (3,6) and declare the results. The decode
//! table maps the joint outcome back to the op; it is generated from the
//! computed decompositions, never written by hand.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{check_round, AdversaryModel, Verdict};
use crate::bellmeas::{decomposition_tables, encoded_two_ghz, measure_bell, BellTriple, SWAP_PAIRS};
use crate::canon::{BellOutcome, PauliOp, Posterior};
use crate::error::{QError, Result};
use crate::harness::{trial_stream, GENERATOR};
use crate::qstate::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Charlie];

    /// The swapping pair this party measures.
    pub fn pair_index(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
            Party::Charlie => 2,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Charlie => "charlie",
        })
    }
}

impl std::str::FromStr for Party {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alice" => Ok(Party::Alice),
            "bob" => Ok(Party::Bob),
            "charlie" => Ok(Party::Charlie),
            other => Err(QError::invalid(format!("unknown party {other:?}"))),
        }
    }
}

fn rotation(k: usize) -> [Party; 3] {
    [Party::ALL[k], Party::ALL[(k + 1) % 3], Party::ALL[(k + 2) % 3]]
}

/// Order in which the parties announce their Bell outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "order", rename_all = "kebab-case")]
pub enum DeclarationPolicy {
    Fixed([Party; 3]),
    /// Rotates Alice, Bob, Charlie by the round number.
    RoundRobin,
    /// Uniform over the six permutations, drawn per round.
    #[default]
    Random,
}

impl DeclarationPolicy {
    pub fn bob_last() -> Self {
        DeclarationPolicy::Fixed([Party::Alice, Party::Charlie, Party::Bob])
    }

    pub fn bob_first() -> Self {
        DeclarationPolicy::Fixed([Party::Bob, Party::Alice, Party::Charlie])
    }

    pub fn order<R: Rng + ?Sized>(&self, round: u64, rng: &mut R) -> [Party; 3] {
        match self {
            DeclarationPolicy::Fixed(order) => *order,
            DeclarationPolicy::RoundRobin => rotation((round % 3) as usize),
            DeclarationPolicy::Random => {
                let mut order = Party::ALL;
                order.shuffle(rng);
                order
            }
        }
    }

    /// Every declaration order the policy can produce, with its long-run frequency.
    pub fn order_distribution(&self) -> Vec<([Party; 3], f64)> {
        match self {
            DeclarationPolicy::Fixed(order) => vec![(*order, 1.0)],
            DeclarationPolicy::RoundRobin => (0..3).map(|k| (rotation(k), 1.0 / 3.0)).collect(),
            DeclarationPolicy::Random => {
                let mut out = Vec::with_capacity(6);
                for a in Party::ALL {
                    for b in Party::ALL {
                        for c in Party::ALL {
                            if a != b && b != c && a != c {
                                out.push(([a, b, c], 1.0 / 6.0));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DeclarationPolicy::Fixed(order) = self {
            let mut sorted = *order;
            sorted.sort();
            if sorted != Party::ALL {
                return Err(QError::invalid("fixed declaration order must be a permutation"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DeclarationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeclarationPolicy::Fixed(o) => write!(f, "fixed:{},{},{}", o[0], o[1], o[2]),
            DeclarationPolicy::RoundRobin => f.write_str("round-robin"),
            DeclarationPolicy::Random => f.write_str("random"),
        }
    }
}

impl std::str::FromStr for DeclarationPolicy {
    type Err = QError;

    /// `random`, `round-robin`, `bob-last`, `bob-first`, or `fixed:a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let policy = match lower.as_str() {
            "random" => DeclarationPolicy::Random,
            "round-robin" | "roundrobin" | "turns" => DeclarationPolicy::RoundRobin,
            "bob-last" | "fixed" => DeclarationPolicy::bob_last(),
            "bob-first" => DeclarationPolicy::bob_first(),
            other => {
                let body = other
                    .strip_prefix("fixed:")
                    .ok_or_else(|| QError::invalid(format!("unknown declaration policy {s:?}")))?;
                let parties: Vec<Party> = body.split(',').map(str::parse).collect::<Result<_>>()?;
                let order: [Party; 3] = parties
                    .try_into()
                    .map_err(|_| QError::invalid("fixed order needs exactly three parties"))?;
                DeclarationPolicy::Fixed(order)
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Which op Alice encodes in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpChoice {
    Fixed(PauliOp),
    Random,
}

impl OpChoice {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> PauliOp {
        match self {
            OpChoice::Fixed(op) => op,
            OpChoice::Random => PauliOp::ALL[rng.gen_range(0..4)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QssDecode {
    Op(PauliOp),
    /// Triple outside the 32 valid ones: channel corruption or cheating.
    Inconsistent,
}

impl QssDecode {
    pub fn op(self) -> Option<PauliOp> {
        match self {
            QssDecode::Op(op) => Some(op),
            QssDecode::Inconsistent => None,
        }
    }
}

impl fmt::Display for QssDecode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QssDecode::Op(op) => write!(f, "{op}"),
            QssDecode::Inconsistent => f.write_str("inconsistent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QssTranscript {
    pub encoded_op: PauliOp,
    pub outcome_14: BellOutcome,
    pub outcome_25: BellOutcome,
    pub outcome_36: BellOutcome,
    pub declaration_order: [Party; 3],
    pub decoded_op: QssDecode,
}

impl QssTranscript {
    pub fn triple(&self) -> BellTriple {
        BellTriple::new(self.outcome_14, self.outcome_25, self.outcome_36)
    }

    pub fn outcome_of(&self, party: Party) -> BellOutcome {
        self.triple().as_array()[party.pair_index()]
    }

    pub fn decoded_correctly(&self) -> bool {
        self.decoded_op == QssDecode::Op(self.encoded_op)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QssDecodeTable {
    map: BTreeMap<BellTriple, PauliOp>,
}

impl QssDecodeTable {
    fn from_decompositions() -> Self {
        let mut map = BTreeMap::new();
        for table in decomposition_tables() {
            for t in table.triples() {
                let prev = map.insert(t, table.op);
                assert!(prev.is_none(), "triple {t} decodes to two ops");
            }
        }
        assert_eq!(map.len(), 32);
        Self { map }
    }

    pub fn lookup(&self, t: BellTriple) -> QssDecode {
        self.map
            .get(&t)
            .map_or(QssDecode::Inconsistent, |&op| QssDecode::Op(op))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Valid triples in lexicographic order (Phi+ < Phi- < Psi+ < Psi-).
    pub fn rows(&self) -> impl Iterator<Item = (BellTriple, PauliOp)> + '_ {
        self.map.iter().map(|(&t, &op)| (t, op))
    }
}

pub fn qss_decode_table() -> &'static QssDecodeTable {
    static TABLE: OnceLock<QssDecodeTable> = OnceLock::new();
    TABLE.get_or_init(QssDecodeTable::from_decompositions)
}

pub fn decode_qss(o14: BellOutcome, o25: BellOutcome, o36: BellOutcome) -> QssDecode {
    qss_decode_table().lookup(BellTriple::new(o14, o25, o36))
}

/// Outcomes known to an observer; `None` means not heard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KnownOutcomes {
    pub o14: Option<BellOutcome>,
    pub o25: Option<BellOutcome>,
    pub o36: Option<BellOutcome>,
}

impl KnownOutcomes {
    fn admits(&self, t: BellTriple) -> bool {
        self.o14.is_none_or(|o| o == t.o14)
            && self.o25.is_none_or(|o| o == t.o25)
            && self.o36.is_none_or(|o| o == t.o36)
    }

    pub fn with(mut self, party: Party, outcome: BellOutcome) -> Self {
        match party {
            Party::Alice => self.o14 = Some(outcome),
            Party::Bob => self.o25 = Some(outcome),
            Party::Charlie => self.o36 = Some(outcome),
        }
        self
    }
}

/// Exact posterior over the encoded op given a subset of outcomes, under a
/// uniform prior.
pub fn marginal_information(known: KnownOutcomes) -> Posterior {
    let mut weights = [0.0; 4];
    for table in decomposition_tables() {
        weights[table.op.index()] = table
            .branches
            .iter()
            .filter(|b| known.admits(b.triple()))
            .map(|b| b.probability())
            .sum();
    }
    Posterior::from_weights(weights)
}

/// One message round with an optional channel attack.
pub fn run_qss_round_with<R: Rng + ?Sized>(
    choice: OpChoice,
    adversary: &AdversaryModel,
    policy: &DeclarationPolicy,
    round: u64,
    rng: &mut R,
) -> Result<QssTranscript> {
    let encoded_op = choice.draw(rng);
    let mut state: StateVector = encoded_two_ghz(encoded_op);
    state = adversary.disturb_message(&state, rng)?;
    let mut outcomes = [BellOutcome::PhiPlus; 3];
    for (k, &(i, j)) in SWAP_PAIRS.iter().enumerate() {
        let (o, residual) = measure_bell(&state, i, j, rng)?;
        outcomes[k] = o;
        match residual {
            Some(r) => state = r,
            None => debug_assert_eq!(k, 2),
        }
    }
    let declaration_order = policy.order(round, rng);
    let [o14, o25, o36] = outcomes;
    Ok(QssTranscript {
        encoded_op,
        outcome_14: o14,
        outcome_25: o25,
        outcome_36: o36,
        declaration_order,
        decoded_op: decode_qss(o14, o25, o36),
    })
}

/// Honest message round with the default (random) declaration policy.
pub fn run_qss_round<R: Rng + ?Sized>(choice: OpChoice, rng: &mut R) -> QssTranscript {
    run_qss_round_with(choice, &AdversaryModel::none(), &DeclarationPolicy::Random, 0, rng)
        .expect("honest round cannot fail")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_message_rounds: u64,
    /// Check rounds per message round; `round(check_fraction * n_message_rounds)`
    /// check rounds are interleaved at random positions.
    pub check_fraction: f64,
    pub adversary: AdversaryModel,
    pub policy: DeclarationPolicy,
}

impl SessionConfig {
    pub fn honest(n_message_rounds: u64, check_fraction: f64) -> Self {
        Self {
            n_message_rounds,
            check_fraction,
            adversary: AdversaryModel::none(),
            policy: DeclarationPolicy::Random,
        }
    }

    pub fn planned_check_rounds(&self) -> u64 {
        (self.check_fraction * self.n_message_rounds as f64).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_message_rounds == 0 {
            return Err(QError::invalid("a session needs at least one message round"));
        }
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(QError::invalid(format!(
                "check fraction {} is outside [0, 1]",
                self.check_fraction
            )));
        }
        self.adversary.validate()?;
        self.policy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    /// Message rounds executed before the session ended.
    pub rounds: u64,
    pub check_rounds: u64,
    pub failures: u64,
    /// Fraction of executed message rounds that decoded to the encoded op;
    /// `None` when no message round ran.
    pub decode_accuracy: Option<f64>,
    pub decode_correct: u64,
    pub tamper_count: u64,
    pub aborted: bool,
    pub adversary: AdversaryModel,
    pub seed: u64,
    pub generator: &'static str,
}

/// Stream index reserved for the session schedule; rounds use their slot index.
const SCHEDULE_STREAM: u64 = u64::MAX;

/// Runs message rounds interleaved with GHZ parity checks. The first failed
/// check aborts the session. Slot `k` draws from stream `(seed, k)`.
pub fn run_qss_session(cfg: &SessionConfig, seed: u64) -> Result<SessionReport> {
    cfg.validate()?;
    let n_checks = cfg.planned_check_rounds();
    let total = cfg.n_message_rounds + n_checks;
    let mut is_check: Vec<bool> = (0..total).map(|k| k < n_checks).collect();
    is_check.shuffle(&mut trial_stream(seed, SCHEDULE_STREAM));

    let mut report = SessionReport {
        rounds: 0,
        check_rounds: 0,
        failures: 0,
        decode_accuracy: None,
        decode_correct: 0,
        tamper_count: 0,
        aborted: false,
        adversary: cfg.adversary,
        seed,
        generator: GENERATOR,
    };
    let mut message_index = 0u64;
    for (slot, check) in is_check.into_iter().enumerate() {
        let mut rng = trial_stream(seed, slot as u64);
        if check {
            report.check_rounds += 1;
            if check_round(&cfg.adversary, &mut rng)?.verdict == Verdict::Fail {
                report.failures += 1;
                report.aborted = true;
                break;
            }
        } else {
            let t = run_qss_round_with(OpChoice::Random, &cfg.adversary, &cfg.policy, message_index, &mut rng)?;
            message_index += 1;
            report.rounds += 1;
            match t.decoded_op {
                QssDecode::Inconsistent => report.tamper_count += 1,
                QssDecode::Op(op) if op == t.encoded_op => report.decode_correct += 1,
                QssDecode::Op(_) => {}
            }
        }
    }
    if report.rounds > 0 {
        report.decode_accuracy = Some(report.decode_correct as f64 / report.rounds as f64);
    }
    Ok(report)
}
