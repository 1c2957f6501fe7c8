//! Bell-basis measurement and the exhaustive Bell-triple decomposition of
//! the encoded two-GHZ product state.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{ghz3, BellOutcome, PauliOp};
use crate::error::{QError, Result};
use crate::qstate::{c, inner_product, Amplitude, QubitId, StateVector, PROB_FLOOR};

/// The three swapping pairs, in measurement order.
pub const SWAP_PAIRS: [(QubitId, QubitId); 3] = [
    (QubitId(1), QubitId(4)),
    (QubitId(2), QubitId(5)),
    (QubitId(3), QubitId(6)),
];

/// One entry of a Bell-basis projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BellProjection {
    pub outcome: BellOutcome,
    pub probability: f64,
    /// Renormalized post-measurement state on the surviving qubits. `None`
    /// when the outcome is impossible or no qubits remain.
    pub residual: Option<StateVector>,
}

/// Projects qubits `i`, `j` onto each of the four Bell states. Entries come
/// back in `BellOutcome::ALL` order; the measured pair is removed from the
/// residual register and the survivors keep their labels.
pub fn bell_project(s: &StateVector, i: QubitId, j: QubitId) -> Result<Vec<BellProjection>> {
    if i == j {
        return Err(QError::invalid("Bell pair qubits must differ"));
    }
    s.position(i)?;
    s.position(j)?;
    BellOutcome::ALL
        .iter()
        .map(|&outcome| {
            let (rest, amps) = s.contract_pair(i, j, &outcome.amplitudes())?;
            let probability: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let residual = if probability < PROB_FLOOR || rest.is_empty() {
                None
            } else {
                let scale = 1.0 / probability.sqrt();
                let amps = amps.into_iter().map(|a| a * scale).collect();
                Some(StateVector::from_parts(rest, amps))
            };
            Ok(BellProjection {
                outcome,
                probability,
                residual,
            })
        })
        .collect()
}

/// Samples a Bell-basis measurement of `(i, j)` by the Born rule.
pub fn measure_bell<R: Rng + ?Sized>(
    s: &StateVector,
    i: QubitId,
    j: QubitId,
    rng: &mut R,
) -> Result<(BellOutcome, Option<StateVector>)> {
    let entries = bell_project(s, i, j)?;
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_possible = None;
    for (k, e) in entries.iter().enumerate() {
        if e.probability < PROB_FLOOR {
            continue;
        }
        last_possible = Some(k);
        acc += e.probability;
        if draw < acc {
            let e = entries.into_iter().nth(k).unwrap();
            return Ok((e.outcome, e.residual));
        }
    }
    // rounding left the draw past the cumulative sum
    let k = last_possible.ok_or_else(|| QError::invalid("state has no Bell-basis support"))?;
    let e = entries.into_iter().nth(k).unwrap();
    Ok((e.outcome, e.residual))
}

/// Outcomes on pairs (1,4), (2,5), (3,6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BellTriple {
    pub o14: BellOutcome,
    pub o25: BellOutcome,
    pub o36: BellOutcome,
}

impl BellTriple {
    pub fn new(o14: BellOutcome, o25: BellOutcome, o36: BellOutcome) -> Self {
        Self { o14, o25, o36 }
    }

    /// All 64 triples in lexicographic order.
    pub fn all() -> impl Iterator<Item = BellTriple> {
        BellOutcome::ALL.into_iter().flat_map(|a| {
            BellOutcome::ALL
                .into_iter()
                .flat_map(move |b| BellOutcome::ALL.into_iter().map(move |c| BellTriple::new(a, b, c)))
        })
    }

    pub fn index(self) -> usize {
        self.o14.index() * 16 + self.o25.index() * 4 + self.o36.index()
    }

    pub fn as_array(self) -> [BellOutcome; 3] {
        [self.o14, self.o25, self.o36]
    }
}

impl fmt::Display for BellTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(1,4) {}(2,5) {}(3,6)", self.o14, self.o25, self.o36)
    }
}

/// One nonzero term of a Bell decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellBranch {
    pub outcomes: Vec<(QubitId, QubitId, BellOutcome)>,
    pub coeff: Amplitude,
}

impl BellBranch {
    pub fn probability(&self) -> f64 {
        self.coeff.norm_sqr()
    }

    pub fn triple(&self) -> BellTriple {
        BellTriple::new(self.outcomes[0].2, self.outcomes[1].2, self.outcomes[2].2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionTable {
    pub op: PauliOp,
    pub branches: Vec<BellBranch>,
}

impl DecompositionTable {
    pub fn triples(&self) -> BTreeSet<BellTriple> {
        self.branches.iter().map(BellBranch::triple).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(BellBranch::probability).sum()
    }

    pub fn coeff_of(&self, t: BellTriple) -> Option<Amplitude> {
        self.branches.iter().find(|b| b.triple() == t).map(|b| b.coeff)
    }
}

/// Six-qubit product of three Bell states on the swapping pairs.
pub fn bell_triple_state(t: BellTriple) -> StateVector {
    let [a, b, cc] = [t.o14.amplitudes(), t.o25.amplitudes(), t.o36.amplitudes()];
    let amps = (0..64usize)
        .map(|idx| {
            let bit = |q: usize| (idx >> (6 - q)) & 1;
            a[bit(1)][bit(4)] * b[bit(2)][bit(5)] * cc[bit(3)][bit(6)]
        })
        .collect();
    StateVector::from_amplitudes(amps).expect("Bell product is normalized")
}

/// `apply_pauli(ghz3 (x) ghz3, qubit 1, op)`.
pub fn encoded_two_ghz(op: PauliOp) -> StateVector {
    let g = ghz3();
    g.tensor(&g)
        .and_then(|s| s.apply_pauli(QubitId(1), op))
        .expect("six qubits fit the register")
}

/// Expands the encoded two-GHZ state by inner products against all 64
/// Bell-triple product states and keeps the nonzero ones.
pub fn decompose_two_ghz(op: PauliOp) -> DecompositionTable {
    let state = encoded_two_ghz(op);
    let branches = BellTriple::all()
        .filter_map(|t| {
            let coeff = inner_product(&bell_triple_state(t), &state).expect("same width");
            (coeff.norm_sqr() > PROB_FLOOR).then(|| BellBranch {
                outcomes: SWAP_PAIRS
                    .iter()
                    .zip(t.as_array())
                    .map(|(&(i, j), o)| (i, j, o))
                    .collect(),
                coeff,
            })
        })
        .collect();
    DecompositionTable { op, branches }
}

/// Memoized decomposition for each op, in `PauliOp::ALL` order.
pub fn decomposition_tables() -> &'static [DecompositionTable; 4] {
    static TABLES: OnceLock<[DecompositionTable; 4]> = OnceLock::new();
    TABLES.get_or_init(|| PauliOp::ALL.map(decompose_two_ghz))
}

/// Joint outcome distribution of Bell measurements on pairs (1,4), (2,5),
/// (3,6) of a register labeled `1..=n` (n >= 6). Any qubits beyond 6 are
/// traced out. Indexed by [`BellTriple::index`].
pub fn triple_probabilities(s: &StateVector) -> Result<[f64; 64]> {
    let n = s.n_qubits();
    if n < 6 {
        return Err(QError::invalid("triple distribution needs at least six qubits"));
    }
    let pos: Vec<usize> = (1..=6).map(|l| s.position(QubitId(l))).collect::<Result<_>>()?;
    let extra = n - 6;
    let shift = |p: usize| n - 1 - p;
    let mut probs = [0.0; 64];
    let mut acc = vec![c(0.0, 0.0); 1 << extra];
    for t in BellTriple::all() {
        let phis = [t.o14.amplitudes(), t.o25.amplitudes(), t.o36.amplitudes()];
        acc.iter_mut().for_each(|a| *a = c(0.0, 0.0));
        for (idx, amp) in s.amps().iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let bit = |k: usize| (idx >> shift(pos[k - 1])) & 1;
            let w = phis[0][bit(1)][bit(4)].conj() * phis[1][bit(2)][bit(5)].conj() * phis[2][bit(3)][bit(6)].conj();
            if w.norm_sqr() == 0.0 {
                continue;
            }
            // pack the remaining qubits, in register order, into the residual index
            let mut r = 0usize;
            for p in 0..n {
                if pos.contains(&p) {
                    continue;
                }
                r = (r << 1) | ((idx >> shift(p)) & 1);
            }
            acc[r] += w * amp;
        }
        probs[t.index()] = acc.iter().map(|a| a.norm_sqr()).sum();
    }
    Ok(probs)
}

// ---------------------------------------------------------------------------
// Cross-check against the published expansions.

/// One term of a published expansion. `o14 == None` marks a term printed
/// without its (1,4) factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrintedTerm {
    pub sign: i8,
    pub o14: Option<BellOutcome>,
    pub o25: BellOutcome,
    pub o36: BellOutcome,
}

const fn term(sign: i8, o14: Option<BellOutcome>, o25: BellOutcome, o36: BellOutcome) -> PrintedTerm {
    PrintedTerm { sign, o14, o25, o36 }
}

use BellOutcome::{PhiMinus as FM, PhiPlus as FP, PsiMinus as SM, PsiPlus as SP};

/// Transcription of the published expansions, all with common factor sqrt2/4,
/// indexed like `PauliOp::ALL`.
pub const PUBLISHED_EXPANSIONS: [[PrintedTerm; 8]; 4] = [
    // I
    [
        term(1, Some(FP), FP, FP),
        term(1, Some(FP), FM, FM),
        term(1, Some(FM), FP, FM),
        term(1, Some(FM), FM, FP),
        term(1, Some(SP), SP, SP),
        term(1, Some(SP), SM, SM),
        term(-1, Some(SM), SP, SM),
        term(-1, Some(SM), SM, SP),
    ],
    // X: the first bracket is printed without a (1,4) factor
    [
        term(1, None, SP, SP),
        term(1, None, SM, SM),
        term(-1, Some(FM), SP, SM),
        term(-1, Some(FM), SM, SP),
        term(1, Some(SP), FP, FP),
        term(1, Some(SP), FM, FM),
        term(-1, Some(SM), FP, FM),
        term(-1, Some(SM), FM, FP),
    ],
    // iY
    [
        term(1, Some(FP), SP, SM),
        term(1, Some(FP), SM, SP),
        term(-1, Some(FM), SP, SP),
        term(-1, Some(FM), SM, SM),
        term(-1, Some(SP), SP, SM),
        term(-1, Some(SP), SM, SP),
        term(-1, Some(SM), SP, SP),
        term(-1, Some(SM), SM, SM),
    ],
    // Z
    [
        term(1, Some(FP), FP, FM),
        term(1, Some(FP), FM, FP),
        term(1, Some(FM), FP, FP),
        term(1, Some(FM), FM, FM),
        term(1, Some(SP), FP, FM),
        term(1, Some(SP), FM, FP),
        term(1, Some(SM), FP, FP),
        term(1, Some(SM), FM, FM),
    ],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyStatus {
    Match,
    /// Same triple, opposite sign after global-phase alignment.
    SignDifference,
    /// Printed term lacks its (1,4) factor; the computed branch supplies it.
    MissingFactor,
    /// Printed term has the wrong Bell type on pairs (2,5) and (3,6).
    PairTypeMismatch,
    /// Printed triple has zero amplitude in the computed expansion.
    Spurious,
    /// Computed branch with no printed counterpart.
    Omitted,
}

impl DiscrepancyStatus {
    pub fn is_structural(self) -> bool {
        !matches!(self, DiscrepancyStatus::Match | DiscrepancyStatus::SignDifference)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyEntry {
    pub branch: String,
    pub printed: Option<String>,
    pub computed: Option<String>,
    pub status: DiscrepancyStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpDiscrepancies {
    pub op: PauliOp,
    /// Global phase applied to the computed coefficients before comparing signs.
    pub phase_alignment: String,
    pub structural: usize,
    pub sign_differences: usize,
    pub computed_probability_sum: f64,
    pub entries: Vec<DiscrepancyEntry>,
}

/// Comparison of the printed six-qubit starting state against the product of
/// two GHZ triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinedStateCheck {
    pub printed: String,
    pub used: String,
    pub overlap_magnitude: f64,
    pub equal_up_to_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub combined_state: CombinedStateCheck,
    pub ops: Vec<OpDiscrepancies>,
}

impl DiscrepancyReport {
    pub fn for_op(&self, op: PauliOp) -> &OpDiscrepancies {
        self.ops.iter().find(|o| o.op == op).expect("all four ops reported")
    }
}

fn printed_label(t: &PrintedTerm) -> String {
    let sign = if t.sign < 0 { "-" } else { "+" };
    match t.o14 {
        Some(o) => format!("{sign}sqrt2/4 {}", BellTriple::new(o, t.o25, t.o36)),
        None => format!("{sign}sqrt2/4 {}(2,5) {}(3,6)", t.o25, t.o36),
    }
}

fn computed_label(t: BellTriple, coeff: Amplitude) -> String {
    let sign = if coeff.re < 0.0 || (coeff.re.abs() < 1e-12 && coeff.im < 0.0) {
        "-"
    } else {
        "+"
    };
    format!("{sign}{:.6} {}", coeff.norm(), t)
}

fn sign_of(a: Amplitude) -> i8 {
    if a.re.abs() >= a.im.abs() {
        if a.re >= 0.0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

fn compare_op(op: PauliOp, table: &DecompositionTable, printed: &[PrintedTerm]) -> OpDiscrepancies {
    let phases = [
        (c(1.0, 0.0), "1"),
        (c(-1.0, 0.0), "-1"),
        (c(0.0, 1.0), "i"),
        (c(0.0, -1.0), "-i"),
    ];
    let (phase, phase_name) = phases
        .iter()
        .copied()
        .max_by_key(|(ph, _)| {
            // ties keep the earliest candidate
            let agree = printed
                .iter()
                .filter_map(|p| {
                    let t = BellTriple::new(p.o14?, p.o25, p.o36);
                    table.coeff_of(t).map(|cf| sign_of(cf * ph) == p.sign)
                })
                .filter(|&ok| ok)
                .count();
            (agree, std::cmp::Reverse(phases.iter().position(|x| x.0 == *ph)))
        })
        .unwrap();

    let mut matched: BTreeSet<BellTriple> = BTreeSet::new();
    let mut entries = Vec::new();
    let mut unresolved = Vec::new();

    for p in printed {
        if let Some(o14) = p.o14 {
            let t = BellTriple::new(o14, p.o25, p.o36);
            if let Some(cf) = table.coeff_of(t) {
                let aligned = cf * phase;
                let status = if sign_of(aligned) == p.sign {
                    DiscrepancyStatus::Match
                } else {
                    DiscrepancyStatus::SignDifference
                };
                matched.insert(t);
                entries.push(DiscrepancyEntry {
                    branch: t.to_string(),
                    printed: Some(printed_label(p)),
                    computed: Some(computed_label(t, aligned)),
                    status,
                });
                continue;
            }
        }
        unresolved.push(*p);
    }

    for p in unresolved {
        let candidate = table
            .branches
            .iter()
            .map(|b| (b.triple(), b.coeff))
            .filter(|(t, _)| !matched.contains(t))
            .find(|(t, _)| match p.o14 {
                None => t.o25 == p.o25 && t.o36 == p.o36,
                Some(o14) => {
                    t.o14 == o14
                        && t.o25.sign_bit() == p.o25.sign_bit()
                        && t.o36.sign_bit() == p.o36.sign_bit()
                        && t.o25.kind_bit() != p.o25.kind_bit()
                        && t.o36.kind_bit() != p.o36.kind_bit()
                }
            });
        match candidate {
            Some((t, cf)) => {
                matched.insert(t);
                entries.push(DiscrepancyEntry {
                    branch: t.to_string(),
                    printed: Some(printed_label(&p)),
                    computed: Some(computed_label(t, cf * phase)),
                    status: if p.o14.is_none() {
                        DiscrepancyStatus::MissingFactor
                    } else {
                        DiscrepancyStatus::PairTypeMismatch
                    },
                });
            }
            None => entries.push(DiscrepancyEntry {
                branch: match p.o14 {
                    Some(o) => BellTriple::new(o, p.o25, p.o36).to_string(),
                    None => format!("?(1,4) {}(2,5) {}(3,6)", p.o25, p.o36),
                },
                printed: Some(printed_label(&p)),
                computed: None,
                status: DiscrepancyStatus::Spurious,
            }),
        }
    }

    for b in &table.branches {
        let t = b.triple();
        if !matched.contains(&t) {
            entries.push(DiscrepancyEntry {
                branch: t.to_string(),
                printed: None,
                computed: Some(computed_label(t, b.coeff * phase)),
                status: DiscrepancyStatus::Omitted,
            });
        }
    }

    OpDiscrepancies {
        op,
        phase_alignment: phase_name.to_string(),
        structural: entries.iter().filter(|e| e.status.is_structural()).count(),
        sign_differences: entries
            .iter()
            .filter(|e| e.status == DiscrepancyStatus::SignDifference)
            .count(),
        computed_probability_sum: table.total_probability(),
        entries,
    }
}

fn combined_state_check() -> CombinedStateCheck {
    let g = ghz3();
    let product = g.tensor(&g).expect("six qubits");
    // printed form: 1/2 (|000> + |111>)(|000> + i|111>)
    let mut amps = vec![c(0.0, 0.0); 64];
    amps[0] = c(0.5, 0.0);
    amps[7] = c(0.0, 0.5);
    amps[56] = c(0.5, 0.0);
    amps[63] = c(0.0, 0.5);
    let printed = StateVector::from_amplitudes(amps).expect("normalized");
    let overlap = inner_product(&product, &printed).expect("same width").norm();
    CombinedStateCheck {
        printed: "1/2(|000>+|111>)_{1,2,3}(|000>+i|111>)_{4,5,6}".into(),
        used: "1/2(|000>+|111>)_{1,2,3}(|000>+|111>)_{4,5,6}".into(),
        overlap_magnitude: overlap,
        equal_up_to_phase: overlap >= 1.0 - 1e-12,
    }
}

/// Compares the computed decompositions with the published expansions.
/// Disagreements are returned as data.
pub fn verify_against_printed() -> DiscrepancyReport {
    let tables = decomposition_tables();
    DiscrepancyReport {
        combined_state: combined_state_check(),
        ops: PauliOp::ALL
            .iter()
            .zip(tables.iter())
            .zip(PUBLISHED_EXPANSIONS.iter())
            .map(|((&op, table), printed)| compare_op(op, table, printed))
            .collect(),
    }
}
