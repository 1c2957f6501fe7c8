//! Canonical states and the two-bit Pauli encoding alphabet.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QError, Result};
use crate::qstate::{c, Amplitude, Gate2, StateVector};

/// Local encoding operation applied by the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    #[serde(rename = "iY")]
    IY,
    Z,
}

impl PauliOp {
    /// All four ops in cbit order (00, 01, 10, 11).
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::X, PauliOp::IY, PauliOp::Z];

    pub fn matrix(self) -> Gate2 {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        match self {
            PauliOp::I => [[one, z], [z, one]],
            PauliOp::X => [[z, one], [one, z]],
            // i * sigma_y = [[0, 1], [-1, 0]]
            PauliOp::IY => [[z, one], [-one, z]],
            PauliOp::Z => [[one, z], [z, -one]],
        }
    }

    /// 1 when the op exchanges |0> and |1>.
    pub fn amplitude_flip(self) -> u8 {
        matches!(self, PauliOp::X | PauliOp::IY) as u8
    }

    /// 1 when the op puts a relative minus sign between |0> and |1>.
    pub fn phase_flip(self) -> u8 {
        matches!(self, PauliOp::IY | PauliOp::Z) as u8
    }

    pub fn from_flips(amplitude_flip: u8, phase_flip: u8) -> PauliOp {
        match (amplitude_flip, phase_flip) {
            (0, 0) => PauliOp::I,
            (1, 0) => PauliOp::X,
            (1, _) => PauliOp::IY,
            _ => PauliOp::Z,
        }
    }

    pub fn cbits(self) -> CbitPair {
        pauli_to_cbits(self)
    }

    /// Position in cbit order; used as the argmax tie-break.
    pub fn index(self) -> usize {
        let CbitPair { hi, lo } = pauli_to_cbits(self);
        ((hi << 1) | lo) as usize
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliOp::I => "I",
            PauliOp::X => "X",
            PauliOp::IY => "iY",
            PauliOp::Z => "Z",
        })
    }
}

impl FromStr for PauliOp {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "id" | "identity" => Ok(PauliOp::I),
            "x" | "sx" | "sigma-x" => Ok(PauliOp::X),
            "iy" | "isy" | "i-sigma-y" => Ok(PauliOp::IY),
            "z" | "sz" | "sigma-z" => Ok(PauliOp::Z),
            other => Err(QError::invalid(format!("unknown Pauli op {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CbitPair {
    pub hi: u8,
    pub lo: u8,
}

impl fmt::Display for CbitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.hi, self.lo)
    }
}

/// Fixed message mapping: I=00, X=01, iY=10, Z=11.
pub fn pauli_to_cbits(op: PauliOp) -> CbitPair {
    let (hi, lo) = match op {
        PauliOp::I => (0, 0),
        PauliOp::X => (0, 1),
        PauliOp::IY => (1, 0),
        PauliOp::Z => (1, 1),
    };
    CbitPair { hi, lo }
}

pub fn cbits_to_pauli(cbits: CbitPair) -> PauliOp {
    match (cbits.hi & 1, cbits.lo & 1) {
        (0, 0) => PauliOp::I,
        (0, 1) => PauliOp::X,
        (1, 0) => PauliOp::IY,
        _ => PauliOp::Z,
    }
}

/// Outcome of a two-qubit Bell-basis measurement. The derived order
/// (Phi+ < Phi- < Psi+ < Psi-) is the table sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BellOutcome {
    #[serde(rename = "Phi+")]
    PhiPlus,
    #[serde(rename = "Phi-")]
    PhiMinus,
    #[serde(rename = "Psi+")]
    PsiPlus,
    #[serde(rename = "Psi-")]
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// 0 for Phi-type, 1 for Psi-type.
    pub fn kind_bit(self) -> u8 {
        matches!(self, BellOutcome::PsiPlus | BellOutcome::PsiMinus) as u8
    }

    /// 0 for the + states, 1 for the - states.
    pub fn sign_bit(self) -> u8 {
        matches!(self, BellOutcome::PhiMinus | BellOutcome::PsiMinus) as u8
    }

    pub fn from_bits(kind: u8, sign: u8) -> BellOutcome {
        match (kind & 1, sign & 1) {
            (0, 0) => BellOutcome::PhiPlus,
            (0, 1) => BellOutcome::PhiMinus,
            (1, 0) => BellOutcome::PsiPlus,
            _ => BellOutcome::PsiMinus,
        }
    }

    pub fn index(self) -> usize {
        (self.kind_bit() as usize) << 1 | self.sign_bit() as usize
    }

    /// `amps[a][b]` is the coefficient of `|a b>`.
    pub fn amplitudes(self) -> Gate2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = if self.sign_bit() == 1 { -h } else { h };
        let z = c(0.0, 0.0);
        if self.kind_bit() == 0 {
            [[c(h, 0.0), z], [z, c(s, 0.0)]]
        } else {
            [[z, c(h, 0.0)], [c(s, 0.0), z]]
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellOutcome::PhiPlus => "Phi+",
            BellOutcome::PhiMinus => "Phi-",
            BellOutcome::PsiPlus => "Psi+",
            BellOutcome::PsiMinus => "Psi-",
        })
    }
}

impl FromStr for BellOutcome {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi+" => Ok(BellOutcome::PhiPlus),
            "phi-" => Ok(BellOutcome::PhiMinus),
            "psi+" => Ok(BellOutcome::PsiPlus),
            "psi-" => Ok(BellOutcome::PsiMinus),
            other => Err(QError::invalid(format!("unknown Bell outcome {other:?}"))),
        }
    }
}

/// Distribution over the four encoding ops, in `PauliOp::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Posterior {
    pub probs: [f64; 4],
}

impl Posterior {
    pub fn uniform() -> Self {
        Self { probs: [0.25; 4] }
    }

    /// Normalizes nonnegative weights; all-zero weights give the uniform distribution.
    pub fn from_weights(weights: [f64; 4]) -> Self {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Self::uniform();
        }
        Self {
            probs: weights.map(|w| w / total),
        }
    }

    pub fn prob(&self, op: PauliOp) -> f64 {
        self.probs[op.index()]
    }

    pub fn entropy_bits(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    /// Most likely op; ties (within 1e-12) go to the lowest cbit encoding.
    pub fn guess(&self) -> PauliOp {
        let mut best = 0;
        for k in 1..4 {
            if self.probs[k] > self.probs[best] + 1e-12 {
                best = k;
            }
        }
        PauliOp::ALL[best]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

/// `(|000> + |111>)/sqrt2`.
pub fn ghz3() -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(h, 0.0);
    amps[7] = c(h, 0.0);
    StateVector::from_amplitudes(amps).expect("GHZ state is normalized")
}

/// `(|001> + |010> + |100>)/sqrt3`.
pub fn w3() -> StateVector {
    w_n(3).expect("3 is in range")
}

/// Equal superposition of the `m` single-excitation basis states.
pub fn w_n(m: usize) -> Result<StateVector> {
    if !(3..=12).contains(&m) {
        return Err(QError::invalid(format!("W state width {m} is outside 3..=12")));
    }
    let a = 1.0 / (m as f64).sqrt();
    let mut amps: Vec<Amplitude> = vec![c(0.0, 0.0); 1 << m];
    for k in 0..m {
        amps[1 << k] = c(a, 0.0);
    }
    StateVector::from_amplitudes(amps)
}

pub fn bell_state(k: BellOutcome) -> StateVector {
    let m = k.amplitudes();
    StateVector::from_amplitudes(vec![m[0][0], m[0][1], m[1][0], m[1][1]]).expect("Bell states are normalized")
}
