//! Exact complex state vectors over small labeled qubit registers.
//!
//! Basis indices put qubit 1 in the most significant bit, so a ket written
//! left to right (`|b1 b2 ... bn>`) maps to index `sum_k b_k * 2^(n-k)`.
//! Every operation returns a new state; nothing is mutated in place.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canon::PauliOp;
use crate::error::{QError, Result};

pub type Amplitude = Complex64;

/// 2x2 single-qubit operator, row-major: `m[out][in]`.
pub type Gate2 = [[Amplitude; 2]; 2];

/// Hard cap on register width.
pub const MAX_QUBITS: usize = 16;

/// Tolerance for normalization and probability-sum checks.
pub const NORM_TOL: f64 = 1e-9;

/// Tolerance for per-amplitude equality.
pub const AMP_TOL: f64 = 1e-12;

/// Branches with probability below this are never sampled or returned.
pub const PROB_FLOOR: f64 = 1e-12;

/// 1-based qubit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QubitId(pub usize);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

impl From<usize> for QubitId {
    fn from(v: usize) -> Self {
        QubitId(v)
    }
}

/// Normalized pure state on a register of labeled qubits.
///
/// Labels are kept in register order (most significant first). Fresh
/// registers are labeled `1..=n`; measurements that remove qubits keep the
/// survivors' original labels in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<QubitId>,
    amps: Vec<Amplitude>,
}

fn check_width(n: usize) -> Result<()> {
    if n == 0 {
        return Err(QError::invalid("register must hold at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(QError::Capacity {
            requested: n,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

fn fresh_labels(n: usize) -> Vec<QubitId> {
    (1..=n).map(QubitId).collect()
}

impl StateVector {
    /// Computational basis state `|bits>`; `bits[0]` is qubit 1.
    pub fn basis_state(n: usize, bits: &[u8]) -> Result<Self> {
        check_width(n)?;
        if bits.len() != n {
            return Err(QError::invalid(format!("expected {n} bits, got {}", bits.len())));
        }
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(QError::invalid(format!("bit value {b} is not 0 or 1")));
            }
            index = (index << 1) | b as usize;
        }
        let mut amps = vec![Amplitude::new(0.0, 0.0); 1 << n];
        amps[index] = Amplitude::new(1.0, 0.0);
        Ok(Self {
            labels: fresh_labels(n),
            amps,
        })
    }

    /// Builds a state from amplitudes that are already normalized.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self> {
        let n = width_of(amps.len())?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QError::invalid("amplitudes must be finite"));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QError::invalid(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            labels: fresh_labels(n),
            amps,
        })
    }

    /// Builds a state from any nonzero amplitude vector, rescaling it to unit norm.
    pub fn normalized(amps: Vec<Amplitude>) -> Result<Self> {
        let n = width_of(amps.len())?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QError::invalid("amplitudes must be finite"));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm < PROB_FLOOR {
            return Err(QError::invalid("cannot normalize the zero vector"));
        }
        let scale = 1.0 / norm.sqrt();
        Ok(Self {
            labels: fresh_labels(n),
            amps: amps.into_iter().map(|a| a * scale).collect(),
        })
    }

    /// Same amplitudes under new labels (must be distinct, one per qubit).
    pub fn relabeled(&self, labels: Vec<QubitId>) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(QError::invalid("label count does not match register width"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(QError::invalid("qubit labels must be unique"));
        }
        Ok(Self {
            labels,
            amps: self.amps.clone(),
        })
    }

    pub(crate) fn from_parts(labels: Vec<QubitId>, amps: Vec<Amplitude>) -> Self {
        debug_assert_eq!(1usize << labels.len(), amps.len());
        Self { labels, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Register position of a label (0 = most significant).
    pub fn position(&self, q: QubitId) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == q)
            .ok_or_else(|| QError::invalid(format!("{q} is not in this register")))
    }

    /// Index-bit mask for a label.
    pub fn mask(&self, q: QubitId) -> Result<usize> {
        let pos = self.position(q)?;
        Ok(1 << (self.n_qubits() - 1 - pos))
    }

    /// Product state; the result is labeled `1..=n_a+n_b`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits() + other.n_qubits();
        check_width(n)?;
        let nb = other.n_qubits();
        let mut amps = vec![Amplitude::new(0.0, 0.0); 1 << n];
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in other.amps.iter().enumerate() {
                amps[(i << nb) + j] = a * b;
            }
        }
        Ok(Self {
            labels: fresh_labels(n),
            amps,
        })
    }

    pub fn apply_gate(&self, q: QubitId, gate: &Gate2) -> Result<StateVector> {
        let mask = self.mask(q)?;
        let mut amps = self.amps.clone();
        for i0 in 0..amps.len() {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            amps[i0] = gate[0][0] * a0 + gate[0][1] * a1;
            amps[i1] = gate[1][0] * a0 + gate[1][1] * a1;
        }
        Ok(Self {
            labels: self.labels.clone(),
            amps,
        })
    }

    pub fn apply_pauli(&self, q: QubitId, op: PauliOp) -> Result<StateVector> {
        self.apply_gate(q, &op.matrix())
    }

    /// Applies `gate` to `target` on the branch where `control` is 1.
    pub fn apply_controlled(&self, control: QubitId, target: QubitId, gate: &Gate2) -> Result<StateVector> {
        if control == target {
            return Err(QError::invalid("control and target must differ"));
        }
        let cmask = self.mask(control)?;
        let tmask = self.mask(target)?;
        let mut amps = self.amps.clone();
        for i0 in 0..amps.len() {
            if i0 & cmask == 0 || i0 & tmask != 0 {
                continue;
            }
            let i1 = i0 | tmask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            amps[i0] = gate[0][0] * a0 + gate[0][1] * a1;
            amps[i1] = gate[1][0] * a0 + gate[1][1] * a1;
        }
        Ok(Self {
            labels: self.labels.clone(),
            amps,
        })
    }

    /// Appends a fresh qubit in `|bit>` as the least significant position.
    /// Its label is one more than the largest existing label.
    pub fn append_qubit(&self, bit: u8) -> Result<(StateVector, QubitId)> {
        check_width(self.n_qubits() + 1)?;
        if bit > 1 {
            return Err(QError::invalid(format!("bit value {bit} is not 0 or 1")));
        }
        let label = QubitId(self.labels.iter().map(|l| l.0).max().unwrap_or(0) + 1);
        let mut amps = vec![Amplitude::new(0.0, 0.0); self.amps.len() * 2];
        for (i, a) in self.amps.iter().enumerate() {
            amps[(i << 1) | bit as usize] = *a;
        }
        let mut labels = self.labels.clone();
        labels.push(label);
        Ok((Self { labels, amps }, label))
    }

    /// Exchanges the contents of two qubits; labels stay where they are.
    pub fn swap(&self, a: QubitId, b: QubitId) -> Result<StateVector> {
        let ma = self.mask(a)?;
        let mb = self.mask(b)?;
        if ma == mb {
            return Ok(self.clone());
        }
        let mut amps = self.amps.clone();
        for (i, amp) in amps.iter_mut().enumerate() {
            let ba = i & ma != 0;
            let bb = i & mb != 0;
            let src = if ba == bb { i } else { i ^ ma ^ mb };
            *amp = self.amps[src];
        }
        Ok(Self {
            labels: self.labels.clone(),
            amps,
        })
    }

    /// Born probability of reading `bit` on qubit `q`.
    pub fn probability(&self, q: QubitId, bit: u8) -> Result<f64> {
        let mask = self.mask(q)?;
        let want = if bit == 0 { 0 } else { mask };
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects qubit `q` onto `|bit>` and renormalizes. `None` when the
    /// branch has probability below [`PROB_FLOOR`].
    pub fn project_computational(&self, q: QubitId, bit: u8) -> Result<Option<(f64, StateVector)>> {
        if bit > 1 {
            return Err(QError::invalid(format!("bit value {bit} is not 0 or 1")));
        }
        let mask = self.mask(q)?;
        let want = if bit == 0 { 0 } else { mask };
        let p = self.probability(q, bit)?;
        if p < PROB_FLOOR {
            return Ok(None);
        }
        let scale = 1.0 / p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & mask == want {
                    a * scale
                } else {
                    Amplitude::new(0.0, 0.0)
                }
            })
            .collect();
        Ok(Some((
            p,
            Self {
                labels: self.labels.clone(),
                amps,
            },
        )))
    }

    /// Samples a Z-basis readout of `q`. The measured qubit stays in the
    /// register, collapsed onto the observed value.
    pub fn measure_computational<R: Rng + ?Sized>(&self, q: QubitId, rng: &mut R) -> Result<(u8, StateVector)> {
        let p1 = self.probability(q, 1)?;
        let draw: f64 = rng.gen();
        let bit = if p1 < PROB_FLOOR {
            0
        } else {
            u8::from(1.0 - p1 < PROB_FLOOR || draw < p1)
        };
        let (_, post) = self
            .project_computational(q, bit)?
            .expect("sampled branch has nonzero probability");
        Ok((bit, post))
    }

    /// Contracts qubits `i` and `j` against the two-qubit bra `<phi|`, where
    /// `phi[a][b]` is the amplitude of `|a>_i |b>_j`. Returns the surviving
    /// labels (ascending register order) and the unnormalized residual.
    pub fn contract_pair(&self, i: QubitId, j: QubitId, phi: &Gate2) -> Result<(Vec<QubitId>, Vec<Amplitude>)> {
        if i == j {
            return Err(QError::invalid("pair qubits must differ"));
        }
        let mi = self.mask(i)?;
        let mj = self.mask(j)?;
        let rest: Vec<QubitId> = self.labels.iter().copied().filter(|&l| l != i && l != j).collect();
        let rest_masks: Vec<usize> = rest.iter().map(|&l| self.mask(l).unwrap()).collect();
        let mut out = vec![Amplitude::new(0.0, 0.0); 1 << rest.len()];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut base = 0usize;
            for (k, m) in rest_masks.iter().enumerate() {
                if r & (1 << (rest.len() - 1 - k)) != 0 {
                    base |= m;
                }
            }
            let mut acc = Amplitude::new(0.0, 0.0);
            for (a, row) in phi.iter().enumerate() {
                for (b, coeff) in row.iter().enumerate() {
                    let idx = base | if a == 1 { mi } else { 0 } | if b == 1 { mj } else { 0 };
                    acc += coeff.conj() * self.amps[idx];
                }
            }
            *slot = acc;
        }
        Ok((rest, out))
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Amplitude> {
        inner_product(self, other)
    }

    /// Equality up to a global phase: `|<a|b>| >= 1 - tol`.
    pub fn approx_eq_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        match inner_product(self, other) {
            Ok(ip) => ip.norm() >= 1.0 - tol,
            Err(_) => false,
        }
    }

    /// Indices and amplitudes of basis states with nonnegligible weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, Amplitude)> + '_ {
        self.amps
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > PROB_FLOOR)
    }
}

fn width_of(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(QError::invalid(format!(
            "amplitude count {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_width(n)?;
    Ok(n)
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Amplitude> {
    if a.n_qubits() != b.n_qubits() {
        return Err(QError::invalid(format!(
            "register widths differ: {} vs {}",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Decodes a basis index into bits, qubit 1 first.
pub fn index_bits(n: usize, index: usize) -> Vec<u8> {
    (0..n).map(|k| ((index >> (n - 1 - k)) & 1) as u8).collect()
}

pub fn c(re: f64, im: f64) -> Amplitude {
    Amplitude::new(re, im)
}

pub const HADAMARD: Gate2 = {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [Amplitude::new(h, 0.0), Amplitude::new(h, 0.0)],
        [Amplitude::new(h, 0.0), Amplitude::new(-h, 0.0)],
    ]
};

/// `S^dagger = diag(1, -i)`.
pub const S_DAG: Gate2 = [
    [Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0)],
    [Amplitude::new(0.0, 0.0), Amplitude::new(0.0, -1.0)],
];

/// `S = diag(1, i)`.
pub const S_GATE: Gate2 = [
    [Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0)],
    [Amplitude::new(0.0, 0.0), Amplitude::new(0.0, 1.0)],
];

pub fn mat_mul(a: &Gate2, b: &Gate2) -> Gate2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (col, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][col] + a[r][1] * b[1][col];
        }
    }
    out
}

/// `Ry(theta)`; `Ry(pi)` is a bit flip up to sign.
pub fn ry(theta: f64) -> Gate2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}
