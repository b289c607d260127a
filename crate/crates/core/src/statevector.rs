//! Dense statevector engine.
//!
//! Qubit 0 is the leftmost symbol of a ket, i.e. the most significant bit of
//! the amplitude index. All operations return a new state; values are never
//! mutated in place once handed out.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gates::Gate;
use crate::{IMPOSSIBLE_CUTOFF, TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bit string contains {0:?}; only '0' and '1' are allowed")]
    InvalidBit(char),
    #[error("register must hold at least one qubit")]
    Empty,
    #[error("amplitude vector length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate arity {arity} does not match {targets} targets")]
    ArityMismatch { arity: usize, targets: usize },
    #[error("qubit {0} appears twice in the target list")]
    DuplicateTarget(usize),
    #[error("not a permutation of 0..{0}")]
    InvalidPermutation(usize),
    #[error("dimension mismatch: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),
    #[error("qubit {qubit} is still entangled with the register (residual {residual:.3e})")]
    Entangled { qubit: usize, residual: f64 },
    #[error("measurement outcome must be 0 or 1, got {0}")]
    InvalidOutcome(u8),
}

/// Measurement basis. Hadamard outcomes encode `|+⟩ → 0`, `|−⟩ → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Computational,
    Hadamard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub qubit: usize,
    pub basis: Basis,
    pub outcome: u8,
    pub probability: f64,
}

/// Result of projecting onto one measurement outcome. `state` is `None` when
/// the branch is impossible (probability below the cutoff).
#[derive(Debug, Clone)]
pub struct Projection {
    pub record: MeasurementRecord,
    pub state: Option<StateVector>,
}

impl Projection {
    pub fn probability(&self) -> f64 {
        self.record.probability
    }

    pub fn is_impossible(&self) -> bool {
        self.state.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl StateVector {
    /// Wraps an amplitude vector, checking its length and normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, StateError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(StateError::BadLength(len));
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(StateVector {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Scales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self, StateError> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(StateError::NotNormalized(norm * norm));
        }
        Self::from_amplitudes(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis_state(num_qubits: usize, bits: &str) -> Result<Self, StateError> {
        if num_qubits == 0 {
            return Err(StateError::Empty);
        }
        let got = bits.chars().count();
        if got != num_qubits {
            return Err(StateError::LengthMismatch {
                expected: num_qubits,
                got,
            });
        }
        let mut index = 0usize;
        for ch in bits.chars() {
            index = (index << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(StateError::InvalidBit(other)),
                };
        }
        Ok(Self::basis_index(num_qubits, index))
    }

    /// Computational basis state `|index⟩`. Panics if `index` is out of range.
    pub fn basis_index(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits >= 1 && index < (1 << num_qubits));
        let mut amplitudes = vec![zero(); 1 << num_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector {
            num_qubits,
            amplitudes,
        }
    }

    /// Isotropic (Haar) random pure state, deterministic per seed.
    pub fn random(num_qubits: usize, seed: u64) -> Self {
        assert!(num_qubits >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << num_qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is nonzero")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    fn bit_mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit >= self.num_qubits {
            return Err(StateError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Kronecker product with `self`'s qubits leftmost.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        StateVector {
            num_qubits: self.num_qubits + other.num_qubits,
            amplitudes,
        }
    }

    /// Relabels qubits: old qubit `q` ends up at position `perm[q]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<StateVector, StateError> {
        let n = self.num_qubits;
        if perm.len() != n {
            return Err(StateError::InvalidPermutation(n));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(StateError::InvalidPermutation(n));
            }
        }
        let mut amplitudes = vec![zero(); self.amplitudes.len()];
        for (index, amp) in self.amplitudes.iter().enumerate() {
            let mut target = 0usize;
            for (old, &new) in perm.iter().enumerate() {
                if index & (1 << (n - 1 - old)) != 0 {
                    target |= 1 << (n - 1 - new);
                }
            }
            amplitudes[target] = *amp;
        }
        Ok(StateVector {
            num_qubits: n,
            amplitudes,
        })
    }

    /// Applies `gate` to `targets`; `targets[0]` is the gate's most significant
    /// qubit (the control, for controlled gates).
    pub fn apply_gate(&self, gate: &Gate, targets: &[usize]) -> Result<StateVector, StateError> {
        if gate.arity() != targets.len() {
            return Err(StateError::ArityMismatch {
                arity: gate.arity(),
                targets: targets.len(),
            });
        }
        for (i, &t) in targets.iter().enumerate() {
            self.check_qubit(t)?;
            if targets[..i].contains(&t) {
                return Err(StateError::DuplicateTarget(t));
            }
        }
        let k = targets.len();
        let sub_dim = 1usize << k;
        let masks: Vec<usize> = targets.iter().map(|&t| self.bit_mask(t)).collect();
        let all_targets = masks.iter().fold(0, |acc, m| acc | m);
        // offsets[j] is the index contribution of local basis state j
        let offsets: Vec<usize> = (0..sub_dim)
            .map(|j| {
                (0..k)
                    .filter(|&b| j & (1 << (k - 1 - b)) != 0)
                    .fold(0, |acc, b| acc | masks[b])
            })
            .collect();
        let m = gate.matrix().as_slice();
        let mut out = vec![zero(); self.amplitudes.len()];
        let mut gathered = vec![zero(); sub_dim];
        for base in (0..self.amplitudes.len()).filter(|i| i & all_targets == 0) {
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = self.amplitudes[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let row = &m[r * sub_dim..(r + 1) * sub_dim];
                out[base | off] = row.iter().zip(&gathered).map(|(a, b)| a * b).sum();
            }
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes: out,
        })
    }

    /// Projects qubit `qubit` onto the basis vector selected by `outcome`.
    pub fn project_measure(
        &self,
        qubit: usize,
        basis: Basis,
        outcome: u8,
    ) -> Result<Projection, StateError> {
        self.check_qubit(qubit)?;
        if outcome > 1 {
            return Err(StateError::InvalidOutcome(outcome));
        }
        let mask = self.bit_mask(qubit);
        let mut out = vec![zero(); self.amplitudes.len()];
        for i0 in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            let i1 = i0 | mask;
            let (a0, a1) = (self.amplitudes[i0], self.amplitudes[i1]);
            match (basis, outcome) {
                (Basis::Computational, 0) => out[i0] = a0,
                (Basis::Computational, _) => out[i1] = a1,
                (Basis::Hadamard, 0) => {
                    let p = (a0 + a1) * 0.5;
                    out[i0] = p;
                    out[i1] = p;
                }
                (Basis::Hadamard, _) => {
                    let p = (a0 - a1) * 0.5;
                    out[i0] = p;
                    out[i1] = -p;
                }
            }
        }
        let probability = norm_sqr(&out).min(1.0);
        let record = MeasurementRecord {
            qubit,
            basis,
            outcome,
            probability,
        };
        if probability < IMPOSSIBLE_CUTOFF {
            return Ok(Projection {
                record,
                state: None,
            });
        }
        let scale = 1.0 / probability.sqrt();
        out.iter_mut().for_each(|a| *a *= scale);
        Ok(Projection {
            record,
            state: Some(StateVector {
                num_qubits: self.num_qubits,
                amplitudes: out,
            }),
        })
    }

    /// Removes a qubit that is in a product state with the rest of the
    /// register. Higher qubit indices shift down by one.
    pub fn discard_qubit(&self, qubit: usize) -> Result<StateVector, StateError> {
        self.check_qubit(qubit)?;
        if self.num_qubits == 1 {
            return Err(StateError::Empty);
        }
        let mask = self.bit_mask(qubit);
        let low = mask - 1;
        let half = self.amplitudes.len() / 2;
        // branch[b][j]: amplitude of the rest-state j with the qubit set to b
        let mut branch = [vec![zero(); half], vec![zero(); half]];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let rest = ((i >> 1) & !low) | (i & low);
            branch[usize::from(i & mask != 0)][rest] = *amp;
        }
        let norms = [norm_sqr(&branch[0]), norm_sqr(&branch[1])];
        let (big, small) = if norms[0] >= norms[1] { (0, 1) } else { (1, 0) };
        let scale = 1.0 / norms[big].sqrt();
        let rest: Vec<Complex64> = branch[big].iter().map(|a| a * scale).collect();
        // the smaller branch must be parallel to the larger one
        let overlap: Complex64 = rest
            .iter()
            .zip(&branch[small])
            .map(|(a, b)| a.conj() * b)
            .sum();
        let residual = rest
            .iter()
            .zip(&branch[small])
            .map(|(a, b)| (b - overlap * a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > TOLERANCE {
            return Err(StateError::Entangled { qubit, residual });
        }
        StateVector::normalized(rest)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, StateError> {
        if self.num_qubits != other.num_qubits {
            return Err(StateError::DimensionMismatch(
                self.num_qubits,
                other.num_qubits,
            ));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨a|b⟩|²`, insensitive to global phase.
    pub fn fidelity_up_to_phase(&self, other: &StateVector) -> Result<f64, StateError> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Purity `Tr ρ²` of the single-qubit reduced state of `qubit`.
    pub fn reduced_purity(&self, qubit: usize) -> Result<f64, StateError> {
        self.check_qubit(qubit)?;
        let mask = self.bit_mask(qubit);
        let (mut r00, mut r11, mut r01) = (0.0, 0.0, zero());
        for i0 in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amplitudes[i0], self.amplitudes[i0 | mask]);
            r00 += a0.norm_sqr();
            r11 += a1.norm_sqr();
            r01 += a0 * a1.conj();
        }
        Ok(r00 * r00 + r11 * r11 + 2.0 * r01.norm_sqr())
    }

    /// SHA-256 over amplitudes rounded to 1e-12, hex encoded.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.num_qubits as u64).to_le_bytes());
        for a in &self.amplitudes {
            hasher.update(round_1e12(a.re).to_le_bytes());
            hasher.update(round_1e12(a.im).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn round_1e12(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}
