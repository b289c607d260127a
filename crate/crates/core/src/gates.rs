//! Gate constructors and validators.
//!
//! Every [`Gate`] carries a unitary matrix. Payload gates for the teleportation
//! protocols are single-qubit; multi-qubit gates in this crate are only ever
//! built by [`controlled`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TOLERANCE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("matrix dimension {0} is not a power of two >= 2")]
    BadDimension(usize),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("payload must act on exactly one qubit, got arity {0}")]
    PayloadArity(usize),
    #[error("controlled gate needs at least one control")]
    NoControls,
    #[error("invalid gate spec {spec:?}: {reason}")]
    Parse { spec: String, reason: String },
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, GateError> {
        let dim = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(GateError::NotSquare {
                    rows: dim,
                    row,
                    len: r.len(),
                });
            }
        }
        if dim < 2 || !dim.is_power_of_two() {
            return Err(GateError::BadDimension(dim));
        }
        Ok(Matrix {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, GateError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Matrix {
        let mut out = self.clone();
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(r, c, self.get(c, r).conj());
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        Matrix { dim: n, data: out }
    }

    /// Max-norm of the entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖M†M − I‖_max`
    pub fn unitarity_residual(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .max_abs_diff(&Matrix::identity(self.dim))
    }

    /// `‖M² − I‖_max`
    pub fn involution_residual(&self) -> f64 {
        self.mul(self).max_abs_diff(&Matrix::identity(self.dim))
    }

    /// `‖M − M†‖_max`
    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub unitary: bool,
    pub involution: bool,
}

/// Residual-based unitarity and involution flags at the crate tolerance.
pub fn validate_matrix(m: &Matrix) -> Validation {
    Validation {
        unitary: m.unitarity_residual() < TOLERANCE,
        involution: m.involution_residual() < TOLERANCE,
    }
}

/// A unitary acting on `arity` qubits. Index 0 of the target list given to
/// `apply_gate` is the most significant bit of the matrix index.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    arity: usize,
    matrix: Matrix,
    label: String,
}

impl Gate {
    pub fn new(label: impl Into<String>, matrix: Matrix) -> Result<Self, GateError> {
        let residual = matrix.unitarity_residual();
        if residual.is_nan() || residual >= TOLERANCE {
            return Err(GateError::NotUnitary(residual));
        }
        Ok(Gate {
            arity: matrix.dim().trailing_zeros() as usize,
            matrix,
            label: label.into(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn validate(&self) -> Validation {
        validate_matrix(&self.matrix)
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Matrix::identity(self.matrix.dim())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Proof (or refutation) that a gate squares to the identity.
#[derive(Debug, Clone)]
pub struct InvolutionCertificate {
    pub gate: Gate,
    pub residual: f64,
}

impl InvolutionCertificate {
    pub fn new(gate: &Gate) -> Self {
        InvolutionCertificate {
            gate: gate.clone(),
            residual: gate.matrix.involution_residual(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.residual < TOLERANCE
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn fixed(label: &str, rows: &[&[f64]]) -> Gate {
    Gate::new(label, Matrix::from_real_rows(rows).expect("static matrix")).expect("static unitary")
}

pub fn identity() -> Gate {
    fixed("I", &[&[1.0, 0.0], &[0.0, 1.0]])
}

pub fn pauli_x() -> Gate {
    fixed("X", &[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_z() -> Gate {
    fixed("Z", &[&[1.0, 0.0], &[0.0, -1.0]])
}

pub fn hadamard() -> Gate {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    fixed("H", &[&[h, h], &[h, -h]])
}

/// Multi-controlled single-qubit gate: the leading `num_controls` qubits are
/// controls and `u` fires only when all of them are `|1⟩`.
pub fn controlled(u: &Gate, num_controls: usize) -> Result<Gate, GateError> {
    if u.arity != 1 {
        return Err(GateError::PayloadArity(u.arity));
    }
    if num_controls == 0 {
        return Err(GateError::NoControls);
    }
    let dim = 1usize << (num_controls + 1);
    let mut m = Matrix::identity(dim);
    let base = dim - 2;
    for r in 0..2 {
        for col in 0..2 {
            m.set(base + r, base + col, u.matrix.get(r, col));
        }
    }
    let prefix = "C".repeat(num_controls);
    Ok(Gate {
        arity: num_controls + 1,
        matrix: m,
        label: format!("{prefix}[{}]", u.label),
    })
}

pub fn cnot() -> Gate {
    controlled(&pauli_x(), 1).expect("X is single-qubit")
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn haar_2x2(rng: &mut ChaCha8Rng) -> Matrix {
    // Gram-Schmidt on the columns of a complex Ginibre matrix.
    let mut col0 = [complex_normal(rng), complex_normal(rng)];
    let mut col1 = [complex_normal(rng), complex_normal(rng)];
    let n0 = (col0[0].norm_sqr() + col0[1].norm_sqr()).sqrt();
    col0.iter_mut().for_each(|x| *x /= n0);
    let proj = col0[0].conj() * col1[0] + col0[1].conj() * col1[1];
    col1[0] -= proj * col0[0];
    col1[1] -= proj * col0[1];
    let n1 = (col1[0].norm_sqr() + col1[1].norm_sqr()).sqrt();
    col1.iter_mut().for_each(|x| *x /= n1);
    Matrix::from_rows(vec![vec![col0[0], col1[0]], vec![col0[1], col1[1]]]).expect("2x2")
}

/// Seeded random single-qubit unitary.
pub fn random_unitary(seed: u64) -> Gate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Gate::new(format!("randU:{seed}"), haar_2x2(&mut rng)).expect("orthonormalized columns")
}

/// Seeded random Hermitian unitary `V·diag(±1, ∓1)·V†`. The sign pattern is
/// never `±I`.
pub fn random_involution(seed: u64) -> Gate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a7e_0f0f_0001);
    let v = haar_2x2(&mut rng);
    let sign: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let d = Matrix::from_real_rows(&[&[sign, 0.0], &[0.0, -sign]]).expect("2x2");
    let m = v.mul(&d).mul(&v.adjoint());
    // Symmetrize away the rounding asymmetry so M = M† holds exactly.
    let half = c(0.5, 0.0);
    let adj = m.adjoint();
    let rows = (0..2)
        .map(|r| {
            (0..2)
                .map(|col| (m.get(r, col) + adj.get(r, col)) * half)
                .collect()
        })
        .collect();
    Gate::new(
        format!("randH:{seed}"),
        Matrix::from_rows(rows).expect("2x2"),
    )
    .expect("conjugated sign matrix is unitary")
}

/// Parses the CLI gate notation: `I`, `X`, `Z`, `H`, `randU:<seed>`,
/// `randH:<seed>` or `matrix:<json rows>`. Matrix entries are either reals or
/// `[re, im]` pairs.
impl FromStr for Gate {
    type Err = GateError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| GateError::Parse {
            spec: spec.to_string(),
            reason,
        };
        let parse_seed = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| fail(format!("bad seed: {e}")))
        };
        match spec.trim() {
            "I" => Ok(identity()),
            "X" => Ok(pauli_x()),
            "Z" => Ok(pauli_z()),
            "H" => Ok(hadamard()),
            s if s.starts_with("randU:") => Ok(random_unitary(parse_seed(&s[6..])?)),
            s if s.starts_with("randH:") => Ok(random_involution(parse_seed(&s[6..])?)),
            s if s.starts_with("matrix:") => {
                let value: serde_json::Value =
                    serde_json::from_str(&s[7..]).map_err(|e| fail(e.to_string()))?;
                let rows = parse_matrix_literal(&value).map_err(fail)?;
                let m = Matrix::from_rows(rows)?;
                Gate::new(s.to_string(), m)
            }
            _ => Err(fail("unknown gate name".to_string())),
        }
    }
}

fn parse_matrix_literal(value: &serde_json::Value) -> Result<Vec<Vec<Complex64>>, String> {
    let rows = value.as_array().ok_or("expected an array of rows")?;
    rows.iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| "expected each row to be an array".to_string())?
                .iter()
                .map(parse_entry)
                .collect()
        })
        .collect()
}

fn parse_entry(v: &serde_json::Value) -> Result<Complex64, String> {
    if let Some(x) = v.as_f64() {
        return Ok(c(x, 0.0));
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(c(re, im)),
            _ => Err(format!("non-numeric entry {v}")),
        },
        _ => Err(format!("entry {v} is neither a number nor [re, im]")),
    }
}
