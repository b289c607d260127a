//! Exhaustive branch enumeration, oracle comparison and cost auditing.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::network::{CostLedger, Network, NetworkError};
use crate::protocols::{self, BranchOutcomes, Family, ProtocolError, ProtocolSpec};
use crate::statevector::{StateError, StateVector};
use crate::trace::SCHEMA_VERSION;
use crate::TOLERANCE;

/// Tolerance on the sum of branch probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// Largest register the brute-force oracle will expand into a full matrix.
pub const BRUTE_FORCE_MAX_QUBITS: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("brute-force oracle is limited to {BRUTE_FORCE_MAX_QUBITS} qubits, got {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchResult {
    /// Index of the input state within the verification run.
    pub input: usize,
    pub outcomes: BranchOutcomes,
    pub probability: f64,
    pub measurement_probabilities: Vec<f64>,
    pub impossible: bool,
    /// Fidelity against the ideal gate; `None` for impossible branches.
    pub fidelity: Option<f64>,
    pub ledger: CostLedger,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
}

/// Closed-form `(ebits, cbits)` for each family.
pub fn expected_costs(family: Family, n: usize) -> CostLedger {
    let ebits = n.saturating_sub(1);
    let cbits = match family {
        Family::ParallelSimultaneousCU | Family::SeriesNControlledU => 2 * ebits,
        Family::SeriesSimultaneousCH => (n * n + n).saturating_sub(2) / 2,
    };
    CostLedger { ebits, cbits }
}

pub fn check_costs(spec: &ProtocolSpec, ledger: &CostLedger) -> bool {
    *ledger == expected_costs(spec.family, spec.n)
}

/// Runs every outcome assignment of the protocol's schedule on `input`.
pub fn enumerate_branches(
    spec: &ProtocolSpec,
    input: &StateVector,
) -> Result<Vec<BranchResult>, ProtocolError> {
    spec.validate()?;
    enumerate_branches_unchecked(spec, input)
}

/// [`enumerate_branches`] without spec validation, so a series-ch run can
/// be attempted with a payload that is not an involution.
pub fn enumerate_branches_unchecked(
    spec: &ProtocolSpec,
    input: &StateVector,
) -> Result<Vec<BranchResult>, ProtocolError> {
    let script = protocols::script(spec.family, spec.n, &spec.payload)?;
    let ideal = protocols::oracle_effect(spec, input)?;
    let base = Network::build(spec.family.topology(), spec.n, input)?;
    let len = script.num_measurements();
    (0..1usize << len)
        .into_par_iter()
        .map(|index| {
            let branch = BranchOutcomes::from_index(index, len);
            let mut net = base.clone();
            match protocols::execute(&mut net, &script, &branch) {
                Ok(record) => {
                    let fidelity = record.final_state.fidelity_up_to_phase(&ideal)?;
                    Ok(BranchResult {
                        input: 0,
                        probability: record.probability(),
                        measurement_probabilities: record.probabilities,
                        impossible: false,
                        fidelity: Some(fidelity),
                        ledger: record.ledger,
                        final_state: Some(record.final_state),
                        outcomes: branch,
                    })
                }
                Err(ProtocolError::Network(NetworkError::ImpossibleBranch { .. })) => {
                    Ok(BranchResult {
                        input: 0,
                        outcomes: branch,
                        probability: 0.0,
                        measurement_probabilities: Vec::new(),
                        impossible: true,
                        fidelity: None,
                        ledger: net.ledger(),
                        final_state: None,
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

type Mat2 = [[Complex64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Ground truth built from scratch: the full `2^n × 2^n` effect matrix,
/// filled column by column from the payload power each basis state
/// receives, then multiplied into the input.
pub fn brute_force_oracle(
    spec: &ProtocolSpec,
    input: &StateVector,
) -> Result<StateVector, VerifyError> {
    let n = spec.n;
    if n > BRUTE_FORCE_MAX_QUBITS {
        return Err(VerifyError::TooLarge(n));
    }
    if input.num_qubits() != n {
        return Err(StateError::DimensionMismatch(input.num_qubits(), n).into());
    }
    if spec.payload.arity() != 1 {
        return Err(ProtocolError::PayloadArity(spec.payload.arity()).into());
    }
    let pm = spec.payload.matrix();
    let u: Mat2 = [[pm.get(0, 0), pm.get(0, 1)], [pm.get(1, 0), pm.get(1, 1)]];
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut powers: Vec<Mat2> = vec![[[one, zero], [zero, one]]];
    for k in 1..n {
        let next = mat2_mul(&u, &powers[k - 1]);
        powers.push(next);
    }

    let dim = 1usize << n;
    let mut matrix = vec![vec![zero; dim]; dim];
    for col in 0..dim {
        let controls = col >> 1;
        let target = col & 1;
        let exponent = match spec.family {
            Family::ParallelSimultaneousCU | Family::SeriesSimultaneousCH => {
                controls.count_ones() as usize
            }
            Family::SeriesNControlledU => usize::from(controls == (1 << (n - 1)) - 1),
        };
        for out_bit in 0..2 {
            matrix[(col & !1) | out_bit][col] = powers[exponent][out_bit][target];
        }
    }

    let amps = input.amplitudes();
    let out: Vec<Complex64> = matrix
        .iter()
        .map(|row| row.iter().zip(amps).map(|(m, a)| m * a).sum())
        .collect();
    Ok(StateVector::from_amplitudes(out)?)
}

/// Largest entrywise difference between the two oracles on one input.
pub fn oracle_disagreement(spec: &ProtocolSpec, input: &StateVector) -> Result<f64, VerifyError> {
    let a = protocols::oracle_effect(spec, input)?;
    let b = brute_force_oracle(spec, input)?;
    Ok(a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub family: Family,
    pub n: usize,
    pub payload: String,
    pub trials: usize,
    pub min_fidelity: f64,
    /// Minimum fidelity between any branch output and the first branch
    /// output of the same input.
    pub min_branch_agreement: f64,
    /// Largest `|p − 2^{−2(n−1)}|` over all branches.
    pub max_probability_deviation: f64,
    /// Largest `|Σ p − 1|` over inputs.
    pub max_probability_sum_error: f64,
    /// Largest amplitude difference between the two independent oracles,
    /// when the register is small enough for the brute-force one.
    pub oracle_disagreement: Option<f64>,
    pub cost: Option<CostLedger>,
    pub expected_cost: CostLedger,
    pub cost_ok: bool,
    pub rejection: Option<String>,
    pub pass: bool,
    pub branches: Vec<BranchResult>,
}

impl VerificationReport {
    fn empty(spec: &ProtocolSpec) -> Self {
        VerificationReport {
            schema: SCHEMA_VERSION,
            family: spec.family,
            n: spec.n,
            payload: spec.payload.label().to_string(),
            trials: 0,
            min_fidelity: 1.0,
            min_branch_agreement: 1.0,
            max_probability_deviation: 0.0,
            max_probability_sum_error: 0.0,
            oracle_disagreement: None,
            cost: None,
            expected_cost: expected_costs(spec.family, spec.n),
            cost_ok: false,
            rejection: None,
            pass: false,
            branches: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// All `2^n` computational basis states followed by `num_random` seeded
/// random (generically entangled) states.
pub fn standard_inputs(n: usize, num_random: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..1usize << n)
        .map(|i| StateVector::basis_index(n, i))
        .chain((0..num_random).map(|_| StateVector::random(n, rng.next_u64())))
        .collect()
}

pub fn verify_protocol(
    spec: &ProtocolSpec,
    num_random_inputs: usize,
    seed: u64,
) -> VerificationReport {
    if let Err(e) = spec.validate() {
        return VerificationReport {
            rejection: Some(e.to_string()),
            ..VerificationReport::empty(spec)
        };
    }
    verify_inputs(spec, &standard_inputs(spec.n, num_random_inputs, seed))
}

/// Enumerates every branch for each input and aggregates the verdict.
pub fn verify_inputs(spec: &ProtocolSpec, inputs: &[StateVector]) -> VerificationReport {
    let mut report = VerificationReport::empty(spec);
    if let Err(e) = spec.validate() {
        report.rejection = Some(e.to_string());
        return report;
    }
    let uniform = 1.0 / spec.num_branches() as f64;
    let mut cost_ok = !inputs.is_empty();
    for (index, input) in inputs.iter().enumerate() {
        let branches = match enumerate_branches(spec, input) {
            Ok(b) => b,
            Err(e) => {
                report.rejection = Some(format!("input {index}: {e}"));
                return report;
            }
        };
        if input.num_qubits() <= BRUTE_FORCE_MAX_QUBITS {
            if let Ok(d) = oracle_disagreement(spec, input) {
                report.oracle_disagreement = Some(report.oracle_disagreement.unwrap_or(0.0).max(d));
            }
        }
        let reference = branches.iter().find_map(|b| b.final_state.as_ref());
        let mut total = 0.0;
        for b in &branches {
            total += b.probability;
            report.max_probability_deviation = report
                .max_probability_deviation
                .max((b.probability - uniform).abs());
            cost_ok &= check_costs(spec, &b.ledger) || b.impossible;
            if report.cost.is_none() && !b.impossible {
                report.cost = Some(b.ledger);
            }
            if let Some(f) = b.fidelity {
                report.min_fidelity = report.min_fidelity.min(f);
            }
            if let (Some(state), Some(reference)) = (&b.final_state, reference) {
                let agreement = state.fidelity_up_to_phase(reference).unwrap_or(0.0);
                report.min_branch_agreement = report.min_branch_agreement.min(agreement);
            }
        }
        report.max_probability_sum_error =
            report.max_probability_sum_error.max((total - 1.0).abs());
        report.branches.extend(
            branches
                .into_iter()
                .map(|b| BranchResult { input: index, ..b }),
        );
        report.trials += 1;
    }
    report.cost_ok = cost_ok;
    report.pass = report.min_fidelity >= 1.0 - TOLERANCE
        && report.cost_ok
        && report.max_probability_sum_error <= PROBABILITY_SUM_TOLERANCE;
    report
}
