//! Protocol traces: the JSON event log of one branch and its replay.
//!
//! A trace is self-contained. It carries the full initial register, the
//! ownership table and every event with its gate matrix, so replay needs
//! nothing but the file. Replay re-executes the events directly on a
//! [`StateVector`] without going through [`crate::network::Network`].

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gates::{Gate, Matrix};
use crate::network::{CostLedger, PartyId, QubitId, QubitInfo};
use crate::statevector::{Basis, StateVector};
use crate::TOLERANCE;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Gate {
        party: PartyId,
        label: String,
        qubits: Vec<QubitId>,
        matrix: Vec<Vec<Complex64>>,
    },
    Measure {
        party: PartyId,
        qubit: QubitId,
        basis: Basis,
        outcome: u8,
        probability: f64,
        /// Hash of the projected register, before the qubit is discarded.
        state_hash: String,
    },
    Message {
        party: PartyId,
        recipient: PartyId,
        tag: String,
        bit: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePayload {
    pub label: String,
    pub matrix: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub schema: u32,
    pub family: String,
    pub n: usize,
    pub payload: TracePayload,
    pub seed: u64,
    pub branch: String,
    pub qubits: Vec<QubitInfo>,
    pub initial_state: Vec<Complex64>,
    pub events: Vec<TraceEvent>,
    pub cost: CostLedger,
    pub final_state: Vec<Complex64>,
    pub final_state_hash: String,
}

/// Why a replay did not reproduce the recorded run.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub event: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event {
            Some(i) => write!(f, "event {i}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

impl std::error::Error for Divergence {}

fn diverge(event: Option<usize>, reason: impl Into<String>) -> Divergence {
    Divergence {
        event,
        reason: reason.into(),
    }
}

impl TraceFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Re-executes the events and checks every recorded probability and
    /// hash. Returns the final state on success.
    pub fn replay(&self) -> Result<StateVector, Divergence> {
        if self.schema != SCHEMA_VERSION {
            return Err(diverge(None, format!("unsupported schema {}", self.schema)));
        }
        let mut state = StateVector::from_amplitudes(self.initial_state.clone())
            .map_err(|e| diverge(None, format!("initial state: {e}")))?;
        if state.num_qubits() != self.qubits.len() {
            return Err(diverge(
                None,
                "qubit table does not match the initial state",
            ));
        }
        let mut live: Vec<QubitId> = self.qubits.iter().map(|q| q.id).collect();
        let mut cbits = 0;

        for (i, event) in self.events.iter().enumerate() {
            let at = Some(i);
            let locate = |live: &[QubitId], party: PartyId, qubit: QubitId| {
                let pos = live
                    .iter()
                    .position(|&q| q == qubit)
                    .ok_or_else(|| diverge(at, format!("qubit {qubit} is not live")))?;
                if self.qubits[qubit].owner != party {
                    return Err(diverge(
                        at,
                        format!("party {party} does not own qubit {qubit}"),
                    ));
                }
                Ok(pos)
            };
            match event {
                TraceEvent::Gate {
                    party,
                    label,
                    qubits,
                    matrix,
                } => {
                    let positions = qubits
                        .iter()
                        .map(|&q| locate(&live, *party, q))
                        .collect::<Result<Vec<_>, _>>()?;
                    let gate = Matrix::from_rows(matrix.clone())
                        .and_then(|m| Gate::new(label.clone(), m))
                        .map_err(|e| diverge(at, e.to_string()))?;
                    state = state
                        .apply_gate(&gate, &positions)
                        .map_err(|e| diverge(at, e.to_string()))?;
                }
                TraceEvent::Measure {
                    party,
                    qubit,
                    basis,
                    outcome,
                    probability,
                    state_hash,
                } => {
                    let pos = locate(&live, *party, *qubit)?;
                    let projection = state
                        .project_measure(pos, *basis, *outcome)
                        .map_err(|e| diverge(at, e.to_string()))?;
                    if (projection.probability() - probability).abs() > TOLERANCE {
                        return Err(diverge(
                            at,
                            format!(
                                "probability {} differs from recorded {probability}",
                                projection.probability()
                            ),
                        ));
                    }
                    let projected = projection
                        .state
                        .ok_or_else(|| diverge(at, "outcome is impossible"))?;
                    if projected.state_hash() != *state_hash {
                        return Err(diverge(at, "post-measurement state hash differs"));
                    }
                    state = projected
                        .discard_qubit(pos)
                        .map_err(|e| diverge(at, e.to_string()))?;
                    live.remove(pos);
                }
                TraceEvent::Message {
                    party, recipient, ..
                } => {
                    if party == recipient {
                        return Err(diverge(at, "message sent to self"));
                    }
                    cbits += 1;
                }
            }
        }

        if cbits != self.cost.cbits {
            return Err(diverge(
                None,
                format!("{cbits} messages but {} cbits recorded", self.cost.cbits),
            ));
        }
        let hash = state.state_hash();
        if hash != self.final_state_hash {
            return Err(diverge(None, "final state hash differs"));
        }
        let recorded = StateVector::from_amplitudes(self.final_state.clone())
            .map_err(|e| diverge(None, format!("final state: {e}")))?;
        if recorded.state_hash() != hash {
            return Err(diverge(
                None,
                "recorded final state does not match its hash",
            ));
        }
        Ok(state)
    }
}
