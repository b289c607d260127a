//! Parties, qubit ownership, Bell-pair topologies and the classical bus.
//!
//! A [`Network`] owns the global register. Every quantum operation goes
//! through [`Network::local_apply`] or [`Network::local_measure`], which
//! refuse to touch qubits the acting party does not hold. Classical bits
//! travel only through [`Network::send_cbit`], which is where cbits are
//! counted (one per recipient).
//!
//! Register layout, in party order:
//!
//! * parallel: control `i` holds `[data_i, link_i]`, the target holds
//!   `[link'_1, …, link'_{n-1}, data_n]` (for n = 3 this is `a A b B C1 C2 c`);
//! * series: party 1 holds `[data_1, fwd_1]`, party `i` holds
//!   `[back_i, data_i, fwd_i]`, the target holds `[back_n, data_n]`
//!   (for n = 3 these are qubits `1..7`).

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gates::Gate;
use crate::statevector::{Basis, StateError, StateVector};
use crate::trace::TraceEvent;

pub type PartyId = usize;
/// Stable qubit label: the qubit's position in the register at build time.
pub type QubitId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("a network needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("input state has {got} qubits, expected one per party ({expected})")]
    InputSize { expected: usize, got: usize },
    #[error("locality violation: party {party} touched qubit {qubit} held by {owner:?}")]
    LocalityViolation {
        party: PartyId,
        qubit: QubitId,
        owner: Option<PartyId>,
    },
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("party {0} tried to message itself")]
    SelfSend(PartyId),
    #[error("party {party} has no message tagged {tag:?}")]
    MissingMessage { party: PartyId, tag: String },
    #[error("outcome {outcome} on qubit {qubit} is impossible (p = {probability:.3e})")]
    ImpossibleBranch {
        qubit: QubitId,
        outcome: u8,
        probability: f64,
    },
    #[error("qubits {0:?} are still live; the data register is not isolated")]
    LinksRemaining(Vec<QubitId>),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Parallel,
    Series,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Parallel => "parallel",
            TopologyKind::Series => "series",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Control,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitRole {
    Data,
    Link,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitInfo {
    pub id: QubitId,
    pub name: String,
    pub owner: PartyId,
    pub role: QubitRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellPair {
    pub party_a: PartyId,
    pub qubit_a: QubitId,
    pub party_b: PartyId,
    pub qubit_b: QubitId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n: usize,
    pub bell_pairs: Vec<BellPair>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub ebits: usize,
    pub cbits: usize,
}

impl fmt::Display for CostLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = if self.ebits == 1 { "ebit" } else { "ebits" };
        write!(f, "{} {unit}, {} cbits", self.ebits, self.cbits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub sender: PartyId,
    pub recipient: PartyId,
    pub bit: u8,
    pub tag: String,
}

#[derive(Debug, Clone)]
pub struct Party {
    pub id: PartyId,
    pub name: String,
    pub role: Role,
    pub data_qubit: QubitId,
    pub held: BTreeSet<QubitId>,
    pub inbox: Vec<ClassicalMessage>,
    /// Outcomes of this party's own measurements, by tag.
    pub outcomes: Vec<(String, u8)>,
}

const PARTY_NAMES: [&str; 8] = [
    "Alice", "Bob", "Charlie", "Dave", "Eve", "Frank", "Grace", "Heidi",
];

pub fn party_name(id: PartyId) -> String {
    PARTY_NAMES
        .get(id.wrapping_sub(1))
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("P{id}"))
}

/// Static register layout for a topology: who owns which qubit and which
/// qubits are the halves of each Bell pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub topology: Topology,
    pub qubits: Vec<QubitInfo>,
    /// `data[i - 1]` is party `i`'s data qubit.
    pub data: Vec<QubitId>,
}

impl Layout {
    pub fn new(kind: TopologyKind, n: usize) -> Result<Self, NetworkError> {
        if n < 2 {
            return Err(NetworkError::TooFewParties(n));
        }
        let mut qubits = Vec::new();
        let mut push = |name: String, owner: PartyId, role: QubitRole| {
            let id = qubits.len();
            qubits.push(QubitInfo {
                id,
                name,
                owner,
                role,
            });
            id
        };
        let mut data = vec![0; n];
        let mut bell_pairs = Vec::with_capacity(n - 1);
        match kind {
            TopologyKind::Parallel => {
                let letter = |i: usize, upper: bool| -> String {
                    match (i < 26, upper) {
                        (true, false) => char::from(b'a' + i as u8).to_string(),
                        (true, true) => char::from(b'A' + i as u8).to_string(),
                        (false, false) => format!("d{}", i + 1),
                        (false, true) => format!("L{}", i + 1),
                    }
                };
                let mut links = Vec::with_capacity(n - 1);
                for i in 1..n {
                    data[i - 1] = push(letter(i - 1, false), i, QubitRole::Data);
                    links.push(push(letter(i - 1, true), i, QubitRole::Link));
                }
                for (j, &link) in links.iter().enumerate() {
                    let held = push(format!("C{}", j + 1), n, QubitRole::Link);
                    bell_pairs.push(BellPair {
                        party_a: j + 1,
                        qubit_a: link,
                        party_b: n,
                        qubit_b: held,
                    });
                }
                data[n - 1] = push(letter(n - 1, false), n, QubitRole::Data);
            }
            TopologyKind::Series => {
                for i in 1..=n {
                    if i > 1 {
                        let back = push(String::new(), i, QubitRole::Link);
                        let open: &mut BellPair = bell_pairs.last_mut().expect("pair opened");
                        open.qubit_b = back;
                    }
                    data[i - 1] = push(String::new(), i, QubitRole::Data);
                    if i < n {
                        let fwd = push(String::new(), i, QubitRole::Link);
                        bell_pairs.push(BellPair {
                            party_a: i,
                            qubit_a: fwd,
                            party_b: i + 1,
                            qubit_b: usize::MAX,
                        });
                    }
                }
                for q in qubits.iter_mut() {
                    q.name = (q.id + 1).to_string();
                }
            }
        }
        Ok(Layout {
            topology: Topology {
                kind,
                n,
                bell_pairs,
            },
            qubits,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.topology.n
    }

    pub fn kind(&self) -> TopologyKind {
        self.topology.kind
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn data_qubit(&self, party: PartyId) -> QubitId {
        self.data[party - 1]
    }

    pub fn name(&self, qubit: QubitId) -> &str {
        &self.qubits[qubit].name
    }

    pub fn owner(&self, qubit: QubitId) -> PartyId {
        self.qubits[qubit].owner
    }

    /// Series: the link qubit party `i` shares with party `i + 1`.
    /// Parallel: control `i`'s half of its pair with the target.
    pub fn forward_link(&self, party: PartyId) -> Option<QubitId> {
        self.topology
            .bell_pairs
            .iter()
            .find(|p| p.party_a == party)
            .map(|p| p.qubit_a)
    }

    /// Series: the link qubit party `i` shares with party `i − 1`.
    pub fn backward_link(&self, party: PartyId) -> Option<QubitId> {
        match self.kind() {
            TopologyKind::Series => self
                .topology
                .bell_pairs
                .iter()
                .find(|p| p.party_b == party)
                .map(|p| p.qubit_b),
            TopologyKind::Parallel => None,
        }
    }

    /// Parallel: the target's half of the pair shared with control `j`.
    pub fn target_link(&self, control: PartyId) -> Option<QubitId> {
        match self.kind() {
            TopologyKind::Parallel => self
                .topology
                .bell_pairs
                .iter()
                .find(|p| p.party_a == control)
                .map(|p| p.qubit_b),
            TopologyKind::Series => None,
        }
    }

    /// Builds the full register: the input on the data qubits and
    /// `(|00⟩+|11⟩)/√2` on every pair.
    pub fn initial_state(&self, input: &StateVector) -> Result<StateVector, NetworkError> {
        let n = self.n();
        if input.num_qubits() != n {
            return Err(NetworkError::InputSize {
                expected: n,
                got: input.num_qubits(),
            });
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let zero = Complex64::new(0.0, 0.0);
        let phi = StateVector::from_amplitudes(vec![
            Complex64::new(h, 0.0),
            zero,
            zero,
            Complex64::new(h, 0.0),
        ])?;
        // product order: data_1..data_n, then pair halves (a, b) per pair
        let mut order: Vec<QubitId> = self.data.clone();
        let mut full = input.clone();
        for pair in &self.topology.bell_pairs {
            full = full.tensor(&phi);
            order.push(pair.qubit_a);
            order.push(pair.qubit_b);
        }
        Ok(full.permute_qubits(&order)?)
    }
}

/// The LOCC world: one register, its owners, and the classical bus.
#[derive(Debug, Clone)]
pub struct Network {
    layout: Layout,
    parties: Vec<Party>,
    live: Vec<QubitId>,
    state: StateVector,
    ledger: CostLedger,
    trace: Vec<TraceEvent>,
}

impl Network {
    pub fn build(kind: TopologyKind, n: usize, input: &StateVector) -> Result<Self, NetworkError> {
        let layout = Layout::new(kind, n)?;
        let state = layout.initial_state(input)?;
        let parties = (1..=n)
            .map(|id| Party {
                id,
                name: party_name(id),
                role: if id == n { Role::Target } else { Role::Control },
                data_qubit: layout.data_qubit(id),
                held: layout
                    .qubits
                    .iter()
                    .filter(|q| q.owner == id)
                    .map(|q| q.id)
                    .collect(),
                inbox: Vec::new(),
                outcomes: Vec::new(),
            })
            .collect();
        let ledger = CostLedger {
            ebits: layout.topology.bell_pairs.len(),
            cbits: 0,
        };
        Ok(Network {
            live: (0..layout.num_qubits()).collect(),
            layout,
            parties,
            state,
            ledger,
            trace: Vec::new(),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn topology(&self) -> &Topology {
        &self.layout.topology
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn ledger(&self) -> CostLedger {
        self.ledger
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, id: PartyId) -> Result<&Party, NetworkError> {
        id.checked_sub(1)
            .and_then(|i| self.parties.get(i))
            .ok_or(NetworkError::UnknownParty(id))
    }

    fn party_mut(&mut self, id: PartyId) -> Result<&mut Party, NetworkError> {
        id.checked_sub(1)
            .and_then(|i| self.parties.get_mut(i))
            .ok_or(NetworkError::UnknownParty(id))
    }

    /// Live qubits in register order.
    pub fn live_qubits(&self) -> &[QubitId] {
        &self.live
    }

    fn owner_of(&self, qubit: QubitId) -> Option<PartyId> {
        self.parties
            .iter()
            .find(|p| p.held.contains(&qubit))
            .map(|p| p.id)
    }

    /// Fails with `LocalityViolation` unless `party` holds every qubit.
    pub fn check_local(&self, party: PartyId, qubits: &[QubitId]) -> Result<(), NetworkError> {
        let p = self.party(party)?;
        match qubits.iter().find(|q| !p.held.contains(q)) {
            Some(&qubit) => Err(NetworkError::LocalityViolation {
                party,
                qubit,
                owner: self.owner_of(qubit),
            }),
            None => Ok(()),
        }
    }

    fn position(&self, qubit: QubitId) -> usize {
        self.live
            .iter()
            .position(|&q| q == qubit)
            .expect("held qubits are live")
    }

    pub fn local_apply(
        &mut self,
        party: PartyId,
        gate: &Gate,
        qubits: &[QubitId],
    ) -> Result<(), NetworkError> {
        self.check_local(party, qubits)?;
        let positions: Vec<usize> = qubits.iter().map(|&q| self.position(q)).collect();
        self.state = self.state.apply_gate(gate, &positions)?;
        self.trace.push(TraceEvent::Gate {
            party,
            label: gate.label().to_string(),
            qubits: qubits.to_vec(),
            matrix: gate.matrix().rows(),
        });
        Ok(())
    }

    /// Projects `qubit` onto `outcome` and discards it. Returns the outcome
    /// probability.
    pub fn local_measure(
        &mut self,
        party: PartyId,
        qubit: QubitId,
        basis: Basis,
        outcome: u8,
    ) -> Result<f64, NetworkError> {
        self.check_local(party, &[qubit])?;
        let pos = self.position(qubit);
        let projection = self.state.project_measure(pos, basis, outcome)?;
        let probability = projection.probability();
        let projected = projection.state.ok_or(NetworkError::ImpossibleBranch {
            qubit,
            outcome,
            probability,
        })?;
        let state_hash = projected.state_hash();
        self.state = projected.discard_qubit(pos)?;
        self.live.remove(pos);
        let tag = self.layout.name(qubit).to_string();
        let p = self.party_mut(party)?;
        p.held.remove(&qubit);
        p.outcomes.push((tag, outcome));
        self.trace.push(TraceEvent::Measure {
            party,
            qubit,
            basis,
            outcome,
            probability,
            state_hash,
        });
        Ok(probability)
    }

    pub fn send_cbit(
        &mut self,
        from: PartyId,
        to: PartyId,
        bit: u8,
        tag: &str,
    ) -> Result<(), NetworkError> {
        if from == to {
            return Err(NetworkError::SelfSend(from));
        }
        self.party(from)?;
        let message = ClassicalMessage {
            sender: from,
            recipient: to,
            bit,
            tag: tag.to_string(),
        };
        self.party_mut(to)?.inbox.push(message);
        self.ledger.cbits += 1;
        self.trace.push(TraceEvent::Message {
            party: from,
            recipient: to,
            tag: tag.to_string(),
            bit,
        });
        Ok(())
    }

    /// Reads a delivered bit without consuming it.
    pub fn read_cbit(&self, party: PartyId, tag: &str) -> Result<u8, NetworkError> {
        self.party(party)?
            .inbox
            .iter()
            .rev()
            .find(|m| m.tag == tag)
            .map(|m| m.bit)
            .ok_or_else(|| NetworkError::MissingMessage {
                party,
                tag: tag.to_string(),
            })
    }

    /// A bit the party knows: its own measurement outcome or a received one.
    pub fn known_bit(&self, party: PartyId, tag: &str) -> Result<u8, NetworkError> {
        let p = self.party(party)?;
        match p.outcomes.iter().rev().find(|(t, _)| t == tag) {
            Some(&(_, bit)) => Ok(bit),
            None => self.read_cbit(party, tag),
        }
    }

    /// Once every link qubit is measured, the state of the data qubits in
    /// party order.
    pub fn data_state(&self) -> Result<StateVector, NetworkError> {
        if self.live != self.layout.data {
            let links = self
                .live
                .iter()
                .copied()
                .filter(|q| !self.layout.data.contains(q))
                .collect();
            return Err(NetworkError::LinksRemaining(links));
        }
        Ok(self.state.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{cnot, pauli_x};

    fn held(net: &Network, party: PartyId) -> Vec<&str> {
        net.party(party)
            .unwrap()
            .held
            .iter()
            .map(|&q| net.layout().name(q))
            .collect()
    }

    #[test]
    fn parallel_layout_matches_ket_order() {
        let l = Layout::new(TopologyKind::Parallel, 3).unwrap();
        let names: Vec<_> = l.qubits.iter().map(|q| q.name.as_str()).collect();
        assert_eq!(names, ["a", "A", "b", "B", "C1", "C2", "c"]);
        assert_eq!(l.data, vec![0, 2, 6]);
        assert_eq!(l.topology.bell_pairs.len(), 2);
        for (j, pair) in l.topology.bell_pairs.iter().enumerate() {
            assert_eq!(pair.party_a, j + 1);
            assert_eq!(pair.party_b, 3);
        }
        assert_eq!(l.forward_link(1), Some(1));
        assert_eq!(l.target_link(2), Some(5));
    }

    #[test]
    fn series_layout_matches_numbering() {
        let l = Layout::new(TopologyKind::Series, 3).unwrap();
        let owners: Vec<_> = l.qubits.iter().map(|q| q.owner).collect();
        assert_eq!(owners, [1, 1, 2, 2, 2, 3, 3]);
        assert_eq!(l.data, vec![0, 3, 6]);
        let pairs: Vec<_> = l
            .topology
            .bell_pairs
            .iter()
            .map(|p| (l.name(p.qubit_a), l.name(p.qubit_b)))
            .collect();
        assert_eq!(pairs, [("2", "3"), ("5", "6")]);
        assert_eq!(l.backward_link(2), Some(2));
        assert_eq!(l.forward_link(2), Some(4));
        assert_eq!(l.forward_link(3), None);
    }

    #[test]
    fn topology_shapes() {
        for n in 2..=7 {
            let p = Layout::new(TopologyKind::Parallel, n).unwrap();
            assert_eq!(p.topology.bell_pairs.len(), n - 1);
            assert!(p.topology.bell_pairs.iter().all(|e| e.party_b == n));
            let s = Layout::new(TopologyKind::Series, n).unwrap();
            let edges: Vec<_> = s
                .topology
                .bell_pairs
                .iter()
                .map(|e| (e.party_a, e.party_b))
                .collect();
            let path: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            assert_eq!(edges, path);
            assert_eq!(s.num_qubits(), 3 * n - 2);
        }
        assert_eq!(
            Layout::new(TopologyKind::Series, 1),
            Err(NetworkError::TooFewParties(1))
        );
    }

    #[test]
    fn ownership_and_locality() {
        let input = StateVector::random(3, 1);
        let mut net = Network::build(TopologyKind::Parallel, 3, &input).unwrap();
        assert_eq!(net.ledger().ebits, 2);
        assert_eq!(held(&net, 1), ["a", "A"]);
        assert_eq!(held(&net, 3), ["C1", "C2", "c"]);
        net.local_apply(1, &cnot(), &[0, 1]).unwrap();
        let err = net.local_apply(1, &cnot(), &[0, 6]).unwrap_err();
        assert_eq!(
            err,
            NetworkError::LocalityViolation {
                party: 1,
                qubit: 6,
                owner: Some(3)
            }
        );
        assert!(matches!(
            net.local_measure(2, 6, Basis::Computational, 0),
            Err(NetworkError::LocalityViolation { .. })
        ));
        let p = net.local_measure(1, 1, Basis::Computational, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(held(&net, 1), ["a"]);
        assert_eq!(net.live_qubits(), &[0, 2, 3, 4, 5, 6]);
        // a measured qubit can't be touched again
        assert!(net.local_apply(1, &pauli_x(), &[1]).is_err());
    }

    #[test]
    fn series_measurements_are_uniform() {
        let input = StateVector::random(3, 2);
        let mut net = Network::build(TopologyKind::Series, 3, &input).unwrap();
        let mut probe = net.clone();
        let p = probe.local_measure(1, 1, Basis::Computational, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let p = net.local_measure(3, 5, Basis::Hadamard, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(matches!(
            net.local_measure(2, 6, Basis::Hadamard, 0),
            Err(NetworkError::LocalityViolation { .. })
        ));
    }

    #[test]
    fn message_bus() {
        let input = StateVector::random(3, 3);
        let mut net = Network::build(TopologyKind::Series, 3, &input).unwrap();
        assert_eq!(
            net.read_cbit(2, "2"),
            Err(NetworkError::MissingMessage {
                party: 2,
                tag: "2".into()
            })
        );
        net.send_cbit(1, 2, 1, "2").unwrap();
        assert_eq!(net.ledger().cbits, 1);
        assert_eq!(net.read_cbit(2, "2"), Ok(1));
        assert_eq!(net.read_cbit(2, "2"), Ok(1));
        assert!(net.read_cbit(3, "2").is_err());
        net.send_cbit(3, 1, 0, "6").unwrap();
        net.send_cbit(3, 2, 0, "6").unwrap();
        assert_eq!(net.ledger().cbits, 3);
        assert_eq!(net.send_cbit(2, 2, 0, "x"), Err(NetworkError::SelfSend(2)));
        assert_eq!(
            net.send_cbit(1, 9, 0, "x"),
            Err(NetworkError::UnknownParty(9))
        );
        assert_eq!(net.ledger().cbits, 3);
        assert_eq!(net.ledger().ebits, 2);
    }

    #[test]
    fn input_size_checked() {
        let input = StateVector::random(2, 3);
        assert_eq!(
            Network::build(TopologyKind::Parallel, 3, &input).unwrap_err(),
            NetworkError::InputSize {
                expected: 3,
                got: 2
            }
        );
    }
}
