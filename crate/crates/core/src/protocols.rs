//! The three gate-teleportation protocols and their ideal effects.
//!
//! Each protocol is compiled into a [`Script`]: a fixed, branch-independent
//! list of local steps. Running a script against a [`Network`] with a forced
//! [`BranchOutcomes`] assignment executes one measurement branch. Because
//! every step goes through the network, a script that touches a qubit its
//! party does not hold aborts with `LocalityViolation`.
//!
//! Message tags are the names of the measured qubits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gates::{self, Gate, GateError, InvolutionCertificate};
use crate::network::{Layout, Network, NetworkError, PartyId, QubitId, TopologyKind};
use crate::statevector::{Basis, StateError, StateVector};
use crate::CostLedger;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("a protocol needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("payload must be a single-qubit gate, got arity {0}")]
    PayloadArity(usize),
    #[error("payload {label} is not an involution (‖M² − I‖ = {residual:.3e}); series-ch requires U² = I")]
    InvolutionRequired { label: String, residual: f64 },
    #[error("protocol needs a {expected} network with {n} parties, got {got} with {got_n}")]
    TopologyMismatch {
        expected: TopologyKind,
        n: usize,
        got: TopologyKind,
        got_n: usize,
    },
    #[error("branch has {got} outcomes, schedule has {expected} measurements")]
    BranchLength { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

impl ProtocolError {
    pub fn is_locality_violation(&self) -> bool {
        matches!(
            self,
            ProtocolError::Network(NetworkError::LocalityViolation { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Parallel network, target receives `U^(c_1 + … + c_{n-1})`.
    #[serde(rename = "parallel-cu")]
    ParallelSimultaneousCU,
    /// Series network, target receives `H^(c_1 ⊕ … ⊕ c_{n-1})` for an involution `H`.
    #[serde(rename = "series-ch")]
    SeriesSimultaneousCH,
    /// Series network, target receives `U` iff every control is 1.
    #[serde(rename = "series-ncu")]
    SeriesNControlledU,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::ParallelSimultaneousCU,
        Family::SeriesSimultaneousCH,
        Family::SeriesNControlledU,
    ];

    pub fn topology(self) -> TopologyKind {
        match self {
            Family::ParallelSimultaneousCU => TopologyKind::Parallel,
            Family::SeriesSimultaneousCH | Family::SeriesNControlledU => TopologyKind::Series,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::ParallelSimultaneousCU => "parallel-cu",
            Family::SeriesSimultaneousCH => "series-ch",
            Family::SeriesNControlledU => "series-ncu",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                format!("unknown family {s:?} (expected parallel-cu, series-ch or series-ncu)")
            })
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub family: Family,
    pub n: usize,
    pub payload: Gate,
}

impl ProtocolSpec {
    pub fn new(family: Family, n: usize, payload: Gate) -> Result<Self, ProtocolError> {
        let spec = Self::new_unchecked(family, n, payload);
        spec.validate()?;
        Ok(spec)
    }

    /// Skips validation. Used to demonstrate what goes wrong when the
    /// series-ch involution requirement is ignored.
    pub fn new_unchecked(family: Family, n: usize, payload: Gate) -> Self {
        ProtocolSpec { family, n, payload }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n < 2 {
            return Err(ProtocolError::TooFewParties(self.n));
        }
        if self.payload.arity() != 1 {
            return Err(ProtocolError::PayloadArity(self.payload.arity()));
        }
        if self.family == Family::SeriesSimultaneousCH {
            require_involution(&self.payload)?;
        }
        Ok(())
    }

    pub fn num_measurements(&self) -> usize {
        2 * (self.n - 1)
    }

    pub fn num_branches(&self) -> usize {
        1 << self.num_measurements()
    }
}

fn require_involution(payload: &Gate) -> Result<(), ProtocolError> {
    let cert = InvolutionCertificate::new(payload);
    if cert.is_certified() {
        Ok(())
    } else {
        Err(ProtocolError::InvolutionRequired {
            label: payload.label().to_string(),
            residual: cert.residual,
        })
    }
}

/// One forced outcome per scheduled measurement, in schedule order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchOutcomes(Vec<u8>);

impl BranchOutcomes {
    pub fn new(bits: Vec<u8>) -> Result<Self, StateError> {
        match bits.iter().find(|&&b| b > 1) {
            Some(&b) => Err(StateError::InvalidOutcome(b)),
            None => Ok(BranchOutcomes(bits)),
        }
    }

    /// Branch number `index` with the first measurement as the most
    /// significant bit.
    pub fn from_index(index: usize, len: usize) -> Self {
        BranchOutcomes(
            (0..len)
                .map(|i| ((index >> (len - 1 - i)) & 1) as u8)
                .collect(),
        )
    }

    pub fn zeros(len: usize) -> Self {
        BranchOutcomes(vec![0; len])
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for BranchOutcomes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b}"))
    }
}

impl FromStr for BranchOutcomes {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(StateError::InvalidBit(other)),
            })
            .collect::<Result<_, _>>()?;
        Ok(BranchOutcomes(bits))
    }
}

impl Serialize for BranchOutcomes {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BranchOutcomes {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Gate {
        party: PartyId,
        gate: Gate,
        qubits: Vec<QubitId>,
    },
    /// The outcome is taken from the branch assignment.
    Measure {
        party: PartyId,
        qubit: QubitId,
        basis: Basis,
    },
    /// `from` sends a bit it knows (own outcome or received) to `to`.
    Send {
        from: PartyId,
        to: PartyId,
        tag: String,
    },
    /// Applies `gate` iff the XOR of the received bits under `tags` is 1.
    Conditional {
        party: PartyId,
        gate: Gate,
        qubits: Vec<QubitId>,
        tags: Vec<String>,
    },
}

impl Step {
    pub fn party(&self) -> PartyId {
        match self {
            Step::Gate { party, .. }
            | Step::Measure { party, .. }
            | Step::Conditional { party, .. } => *party,
            Step::Send { from, .. } => *from,
        }
    }

    /// Qubits the step operates on; empty for messages.
    pub fn qubits(&self) -> Vec<QubitId> {
        match self {
            Step::Gate { qubits, .. } | Step::Conditional { qubits, .. } => qubits.clone(),
            Step::Measure { qubit, .. } => vec![*qubit],
            Step::Send { .. } => Vec::new(),
        }
    }

    pub fn qubits_mut(&mut self) -> Vec<&mut QubitId> {
        match self {
            Step::Gate { qubits, .. } | Step::Conditional { qubits, .. } => {
                qubits.iter_mut().collect()
            }
            Step::Measure { qubit, .. } => vec![qubit],
            Step::Send { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Script {
    pub family: Family,
    pub layout: Layout,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledMeasurement {
    pub party: PartyId,
    pub party_name: String,
    pub qubit: QubitId,
    pub qubit_name: String,
    pub basis: Basis,
}

impl Script {
    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn measurement_schedule(&self) -> Vec<ScheduledMeasurement> {
        self.steps
            .iter()
            .filter_map(|step| match step {
                Step::Measure {
                    party,
                    qubit,
                    basis,
                } => Some(ScheduledMeasurement {
                    party: *party,
                    party_name: crate::network::party_name(*party),
                    qubit: *qubit,
                    qubit_name: self.layout.name(*qubit).to_string(),
                    basis: *basis,
                }),
                _ => None,
            })
            .collect()
    }

    pub fn num_measurements(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Measure { .. }))
            .count()
    }
}

/// Compiles the step list for `family` on `n` parties. No payload checks are
/// made here; see [`ProtocolSpec::validate`].
pub fn script(family: Family, n: usize, payload: &Gate) -> Result<Script, ProtocolError> {
    if payload.arity() != 1 {
        return Err(ProtocolError::PayloadArity(payload.arity()));
    }
    let layout = Layout::new(family.topology(), n).map_err(|e| match e {
        NetworkError::TooFewParties(n) => ProtocolError::TooFewParties(n),
        other => other.into(),
    })?;
    let mut b = ScriptBuilder {
        layout: &layout,
        steps: Vec::new(),
    };
    match family {
        Family::ParallelSimultaneousCU => b.parallel_cu(payload)?,
        Family::SeriesSimultaneousCH => b.series_ch(payload)?,
        Family::SeriesNControlledU => b.series_ncu(payload)?,
    }
    let steps = b.steps;
    Ok(Script {
        family,
        layout,
        steps,
    })
}

#[derive(Clone, Copy)]
enum Carry {
    Parity,
    Conjunction,
}

struct ScriptBuilder<'a> {
    layout: &'a Layout,
    steps: Vec<Step>,
}

impl ScriptBuilder<'_> {
    fn name(&self, q: QubitId) -> String {
        self.layout.name(q).to_string()
    }

    fn gate(&mut self, party: PartyId, gate: &Gate, qubits: &[QubitId]) {
        self.steps.push(Step::Gate {
            party,
            gate: gate.clone(),
            qubits: qubits.to_vec(),
        });
    }

    fn measure(&mut self, party: PartyId, qubit: QubitId, basis: Basis) {
        self.steps.push(Step::Measure {
            party,
            qubit,
            basis,
        });
    }

    fn send(&mut self, from: PartyId, to: PartyId, qubit: QubitId) {
        let tag = self.name(qubit);
        self.steps.push(Step::Send { from, to, tag });
    }

    fn conditional(&mut self, party: PartyId, gate: &Gate, qubits: &[QubitId], on: &[QubitId]) {
        let tags = on.iter().map(|&q| self.name(q)).collect();
        self.steps.push(Step::Conditional {
            party,
            gate: gate.clone(),
            qubits: qubits.to_vec(),
            tags,
        });
    }

    fn link(&self, q: Option<QubitId>) -> QubitId {
        q.expect("layout provides every link the protocol uses")
    }

    fn parallel_cu(&mut self, payload: &Gate) -> Result<(), ProtocolError> {
        let n = self.layout.n();
        let target = n;
        let data_t = self.layout.data_qubit(target);
        let (x, z, cnot) = (gates::pauli_x(), gates::pauli_z(), gates::cnot());
        let cu = gates::controlled(payload, 1)?;
        let controls: Vec<PartyId> = (1..n).collect();

        for &i in &controls {
            let link = self.link(self.layout.forward_link(i));
            self.gate(i, &cnot, &[self.layout.data_qubit(i), link]);
            self.measure(i, link, Basis::Computational);
            self.send(i, target, link);
        }
        for &j in &controls {
            let from = self.link(self.layout.forward_link(j));
            let held = self.link(self.layout.target_link(j));
            self.conditional(target, &x, &[held], &[from]);
        }
        for &j in &controls {
            let held = self.link(self.layout.target_link(j));
            self.gate(target, &cu, &[held, data_t]);
        }
        for &j in &controls {
            let held = self.link(self.layout.target_link(j));
            self.measure(target, held, Basis::Hadamard);
            self.send(target, j, held);
        }
        for &j in &controls {
            let held = self.link(self.layout.target_link(j));
            self.conditional(j, &z, &[self.layout.data_qubit(j)], &[held]);
        }
        Ok(())
    }

    /// Forward pass shared by both series protocols: each party folds its
    /// data bit into the running parity (or conjunction) carried to the
    /// next party, ending with the payload on the target.
    fn series_forward(
        &mut self,
        carry: Carry,
        controlled_payload: &Gate,
    ) -> Result<(), ProtocolError> {
        let n = self.layout.n();
        let (x, cnot) = (gates::pauli_x(), gates::cnot());
        let toffoli = gates::controlled(&x, 2)?;
        let fwd1 = self.link(self.layout.forward_link(1));
        self.gate(1, &cnot, &[self.layout.data_qubit(1), fwd1]);
        self.measure(1, fwd1, Basis::Computational);
        self.send(1, 2, fwd1);
        for i in 2..n {
            let back = self.link(self.layout.backward_link(i));
            let fwd = self.link(self.layout.forward_link(i));
            let prev = self.link(self.layout.forward_link(i - 1));
            let data = self.layout.data_qubit(i);
            self.conditional(i, &x, &[back], &[prev]);
            match carry {
                Carry::Parity => {
                    self.gate(i, &cnot, &[back, fwd]);
                    self.gate(i, &cnot, &[data, fwd]);
                }
                Carry::Conjunction => self.gate(i, &toffoli, &[back, data, fwd]),
            }
            self.measure(i, fwd, Basis::Computational);
            self.send(i, i + 1, fwd);
        }
        let back = self.link(self.layout.backward_link(n));
        let prev = self.link(self.layout.forward_link(n - 1));
        self.conditional(n, &x, &[back], &[prev]);
        self.gate(n, controlled_payload, &[back, self.layout.data_qubit(n)]);
        Ok(())
    }

    fn series_ch(&mut self, payload: &Gate) -> Result<(), ProtocolError> {
        let n = self.layout.n();
        let ch = gates::controlled(payload, 1)?;
        self.series_forward(Carry::Parity, &ch)?;
        // back_j holds the parity of data_1..data_{j-1}; its |−⟩ outcome is a
        // phase on each of those, so it goes to every upstream party.
        for j in 2..=n {
            let back = self.link(self.layout.backward_link(j));
            self.measure(j, back, Basis::Hadamard);
            for k in 1..j {
                self.send(j, k, back);
            }
        }
        let z = gates::pauli_z();
        for i in 1..n {
            let on: Vec<QubitId> = (i + 1..=n)
                .map(|j| self.link(self.layout.backward_link(j)))
                .collect();
            self.conditional(i, &z, &[self.layout.data_qubit(i)], &on);
        }
        Ok(())
    }

    fn series_ncu(&mut self, payload: &Gate) -> Result<(), ProtocolError> {
        let n = self.layout.n();
        let cu = gates::controlled(payload, 1)?;
        self.series_forward(Carry::Conjunction, &cu)?;
        // back_j holds the AND of data_1..data_{j-1}; undo its phase one hop
        // at a time with a controlled-Z on (back_{j-1}, data_{j-1}).
        let cz = gates::controlled(&gates::pauli_z(), 1)?;
        let back_n = self.link(self.layout.backward_link(n));
        self.measure(n, back_n, Basis::Hadamard);
        self.send(n, n - 1, back_n);
        let mut incoming = back_n;
        for i in (2..n).rev() {
            let back = self.link(self.layout.backward_link(i));
            self.conditional(i, &cz, &[back, self.layout.data_qubit(i)], &[incoming]);
            self.measure(i, back, Basis::Hadamard);
            self.send(i, i - 1, back);
            incoming = back;
        }
        self.conditional(
            1,
            &gates::pauli_z(),
            &[self.layout.data_qubit(1)],
            &[incoming],
        );
        Ok(())
    }
}

/// The fixed measurement order of a protocol.
pub fn measurement_schedule(
    spec: &ProtocolSpec,
) -> Result<Vec<ScheduledMeasurement>, ProtocolError> {
    Ok(script(spec.family, spec.n, &spec.payload)?.measurement_schedule())
}

/// Outcome of executing one branch.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub branch: BranchOutcomes,
    pub final_state: StateVector,
    pub probabilities: Vec<f64>,
    pub ledger: CostLedger,
}

impl RunRecord {
    pub fn probability(&self) -> f64 {
        self.probabilities.iter().product()
    }
}

/// Step-by-step executor for one branch of a script.
pub struct Execution<'a> {
    net: &'a mut Network,
    branch: &'a BranchOutcomes,
    next_outcome: usize,
    probabilities: Vec<f64>,
}

impl<'a> Execution<'a> {
    pub fn new(net: &'a mut Network, branch: &'a BranchOutcomes) -> Self {
        Execution {
            net,
            branch,
            next_outcome: 0,
            probabilities: Vec::new(),
        }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn step(&mut self, step: &Step) -> Result<(), ProtocolError> {
        match step {
            Step::Gate {
                party,
                gate,
                qubits,
            } => self.net.local_apply(*party, gate, qubits)?,
            Step::Measure {
                party,
                qubit,
                basis,
            } => {
                let outcome = *self.branch.bits().get(self.next_outcome).ok_or(
                    ProtocolError::BranchLength {
                        expected: self.next_outcome + 1,
                        got: self.branch.len(),
                    },
                )?;
                self.next_outcome += 1;
                let p = self.net.local_measure(*party, *qubit, *basis, outcome)?;
                self.probabilities.push(p);
            }
            Step::Send { from, to, tag } => {
                let bit = self.net.known_bit(*from, tag)?;
                self.net.send_cbit(*from, *to, bit, tag)?;
            }
            Step::Conditional {
                party,
                gate,
                qubits,
                tags,
            } => {
                // locality is checked whether or not the correction fires
                self.net.check_local(*party, qubits)?;
                let mut parity = 0;
                for tag in tags {
                    parity ^= self.net.read_cbit(*party, tag)?;
                }
                if parity == 1 {
                    self.net.local_apply(*party, gate, qubits)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs a whole script on `net` for one branch.
pub fn execute(
    net: &mut Network,
    script: &Script,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    let topo = net.topology();
    if topo.kind != script.layout.kind() || topo.n != script.n() {
        return Err(ProtocolError::TopologyMismatch {
            expected: script.layout.kind(),
            n: script.n(),
            got: topo.kind,
            got_n: topo.n,
        });
    }
    let expected = script.num_measurements();
    if branch.len() != expected {
        return Err(ProtocolError::BranchLength {
            expected,
            got: branch.len(),
        });
    }
    let mut exec = Execution::new(net, branch);
    for step in &script.steps {
        exec.step(step)?;
    }
    let probabilities = exec.probabilities;
    Ok(RunRecord {
        branch: branch.clone(),
        final_state: net.data_state()?,
        probabilities,
        ledger: net.ledger(),
    })
}

fn run_family(
    family: Family,
    net: &mut Network,
    payload: &Gate,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    let script = script(family, net.n(), payload)?;
    execute(net, &script, branch)
}

/// Parallel network: `U^(Σ c_i)` on the target.
pub fn run_parallel_simultaneous_cu(
    net: &mut Network,
    payload: &Gate,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    run_family(Family::ParallelSimultaneousCU, net, payload, branch)
}

/// Series network: `H^(⊕ c_i)` on the target. The payload must be an
/// involution.
pub fn run_series_simultaneous_ch(
    net: &mut Network,
    payload: &Gate,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    require_involution(payload)?;
    run_series_simultaneous_ch_unchecked(net, payload, branch)
}

/// Same as [`run_series_simultaneous_ch`] without the involution check.
pub fn run_series_simultaneous_ch_unchecked(
    net: &mut Network,
    payload: &Gate,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    run_family(Family::SeriesSimultaneousCH, net, payload, branch)
}

/// Series network: `U` on the target iff all controls are 1.
pub fn run_series_ncu(
    net: &mut Network,
    payload: &Gate,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    run_family(Family::SeriesNControlledU, net, payload, branch)
}

/// Dispatches on the spec's family after validating it.
pub fn run(
    spec: &ProtocolSpec,
    net: &mut Network,
    branch: &BranchOutcomes,
) -> Result<RunRecord, ProtocolError> {
    spec.validate()?;
    match spec.family {
        Family::ParallelSimultaneousCU => run_parallel_simultaneous_cu(net, &spec.payload, branch),
        Family::SeriesSimultaneousCH => run_series_simultaneous_ch(net, &spec.payload, branch),
        Family::SeriesNControlledU => run_series_ncu(net, &spec.payload, branch),
    }
}

/// The ideal nonlocal gate applied directly to the data register.
///
/// Both simultaneous families are built as a product of two-qubit
/// controlled-U gates, giving `U^(Σ c_i)`; for an involution this equals
/// `U^(⊕ c_i)`.
pub fn oracle_effect(
    spec: &ProtocolSpec,
    input: &StateVector,
) -> Result<StateVector, ProtocolError> {
    let n = spec.n;
    if input.num_qubits() != n {
        return Err(NetworkError::InputSize {
            expected: n,
            got: input.num_qubits(),
        }
        .into());
    }
    match spec.family {
        Family::ParallelSimultaneousCU | Family::SeriesSimultaneousCH => {
            let cu = gates::controlled(&spec.payload, 1)?;
            (0..n - 1).try_fold(input.clone(), |s, i| Ok(s.apply_gate(&cu, &[i, n - 1])?))
        }
        Family::SeriesNControlledU => {
            let g = gates::controlled(&spec.payload, n - 1)?;
            let all: Vec<usize> = (0..n).collect();
            Ok(input.apply_gate(&g, &all)?)
        }
    }
}
