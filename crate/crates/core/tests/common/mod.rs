//! Helpers shared by the integration targets: literal table transcriptions
//! and a stepper that snapshots a protocol between measurement rounds.
#![allow(dead_code)]

use num_complex::Complex64;
use telegate::gates::{Gate, Matrix};
use telegate::network::Network;
use telegate::protocols::{self, BranchOutcomes, Execution, ProtocolSpec, Step};
use telegate::StateVector;

/// One table entry: amplitude index `d`, printed ket, and how many times
/// the payload acts on the last ket symbol.
pub type Row = (usize, &'static str, u32);

fn power(payload: &Matrix, p: u32) -> Matrix {
    (0..p).fold(Matrix::identity(2), |acc, _| payload.mul(&acc))
}

/// Builds `Σ d_i |prefix⟩ ⊗ U^p |last⟩` from table rows and normalizes it.
pub fn table_state(rows: &[Row], payload: &Gate, input: &StateVector) -> StateVector {
    let k = rows[0].1.len();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << k];
    for &(d, ket, p) in rows {
        assert_eq!(ket.len(), k, "ragged table row {ket}");
        let prefix = usize::from_str_radix(&ket[..k - 1], 2).unwrap();
        let last = usize::from(ket.as_bytes()[k - 1] == b'1');
        let u = power(payload.matrix(), p);
        for out in 0..2 {
            amps[(prefix << 1) | out] += input.amplitude(d) * u.get(out, last);
        }
    }
    StateVector::normalized(amps).unwrap()
}

/// Plain expansion without payload action, e.g. the initial register.
pub fn expansion(kets: &[(usize, &'static str)], input: &StateVector) -> StateVector {
    let rows: Vec<Row> = kets.iter().map(|&(d, k)| (d, k, 0)).collect();
    table_state(&rows, &telegate::gates::identity(), input)
}

/// The live register of `net` with its qubits reordered to `names`.
pub fn state_in_order(net: &Network, names: &[&str]) -> StateVector {
    let layout = net.layout();
    let live = net.live_qubits();
    assert_eq!(live.len(), names.len(), "live register size");
    let perm: Vec<usize> = live
        .iter()
        .map(|&q| {
            let name = layout.name(q);
            names
                .iter()
                .position(|&n| n == name)
                .unwrap_or_else(|| panic!("qubit {name} is live but not in the table"))
        })
        .collect();
    net.state().permute_qubits(&perm).unwrap()
}

fn live_names(net: &Network) -> Vec<String> {
    let mut v: Vec<String> = net
        .live_qubits()
        .iter()
        .map(|&q| net.layout().name(q).to_string())
        .collect();
    v.sort();
    v
}

/// Runs one branch until the live register is exactly `names` and the next
/// step is a measurement (or the script ends), then returns that register.
pub fn snapshot(
    spec: &ProtocolSpec,
    input: &StateVector,
    branch: &BranchOutcomes,
    names: &[&str],
) -> StateVector {
    let script = protocols::script(spec.family, spec.n, &spec.payload).unwrap();
    let mut net = Network::build(spec.family.topology(), spec.n, input).unwrap();
    let mut wanted: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    wanted.sort();
    let mut exec = Execution::new(&mut net, branch);
    for step in &script.steps {
        if matches!(step, Step::Measure { .. }) && live_names(exec.network()) == wanted {
            return state_in_order(exec.network(), names);
        }
        exec.step(step).unwrap();
    }
    drop(exec);
    assert_eq!(live_names(&net), wanted, "table register never reached");
    state_in_order(&net, names)
}

/// Smallest fidelity between the table's state and the protocol's state
/// at that point, over every branch.
pub fn table_fidelity(
    spec: &ProtocolSpec,
    input: &StateVector,
    names: &[&str],
    rows: &[Row],
) -> f64 {
    let expected = table_state(rows, &spec.payload, input);
    (0..spec.num_branches())
        .map(|i| {
            let branch = BranchOutcomes::from_index(i, spec.num_measurements());
            snapshot(spec, input, &branch, names)
                .fidelity_up_to_phase(&expected)
                .unwrap()
        })
        .fold(1.0, f64::min)
}

pub const PARALLEL_TABLE_1_QUBITS: [&str; 5] = ["a", "b", "C1", "C2", "c"];
pub const PARALLEL_TABLE_1: [Row; 8] = [
    (0, "00000", 0),
    (1, "00001", 0),
    (2, "01010", 1),
    (3, "01011", 1),
    (4, "10100", 1),
    (5, "10101", 1),
    (6, "11110", 2),
    (7, "11111", 2),
];

pub const PARALLEL_TABLE_2_QUBITS: [&str; 3] = ["a", "b", "c"];
pub const PARALLEL_TABLE_2: [Row; 8] = [
    (0, "000", 0),
    (1, "001", 0),
    (2, "010", 1),
    (3, "011", 1),
    (4, "100", 1),
    (5, "101", 1),
    (6, "110", 2),
    (7, "111", 2),
];

pub const SERIES_CH_TABLE_3_QUBITS: [&str; 6] = ["1", "3", "4", "5", "6", "7"];
pub const SERIES_CH_TABLE_3: [Row; 16] = [
    (0, "000000", 0),
    (1, "000001", 0),
    (2, "001100", 0),
    (3, "001101", 0),
    (0, "000110", 0),
    (1, "000111", 0),
    (2, "001010", 0),
    (3, "001011", 0),
    (4, "110100", 0),
    (5, "110101", 0),
    (6, "111000", 0),
    (7, "111001", 0),
    (4, "110010", 0),
    (5, "110011", 0),
    (6, "111110", 0),
    (7, "111111", 0),
];

pub const SERIES_CH_TABLE_4_QUBITS: [&str; 5] = ["1", "3", "4", "6", "7"];
pub const SERIES_CH_TABLE_4: [Row; 8] = [
    (0, "00000", 0),
    (1, "00001", 0),
    (2, "00110", 1),
    (3, "00111", 1),
    (4, "11010", 1),
    (5, "11011", 1),
    (6, "11100", 0),
    (7, "11101", 0),
];

pub const SERIES_TABLE_FINAL_QUBITS: [&str; 3] = ["1", "4", "7"];
pub const SERIES_CH_TABLE_5: [Row; 8] = [
    (0, "000", 0),
    (1, "001", 0),
    (2, "010", 1),
    (3, "011", 1),
    (4, "100", 1),
    (5, "101", 1),
    (6, "110", 0),
    (7, "111", 0),
];

pub const SERIES_NCU_TABLE_6_QUBITS: [&str; 6] = ["1", "3", "4", "5", "6", "7"];
pub const SERIES_NCU_TABLE_6: [Row; 16] = [
    (0, "000000", 0),
    (1, "000001", 0),
    (2, "001000", 0),
    (3, "001001", 0),
    (0, "000110", 0),
    (1, "000111", 0),
    (2, "001110", 0),
    (3, "001111", 0),
    (4, "110000", 0),
    (5, "110001", 0),
    (6, "111100", 0),
    (7, "111101", 0),
    (4, "110110", 0),
    (5, "110111", 0),
    (6, "111010", 0),
    (7, "111011", 0),
];

pub const SERIES_NCU_TABLE_7_QUBITS: [&str; 5] = ["1", "3", "4", "6", "7"];
pub const SERIES_NCU_TABLE_7: [Row; 8] = [
    (0, "00000", 0),
    (1, "00001", 0),
    (2, "00100", 0),
    (3, "00101", 0),
    (4, "11000", 0),
    (5, "11001", 0),
    (6, "11110", 1),
    (7, "11111", 1),
];

pub const SERIES_NCU_TABLE_8_QUBITS: [&str; 4] = ["1", "3", "4", "7"];
pub const SERIES_NCU_TABLE_8: [Row; 8] = [
    (0, "0000", 0),
    (1, "0001", 0),
    (2, "0010", 0),
    (3, "0011", 0),
    (4, "1100", 0),
    (5, "1101", 0),
    (6, "1110", 1),
    (7, "1111", 1),
];

pub const SERIES_NCU_TABLE_9: [Row; 8] = [
    (0, "000", 0),
    (1, "001", 0),
    (2, "010", 0),
    (3, "011", 0),
    (4, "100", 0),
    (5, "101", 0),
    (6, "110", 1),
    (7, "111", 1),
];

/// Naive dense matrix-vector product.
pub fn apply_dense(m: &[Vec<Complex64>], v: &StateVector) -> StateVector {
    let amps = m
        .iter()
        .map(|row| row.iter().zip(v.amplitudes()).map(|(a, b)| a * b).sum())
        .collect();
    StateVector::from_amplitudes(amps).unwrap()
}

/// The 8×8 Toffoli matrix written out by hand.
pub fn toffoli() -> Vec<Vec<Complex64>> {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); 8]; 8];
    for (i, row) in m.iter_mut().enumerate() {
        let col = match i {
            6 => 7,
            7 => 6,
            _ => i,
        };
        row[col] = Complex64::new(1.0, 0.0);
    }
    m
}
