use num_complex::Complex64;
use proptest::prelude::*;
use telegate::gates::{self, Gate, Matrix};
use telegate::network::Network;
use telegate::protocols::{self, BranchOutcomes, Execution, Family, ProtocolSpec};
use telegate::statevector::Basis;
use telegate::verify::enumerate_branches;
use telegate::StateVector;

const TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn basis() -> impl Strategy<Value = Basis> {
    prop_oneof![Just(Basis::Computational), Just(Basis::Hadamard)]
}

fn family() -> impl Strategy<Value = Family> {
    (0usize..3).prop_map(|i| Family::ALL[i])
}

fn payload_for(family: Family, seed: u64) -> Gate {
    match family {
        Family::SeriesSimultaneousCH => gates::random_involution(seed),
        _ => gates::random_unitary(seed),
    }
}

fn kron(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); na * nb]; na * nb];
    for i in 0..na * nb {
        for j in 0..na * nb {
            out[i][j] = a[i / nb][j / nb] * b[i % nb][j % nb];
        }
    }
    out
}

fn eye(dim: usize) -> Vec<Vec<Complex64>> {
    Matrix::identity(dim).rows()
}

fn mat_vec(m: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(n in 1usize..=6, seeds in prop::collection::vec((any::<u64>(), any::<prop::sample::Index>()), 1..12)) {
        let mut s = StateVector::random(n, seeds[0].0);
        for (seed, idx) in &seeds {
            s = s.apply_gate(&gates::random_unitary(*seed), &[idx.index(n)]).unwrap();
            if n >= 2 {
                let t = idx.index(n);
                let cu = gates::controlled(&gates::random_unitary(seed ^ 1), 1).unwrap();
                s = s.apply_gate(&cu, &[(t + 1) % n, t]).unwrap();
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn measurement_is_complete(n in 1usize..=6, seed in any::<u64>(), q in any::<prop::sample::Index>(), b in basis()) {
        let s = StateVector::random(n, seed);
        let q = q.index(n);
        let p0 = s.project_measure(q, b, 0).unwrap().probability();
        let p1 = s.project_measure(q, b, 1).unwrap().probability();
        prop_assert!((p0 + p1 - 1.0).abs() < TOL);
    }

    #[test]
    fn identity_is_a_no_op(n in 1usize..=6, seed in any::<u64>(), q in any::<prop::sample::Index>()) {
        let s = StateVector::random(n, seed);
        let out = s.apply_gate(&gates::identity(), &[q.index(n)]).unwrap();
        prop_assert_eq!(out.amplitudes(), s.amplitudes());
    }

    #[test]
    fn measure_and_discard_commute_with_permutation(
        (n, perm, q) in (2usize..=5).prop_flat_map(|n| (Just(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 0..n)),
        seed in any::<u64>(),
        b in basis(),
        outcome in 0u8..2,
    ) {
        let s = StateVector::random(n, seed);
        let direct = s.project_measure(q, b, outcome).unwrap().state.unwrap().discard_qubit(q).unwrap();
        let induced: Vec<usize> = (0..n)
            .filter(|&r| r != q)
            .map(|r| perm[r] - usize::from(perm[r] > perm[q]))
            .collect();
        let lhs = direct.permute_qubits(&induced).unwrap();
        let rhs = s.permute_qubits(&perm).unwrap()
            .project_measure(perm[q], b, outcome).unwrap().state.unwrap()
            .discard_qubit(perm[q]).unwrap();
        prop_assert!(lhs.fidelity_up_to_phase(&rhs).unwrap() > 1.0 - TOL);
    }

    #[test]
    fn single_qubit_gate_matches_kronecker(n in 1usize..=3, seed in any::<u64>(), t in any::<prop::sample::Index>()) {
        let t = t.index(n);
        let u = gates::random_unitary(seed);
        let s = StateVector::random(n, seed.wrapping_add(1));
        let full = kron(&kron(&eye(1 << t), &u.matrix().rows()), &eye(1 << (n - t - 1)));
        let want = mat_vec(&full, s.amplitudes());
        let got = s.apply_gate(&u, &[t]).unwrap();
        prop_assert!(max_diff(got.amplitudes(), &want) < 1e-12);
    }

    #[test]
    fn two_qubit_gate_matches_elementwise_definition(
        (n, targets) in (2usize..=3).prop_flat_map(|n| (Just(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())),
        seed in any::<u64>(),
    ) {
        let (t0, t1) = (targets[0], targets[1]);
        let g = gates::controlled(&gates::random_unitary(seed), 1).unwrap();
        let s = StateVector::random(n, seed.wrapping_add(2));
        let bit = |i: usize, q: usize| (i >> (n - 1 - q)) & 1;
        let dim = 1 << n;
        let mut full = vec![vec![c(0.0); dim]; dim];
        for (r, row) in full.iter_mut().enumerate() {
            for (col, cell) in row.iter_mut().enumerate() {
                let others_match = (0..n).filter(|&q| q != t0 && q != t1).all(|q| bit(r, q) == bit(col, q));
                if others_match {
                    *cell = g.matrix().get(2 * bit(r, t0) + bit(r, t1), 2 * bit(col, t0) + bit(col, t1));
                }
            }
        }
        let want = mat_vec(&full, s.amplitudes());
        let got = s.apply_gate(&g, &[t0, t1]).unwrap();
        prop_assert!(max_diff(got.amplitudes(), &want) < 1e-12);
    }

    #[test]
    fn controlled_gate_structure(k in 1usize..=3, seed in any::<u64>()) {
        let u = gates::random_unitary(seed);
        let g = gates::controlled(&u, k).unwrap();
        let dim = 1 << (k + 1);
        let block = dim - 2;
        for col in 0..dim {
            for row in 0..dim {
                let want = if col >= block && row >= block {
                    u.matrix().get(row - block, col - block)
                } else if row == col {
                    c(1.0)
                } else {
                    c(0.0)
                };
                prop_assert!((g.matrix().get(row, col) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn random_involutions_are_nontrivial_involutions(seed in any::<u64>(), k in 1usize..=3) {
        let h = gates::random_involution(seed);
        let m = h.matrix();
        prop_assert!(m.involution_residual() < TOL);
        prop_assert!(m.hermiticity_residual() < TOL);
        let plus = m.max_abs_diff(&Matrix::identity(2));
        let minus = m.max_abs_diff(&Matrix::from_real_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]).unwrap());
        prop_assert!(plus > 1e-3 && minus > 1e-3);
        let ch = gates::controlled(&h, k).unwrap();
        prop_assert!(ch.matrix().involution_residual() < TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_branch_gives_the_same_output(f in family(), n in 2usize..=4, pseed in any::<u64>(), iseed in any::<u64>()) {
        let spec = ProtocolSpec::new(f, n, payload_for(f, pseed)).unwrap();
        let input = StateVector::random(n, iseed);
        let branches = enumerate_branches(&spec, &input).unwrap();
        prop_assert_eq!(branches.len(), 1 << (2 * (n - 1)));
        let first = branches[0].final_state.clone().unwrap();
        for b in &branches {
            prop_assert!(b.fidelity.unwrap() >= 1.0 - TOL);
            prop_assert!(b.final_state.as_ref().unwrap().fidelity_up_to_phase(&first).unwrap() >= 1.0 - TOL);
        }
    }

    #[test]
    fn superposition_output_is_the_weighted_basis_outputs(f in family(), n in 2usize..=3, pseed in any::<u64>(), iseed in any::<u64>(), bidx in any::<prop::sample::Index>()) {
        let spec = ProtocolSpec::new(f, n, payload_for(f, pseed)).unwrap();
        let branch = BranchOutcomes::from_index(bidx.index(spec.num_branches()), spec.num_measurements());
        let run = |input: &StateVector| {
            let mut net = Network::build(f.topology(), n, input).unwrap();
            protocols::run(&spec, &mut net, &branch).unwrap().final_state
        };
        let input = StateVector::random(n, iseed);
        let mut combined = vec![c(0.0); 1 << n];
        for i in 0..1 << n {
            let out = run(&StateVector::basis_index(n, i));
            for (acc, a) in combined.iter_mut().zip(out.amplitudes()) {
                *acc += input.amplitude(i) * a;
            }
        }
        let combined = StateVector::normalized(combined).unwrap();
        prop_assert!(run(&input).fidelity_up_to_phase(&combined).unwrap() >= 1.0 - TOL);
    }

    #[test]
    fn reduced_purities_match_the_oracle(f in family(), n in 2usize..=4, pseed in any::<u64>(), iseed in any::<u64>(), bidx in any::<prop::sample::Index>()) {
        let spec = ProtocolSpec::new(f, n, payload_for(f, pseed)).unwrap();
        let input = StateVector::random(n, iseed);
        let branch = BranchOutcomes::from_index(bidx.index(spec.num_branches()), spec.num_measurements());
        let mut net = Network::build(f.topology(), n, &input).unwrap();
        let out = protocols::run(&spec, &mut net, &branch).unwrap().final_state;
        let ideal = protocols::oracle_effect(&spec, &input).unwrap();
        for q in 0..n {
            prop_assert!((out.reduced_purity(q).unwrap() - ideal.reduced_purity(q).unwrap()).abs() < TOL);
        }
    }

    #[test]
    fn ownership_partitions_live_qubits_and_ebits_stay_fixed(f in family(), n in 2usize..=4, iseed in any::<u64>(), bidx in any::<prop::sample::Index>()) {
        let spec = ProtocolSpec::new(f, n, gates::hadamard()).unwrap();
        let script = protocols::script(f, n, &spec.payload).unwrap();
        let branch = BranchOutcomes::from_index(bidx.index(spec.num_branches()), spec.num_measurements());
        let mut net = Network::build(f.topology(), n, &StateVector::random(n, iseed)).unwrap();
        let ebits = net.ledger().ebits;
        let mut exec = Execution::new(&mut net, &branch);
        for step in &script.steps {
            exec.step(step).unwrap();
            let net = exec.network();
            let mut held: Vec<usize> = net.parties().iter().flat_map(|p| p.held.iter().copied()).collect();
            let total = held.len();
            held.sort_unstable();
            held.dedup();
            prop_assert_eq!(held.len(), total, "a qubit has two owners");
            let mut live = net.live_qubits().to_vec();
            live.sort_unstable();
            prop_assert_eq!(held, live);
            prop_assert_eq!(net.ledger().ebits, ebits);
        }
    }
}
