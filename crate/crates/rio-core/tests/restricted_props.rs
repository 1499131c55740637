//! Property tests for the restricted operation sets: the index/permutation
//! bijection, unitarity of the built operators, the fixed-form decomposition
//! identity, and the one-qubit specialization.

use num_complex::Complex64;
use proptest::prelude::*;
use rio_core::restricted::{
    build_r, build_t, decompose_identity_check, index_from_perm, one_qubit_u, perm_from_index,
    set_count, SetIndex,
};

fn unit_phases(dim: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec(0.0f64..std::f64::consts::TAU, dim)
        .prop_map(|angles| angles.iter().map(|a| Complex64::new(a.cos(), a.sin())).collect())
}

fn set_index(n_qubits: usize) -> impl Strategy<Value = SetIndex> {
    let count = set_count(n_qubits).unwrap();
    (1..=count).prop_map(move |x| SetIndex::new(x, n_qubits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranking_inverts_unranking(n_qubits in 1usize..=3, raw in any::<u64>()) {
        let count = set_count(n_qubits).unwrap();
        let x = SetIndex::new(1 + raw % count, n_qubits).unwrap();
        let perm = perm_from_index(&x);
        prop_assert_eq!(index_from_perm(&perm).unwrap(), x);
    }

    #[test]
    fn unranked_permutations_are_bijections(x in set_index(3)) {
        let mut perm = perm_from_index(&x);
        perm.sort_unstable();
        let expected: Vec<usize> = (1..=x.dim()).collect();
        prop_assert_eq!(perm, expected);
    }

    #[test]
    fn unranking_is_injective(n_qubits in 1usize..=2, a in any::<u64>(), b in any::<u64>()) {
        let count = set_count(n_qubits).unwrap();
        let xa = SetIndex::new(1 + a % count, n_qubits).unwrap();
        let xb = SetIndex::new(1 + b % count, n_qubits).unwrap();
        if xa != xb {
            prop_assert_ne!(perm_from_index(&xa), perm_from_index(&xb));
        }
    }

    #[test]
    fn built_operators_with_unit_phases_are_unitary(x in set_index(2), phases in unit_phases(4)) {
        prop_assert!(build_t(&x, &phases).unwrap().matrix().is_unitary(1e-12));
    }

    #[test]
    fn fixed_forms_are_permutation_matrices(x in set_index(2)) {
        let r = build_r(&x);
        prop_assert!(r.is_unitary(1e-12));
        let dim = x.dim();
        for row in 0..dim {
            for col in 0..dim {
                let v = r.get(row, col);
                prop_assert!(v.im == 0.0 && (v.re == 0.0 || v.re == 1.0));
            }
        }
    }

    #[test]
    fn every_operation_splits_into_diagonal_times_fixed_form(
        x in set_index(2),
        phases in unit_phases(4),
    ) {
        prop_assert!(decompose_identity_check(&x, &phases).unwrap());
    }

    #[test]
    fn one_qubit_operations_match_the_general_construction(
        d in 0u8..2,
        phases in unit_phases(2),
    ) {
        let x = SetIndex::new(d as u64 + 1, 1).unwrap();
        let general = build_t(&x, &phases).unwrap().matrix();
        let special = one_qubit_u(d, [phases[0], phases[1]]).unwrap();
        prop_assert!(general.approx_eq(&special, 1e-12));
    }

    #[test]
    fn distinct_indices_give_distinct_operators(a in set_index(2), b in set_index(2)) {
        if a != b {
            let ones = vec![Complex64::new(1.0, 0.0); 4];
            let ta = build_t(&a, &ones).unwrap().matrix();
            let tb = build_t(&b, &ones).unwrap().matrix();
            prop_assert!(ta.max_abs_diff(&tb) > 0.5);
        }
    }
}
