//! Property tests for the protocol engine: the uniform branch-probability
//! law, end-to-end fidelity across random operations and inputs, agreement
//! between enumerated and fixed-outcome execution, and the sabotage modes
//! (negative controls: a protocol with a skipped startup or a withheld
//! password must visibly fail, and only where it should).

use num_complex::Complex64;
use proptest::prelude::*;
use rio_core::protocol::{
    run, Family, OpSpec, OutcomeMode, ProtocolConfig, Sabotage, UnknownState, FIDELITY_TOL,
};

fn unit_phases(dim: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec(0.0f64..std::f64::consts::TAU, dim)
        .prop_map(|angles| angles.iter().map(|a| Complex64::new(a.cos(), a.sin())).collect())
}

fn config_1q(
    family: Family,
    variant: u8,
    d1: u8,
    d2: u8,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    seed: u64,
) -> ProtocolConfig {
    let mut config = ProtocolConfig::template(family);
    config.variant = variant;
    config.op1 = OpSpec { x: d1 as u64 + 1, phases: u };
    if config.op2.is_some() {
        config.op2 = Some(OpSpec { x: d2 as u64 + 1, phases: v });
    }
    config.unknown = UnknownState::Seed(seed);
    config
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_qubit_runs_obey_the_uniform_law_and_compose_exactly(
        family_bit in 0u8..2,
        variant in 1u8..=4,
        d1 in 0u8..2,
        d2 in 0u8..2,
        u in unit_phases(2),
        v in unit_phases(2),
        seed in any::<u64>(),
    ) {
        let family = if family_bit == 0 { Family::Controlled1q } else { Family::Combined1q };
        let variant = if family == Family::Combined1q { 1 } else { variant };
        let config = config_1q(family, variant, d1, d2, u, v, seed);
        let results = run(&config).unwrap();
        prop_assert_eq!(results.len(), 8);
        for r in &results {
            prop_assert!((r.branch_probability - 0.125).abs() < 1e-10);
            prop_assert!(r.fidelity >= 1.0 - FIDELITY_TOL);
        }
    }

    #[test]
    fn controller_counts_scale_the_branch_count_not_the_law(
        controllers in 0usize..=2,
        variant in 1u8..=4,
        x_raw in any::<u64>(),
        phases in unit_phases(4),
        seed in any::<u64>(),
    ) {
        let mut config = ProtocolConfig::template(Family::ControlledNq);
        config.n_qubits = 2;
        config.controllers = controllers;
        config.variant = variant;
        config.op1 = OpSpec { x: 1 + x_raw % 24, phases };
        config.unknown = UnknownState::Seed(seed);
        let results = run(&config).unwrap();
        let bits = 4 + controllers;
        prop_assert_eq!(results.len(), 1usize << bits);
        let expected = 1.0 / (1usize << bits) as f64;
        for r in &results {
            prop_assert!((r.branch_probability - expected).abs() < 1e-10);
            prop_assert!(r.fidelity >= 1.0 - FIDELITY_TOL);
        }
    }

    #[test]
    fn fixed_outcomes_reproduce_the_enumerated_branch(
        d1 in 0u8..2,
        u in unit_phases(2),
        seed in any::<u64>(),
        pick in 0usize..8,
    ) {
        let config = config_1q(Family::Controlled1q, 1, d1, 0, u, vec![], seed);
        let all = run(&config).unwrap();
        let chosen = &all[pick];
        let bits: Vec<u8> = chosen.outcomes.iter().map(|(_, b)| *b).collect();
        let mut fixed = config.clone();
        fixed.outcomes = OutcomeMode::Fixed(bits);
        let single = run(&fixed).unwrap();
        prop_assert_eq!(single.len(), 1);
        prop_assert!((single[0].fidelity - chosen.fidelity).abs() < 1e-12);
        prop_assert!((single[0].branch_probability - chosen.branch_probability).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), sample_seed in any::<u64>()) {
        let mut config = ProtocolConfig::template(Family::Combined1q);
        config.unknown = UnknownState::Seed(seed);
        config.outcomes = OutcomeMode::Sample(sample_seed);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        prop_assert_eq!(&a[0].outcomes, &b[0].outcomes);
        prop_assert!((a[0].fidelity - b[0].fidelity).abs() == 0.0);
    }

    #[test]
    fn omitting_startup_breaks_at_least_one_branch(
        variant in 1u8..=4,
        u in unit_phases(2),
        seed in any::<u64>(),
    ) {
        let mut config = config_1q(Family::Controlled1q, variant, 1, 0, u, vec![], seed);
        config.sabotage = Sabotage::OmitStartup;
        let results = run(&config).unwrap();
        // Skipping the controller's startup rotation collapses the channel;
        // either the uniform law or the fidelity contract must give way.
        let law_broken = results
            .iter()
            .any(|r| (r.branch_probability - 0.125).abs() > 1e-6);
        let fidelity_broken = results.iter().any(|r| r.fidelity < 1.0 - 1e-6);
        prop_assert!(law_broken || fidelity_broken);
    }

    #[test]
    fn withholding_the_password_breaks_only_password_one_branches(
        variant in 1u8..=4,
        u in unit_phases(2),
        seed in any::<u64>(),
    ) {
        let mut config = config_1q(Family::Controlled1q, variant, 1, 0, u, vec![], seed);
        config.sabotage = Sabotage::WithholdPassword;
        let results = run(&config).unwrap();
        let mut saw_broken = false;
        for r in &results {
            let password = r.outcomes[0].1;
            if password == 0 {
                prop_assert!(r.fidelity >= 1.0 - FIDELITY_TOL);
            } else if r.fidelity < 1.0 - 1e-6 {
                saw_broken = true;
            }
        }
        prop_assert!(saw_broken, "no password-one branch was damaged");
    }

    #[test]
    fn the_receiver_state_matches_the_direct_application(
        d1 in 0u8..2,
        d2 in 0u8..2,
        u in unit_phases(2),
        v in unit_phases(2),
        seed in any::<u64>(),
    ) {
        let config = config_1q(Family::Combined1q, 1, d1, d2, u, v, seed);
        let oracle = rio_core::protocol::oracle(&config).unwrap();
        let results = run(&config).unwrap();
        for r in &results {
            let f = rio_core::qstate::fidelity_up_to_phase(&r.receiver_state, &oracle).unwrap();
            prop_assert!(f >= 1.0 - FIDELITY_TOL);
        }
    }
}
