mod common;

use ccplan::error::Error;
use ccplan::faultmodel::FaultParams;
use ccplan::oracle::{self, MicroInstance};
use ccplan::recovery::StateLattice;
use ccplan::roverdyn::Action;
use ccplan::treeplan::{PartialPolicyTree, TreeNode};
use common::*;

#[test]
fn unconstrained_bound_matches_scalar_dp() {
    for (name, s) in micros() {
        let mi = micro_instance(&s);
        let opt = oracle::exhaustive_cc_optimum(&mi, 1.0).unwrap().unwrap();
        let free = oracle::unconstrained_optimum(&mi);
        assert!((opt.reward - free).abs() < 1e-9, "{name}: {} vs {free}", opt.reward);
    }
}

#[test]
fn optimum_policy_respects_bound_when_replayed() {
    for (name, s) in micros() {
        let mi = micro_instance(&s);
        for beta in [0.0, 0.01, 0.05, 0.2] {
            let Some(opt) = oracle::exhaustive_cc_optimum(&mi, beta).unwrap() else {
                continue;
            };
            assert!(opt.verified_failure <= beta + 1e-12, "{name} beta {beta}");
            assert!((opt.verified_failure - opt.failure).abs() < 1e-9);
            assert!((opt.verified_reward - opt.reward).abs() < 1e-9);
        }
    }
}

#[test]
fn optimum_grows_with_the_bound() {
    let s = micro_a();
    let mi = micro_instance(&s);
    let mut last = f64::NEG_INFINITY;
    for beta in [0.001, 0.01, 0.05, 0.2, 1.0] {
        if let Some(opt) = oracle::exhaustive_cc_optimum(&mi, beta).unwrap() {
            assert!(opt.reward >= last - 1e-12);
            last = opt.reward;
        }
    }
    assert!(last > 0.9);
}

#[test]
fn minimum_failure_equals_recovery_risk() {
    for (name, s) in micros() {
        let mi = micro_instance(&s);
        let pol = recovery(&s);
        let opt = oracle::exhaustive_cc_optimum(&mi, 1.0).unwrap().unwrap();
        let least = opt.front.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
        assert!((least - pol.risk(s.start(), &s)).abs() < 1e-9, "{name}");
    }
}

#[test]
fn zero_bound_keeps_only_riskless_plans() {
    let mut cases = micros();
    cases.push(("alpha0", alpha0((0, 0), vec![(2, 1)], (3, 3))));
    let mut feasible = 0;
    for (name, s) in cases {
        let start_risk = recovery(&s).risk(s.start(), &s);
        match oracle::exhaustive_cc_optimum(&micro_instance(&s), 0.0).unwrap() {
            Some(opt) => {
                assert_eq!(start_risk, 0.0, "{name}");
                assert_eq!(opt.failure, 0.0, "{name}");
                feasible += 1;
            }
            None => assert!(start_risk > 0.0, "{name}"),
        }
    }
    assert!(feasible > 0);
}

#[test]
fn oversized_instances_are_rejected() {
    let s = island(0.0);
    assert!(matches!(MicroInstance::new(s, RES, 100.0), Err(Error::NotMicro(_))));
    let s = micro_a();
    assert!(matches!(MicroInstance::new(s, RES, 50.0), Err(Error::NotMicro(_))));
}

#[test]
fn empty_tree_has_no_risk() {
    let s = micro_a();
    let pol = recovery(&s);
    let x = s.start();
    let tree = PartialPolicyTree {
        nodes: vec![TreeNode {
            cell: x.cell,
            time: x.time,
            min_energy_req: x.energy,
            action: None,
            exec_risk: 0.0,
            fault_branches: vec![],
            next_wp: 0,
        }],
        root_risk: 0.0,
        first_wp: 0,
        waypoints_covered: 0,
    };
    assert_eq!(oracle::exact_tree_risk(&tree, &s, &pol), 0.0);
}

#[test]
fn one_move_tree_is_a_two_term_sum() {
    let s = micro_a();
    let pol = recovery(&s);
    let x = *s.start();
    let a = Action::Move(ccplan::envmodel::Direction::N);
    let outcomes = ccplan::faultmodel::enumerate_outcomes(&x, a, &s).unwrap();
    let expected = outcomes[0].probability * pol.risk(&outcomes[0].state, &s)
        + outcomes[1].probability * pol.risk(&outcomes[1].state, &s);
    let node = |action, cell, time| TreeNode {
        cell,
        time,
        min_energy_req: x.energy,
        action,
        exec_risk: 0.0,
        fault_branches: vec![],
        next_wp: 0,
    };
    let tree = PartialPolicyTree {
        nodes: vec![
            node(Some(a), x.cell, x.time),
            node(None, outcomes[2].state.cell, outcomes[2].state.time),
        ],
        root_risk: 0.0,
        first_wp: 0,
        waypoints_covered: 0,
    };
    assert_eq!(oracle::exact_tree_risk(&tree, &s, &pol), expected);
}

#[test]
fn fault_free_recovery_matches_reachability() {
    for (name, s) in micros() {
        let s = s
            .with_fault(FaultParams {
                rate: 0.0,
                recovery_duration: 1800.0,
            })
            .unwrap();
        let pol = recovery(&s);
        let lat = StateLattice::new(&s, RES, 100.0).unwrap();
        let reach = oracle::lattice_reachability(&s, &lat);
        for (i, (&v, &r)) in pol.values.iter().zip(&reach).enumerate() {
            assert!(v == 0.0 || v == 1.0, "{name}: value {v}");
            assert_eq!(v == 1.0, r, "{name}: point {i}");
        }
    }
}

#[test]
fn earliest_arrival_without_waypoints() {
    let s = alpha0((0, 0), vec![], (3, 0));
    let t = oracle::earliest_safe_arrival(&s, s.start()).unwrap();
    assert_eq!(t, 3.0 * 1800.0);
    let s = alpha0((0, 0), vec![], (3, 3));
    let t = oracle::earliest_safe_arrival(&s, s.start()).unwrap();
    assert!((t - 3.0 * 1800.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    assert_eq!(
        oracle::earliest_discretized_arrival(&s, s.start(), RES),
        Some(5.0 * RES)
    );
}
