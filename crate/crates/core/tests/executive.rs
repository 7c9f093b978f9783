mod common;

use ccplan::executive::{self, Controller, TrialStatus, DEFAULT_ZETA, Z99};
use ccplan::faultmodel::OutcomeLabel;
use common::*;

#[test]
fn trials_are_reproducible() {
    let s = micro_b();
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.2);
    for i in 0..20 {
        let a = executive::run_trial(&p, s.start(), 11, i, DEFAULT_ZETA);
        let b = executive::run_trial(&p, s.start(), 11, i, DEFAULT_ZETA);
        assert_eq!(a, b);
        assert_eq!(a.trace_csv(), b.trace_csv());
    }
}

#[test]
fn reward_matches_the_trace() {
    let s = micro_a();
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.2);
    for i in 0..50 {
        let r = executive::run_trial(&p, s.start(), 3, i, DEFAULT_ZETA);
        let science = r.steps.iter().map(|t| t.action.starts_with("science"));
        assert!((executive::trace_reward(science, DEFAULT_ZETA) - r.reward).abs() < 1e-9);
        let faults = r.steps.iter().filter(|t| t.outcome != OutcomeLabel::Nominal).count();
        assert_eq!(faults, r.faults);
        assert!(r.waypoints_visited <= s.waypoints().len());
        assert!(r.replans <= r.faults);
    }
}

#[test]
fn fault_free_trial_follows_the_plan() {
    let s = alpha0((0, 0), vec![(1, 1), (2, 2)], (3, 3));
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.0);
    let plan = p.plan_mission(s.start()).unwrap();
    let r = executive::run_trial(&p, s.start(), 1, 0, DEFAULT_ZETA);
    assert_eq!(r.status, TrialStatus::SafeSuccess);
    assert_eq!(r.faults, 0);
    assert_eq!(r.waypoints_visited, 2);
    assert!(r.steps.iter().all(|t| t.controller == Controller::Plan));
    let actions = plan.nodes.iter().filter_map(|n| n.action).map(|a| a.is_science());
    assert_eq!(r.reward, executive::trace_reward(actions, DEFAULT_ZETA));
    assert_eq!(r.final_state.cell, plan.terminal().cell);
    assert_eq!(r.final_state.time, plan.terminal().time);
}

#[test]
fn start_above_bound_is_reported_infeasible() {
    let s = micro_c();
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.01);
    let r = executive::run_trial(&p, s.start(), 0, 0, DEFAULT_ZETA);
    assert_eq!(r.status, TrialStatus::Infeasible);
    assert!(r.steps.is_empty());
    assert!(r.failed());
}

#[test]
fn campaign_statistics() {
    let s = micro_b();
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.05);
    let (stats, records) = executive::run_campaign(&p, s.start(), 200, 9, DEFAULT_ZETA);
    assert_eq!(stats.n, 200);
    assert_eq!(records.len(), 200);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.index, i as u64);
        assert_eq!(*r, executive::run_trial(&p, s.start(), 9, i as u64, DEFAULT_ZETA));
    }
    let failures = records.iter().filter(|r| r.failed()).count();
    assert_eq!(stats.failure_rate, failures as f64 / 200.0);
    assert_eq!(stats.histogram.values().sum::<usize>(), 200);
    assert_eq!(stats.status_counts.values().sum::<usize>(), 200);
    let bound = 0.05 + Z99 * (0.05 * 0.95 / 200.0f64).sqrt();
    assert!((stats.bound - bound).abs() < 1e-15);
    let json: serde_json::Value = serde_json::from_str(&stats.to_json()).unwrap();
    assert_eq!(json["n"], 200);
}

#[test]
fn single_trial_campaign() {
    let s = micro_a();
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.05);
    let (stats, records) = executive::run_campaign(&p, s.start(), 1, 5, DEFAULT_ZETA);
    assert_eq!(stats.mean_reward, records[0].reward);
    assert_eq!(stats.ci, 0.0);
    assert!(stats.failure_rate == 0.0 || stats.failure_rate == 1.0);
}

#[test]
fn recovery_rollouts_agree_with_risk() {
    let s = micro_a();
    let pol = recovery(&s);
    let x = s.start();
    let n = 4000;
    let fails = (0..n)
        .filter(|&i| !executive::rollout_recovery(&pol, &s, x, &mut executive::trial_rng(2, i)))
        .count();
    let risk = pol.risk(x, &s);
    let rate = fails as f64 / n as f64;
    let half = Z99 * (risk.max(1e-3) * (1.0 - risk) / n as f64).sqrt();
    assert!(rate <= risk + half, "rate {rate} risk {risk}");
}

#[test]
fn safe_start_ends_immediately() {
    let s = alpha0((3, 3), vec![], (3, 3));
    let pol = recovery(&s);
    let p = planner(&s, &pol, 0.01);
    let r = executive::run_trial(&p, s.start(), 0, 0, DEFAULT_ZETA);
    assert_eq!(r.status, TrialStatus::SafeSuccess);
    assert!(r.steps.is_empty());
    assert_eq!(r.reward, 0.0);
}
