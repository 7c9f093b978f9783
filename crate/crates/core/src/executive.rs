//! Online execution: follow the plan, re-plan after faults, fall back to the
//! recovery policy, and Monte Carlo campaigns over seeded trials.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envmodel::{Cell, Scenario};
use crate::faultmodel::{self, OutcomeLabel};
use crate::recovery::RecoveryPolicy;
use crate::roverdyn::{self, Action, RoverState};
use crate::treeplan::{PartialPolicyTree, Planner};

/// Per-action penalty for everything except science.
pub const DEFAULT_ZETA: f64 = -0.001;

/// Two-sided 99 % standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Safety guard on the number of steps in one trial.
const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialStatus {
    SafeSuccess,
    OperationalExit,
    Stranded,
    /// The start state already exceeded the risk bound.
    Infeasible,
}

/// Who chose an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Controller {
    Plan,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub state: RoverState,
    pub action: String,
    pub outcome: OutcomeLabel,
    pub controller: Controller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub index: u64,
    pub steps: Vec<TraceStep>,
    pub final_state: RoverState,
    pub faults: usize,
    pub waypoints_visited: usize,
    pub replans: usize,
    pub reward: f64,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.status != TrialStatus::SafeSuccess
    }

    /// Per-step CSV: time, cell, energy, action, outcome, controller.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("time,x,y,energy,next_wp,action,outcome,controller\n");
        for s in &self.steps {
            let x = &s.state;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:?},{:?}",
                x.time, x.cell.x, x.cell.y, x.energy, x.next_wp, s.action, s.outcome, s.controller
            );
        }
        let x = &self.final_state;
        let _ = writeln!(
            out,
            "{},{},{},{},{},end,{:?},",
            x.time, x.cell.x, x.cell.y, x.energy, x.next_wp, self.status
        );
        out
    }
}

/// Reward of an action trace: +1 per science action, `zeta` for any other.
pub fn trace_reward(actions: impl IntoIterator<Item = bool>, zeta: f64) -> f64 {
    actions
        .into_iter()
        .map(|science| if science { 1.0 } else { zeta })
        .sum()
}

/// Deterministic per-trial generator: stream `index` of `base_seed`.
pub fn trial_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

struct Run<'p, 'a> {
    planner: &'p Planner<'a>,
    zeta: f64,
    steps: Vec<TraceStep>,
    x: RoverState,
    faults: usize,
    science: usize,
    replans: usize,
    reward: f64,
}

impl Run<'_, '_> {
    fn step(&mut self, a: Action, rng: &mut ChaCha8Rng, controller: Controller) -> Option<OutcomeLabel> {
        let s = self.planner.scenario();
        let outcome = faultmodel::sample_outcome(&self.x, a, s, rng).ok()?;
        self.steps.push(TraceStep {
            state: self.x,
            action: a.to_string(),
            outcome: outcome.label,
            controller,
        });
        if a.is_science() {
            self.science += 1;
            self.reward += 1.0;
        } else {
            self.reward += self.zeta;
        }
        if outcome.label != OutcomeLabel::Nominal {
            self.faults += 1;
        }
        self.x = outcome.state;
        Some(outcome.label)
    }

    /// Follows `plan` until its terminal or a fault landing. Returns the
    /// replacement plan after a fault, `None` when done or when the plan
    /// cannot be continued.
    fn follow(&mut self, plan: &PartialPolicyTree, rng: &mut ChaCha8Rng) -> Result<(), Option<PartialPolicyTree>> {
        let s = self.planner.scenario();
        for node in &plan.nodes {
            let Some(a) = node.action else {
                return Ok(());
            };
            if !roverdyn::in_operational(&self.x, s) {
                return Err(None);
            }
            match self.step(a, rng, Controller::Plan) {
                None => return Err(None),
                Some(OutcomeLabel::Nominal) => {}
                Some(_) => {
                    self.replans += 1;
                    return Err(self.planner.plan_mission(&self.x));
                }
            }
        }
        Ok(())
    }
}

/// One online trial from `x0`: plan, follow, re-plan on faults, and hand
/// over to the recovery policy when no plan exists or the plan ends.
pub fn run_online(planner: &Planner, x0: &RoverState, rng: &mut ChaCha8Rng, zeta: f64) -> TrialRecord {
    let s = planner.scenario();
    let pol = planner.policy();
    let mut run = Run {
        planner,
        zeta,
        steps: Vec::new(),
        x: *x0,
        faults: 0,
        science: 0,
        replans: 0,
        reward: 0.0,
    };
    let finish = |run: Run, status: TrialStatus| TrialRecord {
        seed: 0,
        index: 0,
        steps: run.steps,
        final_state: run.x,
        faults: run.faults,
        waypoints_visited: run.science,
        replans: run.replans,
        reward: run.reward,
        status,
    };
    if pol.risk(x0, s) > planner.config().beta {
        return finish(run, TrialStatus::Infeasible);
    }
    let mut plan = planner.plan_mission(x0);
    while let Some(p) = plan.take() {
        match run.follow(&p, rng) {
            Ok(()) => break,
            Err(next) => plan = next,
        }
    }
    // Recovery loop; a no-op when the plan already ended safe.
    while run.steps.len() < MAX_STEPS {
        if roverdyn::is_safe(&run.x, s) {
            return finish(run, TrialStatus::SafeSuccess);
        }
        if !roverdyn::in_operational(&run.x, s) {
            return finish(run, TrialStatus::OperationalExit);
        }
        if pol.risk(&run.x, s) >= 1.0 {
            return finish(run, TrialStatus::Stranded);
        }
        let Some(a) = pol.greedy_action(&run.x, s) else {
            return finish(run, TrialStatus::Stranded);
        };
        if run.step(a, rng, Controller::Recovery).is_none() {
            return finish(run, TrialStatus::Stranded);
        }
    }
    finish(run, TrialStatus::Stranded)
}

/// Follows the greedy recovery action from `x` until the state is safe
/// (`true`) or the policy halts or leaves the operational region (`false`).
pub fn rollout_recovery(pol: &RecoveryPolicy, s: &Scenario, x: &RoverState, rng: &mut ChaCha8Rng) -> bool {
    let mut x = *x;
    for _ in 0..MAX_STEPS {
        if roverdyn::is_safe(&x, s) {
            return true;
        }
        if !roverdyn::in_operational(&x, s) {
            return false;
        }
        let Some(a) = pol.greedy_action(&x, s) else {
            return false;
        };
        match faultmodel::sample_outcome(&x, a, s, rng) {
            Ok(o) => x = o.state,
            Err(_) => return false,
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: u64,
    pub reward: f64,
    pub status: TrialStatus,
    pub faults: usize,
    pub waypoints_visited: usize,
    pub replans: usize,
    pub final_cell: Cell,
    pub final_time: f64,
    pub final_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub n: usize,
    pub base_seed: u64,
    pub beta: f64,
    pub mean_reward: f64,
    pub failure_rate: f64,
    /// Half-width of the 99 % normal-approximation interval on the failure rate.
    pub ci: f64,
    /// Bound the failure rate is checked against: `beta + z * sqrt(beta (1 - beta) / n)`.
    pub bound: f64,
    /// Trial counts keyed by reward rounded to the nearest integer.
    pub histogram: BTreeMap<i64, usize>,
    pub status_counts: BTreeMap<String, usize>,
    pub trials: Vec<TrialSummary>,
}

impl CampaignStats {
    pub fn from_records(records: &[TrialRecord], base_seed: u64, beta: f64) -> Self {
        let n = records.len();
        let nf = n as f64;
        let failures = records.iter().filter(|r| r.failed()).count();
        let failure_rate = failures as f64 / nf;
        let mean_reward = records.iter().map(|r| r.reward).sum::<f64>() / nf;
        let mut histogram = BTreeMap::new();
        let mut status_counts = BTreeMap::new();
        for r in records {
            *histogram.entry(r.reward.round() as i64).or_insert(0) += 1;
            *status_counts.entry(format!("{:?}", r.status)).or_insert(0) += 1;
        }
        CampaignStats {
            n,
            base_seed,
            beta,
            mean_reward,
            failure_rate,
            ci: Z99 * (failure_rate * (1.0 - failure_rate) / nf).sqrt(),
            bound: beta + Z99 * (beta * (1.0 - beta) / nf).sqrt(),
            histogram,
            status_counts,
            trials: records
                .iter()
                .map(|r| TrialSummary {
                    index: r.index,
                    reward: r.reward,
                    status: r.status,
                    faults: r.faults,
                    waypoints_visited: r.waypoints_visited,
                    replans: r.replans,
                    final_cell: r.final_state.cell,
                    final_time: r.final_state.time,
                    final_energy: r.final_state.energy,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign stats serialize") + "\n"
    }
}

pub fn run_trial(planner: &Planner, x0: &RoverState, base_seed: u64, index: u64, zeta: f64) -> TrialRecord {
    let mut rng = trial_rng(base_seed, index);
    let mut r = run_online(planner, x0, &mut rng, zeta);
    r.seed = base_seed;
    r.index = index;
    r
}

/// Runs `n_trials` independent trials in parallel and aggregates them in
/// trial order.
pub fn run_campaign(
    planner: &Planner,
    x0: &RoverState,
    n_trials: usize,
    base_seed: u64,
    zeta: f64,
) -> (CampaignStats, Vec<TrialRecord>) {
    assert!(n_trials >= 1, "a campaign needs at least one trial");
    let records: Vec<TrialRecord> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| run_trial(planner, x0, base_seed, i, zeta))
        .collect();
    let stats = CampaignStats::from_records(&records, base_seed, planner.config().beta);
    (stats, records)
}
