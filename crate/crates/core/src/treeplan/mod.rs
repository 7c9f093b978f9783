//! Risk-bounded backward planning through the ordered waypoint list.

mod output;
mod table;

pub use output::{plan_to_json, write_plan, write_profiles, PlanRecord};
pub use table::{
    admissible_energy, backward_expand, dominates, node_execution_risk, resolution_prune, search_segment, Link,
    SegmentTable, SweepContext, TableNode,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::envmodel::{Cell, Scenario};
use crate::error::{Error, Result};
use crate::faultmodel::OutcomeLabel;
use crate::recovery::{self, RecoveryPolicy};
use crate::roverdyn::{self, Action, RoverState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Pointwise bound on execution risk.
    pub beta: f64,
    /// Width of a time class, seconds.
    pub time_class_res: f64,
    /// Recorded for reference; equivalence keeps one node per time class.
    pub energy_class_res: f64,
    /// Expansions allowed per segment sweep.
    pub max_expansions: usize,
}

impl PlannerConfig {
    pub fn new(beta: f64) -> Self {
        PlannerConfig {
            beta,
            time_class_res: 1800.0,
            energy_class_res: 150.0,
            max_expansions: 5_000_000,
        }
    }
}

/// One step of a planned chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub cell: Cell,
    pub time: f64,
    pub min_energy_req: f64,
    /// `None` on the terminal node.
    pub action: Option<Action>,
    pub exec_risk: f64,
    pub fault_branches: Vec<FaultBranch>,
    /// Index of the next waypoint to visit when this node is reached.
    pub next_wp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultBranch {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub state: RoverState,
    pub risk: f64,
}

/// Nominal chain from the query state to a safe terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialPolicyTree {
    pub nodes: Vec<TreeNode>,
    pub root_risk: f64,
    /// Waypoint index the chain starts from.
    pub first_wp: usize,
    pub waypoints_covered: usize,
}

impl PartialPolicyTree {
    pub fn terminal(&self) -> &TreeNode {
        self.nodes.last().expect("trees are never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanStatus {
    /// Every remaining waypoint is covered.
    Full,
    /// Some trailing waypoints were dropped.
    Truncated,
    Infeasible,
}

/// Planner bound to one scenario, recovery policy and risk bound. Segment
/// sweeps are computed on first use and reused by later queries.
pub struct Planner<'a> {
    scenario: &'a Scenario,
    policy: &'a RecoveryPolicy,
    config: PlannerConfig,
    n_classes: usize,
    tables: Mutex<HashMap<(usize, usize), Arc<SegmentTable>>>,
}

/// Key of the final run-to-safety table.
const FINAL: (usize, usize) = (usize::MAX, usize::MAX);

impl<'a> Planner<'a> {
    pub fn new(scenario: &'a Scenario, policy: &'a RecoveryPolicy, config: PlannerConfig) -> Result<Self> {
        policy.check_scenario(scenario)?;
        if !(0.0..=1.0).contains(&config.beta) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in [0, 1], got {}",
                config.beta
            )));
        }
        if !(config.time_class_res > 0.0) {
            return Err(Error::InvalidArgument("time class resolution must be positive".into()));
        }
        let shortest = scenario
            .waypoints()
            .iter()
            .map(|w| w.duration)
            .fold(recovery::shortest_action(scenario), f64::min);
        if config.time_class_res > shortest {
            return Err(Error::LatticeTooCoarse {
                time_res: config.time_class_res,
                shortest,
            });
        }
        let op = scenario.operational();
        let n_classes = ((op.t_max - op.t_min) / config.time_class_res).floor() as usize + 1;
        Ok(Planner {
            scenario,
            policy,
            config,
            n_classes,
            tables: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn policy(&self) -> &RecoveryPolicy {
        self.policy
    }

    fn context(&self) -> SweepContext<'_> {
        SweepContext {
            scenario: self.scenario,
            policy: self.policy,
            beta: self.config.beta,
            class_res: self.config.time_class_res,
            n_classes: self.n_classes,
            max_expansions: self.config.max_expansions,
        }
    }

    /// Table whose chains start with next waypoint `k`, visit waypoints
    /// `k..m` and end safe. `k == m` is the waypoint-agnostic final table.
    pub fn table(&self, k: usize, m: usize) -> Arc<SegmentTable> {
        let key = if k == m { FINAL } else { (k, m) };
        if let Some(t) = self.tables.lock().expect("table cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let built = Arc::new(if k == m {
            self.build_final()
        } else {
            self.build_segment(k, m)
        });
        let mut cache = self.tables.lock().expect("table cache poisoned");
        Arc::clone(cache.entry(key).or_insert(built))
    }

    fn build_final(&self) -> SegmentTable {
        let ctx = self.context();
        let s = self.scenario;
        let op = s.operational();
        let mut seeds = Vec::new();
        for q in (0..self.n_classes).rev() {
            let t = ctx.class_start(q);
            for h in s.havens() {
                if t > h.deadline || t > op.t_max {
                    continue;
                }
                let Some(req) = roverdyn::min_safe_energy(h.cell, t, s) else {
                    continue;
                };
                if req > op.b_max {
                    continue;
                }
                seeds.push(TableNode {
                    cell: h.cell,
                    time: t,
                    req,
                    risk: 0.0,
                    seg_end: t,
                    action: None,
                    link: Link::Terminal,
                });
            }
        }
        search_segment(&ctx, None, s.waypoints().len(), seeds)
    }

    fn build_segment(&self, k: usize, m: usize) -> SegmentTable {
        let next = self.table(k + 1, m);
        let ctx = self.context();
        let s = self.scenario;
        let wp = &s.waypoints()[k];
        let mut seeds = Vec::new();
        if !next.truncated {
            for (i, n) in next.nodes.iter().enumerate() {
                if n.cell != wp.cell {
                    continue;
                }
                seeds.extend(table::predecessor(
                    &ctx,
                    n,
                    wp.cell,
                    Action::Science(k),
                    wp.duration,
                    k,
                    Link::Next(i as u32),
                ));
            }
        }
        search_segment(&ctx, Some(k), k, seeds)
    }

    /// Best entry into `table` from `x`: a node at `x`'s cell departing no
    /// earlier than `x`, reachable by idling. Picks the earliest terminal,
    /// then the lower requirement, risk and class.
    fn gate(&self, table: &SegmentTable, x: &RoverState) -> Option<(u32, f64)> {
        if table.truncated {
            return None;
        }
        let s = self.scenario;
        let ctx = self.context();
        let cell = s.terrain().index(x.cell);
        let cap = s.rover().capacity;
        let mut best: Option<(u32, f64, &TableNode)> = None;
        for q in ctx.class_of(x.time)..self.n_classes {
            let Some(&idx) = table.slots.get(cell * table.n_classes + q).filter(|&&i| i != u32::MAX) else {
                continue;
            };
            let n = table.node(idx);
            if n.time < x.time {
                continue;
            }
            let idle = n.time - x.time;
            let e = roverdyn::static_effect(s, x.cell, x.time, x.next_wp, idle, s.rover().p_wait);
            if (x.energy + e.net).min(cap) < n.req {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, _, b)) => (n.seg_end, n.req, n.risk) < (b.seg_end, b.req, b.risk),
            };
            if better {
                best = Some((idx, idle, n));
            }
        }
        best.map(|(i, idle, _)| (i, idle))
    }

    /// Plans from `x` through as many of its remaining waypoints as the risk
    /// bound allows, dropping trailing waypoints one at a time.
    pub fn plan_mission(&self, x: &RoverState) -> Option<PartialPolicyTree> {
        let s = self.scenario;
        if self.policy.risk(x, s) > self.config.beta || !roverdyn::in_operational(x, s) {
            return None;
        }
        let w = x.next_wp;
        let n = s.waypoints().len();
        for m in (w..=n).rev() {
            let table = self.table(w, m);
            if let Some((idx, idle)) = self.gate(&table, x) {
                return Some(self.assemble(x, w, m, table, idx, idle));
            }
        }
        None
    }

    pub fn status_of(&self, x: &RoverState, plan: Option<&PartialPolicyTree>) -> PlanStatus {
        match plan {
            None => PlanStatus::Infeasible,
            Some(p) if p.waypoints_covered == self.scenario.waypoints().len() - x.next_wp => PlanStatus::Full,
            Some(_) => PlanStatus::Truncated,
        }
    }

    fn assemble(
        &self,
        x: &RoverState,
        w: usize,
        m: usize,
        first: Arc<SegmentTable>,
        idx: u32,
        idle: f64,
    ) -> PartialPolicyTree {
        let s = self.scenario;
        let mut nodes = Vec::new();
        let head = *first.node(idx);
        if idle > 0.0 {
            let e = roverdyn::static_effect(s, x.cell, x.time, w, idle, s.rover().p_wait);
            let req = roverdyn::invert_requirement(
                head.req,
                e.net,
                s.operational().b_min,
                f64::INFINITY,
                s.rover().capacity,
            )
            .unwrap_or(head.req);
            nodes.push(TreeNode {
                cell: x.cell,
                time: x.time,
                min_energy_req: req,
                action: Some(Action::Idle(idle)),
                exec_risk: head.risk,
                fault_branches: Vec::new(),
                next_wp: w,
            });
        }
        let mut table = first;
        let mut cursor = idx;
        let mut wp = w;
        loop {
            let n = *table.node(cursor);
            nodes.push(self.tree_node(&n, wp));
            match n.link {
                Link::Terminal => break,
                Link::Local(i) => cursor = i,
                Link::Next(i) => {
                    wp += 1;
                    table = self.table(wp, m);
                    cursor = i;
                }
            }
        }
        PartialPolicyTree {
            root_risk: nodes[0].exec_risk,
            nodes,
            first_wp: w,
            waypoints_covered: m - w,
        }
    }

    fn tree_node(&self, n: &TableNode, next_wp: usize) -> TreeNode {
        let s = self.scenario;
        let mut fault_branches = Vec::new();
        if let Some(a @ Action::Move(_)) = n.action {
            let x = RoverState::new(n.cell, n.time, n.req, next_wp);
            if let Ok(e) = roverdyn::effect(s, n.cell, n.time, next_wp, a) {
                if let (_, Some(branches)) = node_execution_risk(s, self.policy, &x, a, &e, 0.0) {
                    for ((p, state, risk), label) in
                        branches.into_iter().zip([OutcomeLabel::FaultH1, OutcomeLabel::FaultH2])
                    {
                        fault_branches.push(FaultBranch {
                            label,
                            probability: p,
                            state,
                            risk,
                        });
                    }
                }
            }
        }
        TreeNode {
            cell: n.cell,
            time: n.time,
            min_energy_req: n.req,
            action: n.action,
            exec_risk: n.risk,
            fault_branches,
            next_wp,
        }
    }
}
