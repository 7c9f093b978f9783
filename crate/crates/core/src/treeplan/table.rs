//! Exhaustive backward sweeps over `(cell, time class)` for one segment.

use std::cmp::Ordering;

use crate::envmodel::{Cell, Direction, Scenario};
use crate::faultmodel::{self, FaultEffects};
use crate::recovery::RecoveryPolicy;
use crate::roverdyn::{self, Action, Effect, RoverState};

/// Where a node's chain continues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// The node is a safe terminal.
    Terminal,
    /// Successor in the same table.
    Local(u32),
    /// Successor in the table of the following segment.
    Next(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableNode {
    pub cell: Cell,
    /// Departure time of `action`, or arrival time for a terminal.
    pub time: f64,
    /// Least energy at `time` for which the rest of the chain stays feasible.
    pub req: f64,
    pub risk: f64,
    /// Time at which the chain reaches its safe terminal.
    pub seg_end: f64,
    pub action: Option<Action>,
    pub link: Link,
}

/// Resolution-equivalence order: lower requirement, then lower risk, then
/// earlier terminal. Equal keys keep the incumbent.
pub fn dominates(a: &TableNode, b: &TableNode) -> bool {
    let key = |n: &TableNode| (n.req, n.risk, n.seg_end);
    let (ka, kb) = (key(a), key(b));
    match ka.0.total_cmp(&kb.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => match ka.1.total_cmp(&kb.1) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => ka.2 < kb.2,
        },
    }
}

/// Keeps one node per `(cell, time class)`, preferring by [`dominates`] and
/// then by insertion order.
pub fn resolution_prune(nodes: &[TableNode], class_of: impl Fn(f64) -> usize) -> Vec<TableNode> {
    let mut kept: Vec<TableNode> = Vec::new();
    for n in nodes {
        let slot = kept
            .iter_mut()
            .find(|k| k.cell == n.cell && class_of(k.time) == class_of(n.time));
        match slot {
            Some(k) if dominates(n, k) => *k = *n,
            Some(_) => {}
            None => kept.push(*n),
        }
    }
    kept
}

/// Shared inputs of every sweep.
pub struct SweepContext<'a> {
    pub scenario: &'a Scenario,
    pub policy: &'a RecoveryPolicy,
    pub beta: f64,
    pub class_res: f64,
    pub n_classes: usize,
    pub max_expansions: usize,
}

impl SweepContext<'_> {
    pub fn class_of(&self, t: f64) -> usize {
        let t_min = self.scenario.operational().t_min;
        (((t - t_min) / self.class_res).floor().max(0.0) as usize).min(self.n_classes - 1)
    }

    pub fn class_start(&self, q: usize) -> f64 {
        self.scenario.operational().t_min + q as f64 * self.class_res
    }
}

/// Fault landings of a move: probability, state and recovery risk.
pub type FaultLandings = [(f64, RoverState, f64); 2];

/// Execution risk of a node taking `a` toward a successor of risk
/// `succ_risk`: static actions pass the successor's risk through; moves add
/// the two fault branches scored by the recovery policy.
pub fn node_execution_risk(
    s: &Scenario,
    pol: &RecoveryPolicy,
    x: &RoverState,
    a: Action,
    nominal: &Effect,
    succ_risk: f64,
) -> (f64, Option<FaultLandings>) {
    if nominal.distance == 0.0 || s.fault().rate == 0.0 {
        return (succ_risk, None);
    }
    debug_assert!(a.is_move());
    let fe: FaultEffects = faultmodel::fault_effects(s, x.cell, x.time, nominal);
    let cap = s.rover().capacity;
    let f1 = fe.h1_state(x, cap);
    let f2 = fe.h2_state(x, nominal, cap);
    let r1 = pol.risk(&f1, s);
    let r2 = pol.risk(&f2, s);
    let risk = fe.p_h1 * r1 + fe.p_h2 * r2 + fe.p_nom * succ_risk;
    (risk, Some([(fe.p_h1, f1, r1), (fe.p_h2, f2, r2)]))
}

/// Least energy in `[lo, hi]` whose execution risk is within `beta`, with
/// that risk. Risk is nonincreasing in energy, so a bisection down to 1e-6 Wh
/// finds it; the returned energy always satisfies the bound.
pub fn admissible_energy(lo: f64, hi: f64, beta: f64, risk_at: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    let r = risk_at(lo);
    if r <= beta {
        return Some((lo, r));
    }
    let mut r_hi = risk_at(hi);
    if r_hi > beta {
        return None;
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = risk_at(mid);
        if r <= beta {
            hi = mid;
            r_hi = r;
        } else {
            lo = mid;
        }
    }
    Some((hi, r_hi))
}

/// Predecessor of a node at `(cell, time)` through `a` departing `origin`.
/// Returns `None` when the predecessor violates the time, energy or risk
/// bounds.
#[allow(clippy::too_many_arguments)]
pub(crate) fn predecessor(
    ctx: &SweepContext,
    succ: &TableNode,
    origin: Cell,
    a: Action,
    duration: f64,
    next_wp: usize,
    link: Link,
) -> Option<TableNode> {
    let s = ctx.scenario;
    let op = s.operational();
    let t = succ.time - duration;
    if t < op.t_min {
        return None;
    }
    let nominal = match a {
        Action::Move(d) => roverdyn::move_effect(s, origin, succ.cell, d, t, next_wp),
        _ => roverdyn::effect(s, origin, t, next_wp, a).ok()?,
    };
    let req = roverdyn::invert_requirement(succ.req, nominal.net, op.b_min, op.b_max, s.rover().capacity)?;
    let risk_at = |b: f64| {
        node_execution_risk(
            s,
            ctx.policy,
            &RoverState::new(origin, t, b, next_wp),
            a,
            &nominal,
            succ.risk,
        )
        .0
    };
    let (req, risk) = admissible_energy(req, op.b_max, ctx.beta, risk_at)?;
    Some(TableNode {
        cell: origin,
        time: t,
        req,
        risk,
        seg_end: succ.seg_end,
        action: Some(a),
        link,
    })
}

/// Wait and move predecessors of node `idx`, in tie-break order.
pub fn backward_expand(ctx: &SweepContext, node: &TableNode, idx: u32, next_wp: usize) -> Vec<TableNode> {
    let s = ctx.scenario;
    let terrain = s.terrain();
    let mut out = Vec::with_capacity(9);
    let link = Link::Local(idx);
    for d in Direction::ALL {
        let (dx, dy) = d.offset();
        let ox = node.cell.x as i64 - dx;
        let oy = node.cell.y as i64 - dy;
        if ox < 0 || oy < 0 {
            continue;
        }
        let origin = Cell::new(ox as u32, oy as u32);
        if !terrain.is_traversable(origin) {
            continue;
        }
        let duration = terrain.step_distance(origin, node.cell, d) / s.rover().velocity;
        out.extend(predecessor(ctx, node, origin, Action::Move(d), duration, next_wp, link));
    }
    out.extend(predecessor(
        ctx,
        node,
        node.cell,
        Action::Wait,
        s.rover().wait_duration,
        next_wp,
        link,
    ));
    out
}

/// Result of one segment sweep: at most one node per `(cell, class)`.
#[derive(Debug, Clone)]
pub struct SegmentTable {
    /// Waypoint whose science action this table ends with; `None` for the
    /// final run to safety.
    pub waypoint: Option<usize>,
    pub nodes: Vec<TableNode>,
    /// Node index per `cell * n_classes + class`, `u32::MAX` when empty.
    pub slots: Vec<u32>,
    pub n_classes: usize,
    pub expansions: usize,
    /// The expansion cap fired before the sweep finished.
    pub truncated: bool,
}

impl SegmentTable {
    pub fn at(&self, cell: usize, class: usize) -> Option<&TableNode> {
        match self.slots[cell * self.n_classes + class] {
            u32::MAX => None,
            i => Some(&self.nodes[i as usize]),
        }
    }

    pub fn node(&self, idx: u32) -> &TableNode {
        &self.nodes[idx as usize]
    }
}

/// Label-setting backward sweep from `seeds`. Classes are settled from the
/// latest to the earliest; since every action lasts at least one class, a
/// node's predecessors always land in strictly earlier classes.
pub fn search_segment(
    ctx: &SweepContext,
    waypoint: Option<usize>,
    next_wp: usize,
    seeds: Vec<TableNode>,
) -> SegmentTable {
    let n_cells = ctx.scenario.terrain().len();
    let n_classes = ctx.n_classes;
    let mut pending: Vec<Option<TableNode>> = vec![None; n_cells * n_classes];
    let offer = |pending: &mut Vec<Option<TableNode>>, n: TableNode| {
        let slot = ctx.scenario.terrain().index(n.cell) * n_classes + ctx.class_of(n.time);
        match &pending[slot] {
            Some(cur) if !dominates(&n, cur) => {}
            _ => pending[slot] = Some(n),
        }
    };
    for n in seeds {
        offer(&mut pending, n);
    }
    let mut table = SegmentTable {
        waypoint,
        nodes: Vec::new(),
        slots: vec![u32::MAX; n_cells * n_classes],
        n_classes,
        expansions: 0,
        truncated: false,
    };
    'sweep: for q in (0..n_classes).rev() {
        for cell in 0..n_cells {
            let slot = cell * n_classes + q;
            let Some(node) = pending[slot].take() else {
                continue;
            };
            if table.expansions >= ctx.max_expansions {
                table.truncated = true;
                break 'sweep;
            }
            table.expansions += 1;
            let idx = table.nodes.len() as u32;
            table.nodes.push(node);
            table.slots[slot] = idx;
            for p in backward_expand(ctx, &node, idx, next_wp) {
                offer(&mut pending, p);
            }
        }
    }
    table
}
