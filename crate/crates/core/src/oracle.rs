//! Independent ground truth on micro instances: closed-form tree risk, the
//! exact chance-constrained optimum on the lattice model, lattice
//! reachability and deterministic earliest arrival.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::envmodel::Scenario;
use crate::error::{Error, Result};
use crate::executive::DEFAULT_ZETA;
use crate::faultmodel::{self, OutcomeLabel};
use crate::recovery::{RecoveryPolicy, StateLattice};
use crate::roverdyn::{self, Action, RoverState};
use crate::treeplan::PartialPolicyTree;

pub const MAX_CELLS: usize = 16;
pub const MAX_TIME_BINS: usize = 8;
pub const MAX_ENERGY_BINS: usize = 8;
pub const MAX_WAYPOINTS: usize = 2;

/// A scenario small enough for exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct MicroInstance {
    pub scenario: Scenario,
    pub lattice: StateLattice,
}

impl MicroInstance {
    pub fn new(scenario: Scenario, time_res: f64, energy_res: f64) -> Result<Self> {
        let lattice = StateLattice::new(&scenario, time_res, energy_res)?;
        let checks = [
            ("cells", lattice.n_cells, MAX_CELLS),
            ("time bins", lattice.n_time, MAX_TIME_BINS),
            ("energy bins", lattice.n_energy, MAX_ENERGY_BINS),
            ("waypoints", scenario.waypoints().len(), MAX_WAYPOINTS),
        ];
        for (what, n, max) in checks {
            if n > max {
                return Err(Error::NotMicro(format!("{n} {what}, at most {max} allowed")));
            }
        }
        Ok(MicroInstance { scenario, lattice })
    }
}

/// Root execution risk of `tree` as the sum over its moves of the
/// probability of reaching the move nominally times its fault-branch risk.
pub fn exact_tree_risk(tree: &PartialPolicyTree, s: &Scenario, pol: &RecoveryPolicy) -> f64 {
    let mut on_chain = 1.0;
    let mut risk = 0.0;
    for n in &tree.nodes {
        let Some(a) = n.action else {
            break;
        };
        if !a.is_move() {
            continue;
        }
        let x = RoverState::new(n.cell, n.time, n.min_energy_req, n.next_wp);
        let Ok(outcomes) = faultmodel::enumerate_outcomes(&x, a, s) else {
            return 1.0;
        };
        let mut p_nom = 0.0;
        let mut branch = 0.0;
        for o in outcomes {
            match o.label {
                OutcomeLabel::Nominal => p_nom = o.probability,
                _ => branch += o.probability * pol.risk(&o.state, s),
            }
        }
        risk += on_chain * branch;
        on_chain *= p_nom;
    }
    risk
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Fail,
    Node(usize),
}

/// Node key of the augmented lattice: point, waypoint index and whether the
/// state that landed here was safe (so the mission may end here).
#[derive(Debug, Clone, Copy)]
struct Key {
    cell: usize,
    k: usize,
    j: usize,
    wp: usize,
    safe: bool,
}

struct Augmented<'a> {
    s: &'a Scenario,
    lat: &'a StateLattice,
    n_wp: usize,
}

impl Augmented<'_> {
    fn len(&self) -> usize {
        self.lat.len() * (self.n_wp + 1) * 2
    }

    fn flat(&self, key: Key) -> usize {
        (self.lat.flat(key.cell, key.k, key.j) * (self.n_wp + 1) + key.wp) * 2 + key.safe as usize
    }

    fn key(&self, idx: usize) -> Key {
        let safe = idx % 2 == 1;
        let rest = idx / 2;
        let wp = rest % (self.n_wp + 1);
        let point = rest / (self.n_wp + 1);
        let j = point % self.lat.n_energy;
        let cell = (point / self.lat.n_energy) % self.lat.n_cells;
        let k = point / (self.lat.n_energy * self.lat.n_cells);
        Key { cell, k, j, wp, safe }
    }

    fn target(&self, y: &RoverState) -> Target {
        if !roverdyn::in_operational(y, self.s) {
            return Target::Fail;
        }
        match (self.lat.time_up(y.time), self.lat.energy_down(y.energy)) {
            (Some(k), Some(j)) => Target::Node(self.flat(Key {
                cell: self.s.terrain().index(y.cell),
                k,
                j,
                wp: y.next_wp,
                safe: roverdyn::is_safe(y, self.s),
            })),
            _ => Target::Fail,
        }
    }

    /// Conservative corner state of a node.
    fn state(&self, key: Key) -> RoverState {
        RoverState::new(
            self.s.terrain().cell(key.cell),
            self.lat.time_at(key.k),
            self.lat.energy_at(key.j),
            key.wp,
        )
    }

    /// Legal actions with their reward and outcome distribution.
    fn transitions(&self, key: Key, zeta: f64) -> Vec<Transition> {
        let x = self.state(key);
        roverdyn::available_actions(&x, self.s)
            .into_iter()
            .filter_map(|a| {
                let outcomes = faultmodel::enumerate_outcomes(&x, a, self.s).ok()?;
                let reward = if a.is_science() { 1.0 } else { zeta };
                Some((
                    a,
                    reward,
                    outcomes
                        .iter()
                        .map(|o| (o.probability, self.target(&o.state)))
                        .collect(),
                ))
            })
            .collect()
    }
}

/// Action, its reward and the distribution over landing targets.
type Transition = (Action, f64, Vec<(f64, Target)>);

/// One Pareto-optimal deterministic policy from a node.
#[derive(Debug, Clone)]
struct Entry {
    reward: f64,
    failure: f64,
    /// `None` ends the mission here: stop when safe, halt otherwise.
    action: Option<Action>,
    /// Chosen entry of each outcome's front, in outcome order.
    picks: Vec<u32>,
}

fn prune(mut v: Vec<Entry>) -> Vec<Entry> {
    v.sort_by(|a, b| {
        a.failure
            .total_cmp(&b.failure)
            .then_with(|| b.reward.total_cmp(&a.reward))
    });
    let mut out: Vec<Entry> = Vec::new();
    for e in v {
        if out.last().is_none_or(|l| e.reward > l.reward) {
            out.push(e);
        }
    }
    out
}

const FAIL_FRONT: [(f64, f64); 1] = [(0.0, 1.0)];

/// Largest front product formed while combining outcomes.
const PRODUCT_LIMIT: usize = 2_000_000;

struct Fronts<'a> {
    aug: Augmented<'a>,
    zeta: f64,
    memo: Vec<Option<Vec<Entry>>>,
    overflow: bool,
}

impl Fronts<'_> {
    fn front_of(&mut self, t: Target) -> Vec<(f64, f64)> {
        match t {
            Target::Fail => FAIL_FRONT.to_vec(),
            Target::Node(i) => self.front(i).iter().map(|e| (e.reward, e.failure)).collect(),
        }
    }

    fn front(&mut self, idx: usize) -> &[Entry] {
        if self.memo[idx].is_none() {
            let f = self.solve(idx);
            self.memo[idx] = Some(f);
        }
        self.memo[idx].as_deref().expect("just filled")
    }

    fn solve(&mut self, idx: usize) -> Vec<Entry> {
        let key = self.aug.key(idx);
        let end = Entry {
            reward: 0.0,
            failure: if key.safe { 0.0 } else { 1.0 },
            action: None,
            picks: Vec::new(),
        };
        let mut all = vec![end];
        for (a, reward, outcomes) in self.aug.transitions(key, self.zeta) {
            let mut acc = vec![Entry {
                reward,
                failure: 0.0,
                action: Some(a),
                picks: Vec::new(),
            }];
            for (p, t) in outcomes {
                let f = self.front_of(t);
                if acc.len() * f.len() > PRODUCT_LIMIT {
                    self.overflow = true;
                    return vec![all.swap_remove(0)];
                }
                let mut next = Vec::with_capacity(acc.len() * f.len());
                for e in &acc {
                    for (i, &(r, q)) in f.iter().enumerate() {
                        let mut picks = e.picks.clone();
                        picks.push(i as u32);
                        next.push(Entry {
                            reward: e.reward + p * r,
                            failure: e.failure + p * q,
                            action: e.action,
                            picks,
                        });
                    }
                }
                acc = prune(next);
            }
            all.extend(acc);
        }
        prune(all)
    }

    /// Re-evaluates the policy rooted at `(t, entry)` by enumerating its full
    /// outcome tree from scratch.
    fn evaluate(&mut self, t: Target, entry: usize) -> (f64, f64) {
        let Target::Node(idx) = t else {
            return (0.0, 1.0);
        };
        let e = self.front(idx)[entry].clone();
        let key = self.aug.key(idx);
        let Some(a) = e.action else {
            return (0.0, if key.safe { 0.0 } else { 1.0 });
        };
        let x = self.aug.state(key);
        let outcomes = faultmodel::enumerate_outcomes(&x, a, self.aug.s).expect("policy actions are legal");
        let mut reward = if a.is_science() { 1.0 } else { self.zeta };
        let mut failure = 0.0;
        for (o, &pick) in outcomes.iter().zip(&e.picks) {
            let (r, q) = self.evaluate(self.aug.target(&o.state), pick as usize);
            reward += o.probability * r;
            failure += o.probability * q;
        }
        (reward, failure)
    }
}

/// Best expected reward subject to the failure bound, and the policy's
/// failure probability, both on the lattice model.
#[derive(Debug, Clone, PartialEq)]
pub struct CcOptimum {
    pub reward: f64,
    pub failure: f64,
    /// The same policy re-evaluated by full outcome-tree enumeration.
    pub verified_reward: f64,
    pub verified_failure: f64,
    /// Pareto front `(reward, failure)` at the start state.
    pub front: Vec<(f64, f64)>,
}

/// Exact chance-constrained optimum over deterministic policies on the
/// lattice augmented with the waypoint index, by Pareto-front dynamic
/// programming over (expected reward, failure probability). `Ok(None)` when
/// no policy meets the bound; an error when the fronts grow too large to
/// enumerate.
pub fn exhaustive_cc_optimum(mi: &MicroInstance, beta: f64) -> Result<Option<CcOptimum>> {
    let s = &mi.scenario;
    let aug = Augmented {
        s,
        lat: &mi.lattice,
        n_wp: s.waypoints().len(),
    };
    let root = aug.target(s.start());
    let n = aug.len();
    let mut fr = Fronts {
        aug,
        zeta: DEFAULT_ZETA,
        memo: vec![None; n],
        overflow: false,
    };
    let front = fr.front_of(root);
    if fr.overflow {
        return Err(Error::NotMicro(format!(
            "Pareto fronts exceed {PRODUCT_LIMIT} combined entries"
        )));
    }
    let Some((best, &(reward, failure))) = front
        .iter()
        .enumerate()
        .filter(|(_, &(_, q))| q <= beta + 1e-12)
        .max_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)))
    else {
        return Ok(None);
    };
    let (verified_reward, verified_failure) = fr.evaluate(root, best);
    Ok(Some(CcOptimum {
        reward,
        failure,
        verified_reward,
        verified_failure,
        front,
    }))
}

/// Best expected reward with no bound on failure, by a scalar DP.
pub fn unconstrained_optimum(mi: &MicroInstance) -> f64 {
    let s = &mi.scenario;
    let aug = Augmented {
        s,
        lat: &mi.lattice,
        n_wp: s.waypoints().len(),
    };
    let mut memo: Vec<Option<f64>> = vec![None; aug.len()];
    fn best(aug: &Augmented, memo: &mut Vec<Option<f64>>, t: Target) -> f64 {
        let Target::Node(i) = t else {
            return 0.0;
        };
        if let Some(v) = memo[i] {
            return v;
        }
        let mut v = 0.0f64;
        for (_, reward, outcomes) in aug.transitions(aug.key(i), DEFAULT_ZETA) {
            let q: f64 = outcomes.iter().map(|&(p, t)| p * best(aug, memo, t)).sum();
            v = v.max(reward + q);
        }
        memo[i] = Some(v);
        v
    }
    let root = aug.target(s.start());
    best(&aug, &mut memo, root)
}

/// Lattice points from which some sequence of nominal recovery actions
/// reaches the safe set, indexed like `StateLattice::flat`. Found by a
/// breadth-first search backwards from the safe sink.
pub fn lattice_reachability(s: &Scenario, lat: &StateLattice) -> Vec<bool> {
    let n = lat.len();
    let sink = n;
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let cap = s.rover().capacity;
    for k in 0..lat.n_time {
        for cell in 0..lat.n_cells {
            for j in 0..lat.n_energy {
                let from = lat.flat(cell, k, j);
                let x = RoverState::new(s.terrain().cell(cell), lat.time_at(k), lat.energy_at(j), 0);
                if roverdyn::is_safe(&x, s) {
                    reverse[sink].push(from);
                    continue;
                }
                if !s.terrain().is_traversable(x.cell) {
                    continue;
                }
                for a in Action::RECOVERY {
                    let Ok(e) = roverdyn::effect(s, x.cell, x.time, 0, a) else {
                        continue;
                    };
                    let y = e.apply(&x, cap);
                    let to = match lat.conservative_index(&y, s) {
                        crate::recovery::LatticeIndex::Safe => sink,
                        crate::recovery::LatticeIndex::Fail => continue,
                        crate::recovery::LatticeIndex::Point { cell, k, j } => lat.flat(cell, k, j),
                    };
                    reverse[to].push(from);
                }
            }
        }
    }
    let mut seen = vec![false; n + 1];
    seen[sink] = true;
    let mut queue = VecDeque::from([sink]);
    while let Some(v) = queue.pop_front() {
        for &u in &reverse[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen.truncate(n);
    seen
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    time: f64,
    energy: f64,
    cell: usize,
    wp: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(self.energy.total_cmp(&other.energy))
            .then(other.cell.cmp(&self.cell))
            .then(other.wp.cmp(&self.wp))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Earliest time at which nominal actions from `x0` visit every remaining
/// waypoint and stand at a safe haven, ignoring faults. Labels are pruned by
/// (earlier, fuller) dominance, which is exact when illumination does not
/// vary in time.
pub fn earliest_safe_arrival(s: &Scenario, x0: &RoverState) -> Option<f64> {
    let t = s.terrain();
    let n_wp = s.waypoints().len();
    let mut kept: Vec<Vec<(f64, f64)>> = vec![Vec::new(); t.len() * (n_wp + 1)];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Label>, kept: &mut Vec<Vec<(f64, f64)>>, x: &RoverState| {
        let slot = t.index(x.cell) * (n_wp + 1) + x.next_wp;
        if kept[slot].iter().any(|&(tm, b)| tm <= x.time && b >= x.energy) {
            return;
        }
        kept[slot].retain(|&(tm, b)| !(x.time <= tm && x.energy >= b));
        kept[slot].push((x.time, x.energy));
        heap.push(Label {
            time: x.time,
            energy: x.energy,
            cell: t.index(x.cell),
            wp: x.next_wp,
        });
    };
    if !roverdyn::in_operational(x0, s) {
        return None;
    }
    push(&mut heap, &mut kept, x0);
    while let Some(l) = heap.pop() {
        let slot = l.cell * (n_wp + 1) + l.wp;
        if !kept[slot].contains(&(l.time, l.energy)) {
            continue;
        }
        let x = RoverState::new(t.cell(l.cell), l.time, l.energy, l.wp);
        if l.wp == n_wp && roverdyn::is_safe(&x, s) {
            return Some(l.time);
        }
        for a in roverdyn::available_actions(&x, s) {
            let Ok(y) = roverdyn::nominal_transition(&x, a, s) else {
                continue;
            };
            if roverdyn::in_operational(&y, s) {
                push(&mut heap, &mut kept, &y);
            }
        }
    }
    None
}

/// [`earliest_safe_arrival`] rounded up to the planner's terminal grid of
/// time classes of width `class_res`.
pub fn earliest_discretized_arrival(s: &Scenario, x0: &RoverState, class_res: f64) -> Option<f64> {
    let a = earliest_safe_arrival(s, x0)?;
    let t_min = s.operational().t_min;
    let u = (a - t_min) / class_res;
    let q = (u - 1e-9 * u.abs().max(1.0)).ceil().max(0.0);
    let t = t_min + q * class_res;
    (t <= s.operational().t_max).then_some(t)
}
