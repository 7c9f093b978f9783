//! Rover states, actions and the fault-free transition model.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envmodel::{Cell, Direction, Scenario, SOLAR_CONSTANT};
use crate::error::{Error, Result};

/// Power and mobility characteristics of the rover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverParams {
    /// Solar panel area, m².
    pub panel_area: f64,
    /// Panel conversion efficiency in (0, 1].
    pub panel_eff: f64,
    /// Driving speed, m/s.
    pub velocity: f64,
    /// Power draws in W.
    pub p_drive: f64,
    pub p_fault: f64,
    pub p_wait: f64,
    pub p_hibernate: f64,
    /// Battery capacity, Wh.
    pub capacity: f64,
    /// Duration of one Wait action, s.
    pub wait_duration: f64,
}

impl RoverParams {
    /// The medium-scale rover: 1.5 m² at 30 %, 0.05 m/s, 110/80/80/30 W, 7000 Wh.
    pub fn medium() -> Self {
        RoverParams {
            panel_area: 1.5,
            panel_eff: 0.3,
            velocity: 0.05,
            p_drive: 110.0,
            p_fault: 80.0,
            p_wait: 80.0,
            p_hibernate: 30.0,
            capacity: 7000.0,
            wait_duration: 1800.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("panel_area", self.panel_area),
            ("velocity", self.velocity),
            ("p_drive", self.p_drive),
            ("p_fault", self.p_fault),
            ("p_wait", self.p_wait),
            ("p_hibernate", self.p_hibernate),
            ("capacity", self.capacity),
            ("wait_duration", self.wait_duration),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "rover {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.panel_eff > 0.0 && self.panel_eff <= 1.0) {
            return Err(Error::InvalidScenario(format!(
                "panel efficiency must lie in (0, 1], got {}",
                self.panel_eff
            )));
        }
        Ok(())
    }

    /// Energy in Wh harvested per visible-second of full solar disk.
    pub(crate) fn harvest_per_visible_second(&self) -> f64 {
        self.panel_area * self.panel_eff * SOLAR_CONSTANT / 3600.0
    }
}

/// The hybrid state `<cell, time, energy, next waypoint>`. `next_wp` is
/// zero-based; `next_wp == n_waypoints` means every waypoint is done.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoverState {
    pub cell: Cell,
    pub time: f64,
    pub energy: f64,
    pub next_wp: usize,
}

impl RoverState {
    pub fn new(cell: Cell, time: f64, energy: f64, next_wp: usize) -> Self {
        RoverState {
            cell,
            time,
            energy,
            next_wp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Move(Direction),
    Wait,
    /// Science at waypoint `k` (zero-based).
    Science(usize),
    /// Planner-inserted idle period of arbitrary length, drawing the
    /// waiting power. Used to line a state up with a plan departure time.
    Idle(f64),
}

impl Action {
    /// Actions the recovery policy chooses from, in tie-break order.
    pub const RECOVERY: [Action; 9] = [
        Action::Move(Direction::N),
        Action::Move(Direction::NE),
        Action::Move(Direction::E),
        Action::Move(Direction::SE),
        Action::Move(Direction::S),
        Action::Move(Direction::SW),
        Action::Move(Direction::W),
        Action::Move(Direction::NW),
        Action::Wait,
    ];

    pub fn is_move(&self) -> bool {
        matches!(self, Action::Move(_))
    }

    pub fn is_science(&self) -> bool {
        matches!(self, Action::Science(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(d) => write!(f, "move_{d:?}"),
            Action::Wait => f.write_str("wait"),
            Action::Science(k) => write!(f, "science_{k}"),
            Action::Idle(secs) => write!(f, "idle_{secs}"),
        }
    }
}

/// Energy-independent part of a transition. Applying it to an energy `b`
/// gives `min(capacity, b + net)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effect {
    pub cell: Cell,
    pub duration: f64,
    /// Solar gain minus consumption, Wh, before the capacity clamp.
    pub net: f64,
    pub next_wp: usize,
    /// Drive distance in metres; zero for static actions.
    pub distance: f64,
}

impl Effect {
    pub fn apply(&self, x: &RoverState, capacity: f64) -> RoverState {
        RoverState {
            cell: self.cell,
            time: x.time + self.duration,
            energy: (x.energy + self.net).min(capacity),
            next_wp: self.next_wp,
        }
    }
}

/// Solar energy in Wh harvested at `cell` over `[t0, t1]`; nothing is
/// harvested outside the illumination coverage.
pub fn solar_gain(s: &Scenario, cell: Cell, t0: f64, t1: f64) -> f64 {
    let idx = s.terrain().index(cell);
    s.rover().harvest_per_visible_second() * s.illumination().visible_seconds(idx, t0, t1)
}

fn illegal(a: Action, cell: Cell, time: f64) -> Error {
    Error::IllegalAction {
        action: a.to_string(),
        cell: cell.xy(),
        time,
    }
}

/// Transition effect of `a` taken at `(cell, t, next_wp)`, with legality checks.
pub fn effect(s: &Scenario, cell: Cell, t: f64, next_wp: usize, a: Action) -> Result<Effect> {
    let terrain = s.terrain();
    if !terrain.is_traversable(cell) {
        return Err(illegal(a, cell, t));
    }
    match a {
        Action::Move(d) => {
            let to = terrain
                .neighbour(cell, d)
                .filter(|&c| terrain.is_traversable(c))
                .ok_or_else(|| illegal(a, cell, t))?;
            Ok(move_effect(s, cell, to, d, t, next_wp))
        }
        Action::Wait => Ok(static_effect(
            s,
            cell,
            t,
            next_wp,
            s.rover().wait_duration,
            s.rover().p_wait,
        )),
        Action::Idle(secs) => {
            if !(secs >= 0.0 && secs.is_finite()) {
                return Err(illegal(a, cell, t));
            }
            Ok(static_effect(s, cell, t, next_wp, secs, s.rover().p_wait))
        }
        Action::Science(k) => {
            let wp = s.waypoints().get(k).ok_or_else(|| illegal(a, cell, t))?;
            if next_wp != k || wp.cell != cell || !wp.admits_start(t) {
                return Err(illegal(a, cell, t));
            }
            let gain = solar_gain(s, cell, t, t + wp.duration);
            Ok(Effect {
                cell,
                duration: wp.duration,
                net: gain - wp.energy_cost,
                next_wp: k + 1,
                distance: 0.0,
            })
        }
    }
}

pub(crate) fn move_effect(s: &Scenario, from: Cell, to: Cell, d: Direction, t: f64, next_wp: usize) -> Effect {
    let rover = s.rover();
    let distance = s.terrain().step_distance(from, to, d);
    let duration = distance / rover.velocity;
    let mid = t + duration / 2.0;
    let gain = solar_gain(s, from, t, mid) + solar_gain(s, to, mid, t + duration);
    Effect {
        cell: to,
        duration,
        net: gain - rover.p_drive * duration / 3600.0,
        next_wp,
        distance,
    }
}

pub(crate) fn static_effect(s: &Scenario, cell: Cell, t: f64, next_wp: usize, duration: f64, power: f64) -> Effect {
    Effect {
        cell,
        duration,
        net: solar_gain(s, cell, t, t + duration) - power * duration / 3600.0,
        next_wp,
        distance: 0.0,
    }
}

/// Legal actions from `x`: moves in direction order, Wait, then Science.
pub fn available_actions(x: &RoverState, s: &Scenario) -> Vec<Action> {
    let terrain = s.terrain();
    let mut out: Vec<Action> = Direction::ALL
        .into_iter()
        .filter(|&d| terrain.neighbour(x.cell, d).is_some_and(|c| terrain.is_traversable(c)))
        .map(Action::Move)
        .collect();
    out.push(Action::Wait);
    if let Some(wp) = s.waypoints().get(x.next_wp) {
        if wp.cell == x.cell && wp.admits_start(x.time) {
            out.push(Action::Science(x.next_wp));
        }
    }
    out
}

pub fn nominal_transition(x: &RoverState, a: Action, s: &Scenario) -> Result<RoverState> {
    let e = effect(s, x.cell, x.time, x.next_wp, a)?;
    Ok(e.apply(x, s.rover().capacity))
}

/// Energy after hibernating at haven `h` from `t_arr` to its deadline, and
/// the lowest energy reached along the way.
pub fn hibernation_outcome(h: Cell, t_arr: f64, b_arr: f64, s: &Scenario) -> Result<(f64, f64)> {
    let haven = s
        .haven_at(h)
        .ok_or_else(|| Error::InvalidArgument(format!("{:?} is not a safe haven", h.xy())))?;
    if t_arr > haven.deadline {
        return Err(Error::InvalidArgument(format!(
            "arrival {t_arr} is after the haven deadline {}",
            haven.deadline
        )));
    }
    Ok(hibernate(s, h, t_arr, haven.deadline, b_arr))
}

fn hibernate(s: &Scenario, h: Cell, t0: f64, t1: f64, b0: f64) -> (f64, f64) {
    let rover = s.rover();
    let harvest = rover.harvest_per_visible_second();
    let idx = s.terrain().index(h);
    let mut b = b0;
    let mut floor = b0;
    for (dur, frac) in s.illumination().pieces(idx, t0, t1) {
        let delta = harvest * frac * dur - rover.p_hibernate * dur / 3600.0;
        if delta >= 0.0 {
            b = (b + delta).min(rover.capacity);
        } else {
            b += delta;
            floor = floor.min(b);
        }
    }
    (b, floor)
}

pub fn is_safe(x: &RoverState, s: &Scenario) -> bool {
    let Some(haven) = s.haven_at(x.cell) else {
        return false;
    };
    if !(x.time <= haven.deadline) {
        return false;
    }
    let (b_final, floor) = hibernate(s, x.cell, x.time, haven.deadline, x.energy);
    b_final >= haven.min_energy && floor >= s.operational().b_min
}

/// Least arrival energy that makes `(h, t)` safe, or `None` when no energy
/// up to the battery capacity suffices.
pub fn min_safe_energy(h: Cell, t: f64, s: &Scenario) -> Option<f64> {
    let haven = s.haven_at(h)?;
    if !(t <= haven.deadline) {
        return None;
    }
    let rover = s.rover();
    let b_min = s.operational().b_min;
    let harvest = rover.harvest_per_visible_second();
    let idx = s.terrain().index(h);
    // Backward pass: with no clamp binding, each piece needs
    // `max(b_min, need - delta)` at its start.
    let mut need = haven.min_energy.max(b_min);
    let pieces = s.illumination().pieces(idx, t, haven.deadline);
    for &(dur, frac) in pieces.iter().rev() {
        if need > rover.capacity {
            return None;
        }
        let delta = harvest * frac * dur - rover.p_hibernate * dur / 3600.0;
        need = (need - delta).max(b_min);
    }
    if need > rover.capacity {
        return None;
    }
    // Settle on the least float the forward check accepts, so that
    // `is_safe(x) == (x.energy >= min_safe_energy(..))` holds exactly.
    let probe = |b: f64| is_safe(&RoverState::new(h, t, b, 0), s);
    let mut guard = 0;
    while !probe(need) {
        need = need.next_up();
        guard += 1;
        if need > rover.capacity || guard > 64 {
            return None;
        }
    }
    while need > b_min && probe(need.next_down()) && guard < 128 {
        need = need.next_down();
        guard += 1;
    }
    Some(need)
}

/// Cell traversable, time inside the window and energy inside the interval.
pub fn in_operational(x: &RoverState, s: &Scenario) -> bool {
    s.terrain().is_traversable(x.cell) && s.operational().contains(x.time, x.energy)
}

/// Least `b >= floor` with `min(cap, b + net) >= req`, or `None` when `req`
/// exceeds the capacity or the result exceeds `ceiling`.
pub fn invert_requirement(req: f64, net: f64, floor: f64, ceiling: f64, capacity: f64) -> Option<f64> {
    if req > capacity {
        return None;
    }
    let mut b = (req - net).max(floor);
    let mut guard = 0;
    while b + net < req {
        b = b.next_up();
        guard += 1;
        if guard > 64 {
            return None;
        }
    }
    (b <= ceiling).then_some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{Haven, IlluminationSeries, OperationalBounds, TerrainGrid, Waypoint};
    use crate::faultmodel::FaultParams;

    fn scenario(fraction: f64, waypoints: Vec<Waypoint>) -> Scenario {
        let terrain = TerrainGrid::flat(3, 3, 240.0).unwrap();
        let illum = IlluminationSeries::constant(3, 3, 0.0, 3600.0, 200, fraction).unwrap();
        Scenario::new(
            terrain,
            illum,
            waypoints,
            vec![Haven {
                cell: Cell::new(0, 0),
                deadline: 36000.0,
                min_energy: 2000.0,
            }],
            OperationalBounds {
                t_min: 0.0,
                t_max: 36000.0,
                b_min: 500.0,
                b_max: 7000.0,
            },
            RoverParams::medium(),
            FaultParams::medium(),
            RoverState::new(Cell::new(1, 1), 0.0, 1000.0, 0),
        )
        .unwrap()
    }

    #[test]
    fn action_counts() {
        let s = scenario(0.0, vec![Waypoint::new(Cell::new(1, 1), 7200.0, 2000.0)]);
        let centre = RoverState::new(Cell::new(1, 1), 0.0, 1000.0, 0);
        assert_eq!(available_actions(&centre, &s).len(), 10);
        let done = RoverState { next_wp: 1, ..centre };
        assert_eq!(available_actions(&done, &s).len(), 9);
        let corner = RoverState::new(Cell::new(0, 0), 0.0, 1000.0, 0);
        assert_eq!(available_actions(&corner, &s).len(), 4);

        let windowed = scenario(
            0.0,
            vec![Waypoint::new(Cell::new(1, 1), 7200.0, 2000.0).with_window(0.0, 7000.0)],
        );
        assert_eq!(available_actions(&centre, &windowed).len(), 9);
    }

    #[test]
    fn wait_in_shade() {
        let s = scenario(0.0, vec![]);
        let x = RoverState::new(Cell::new(1, 1), 0.0, 1000.0, 0);
        let y = nominal_transition(&x, Action::Wait, &s).unwrap();
        assert_eq!(y.energy, 960.0);
        assert_eq!(y.time, 1800.0);
    }

    #[test]
    fn move_in_full_sun() {
        let s = scenario(1.0, vec![]);
        let x = RoverState::new(Cell::new(1, 1), 0.0, 1000.0, 0);
        let y = nominal_transition(&x, Action::Move(Direction::E), &s).unwrap();
        assert_eq!(y.cell, Cell::new(2, 1));
        assert!((y.time - 4800.0).abs() < 1e-9);
        assert!((y.energy - 1673.53).abs() < 0.01, "{}", y.energy);

        let full = RoverState { energy: 6900.0, ..x };
        let y = nominal_transition(&full, Action::Move(Direction::E), &s).unwrap();
        assert_eq!(y.energy, 7000.0);
    }

    #[test]
    fn science_costs_only_its_energy() {
        let s = scenario(0.0, vec![Waypoint::new(Cell::new(1, 1), 7200.0, 2000.0)]);
        let x = RoverState::new(Cell::new(1, 1), 0.0, 5000.0, 0);
        let y = nominal_transition(&x, Action::Science(0), &s).unwrap();
        assert_eq!(y.energy, 3000.0);
        assert_eq!(y.next_wp, 1);
        assert!(nominal_transition(&y, Action::Science(0), &s).is_err());
    }

    #[test]
    fn hibernation_examples() {
        let s = scenario(0.0, vec![]);
        let h = Cell::new(0, 0);
        let (b, floor) = hibernation_outcome(h, 0.0, 3000.0, &s).unwrap();
        assert!((b - 2700.0).abs() < 1e-9);
        assert_eq!(floor, b);
        assert_eq!(hibernation_outcome(h, 36000.0, 2500.0, &s).unwrap(), (2500.0, 2500.0));
        assert!(hibernation_outcome(h, 36001.0, 2500.0, &s).is_err());

        let sunny = scenario(1.0, vec![]);
        let (b, _) = hibernation_outcome(h, 0.0, 3000.0, &sunny).unwrap();
        assert_eq!(b, 7000.0);
    }

    #[test]
    fn safety_boundary_is_inclusive() {
        let s = scenario(0.0, vec![]);
        let h = Cell::new(0, 0);
        let need = min_safe_energy(h, 0.0, &s).unwrap();
        assert!((need - 2300.0).abs() < 1e-9);
        assert!(is_safe(&RoverState::new(h, 0.0, need, 0), &s));
        assert!(!is_safe(&RoverState::new(h, 0.0, need - 1e-6, 0), &s));
        assert!(!is_safe(&RoverState::new(Cell::new(1, 1), 0.0, 7000.0, 0), &s));
    }

    #[test]
    fn floor_below_b_min_is_unsafe() {
        // Shaded haven with a low target: the final energy is fine only if
        // the floor is ignored.
        let terrain = TerrainGrid::flat(2, 2, 240.0).unwrap();
        let illum = IlluminationSeries::from_fn(2, 2, 0.0, 3600.0, 20, |_, f| if f < 10 { 0.0 } else { 1.0 }).unwrap();
        let s = Scenario::new(
            terrain,
            illum,
            vec![],
            vec![Haven {
                cell: Cell::new(0, 0),
                deadline: 72000.0,
                min_energy: 600.0,
            }],
            OperationalBounds {
                t_min: 0.0,
                t_max: 72000.0,
                b_min: 500.0,
                b_max: 7000.0,
            },
            RoverParams::medium(),
            FaultParams::medium(),
            RoverState::new(Cell::new(1, 1), 0.0, 1000.0, 0),
        )
        .unwrap();
        let x = RoverState::new(Cell::new(0, 0), 0.0, 700.0, 0);
        let (b_final, floor) = hibernation_outcome(x.cell, 0.0, 700.0, &s).unwrap();
        assert!(b_final >= 600.0);
        assert!(floor < 500.0);
        assert!(!is_safe(&x, &s));
        let need = min_safe_energy(x.cell, 0.0, &s).unwrap();
        assert!((need - 800.0).abs() < 1e-9, "{need}");
    }

    #[test]
    fn operational_bounds_are_closed() {
        let s = scenario(0.0, vec![]);
        let x = RoverState::new(Cell::new(1, 1), 0.0, 500.0, 0);
        assert!(in_operational(&x, &s));
        assert!(!in_operational(&RoverState { time: 36001.0, ..x }, &s));
        assert!(in_operational(s.start(), &s));
    }

    #[test]
    fn requirement_inversion() {
        assert_eq!(invert_requirement(900.0, 100.0, 500.0, 7000.0, 7000.0), Some(800.0));
        assert_eq!(invert_requirement(900.0, 600.0, 500.0, 7000.0, 7000.0), Some(500.0));
        assert_eq!(invert_requirement(6950.0, -100.0, 500.0, 7000.0, 7000.0), None);
        assert_eq!(invert_requirement(7000.0, 500.0, 500.0, 7000.0, 7000.0), Some(6500.0));
        let b = invert_requirement(0.3, 0.1, 0.0, 10.0, 10.0).unwrap();
        assert!(b + 0.1 >= 0.3);
    }
}
