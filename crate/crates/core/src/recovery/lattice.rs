use crate::envmodel::{Cell, Direction, Scenario};
use crate::error::{Error, Result};
use crate::roverdyn::{self, RoverState};

/// Relative slack when snapping a continuous coordinate onto a lattice
/// point, so that values produced by lattice arithmetic map to themselves.
const SNAP: f64 = 1e-9;

/// Discretization of the operational region `[t_min, t_max] x [b_min, b_max]`
/// over every cell. Point `k` sits at `min(t_min + k*time_res, t_max)` and
/// level `j` at `min(b_min + j*energy_res, b_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateLattice {
    pub t_min: f64,
    pub t_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub time_res: f64,
    pub energy_res: f64,
    pub n_time: usize,
    pub n_energy: usize,
    pub n_cells: usize,
}

/// Where a continuous state lands on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeIndex {
    Safe,
    Fail,
    Point { cell: usize, k: usize, j: usize },
}

impl StateLattice {
    pub fn new(s: &Scenario, time_res: f64, energy_res: f64) -> Result<Self> {
        if !(time_res > 0.0 && time_res.is_finite()) || !(energy_res > 0.0 && energy_res.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lattice resolutions must be positive, got {time_res} s and {energy_res} Wh"
            )));
        }
        let shortest = shortest_action(s);
        if time_res > shortest {
            return Err(Error::LatticeTooCoarse { time_res, shortest });
        }
        let op = s.operational();
        let lat = StateLattice {
            t_min: op.t_min,
            t_max: op.t_max,
            b_min: op.b_min,
            b_max: op.b_max,
            time_res,
            energy_res,
            n_time: steps(op.t_max - op.t_min, time_res) + 1,
            n_energy: steps(op.b_max - op.b_min, energy_res) + 1,
            n_cells: s.terrain().len(),
        };
        Ok(lat)
    }

    pub fn len(&self) -> usize {
        self.n_time * self.n_cells * self.n_energy
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_at(&self, k: usize) -> f64 {
        (self.t_min + k as f64 * self.time_res).min(self.t_max)
    }

    pub fn energy_at(&self, j: usize) -> f64 {
        (self.b_min + j as f64 * self.energy_res).min(self.b_max)
    }

    pub fn flat(&self, cell: usize, k: usize, j: usize) -> usize {
        (k * self.n_cells + cell) * self.n_energy + j
    }

    /// Time point at or after `t`; `None` past `t_max` or before `t_min`.
    pub fn time_up(&self, t: f64) -> Option<usize> {
        if !(t >= self.t_min && t <= self.t_max) {
            return None;
        }
        let u = (t - self.t_min) / self.time_res;
        let k = (u - SNAP * u.abs().max(1.0)).ceil().max(0.0) as usize;
        Some(k.min(self.n_time - 1))
    }

    /// Energy level at or below `b`; `None` outside `[b_min, b_max]`.
    pub fn energy_down(&self, b: f64) -> Option<usize> {
        if !(b >= self.b_min && b <= self.b_max) {
            return None;
        }
        if b == self.b_max {
            return Some(self.n_energy - 1);
        }
        let u = (b - self.b_min) / self.energy_res;
        let j = (u + SNAP * u.abs().max(1.0)).floor() as usize;
        // Never snap up onto a level above `b`.
        let j = if self.energy_at(j) > b { j.saturating_sub(1) } else { j };
        Some(j.min(self.n_energy - 1))
    }

    /// Conservative mapping: SAFE if `x` is safe, FAIL if it lies outside
    /// the operational region, else time rounded up and energy rounded down.
    pub fn conservative_index(&self, x: &RoverState, s: &Scenario) -> LatticeIndex {
        if roverdyn::is_safe(x, s) {
            return LatticeIndex::Safe;
        }
        if !roverdyn::in_operational(x, s) {
            return LatticeIndex::Fail;
        }
        match (self.time_up(x.time), self.energy_down(x.energy)) {
            (Some(k), Some(j)) => LatticeIndex::Point {
                cell: s.terrain().index(x.cell),
                k,
                j,
            },
            _ => LatticeIndex::Fail,
        }
    }
}

fn steps(span: f64, res: f64) -> usize {
    let u = span / res;
    (u - SNAP * u.max(1.0)).ceil().max(1.0) as usize
}

/// Shortest duration among Wait and all moves between traversable cells.
pub fn shortest_action(s: &Scenario) -> f64 {
    let t = s.terrain();
    let v = s.rover().velocity;
    let mut best = s.rover().wait_duration;
    for i in 0..t.len() {
        let c: Cell = t.cell(i);
        if !t.is_traversable(c) {
            continue;
        }
        for d in Direction::ALL {
            if let Some(n) = t.neighbour(c, d).filter(|&n| t.is_traversable(n)) {
                best = best.min(t.step_distance(c, n, d) / v);
            }
        }
    }
    best
}
