use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::illumination::IlluminationSeries;
use super::terrain::{Cell, TerrainGrid};
use crate::error::{Error, Result};
use crate::faultmodel::FaultParams;
use crate::roverdyn::{RoverParams, RoverState};

/// A science target. `window` restricts when the science action may run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: Cell,
    /// Science action duration δt_k, seconds.
    pub duration: f64,
    /// Science action energy cost δb_k, Wh.
    pub energy_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
}

impl Waypoint {
    pub fn new(cell: Cell, duration: f64, energy_cost: f64) -> Self {
        Waypoint {
            cell,
            duration,
            energy_cost,
            window: None,
        }
    }

    pub fn with_window(mut self, open: f64, close: f64) -> Self {
        self.window = Some((open, close));
        self
    }

    /// Whether a science action starting at `t` fits inside the window.
    pub fn admits_start(&self, t: f64) -> bool {
        match self.window {
            None => true,
            Some((open, close)) => t >= open && t + self.duration <= close,
        }
    }
}

/// A cell where the traverse may end: hibernating there must leave at
/// least `min_energy` Wh at `deadline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Haven {
    pub cell: Cell,
    pub deadline: f64,
    pub min_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationalBounds {
    pub t_min: f64,
    pub t_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl OperationalBounds {
    pub fn contains(&self, t: f64, b: f64) -> bool {
        t >= self.t_min && t <= self.t_max && b >= self.b_min && b <= self.b_max
    }
}

/// The full planning problem: world, mission, rover and fault model.
#[derive(Debug, Clone)]
pub struct Scenario {
    terrain: TerrainGrid,
    illumination: IlluminationSeries,
    waypoints: Vec<Waypoint>,
    havens: Vec<Haven>,
    operational: OperationalBounds,
    rover: RoverParams,
    fault: FaultParams,
    start: RoverState,
    haven_at: Vec<Option<u32>>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        terrain: TerrainGrid,
        illumination: IlluminationSeries,
        waypoints: Vec<Waypoint>,
        havens: Vec<Haven>,
        operational: OperationalBounds,
        rover: RoverParams,
        fault: FaultParams,
        start: RoverState,
    ) -> Result<Self> {
        let mut haven_at = vec![None; terrain.len()];
        for (i, h) in havens.iter().enumerate() {
            if terrain.contains(h.cell) {
                haven_at[terrain.index(h.cell)] = Some(i as u32);
            }
        }
        let s = Scenario {
            terrain,
            illumination,
            waypoints,
            havens,
            operational,
            rover,
            fault,
            start,
            haven_at,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.terrain;
        let il = &self.illumination;
        if il.width() != t.width() || il.height() != t.height() {
            return Err(Error::DimensionMismatch(format!(
                "terrain is {}x{} but illumination is {}x{}",
                t.width(),
                t.height(),
                il.width(),
                il.height()
            )));
        }
        let op = &self.operational;
        if !(op.t_min < op.t_max) {
            return Err(Error::InvalidScenario(format!(
                "operational window [{}, {}] is empty",
                op.t_min, op.t_max
            )));
        }
        if !(op.b_min >= 0.0 && op.b_min < op.b_max) {
            return Err(Error::InvalidScenario(format!(
                "energy interval [{}, {}] is invalid",
                op.b_min, op.b_max
            )));
        }
        let (cov_start, cov_end) = il.coverage();
        if cov_start > op.t_min || cov_end < op.t_max {
            return Err(Error::InvalidScenario(format!(
                "illumination coverage [{cov_start}, {cov_end}] does not span the operational window [{}, {}]",
                op.t_min, op.t_max
            )));
        }
        self.rover.validate()?;
        self.fault.validate()?;
        if self.rover.capacity > op.b_max {
            return Err(Error::InvalidScenario(format!(
                "battery capacity {} exceeds the operational maximum {}",
                self.rover.capacity, op.b_max
            )));
        }
        if self.havens.is_empty() {
            return Err(Error::InvalidScenario("no safe havens".into()));
        }
        for (i, h) in self.havens.iter().enumerate() {
            if !t.is_traversable(h.cell) {
                return Err(Error::InvalidScenario(format!(
                    "haven {i} at {:?} is not traversable",
                    h.cell.xy()
                )));
            }
            if !h.deadline.is_finite() || !h.min_energy.is_finite() {
                return Err(Error::InvalidScenario(format!("haven {i} has non-finite targets")));
            }
            if self.havens[..i].iter().any(|o| o.cell == h.cell) {
                return Err(Error::InvalidScenario(format!("duplicate haven at {:?}", h.cell.xy())));
            }
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !t.is_traversable(w.cell) {
                return Err(Error::InvalidScenario(format!(
                    "waypoint {i} at {:?} is not traversable",
                    w.cell.xy()
                )));
            }
            if !(w.duration > 0.0 && w.duration.is_finite()) || !(w.energy_cost >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "waypoint {i} needs a positive duration and non-negative energy cost"
                )));
            }
            if let Some((open, close)) = w.window {
                if !(open <= close) {
                    return Err(Error::InvalidScenario(format!(
                        "waypoint {i} window [{open}, {close}] is empty"
                    )));
                }
            }
        }
        let x = &self.start;
        if x.next_wp > self.waypoints.len() {
            return Err(Error::InvalidScenario(format!(
                "start next_wp {} exceeds waypoint count {}",
                x.next_wp,
                self.waypoints.len()
            )));
        }
        if !(t.is_traversable(x.cell) && op.contains(x.time, x.energy)) {
            return Err(Error::InvalidScenario(format!(
                "start state {x:?} lies outside the operational region"
            )));
        }
        Ok(())
    }

    pub fn terrain(&self) -> &TerrainGrid {
        &self.terrain
    }

    pub fn illumination(&self) -> &IlluminationSeries {
        &self.illumination
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn havens(&self) -> &[Haven] {
        &self.havens
    }

    pub fn operational(&self) -> &OperationalBounds {
        &self.operational
    }

    pub fn rover(&self) -> &RoverParams {
        &self.rover
    }

    pub fn fault(&self) -> &FaultParams {
        &self.fault
    }

    pub fn start(&self) -> &RoverState {
        &self.start
    }

    pub fn haven_at(&self, c: Cell) -> Option<&Haven> {
        if !self.terrain.contains(c) {
            return None;
        }
        self.haven_at[self.terrain.index(c)].map(|i| &self.havens[i as usize])
    }

    /// Copy with a different waypoint list, revalidated.
    pub fn with_waypoints(&self, waypoints: Vec<Waypoint>) -> Result<Scenario> {
        let mut start = self.start;
        start.next_wp = start.next_wp.min(waypoints.len());
        Scenario::new(
            self.terrain.clone(),
            self.illumination.clone(),
            waypoints,
            self.havens.clone(),
            self.operational,
            self.rover.clone(),
            self.fault.clone(),
            start,
        )
    }

    pub fn with_fault(&self, fault: FaultParams) -> Result<Scenario> {
        Scenario::new(
            self.terrain.clone(),
            self.illumination.clone(),
            self.waypoints.clone(),
            self.havens.clone(),
            self.operational,
            self.rover.clone(),
            fault,
            self.start,
        )
    }

    pub fn with_start(&self, start: RoverState) -> Result<Scenario> {
        Scenario::new(
            self.terrain.clone(),
            self.illumination.clone(),
            self.waypoints.clone(),
            self.havens.clone(),
            self.operational,
            self.rover.clone(),
            self.fault.clone(),
            start,
        )
    }

    /// SHA-256 over every value that influences planning, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |v: f64| h.update(v.to_le_bytes());
        let t = &self.terrain;
        put(t.width() as f64);
        put(t.height() as f64);
        put(t.resolution());
        put(t.slope_limit_deg());
        t.elevations().iter().for_each(|&z| put(z));
        let il = &self.illumination;
        il.timestamps().iter().for_each(|&x| put(x));
        il.frames().iter().for_each(|&x| put(x));
        for w in &self.waypoints {
            put(w.cell.x as f64);
            put(w.cell.y as f64);
            put(w.duration);
            put(w.energy_cost);
            match w.window {
                Some((a, b)) => {
                    put(1.0);
                    put(a);
                    put(b);
                }
                None => put(0.0),
            }
        }
        put(f64::NAN);
        for hv in &self.havens {
            put(hv.cell.x as f64);
            put(hv.cell.y as f64);
            put(hv.deadline);
            put(hv.min_energy);
        }
        put(f64::NAN);
        let op = &self.operational;
        [op.t_min, op.t_max, op.b_min, op.b_max].into_iter().for_each(&mut put);
        let r = &self.rover;
        [
            r.panel_area,
            r.panel_eff,
            r.velocity,
            r.p_drive,
            r.p_fault,
            r.p_wait,
            r.p_hibernate,
            r.capacity,
            r.wait_duration,
        ]
        .into_iter()
        .for_each(&mut put);
        put(self.fault.rate);
        put(self.fault.recovery_duration);
        let x = &self.start;
        [x.cell.x as f64, x.cell.y as f64, x.time, x.energy, x.next_wp as f64]
            .into_iter()
            .for_each(&mut put);
        let digest: [u8; 32] = h.finalize().into();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sub-scenario over the `width x height` window at `origin`, keeping
    /// the waypoints and havens inside it. `start` is in window coordinates.
    pub fn crop(
        &self,
        origin: Cell,
        width: usize,
        height: usize,
        operational: OperationalBounds,
        start: RoverState,
    ) -> Result<Scenario> {
        let t = &self.terrain;
        let (x0, y0) = (origin.x as usize, origin.y as usize);
        if width == 0 || height == 0 || x0 + width > t.width() || y0 + height > t.height() {
            return Err(Error::InvalidArgument(format!(
                "crop {width}x{height} at {:?} leaves the {}x{} grid",
                origin.xy(),
                t.width(),
                t.height()
            )));
        }
        let inside = |c: Cell| {
            let (x, y) = (c.x as usize, c.y as usize);
            (x >= x0 && x < x0 + width && y >= y0 && y < y0 + height)
                .then(|| Cell::new((x - x0) as u32, (y - y0) as u32))
        };
        let mut elevation = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                elevation.push(t.elevation(Cell::new((x0 + x) as u32, (y0 + y) as u32)));
            }
        }
        let terrain = TerrainGrid::new(width, height, t.resolution(), elevation, t.slope_limit_deg())?;
        let il = &self.illumination;
        let mut frames = Vec::with_capacity(width * height * il.n_frames());
        for f in 0..il.n_frames() {
            for y in 0..height {
                for x in 0..width {
                    frames.push(il.frame_value(f, t.index(Cell::new((x0 + x) as u32, (y0 + y) as u32))));
                }
            }
        }
        let illumination = IlluminationSeries::new(width, height, il.timestamps().to_vec(), frames)?;
        let waypoints = self
            .waypoints
            .iter()
            .filter_map(|w| inside(w.cell).map(|cell| Waypoint { cell, ..w.clone() }))
            .collect();
        let havens = self
            .havens
            .iter()
            .filter_map(|h| inside(h.cell).map(|cell| Haven { cell, ..h.clone() }))
            .collect();
        Scenario::new(
            terrain,
            illumination,
            waypoints,
            havens,
            operational,
            self.rover.clone(),
            self.fault.clone(),
            start,
        )
    }

    /// Cells that receive no sunlight in any frame.
    pub fn shadowed_cells(&self) -> Vec<Cell> {
        let il = &self.illumination;
        (0..self.terrain.len())
            .filter(|&i| (0..il.n_frames()).all(|f| il.frame_value(f, i) == 0.0))
            .map(|i| self.terrain.cell(i))
            .collect()
    }
}
