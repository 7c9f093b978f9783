use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::illumination::IlluminationSeries;
use super::scenario::{Haven, OperationalBounds, Scenario, Waypoint};
use super::terrain::{Cell, TerrainGrid, DEFAULT_SLOPE_LIMIT_DEG};
use crate::error::{Error, Result};
use crate::faultmodel::FaultParams;
use crate::roverdyn::{RoverParams, RoverState};

/// Parameters of a synthetic polar crater world and the mission laid on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub slope_limit_deg: f64,
    /// Crater centre in cell coordinates.
    pub crater_center: (f64, f64),
    /// Bowl radius, depth, rim height and rim half-width, in metres.
    pub crater_radius: f64,
    pub crater_depth: f64,
    pub rim_height: f64,
    pub rim_width: f64,
    /// Amplitude and correlation length of the surface noise, metres.
    pub roughness: f64,
    pub roughness_scale: f64,
    pub sun_elevation_deg: f64,
    /// Angular radius of the solar disk.
    pub sun_radius_deg: f64,
    /// Height of the panel above the ground, metres.
    pub observer_height: f64,
    /// Time for the sun azimuth to sweep a full circle, seconds.
    pub sun_period: f64,
    /// Sun azimuth at `t_start`, degrees clockwise from north (row 0 side).
    pub sun_azimuth_deg: f64,
    pub t_start: f64,
    pub frame_spacing: f64,
    pub n_frames: usize,
    pub operational: OperationalBounds,
    pub waypoints: Vec<Waypoint>,
    pub havens: Vec<Haven>,
    pub start_cell: Cell,
    pub start_energy: f64,
    pub rover: RoverParams,
    pub fault: FaultParams,
}

impl SynthSpec {
    /// The shipped medium scenario: 32x32 cells at 240 m, 84 hourly frames.
    pub fn medium() -> Self {
        let t_start = 0.0;
        let t_end = t_start + 82.0 * 3600.0;
        SynthSpec {
            width: 32,
            height: 32,
            resolution: 240.0,
            slope_limit_deg: DEFAULT_SLOPE_LIMIT_DEG,
            crater_center: (15.5, 17.0),
            crater_radius: 2400.0,
            crater_depth: 380.0,
            rim_height: 60.0,
            rim_width: 600.0,
            roughness: 25.0,
            roughness_scale: 1200.0,
            sun_elevation_deg: 1.5,
            sun_radius_deg: 0.2665,
            observer_height: 2.0,
            sun_period: 29.530589 * 86400.0,
            sun_azimuth_deg: 200.0,
            t_start,
            frame_spacing: 3600.0,
            n_frames: 84,
            operational: OperationalBounds {
                t_min: t_start,
                t_max: t_end,
                b_min: 500.0,
                b_max: 7000.0,
            },
            waypoints: vec![
                Waypoint::new(Cell::new(11, 12), 7200.0, 1000.0),
                Waypoint::new(Cell::new(16, 10), 7200.0, 1000.0),
                Waypoint::new(Cell::new(20, 13), 7200.0, 1000.0),
                Waypoint::new(Cell::new(22, 12), 7200.0, 1000.0),
            ],
            havens: [(4, 6), (23, 12), (29, 21)]
                .into_iter()
                .map(|(x, y)| Haven {
                    cell: Cell::new(x, y),
                    deadline: t_end,
                    min_energy: 2000.0,
                })
                .collect(),
            start_cell: Cell::new(5, 8),
            start_energy: 1000.0,
            rover: RoverParams::medium(),
            fault: FaultParams::medium(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 || !(self.resolution > 0.0) {
            return Err(Error::InvalidScenario("degenerate grid".into()));
        }
        let half_extent = self.width.min(self.height) as f64 * self.resolution / 2.0;
        if !(self.crater_radius > 0.0) || self.crater_radius + self.rim_width > half_extent {
            return Err(Error::InvalidScenario(format!(
                "crater radius {} m plus rim {} m does not fit a {}x{} grid at {} m",
                self.crater_radius, self.rim_width, self.width, self.height, self.resolution
            )));
        }
        if self.n_frames < 2 || !(self.frame_spacing > 0.0) || !(self.sun_period > 0.0) {
            return Err(Error::InvalidScenario("degenerate illumination timing".into()));
        }
        if !(self.sun_radius_deg >= 0.0) || !(self.roughness_scale > 0.0) {
            return Err(Error::InvalidScenario("degenerate sun or roughness parameters".into()));
        }
        Ok(())
    }

    pub fn sun_azimuth_at(&self, t: f64) -> f64 {
        self.sun_azimuth_deg + 360.0 * (t - self.t_start) / self.sun_period
    }
}

/// Fraction of a solar disk of angular radius `radius` centred at
/// elevation `elev` lying above a horizon at `horizon` (all degrees).
pub fn visible_fraction(horizon: f64, elev: f64, radius: f64) -> f64 {
    if horizon <= elev - radius {
        return 1.0;
    }
    if horizon >= elev + radius {
        return 0.0;
    }
    let u = (horizon - elev) / radius;
    (u.acos() - u * (1.0 - u * u).sqrt()) / std::f64::consts::PI
}

/// Highest terrain elevation angle in degrees seen from `cell` toward
/// `azimuth_deg`, marching half a cell at a time to the grid edge. Returns
/// negative infinity when nothing lies in that direction.
pub fn horizon_angle(t: &TerrainGrid, cell: Cell, azimuth_deg: f64, observer_height: f64) -> f64 {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    let (dx, dy) = (s, -c);
    let z0 = t.elevation(cell) + observer_height;
    let (x0, y0) = (cell.x as f64, cell.y as f64);
    let step = 0.5;
    let mut best = f64::NEG_INFINITY;
    let mut k = 1;
    loop {
        let d = step * k as f64;
        let (x, y) = (x0 + dx * d, y0 + dy * d);
        if x < 0.0 || y < 0.0 || x > (t.width() - 1) as f64 || y > (t.height() - 1) as f64 {
            break;
        }
        let z = bilinear(t, x, y);
        let angle = ((z - z0) / (d * t.resolution())).atan().to_degrees();
        best = best.max(angle);
        k += 1;
    }
    best
}

fn bilinear(t: &TerrainGrid, x: f64, y: f64) -> f64 {
    let x0 = (x.floor() as usize).min(t.width() - 2);
    let y0 = (y.floor() as usize).min(t.height() - 2);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let z = |i: usize, j: usize| t.elevation(Cell::new(i as u32, j as u32));
    let top = z(x0, y0) * (1.0 - fx) + z(x0 + 1, y0) * fx;
    let bottom = z(x0, y0 + 1) * (1.0 - fx) + z(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn crater_elevation(spec: &SynthSpec, x: f64, y: f64) -> f64 {
    let (cx, cy) = spec.crater_center;
    let r = (x - cx).hypot(y - cy) * spec.resolution;
    let big_r = spec.crater_radius;
    let bowl = if r < big_r {
        -spec.crater_depth * (1.0 - (r / big_r).powi(2))
    } else {
        0.0
    };
    let rim = spec.rim_height * (-((r - big_r) / spec.rim_width).powi(2)).exp();
    bowl + rim
}

/// Smooth value noise on a lattice of spacing `roughness_scale`.
fn noise_field(spec: &SynthSpec, seed: u64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell_m = spec.roughness_scale / spec.resolution;
    let nx = (spec.width as f64 / cell_m).ceil() as usize + 2;
    let ny = (spec.height as f64 / cell_m).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(-1.0..1.0)).collect();
    move |x: f64, y: f64| {
        let (u, v) = (x / cell_m, y / cell_m);
        let (i, j) = (u.floor() as usize, v.floor() as usize);
        let smooth = |f: f64| f * f * (3.0 - 2.0 * f);
        let (fu, fv) = (smooth(u - i as f64), smooth(v - j as f64));
        let at = |a: usize, b: usize| lattice[b * nx + a];
        let top = at(i, j) * (1.0 - fu) + at(i + 1, j) * fu;
        let bottom = at(i, j + 1) * (1.0 - fu) + at(i + 1, j + 1) * fu;
        top * (1.0 - fv) + bottom * fv
    }
}

fn to_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Builds a deterministic synthetic scenario. Values are rounded through
/// f32 so that saving and reloading reproduces the scenario bit-exactly.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let noise = noise_field(spec, seed);
    let (w, h) = (spec.width, spec.height);
    let mut elevation = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            elevation.push(to_f32(crater_elevation(spec, fx, fy) + spec.roughness * noise(fx, fy)));
        }
    }
    let terrain = TerrainGrid::new(w, h, spec.resolution, elevation, spec.slope_limit_deg)?;

    let cells = w * h;
    let mut frames = Vec::with_capacity(cells * spec.n_frames);
    let mut timestamps = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let t = spec.t_start + spec.frame_spacing * f as f64;
        timestamps.push(t);
        let az = spec.sun_azimuth_at(t);
        for i in 0..cells {
            let horizon = horizon_angle(&terrain, terrain.cell(i), az, spec.observer_height);
            let frac = visible_fraction(horizon, spec.sun_elevation_deg, spec.sun_radius_deg);
            frames.push(to_f32(frac).clamp(0.0, 1.0));
        }
    }
    let illumination = IlluminationSeries::new(w, h, timestamps, frames)?;
    Scenario::new(
        terrain,
        illumination,
        spec.waypoints.clone(),
        spec.havens.clone(),
        spec.operational,
        spec.rover.clone(),
        spec.fault.clone(),
        RoverState::new(spec.start_cell, spec.operational.t_min, spec.start_energy, 0),
    )
}
