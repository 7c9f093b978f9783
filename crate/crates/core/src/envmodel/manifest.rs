use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::illumination::IlluminationSeries;
use super::scenario::{Haven, OperationalBounds, Scenario, Waypoint};
use super::terrain::{Cell, TerrainGrid, DEFAULT_SLOPE_LIMIT_DEG};
use crate::error::{Error, Result};
use crate::faultmodel::FaultParams;
use crate::roverdyn::{RoverParams, RoverState};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerrainEntry {
    pub width: usize,
    pub height: usize,
    /// Metres per cell.
    pub resolution: f64,
    /// Elevation raster path, relative to the manifest.
    pub elevation: PathBuf,
    #[serde(default = "default_slope_limit")]
    pub slope_limit_deg: f64,
}

fn default_slope_limit() -> f64 {
    DEFAULT_SLOPE_LIMIT_DEG
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IlluminationEntry {
    pub timestamps: Vec<f64>,
    /// Concatenated frames, relative to the manifest.
    pub frames: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartEntry {
    pub cell: Cell,
    pub time: f64,
    pub energy: f64,
    #[serde(default)]
    pub next_wp: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub terrain: TerrainEntry,
    pub illumination: IlluminationEntry,
    pub waypoints: Vec<Waypoint>,
    pub havens: Vec<Haven>,
    pub operational: OperationalBounds,
    pub rover: RoverParams,
    pub fault: FaultParams,
    pub start: StartEntry,
}

/// Reads a flat little-endian f32 raster.
pub fn read_raster(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 || bytes.len() / 4 != expected {
        return Err(Error::RasterSize {
            path: path.to_owned(),
            expected,
            found: bytes.len() / 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

pub fn write_raster(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_scenario(manifest_path: impl AsRef<Path>) -> Result<Scenario> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_owned(),
        source: e,
    })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let cells = m.terrain.width * m.terrain.height;
    let elevation = read_raster(&dir.join(&m.terrain.elevation), cells)?;
    let terrain = TerrainGrid::new(
        m.terrain.width,
        m.terrain.height,
        m.terrain.resolution,
        elevation,
        m.terrain.slope_limit_deg,
    )?;
    let frames_path = dir.join(&m.illumination.frames);
    let n_frames = m.illumination.timestamps.len();
    let frames = read_raster(&frames_path, cells * n_frames).map_err(|e| match e {
        Error::RasterSize { found, .. } if found % cells == 0 => Error::DimensionMismatch(format!(
            "{} holds {} frames of {}x{} but the manifest lists {n_frames} timestamps",
            frames_path.display(),
            found / cells,
            m.terrain.width,
            m.terrain.height
        )),
        other => other,
    })?;
    let illumination = IlluminationSeries::new(m.terrain.width, m.terrain.height, m.illumination.timestamps, frames)?;
    Scenario::new(
        terrain,
        illumination,
        m.waypoints,
        m.havens,
        m.operational,
        m.rover,
        m.fault,
        RoverState::new(m.start.cell, m.start.time, m.start.energy, m.start.next_wp),
    )
}

/// Writes `manifest.json`, `elevation.f32` and `illumination.f32` into
/// `dir` and returns the manifest path. Rasters are stored as f32, so a
/// scenario survives the round trip bit-exactly only if its values are
/// already f32-representable.
pub fn save_scenario(s: &Scenario, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t = s.terrain();
    write_raster(&dir.join("elevation.f32"), t.elevations())?;
    write_raster(&dir.join("illumination.f32"), s.illumination().frames())?;
    let x = s.start();
    let m = Manifest {
        terrain: TerrainEntry {
            width: t.width(),
            height: t.height(),
            resolution: t.resolution(),
            elevation: "elevation.f32".into(),
            slope_limit_deg: t.slope_limit_deg(),
        },
        illumination: IlluminationEntry {
            timestamps: s.illumination().timestamps().to_vec(),
            frames: "illumination.f32".into(),
        },
        waypoints: s.waypoints().to_vec(),
        havens: s.havens().to_vec(),
        operational: *s.operational(),
        rover: s.rover().clone(),
        fault: s.fault().clone(),
        start: StartEntry {
            cell: x.cell,
            time: x.time,
            energy: x.energy,
            next_wp: x.next_wp,
        },
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
