use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default maximum traversable slope, in degrees.
pub const DEFAULT_SLOPE_LIMIT_DEG: f64 = 20.0;

/// A grid cell, `x` along columns and `y` along rows (row 0 is north).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    pub fn xy(self) -> (u32, u32) {
        (self.x, self.y)
    }

    /// Straight-line distance between cell centres, in cells.
    pub fn planar_distance(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }
}

impl From<[u32; 2]> for Cell {
    fn from(v: [u32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [u32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

/// The eight mobility directions. The declaration order is the tie-break
/// order used wherever actions are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Direction::N => (0, -1),
            Direction::NE => (1, -1),
            Direction::E => (1, 0),
            Direction::SE => (1, 1),
            Direction::S => (0, 1),
            Direction::SW => (-1, 1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, -1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.offset();
        dx != 0 && dy != 0
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }

    pub fn between(from: Cell, to: Cell) -> Option<Direction> {
        let dx = to.x as i64 - from.x as i64;
        let dy = to.y as i64 - from.y as i64;
        Direction::ALL.into_iter().find(|d| d.offset() == (dx, dy))
    }
}

/// Elevation raster with derived slope and traversability.
#[derive(Debug, Clone)]
pub struct TerrainGrid {
    width: usize,
    height: usize,
    resolution: f64,
    slope_limit_deg: f64,
    elevation: Vec<f64>,
    slope: Vec<f64>,
    traversable: Vec<bool>,
}

impl TerrainGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        elevation: Vec<f64>,
        slope_limit_deg: f64,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidScenario(format!(
                "terrain must be at least 2x2, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "terrain resolution must be positive, got {resolution}"
            )));
        }
        if elevation.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "elevation holds {} values for a {width}x{height} grid",
                elevation.len()
            )));
        }
        if let Some(i) = elevation.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "non-finite elevation at cell index {i}"
            )));
        }
        let slope = derive_slope(width, height, resolution, &elevation);
        let traversable = slope.iter().map(|&s| s <= slope_limit_deg).collect();
        Ok(TerrainGrid {
            width,
            height,
            resolution,
            slope_limit_deg,
            elevation,
            slope,
            traversable,
        })
    }

    pub fn flat(width: usize, height: usize, resolution: f64) -> Result<Self> {
        TerrainGrid::new(
            width,
            height,
            resolution,
            vec![0.0; width * height],
            DEFAULT_SLOPE_LIMIT_DEG,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn slope_limit_deg(&self) -> f64 {
        self.slope_limit_deg
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevation
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slope
    }

    pub fn contains(&self, c: Cell) -> bool {
        (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index. Panics if the cell is out of bounds.
    pub fn index(&self, c: Cell) -> usize {
        assert!(self.contains(c), "cell {c:?} outside {}x{}", self.width, self.height);
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as u32, (index / self.width) as u32)
    }

    pub fn elevation(&self, c: Cell) -> f64 {
        self.elevation[self.index(c)]
    }

    pub fn slope_deg(&self, c: Cell) -> f64 {
        self.slope[self.index(c)]
    }

    pub fn is_traversable(&self, c: Cell) -> bool {
        self.contains(c) && self.traversable[self.index(c)]
    }

    pub fn traversable_mask(&self) -> &[bool] {
        &self.traversable
    }

    /// In-bounds neighbour in direction `d`, traversable or not.
    pub fn neighbour(&self, c: Cell, d: Direction) -> Option<Cell> {
        let (dx, dy) = d.offset();
        let x = c.x as i64 + dx;
        let y = c.y as i64 + dy;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(Cell::new(x as u32, y as u32))
        }
    }

    /// 3-D Euclidean distance between the centres of two 8-adjacent cells.
    pub fn drive_distance(&self, from: Cell, to: Cell) -> Result<f64> {
        let dir = Direction::between(from, to)
            .filter(|_| self.contains(from) && self.contains(to))
            .ok_or(Error::NotAdjacent {
                from: from.xy(),
                to: to.xy(),
            })?;
        Ok(self.step_distance(from, to, dir))
    }

    pub(crate) fn step_distance(&self, from: Cell, to: Cell, dir: Direction) -> f64 {
        let planar = if dir.is_diagonal() {
            self.resolution * std::f64::consts::SQRT_2
        } else {
            self.resolution
        };
        let dz = self.elevation(to) - self.elevation(from);
        planar.hypot(dz)
    }
}

/// Slope magnitude in degrees from central differences on the
/// 4-neighbourhood, one-sided at the grid boundary.
fn derive_slope(width: usize, height: usize, resolution: f64, z: &[f64]) -> Vec<f64> {
    let at = |x: usize, y: usize| z[y * width + x];
    let mut slope = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let gx = if x == 0 {
                (at(1, y) - at(0, y)) / resolution
            } else if x == width - 1 {
                (at(x, y) - at(x - 1, y)) / resolution
            } else {
                (at(x + 1, y) - at(x - 1, y)) / (2.0 * resolution)
            };
            let gy = if y == 0 {
                (at(x, 1) - at(x, 0)) / resolution
            } else if y == height - 1 {
                (at(x, y) - at(x, y - 1)) / resolution
            } else {
                (at(x, y + 1) - at(x, y - 1)) / (2.0 * resolution)
            };
            slope.push(gx.hypot(gy).atan().to_degrees());
        }
    }
    slope
}
