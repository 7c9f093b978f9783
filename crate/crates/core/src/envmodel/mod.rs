//! Gridded world: terrain, illumination, mission definition and file I/O.

mod illumination;
mod manifest;
mod scenario;
mod synth;
mod terrain;

pub use illumination::{IlluminationSeries, SOLAR_CONSTANT};
pub use manifest::{load_scenario, read_raster, save_scenario, write_raster, Manifest};
pub use scenario::{Haven, OperationalBounds, Scenario, Waypoint};
pub use synth::{generate_synthetic, visible_fraction, SynthSpec};
pub use terrain::{Cell, Direction, TerrainGrid, DEFAULT_SLOPE_LIMIT_DEG};
