//! Chance-constrained mission-level path planning for a solar-powered rover
//! on a gridded world with time-varying illumination and random faults.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envmodel;
pub mod error;
pub mod executive;
pub mod faultmodel;
pub mod oracle;
pub mod recovery;
pub mod roverdyn;
pub mod treeplan;

pub use error::{Error, Result};
