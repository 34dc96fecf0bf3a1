//! Deterministic simulator for distributed secondary frequency and
//! active-power control of an islanded AC microgrid, where each DG checks
//! an integral-type event trigger on its own unsynchronised periodic clock.

pub mod analysis;
pub mod controller;
pub mod engine;
pub mod error;
pub mod graph;
pub mod output;
pub mod plant;
pub mod presets;
pub mod scenario;
pub mod trace;

pub use error::{Error, Result};
pub use nalgebra;
