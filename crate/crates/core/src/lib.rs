pub mod bench;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod events;
pub mod grid;
pub mod pgm;
pub mod proto;
pub mod scenes;
pub mod oms;
pub mod snn;
pub mod stimgen;

pub use error::{Error, Result};
pub use grid::{Geometry, Grid, Mask};
