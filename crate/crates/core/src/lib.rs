//! Transient nonlinear heat conduction in 2D with thin insulation layers
//! either meshed or collapsed into multi-layer thin shells coupled to the
//! volume by mortar multipliers.

pub mod assembly;
pub mod cli;
pub mod config;
mod error;
pub mod materials;
pub mod mesh;
pub mod mortar;
pub mod postproc;
pub mod solver;
pub mod tsa;

pub use error::{Error, Result};
