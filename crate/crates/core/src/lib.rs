//! Geometry, losses, recurrent refinement and evaluation for safe landing
//! zone estimation from depth, normal and segmentation rasters.

pub mod camera;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod raster;
pub mod refinement;
pub mod slz;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
