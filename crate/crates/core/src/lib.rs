//! Core algorithms for classifying building roofs by type and material from
//! paired RGB orthophotos and LiDAR-derived height rasters.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs an allocator. File formats, the CNN backbones and the command line
//! live in the `roofsense` crate.
//!
//! The main pieces:
//! * [`raster`]: georeferenced grids, nDSM derivation, resampling and survey
//!   tile sampling.
//! * [`patch`] and [`augment`]: cropping building patches out of rasters,
//!   square padding, resizing and geometric augmentation.
//! * [`split`] and [`synth`]: stratified train/test assignment and the
//!   synthetic desk-scale data generator.
//! * [`fusion`], [`scale`] and [`downstream`]: feature- and decision-level
//!   fusion, feature scaling and the cross-validated downstream classifier
//!   search.
//! * [`metrics`]: confusion matrices and macro-averaged scores.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod augment;
pub mod downstream;
mod error;
pub mod fusion;
pub mod geom;
pub mod labels;
pub mod matrix;
pub mod metrics;
pub mod patch;
pub mod raster;
pub mod rng;
pub mod sample;
pub mod scale;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
pub use labels::{Country, LabelSchema, Task};
pub use matrix::Matrix;
pub use patch::PixelGrid;
pub use raster::RasterGrid;
pub use sample::{BuildingSample, Split};
