//! File formats, CNN backbones and the command-line pipeline for roof type
//! and material classification.

pub mod error;
pub mod io;
pub mod models;
pub mod pipeline;

pub use error::{Error, Result};
