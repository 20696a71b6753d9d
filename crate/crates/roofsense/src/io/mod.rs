//! File formats: GeoTIFF rasters, GeoJSON footprints and maps, packaged
//! patch datasets, and CSV tables.

pub mod dataset;
pub mod geojson;
pub mod geotiff;
pub mod table;

pub use geotiff::{load_raster, save_raster};
