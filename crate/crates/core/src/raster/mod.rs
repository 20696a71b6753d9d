//! Georeferenced raster grids and the operations on them.
//!
//! Grids are north-up: `origin` is the projected coordinate of the top-left
//! corner of the top-left cell, row indices grow southwards and column
//! indices grow eastwards. Values are stored band-major as `f32`.

mod ndsm;
pub(crate) mod resample;
mod tiles;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use ndsm::compute_ndsm;
pub use resample::{resample, Resampling};
pub use tiles::{sample_tiles, TileSampling, TileSpec};

/// Axis-aligned rectangle in projected coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) * 0.5, (self.min_y + self.max_y) * 0.5)
    }

    /// True when the interiors overlap.
    pub fn intersects(&self, other: &Extent) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }
}

/// A georeferenced single- or multi-band grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    bands: usize,
    cell_size: f64,
    origin: (f64, f64),
    crs_id: String,
    nodata: Option<f32>,
    values: Vec<f32>,
}

impl RasterGrid {
    /// Builds a grid, checking the shape invariants. `values` is band-major,
    /// row-major within a band.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        cell_size: f64,
        origin: (f64, f64),
        crs_id: impl Into<String>,
        nodata: Option<f32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty grid {width}x{height}")));
        }
        if bands == 0 {
            return Err(Error::InvalidRaster("zero bands".into()));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidRaster(format!("cell size {cell_size} must be positive")));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::InvalidRaster("non-finite origin".into()));
        }
        let expected = width * height * bands;
        if values.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} values for {width}x{height}x{bands}, got {}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bands,
            cell_size,
            origin,
            crs_id: crs_id.into(),
            nodata,
            values,
        })
    }

    /// A grid filled with `value`.
    pub fn filled(
        width: usize,
        height: usize,
        bands: usize,
        cell_size: f64,
        origin: (f64, f64),
        crs_id: impl Into<String>,
        value: f32,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            bands,
            cell_size,
            origin,
            crs_id,
            None,
            vec![value; width * height * bands],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn crs_id(&self) -> &str {
        &self.crs_id
    }

    pub fn nodata(&self) -> Option<f32> {
        self.nodata
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn with_nodata(mut self, nodata: Option<f32>) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.values[band * n..(band + 1) * n]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.values[band * n..(band + 1) * n]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.values[(band * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, band: usize, row: usize, col: usize, value: f32) {
        self.values[(band * self.height + row) * self.width + col] = value;
    }

    /// True for the nodata sentinel and for NaN.
    pub fn is_nodata(&self, value: f32) -> bool {
        value.is_nan() || self.nodata.is_some_and(|nd| value == nd)
    }

    pub fn extent(&self) -> Extent {
        Extent {
            min_x: self.origin.0,
            max_x: self.origin.0 + self.width as f64 * self.cell_size,
            max_y: self.origin.1,
            min_y: self.origin.1 - self.height as f64 * self.cell_size,
        }
    }

    /// Fractional (column, row) position of a projected point, measured in
    /// cells from the top-left corner.
    pub fn to_cell(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin.0) / self.cell_size,
            (self.origin.1 - y) / self.cell_size,
        )
    }

    /// Projected coordinate of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 - (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Checks that `other` has the same width, height, origin, cell size and
    /// CRS.
    pub fn check_same_geometry(&self, other: &RasterGrid) -> Result<()> {
        let mut problems = Vec::new();
        if self.width != other.width || self.height != other.height {
            problems.push(format!(
                "size {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            ));
        }
        if !close(self.cell_size, other.cell_size) {
            problems.push(format!("cell size {} vs {}", self.cell_size, other.cell_size));
        }
        if !close(self.origin.0, other.origin.0) || !close(self.origin.1, other.origin.1) {
            problems.push(format!(
                "origin ({}, {}) vs ({}, {})",
                self.origin.0, self.origin.1, other.origin.0, other.origin.1
            ));
        }
        if self.crs_id != other.crs_id {
            problems.push(format!("crs {} vs {}", self.crs_id, other.crs_id));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(problems.join("; ")))
        }
    }

    pub(crate) fn same_frame(&self, width: usize, height: usize, cell_size: f64) -> RasterGrid {
        RasterGrid {
            width,
            height,
            bands: self.bands,
            cell_size,
            origin: self.origin,
            crs_id: self.crs_id.clone(),
            nodata: self.nodata,
            values: vec![0.0; width * height * self.bands],
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> RasterGrid {
        RasterGrid::filled(w, h, 1, 0.5, (1000.0, 2000.0), "EPSG:32620", 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RasterGrid::new(0, 1, 1, 1.0, (0.0, 0.0), "x", None, vec![]).is_err());
        assert!(RasterGrid::new(1, 1, 1, 0.0, (0.0, 0.0), "x", None, vec![1.0]).is_err());
        assert!(RasterGrid::new(2, 2, 1, 1.0, (0.0, 0.0), "x", None, vec![1.0; 3]).is_err());
        let one = RasterGrid::new(1, 1, 1, 1.0, (0.0, 0.0), "x", None, vec![5.0]).unwrap();
        assert_eq!(one.values(), &[5.0]);
    }

    #[test]
    fn extent_and_cells() {
        let g = grid(4, 2);
        let e = g.extent();
        assert_eq!((e.min_x, e.max_x, e.min_y, e.max_y), (1000.0, 1002.0, 1999.0, 2000.0));
        assert_eq!(g.cell_center(0, 0), (1000.25, 1999.75));
        assert_eq!(g.to_cell(1001.0, 1999.5), (2.0, 1.0));
    }

    #[test]
    fn geometry_mismatch_names_the_field() {
        let a = grid(4, 2);
        let b = grid(4, 3);
        let err = a.check_same_geometry(&b).unwrap_err();
        assert!(matches!(err, Error::GeometryMismatch(ref m) if m.contains("size")));
        let c = RasterGrid::filled(4, 2, 1, 0.5, (1000.0, 2000.0), "EPSG:2002", 1.0).unwrap();
        assert!(matches!(a.check_same_geometry(&c), Err(Error::GeometryMismatch(ref m)) if m.contains("crs")));
    }
}
