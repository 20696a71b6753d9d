//! Pixel grids cut out of rasters, and the geometric preprocessing applied
//! before they reach a CNN.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geom::Polygon;
use crate::raster::resample::{bilinear_taps, lerp2};
use crate::raster::RasterGrid;
use crate::{Error, Result};

/// A channel-major `channels x height x width` image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PixelGrid {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Empty("pixel grid"));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}x{height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty pixel grid");
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Builds a grid by evaluating `f(c, y, x)` for every pixel.
    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut g = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    g.set(c, y, x, f(c, y, x));
                }
            }
        }
        g
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum()
    }

    /// Zero-pads to a `max(w, h)` square with the content centered. When the
    /// padding is odd the extra row or column goes to the bottom or right.
    pub fn pad_to_square(&self) -> PixelGrid {
        let side = self.width.max(self.height);
        let top = (side - self.height) / 2;
        let left = (side - self.width) / 2;
        let mut out = PixelGrid::zeros(self.channels, side, side);
        for c in 0..self.channels {
            for y in 0..self.height {
                let src = &self.data[(c * self.height + y) * self.width..][..self.width];
                let start = (c * side + y + top) * side + left;
                out.data[start..start + self.width].copy_from_slice(src);
            }
        }
        out
    }

    /// Bilinear resize to `side x side` using half-pixel centers; edges are
    /// clamped. Constant inputs stay exactly constant.
    pub fn resize(&self, side: usize) -> Result<PixelGrid> {
        if side == 0 {
            return Err(Error::InvalidParameter("resize side must be positive".into()));
        }
        let sy = self.height as f64 / side as f64;
        let sx = self.width as f64 / side as f64;
        let xs: Vec<_> = (0..side).map(|x| bilinear_taps((x as f64 + 0.5) * sx - 0.5, self.width)).collect();
        let ys: Vec<_> = (0..side).map(|y| bilinear_taps((y as f64 + 0.5) * sy - 0.5, self.height)).collect();
        let mut out = PixelGrid::zeros(self.channels, side, side);
        for c in 0..self.channels {
            for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                    let v = lerp2(
                        self.get(c, y0, x0),
                        self.get(c, y0, x1),
                        self.get(c, y1, x0),
                        self.get(c, y1, x1),
                        tx as f32,
                        ty as f32,
                    );
                    out.set(c, oy, ox, v);
                }
            }
        }
        Ok(out)
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> PixelGrid {
        PixelGrid::from_fn(self.channels, self.height, self.width, |c, y, x| self.get(c, y, self.width - 1 - x))
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> PixelGrid {
        PixelGrid::from_fn(self.channels, self.height, self.width, |c, y, x| self.get(c, self.height - 1 - y, x))
    }

    /// Counter-clockwise rotation about the image center by `degrees`, same
    /// output size, nearest-neighbour sampling, zero fill. Rotations by 0 and
    /// ±90 degrees on square grids are exact pixel permutations.
    pub fn rotate(&self, degrees: f64) -> PixelGrid {
        let (w, h) = (self.width, self.height);
        if degrees == 0.0 {
            return self.clone();
        }
        if w == h && degrees == 90.0 {
            return PixelGrid::from_fn(self.channels, h, w, |c, y, x| self.get(c, x, w - 1 - y));
        }
        if w == h && degrees == -90.0 {
            return PixelGrid::from_fn(self.channels, h, w, |c, y, x| self.get(c, w - 1 - x, y));
        }
        let theta = degrees.to_radians();
        let (sin, cos) = (libm::sin(theta), libm::cos(theta));
        let cx = (w as f64 - 1.0) * 0.5;
        let cy = (h as f64 - 1.0) * 0.5;
        let mut out = PixelGrid::zeros(self.channels, h, w);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let sx = libm::round(cx + dx * cos - dy * sin);
                let sy = libm::round(cy + dx * sin + dy * cos);
                if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                    continue;
                }
                let (sx, sy) = (sx as usize, sy as usize);
                for c in 0..self.channels {
                    out.set(c, y, x, self.get(c, sy, sx));
                }
            }
        }
        out
    }
}

/// Crop window of [`extract_patch`] in raster cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub row0: i64,
    pub col0: i64,
    pub rows: usize,
    pub cols: usize,
}

/// Computes the crop window: the footprint's axis-aligned envelope scaled by
/// `scale` about its center, rounded to whole cells.
pub fn crop_window(raster: &RasterGrid, footprint: &Polygon, scale: f64) -> Result<CropWindow> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be >= 1")));
    }
    let bbox = footprint.bbox();
    if !(bbox.width() >= 0.0 && bbox.height() >= 0.0) {
        return Err(Error::InvalidPolygon("empty footprint".into()));
    }
    if !bbox.intersects(&raster.extent()) {
        return Err(Error::NoIntersection);
    }
    let cs = raster.cell_size();
    let cols = (libm::round(scale * bbox.width() / cs) as usize).max(1);
    let rows = (libm::round(scale * bbox.height() / cs) as usize).max(1);
    let (cx, cy) = bbox.center();
    let (ccol, crow) = raster.to_cell(cx, cy);
    Ok(CropWindow {
        col0: libm::round(ccol - cols as f64 * 0.5) as i64,
        row0: libm::round(crow - rows as f64 * 0.5) as i64,
        rows,
        cols,
    })
}

/// Cuts the scaled envelope of `footprint` out of `raster`.
///
/// Cells outside the raster, and nodata cells inside it, are filled with 0,
/// so the output is always `rows x cols` of the scaled rectangle.
pub fn extract_patch(raster: &RasterGrid, footprint: &Polygon, scale: f64) -> Result<PixelGrid> {
    let win = crop_window(raster, footprint, scale)?;
    let (w, h) = (raster.width() as i64, raster.height() as i64);
    let mut out = PixelGrid::zeros(raster.bands(), win.rows, win.cols);
    for b in 0..raster.bands() {
        for r in 0..win.rows {
            let sr = win.row0 + r as i64;
            if sr < 0 || sr >= h {
                continue;
            }
            for c in 0..win.cols {
                let sc = win.col0 + c as i64;
                if sc < 0 || sc >= w {
                    continue;
                }
                let v = raster.get(b, sr as usize, sc as usize);
                if !raster.is_nodata(v) {
                    out.set(b, r, c, v);
                }
            }
        }
    }
    Ok(out)
}
