use super::RasterGrid;
use crate::{Error, Result};
use alloc::format;

/// Interpolation used by [`resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Resampling {
    /// For categorical or nodata-heavy grids.
    Nearest,
    /// For continuous fields.
    Bilinear,
}

/// Resamples a raster to a new cell size over the same extent.
///
/// The output keeps the origin; its width and height are the source extent
/// divided by the target cell size, rounded to the nearest cell (at least
/// one). Bilinear output is nodata whenever a contributing neighbour is.
pub fn resample(raster: &RasterGrid, target_cell_size: f64, method: Resampling) -> Result<RasterGrid> {
    if !(target_cell_size.is_finite() && target_cell_size > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target cell size {target_cell_size} must be positive"
        )));
    }
    let ratio = target_cell_size / raster.cell_size();
    let out_w = (libm::round(raster.width() as f64 / ratio) as usize).max(1);
    let out_h = (libm::round(raster.height() as f64 / ratio) as usize).max(1);
    let mut out = raster.same_frame(out_w, out_h, target_cell_size);
    let fill = raster.nodata().unwrap_or(f32::NAN);

    for band in 0..raster.bands() {
        for row in 0..out_h {
            for col in 0..out_w {
                let v = match method {
                    Resampling::Nearest => {
                        let sr = nearest_index((row as f64 + 0.5) * ratio, raster.height());
                        let sc = nearest_index((col as f64 + 0.5) * ratio, raster.width());
                        raster.get(band, sr, sc)
                    }
                    Resampling::Bilinear => {
                        let (r0, r1, tr) = bilinear_taps((row as f64 + 0.5) * ratio - 0.5, raster.height());
                        let (c0, c1, tc) = bilinear_taps((col as f64 + 0.5) * ratio - 0.5, raster.width());
                        let a = raster.get(band, r0, c0);
                        let b = raster.get(band, r0, c1);
                        let c = raster.get(band, r1, c0);
                        let d = raster.get(band, r1, c1);
                        let used = [(a, true), (b, tc > 0.0), (c, tr > 0.0), (d, tc > 0.0 && tr > 0.0)];
                        if used.iter().any(|&(v, on)| on && raster.is_nodata(v)) {
                            fill
                        } else {
                            lerp2(a, b, c, d, tc as f32, tr as f32)
                        }
                    }
                };
                out.set(band, row, col, v);
            }
        }
    }
    Ok(out)
}

fn nearest_index(pos: f64, len: usize) -> usize {
    (libm::floor(pos).max(0.0) as usize).min(len - 1)
}

/// Lower tap, upper tap and fractional weight for a source position in
/// cell-center coordinates, clamped at the edges.
pub(crate) fn bilinear_taps(pos: f64, len: usize) -> (usize, usize, f64) {
    if pos <= 0.0 || len == 1 {
        return (0, 0, 0.0);
    }
    let max = (len - 1) as f64;
    if pos >= max {
        return (len - 1, len - 1, 0.0);
    }
    let lo = libm::floor(pos);
    let i = lo as usize;
    (i, i + 1, pos - lo)
}

/// Bilinear blend written as `a + t(b - a)` so constant neighbourhoods
/// reproduce their value exactly.
pub(crate) fn lerp2(a: f32, b: f32, c: f32, d: f32, tx: f32, ty: f32) -> f32 {
    let top = a + tx * (b - a);
    let bottom = c + tx * (d - c);
    top + ty * (bottom - top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn grid(w: usize, h: usize, values: Vec<f32>) -> RasterGrid {
        RasterGrid::new(w, h, 1, 1.0, (0.0, 0.0), "EPSG:32620", None, values).unwrap()
    }

    #[test]
    fn identity_when_cell_size_unchanged() {
        let values: Vec<f32> = (0..35).map(|i| (i as f32 * 0.37).sin()).collect();
        let g = grid(7, 5, values);
        for m in [Resampling::Nearest, Resampling::Bilinear] {
            assert_eq!(resample(&g, 1.0, m).unwrap(), g);
        }
    }

    #[test]
    fn constant_upsample_stays_constant() {
        let g = grid(2, 2, alloc::vec![3.3; 4]);
        let up = resample(&g, 0.5, Resampling::Bilinear).unwrap();
        assert_eq!((up.width(), up.height()), (4, 4));
        assert!(up.values().iter().all(|&v| v == 3.3));
    }

    #[test]
    fn checkerboard_nearest_downsample_matches_index_map() {
        let values: Vec<f32> = (0..16).map(|i| ((i / 4 + i % 4) % 2) as f32 + i as f32 * 10.0).collect();
        let g = grid(4, 4, values);
        let down = resample(&g, 2.0, Resampling::Nearest).unwrap();
        assert_eq!((down.width(), down.height()), (2, 2));
        for r in 0..2 {
            for c in 0..2 {
                // output cell center (r + 0.5) * 2 lands in source cell 2r + 1
                assert_eq!(down.get(0, r, c), g.get(0, 2 * r + 1, 2 * c + 1));
            }
        }
    }

    #[test]
    fn extent_preserved_within_one_cell() {
        let g = grid(13, 7, alloc::vec![1.0; 91]);
        for target in [0.3, 0.5, 2.0, 3.7, 20.0] {
            let out = resample(&g, target, Resampling::Bilinear).unwrap();
            let (a, b) = (g.extent(), out.extent());
            assert!((a.width() - b.width()).abs() <= target);
            assert!((a.height() - b.height()).abs() <= target);
        }
    }

    #[test]
    fn bilinear_nodata_neighbour_gives_nodata() {
        let g = grid(2, 1, alloc::vec![1.0, f32::NAN]);
        let up = resample(&g, 0.5, Resampling::Bilinear).unwrap();
        assert_eq!(up.get(0, 0, 0), 1.0);
        assert!(up.get(0, 0, 1).is_nan());
        assert!(resample(&g, 0.0, Resampling::Nearest).is_err());
    }
}
