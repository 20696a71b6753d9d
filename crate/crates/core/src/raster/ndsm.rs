use super::RasterGrid;
use crate::{Error, Result};

/// Normalised DSM: per-cell height above ground, `dsm - dtm`.
///
/// Cells that are nodata in either input are nodata in the output. The
/// output keeps the DSM's nodata sentinel (falling back to the DTM's, then
/// to NaN). With `clamp_negative` set, negative heights become 0.
pub fn compute_ndsm(dsm: &RasterGrid, dtm: &RasterGrid, clamp_negative: bool) -> Result<RasterGrid> {
    for grid in [dsm, dtm] {
        if grid.bands() != 1 {
            return Err(Error::BandCount { expected: 1, found: grid.bands() });
        }
    }
    dsm.check_same_geometry(dtm)?;

    let nodata = dsm.nodata().or(dtm.nodata());
    let fill = nodata.unwrap_or(f32::NAN);
    let mut out = dsm.same_frame(dsm.width(), dsm.height(), dsm.cell_size()).with_nodata(nodata);
    for ((o, &s), &t) in out.band_mut(0).iter_mut().zip(dsm.band(0)).zip(dtm.band(0)) {
        *o = if dsm.is_nodata(s) || dtm.is_nodata(t) {
            fill
        } else {
            let h = s - t;
            if clamp_negative && h < 0.0 {
                0.0
            } else {
                h
            }
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(values: alloc::vec::Vec<f32>, w: usize, nodata: Option<f32>) -> RasterGrid {
        let h = values.len() / w;
        RasterGrid::new(w, h, 1, 0.5, (0.0, 10.0), "EPSG:32620", nodata, values).unwrap()
    }

    #[test]
    fn equal_surfaces_give_zero() {
        let dsm = single(vec![3.0, 4.5, 7.25, 100.0], 2, None);
        let out = compute_ndsm(&dsm, &dsm.clone(), true).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nodata_propagates() {
        let dsm = single(vec![-9999.0, 5.0], 2, Some(-9999.0));
        let dtm = single(vec![3.0, 1.0], 2, None);
        let out = compute_ndsm(&dsm, &dtm, true).unwrap();
        assert_eq!(out.values(), &[-9999.0, 4.0]);
        assert_eq!(out.nodata(), Some(-9999.0));

        let dsm = single(vec![f32::NAN, 5.0], 2, None);
        let out = compute_ndsm(&dsm, &dtm, true).unwrap();
        assert!(out.values()[0].is_nan());
    }

    #[test]
    fn negative_heights_clamped_only_when_asked() {
        let dsm = single(vec![1.0, 5.0], 2, None);
        let dtm = single(vec![1.5, 1.0], 2, None);
        assert_eq!(compute_ndsm(&dsm, &dtm, true).unwrap().values(), &[0.0, 4.0]);
        assert_eq!(compute_ndsm(&dsm, &dtm, false).unwrap().values(), &[-0.5, 4.0]);
    }

    #[test]
    fn rejects_mismatch_and_multiband() {
        let a = single(vec![1.0; 4], 2, None);
        let b = single(vec![1.0; 6], 2, None);
        assert!(matches!(compute_ndsm(&a, &b, true), Err(Error::GeometryMismatch(_))));
        let rgb = RasterGrid::filled(2, 2, 3, 0.5, (0.0, 10.0), "EPSG:32620", 1.0).unwrap();
        assert!(matches!(compute_ndsm(&rgb, &a, true), Err(Error::BandCount { .. })));
    }
}
