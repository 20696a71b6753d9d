use alloc::vec::Vec;

use rand::Rng as _;

use super::Extent;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// A square survey tile; `origin` is its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TileSpec {
    pub origin: (f64, f64),
    pub side: f64,
    pub seed: u64,
}

impl TileSpec {
    pub fn extent(&self) -> Extent {
        Extent::new(self.origin.0, self.origin.1, self.origin.0 + self.side, self.origin.1 + self.side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TileSampling {
    /// Independent uniform draws; tiles may overlap.
    #[default]
    Overlapping,
    /// Rejection sampling against already placed tiles.
    Disjoint { max_attempts: usize },
}

/// Draws `n` tiles of `side` meters lying entirely inside `extent`, with
/// lower-left corners uniform over the feasible region.
pub fn sample_tiles(extent: &Extent, n: usize, side: f64, seed: u64, mode: TileSampling) -> Result<Vec<TileSpec>> {
    if n == 0 {
        return Err(Error::Empty("tile count"));
    }
    if !(side.is_finite() && side > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("tile side {side} must be positive")));
    }
    let (w, h) = (extent.width(), extent.height());
    if !(w >= side && h >= side) {
        return Err(Error::ExtentTooSmall { width: w, height: h, side });
    }
    let mut rng = rng_from_seed(seed);
    let (span_x, span_y) = (w - side, h - side);
    let draw = |rng: &mut crate::rng::Rng| TileSpec {
        origin: (
            extent.min_x + rng.random::<f64>() * span_x,
            extent.min_y + rng.random::<f64>() * span_y,
        ),
        side,
        seed,
    };

    let mut tiles = Vec::with_capacity(n);
    match mode {
        TileSampling::Overlapping => {
            for _ in 0..n {
                tiles.push(draw(&mut rng));
            }
        }
        TileSampling::Disjoint { max_attempts } => {
            let mut attempts = 0;
            while tiles.len() < n {
                if attempts == max_attempts {
                    return Err(Error::TilePlacement { requested: n, placed: tiles.len() });
                }
                attempts += 1;
                let t = draw(&mut rng);
                if tiles.iter().all(|o: &TileSpec| !o.extent().intersects(&t.extent())) {
                    tiles.push(t);
                }
            }
        }
    }
    Ok(tiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn national_extent_gives_requested_count_inside() {
        let extent = Extent::new(650_000.0, 1_680_000.0, 700_000.0, 1_730_000.0);
        let tiles = sample_tiles(&extent, 80, 500.0, 11, TileSampling::Overlapping).unwrap();
        assert_eq!(tiles.len(), 80);
        for t in &tiles {
            let e = t.extent();
            assert!(e.min_x >= extent.min_x && e.max_x <= extent.max_x);
            assert!(e.min_y >= extent.min_y && e.max_y <= extent.max_y);
        }
    }

    #[test]
    fn exact_extent_forces_single_tile() {
        let extent = Extent::new(100.0, 200.0, 600.0, 700.0);
        let tiles = sample_tiles(&extent, 1, 500.0, 3, TileSampling::Overlapping).unwrap();
        assert_eq!(tiles[0].origin, (100.0, 200.0));
    }

    #[test]
    fn same_seed_same_tiles() {
        let extent = Extent::new(0.0, 0.0, 10_000.0, 8_000.0);
        let a = sample_tiles(&extent, 20, 500.0, 42, TileSampling::Overlapping).unwrap();
        let b = sample_tiles(&extent, 20, 500.0, 42, TileSampling::Overlapping).unwrap();
        assert_eq!(a, b);
        let c = sample_tiles(&extent, 20, 500.0, 43, TileSampling::Overlapping).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn disjoint_mode_has_no_overlap_or_reports_failure() {
        let extent = Extent::new(0.0, 0.0, 10_000.0, 10_000.0);
        let tiles = sample_tiles(&extent, 30, 500.0, 1, TileSampling::Disjoint { max_attempts: 10_000 }).unwrap();
        for (i, a) in tiles.iter().enumerate() {
            for b in &tiles[i + 1..] {
                assert!(!a.extent().intersects(&b.extent()));
            }
        }
        let small = Extent::new(0.0, 0.0, 900.0, 900.0);
        assert!(matches!(
            sample_tiles(&small, 4, 500.0, 1, TileSampling::Disjoint { max_attempts: 500 }),
            Err(Error::TilePlacement { .. })
        ));
    }

    #[test]
    fn extent_smaller_than_tile_is_rejected() {
        let extent = Extent::new(0.0, 0.0, 499.0, 1000.0);
        assert!(matches!(
            sample_tiles(&extent, 1, 500.0, 0, TileSampling::Overlapping),
            Err(Error::ExtentTooSmall { .. })
        ));
    }
}
