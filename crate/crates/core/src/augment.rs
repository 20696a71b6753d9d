//! Random flips and rotations applied identically to both modalities.

use rand::Rng as _;

use crate::rng::{item_seed, rng_from_seed, Rng};
use crate::{BuildingSample, Error, PixelGrid, Result};

/// One augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Counter-clockwise, in [-90, 90].
    pub angle_degrees: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { flip_horizontal: false, flip_vertical: false, angle_degrees: 0.0 };

    /// Independent fair-coin flips and a uniform angle in [-90, 90].
    pub fn draw(rng: &mut Rng) -> Self {
        AugmentParams {
            flip_horizontal: rng.random_bool(0.5),
            flip_vertical: rng.random_bool(0.5),
            angle_degrees: rng.random_range(-90.0..=90.0),
        }
    }

    /// Horizontal flip, then vertical flip, then rotation.
    pub fn apply(&self, grid: &PixelGrid) -> PixelGrid {
        let mut g = if self.flip_horizontal { grid.flip_horizontal() } else { grid.clone() };
        if self.flip_vertical {
            g = g.flip_vertical();
        }
        if self.angle_degrees != 0.0 {
            g = g.rotate(self.angle_degrees);
        }
        g
    }
}

/// Applies the same draw to both patches. Labels are untouched.
pub fn augment_with(sample: &BuildingSample, params: &AugmentParams) -> Result<BuildingSample> {
    for g in [&sample.rgb, &sample.lidar] {
        if !g.is_square() {
            return Err(Error::NotSquare { width: g.width(), height: g.height() });
        }
    }
    Ok(BuildingSample {
        rgb: params.apply(&sample.rgb),
        lidar: params.apply(&sample.lidar),
        ..sample.clone()
    })
}

/// Draws parameters from a stream keyed by `(seed, building_id)` and applies
/// them to both patches.
pub fn augment(sample: &BuildingSample, seed: u64) -> Result<BuildingSample> {
    let mut rng = rng_from_seed(item_seed(seed, &sample.building_id, 0));
    augment_with(sample, &AugmentParams::draw(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Country, Split};

    fn sample(side: usize) -> BuildingSample {
        BuildingSample {
            building_id: "b-17".into(),
            rgb: PixelGrid::from_fn(3, side, side, |c, y, x| (c * 100 + y * side + x) as f32),
            lidar: PixelGrid::from_fn(1, side, side, |_, y, x| (y * side + x) as f32 * 0.1),
            roof_type: Some(2),
            roof_material: Some(4),
            country: Country::Dominica,
            split: Split::Train,
        }
    }

    #[test]
    fn identity_draw_is_noop() {
        let s = sample(6);
        assert_eq!(augment_with(&s, &AugmentParams::IDENTITY).unwrap(), s);
    }

    #[test]
    fn quarter_turn_matches_index_map_on_both_patches() {
        let s = sample(5);
        let p = AugmentParams { angle_degrees: 90.0, ..AugmentParams::IDENTITY };
        let out = augment_with(&s, &p).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(out.lidar.get(0, y, x), s.lidar.get(0, x, 4 - y));
                for c in 0..3 {
                    assert_eq!(out.rgb.get(c, y, x), s.rgb.get(c, x, 4 - y));
                }
            }
        }
    }

    #[test]
    fn labels_survive_any_seed() {
        let s = sample(8);
        for seed in 0..50 {
            let out = augment(&s, seed).unwrap();
            assert_eq!((out.roof_type, out.roof_material), (s.roof_type, s.roof_material));
            assert_eq!(out.rgb.width(), 8);
            assert_eq!(out.lidar.height(), 8);
        }
        assert_eq!(augment(&s, 9).unwrap(), augment(&s, 9).unwrap());
    }

    #[test]
    fn non_square_rejected() {
        let mut s = sample(4);
        s.lidar = PixelGrid::zeros(1, 4, 3);
        assert!(matches!(augment(&s, 0), Err(Error::NotSquare { .. })));
    }
}
