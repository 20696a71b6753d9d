//! Building footprint polygons.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::raster::Extent;
use crate::{Country, Error, Result};

/// A polygon in projected coordinates: one exterior ring and optional holes.
/// Rings may or may not repeat the first vertex at the end.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polygon {
    pub exterior: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    pub fn new(exterior: Vec<[f64; 2]>) -> Self {
        Self { exterior, holes: Vec::new() }
    }

    /// Axis-aligned rectangle.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self::new(alloc::vec![[min_x, min_y], [max_x, min_y], [max_x, max_y], [min_x, max_y]])
    }

    /// Area of the exterior minus holes.
    pub fn area(&self) -> f64 {
        let holes: f64 = self.holes.iter().map(|h| ring_area(h).abs()).sum();
        ring_area(&self.exterior).abs() - holes
    }

    /// Axis-aligned envelope of the exterior ring.
    pub fn bbox(&self) -> Extent {
        let mut e = Extent::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &[x, y] in &self.exterior {
            e.min_x = e.min_x.min(x);
            e.min_y = e.min_y.min(y);
            e.max_x = e.max_x.max(x);
            e.max_y = e.max_y.max(y);
        }
        e
    }

    /// Even-odd point-in-polygon test, holes excluded.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        ring_contains(&self.exterior, x, y) && !self.holes.iter().any(|h| ring_contains(h, x, y))
    }

    /// Checks the polygon is simple (no self-intersecting ring) with positive
    /// area.
    pub fn validate(&self) -> Result<()> {
        for ring in core::iter::once(&self.exterior).chain(&self.holes) {
            let pts = open_ring(ring);
            if pts.len() < 3 {
                return Err(Error::InvalidPolygon(format!("ring has {} distinct vertices", pts.len())));
            }
            if pts.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPolygon("non-finite coordinate".into()));
            }
            if ring_self_intersects(pts) {
                return Err(Error::InvalidPolygon("ring self-intersects".into()));
            }
        }
        if self.area().partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(Error::InvalidPolygon("non-positive area".into()));
        }
        Ok(())
    }
}

fn open_ring(ring: &[[f64; 2]]) -> &[[f64; 2]] {
    match ring {
        [first, .., last] if first == last && ring.len() > 1 => &ring[..ring.len() - 1],
        _ => ring,
    }
}

fn ring_area(ring: &[[f64; 2]]) -> f64 {
    let pts = open_ring(ring);
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let [x0, y0] = pts[i];
        let [x1, y1] = pts[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    twice * 0.5
}

fn ring_contains(ring: &[[f64; 2]], x: f64, y: f64) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let [xi, yi] = pts[i];
        let [xj, yj] = pts[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_touch(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn ring_self_intersects(pts: &[[f64; 2]]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_touch(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// One building footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub building_id: String,
    pub polygon: Polygon,
    pub country: Country,
}

/// Footprints with unique building ids and valid polygons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FootprintSet {
    features: Vec<Footprint>,
}

impl FootprintSet {
    pub fn new(features: Vec<Footprint>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(f.building_id.as_str()) {
                return Err(Error::DuplicateId(f.building_id.clone()));
            }
            f.polygon
                .validate()
                .map_err(|e| Error::InvalidPolygon(format!("building {}: {e}", f.building_id)))?;
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[Footprint] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rectangle_area_bbox_contains() {
        let p = Polygon::rect(1.0, 2.0, 4.0, 6.0);
        assert_eq!(p.area(), 12.0);
        assert_eq!(p.bbox(), Extent::new(1.0, 2.0, 4.0, 6.0));
        assert!(p.contains(2.0, 3.0));
        assert!(!p.contains(5.0, 3.0));
        p.validate().unwrap();
    }

    #[test]
    fn bowtie_is_rejected() {
        let p = Polygon::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0], [0.0, 0.0]]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn degenerate_ring_is_rejected() {
        let p = Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn hole_reduces_area_and_containment() {
        let mut p = Polygon::rect(0.0, 0.0, 10.0, 10.0);
        p.holes.push(vec![[4.0, 4.0], [6.0, 4.0], [6.0, 6.0], [4.0, 6.0]]);
        assert_eq!(p.area(), 96.0);
        assert!(!p.contains(5.0, 5.0));
        assert!(p.contains(1.0, 1.0));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = Footprint {
            building_id: "a".into(),
            polygon: Polygon::rect(0.0, 0.0, 1.0, 1.0),
            country: Country::Dominica,
        };
        assert!(matches!(FootprintSet::new(vec![f.clone(), f]), Err(Error::DuplicateId(_))));
    }
}
