//! Synthetic paired RGB / nDSM data for desk-scale verification.
//!
//! Roof type lives only in the height channel (ridge geometry) and roof
//! material only in the color channels, so each modality carries exactly one
//! of the two attributes. [`synth_generate`] produces ready-made patches;
//! [`synth_scene`] renders whole georeferenced rasters with footprints so the
//! extraction path can be exercised end to end.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::geom::Polygon;
use crate::labels::{JOINT_MATERIALS, JOINT_TYPES};
use crate::raster::RasterGrid;
use crate::rng::{derive_seed, item_seed, rng_from_seed, Rng};
use crate::{BuildingSample, Country, Error, PixelGrid, Result, Split, Task};

/// Range of the gable/hip ridge rise above the eaves, meters.
pub const RIDGE_AMPLITUDE: (f32, f32) = (2.0, 3.5);
/// Range of eave heights above ground, meters.
pub const EAVE_HEIGHT: (f32, f32) = (2.5, 3.5);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthParams {
    /// Patch side in pixels.
    pub side: usize,
    /// Noise level; 0 is clean, 0.5 moderate, 1 hard.
    pub difficulty: f32,
    /// Probability that a building is tagged Dominica (else Saint Lucia).
    pub dominica_share: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { side: 32, difficulty: 0.5, dominica_share: 0.75 }
    }
}

impl SynthParams {
    fn rgb_sigma(&self) -> f32 {
        10.0 + 40.0 * self.difficulty
    }

    fn height_sigma(&self) -> f32 {
        0.05 + 0.5 * self.difficulty
    }
}

/// Geometry of one synthetic roof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofShape {
    pub roof_type: u8,
    pub eave: f32,
    pub amplitude: f32,
    /// Gable ridge runs along the x axis when set.
    pub ridge_along_x: bool,
}

impl RoofShape {
    pub fn draw(roof_type: u8, rng: &mut Rng) -> Self {
        RoofShape {
            roof_type,
            eave: rng.random_range(EAVE_HEIGHT.0..EAVE_HEIGHT.1),
            amplitude: rng.random_range(RIDGE_AMPLITUDE.0..RIDGE_AMPLITUDE.1),
            ridge_along_x: rng.random_bool(0.5),
        }
    }

    /// Noise-free height at footprint-relative position `(u, v)` in [0, 1]².
    pub fn height(&self, u: f32, v: f32) -> f32 {
        let across_u = 1.0 - (2.0 * u - 1.0).abs();
        let across_v = 1.0 - (2.0 * v - 1.0).abs();
        match self.roof_type {
            // one ridge line
            0 => self.eave + self.amplitude * if self.ridge_along_x { across_v } else { across_u },
            // four sloping planes
            1 => self.eave + self.amplitude * across_u.min(across_v),
            2 => self.eave,
            _ => 0.0,
        }
    }
}

/// Mean color of each roof material, 0-255 scale.
const MATERIAL_COLORS: [[f32; 3]; 5] = [
    [185.0, 188.0, 192.0],
    [150.0, 112.0, 82.0],
    [205.0, 198.0, 180.0],
    [45.0, 95.0, 195.0],
    [95.0, 85.0, 75.0],
];
const GROUND_COLOR: [f32; 3] = [95.0, 115.0, 70.0];

/// Per-roof color state for one material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofPaint {
    pub material: u8,
    tint: [f32; 3],
    patch_seed: u64,
}

impl RoofPaint {
    pub fn draw(material: u8, rng: &mut Rng) -> Self {
        let mut tint = [0.0; 3];
        let shift = rng.random_range(-12.0f32..12.0);
        for t in &mut tint {
            *t = shift + rng.random_range(-6.0f32..6.0);
        }
        RoofPaint { material, tint, patch_seed: rng.random() }
    }

    /// Noise-free color at footprint-relative `(u, v)`.
    pub fn color(&self, u: f32, v: f32) -> [f32; 3] {
        let mut c = MATERIAL_COLORS[usize::from(self.material)];
        let texture = match self.material {
            // corrugation stripes
            0 => 14.0 * libm::sinf(core::f32::consts::TAU * 8.0 * u),
            // patchwork of mismatched sheets
            1 | 4 => {
                let cell = ((u * 4.0) as u64) * 7 + (v * 4.0) as u64;
                let h = crate::rng::mix64(self.patch_seed ^ cell);
                ((h % 1000) as f32 / 1000.0 - 0.5) * if self.material == 1 { 70.0 } else { 110.0 }
            }
            _ => 0.0,
        };
        for (ch, t) in c.iter_mut().zip(self.tint) {
            *ch += t + texture;
        }
        c
    }
}

fn clamp_rgb(v: f32) -> f32 {
    v.clamp(0.0, 255.0)
}

fn draw_country(rng: &mut Rng, dominica_share: f64) -> Country {
    if rng.random_bool(dominica_share.clamp(0.0, 1.0)) {
        Country::Dominica
    } else {
        Country::SaintLucia
    }
}

/// Balanced `(roof_type, roof_material)` labels for sample `index`.
///
/// The task's own class cycles with the index; the other attribute is drawn
/// at random, independent of the task label.
fn labels_for(task: Task, index: usize, rng: &mut Rng) -> (u8, u8) {
    match task {
        Task::RoofType => ((index % 4) as u8, rng.random_range(0..5u8)),
        Task::RoofMaterial => (rng.random_range(0..4u8), (index % 5) as u8),
        Task::Joint => {
            let c = index % (JOINT_TYPES.len() * JOINT_MATERIALS.len());
            (JOINT_TYPES[c / JOINT_MATERIALS.len()] as u8, JOINT_MATERIALS[c % JOINT_MATERIALS.len()] as u8)
        }
    }
}

/// Generates `n` balanced samples for `task`.
///
/// The informative modalities are rendered from roof geometry and paint.
/// For `RoofType` the RGB patch is uniform white noise and no material label
/// is set; for `RoofMaterial` the height patch is non-negative white noise
/// and no type label is set. `Joint` renders and labels both.
pub fn synth_generate(n: usize, task: Task, seed: u64, params: &SynthParams) -> Result<Vec<BuildingSample>> {
    let k = task.num_classes();
    if n < k {
        return Err(Error::InvalidParameter(format!("need at least {k} samples for {task}, got {n}")));
    }
    if params.side < 4 {
        return Err(Error::InvalidParameter(format!("patch side {} too small", params.side)));
    }
    let base = derive_seed(seed, "synth");
    (0..n).map(|i| generate_one(task, i, base, params)).collect()
}

fn generate_one(task: Task, index: usize, base: u64, params: &SynthParams) -> Result<BuildingSample> {
    let building_id = format!("synth-{index:06}");
    let mut rng = rng_from_seed(item_seed(base, &building_id, index as u64));
    let (roof_type, roof_material) = labels_for(task, index, &mut rng);
    let country = draw_country(&mut rng, params.dominica_share);
    let side = params.side;
    let s = side as f32;

    // footprint occupies roughly the central 1/1.5 of the patch
    let fw = s / 1.5 * rng.random_range(0.8f32..1.0);
    let fh = s / 1.5 * rng.random_range(0.8f32..1.0);
    let x0 = (s - fw) * 0.5 + rng.random_range(-1.0f32..1.0);
    let y0 = (s - fh) * 0.5 + rng.random_range(-1.0f32..1.0);
    let shape = RoofShape::draw(roof_type, &mut rng);
    let paint = RoofPaint::draw(roof_material, &mut rng);

    let rgb_noise = Normal::new(0.0f32, params.rgb_sigma()).map_err(|e| Error::InvalidParameter(format!("{e}")))?;
    let h_noise = Normal::new(0.0f32, params.height_sigma()).map_err(|e| Error::InvalidParameter(format!("{e}")))?;

    let mut rgb = PixelGrid::zeros(3, side, side);
    let mut lidar = PixelGrid::zeros(1, side, side);
    for y in 0..side {
        for x in 0..side {
            let u = (x as f32 + 0.5 - x0) / fw;
            let v = (y as f32 + 0.5 - y0) / fh;
            let inside = (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v);

            let height = match task {
                Task::RoofMaterial => rng.random_range(0.0f32..1.0),
                _ => {
                    let h = if inside { shape.height(u, v) } else { 0.0 };
                    (h + h_noise.sample(&mut rng)).max(0.0)
                }
            };
            lidar.set(0, y, x, height);

            let color = match task {
                Task::RoofType => [0.0; 3].map(|_| rng.random_range(0.0f32..255.0)),
                _ => {
                    let base = if inside { paint.color(u, v) } else { GROUND_COLOR };
                    base.map(|b| clamp_rgb(b + rgb_noise.sample(&mut rng)))
                }
            };
            for (c, &value) in color.iter().enumerate() {
                rgb.set(c, y, x, value);
            }
        }
    }

    let (roof_type, roof_material) = match task {
        Task::RoofType => (Some(roof_type), None),
        Task::RoofMaterial => (None, Some(roof_material)),
        Task::Joint => (Some(roof_type), Some(roof_material)),
    };
    Ok(BuildingSample { building_id, rgb, lidar, roof_type, roof_material, country, split: Split::Unassigned })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneParams {
    pub n_buildings: usize,
    pub task: Task,
    pub seed: u64,
    pub difficulty: f32,
    pub rgb_cell_size: f64,
    pub lidar_cell_size: f64,
    /// Distance between building slots, meters.
    pub spacing: f64,
    pub crs_id: String,
    pub dominica_share: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            n_buildings: 200,
            task: Task::RoofType,
            seed: 0,
            difficulty: 0.5,
            rgb_cell_size: 0.25,
            lidar_cell_size: 0.5,
            spacing: 20.0,
            crs_id: "EPSG:32620".into(),
            dominica_share: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBuilding {
    pub building_id: String,
    pub polygon: Polygon,
    pub country: Country,
    pub roof_type: u8,
    pub roof_material: u8,
}

/// A rendered survey area.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub rgb: RasterGrid,
    pub dsm: RasterGrid,
    pub dtm: RasterGrid,
    pub buildings: Vec<SceneBuilding>,
}

struct Placed {
    building: SceneBuilding,
    shape: RoofShape,
    paint: RoofPaint,
}

impl Placed {
    fn at(&self, x: f64, y: f64) -> Option<(f32, f32)> {
        let e = self.building.polygon.bbox();
        let u = (x - e.min_x) / e.width();
        // v runs from the north edge, matching raster rows
        let v = (e.max_y - y) / e.height();
        ((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)).then_some((u as f32, v as f32))
    }
}

/// Renders buildings on a regular grid of slots over gently sloping terrain.
/// Every building carries both labels; the task's attribute is balanced and
/// the other one is random.
pub fn synth_scene(params: &SceneParams) -> Result<Scene> {
    let n = params.n_buildings;
    if n == 0 {
        return Err(Error::Empty("scene building count"));
    }
    if !(params.spacing > 0.0 && params.rgb_cell_size > 0.0 && params.lidar_cell_size > 0.0) {
        return Err(Error::InvalidParameter("spacing and cell sizes must be positive".into()));
    }
    let cols = libm::ceil(libm::sqrt(n as f64)) as usize;
    let rows = n.div_ceil(cols);
    let (width_m, height_m) = (cols as f64 * params.spacing, rows as f64 * params.spacing);
    let origin = (600_000.0, 1_700_000.0 + height_m);
    let base = derive_seed(params.seed, "scene");

    let mut placed = Vec::with_capacity(n);
    for i in 0..n {
        let building_id = format!("bldg-{i:05}");
        let mut rng = rng_from_seed(item_seed(base, &building_id, i as u64));
        let (roof_type, roof_material) = labels_for(params.task, i, &mut rng);
        let country = draw_country(&mut rng, params.dominica_share);
        let (slot_r, slot_c) = (i / cols, i % cols);
        let cx = origin.0 + (slot_c as f64 + 0.5) * params.spacing + rng.random_range(-1.0..1.0);
        let cy = origin.1 - (slot_r as f64 + 0.5) * params.spacing + rng.random_range(-1.0..1.0);
        let w = params.spacing * rng.random_range(0.35..0.5);
        let h = params.spacing * rng.random_range(0.35..0.5);
        let polygon = Polygon::rect(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0);
        placed.push(Placed {
            shape: RoofShape::draw(roof_type, &mut rng),
            paint: RoofPaint::draw(roof_material, &mut rng),
            building: SceneBuilding { building_id, polygon, country, roof_type, roof_material },
        });
    }

    let synth = SynthParams { difficulty: params.difficulty, ..SynthParams::default() };
    let slot_of = |x: f64, y: f64| -> Option<&Placed> {
        let c = ((x - origin.0) / params.spacing) as usize;
        let r = ((origin.1 - y) / params.spacing) as usize;
        placed.get(r * cols + c).filter(|_| c < cols)
    };

    let terrain = |x: f64, y: f64| -> f32 {
        let (lx, ly) = (x - origin.0, y - (origin.1 - height_m));
        (50.0 + 0.02 * lx + 0.01 * ly + 0.5 * libm::sin(lx / 37.0) * libm::cos(ly / 53.0)) as f32
    };

    let lw = libm::round(width_m / params.lidar_cell_size) as usize;
    let lh = libm::round(height_m / params.lidar_cell_size) as usize;
    let mut dtm = RasterGrid::filled(lw, lh, 1, params.lidar_cell_size, origin, params.crs_id.clone(), 0.0)?;
    let mut dsm = dtm.clone();
    let mut noise_rng = rng_from_seed(derive_seed(base, "height-noise"));
    let h_noise = Normal::new(0.0f32, synth.height_sigma()).map_err(|e| Error::InvalidParameter(format!("{e}")))?;
    for r in 0..lh {
        for c in 0..lw {
            let (x, y) = dtm.cell_center(r, c);
            let ground = terrain(x, y);
            let roof = slot_of(x, y).and_then(|p| p.at(x, y).map(|(u, v)| p.shape.height(u, v))).unwrap_or(0.0);
            dtm.set(0, r, c, ground);
            dsm.set(0, r, c, ground + roof + h_noise.sample(&mut noise_rng));
        }
    }

    let rw = libm::round(width_m / params.rgb_cell_size) as usize;
    let rh = libm::round(height_m / params.rgb_cell_size) as usize;
    let mut rgb = RasterGrid::filled(rw, rh, 3, params.rgb_cell_size, origin, params.crs_id.clone(), 0.0)?;
    let mut color_rng = rng_from_seed(derive_seed(base, "color-noise"));
    let rgb_noise = Normal::new(0.0f32, synth.rgb_sigma()).map_err(|e| Error::InvalidParameter(format!("{e}")))?;
    for r in 0..rh {
        for c in 0..rw {
            let (x, y) = rgb.cell_center(r, c);
            let color = slot_of(x, y).and_then(|p| p.at(x, y).map(|(u, v)| p.paint.color(u, v))).unwrap_or(GROUND_COLOR);
            for (b, value) in color.into_iter().enumerate() {
                rgb.set(b, r, c, libm::roundf(clamp_rgb(value + rgb_noise.sample(&mut color_rng))));
            }
        }
    }

    Ok(Scene { rgb, dsm, dtm, buildings: placed.into_iter().map(|p| p.building).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_dev(v: &[f32]) -> f32 {
        let mean = v.iter().sum::<f32>() / v.len() as f32;
        libm::sqrtf(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f32>() / v.len() as f32)
    }

    #[test]
    fn roof_type_task_is_balanced() {
        let s = synth_generate(400, Task::RoofType, 0, &SynthParams::default()).unwrap();
        let mut counts = [0; 4];
        for x in &s {
            counts[x.label(Task::RoofType).unwrap()] += 1;
            assert!(x.roof_material.is_none());
            assert!(x.lidar.data().iter().all(|&v| v >= 0.0));
        }
        assert_eq!(counts, [100; 4]);
    }

    #[test]
    fn material_task_is_balanced() {
        let s = synth_generate(500, Task::RoofMaterial, 1, &SynthParams::default()).unwrap();
        let mut counts = [0; 5];
        for x in &s {
            counts[x.label(Task::RoofMaterial).unwrap()] += 1;
        }
        assert_eq!(counts, [100; 5]);
    }

    #[test]
    fn flat_roofs_vary_less_than_a_ridge() {
        let s = synth_generate(200, Task::RoofType, 3, &SynthParams::default()).unwrap();
        for x in s.iter().filter(|x| x.roof_type == Some(2)) {
            assert!(std_dev(x.lidar.data()) < RIDGE_AMPLITUDE.0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams::default();
        assert_eq!(synth_generate(20, Task::Joint, 5, &p).unwrap(), synth_generate(20, Task::Joint, 5, &p).unwrap());
        assert_ne!(synth_generate(20, Task::Joint, 5, &p).unwrap(), synth_generate(20, Task::Joint, 6, &p).unwrap());
        assert!(synth_generate(3, Task::RoofType, 0, &p).is_err());
    }

    #[test]
    fn scene_buildings_sit_inside_rasters() {
        let params = SceneParams { n_buildings: 10, ..SceneParams::default() };
        let scene = synth_scene(&params).unwrap();
        assert_eq!(scene.buildings.len(), 10);
        scene.dsm.check_same_geometry(&scene.dtm).unwrap();
        let extent = scene.rgb.extent();
        for b in &scene.buildings {
            let e = b.polygon.bbox();
            assert!(e.min_x > extent.min_x && e.max_x < extent.max_x);
            assert!(e.min_y > extent.min_y && e.max_y < extent.max_y);
        }
        assert_eq!(synth_scene(&params).unwrap(), scene);
    }
}
