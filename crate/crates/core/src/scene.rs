//! Parametric subsurface scenes and the soil dielectric model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::ImagingGrid;
use crate::num::{complex_cast, Complex, Real};

/// Volumetric water content at saturation; `sm_fraction = 1` maps here.
pub const SATURATION_WATER_CONTENT: f64 = 0.4;
/// Loss added per unit of volumetric water content.
pub const WATER_LOSS_SLOPE: f64 = 0.3;

pub const PIPE_CONTRAST_DRY: f64 = -0.5;
pub const PIPE_CONTRAST_WET: f64 = 2.0;
pub const PEBBLE_CONTRAST: Complex<f64> = Complex::new(0.5, 0.0);
pub const ROOT_CONTRAST: Complex<f64> = Complex::new(1.5, 0.3);

/// Topp polynomial for the real relative permittivity at volumetric water content `theta`.
pub fn topp_permittivity(theta: f64) -> f64 {
    3.03 + theta * (9.3 + theta * (146.0 - 76.7 * theta))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoistureMapKind {
    #[default]
    ToppPolynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilModel {
    pub eps_bg_real: f64,
    pub loss_tangent_bg: f64,
    #[serde(default)]
    pub moisture_map_kind: MoistureMapKind,
}

impl Default for SoilModel {
    /// Dry soil matching the moisture model at zero water content.
    fn default() -> Self {
        Self { eps_bg_real: topp_permittivity(0.0), loss_tangent_bg: 0.02, moisture_map_kind: MoistureMapKind::ToppPolynomial }
    }
}

impl SoilModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_bg_real >= 1.0) || !self.eps_bg_real.is_finite() {
            return Err(domain(format!("eps_bg_real must be >= 1, got {}", self.eps_bg_real)));
        }
        if !(self.loss_tangent_bg >= 0.0) || !self.loss_tangent_bg.is_finite() {
            return Err(domain(format!("loss_tangent_bg must be >= 0, got {}", self.loss_tangent_bg)));
        }
        Ok(())
    }

    /// Complex permittivity of the background soil, `eps' (1 - j tan_delta)`.
    pub fn background_permittivity(&self) -> Complex<f64> {
        Complex::new(self.eps_bg_real, -self.eps_bg_real * self.loss_tangent_bg)
    }

    /// Complex relative permittivity of soil at the given fraction of saturation.
    pub fn moisture_to_permittivity(&self, sm_fraction: f64) -> Result<Complex<f64>> {
        if !(0.0..=1.0).contains(&sm_fraction) {
            return Err(domain(format!("sm_fraction must lie in [0, 1], got {sm_fraction}")));
        }
        let theta = SATURATION_WATER_CONTENT * sm_fraction;
        let real = match self.moisture_map_kind {
            MoistureMapKind::ToppPolynomial => topp_permittivity(theta),
        };
        Ok(Complex::new(real, -real * (self.loss_tangent_bg + WATER_LOSS_SLOPE * theta)))
    }

    /// Contrast `eps / eps_bg - 1` of soil at the given moisture.
    pub fn moisture_contrast(&self, sm_fraction: f64) -> Result<Complex<f64>> {
        Ok(self.moisture_to_permittivity(sm_fraction)? / self.background_permittivity() - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub x_m: f64,
    /// Depth of the pipe axis below the surface.
    pub depth_m: f64,
    pub diameter_m: f64,
    pub water_filled: bool,
}

impl Pipe {
    pub fn contrast(&self) -> Complex<f64> {
        let c = if self.water_filled { PIPE_CONTRAST_WET } else { PIPE_CONTRAST_DRY };
        Complex::new(c, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoistRegion {
    pub center_x_m: f64,
    pub center_z_m: f64,
    pub radius_m: f64,
    pub sm_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterKind {
    Pebble,
    Root,
}

impl ClutterKind {
    pub fn contrast(self) -> Complex<f64> {
        match self {
            ClutterKind::Pebble => PEBBLE_CONTRAST,
            ClutterKind::Root => ROOT_CONTRAST,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterDensity {
    None,
    Low,
    Moderate,
    High,
}

impl ClutterDensity {
    pub fn point_count(self) -> usize {
        match self {
            ClutterDensity::None => 0,
            ClutterDensity::Low => 3,
            ClutterDensity::Moderate => 7,
            ClutterDensity::High => 15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterPoint {
    pub x_m: f64,
    pub z_m: f64,
    pub contrast: Complex<f64>,
    pub kind: ClutterKind,
}

/// Ground truth for one cross-section. Positions in metres, z positive downward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub soil: SoilModel,
    pub pipe: Option<Pipe>,
    pub moist_region: Option<MoistRegion>,
    #[serde(default)]
    pub clutter_points: Vec<ClutterPoint>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Scene {
    pub fn empty(soil: SoilModel) -> Self {
        Self { soil, pipe: None, moist_region: None, clutter_points: Vec::new(), rng_seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.soil.validate()?;
        if let Some(pipe) = &self.pipe {
            if !(pipe.depth_m > 0.0) || !(pipe.diameter_m > 0.0) {
                return Err(domain("pipe depth and diameter must be positive"));
            }
        }
        if let Some(m) = &self.moist_region {
            if !(m.radius_m > 0.0) {
                return Err(domain("moist region radius must be positive"));
            }
            if !(0.0..=1.0).contains(&m.sm_fraction) {
                return Err(domain("moist region sm_fraction must lie in [0, 1]"));
            }
            if !(m.center_z_m > 0.0) {
                return Err(domain("moist region must lie below the surface"));
            }
        }
        if self.clutter_points.iter().any(|c| !(c.z_m > 0.0)) {
            return Err(domain("clutter points must lie below the surface (z > 0)"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-pixel contrast `chi = eps / eps_bg - 1` over a grid, plus the background it is relative to.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastMap<T: Real = f64> {
    pub grid: ImagingGrid,
    pub eps_bg: Complex<T>,
    pub chi: Vec<Complex<T>>,
}

impl<T: Real> ContrastMap<T> {
    pub fn zeros(grid: ImagingGrid, eps_bg: Complex<T>) -> Self {
        Self { grid, eps_bg, chi: vec![Complex::new(T::zero(), T::zero()); grid.len()] }
    }

    /// Flat indices of nonzero pixels, ascending.
    pub fn support(&self) -> Vec<usize> {
        let zero = Complex::new(T::zero(), T::zero());
        self.chi.iter().enumerate().filter(|(_, c)| **c != zero).map(|(p, _)| p).collect()
    }
}

/// Samples a scene onto a grid.
///
/// Later components overwrite earlier ones: moist region, then pipe, then clutter
/// (clutter points falling in the same cell add).
pub fn rasterize_scene<T: Real>(scene: &Scene, grid: &ImagingGrid) -> Result<ContrastMap<T>> {
    scene.validate()?;
    grid.validate()?;
    let eps_bg = scene.soil.background_permittivity();
    let mut map = ContrastMap::<T>::zeros(*grid, complex_cast(eps_bg));

    if let Some(m) = &scene.moist_region {
        if !grid.contains(m.center_x_m, m.center_z_m) {
            return Err(domain("moist region centre lies outside the imaging grid"));
        }
        let chi: Complex<T> = complex_cast(scene.soil.moisture_contrast(m.sm_fraction)?);
        fill_disk(&mut map, m.center_x_m, m.center_z_m, m.radius_m, chi);
    }
    if let Some(pipe) = &scene.pipe {
        if !grid.contains(pipe.x_m, pipe.depth_m) {
            return Err(domain("pipe axis lies outside the imaging grid"));
        }
        fill_disk(&mut map, pipe.x_m, pipe.depth_m, pipe.diameter_m / 2.0, complex_cast(pipe.contrast()));
    }
    let mut touched = vec![false; grid.len()];
    for c in &scene.clutter_points {
        let (ix, iz) = grid
            .locate(c.x_m, c.z_m)
            .ok_or_else(|| domain(format!("clutter point ({}, {}) lies outside the imaging grid", c.x_m, c.z_m)))?;
        let p = grid.index(ix, iz);
        let chi: Complex<T> = complex_cast(c.contrast);
        if touched[p] {
            map.chi[p] += chi;
        } else {
            map.chi[p] = chi;
            touched[p] = true;
        }
    }
    Ok(map)
}

fn fill_disk<T: Real>(map: &mut ContrastMap<T>, cx: f64, cz: f64, radius: f64, chi: Complex<T>) {
    let g = map.grid;
    let r2 = radius * radius;
    // Only scan the bounding box of the disk.
    let ix_lo = (((cx - radius - g.x_min_m) / g.dx()).floor().max(0.0)) as usize;
    let ix_hi = ((((cx + radius - g.x_min_m) / g.dx()).ceil()).max(0.0) as usize).min(g.nx);
    let iz_lo = (((cz - radius - g.z_min_m) / g.dz()).floor().max(0.0)) as usize;
    let iz_hi = ((((cz + radius - g.z_min_m) / g.dz()).ceil()).max(0.0) as usize).min(g.nz);
    for iz in iz_lo..iz_hi {
        let dz = g.center_z(iz) - cz;
        for ix in ix_lo..ix_hi {
            let dx = g.center_x(ix) - cx;
            if dx * dx + dz * dz <= r2 {
                map.chi[g.index(ix, iz)] = chi;
            }
        }
    }
}

/// Returns a copy of `scene` with seeded-uniform clutter scatterers added inside `grid`.
pub fn add_medium_clutter(
    scene: &Scene,
    grid: &ImagingGrid,
    kind: ClutterKind,
    density: ClutterDensity,
    seed: u64,
) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    let depth = grid.z_max_m - grid.z_min_m;
    let width = grid.x_max_m - grid.x_min_m;
    for _ in 0..density.point_count() {
        let x = grid.x_min_m + width * rng.random::<f64>();
        // (1 - u) in (0, 1] keeps z strictly below z_min, hence below the surface.
        let z = grid.z_min_m + depth * (1.0 - rng.random::<f64>());
        out.clutter_points.push(ClutterPoint { x_m: x, z_m: z, contrast: kind.contrast(), kind });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ImagingGrid {
        ImagingGrid::new(0.0, 1.2, 0.0, 0.4, 96, 96).unwrap()
    }

    #[test]
    fn topp_endpoints() {
        let soil = SoilModel::default();
        let dry = soil.moisture_to_permittivity(0.0).unwrap();
        assert!((dry.re - 3.03).abs() < 1e-12);
        // 3.03 + 9.3*0.4 + 146*0.16 - 76.7*0.064
        let wet = soil.moisture_to_permittivity(1.0).unwrap();
        assert!((wet.re - 25.2012).abs() < 1e-10, "{}", wet.re);
        let mid = soil.moisture_to_permittivity(0.5).unwrap();
        assert!(mid.re > dry.re && mid.re < wet.re);
        assert!((wet.im + wet.re * (0.02 + 0.3 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn moisture_out_of_range_is_domain_error() {
        let soil = SoilModel::default();
        assert!(matches!(soil.moisture_to_permittivity(-0.01), Err(crate::Error::Domain(_))));
        assert!(matches!(soil.moisture_to_permittivity(1.5), Err(crate::Error::Domain(_))));
        assert!(soil.moisture_to_permittivity(f64::NAN).is_err());
    }

    #[test]
    fn real_part_strictly_increasing() {
        let soil = SoilModel::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let e = soil.moisture_to_permittivity(i as f64 / 2000.0).unwrap().re;
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn dry_moisture_has_zero_contrast() {
        let soil = SoilModel::default();
        assert!(soil.moisture_contrast(0.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn empty_scene_rasterizes_to_zero() {
        let map = rasterize_scene::<f64>(&Scene::empty(SoilModel::default()), &grid()).unwrap();
        assert!(map.support().is_empty());
    }

    #[test]
    fn clutter_point_at_pixel_centre_hits_one_pixel() {
        let g = grid();
        let (x, z) = g.center(g.index(40, 30));
        let mut scene = Scene::empty(SoilModel::default());
        scene.clutter_points.push(ClutterPoint { x_m: x, z_m: z, contrast: PEBBLE_CONTRAST, kind: ClutterKind::Pebble });
        let map = rasterize_scene::<f64>(&scene, &g).unwrap();
        assert_eq!(map.support(), vec![g.index(40, 30)]);
        assert_eq!(map.chi[g.index(40, 30)], PEBBLE_CONTRAST);
    }

    #[test]
    fn moist_disk_matches_bruteforce_containment() {
        let g = ImagingGrid::new(0.0, 1.0, 0.0, 1.0, 40, 40).unwrap();
        let (cx, cz) = (0.5 + 0.3 * g.dx(), 0.5 - 0.2 * g.dz());
        let radius = 3.0 * g.dx();
        let mut scene = Scene::empty(SoilModel::default());
        scene.moist_region = Some(MoistRegion { center_x_m: cx, center_z_m: cz, radius_m: radius, sm_fraction: 0.5 });
        let map = rasterize_scene::<f64>(&scene, &g).unwrap();
        // Independent scan over every pixel of the grid.
        let mut expected = 0;
        for p in 0..g.len() {
            let (x, z) = g.center(p);
            if (x - cx).hypot(z - cz) <= radius {
                expected += 1;
            }
        }
        assert!(expected > 20);
        assert_eq!(map.support().len(), expected);
    }

    #[test]
    fn scatterer_outside_grid_is_rejected() {
        let mut scene = Scene::empty(SoilModel::default());
        scene.clutter_points.push(ClutterPoint { x_m: 2.0, z_m: 0.1, contrast: PEBBLE_CONTRAST, kind: ClutterKind::Pebble });
        assert!(matches!(rasterize_scene::<f64>(&scene, &grid()), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn pipe_overrides_moist_region() {
        let g = grid();
        let mut scene = Scene::empty(SoilModel::default());
        scene.moist_region = Some(MoistRegion { center_x_m: 0.6, center_z_m: 0.12, radius_m: 0.08, sm_fraction: 0.5 });
        scene.pipe = Some(Pipe { x_m: 0.6, depth_m: 0.12, diameter_m: 0.045, water_filled: true });
        let map = rasterize_scene::<f64>(&scene, &g).unwrap();
        let (ix, iz) = g.locate(0.6, 0.12).unwrap();
        assert_eq!(map.chi[g.index(ix, iz)], Complex::new(PIPE_CONTRAST_WET, 0.0));
    }

    #[test]
    fn medium_clutter_contract() {
        let g = grid();
        let base = Scene::empty(SoilModel::default());
        let a = add_medium_clutter(&base, &g, ClutterKind::Root, ClutterDensity::Low, 7);
        let b = add_medium_clutter(&base, &g, ClutterKind::Root, ClutterDensity::Low, 7);
        assert_eq!(a, b);
        let high = add_medium_clutter(&base, &g, ClutterKind::Pebble, ClutterDensity::High, 3);
        assert_eq!(high.clutter_points.len(), 15);
        for c in &high.clutter_points {
            assert!(c.z_m > 0.0 && c.x_m >= g.x_min_m && c.x_m <= g.x_max_m);
            assert_eq!(c.contrast, PEBBLE_CONTRAST);
        }
        assert_eq!(add_medium_clutter(&base, &g, ClutterKind::Pebble, ClutterDensity::None, 3), base);
    }

    #[test]
    fn scene_json_roundtrip() {
        let g = grid();
        let mut scene = Scene::empty(SoilModel::default());
        scene.pipe = Some(Pipe { x_m: 0.6, depth_m: 0.12, diameter_m: 0.045, water_filled: true });
        let scene = add_medium_clutter(&scene, &g, ClutterKind::Root, ClutterDensity::Moderate, 11);
        let back = Scene::from_json(&scene.to_json().unwrap()).unwrap();
        assert_eq!(back, scene);
    }
}
