//! Cell-centred pixel grids over the (x, z) cross-section.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Rectangular pixel grid; z grows downward from the soil surface at z = 0.
///
/// Pixel `(ix, iz)` is centred at `x_min + (ix + 1/2) dx`, `z_min + (iz + 1/2) dz`
/// and is stored at flat index `iz * nx + ix`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagingGrid {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub z_min_m: f64,
    pub z_max_m: f64,
    pub nx: usize,
    pub nz: usize,
}

impl ImagingGrid {
    pub fn new(x_min_m: f64, x_max_m: f64, z_min_m: f64, z_max_m: f64, nx: usize, nz: usize) -> Result<Self> {
        let grid = Self { x_min_m, x_max_m, z_min_m, z_max_m, nx, nz };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nz < 2 {
            return Err(domain(format!("grid needs at least 2x2 pixels, got {}x{}", self.nx, self.nz)));
        }
        let finite = [self.x_min_m, self.x_max_m, self.z_min_m, self.z_max_m]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max_m <= self.x_min_m || self.z_max_m <= self.z_min_m {
            return Err(domain("grid bounds must be finite and increasing"));
        }
        if self.z_min_m < 0.0 {
            return Err(domain("grid must lie in the subsurface half-space (z_min >= 0)"));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max_m - self.x_min_m) / self.nx as f64
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        (self.z_max_m - self.z_min_m) / self.nz as f64
    }

    #[inline]
    pub fn pixel_area(&self) -> f64 {
        self.dx() * self.dz()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    #[inline]
    pub fn center_x(&self, ix: usize) -> f64 {
        self.x_min_m + (ix as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn center_z(&self, iz: usize) -> f64 {
        self.z_min_m + (iz as f64 + 0.5) * self.dz()
    }

    /// Centre of the pixel at flat index `p`.
    #[inline]
    pub fn center(&self, p: usize) -> (f64, f64) {
        (self.center_x(p % self.nx), self.center_z(p / self.nx))
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min_m && x <= self.x_max_m && z >= self.z_min_m && z <= self.z_max_m
    }

    /// Pixel whose cell contains `(x, z)`; points on the upper bounds map to the last cell.
    pub fn locate(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        if !self.contains(x, z) {
            return None;
        }
        let ix = (((x - self.x_min_m) / self.dx()).floor() as usize).min(self.nx - 1);
        let iz = (((z - self.z_min_m) / self.dz()).floor() as usize).min(self.nz - 1);
        Some((ix, iz))
    }

    /// Grid spanning a scan line of length `scan_length_m` from the surface down to `depth_m`.
    pub fn under_scan(scan_length_m: f64, depth_m: f64, nx: usize, nz: usize) -> Result<Self> {
        Self::new(0.0, scan_length_m, 0.0, depth_m, nx, nz)
    }
}
