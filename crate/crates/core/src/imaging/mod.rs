//! Image formation: phase-compensated back-projection and truncated-SVD Born inversion.

mod born;
mod bpa;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, format, Result};
use crate::format::{read_file, u32_len, write_file, ByteReader, ByteWriter, VERSION};
use crate::num::Real;

pub use crate::grid::ImagingGrid;
pub use born::{
    assemble_born_operator, assemble_born_operator_for_config, baa_image, truncated_svd_solve, BornInverter,
    TruncatedSvd, TruncationSpec, TsvdSolution,
};
pub use bpa::{bpa_focal_sums, bpa_image, BpaOptions};

pub const IMAGE_MAGIC: &[u8; 4] = b"MWIM";

/// Provenance carried in an image file's trailer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub source_band: Option<usize>,
    #[serde(default)]
    pub pipeline: serde_json::Value,
}

/// Nonnegative real pixel values over a grid, stored row-major (`iz * nx + ix`).
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T: Real = f64> {
    pub grid: ImagingGrid,
    pub values: Vec<T>,
    pub meta: ImageMeta,
}

#[derive(Serialize, Deserialize)]
struct ImageTrailer {
    grid: ImagingGrid,
    #[serde(flatten)]
    meta: ImageMeta,
}

impl<T: Real> Image<T> {
    pub fn zeros(grid: ImagingGrid) -> Self {
        Self { grid, values: vec![T::zero(); grid.len()], meta: ImageMeta::default() }
    }

    pub fn new(grid: ImagingGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(domain(format!("{} values for a {}x{} grid", values.len(), grid.nx, grid.nz)));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(domain("image values must be finite and nonnegative"));
        }
        Ok(Self { grid, values, meta: ImageMeta::default() })
    }

    /// Builds an image from an `nz x nx` matrix (row = z).
    pub fn from_matrix(grid: ImagingGrid, m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != grid.nz || m.ncols() != grid.nx {
            return Err(domain("matrix shape does not match grid"));
        }
        let mut values = Vec::with_capacity(grid.len());
        for iz in 0..grid.nz {
            values.extend(m.row(iz).iter().copied());
        }
        Self::new(grid, values)
    }

    pub fn with_meta(mut self, meta: ImageMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn get(&self, ix: usize, iz: usize) -> T {
        self.values[self.grid.index(ix, iz)]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    /// `(ix, iz)` of the brightest pixel; the first in storage order wins ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (p, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = p;
            }
        }
        (best % self.grid.nx, best / self.grid.nx)
    }

    /// Scales so the brightest pixel is 1; an all-zero image is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > T::zero() {
            for v in &mut self.values {
                *v /= m;
            }
        }
        self
    }

    /// Resamples onto an `nx x nz` grid over the same extent, one axis at a time.
    ///
    /// Shrinking axes average the source cells each target cell covers; growing
    /// axes interpolate linearly between cell centres.
    pub fn resample(&self, nx: usize, nz: usize) -> Result<Self> {
        let grid = ImagingGrid { nx, nz, ..self.grid };
        grid.validate()?;
        if nx == self.grid.nx && nz == self.grid.nz {
            return Ok(Self { grid, ..self.clone() });
        }
        let wx = axis_weights(self.grid.nx, nx);
        let wz = axis_weights(self.grid.nz, nz);
        let mut rows = vec![T::zero(); self.grid.nz * nx];
        for iz in 0..self.grid.nz {
            for (ix, taps) in wx.iter().enumerate() {
                rows[iz * nx + ix] = taps.iter().fold(T::zero(), |acc, &(j, w)| acc + self.get(j, iz) * T::of(w));
            }
        }
        let mut values = vec![T::zero(); grid.len()];
        for (iz, taps) in wz.iter().enumerate() {
            for ix in 0..nx {
                values[iz * nx + ix] = taps.iter().fold(T::zero(), |acc, &(j, w)| acc + rows[j * nx + ix] * T::of(w));
            }
        }
        Ok(Self { grid, values, meta: self.meta.clone() })
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image { grid: self.grid, values: self.values.iter().map(|v| U::of(v.as_f64())).collect(), meta: self.meta.clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::new();
        w.magic(IMAGE_MAGIC).u16(VERSION).u32(u32_len(self.grid.nx, "nx")?).u32(u32_len(self.grid.nz, "nz")?);
        for v in &self.values {
            w.f64(v.as_f64());
        }
        w.json(&ImageTrailer { grid: self.grid, meta: self.meta.clone() })?;
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(IMAGE_MAGIC)?;
        r.expect_version()?;
        let nx = r.u32()? as usize;
        let nz = r.u32()? as usize;
        let raw = r.f64s(nx.checked_mul(nz).ok_or_else(|| format("size overflow"))?)?;
        let trailer: ImageTrailer = r.json_trailer()?;
        if trailer.grid.nx != nx || trailer.grid.nz != nz {
            return Err(format("trailer grid disagrees with header"));
        }
        let values = raw.into_iter().map(T::of).collect();
        Ok(Self { grid: trailer.grid, values, meta: trailer.meta })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    /// 8-bit binary PGM, brightest pixel mapped to 255, first row = shallowest.
    pub fn to_pgm(&self) -> Vec<u8> {
        let m = self.max().as_f64();
        let mut out = format!("P5\n{} {}\n255\n", self.grid.nx, self.grid.nz).into_bytes();
        out.extend(self.values.iter().map(|v| {
            if m > 0.0 {
                (v.as_f64() / m * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        }));
        out
    }
}

/// Source taps `(index, weight)` for each of `n_dst` cells; weights sum to 1.
fn axis_weights(n_src: usize, n_dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_src as f64 / n_dst as f64;
    (0..n_dst)
        .map(|i| {
            if n_dst < n_src {
                let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
                (lo.floor() as usize..(hi.ceil() as usize).min(n_src))
                    .map(|j| (j, ((j + 1) as f64).min(hi) - (j as f64).max(lo)))
                    .filter(|&(_, w)| w > 0.0)
                    .map(|(j, w)| (j, w / scale))
                    .collect()
            } else {
                let u = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_src - 1) as f64);
                let lo = u.floor() as usize;
                let hi = (lo + 1).min(n_src - 1);
                let t = u - lo as f64;
                if hi == lo { vec![(lo, 1.0)] } else { vec![(lo, 1.0 - t), (hi, t)] }
            }
        })
        .collect()
}
