use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Image, ImagingGrid};
use crate::acquisition::AcquisitionConfig;
use crate::error::{domain, Result};
use crate::forward::{round_trip_kernel, Aperture, BScan};
use crate::num::{cabs, Complex, Real};

/// Which singular components a truncated-SVD solve keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TruncationSpec {
    /// The `rank` largest components.
    Rank { rank: usize },
    /// Components with `sigma_n >= tau * sigma_1`.
    RelativeThreshold { tau: f64 },
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec::RelativeThreshold { tau: 1e-2 }
    }
}

impl TruncationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationSpec::Rank { rank: 0 } => Err(domain("truncation rank must be >= 1")),
            TruncationSpec::RelativeThreshold { tau } if !(tau > 0.0 && tau <= 1.0) => {
                Err(domain(format!("truncation tau must lie in (0, 1], got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

/// Born operator `A[(i, a), p] = G(r_ap; k_i)^2 dA`; rows ordered `i * N_s + a`, columns are pixels.
pub fn assemble_born_operator<T: Real>(grid: &ImagingGrid, aperture: &Aperture, eps_bg: Complex<T>) -> Result<DMatrix<Complex<T>>> {
    grid.validate()?;
    let n_s = aperture.pos_m.len();
    let n_rows = aperture.freq_hz.len() * n_s;
    let area = T::of(grid.pixel_area());
    let ks = aperture.wavenumbers(eps_bg);
    let columns: Vec<Result<Vec<Complex<T>>>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let (x, z) = grid.center(p);
            let r: Vec<T> = aperture.distances_to(x, z)?.into_iter().map(T::of).collect();
            let mut col = Vec::with_capacity(n_rows);
            for &k in &ks {
                col.extend(r.iter().map(|&r| round_trip_kernel(k, r, area)));
            }
            Ok(col)
        })
        .collect();
    let mut a = DMatrix::zeros(n_rows, grid.len());
    for (p, col) in columns.into_iter().enumerate() {
        a.column_mut(p).copy_from_slice(&col?);
    }
    Ok(a)
}

pub fn assemble_born_operator_for_config<T: Real>(
    grid: &ImagingGrid,
    cfg: &AcquisitionConfig,
    eps_bg: Complex<T>,
) -> Result<DMatrix<Complex<T>>> {
    assemble_born_operator(grid, &Aperture::from_config(cfg)?, eps_bg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsvdSolution<T: Real = f64> {
    pub x: DVector<Complex<T>>,
    /// Number of singular components used; zero flags an all-truncated solve.
    pub kept: usize,
}

/// Thin SVD of an operator, factored once and reused across right-hand sides.
#[derive(Clone, Debug)]
pub struct TruncatedSvd<T: Real = f64> {
    u: DMatrix<Complex<T>>,
    sigma: Vec<T>,
    v_t: DMatrix<Complex<T>>,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn new(a: &DMatrix<Complex<T>>) -> Self {
        let svd = a.clone().svd(true, true);
        Self {
            u: svd.u.expect("u requested"),
            sigma: svd.singular_values.iter().copied().collect(),
            v_t: svd.v_t.expect("v_t requested"),
        }
    }

    pub fn singular_values(&self) -> &[T] {
        &self.sigma
    }

    pub fn kept(&self, spec: &TruncationSpec) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or_else(T::zero);
        match *spec {
            TruncationSpec::Rank { rank } => rank.min(self.sigma.len()),
            TruncationSpec::RelativeThreshold { tau } => {
                if s1 <= T::zero() {
                    0
                } else {
                    self.sigma.iter().take_while(|&&s| s >= T::of(tau) * s1 && s > T::zero()).count()
                }
            }
        }
    }

    /// `x = sum_{n kept} (u_n^H b / sigma_n) v_n`.
    pub fn solve(&self, b: &DVector<Complex<T>>, spec: &TruncationSpec) -> Result<TsvdSolution<T>> {
        spec.validate()?;
        if b.len() != self.u.nrows() {
            return Err(domain(format!("right-hand side has {} entries, operator has {} rows", b.len(), self.u.nrows())));
        }
        let kept = self.kept(spec);
        let mut x = DVector::zeros(self.v_t.ncols());
        for n in 0..kept {
            if self.sigma[n] <= T::zero() {
                break;
            }
            let coeff = self.u.column(n).dotc(b) / Complex::new(self.sigma[n], T::zero());
            x += self.v_t.row(n).adjoint() * coeff;
        }
        Ok(TsvdSolution { x, kept })
    }
}

pub fn truncated_svd_solve<T: Real>(
    a: &DMatrix<Complex<T>>,
    b: &DVector<Complex<T>>,
    spec: &TruncationSpec,
) -> Result<TsvdSolution<T>> {
    if a.nrows() != b.len() {
        return Err(domain(format!("operator has {} rows, right-hand side {}", a.nrows(), b.len())));
    }
    TruncatedSvd::new(a).solve(b, spec)
}

/// Born operator and its factorization for one grid and aperture.
#[derive(Clone, Debug)]
pub struct BornInverter<T: Real = f64> {
    pub grid: ImagingGrid,
    pub aperture: Aperture,
    pub operator: DMatrix<Complex<T>>,
    svd: TruncatedSvd<T>,
}

impl<T: Real> BornInverter<T> {
    pub fn new(grid: ImagingGrid, aperture: Aperture, eps_bg: Complex<T>) -> Result<Self> {
        let operator = assemble_born_operator(&grid, &aperture, eps_bg)?;
        let svd = TruncatedSvd::new(&operator);
        Ok(Self { grid, aperture, operator, svd })
    }

    pub fn svd(&self) -> &TruncatedSvd<T> {
        &self.svd
    }

    pub fn solve(&self, bscan: &BScan<T>, spec: &TruncationSpec) -> Result<TsvdSolution<T>> {
        bscan.validate()?;
        if bscan.freq_hz != self.aperture.freq_hz || bscan.pos_m != self.aperture.pos_m {
            return Err(domain("B-scan axes do not match the inverter's aperture"));
        }
        self.svd.solve(&DVector::from_vec(bscan.to_vec()), spec)
    }

    /// `|x_p|` of the truncated-SVD contrast estimate, max-normalized.
    pub fn image(&self, bscan: &BScan<T>, spec: &TruncationSpec) -> Result<Image<T>> {
        let sol = self.solve(bscan, spec)?;
        Ok(Image::new(self.grid, sol.x.iter().map(|z| cabs(*z)).collect())?.normalized())
    }
}

/// One-shot Born inversion of a B-scan acquired with `cfg`'s antenna geometry.
pub fn baa_image<T: Real>(
    bscan: &BScan<T>,
    grid: &ImagingGrid,
    cfg: &AcquisitionConfig,
    eps_bg: Complex<T>,
    spec: &TruncationSpec,
) -> Result<Image<T>> {
    spec.validate()?;
    let aperture = Aperture::from_bscan(bscan, cfg.antenna_height_m);
    BornInverter::new(*grid, aperture, eps_bg)?.image(bscan, spec)
}
