use rayon::prelude::*;

use super::{Image, ImagingGrid};
use crate::error::{domain, Result};
use crate::forward::{antenna_distance, background_wavenumber, BScan};
use crate::num::{cabs, cis, Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpaOptions<T: Real = f64> {
    pub eps_bg: Complex<T>,
    pub antenna_height_m: f64,
    /// Weight each term by `(4 pi r)^2` to undo geometric spreading.
    pub spreading_compensation: bool,
}

impl<T: Real> BpaOptions<T> {
    pub fn new(eps_bg: Complex<T>) -> Self {
        Self { eps_bg, antenna_height_m: 0.0, spreading_compensation: false }
    }
}

// Phases are advanced by recurrence along a uniform frequency axis and
// re-anchored exactly every few steps.
const REANCHOR: usize = 32;

/// Complex focal sums `sum_i sum_a S(f_i, x_a) w(r) exp(+2j Re(k_i) r)` for every pixel.
pub fn bpa_focal_sums<T: Real>(bscan: &BScan<T>, grid: &ImagingGrid, opts: &BpaOptions<T>) -> Result<Vec<Complex<T>>> {
    bscan.validate()?;
    grid.validate()?;
    let n_f = bscan.n_freq();
    let beta: Vec<T> = bscan
        .freq_hz
        .iter()
        .map(|&f| background_wavenumber(T::of(f), opts.eps_bg).re * T::of(2.0))
        .collect();
    let uniform = is_uniform(&bscan.freq_hz);
    let beta_step = if n_f > 1 { beta[1] - beta[0] } else { T::zero() };
    let four_pi = T::of(4.0) * T::pi();

    let rows: Vec<Result<Vec<Complex<T>>>> = (0..grid.nz)
        .into_par_iter()
        .map(|iz| {
            let z = grid.center_z(iz);
            let mut row = Vec::with_capacity(grid.nx);
            for ix in 0..grid.nx {
                let x = grid.center_x(ix);
                let mut total = Complex::new(T::zero(), T::zero());
                for (a, &xa) in bscan.pos_m.iter().enumerate() {
                    let r = antenna_distance(xa, opts.antenna_height_m, x, z);
                    if !(r > 0.0) {
                        return Err(domain(format!("antenna at x = {xa} m is collocated with pixel ({ix}, {iz})")));
                    }
                    let r = T::of(r);
                    let column = bscan.data.column(a);
                    let mut acc = Complex::new(T::zero(), T::zero());
                    if uniform {
                        let step = cis(beta_step * r);
                        let mut phase = cis(beta[0] * r);
                        for (i, s) in column.iter().enumerate() {
                            if i % REANCHOR == 0 {
                                phase = cis(beta[i] * r);
                            }
                            acc += *s * phase;
                            phase *= step;
                        }
                    } else {
                        for (i, s) in column.iter().enumerate() {
                            acc += *s * cis(beta[i] * r);
                        }
                    }
                    if opts.spreading_compensation {
                        let w = four_pi * r;
                        acc *= w * w;
                    }
                    total += acc;
                }
                row.push(total);
            }
            Ok(row)
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

/// Back-projection magnitude image, max-normalized.
pub fn bpa_image<T: Real>(bscan: &BScan<T>, grid: &ImagingGrid, opts: &BpaOptions<T>) -> Result<Image<T>> {
    let sums = bpa_focal_sums(bscan, grid, opts)?;
    Ok(Image::new(*grid, sums.into_iter().map(cabs).collect())?.normalized())
}

fn is_uniform(freq: &[f64]) -> bool {
    if freq.len() < 3 {
        return true;
    }
    let step = freq[1] - freq[0];
    freq.iter().enumerate().all(|(i, f)| (f - freq[0] - i as f64 * step).abs() <= 1e-9 * step.abs().max(1.0))
}
