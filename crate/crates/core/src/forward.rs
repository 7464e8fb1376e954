//! Born-approximation B-scan simulator standing in for the SFCW rig.
//!
//! The monostatic round trip through a homogeneous lossy background is
//! modelled as the square of the scalar free-space Green's function,
//! `G(r; k)^2 = exp(-2jkr) / (4 pi r)^2`. [`round_trip_kernel`] is the single
//! implementation of that kernel; the Born operator in `imaging` calls it too.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, Band};
use crate::error::{config, domain, format, Result};
use crate::format::{read_file, u32_len, write_file, ByteReader, ByteWriter, VERSION};
use crate::num::{cabs, cexp, csqrt, Complex, Real};
use crate::scene::ContrastMap;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BSCAN_MAGIC: &[u8; 4] = b"MWBS";

/// `k = 2 pi f sqrt(eps) / c` with the principal root, so lossy media give `Im k < 0`.
pub fn background_wavenumber<T: Real>(f_hz: T, eps_bg: Complex<T>) -> Complex<T> {
    csqrt(eps_bg) * (T::two_pi() * f_hz / T::of(SPEED_OF_LIGHT))
}

/// `G(r; k)^2 * area`: one pixel's contribution to the monostatic response.
#[inline]
pub fn round_trip_kernel<T: Real>(k: Complex<T>, r: T, area: T) -> Complex<T> {
    let two_r = r + r;
    let spread = T::of(4.0) * T::pi() * r;
    cexp(Complex::new(two_r * k.im, -two_r * k.re)) * (area / (spread * spread))
}

/// Distance from the antenna at `(x_a, -height)` to the point `(x, z)`.
#[inline]
pub fn antenna_distance(x_a: f64, height_m: f64, x: f64, z: f64) -> f64 {
    (x - x_a).hypot(z + height_m)
}

/// Frequency and position axes of a measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Aperture {
    pub freq_hz: Vec<f64>,
    pub pos_m: Vec<f64>,
    pub antenna_height_m: f64,
}

impl Aperture {
    pub fn from_config(cfg: &AcquisitionConfig) -> Result<Self> {
        Ok(Self { freq_hz: cfg.frequency_grid()?, pos_m: cfg.scan_positions(), antenna_height_m: cfg.antenna_height_m })
    }

    pub fn from_bscan<T: Real>(bscan: &BScan<T>, antenna_height_m: f64) -> Self {
        Self { freq_hz: bscan.freq_hz.clone(), pos_m: bscan.pos_m.clone(), antenna_height_m }
    }

    /// Antenna-to-point distance for every position, rejecting collocated points.
    pub fn distances_to(&self, x: f64, z: f64) -> Result<Vec<f64>> {
        self.pos_m
            .iter()
            .map(|&xa| {
                let r = antenna_distance(xa, self.antenna_height_m, x, z);
                if r > 0.0 {
                    Ok(r)
                } else {
                    Err(domain(format!("antenna at x = {xa} m is collocated with point ({x}, {z})")))
                }
            })
            .collect()
    }

    pub fn wavenumbers<T: Real>(&self, eps_bg: Complex<T>) -> Vec<Complex<T>> {
        self.freq_hz.iter().map(|&f| background_wavenumber(T::of(f), eps_bg)).collect()
    }
}

/// Complex frequency x position measurement matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BScan<T: Real = f64> {
    /// Rows are frequencies, columns are scan positions.
    pub data: DMatrix<Complex<T>>,
    pub freq_hz: Vec<f64>,
    pub pos_m: Vec<f64>,
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct BScanTrailer {
    freq_hz: Vec<f64>,
    pos_m: Vec<f64>,
    provenance: String,
}

impl<T: Real> BScan<T> {
    pub fn new(data: DMatrix<Complex<T>>, freq_hz: Vec<f64>, pos_m: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        let b = Self { data, freq_hz, pos_m, provenance: provenance.into() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.nrows() != self.freq_hz.len() || self.data.ncols() != self.pos_m.len() {
            return Err(domain(format!(
                "B-scan is {}x{} but axes have {} frequencies and {} positions",
                self.data.nrows(),
                self.data.ncols(),
                self.freq_hz.len(),
                self.pos_m.len()
            )));
        }
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("B-scan contains non-finite entries"));
        }
        Ok(())
    }

    pub fn n_freq(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_pos(&self) -> usize {
        self.data.ncols()
    }

    /// Row-major flattening, index `i * n_pos + a`.
    pub fn to_vec(&self) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.n_freq() {
            out.extend(self.data.row(i).iter().copied());
        }
        out
    }

    /// Root-mean-square magnitude of the entries.
    pub fn rms(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        let energy = self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        (energy / T::of_usize(self.data.len())).sqrt()
    }

    pub fn magnitude(&self) -> DMatrix<T> {
        self.data.map(cabs)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::new();
        w.magic(BSCAN_MAGIC)
            .u16(VERSION)
            .u32(u32_len(self.n_freq(), "n_f")?)
            .u32(u32_len(self.n_pos(), "n_s")?)
            .u16(0);
        for i in 0..self.n_freq() {
            for a in 0..self.n_pos() {
                let z = self.data[(i, a)];
                w.f64(z.re.as_f64()).f64(z.im.as_f64());
            }
        }
        w.json(&BScanTrailer { freq_hz: self.freq_hz.clone(), pos_m: self.pos_m.clone(), provenance: self.provenance.clone() })?;
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(BSCAN_MAGIC)?;
        r.expect_version()?;
        let n_f = r.u32()? as usize;
        let n_s = r.u32()? as usize;
        let _reserved = r.u16()?;
        let raw = r.f64s(n_f.checked_mul(n_s).and_then(|n| n.checked_mul(2)).ok_or_else(|| format("size overflow"))?)?;
        let trailer: BScanTrailer = r.json_trailer()?;
        if trailer.freq_hz.len() != n_f || trailer.pos_m.len() != n_s {
            return Err(format("trailer axes disagree with header dimensions"));
        }
        let data = DMatrix::from_fn(n_f, n_s, |i, a| {
            let k = 2 * (i * n_s + a);
            Complex::new(T::of(raw[k]), T::of(raw[k + 1]))
        });
        Ok(Self { data, freq_hz: trailer.freq_hz, pos_m: trailer.pos_m, provenance: trailer.provenance })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Scattered-signal RMS over noise RMS; `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Multiplier on the unit-norm rank-1 direct-coupling term.
    pub clutter_gain: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clutter_gain >= 0.0) || !self.clutter_gain.is_finite() {
            return Err(domain("clutter_gain must be finite and >= 0"));
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() {
                return Err(domain("snr_db must not be NaN"));
            }
        }
        Ok(())
    }
}

/// Unit-norm raised-cosine profile over the sampled frequencies, peaking mid-band.
pub fn clutter_profile(freq_hz: &[f64]) -> Vec<f64> {
    let (lo, hi) = match (freq_hz.first(), freq_hz.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Vec::new(),
    };
    let mid = 0.5 * (lo + hi);
    let span = hi - lo;
    let raw: Vec<f64> = freq_hz
        .iter()
        .map(|&f| if span > 0.0 { 0.5 * (1.0 + (std::f64::consts::PI * (f - mid) / span).cos()) } else { 1.0 })
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// Clutter gain putting the rank-1 term `ratio_db` above a scattered field of RMS `signal_rms`.
pub fn clutter_gain_for_ratio(signal_rms: f64, n_freq: usize, ratio_db: f64) -> f64 {
    // The clutter matrix c(f) 1(x)^T has RMS 1/sqrt(n_freq) at unit gain.
    signal_rms * 10f64.powf(ratio_db / 20.0) * (n_freq as f64).sqrt()
}

/// Noise-free scattered field on an aperture: `S(f_i, x_a) = sum_p chi_p G(r_ap; k_i)^2 dA`.
pub fn scattered_field<T: Real>(contrast: &ContrastMap<T>, aperture: &Aperture) -> Result<DMatrix<Complex<T>>> {
    let grid = &contrast.grid;
    let area = T::of(grid.pixel_area());
    let support = contrast.support();
    let n_s = aperture.pos_m.len();
    // distances[j * n_s + a] for the j-th support pixel.
    let mut distances = Vec::with_capacity(support.len() * n_s);
    for &p in &support {
        let (x, z) = grid.center(p);
        distances.extend(aperture.distances_to(x, z)?.into_iter().map(T::of));
    }
    let ks = aperture.wavenumbers(contrast.eps_bg);
    let rows: Vec<Vec<Complex<T>>> = ks
        .par_iter()
        .map(|&k| {
            let mut row = vec![Complex::new(T::zero(), T::zero()); n_s];
            for (j, &p) in support.iter().enumerate() {
                let chi = contrast.chi[p];
                for (a, out) in row.iter_mut().enumerate() {
                    *out += chi * round_trip_kernel(k, distances[j * n_s + a], area);
                }
            }
            row
        })
        .collect();
    Ok(DMatrix::from_fn(ks.len(), n_s, |i, a| rows[i][a]))
}

/// Simulates a B-scan: Born scattered field, plus rank-1 clutter, plus circular Gaussian noise.
pub fn simulate_bscan<T: Real>(contrast: &ContrastMap<T>, cfg: &AcquisitionConfig, noise: &NoiseSpec) -> Result<BScan<T>> {
    cfg.validate()?;
    let aperture = Aperture::from_config(cfg)?;
    simulate_on_aperture(contrast, &aperture, noise, format!("simulated {}-{} Hz", cfg.f_min_hz, cfg.f_max_hz))
}

pub fn simulate_on_aperture<T: Real>(
    contrast: &ContrastMap<T>,
    aperture: &Aperture,
    noise: &NoiseSpec,
    provenance: String,
) -> Result<BScan<T>> {
    noise.validate()?;
    let mut data = scattered_field(contrast, aperture)?;
    add_clutter_and_noise(&mut data, &aperture.freq_hz, noise)?;
    BScan::new(data, aperture.freq_hz.clone(), aperture.pos_m.clone(), provenance)
}

/// Adds rank-1 clutter and circular Gaussian noise to a clean scattered field in place.
///
/// The noise level is set from the RMS of `data` before clutter is added.
pub fn add_clutter_and_noise<T: Real>(data: &mut DMatrix<Complex<T>>, freq_hz: &[f64], noise: &NoiseSpec) -> Result<()> {
    noise.validate()?;
    let (n_f, n_s) = data.shape();
    if freq_hz.len() != n_f {
        return Err(domain(format!("{} frequencies for {} rows", freq_hz.len(), n_f)));
    }
    let noise_rms = match noise.snr_db {
        Some(snr) if snr.is_finite() => {
            let energy: f64 = data.iter().map(|z| z.norm_sqr().as_f64()).sum();
            let signal_rms = (energy / (n_f * n_s).max(1) as f64).sqrt();
            signal_rms / 10f64.powf(snr / 20.0)
        }
        _ => 0.0,
    };

    if noise.clutter_gain > 0.0 {
        let profile = clutter_profile(freq_hz);
        for (i, c) in profile.iter().enumerate() {
            let v = T::of(noise.clutter_gain * c);
            for a in 0..n_s {
                data[(i, a)].re += v;
            }
        }
    }

    if noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
        let sigma = noise_rms / std::f64::consts::SQRT_2;
        for i in 0..n_f {
            for a in 0..n_s {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                data[(i, a)] += Complex::new(T::of(sigma * re), T::of(sigma * im));
            }
        }
    }
    Ok(())
}

fn check_band(band: &Band, cfg: &AcquisitionConfig) -> Result<()> {
    cfg.validate()?;
    if band.f_start_hz < cfg.f_min_hz || band.f_stop_hz > cfg.f_max_hz || band.f_start_hz > band.f_stop_hz {
        return Err(config(format!(
            "band {} [{}, {}] Hz lies outside the configured span [{}, {}] Hz",
            band.index, band.f_start_hz, band.f_stop_hz, cfg.f_min_hz, cfg.f_max_hz
        )));
    }
    Ok(())
}

/// Simulates the same scene on one band's own frequency grid.
pub fn slice_band<T: Real>(contrast: &ContrastMap<T>, band: &Band, cfg: &AcquisitionConfig, noise: &NoiseSpec) -> Result<BScan<T>> {
    check_band(band, cfg)?;
    let band_cfg = band.config(cfg);
    band_cfg.validate()?;
    let aperture = Aperture::from_config(&band_cfg)?;
    simulate_on_aperture(contrast, &aperture, noise, format!("simulated band {} ({}-{} Hz)", band.index, band.f_start_hz, band.f_stop_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ImagingGrid;

    fn small_cfg() -> AcquisitionConfig {
        AcquisitionConfig {
            scan_length_m: 0.4,
            n_positions: 9,
            f_min_hz: 1_000_000_000,
            f_max_hz: 2_000_000_000,
            f_step_hz: 100_000_000,
            ..AcquisitionConfig::reference()
        }
    }

    #[test]
    fn wavenumber_values() {
        let k1 = background_wavenumber(1e9, Complex::new(1.0, 0.0));
        assert!((k1.re - 2.0 * std::f64::consts::PI * 1e9 / SPEED_OF_LIGHT).abs() < 1e-12);
        assert!((k1.re - 20.958).abs() < 1e-3);
        let k4 = background_wavenumber(1e9, Complex::new(4.0, 0.0));
        assert!((k4 - k1 * 2.0).norm() < 1e-12);
        let lossy = background_wavenumber(1e9, Complex::new(4.0, -0.2));
        assert!(lossy.im < 0.0 && lossy.re > 0.0);
    }

    #[test]
    fn zero_contrast_is_zero_bscan() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 8, 8).unwrap();
        let map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, -0.1));
        let b = simulate_bscan(&map, &small_cfg(), &NoiseSpec::noiseless()).unwrap();
        assert!(b.data.iter().all(|z| *z == Complex::new(0.0, 0.0)));
    }

    #[test]
    fn single_pixel_single_frequency_matches_closed_form() {
        let g = ImagingGrid::new(0.0, 0.2, 0.05, 0.25, 2, 2).unwrap();
        let eps = Complex::new(5.0, -0.3);
        let mut map = ContrastMap::<f64>::zeros(g, eps);
        map.chi[3] = Complex::new(1.0, 0.0);
        let cfg = AcquisitionConfig { f_min_hz: 1_500_000_000, f_max_hz: 1_500_000_000, n_positions: 2, scan_length_m: 0.2, ..small_cfg() };
        let b = simulate_bscan(&map, &cfg, &NoiseSpec::noiseless()).unwrap();
        // Direct scalar evaluation of G(r)^2 dA.
        let (x, z) = g.center(3);
        let zh = z + cfg.antenna_height_m;
        let r = (x * x + zh * zh).sqrt();
        let k = eps.sqrt() * (2.0 * std::f64::consts::PI * 1.5e9 / SPEED_OF_LIGHT);
        let green = (-Complex::<f64>::i() * k * r).exp() / (4.0 * std::f64::consts::PI * r);
        let expected = green * green * g.pixel_area();
        assert!((b.data[(0, 0)] - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn clutter_only_is_rank_one() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 8, 8).unwrap();
        let map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, 0.0));
        let noise = NoiseSpec { snr_db: None, clutter_gain: 3.0, rng_seed: 1 };
        let b = simulate_bscan(&map, &small_cfg(), &noise).unwrap();
        let sv = b.data.clone().svd(false, false).singular_values;
        // gain * |c| * |1| = 3 * 1 * 3
        assert!((sv[0] - 9.0).abs() < 1e-12);
        assert!(sv[1] / sv[0] < 1e-10);
    }

    #[test]
    fn collocated_antenna_is_domain_error() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 2, 2).unwrap();
        let mut map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, 0.0));
        map.chi[0] = Complex::new(1.0, 0.0);
        let (x, z) = g.center(0);
        let aperture = Aperture { pos_m: vec![x], antenna_height_m: -z, ..Aperture::from_config(&small_cfg()).unwrap() };
        let err = simulate_on_aperture(&map, &aperture, &NoiseSpec::noiseless(), String::new());
        assert!(matches!(err, Err(crate::Error::Domain(_))));
    }

    #[test]
    fn noise_is_seeded_and_scaled() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 8, 8).unwrap();
        let mut map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, -0.1));
        map.chi[20] = Complex::new(1.0, 0.0);
        let clean = simulate_bscan(&map, &small_cfg(), &NoiseSpec::noiseless()).unwrap();
        let noise = NoiseSpec { snr_db: Some(20.0), clutter_gain: 0.0, rng_seed: 9 };
        let a = simulate_bscan(&map, &small_cfg(), &noise).unwrap();
        let b = simulate_bscan(&map, &small_cfg(), &noise).unwrap();
        assert_eq!(a, b);
        let diff = BScan::new(&a.data - &clean.data, a.freq_hz.clone(), a.pos_m.clone(), "").unwrap();
        let ratio_db = 20.0 * (clean.rms() / diff.rms()).log10();
        assert!((ratio_db - 20.0).abs() < 2.0, "{ratio_db}");
    }

    #[test]
    fn band_outside_span_is_config_error() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 4, 4).unwrap();
        let map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, 0.0));
        let band = Band { index: 0, f_start_hz: 900_000_000, f_stop_hz: 1_500_000_000 };
        assert!(matches!(slice_band(&map, &band, &small_cfg(), &NoiseSpec::noiseless()), Err(crate::Error::Config(_))));
    }

    #[test]
    fn bscan_bytes_roundtrip() {
        let g = ImagingGrid::new(0.0, 0.4, 0.0, 0.2, 8, 8).unwrap();
        let mut map = ContrastMap::<f64>::zeros(g, Complex::new(4.0, -0.1));
        map.chi[9] = Complex::new(0.5, 0.1);
        let b = simulate_bscan(&map, &small_cfg(), &NoiseSpec { snr_db: Some(10.0), clutter_gain: 1.0, rng_seed: 2 }).unwrap();
        let bytes = b.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"MWBS");
        assert!(bytes.len() > 16 + 11 * 9 * 16);
        let back = BScan::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(BScan::<f64>::from_bytes(&bytes[..20]).is_err());
    }
}
