use serde::{Deserialize, Serialize};

use crate::dataset::{mix_seed, BandImager, MoistureClassSet};
use crate::error::{domain, Result};
use crate::imaging::Image;
use crate::learn::{predict_sm, Classifier};
use crate::scene::MoistRegion;

/// `y = slope * t + intercept`, slope per minute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn at(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    pub fn residual_sum_of_squares(&self, ts: &[f64], ys: &[f64]) -> f64 {
        ts.iter().zip(ys).map(|(&t, &y)| (y - self.at(t)).powi(2)).sum()
    }
}

/// Ordinary least-squares line through `(ts[i], ys[i])`.
pub fn ols_fit(ts: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if ts.len() != ys.len() {
        return Err(domain(format!("{} times for {} values", ts.len(), ys.len())));
    }
    if ts.len() < 2 {
        return Err(domain("a line fit needs at least two points"));
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("all sample times coincide"));
    }
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit { slope, intercept: y_mean - slope * t_mean })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakTrack {
    pub times_min: Vec<f64>,
    pub sm_estimates: Vec<f64>,
    pub fit: LinearFit,
    pub reference_sm: Option<f64>,
}

impl LeakTrack {
    pub fn from_estimates(times_min: Vec<f64>, sm_estimates: Vec<f64>, reference_sm: Option<f64>) -> Result<Self> {
        let fit = ols_fit(&times_min, &sm_estimates)?;
        Ok(Self { times_min, sm_estimates, fit, reference_sm })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_min,sm_estimate,sm_fit\n");
        for (&t, &y) in self.times_min.iter().zip(&self.sm_estimates) {
            out.push_str(&format!("{t},{y:.6},{:.6}\n", self.fit.at(t)));
        }
        out
    }
}

/// Averages per-band predictions at each time and fits a line through the series.
pub fn track_leak<C: Classifier<f64> + ?Sized>(
    times_min: &[f64],
    scans: &[Vec<Image<f64>>],
    model: &C,
    classes: &MoistureClassSet,
    expected_bands: usize,
    reference_sm: Option<f64>,
) -> Result<LeakTrack> {
    if times_min.len() != scans.len() {
        return Err(domain(format!("{} times for {} scans", times_min.len(), scans.len())));
    }
    if scans.len() < 2 {
        return Err(domain("tracking needs at least two scans"));
    }
    let estimates = scans
        .iter()
        .map(|images| predict_sm(model, images, classes, expected_bands))
        .collect::<Result<Vec<_>>>()?;
    LeakTrack::from_estimates(times_min.to_vec(), estimates, reference_sm)
}

/// A leak spreading from the pipe: a moist region centred on the pipe whose radius grows per scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakScenario {
    pub times_min: Vec<f64>,
    pub sm_fraction: f64,
    pub initial_radius_m: f64,
    pub radius_growth_m: f64,
}

impl Default for LeakScenario {
    /// Eleven scans, fourteen minutes apart.
    fn default() -> Self {
        Self { times_min: (1..=11).map(|i| 14.0 * i as f64).collect(), sm_fraction: 0.5, initial_radius_m: 0.03, radius_growth_m: 0.004 }
    }
}

impl LeakScenario {
    /// Per-band images for each time point.
    pub fn scans(&self, imager: &BandImager, seed: u64) -> Result<Vec<Vec<Image<f64>>>> {
        let template = &imager.pipeline.scene;
        let x = imager.acquisition.scan_length_m / 2.0;
        self.times_min
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut scene = template.scene(&imager.acquisition, self.sm_fraction, seed);
                scene.moist_region = Some(MoistRegion {
                    center_x_m: x,
                    center_z_m: template.pipe_depth_m,
                    radius_m: self.initial_radius_m + self.radius_growth_m * i as f64,
                    sm_fraction: self.sm_fraction,
                });
                imager.images_for_scene(&scene, mix_seed(seed, i as u64))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_slope() {
        let fit = ols_fit(&[1.0, 2.0, 5.0], &[0.3, 0.3, 0.3]).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert!((fit.intercept - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let fit = ols_fit(&[14.0, 154.0], &[0.33, 0.21]).unwrap();
        assert!((fit.at(14.0) - 0.33).abs() < 1e-14);
        assert!((fit.at(154.0) - 0.21).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols_fit(&[1.0], &[1.0]).is_err());
        assert!(ols_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(ols_fit(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let track = LeakTrack::from_estimates(vec![0.0, 1.0], vec![0.5, 0.25], Some(0.22)).unwrap();
        assert_eq!(track.to_csv().lines().count(), 3);
    }
}
