//! Scan geometry, frequency grids and the multi-band plan.
//!
//! Frequencies are carried as integer hertz so grid point counts are exact.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Hardware settings recorded with a run. They never scale the simulated field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMetadata {
    pub tx_power_dbm: f64,
    pub gain_tx_db: f64,
    pub gain_rx_db: f64,
    pub gain_lna_db: f64,
    pub scan_duration_min: f64,
}

impl Default for AcquisitionMetadata {
    fn default() -> Self {
        Self { tx_power_dbm: 15.0, gain_tx_db: 7.0, gain_rx_db: 7.0, gain_lna_db: 21.0, scan_duration_min: 14.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub scan_length_m: f64,
    pub n_positions: usize,
    pub f_min_hz: u64,
    pub f_max_hz: u64,
    pub f_step_hz: u64,
    #[serde(default)]
    pub antenna_height_m: f64,
    #[serde(default)]
    pub metadata: AcquisitionMetadata,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl AcquisitionConfig {
    /// The laboratory reference setup: 1.2 m line, 45 positions, 1.2-3.775 GHz in 25 MHz steps.
    pub fn reference() -> Self {
        Self {
            scan_length_m: 1.2,
            n_positions: 45,
            f_min_hz: 1_200_000_000,
            f_max_hz: 3_775_000_000,
            f_step_hz: 25_000_000,
            antenna_height_m: 0.0,
            metadata: AcquisitionMetadata::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.f_step_hz == 0 {
            return Err(config("f_step_hz must be positive"));
        }
        if self.f_min_hz == 0 || self.f_min_hz > self.f_max_hz {
            return Err(config(format!(
                "frequency span [{}, {}] Hz is invalid",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if !(self.f_max_hz - self.f_min_hz).is_multiple_of(self.f_step_hz) {
            return Err(config(format!(
                "span {}-{} Hz is not a whole number of {} Hz steps",
                self.f_min_hz, self.f_max_hz, self.f_step_hz
            )));
        }
        if self.n_positions < 2 {
            return Err(config("need at least two scan positions"));
        }
        if !(self.scan_length_m > 0.0) || !self.scan_length_m.is_finite() {
            return Err(config("scan_length_m must be positive"));
        }
        if !(self.antenna_height_m >= 0.0) || !self.antenna_height_m.is_finite() {
            return Err(config("antenna_height_m must be >= 0"));
        }
        Ok(())
    }

    pub fn n_frequencies(&self) -> Result<usize> {
        self.validate()?;
        Ok(((self.f_max_hz - self.f_min_hz) / self.f_step_hz) as usize + 1)
    }

    /// `f_min, f_min + step, ..., f_max`.
    pub fn frequency_grid(&self) -> Result<Vec<f64>> {
        let n = self.n_frequencies()?;
        Ok((0..n as u64).map(|i| (self.f_min_hz + i * self.f_step_hz) as f64).collect())
    }

    /// `n_positions` uniformly spaced points over `[0, scan_length_m]`.
    pub fn scan_positions(&self) -> Vec<f64> {
        let last = (self.n_positions.max(2) - 1) as f64;
        (0..self.n_positions).map(|a| self.scan_length_m * a as f64 / last).collect()
    }

    /// Copy of this config restricted to `[f_start_hz, f_stop_hz]`.
    pub fn with_span(&self, f_start_hz: u64, f_stop_hz: u64) -> Self {
        Self { f_min_hz: f_start_hz, f_max_hz: f_stop_hz, ..*self }
    }

    /// Replaces the step and trims `f_max` down to the last whole step.
    pub fn with_step_snapped(&self, f_step_hz: u64) -> Result<Self> {
        if f_step_hz == 0 {
            return Err(config("f_step_hz must be positive"));
        }
        let n_steps = (self.f_max_hz - self.f_min_hz) / f_step_hz;
        Ok(Self { f_step_hz, f_max_hz: self.f_min_hz + n_steps * f_step_hz, ..*self })
    }
}

/// One sub-band of a [`BandPlan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub index: usize,
    pub f_start_hz: u64,
    pub f_stop_hz: u64,
}

impl Band {
    pub fn bandwidth_hz(&self) -> u64 {
        self.f_stop_hz - self.f_start_hz
    }

    /// The acquisition restricted to this band, stepping from the band's own start.
    pub fn config(&self, base: &AcquisitionConfig) -> AcquisitionConfig {
        base.with_span(self.f_start_hz, self.f_stop_hz)
    }
}

/// Equal-bandwidth windows sliding by `band_spacing_hz` from the low end to the high end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub n_bands: usize,
    pub band_spacing_hz: u64,
    pub f_step_hz: u64,
    pub bands: Vec<Band>,
}

impl BandPlan {
    pub fn bandwidth_hz(&self) -> u64 {
        self.bands.first().map_or(0, Band::bandwidth_hz)
    }

    pub fn points_per_band(&self) -> usize {
        (self.bandwidth_hz() / self.f_step_hz) as usize + 1
    }

    /// Keeps only the bands at the given positions; band indices are preserved.
    pub fn subset(&self, keep: impl IntoIterator<Item = usize>) -> Result<Self> {
        let bands: Vec<Band> = keep
            .into_iter()
            .map(|b| self.bands.get(b).copied().ok_or_else(|| config(format!("band {b} not in plan"))))
            .collect::<Result<_>>()?;
        if bands.is_empty() {
            return Err(config("band subset is empty"));
        }
        Ok(Self { n_bands: self.n_bands, bands, ..*self })
    }
}

pub fn make_band_plan(cfg: &AcquisitionConfig, n_bands: usize, band_spacing_hz: u64) -> Result<BandPlan> {
    cfg.validate()?;
    if n_bands == 0 {
        return Err(config("n_bands must be at least 1"));
    }
    let span = cfg.f_max_hz - cfg.f_min_hz;
    let offset = (n_bands as u64 - 1)
        .checked_mul(band_spacing_hz)
        .ok_or_else(|| config("band offsets overflow"))?;
    if offset >= span && n_bands > 1 {
        return Err(config(format!(
            "{n_bands} bands spaced {band_spacing_hz} Hz leave no bandwidth in a {span} Hz span"
        )));
    }
    let bandwidth = span - offset;
    if n_bands > 1 && bandwidth < band_spacing_hz {
        return Err(config(format!(
            "bands {bandwidth} Hz wide spaced {band_spacing_hz} Hz apart leave gaps in the span"
        )));
    }
    if !bandwidth.is_multiple_of(cfg.f_step_hz) {
        return Err(config(format!(
            "band width {bandwidth} Hz is not a whole number of {} Hz steps",
            cfg.f_step_hz
        )));
    }
    let bands = (0..n_bands)
        .map(|b| {
            let start = cfg.f_min_hz + b as u64 * band_spacing_hz;
            Band { index: b, f_start_hz: start, f_stop_hz: start + bandwidth }
        })
        .collect();
    Ok(BandPlan { n_bands, band_spacing_hz, f_step_hz: cfg.f_step_hz, bands })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid_has_104_points() {
        let grid = AcquisitionConfig::reference().frequency_grid().unwrap();
        assert_eq!(grid.len(), 104);
        assert_eq!(grid[0], 1.2e9);
        assert_eq!(*grid.last().unwrap(), 3.775e9);
    }

    #[test]
    fn degenerate_and_small_grids() {
        let single = AcquisitionConfig { f_min_hz: 2_000_000_000, f_max_hz: 2_000_000_000, f_step_hz: 7, ..AcquisitionConfig::reference() };
        assert_eq!(single.frequency_grid().unwrap(), vec![2.0e9]);
        let three = AcquisitionConfig { f_min_hz: 1_000_000_000, f_max_hz: 2_000_000_000, f_step_hz: 500_000_000, ..AcquisitionConfig::reference() };
        assert_eq!(three.frequency_grid().unwrap(), vec![1.0e9, 1.5e9, 2.0e9]);
    }

    #[test]
    fn non_integer_point_count_is_config_error() {
        let cfg = AcquisitionConfig { f_step_hz: 75_000_000, ..AcquisitionConfig::reference() };
        assert!(matches!(cfg.frequency_grid(), Err(crate::Error::Config(_))));
        let snapped = cfg.with_step_snapped(75_000_000).unwrap();
        assert_eq!(snapped.f_max_hz, 3_750_000_000);
        assert_eq!(snapped.frequency_grid().unwrap().len(), 35);
    }

    #[test]
    fn scan_positions_span_the_line() {
        let pos = AcquisitionConfig::reference().scan_positions();
        assert_eq!(pos.len(), 45);
        assert!((pos[1] - 1.2 / 44.0).abs() < 1e-15);
        assert!((pos[1] - 0.02727).abs() < 1e-5);
        assert_eq!(pos[44], 1.2);
        let short = AcquisitionConfig { scan_length_m: 0.6, n_positions: 23, ..AcquisitionConfig::reference() };
        let pos = short.scan_positions();
        assert_eq!((pos.len(), pos[0], pos[22]), (23, 0.0, 0.6));
        let two = AcquisitionConfig { n_positions: 2, ..AcquisitionConfig::reference() };
        assert_eq!(two.scan_positions(), vec![0.0, 1.2]);
    }

    #[test]
    fn reference_band_plan() {
        let plan = make_band_plan(&AcquisitionConfig::reference(), 16, 10_000_000).unwrap();
        assert_eq!(plan.bands[0].f_start_hz, 1_200_000_000);
        assert_eq!(plan.bands[0].f_stop_hz, 3_625_000_000);
        assert_eq!(plan.bands[15].f_start_hz, 1_350_000_000);
        assert_eq!(plan.bands[15].f_stop_hz, 3_775_000_000);
        assert_eq!(plan.bandwidth_hz(), 2_425_000_000);
        assert_eq!(plan.points_per_band(), 98);
        for w in plan.bands.windows(2) {
            assert!(w[1].f_start_hz > w[0].f_start_hz);
            assert_eq!(w[1].bandwidth_hz(), w[0].bandwidth_hz());
        }
    }

    #[test]
    fn single_band_is_full_span() {
        let cfg = AcquisitionConfig::reference();
        let plan = make_band_plan(&cfg, 1, 10_000_000).unwrap();
        assert_eq!((plan.bands[0].f_start_hz, plan.bands[0].f_stop_hz), (cfg.f_min_hz, cfg.f_max_hz));
    }

    #[test]
    fn wide_spacing_bandwidth() {
        let plan = make_band_plan(&AcquisitionConfig::reference(), 16, 50_000_000).unwrap();
        assert_eq!(plan.bandwidth_hz(), 1_825_000_000);
        assert!(make_band_plan(&AcquisitionConfig::reference(), 16, 200_000_000).is_err());
    }

    #[test]
    fn gaps_between_bands_are_rejected() {
        let cfg = AcquisitionConfig { f_min_hz: 100_000_000, f_max_hz: 185_000_000, f_step_hz: 5_000_000, ..AcquisitionConfig::reference() };
        assert!(matches!(make_band_plan(&cfg, 4, 60_000_000), Err(crate::Error::Config(_))));
        assert!(make_band_plan(&cfg, 4, 20_000_000).is_ok());
    }

    #[test]
    fn config_json_uses_integer_hertz() {
        let json = serde_json::to_string(&AcquisitionConfig::reference()).unwrap();
        assert!(json.contains("\"f_min_hz\":1200000000"), "{json}");
        let back: AcquisitionConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, AcquisitionConfig::reference());
    }
}
