//! Layered configuration: built-in defaults matching the reference
//! measurement setup, overridden by a TOML file, overridden by flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use specsense_core::simulator::{Dist, FadingMode, TrafficSpec};

/// Spectrogram section. Defaults: 15000-sample Hamming strides, averaging
/// by 10, no overlap (30 MHz capture -> 0.5 ms / 20 kHz resolution).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramSection {
    pub window_size: usize,
    pub averaging_factor: usize,
    pub overlap: f64,
}

impl Default for SpectrogramSection {
    fn default() -> Self {
        Self { window_size: 15000, averaging_factor: 10, overlap: 0.0 }
    }
}

/// Detection section. Default false-alarm target 1e-6.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub pfa: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self { pfa: 1e-6 }
    }
}

/// Clustering section. Default frequency scaling 0.5 for a
/// [0.5 ms, 20 kHz] grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub delta: f64,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self { delta: 0.5 }
    }
}

/// Frame extraction section. Default quartile-fence multiplier 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesSection {
    pub kappa: f64,
    /// Frame-matching overlap fraction used when scoring against truth.
    pub min_overlap: f64,
}

impl Default for FramesSection {
    fn default() -> Self {
        Self { kappa: 2.0, min_overlap: 0.5 }
    }
}

/// Sense section: block processing. 0 processes the capture in one piece.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SenseSection {
    pub block_rows: usize,
}

impl Default for SenseSection {
    fn default() -> Self {
        Self { block_rows: 0 }
    }
}

/// Model-fitting section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Autocorrelation horizon in seconds.
    pub max_lag_s: f64,
    /// Number of sub-band widths for the arrival-rate fit.
    pub sub_band_count: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { max_lag_s: 50e-3, sub_band_count: 10 }
    }
}

/// Simulation section; converts into a [`TrafficSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub arrival_rate: f64,
    pub toa: Dist,
    pub bandwidth: Dist,
    pub snr_db: f64,
    pub fading: FadingMode,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub duration_s: f64,
    pub noise_floor_dbm_per_hz: f64,
    pub time_resolution_s: f64,
    pub freq_resolution_hz: f64,
    pub seed: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            arrival_rate: 57.86,
            toa: Dist::Uniform { lo: 50e-3, hi: 400e-3 },
            bandwidth: Dist::Uniform { lo: 40e3, hi: 200e3 },
            snr_db: 10.0,
            fading: FadingMode::RayleighPerCell,
            band_low_hz: 915e6,
            band_high_hz: 928e6,
            duration_s: 10.0,
            noise_floor_dbm_per_hz: -154.0,
            time_resolution_s: 0.5e-3,
            freq_resolution_hz: 20e3,
            seed: 1,
        }
    }
}

impl SimulateSection {
    pub fn to_spec(&self) -> TrafficSpec {
        TrafficSpec {
            arrival_rate: self.arrival_rate,
            toa: self.toa,
            bandwidth: self.bandwidth,
            snr: 10f64.powf(self.snr_db / 10.0),
            fading: self.fading,
            band: (self.band_low_hz, self.band_high_hz),
            duration: self.duration_s,
            noise_psd: 1e-3 * 10f64.powf(self.noise_floor_dbm_per_hz / 10.0),
            time_resolution: self.time_resolution_s,
            freq_resolution: self.freq_resolution_hz,
            seed: self.seed,
        }
    }
}

/// ROC section: SNR grid and false-alarm targets converted to thresholds
/// via the exponential noise model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocSection {
    pub snrs_db: Vec<f64>,
    pub pfa_targets: Vec<f64>,
}

impl Default for RocSection {
    fn default() -> Self {
        Self {
            snrs_db: vec![-5.0, 0.0, 5.0],
            pfa_targets: vec![0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4],
        }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub spectrogram: SpectrogramSection,
    pub detection: DetectionSection,
    pub clustering: ClusteringSection,
    pub frames: FramesSection,
    pub sense: SenseSection,
    pub model: ModelSection,
    pub simulate: SimulateSection,
    pub roc: RocSection,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}
