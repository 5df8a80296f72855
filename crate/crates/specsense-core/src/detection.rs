//! Energy detection: noise calibration, threshold selection and
//! binarization into the observed occupancy matrix.
//!
//! The threshold comes from the empirical CDF of a terminated-input noise
//! capture, so the false-alarm guarantee holds for the measured noise (which
//! after z-bin averaging is not exponential). The exponential closed forms
//! are kept alongside for the simulator and the ROC oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Matrix};
use crate::spectrogram::{PsdUnits, Spectrogram};

/// Minimum pooled sample count accepted for calibration.
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

/// Pooled noise statistics from a terminated-input capture.
///
/// Samples are pooled across all frequency bins: over a band this narrow the
/// noise PSD is flat, and pooling maximizes the ECDF resolution.
#[derive(Debug, Clone)]
pub struct NoiseCalibration {
    sorted: Vec<f64>,
    mean: f64,
    rejected: usize,
}

impl NoiseCalibration {
    /// Build directly from raw linear PSD samples. Non-finite samples are
    /// dropped and counted in [`NoiseCalibration::rejected`].
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut sorted = Vec::new();
        let mut rejected = 0usize;
        for v in samples {
            if v.is_finite() {
                sorted.push(v);
            } else {
                rejected += 1;
            }
        }
        if sorted.is_empty() {
            return Err(Error::InsufficientData("calibration capture is empty".into()));
        }
        if sorted.len() < MIN_CALIBRATION_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "calibration needs >= {MIN_CALIBRATION_SAMPLES} samples, got {}",
                sorted.len()
            )));
        }
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        Ok(Self { sorted, mean, rejected })
    }

    /// Mean noise power sigma^2 (linear W/Hz).
    pub fn mean_power(&self) -> f64 {
        self.mean
    }

    /// Number of non-finite samples dropped during construction.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Sorted calibration samples.
    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous empirical CDF `P(X <= v)`. With no censoring the
    /// product-limit estimator reduces to exactly this step function.
    pub fn cdf(&self, v: f64) -> f64 {
        let n = self.sorted.partition_point(|&s| s <= v);
        n as f64 / self.sorted.len() as f64
    }

    /// Empirical complementary CDF `P(X > v)`.
    pub fn ccdf(&self, v: f64) -> f64 {
        1.0 - self.cdf(v)
    }
}

/// Pool every cell of a linear-unit noise spectrogram into a calibration.
pub fn calibrate_noise(noise_capture: &Spectrogram) -> Result<NoiseCalibration> {
    if noise_capture.units != PsdUnits::Linear {
        return Err(Error::UnitMismatch("calibration requires linear-unit PSD".into()));
    }
    NoiseCalibration::from_samples(noise_capture.values.as_slice().iter().copied())
}

/// A selected detection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Threshold in linear W/Hz.
    pub value: f64,
    /// Set when the target false-alarm probability is below `1/n`: the
    /// threshold is then the sample maximum and the target cannot be
    /// verified from the calibration data alone.
    pub unverifiable: bool,
}

/// Smallest calibration value whose empirical exceedance probability is at
/// most `p_f` (the empirical `(1 - p_f)` quantile, higher-interpolation
/// convention). The empirical false-alarm rate on the calibration set is
/// then guaranteed `<= p_f`.
pub fn threshold_from_pfa(cal: &NoiseCalibration, p_f: f64) -> Result<Threshold> {
    if !(0.0 < p_f && p_f < 1.0) {
        return Err(Error::InvalidArgument(format!("p_f must lie in (0, 1), got {p_f}")));
    }
    let n = cal.sorted.len();
    let allowed = (n as f64 * p_f).floor() as usize; // exceedances tolerated
    let idx = n - 1 - allowed.min(n - 1);
    Ok(Threshold { value: cal.sorted[idx], unverifiable: p_f < 1.0 / n as f64 })
}

/// Exponential-noise false-alarm probability `exp(-theta / sigma^2)`.
///
/// Exact for AWGN whose per-bin power is exponential; the measured,
/// z-averaged noise floor deviates from this, which is why the empirical
/// path above is the default for real captures.
pub fn analytic_pfa(theta: f64, sigma2: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::InvalidArgument("theta must be >= 0".into()));
    }
    if sigma2 <= 0.0 {
        return Err(Error::InvalidArgument("sigma^2 must be > 0".into()));
    }
    Ok((-theta / sigma2).exp())
}

/// Per-bin detection probability for a Rayleigh-faded signal of mean linear
/// SNR `gamma` in exponential noise: `exp(-theta / (sigma^2 (1 + gamma)))`.
///
/// Equals `p_f^(1/(1+gamma))`; at `gamma = 0` it reduces to [`analytic_pfa`]
/// and it increases toward 1 as `gamma` grows. Misdetection is `1 - p_d`.
pub fn analytic_pd_rayleigh(theta: f64, sigma2: f64, gamma: f64) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument("gamma must be >= 0".into()));
    }
    if theta <= 0.0 || sigma2 <= 0.0 {
        return Err(Error::InvalidArgument("theta and sigma^2 must be > 0".into()));
    }
    Ok((-theta / (sigma2 * (1.0 + gamma))).exp())
}

/// Whether a binary grid holds the observed occupancy `B` (raw energy
/// detection), the estimated occupancy `O` (after clustering and
/// reinforcement), or simulator ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Observed,
    Estimated,
    Truth,
}

/// Binary occupancy matrix sharing the axes of the spectrogram it came from.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    /// Cells, 1 = busy. Same shape and axes as the source spectrogram.
    pub bits: Matrix<u8>,
    /// Threshold used to produce the grid, linear W/Hz.
    pub threshold: f64,
    pub kind: GridKind,
    pub time_axis: Axis,
    pub freq_axis: Axis,
    /// Total capture span in seconds.
    pub time_span: f64,
}

impl OccupancyGrid {
    pub fn rows(&self) -> usize {
        self.bits.rows()
    }

    pub fn cols(&self) -> usize {
        self.bits.cols()
    }

    /// Number of busy cells.
    pub fn ones(&self) -> usize {
        self.bits.as_slice().iter().filter(|&&b| b != 0).count()
    }

    /// Band edges `(low, high)` in Hz.
    pub fn band(&self) -> (f64, f64) {
        let half = self.freq_axis.step / 2.0;
        (
            self.freq_axis.value(0) - half,
            self.freq_axis.value(self.cols().saturating_sub(1)) + half,
        )
    }
}

/// Cellwise comparison `X[n,k] >= theta` (ties count as busy).
///
/// `theta` must be in the same linear units as the spectrogram; dB-domain
/// spectrograms are rejected outright.
pub fn binarize(spec: &Spectrogram, theta: f64) -> Result<OccupancyGrid> {
    if spec.units != PsdUnits::Linear {
        return Err(Error::UnitMismatch(
            "binarize requires a linear-unit spectrogram and threshold".into(),
        ));
    }
    Ok(OccupancyGrid {
        bits: spec.values.map(|&v| u8::from(v >= theta)),
        threshold: theta,
        kind: GridKind::Observed,
        time_axis: spec.time_axis,
        freq_axis: spec.freq_axis,
        time_span: spec.time_span,
    })
}
