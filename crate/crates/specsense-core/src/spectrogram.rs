//! Short-time DFT spectrogram with frequency-bin averaging.
//!
//! A capture of `N_s` IQ samples at rate `f_s` is cut into strides of
//! `N_w` samples. Each stride is multiplied by a Hamming window, transformed
//! with an `N_w`-point DFT normalized by `N_w`, squared, shifted so column 0
//! sits at `-f_s/2`, and finally averaged over groups of `z` adjacent bins.
//! The resulting time and frequency resolutions are `dt = N_w / f_s` and
//! `df = z / dt`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Matrix};

/// A raw IQ capture with its physical metadata.
#[derive(Debug, Clone)]
pub struct IqRecording {
    /// Complex baseband samples (dimensionless voltage).
    pub samples: Vec<Complex64>,
    /// Sample rate in Hz.
    pub sample_rate: f64,
    /// RF center frequency in Hz.
    pub center_frequency: f64,
}

impl IqRecording {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, center_frequency: f64) -> Result<Self> {
        if sample_rate <= 0.0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate, center_frequency })
    }

    /// Total capture span `(N_s - 1) / f_s` in seconds.
    pub fn time_span(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.samples.len() - 1) as f64 / self.sample_rate
        }
    }
}

/// Stride, DFT and averaging parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    /// Stride / Hamming window size `N_w` in samples.
    pub window_size: usize,
    /// Adjacent-bin averaging factor `z`. Must divide `window_size`.
    pub averaging_factor: usize,
    /// Fraction of the window shared by consecutive strides, in `[0, 1)`.
    /// The default of 0 gives non-overlapping strides.
    pub overlap: f64,
}

impl SpectrogramConfig {
    pub fn new(window_size: usize, averaging_factor: usize) -> Result<Self> {
        let cfg = Self { window_size, averaging_factor, overlap: 0.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidArgument("window size must be >= 1".into()));
        }
        if self.averaging_factor == 0 {
            return Err(Error::InvalidArgument("averaging factor must be >= 1".into()));
        }
        if self.window_size % self.averaging_factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "averaging factor {} does not divide DFT length {}",
                self.averaging_factor, self.window_size
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidArgument("overlap must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Number of averaged frequency bins per row, `N_f = N_w / z`.
    pub fn dft_points(&self) -> usize {
        self.window_size / self.averaging_factor
    }

    /// Time resolution `dt = N_w / f_s` in seconds.
    pub fn time_resolution(&self, sample_rate: f64) -> f64 {
        self.window_size as f64 / sample_rate
    }

    /// Frequency resolution `df = z * f_s / N_w` in Hz.
    pub fn freq_resolution(&self, sample_rate: f64) -> f64 {
        self.averaging_factor as f64 * sample_rate / self.window_size as f64
    }

    /// Samples advanced between consecutive strides.
    pub fn hop(&self) -> usize {
        (((1.0 - self.overlap) * self.window_size as f64).round() as usize).max(1)
    }
}

/// Whether PSD values are linear (W/Hz) or logarithmic (dBm/Hz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdUnits {
    /// Linear W/Hz. All detection math requires this.
    Linear,
    /// dBm/Hz, i.e. `10 log10(v / 1 mW/Hz)`.
    DbmPerHz,
}

/// Time-frequency power-spectral-density matrix with physical axes.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// PSD values, rows = time strides, columns = averaged frequency bins.
    pub values: Matrix<f64>,
    /// Physical time of each row (seconds from capture start, stride start).
    pub time_axis: Axis,
    /// Physical center frequency of each column in Hz.
    pub freq_axis: Axis,
    /// Total capture span `(N_s - 1) / f_s` in seconds.
    pub time_span: f64,
    /// RF center frequency in Hz.
    pub center_frequency: f64,
    /// Unit domain of `values`.
    pub units: PsdUnits,
}

impl Spectrogram {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Time resolution in seconds.
    pub fn dt(&self) -> f64 {
        self.time_axis.step
    }

    /// Frequency resolution in Hz.
    pub fn df(&self) -> f64 {
        self.freq_axis.step
    }

    /// Band edges `(low, high)` covered by the frequency axis, in Hz.
    pub fn band(&self) -> (f64, f64) {
        let half = self.freq_axis.step / 2.0;
        (self.freq_axis.value(0) - half, self.freq_axis.value(self.cols().saturating_sub(1)) + half)
    }
}

/// Standard symmetric Hamming window `0.54 - 0.46 cos(2 pi i / (n - 1))`.
pub fn hamming_window(length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidArgument("window length must be >= 1".into()));
    }
    if length == 1 {
        return Ok(vec![1.0]);
    }
    let denom = (length - 1) as f64;
    Ok((0..length)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect())
}

/// Compute the averaged PSD spectrogram of an IQ capture.
///
/// Strides shorter than one window at the tail are discarded. Rows are
/// independent and processed in parallel; the result is deterministic.
pub fn compute_spectrogram(iq: &IqRecording, cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n_w = cfg.window_size;
    if iq.samples.len() < n_w {
        return Err(Error::InsufficientData(format!(
            "capture of {} samples is shorter than one window of {n_w}",
            iq.samples.len()
        )));
    }
    let window = hamming_window(n_w)?;
    let hop = cfg.hop();
    let n_rows = (iq.samples.len() - n_w) / hop + 1;
    let z = cfg.averaging_factor;
    let n_f = cfg.dft_points();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_w);
    let norm = 1.0 / n_w as f64;
    let shift = n_w / 2; // fft-shift offset: column 0 ends up at -f_s/2

    let rows: Vec<Vec<f64>> = (0..n_rows)
        .into_par_iter()
        .map(|r| {
            let start = r * hop;
            let mut buf: Vec<Complex64> = iq.samples[start..start + n_w]
                .iter()
                .zip(window.iter())
                .map(|(s, w)| s * w)
                .collect();
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(&mut buf, &mut scratch);
            let mut out = vec![0.0; n_f];
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..z {
                    // shifted fine-bin index j*z + i maps to raw DFT bin
                    let raw = (j * z + i + shift) % n_w;
                    let v = buf[raw] * norm;
                    acc += v.norm_sqr();
                }
                *o = acc / z as f64;
            }
            out
        })
        .collect();

    let mut values = Matrix::zeros(n_rows, n_f);
    for (r, row) in rows.into_iter().enumerate() {
        values.row_mut(r).copy_from_slice(&row);
    }

    let dt = cfg.time_resolution(iq.sample_rate);
    let df = cfg.freq_resolution(iq.sample_rate);
    let fine = iq.sample_rate / n_w as f64;
    // center of averaged group j = mean of its z fine-bin frequencies
    let freq_start =
        iq.center_frequency - iq.sample_rate / 2.0 + (z as f64 - 1.0) / 2.0 * fine;

    Ok(Spectrogram {
        values,
        time_axis: Axis::new(0.0, dt * hop as f64 / n_w as f64),
        freq_axis: Axis::new(freq_start, df),
        time_span: iq.time_span(),
        center_frequency: iq.center_frequency,
        units: PsdUnits::Linear,
    })
}

/// Convert a linear spectrogram to dBm/Hz: `10 log10(v / scale)` where
/// `scale` is the linear value corresponding to 1 mW/Hz (`1e-3` when values
/// are in W/Hz).
pub fn to_dbm_per_hz(spec: &Spectrogram, scale: f64) -> Result<Spectrogram> {
    if spec.units != PsdUnits::Linear {
        return Err(Error::UnitMismatch("spectrogram is already in dB units".into()));
    }
    if scale <= 0.0 {
        return Err(Error::InvalidArgument("reference scale must be positive".into()));
    }
    if spec.values.as_slice().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "log conversion undefined for non-positive PSD values".into(),
        ));
    }
    let mut out = spec.clone();
    out.values = spec.values.map(|&v| 10.0 * (v / scale).log10());
    out.units = PsdUnits::DbmPerHz;
    Ok(out)
}

/// Inverse of [`to_dbm_per_hz`].
pub fn from_dbm_per_hz(spec: &Spectrogram, scale: f64) -> Result<Spectrogram> {
    if spec.units != PsdUnits::DbmPerHz {
        return Err(Error::UnitMismatch("spectrogram is not in dBm/Hz units".into()));
    }
    if scale <= 0.0 {
        return Err(Error::InvalidArgument("reference scale must be positive".into()));
    }
    let mut out = spec.clone();
    out.values = spec.values.map(|&v| scale * 10f64.powf(v / 10.0));
    out.units = PsdUnits::Linear;
    Ok(out)
}

/// Scalar dB conversions used at the CLI boundary.
pub fn watts_to_dbm(v: f64) -> f64 {
    10.0 * (v / 1e-3).log10()
}

pub fn dbm_to_watts(v: f64) -> f64 {
    1e-3 * 10f64.powf(v / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Direct-summation DFT of one windowed stride, averaged by z. This is
    /// the quadratic-time reference the FFT path must reproduce.
    fn naive_row(samples: &[Complex64], z: usize) -> Vec<f64> {
        let n = samples.len();
        let w = hamming_window(n).unwrap();
        let mut fine = vec![0.0; n];
        for (k, f) in fine.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (m, s) in samples.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k as f64) * (m as f64) / n as f64;
                acc += s * w[m] * Complex64::new(phase.cos(), phase.sin());
            }
            *f = (acc / n as f64).norm_sqr();
        }
        let shift = n / 2;
        let shifted: Vec<f64> = (0..n).map(|i| fine[(i + shift) % n]).collect();
        shifted.chunks(z).map(|c| c.iter().sum::<f64>() / z as f64).collect()
    }

    fn tone(fs: f64, f0: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * f0 * i as f64 / fs;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect()
    }

    #[test]
    fn hamming_degenerate_and_small() {
        assert_eq!(hamming_window(1).unwrap(), vec![1.0]);
        let w = hamming_window(3).unwrap();
        assert_relative_eq!(w[0], 0.08, max_relative = 1e-12);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(w[2], 0.08, max_relative = 1e-12);
        assert!(hamming_window(0).is_err());
    }

    #[test]
    fn hamming_paper_window_symmetric_and_bounded() {
        let w = hamming_window(15000).unwrap();
        assert_eq!(w.len(), 15000);
        for i in 0..w.len() / 2 {
            assert_relative_eq!(w[i], w[w.len() - 1 - i], max_relative = 1e-12);
        }
        assert!(w.iter().all(|&v| (0.08 - 1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn paper_parameter_identities() {
        let cfg = SpectrogramConfig::new(15000, 10).unwrap();
        let fs = 30e6;
        assert_eq!(cfg.time_resolution(fs), 0.5e-3);
        assert_eq!(cfg.freq_resolution(fs), 20e3);
        assert_eq!(cfg.dft_points(), 1500);
        assert_eq!(cfg.time_resolution(fs) * fs, 15000.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SpectrogramConfig::new(0, 1).is_err());
        assert!(SpectrogramConfig::new(100, 0).is_err());
        assert!(SpectrogramConfig::new(100, 7).is_err());
        let mut cfg = SpectrogramConfig::new(100, 4).unwrap();
        cfg.overlap = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn short_capture_rejected() {
        let iq = IqRecording::new(vec![Complex64::default(); 50], 1e6, 0.0).unwrap();
        let cfg = SpectrogramConfig::new(64, 1).unwrap();
        assert!(matches!(compute_spectrogram(&iq, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_input_gives_zero_spectrogram() {
        let iq = IqRecording::new(vec![Complex64::default(); 512], 1e6, 0.0).unwrap();
        let cfg = SpectrogramConfig::new(128, 4).unwrap();
        let spec = compute_spectrogram(&iq, &cfg).unwrap();
        assert_eq!(spec.rows(), 4);
        assert!(spec.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_dft_oracle() {
        let fs = 1.0e6;
        let n_w = 128;
        let z = 4;
        // deterministic pseudo-random-ish signal
        let samples: Vec<Complex64> = (0..n_w)
            .map(|i| {
                let x = (i as f64 * 0.7391).sin() + 0.3 * (i as f64 * 2.13).cos();
                let y = (i as f64 * 1.177).cos();
                Complex64::new(x, y)
            })
            .collect();
        let iq = IqRecording::new(samples.clone(), fs, 0.0).unwrap();
        let cfg = SpectrogramConfig::new(n_w, z).unwrap();
        let spec = compute_spectrogram(&iq, &cfg).unwrap();
        let oracle = naive_row(&samples, z);
        assert_eq!(spec.cols(), oracle.len());
        for (a, b) in spec.values.row(0).iter().zip(oracle.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-15);
        }
    }

    #[test]
    fn bin_centered_tone_dominates_by_40_db() {
        // Tone at a fine-bin center, placed mid-group so the only large DFT
        // values (the bin and its two +-1 neighbors from the symmetric
        // window) fall in one averaged bin; the rest is Hamming leakage.
        let fs = 1.024e6;
        let n_w = 1024;
        let z = 4;
        let fine = fs / n_w as f64;
        let k0: i64 = 102; // (k0 + n_w/2) % z == 2, mid-group
        assert_eq!((k0 + n_w as i64 / 2).rem_euclid(z as i64), z as i64 / 2);
        let f0 = k0 as f64 * fine;
        let iq = IqRecording::new(tone(fs, f0, n_w), fs, 0.0).unwrap();
        let cfg = SpectrogramConfig::new(n_w, z).unwrap();
        let spec = compute_spectrogram(&iq, &cfg).unwrap();
        let row = spec.values.row(0);
        let (peak_idx, peak) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))
            .unwrap();
        // dominant averaged bin contains f0
        assert!((spec.freq_axis.value(peak_idx) - f0).abs() <= spec.df() / 2.0);
        for (i, &v) in row.iter().enumerate() {
            if i != peak_idx {
                assert!(
                    10.0 * (peak / v.max(f64::MIN_POSITIVE)).log10() >= 40.0,
                    "bin {i} only {:.1} dB below peak",
                    10.0 * (peak / v).log10()
                );
            }
        }
    }

    #[test]
    fn averaging_conserves_mean_power() {
        let fs = 1.0e6;
        let samples: Vec<Complex64> = (0..256)
            .map(|i| Complex64::new((i as f64 * 0.913).sin(), (i as f64 * 0.311).cos()))
            .collect();
        let iq = IqRecording::new(samples, fs, 0.0).unwrap();
        let avg = compute_spectrogram(&iq, &SpectrogramConfig::new(256, 8).unwrap()).unwrap();
        let raw = compute_spectrogram(&iq, &SpectrogramConfig::new(256, 1).unwrap()).unwrap();
        let mean = |s: &Spectrogram| {
            s.values.row(0).iter().sum::<f64>() / s.cols() as f64
        };
        assert_relative_eq!(mean(&avg), mean(&raw), max_relative = 1e-9);
    }

    #[test]
    fn tone_maps_back_to_input_frequency() {
        let fs = 2.0e6;
        let fc = 915e6;
        let n_w = 512;
        let f0_baseband = 123.0 * fs / n_w as f64; // not necessarily group-centered
        let iq = IqRecording::new(tone(fs, f0_baseband, 2 * n_w), fs, fc).unwrap();
        let spec = compute_spectrogram(&iq, &SpectrogramConfig::new(n_w, 4).unwrap()).unwrap();
        let row = spec.values.row(0);
        let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((spec.freq_axis.value(peak) - (fc + f0_baseband)).abs() <= spec.df() / 2.0);
    }

    #[test]
    fn db_roundtrip_within_1e12() {
        let mut values = Matrix::zeros(2, 3);
        for (i, v) in [1e-17, 3.2e-15, 7.7e-13, 1e-12, 4.4e-18, 9.9e-16].iter().enumerate() {
            values.set(i / 3, i % 3, *v);
        }
        let spec = Spectrogram {
            values,
            time_axis: Axis::new(0.0, 1e-3),
            freq_axis: Axis::new(0.0, 1e3),
            time_span: 2e-3,
            center_frequency: 0.0,
            units: PsdUnits::Linear,
        };
        let db = to_dbm_per_hz(&spec, 1e-3).unwrap();
        let back = from_dbm_per_hz(&db, 1e-3).unwrap();
        for (a, b) in back.values.as_slice().iter().zip(spec.values.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // identities
        assert_relative_eq!(watts_to_dbm(1e-3), 0.0, epsilon = 1e-12);
        assert_relative_eq!(watts_to_dbm(1e-2), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn db_conversion_rejects_non_positive() {
        let spec = Spectrogram {
            values: Matrix::zeros(1, 2),
            time_axis: Axis::new(0.0, 1e-3),
            freq_axis: Axis::new(0.0, 1e3),
            time_span: 1e-3,
            center_frequency: 0.0,
            units: PsdUnits::Linear,
        };
        assert!(to_dbm_per_hz(&spec, 1e-3).is_err());
    }
}
