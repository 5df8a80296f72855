//! Synthetic captures with known ground truth.
//!
//! Traffic is a homogeneous Poisson arrival process of rectangular frames
//! with configurable time-on-air and bandwidth distributions. The PSD is
//! synthesized directly in the power domain: idle cells are exponential
//! with mean `sigma^2`; a cell covered by frames of total linear SNR
//! `gamma` is a single exponential draw with mean `sigma^2 (1 + gamma)`,
//! which is exactly the Rayleigh-faded-signal-plus-noise power law that the
//! closed-form detection probability describes. A per-frame block-fading
//! mode and a no-fading mode (constant signal power added to exponential
//! noise) are available for frame-level studies.
//!
//! Everything is driven by independent ChaCha streams derived from one
//! seed: identical spec and seed give bit-identical traffic and PSD.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Uniform};
use serde::{Deserialize, Serialize};

use crate::clustering::auto_cluster;
use crate::detection::{binarize, OccupancyGrid};
use crate::error::{Error, Result};
use crate::frames::{estimate_occupancy, FrameSet};
use crate::grid::{Axis, Matrix};
use crate::spectrogram::{PsdUnits, Spectrogram};

/// A scalar sampling distribution for frame parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Dist {
    /// Always the same value.
    Fixed { value: f64 },
    /// Uniform over `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Exponential with the given mean.
    Exponential { mean: f64 },
}

impl Dist {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Fixed { value } => value,
            Dist::Uniform { lo, hi } => rng.gen::<f64>() * (hi - lo) + lo,
            Dist::Exponential { mean } => {
                let u: f64 = rng.sample(Exp1);
                u * mean
            }
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Dist::Fixed { value } => value > 0.0,
            Dist::Uniform { lo, hi } => lo > 0.0 && hi >= lo,
            Dist::Exponential { mean } => mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{what} distribution must be positive")))
        }
    }
}

/// How the injected signal power fluctuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// Independent Rayleigh draw per cell: busy-cell power is exponential
    /// with mean `sigma^2 (1 + gamma)`. Matches the per-bin closed forms.
    RayleighPerCell,
    /// One Rayleigh power draw per frame; cells inside share the faded
    /// mean `sigma^2 (1 + gamma E)`.
    RayleighPerFrame,
    /// Constant signal power `gamma sigma^2` added to exponential noise.
    NoFading,
}

impl Default for FadingMode {
    fn default() -> Self {
        FadingMode::RayleighPerCell
    }
}

/// Full description of a synthetic capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    /// Frame arrival rate, frames/s. Zero generates a noise-only capture.
    pub arrival_rate: f64,
    /// Time-on-air distribution, seconds.
    pub toa: Dist,
    /// Bandwidth distribution, Hz.
    pub bandwidth: Dist,
    /// Mean linear SNR of injected frames.
    pub snr: f64,
    #[serde(default)]
    pub fading: FadingMode,
    /// Band edges `(low, high)` in Hz.
    pub band: (f64, f64),
    /// Capture duration, seconds.
    pub duration: f64,
    /// Noise PSD `sigma^2`, linear W/Hz.
    pub noise_psd: f64,
    /// Grid time resolution, seconds.
    pub time_resolution: f64,
    /// Grid frequency resolution, Hz.
    pub freq_resolution: f64,
    pub seed: u64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.arrival_rate < 0.0 {
            bad.push("arrival_rate must be >= 0");
        }
        if self.snr < 0.0 {
            bad.push("snr must be >= 0");
        }
        if self.band.1 <= self.band.0 {
            bad.push("band high edge must exceed low edge");
        }
        if self.duration <= 0.0 {
            bad.push("duration must be > 0");
        }
        if self.noise_psd <= 0.0 {
            bad.push("noise_psd must be > 0");
        }
        if self.time_resolution <= 0.0 {
            bad.push("time_resolution must be > 0");
        }
        if self.freq_resolution <= 0.0 {
            bad.push("freq_resolution must be > 0");
        }
        if !bad.is_empty() {
            return Err(Error::InvalidArgument(bad.join("; ")));
        }
        self.toa.validate("toa")?;
        self.bandwidth.validate("bandwidth")?;
        Ok(())
    }

    /// Grid shape `(rows, cols)` implied by the resolutions.
    pub fn grid_shape(&self) -> (usize, usize) {
        (
            (self.duration / self.time_resolution).round() as usize,
            ((self.band.1 - self.band.0) / self.freq_resolution).round() as usize,
        )
    }

    pub fn time_axis(&self) -> Axis {
        Axis::new(0.0, self.time_resolution)
    }

    pub fn freq_axis(&self) -> Axis {
        Axis::new(self.band.0 + self.freq_resolution / 2.0, self.freq_resolution)
    }
}

/// One injected frame with its rasterized cell box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueFrame {
    /// Arrival time, seconds.
    pub start_s: f64,
    /// Time-on-air after edge truncation, seconds.
    pub toa_s: f64,
    /// Center frequency after edge truncation, Hz.
    pub center_freq_hz: f64,
    /// Bandwidth after edge truncation, Hz.
    pub bandwidth_hz: f64,
    /// Mean linear SNR.
    pub snr: f64,
    /// Inclusive row range of cells whose centers fall inside the frame;
    /// `None` when the frame is too short to cover any cell center.
    pub row_span: Option<(usize, usize)>,
    /// Inclusive column range, as above.
    pub col_span: Option<(usize, usize)>,
}

impl TrueFrame {
    /// Build a frame from physical parameters, rasterizing it onto a grid
    /// described like a [`TrafficSpec`] capture (time origin 0, frequency
    /// origin at the low band edge).
    pub fn rasterized(
        start_s: f64,
        toa_s: f64,
        center_freq_hz: f64,
        bandwidth_hz: f64,
        snr: f64,
        spec: &TrafficSpec,
    ) -> Self {
        let (rows, cols) = spec.grid_shape();
        Self {
            start_s,
            toa_s,
            center_freq_hz,
            bandwidth_hz,
            snr,
            row_span: raster_range(start_s, start_s + toa_s, spec.time_resolution, rows),
            col_span: raster_range(
                center_freq_hz - bandwidth_hz / 2.0 - spec.band.0,
                center_freq_hz + bandwidth_hz / 2.0 - spec.band.0,
                spec.freq_resolution,
                cols,
            ),
        }
    }

    /// Cell box `(rows, cols)` when rasterizable.
    pub fn cell_box(&self) -> Option<((usize, usize), (usize, usize))> {
        Some((self.row_span?, self.col_span?))
    }

    fn area(&self) -> Option<usize> {
        let ((r0, r1), (c0, c1)) = self.cell_box()?;
        Some((r1 - r0 + 1) * (c1 - c0 + 1))
    }
}

/// Ground truth for one synthetic capture.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub frames: Vec<TrueFrame>,
    /// Number of frames covering each cell.
    pub coverage: Matrix<u16>,
    /// Binary busy matrix: exactly the union of the frame boxes.
    pub grid: Matrix<u8>,
    /// Frames whose time or frequency extent was clipped at a capture edge.
    pub clipped: usize,
}

impl GroundTruth {
    /// Fraction of cells that are truly busy.
    pub fn duty(&self) -> f64 {
        if self.grid.is_empty() {
            0.0
        } else {
            self.grid.as_slice().iter().filter(|&&b| b != 0).count() as f64
                / self.grid.len() as f64
        }
    }
}

fn raster_range(lo: f64, hi: f64, step: f64, cells: usize) -> Option<(usize, usize)> {
    // cells whose centers (i + 0.5) * step lie inside [lo, hi]
    let tol = 1e-9 * step;
    let a = ((lo / step - 0.5) - tol).ceil().max(0.0) as i64;
    let b = ((hi / step - 0.5) + tol).floor() as i64;
    if b < a || b < 0 || a >= cells as i64 {
        return None;
    }
    Some((a.max(0) as usize, (b as usize).min(cells - 1)))
}

/// Draw Poisson frame traffic and rasterize it onto the grid.
pub fn generate_traffic(spec: &TrafficSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (rows, cols) = spec.grid_shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("grid resolutions exceed the capture extent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let mut frames = Vec::new();
    let mut clipped = 0usize;
    if spec.arrival_rate > 0.0 {
        let band_dist = Uniform::new(spec.band.0, spec.band.1);
        let mut t = 0.0f64;
        loop {
            let gap: f64 = rng.sample::<f64, _>(Exp1) / spec.arrival_rate;
            t += gap;
            if t >= spec.duration {
                break;
            }
            let center = band_dist.sample(&mut rng);
            let toa = spec.toa.sample(&mut rng);
            let bw = spec.bandwidth.sample(&mut rng);
            let mut was_clipped = false;
            let toa_c = if t + toa > spec.duration {
                was_clipped = true;
                spec.duration - t
            } else {
                toa
            };
            let f_lo = (center - bw / 2.0).max(spec.band.0);
            let f_hi = (center + bw / 2.0).min(spec.band.1);
            if f_hi - f_lo < bw {
                was_clipped = true;
            }
            if was_clipped {
                clipped += 1;
            }
            frames.push(TrueFrame {
                start_s: t,
                toa_s: toa_c,
                center_freq_hz: (f_lo + f_hi) / 2.0,
                bandwidth_hz: f_hi - f_lo,
                snr: spec.snr,
                row_span: raster_range(t, t + toa_c, spec.time_resolution, rows),
                col_span: raster_range(
                    f_lo - spec.band.0,
                    f_hi - spec.band.0,
                    spec.freq_resolution,
                    cols,
                ),
            });
        }
    }
    Ok(finish_truth(frames, rows, cols, clipped))
}

/// Assemble coverage and the binary truth grid from rasterized frames.
/// Public so tests and the acceptance suite can lay out frames explicitly.
pub fn finish_truth(
    frames: Vec<TrueFrame>,
    rows: usize,
    cols: usize,
    clipped: usize,
) -> GroundTruth {
    let mut coverage = Matrix::<u16>::zeros(rows, cols);
    for f in &frames {
        if let Some(((r0, r1), (c0, c1))) = f.cell_box() {
            for r in r0..=r1 {
                let row = coverage.row_mut(r);
                for c in &mut row[c0..=c1] {
                    *c = c.saturating_add(1);
                }
            }
        }
    }
    let grid = coverage.map(|&c| u8::from(c > 0));
    GroundTruth { frames, coverage, grid, clipped }
}

/// Synthesize the PSD matrix for a capture.
///
/// Every cell consumes exactly one unit-exponential draw in row-major
/// order, so the noise field is independent of the frame layout.
pub fn synthesize_psd(truth: &GroundTruth, spec: &TrafficSpec) -> Result<Spectrogram> {
    spec.validate()?;
    let (rows, cols) = spec.grid_shape();
    if truth.grid.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch { expected: (rows, cols), got: truth.grid.shape() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);

    // accumulate the per-cell mean multiplier (Rayleigh modes) or additive
    // constant power (no-fading mode)
    let mut extra = Matrix::<f64>::zeros(rows, cols);
    for f in &truth.frames {
        let weight = match spec.fading {
            FadingMode::RayleighPerCell => f.snr,
            FadingMode::RayleighPerFrame => {
                let e: f64 = rng.sample(Exp1);
                f.snr * e
            }
            FadingMode::NoFading => f.snr * spec.noise_psd,
        };
        if let Some(((r0, r1), (c0, c1))) = f.cell_box() {
            for r in r0..=r1 {
                let row = extra.row_mut(r);
                for v in &mut row[c0..=c1] {
                    *v += weight;
                }
            }
        }
    }

    let sigma2 = spec.noise_psd;
    let additive = spec.fading == FadingMode::NoFading;
    let mut values = Matrix::<f64>::zeros(rows, cols);
    for r in 0..rows {
        let ex = extra.row(r).to_vec();
        let row = values.row_mut(r);
        for (c, v) in row.iter_mut().enumerate() {
            let u: f64 = rng.sample(Exp1);
            *v = if additive { sigma2 * u + ex[c] } else { sigma2 * (1.0 + ex[c]) * u };
        }
    }

    Ok(Spectrogram {
        values,
        time_axis: spec.time_axis(),
        freq_axis: spec.freq_axis(),
        time_span: spec.duration,
        center_frequency: (spec.band.0 + spec.band.1) / 2.0,
        units: PsdUnits::Linear,
    })
}

/// IQ-domain capture: complex Gaussian noise at PSD `sigma^2` plus one
/// constant-amplitude tone burst per frame at its center frequency. Used to
/// exercise the spectrogram path end-to-end; absolute PSD calibration is
/// not attempted (the Hamming window bias is left in, as in a real
/// receiver before noise-floor calibration).
pub fn synthesize_iq(
    truth: &GroundTruth,
    spec: &TrafficSpec,
    sample_rate: f64,
) -> Result<crate::spectrogram::IqRecording> {
    use rustfft::num_complex::Complex64;
    spec.validate()?;
    if sample_rate < spec.band.1 - spec.band.0 {
        return Err(Error::InvalidArgument("sample rate must cover the band".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let n = (spec.duration * sample_rate).round() as usize;
    let center = (spec.band.0 + spec.band.1) / 2.0;
    // complex noise with per-sample variance sigma^2 * f_s spreads the
    // requested PSD uniformly across the sampled band
    let noise_sd = (spec.noise_psd * sample_rate / 2.0).sqrt();
    let mut samples: Vec<Complex64> = (0..n)
        .map(|_| {
            // Box-Muller from two uniform draws
            let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt() * noise_sd;
            let phi = 2.0 * std::f64::consts::PI * u2;
            Complex64::new(r * phi.cos(), r * phi.sin())
        })
        .collect();
    for f in &truth.frames {
        let amp = (f.snr * spec.noise_psd * spec.freq_resolution).sqrt();
        let offset = f.center_freq_hz - center;
        let i0 = (f.start_s * sample_rate).round() as usize;
        let i1 = (((f.start_s + f.toa_s) * sample_rate).round() as usize).min(n);
        for (i, s) in samples[i0..i1].iter_mut().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * offset * (i0 + i) as f64 / sample_rate;
            *s += Complex64::new(amp * phase.cos(), amp * phase.sin());
        }
    }
    crate::spectrogram::IqRecording::new(samples, sample_rate, center)
}

/// Cell-level detection scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    /// Fraction of truly-idle cells marked busy.
    pub pfa: f64,
    /// Fraction of truly-busy cells marked idle.
    pub pmd: f64,
    /// `1 - pmd`.
    pub pd: f64,
    /// Detection rate over cells covered by exactly one frame; this is the
    /// quantity the single-frame closed forms describe. `None` when the
    /// capture has no single-coverage cells.
    pub pd_single: Option<f64>,
    pub idle_cells: usize,
    pub busy_cells: usize,
}

/// Compare an estimated grid against the truth, cell by cell.
pub fn score_grids(truth: &GroundTruth, estimated: &OccupancyGrid) -> Result<CellScore> {
    if truth.grid.shape() != estimated.bits.shape() {
        return Err(Error::ShapeMismatch {
            expected: truth.grid.shape(),
            got: estimated.bits.shape(),
        });
    }
    let mut idle = 0usize;
    let mut idle_busy = 0usize;
    let mut busy = 0usize;
    let mut busy_idle = 0usize;
    let mut single = 0usize;
    let mut single_hit = 0usize;
    for ((t, e), c) in truth
        .grid
        .as_slice()
        .iter()
        .zip(estimated.bits.as_slice())
        .zip(truth.coverage.as_slice())
    {
        if *t == 0 {
            idle += 1;
            idle_busy += usize::from(*e != 0);
        } else {
            busy += 1;
            busy_idle += usize::from(*e == 0);
            if *c == 1 {
                single += 1;
                single_hit += usize::from(*e != 0);
            }
        }
    }
    let pfa = if idle > 0 { idle_busy as f64 / idle as f64 } else { 0.0 };
    let pmd = if busy > 0 { busy_idle as f64 / busy as f64 } else { 0.0 };
    Ok(CellScore {
        pfa,
        pmd,
        pd: 1.0 - pmd,
        pd_single: (single > 0).then(|| single_hit as f64 / single as f64),
        idle_cells: idle,
        busy_cells: busy,
    })
}

/// Frame-level detection scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    /// Rasterizable true frames.
    pub true_frames: usize,
    /// True frames matched by an estimated frame.
    pub detected: usize,
    pub detection_rate: f64,
    /// Estimated frames matching no true frame.
    pub false_frames: usize,
    pub estimated_frames: usize,
}

fn box_intersection(
    a: ((usize, usize), (usize, usize)),
    b: ((usize, usize), (usize, usize)),
) -> usize {
    let rows = (a.0 .1.min(b.0 .1) + 1).saturating_sub(a.0 .0.max(b.0 .0));
    let cols = (a.1 .1.min(b.1 .1) + 1).saturating_sub(a.1 .0.max(b.1 .0));
    rows * cols
}

/// Match estimated frames to true frames by box overlap.
///
/// A true frame counts detected when some estimated frame covers at least
/// `min_overlap` of its area; an estimated frame is false when it covers
/// less than `min_overlap` of its own area on every true frame.
pub fn score_frames(truth: &GroundTruth, estimated: &FrameSet, min_overlap: f64) -> FrameScore {
    let est_boxes: Vec<((usize, usize), (usize, usize))> =
        estimated.frames.iter().map(|f| (f.row_span, f.col_span)).collect();
    let mut true_frames = 0usize;
    let mut detected = 0usize;
    for f in &truth.frames {
        let Some(tb) = f.cell_box() else { continue };
        let area = f.area().unwrap() as f64;
        true_frames += 1;
        if est_boxes.iter().any(|&eb| box_intersection(tb, eb) as f64 >= min_overlap * area) {
            detected += 1;
        }
    }
    let mut false_frames = 0usize;
    for eb in &est_boxes {
        let earea =
            ((eb.0 .1 - eb.0 .0 + 1) * (eb.1 .1 - eb.1 .0 + 1)) as f64;
        let matched = truth.frames.iter().any(|f| {
            f.cell_box()
                .map(|tb| box_intersection(tb, *eb) as f64 >= min_overlap * earea)
                .unwrap_or(false)
        });
        if !matched {
            false_frames += 1;
        }
    }
    FrameScore {
        true_frames,
        detected,
        detection_rate: if true_frames > 0 { detected as f64 / true_frames as f64 } else { 0.0 },
        false_frames,
        estimated_frames: est_boxes.len(),
    }
}

/// Energy detection has no frame boxes; its frame-level analogue declares a
/// true frame detected when at least `min_coverage` of its cells are busy.
pub fn ed_frame_detection_rate(
    truth: &GroundTruth,
    grid: &OccupancyGrid,
    min_coverage: f64,
) -> Result<f64> {
    if truth.grid.shape() != grid.bits.shape() {
        return Err(Error::ShapeMismatch { expected: truth.grid.shape(), got: grid.bits.shape() });
    }
    let mut total = 0usize;
    let mut detected = 0usize;
    for f in &truth.frames {
        let Some(((r0, r1), (c0, c1))) = f.cell_box() else { continue };
        total += 1;
        let mut busy = 0usize;
        for r in r0..=r1 {
            busy += grid.bits.row(r)[c0..=c1].iter().filter(|&&b| b != 0).count();
        }
        let area = (r1 - r0 + 1) * (c1 - c0 + 1);
        if busy as f64 >= min_coverage * area as f64 {
            detected += 1;
        }
    }
    Ok(if total > 0 { detected as f64 / total as f64 } else { 0.0 })
}

/// One row of an ROC sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Threshold, linear W/Hz.
    pub threshold: f64,
    /// Mean linear SNR of the capture swept.
    pub snr: f64,
    /// Energy detection: cell-level false alarm and detection.
    pub pfa_ed: f64,
    pub pd_ed: f64,
    /// Detection over single-coverage cells (oracle comparison point).
    pub pd_ed_single: Option<f64>,
    /// Full framework (clustering + reinforcement): cell-level scores.
    pub pfa_fw: f64,
    pub pd_fw: f64,
    /// Frame-level detection rates for both methods.
    pub frame_pd_ed: f64,
    pub frame_pd_fw: f64,
}

/// Sweep thresholds over one synthetic capture, scoring raw energy
/// detection and the full clustering framework on identical data.
///
/// `min_overlap` is the frame-matching fraction (0.5 by default upstream).
pub fn roc_sweep(
    spec: &TrafficSpec,
    thresholds: &[f64],
    delta: f64,
    kappa: f64,
    min_overlap: f64,
) -> Result<Vec<RocPoint>> {
    if thresholds.len() < 2 {
        return Err(Error::InvalidArgument("an ROC sweep needs at least 2 thresholds".into()));
    }
    let truth = generate_traffic(spec)?;
    let psd = synthesize_psd(&truth, spec)?;
    let mut out = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        let b = binarize(&psd, theta)?;
        let ed = score_grids(&truth, &b)?;
        let frame_pd_ed = ed_frame_detection_rate(&truth, &b, min_overlap)?;
        let clustered = auto_cluster(&b, delta)?;
        let est = estimate_occupancy(&clustered, &b, delta, kappa)?;
        let fw = score_grids(&truth, &est.grid)?;
        let fscore = score_frames(&truth, &est.frames, min_overlap);
        out.push(RocPoint {
            threshold: theta,
            snr: spec.snr,
            pfa_ed: ed.pfa,
            pd_ed: ed.pd,
            pd_ed_single: ed.pd_single,
            pfa_fw: fw.pfa,
            pd_fw: fw.pd,
            frame_pd_ed,
            frame_pd_fw: fscore.detection_rate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{analytic_pd_rayleigh, analytic_pfa, GridKind};
    use approx::assert_relative_eq;

    fn base_spec() -> TrafficSpec {
        TrafficSpec {
            arrival_rate: 5.0,
            toa: Dist::Uniform { lo: 20e-3, hi: 80e-3 },
            bandwidth: Dist::Uniform { lo: 60e3, hi: 200e3 },
            snr: 10.0,
            fading: FadingMode::RayleighPerCell,
            band: (915e6, 928e6),
            duration: 2.0,
            noise_psd: 4e-19,
            time_resolution: 1e-3,
            freq_resolution: 20e3,
            seed: 99,
        }
    }

    #[test]
    fn zero_rate_means_no_frames() {
        let spec = TrafficSpec { arrival_rate: 0.0, ..base_spec() };
        let truth = generate_traffic(&spec).unwrap();
        assert!(truth.frames.is_empty());
        assert_eq!(truth.duty(), 0.0);
    }

    #[test]
    fn poisson_count_within_3_sigma() {
        let spec = TrafficSpec {
            arrival_rate: 10.0,
            duration: 100.0,
            time_resolution: 5e-3,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let n = truth.frames.len() as f64;
        let expect = 1000.0;
        assert!((n - expect).abs() <= 3.0 * expect.sqrt(), "count {n}");
    }

    #[test]
    fn interarrival_times_pass_exponential_ks() {
        let spec = TrafficSpec {
            arrival_rate: 200.0,
            duration: 60.0,
            time_resolution: 10e-3,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let starts: Vec<f64> = truth.frames.iter().map(|f| f.start_s).collect();
        let mut gaps: Vec<f64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.len() >= 10_000);
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &g) in gaps.iter().enumerate() {
            let f = 1.0 - (-spec.arrival_rate * g).exp();
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        // Kolmogorov critical value at the 1% level
        let crit = 1.628 / n.sqrt();
        assert!(d < crit, "KS statistic {d} exceeds {crit}");
    }

    #[test]
    fn truth_grid_is_union_of_frame_boxes() {
        let truth = generate_traffic(&base_spec()).unwrap();
        let mut expect = Matrix::<u8>::zeros(truth.grid.rows(), truth.grid.cols());
        for f in &truth.frames {
            if let Some(((r0, r1), (c0, c1))) = f.cell_box() {
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        expect.set(r, c, 1);
                    }
                }
            }
        }
        assert_eq!(truth.grid, expect);
    }

    #[test]
    fn determinism_same_seed_same_output() {
        let spec = base_spec();
        let a = generate_traffic(&spec).unwrap();
        let b = generate_traffic(&spec).unwrap();
        assert_eq!(a.frames, b.frames);
        let pa = synthesize_psd(&a, &spec).unwrap();
        let pb = synthesize_psd(&b, &spec).unwrap();
        assert_eq!(pa.values.as_slice(), pb.values.as_slice());
        let other = TrafficSpec { seed: 100, ..spec };
        let c = generate_traffic(&other).unwrap();
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn noise_only_capture_mean_is_sigma2() {
        let spec = TrafficSpec { arrival_rate: 0.0, duration: 1.0, ..base_spec() };
        let truth = generate_traffic(&spec).unwrap();
        let psd = synthesize_psd(&truth, &spec).unwrap();
        let n = psd.values.len() as f64;
        let mean = psd.values.as_slice().iter().sum::<f64>() / n;
        // exponential: sd of the mean is sigma^2 / sqrt(n)
        let tol = 3.0 * spec.noise_psd / n.sqrt();
        assert!((mean - spec.noise_psd).abs() < tol, "mean {mean}");
    }

    #[test]
    fn in_frame_mean_is_one_plus_gamma_sigma2() {
        let spec = TrafficSpec {
            arrival_rate: 0.5,
            snr: 100.0,
            toa: Dist::Fixed { value: 0.5 },
            bandwidth: Dist::Fixed { value: 2e6 },
            duration: 4.0,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let psd = synthesize_psd(&truth, &spec).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for r in 0..truth.grid.rows() {
            for c in 0..truth.grid.cols() {
                if *truth.coverage.get(r, c) == 1 {
                    acc += *psd.values.get(r, c);
                    count += 1;
                }
            }
        }
        assert!(count > 10_000);
        let mean = acc / count as f64;
        let expect = 101.0 * spec.noise_psd;
        let tol = 3.0 * expect / (count as f64).sqrt();
        assert!((mean - expect).abs() < tol, "mean {mean} vs {expect}");
    }

    #[test]
    fn per_bin_detection_matches_rayleigh_oracle() {
        let spec = TrafficSpec {
            arrival_rate: 2.0,
            snr: 3.1622776601683795, // 5 dB
            duration: 4.0,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let psd = synthesize_psd(&truth, &spec).unwrap();
        let sigma2 = spec.noise_psd;
        for pfa_target in [1e-2, 1e-3] {
            let theta = sigma2 * (1.0f64 / pfa_target).ln();
            let grid = binarize(&psd, theta).unwrap();
            let score = score_grids(&truth, &grid).unwrap();
            let pd_expect = analytic_pd_rayleigh(theta, sigma2, spec.snr).unwrap();
            let pfa_expect = analytic_pfa(theta, sigma2).unwrap();
            let n_busy = score.busy_cells as f64;
            let n_idle = score.idle_cells as f64;
            let pd = score.pd_single.unwrap();
            let sd_pd = (pd_expect * (1.0 - pd_expect) / n_busy).sqrt();
            let sd_pf = (pfa_expect * (1.0 - pfa_expect) / n_idle).sqrt();
            assert!((pd - pd_expect).abs() <= 3.0 * sd_pd, "pd {pd} vs {pd_expect}");
            assert!(
                (score.pfa - pfa_expect).abs() <= 3.0 * sd_pf,
                "pfa {} vs {pfa_expect}",
                score.pfa
            );
        }
    }

    #[test]
    fn no_fading_mode_detects_every_cell_above_threshold() {
        let spec = TrafficSpec {
            fading: FadingMode::NoFading,
            snr: 10.0,
            arrival_rate: 2.0,
            duration: 2.0,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let psd = synthesize_psd(&truth, &spec).unwrap();
        let theta = spec.noise_psd * (1e3f64).ln(); // 6.9 sigma^2 < 10 sigma^2
        let grid = binarize(&psd, theta).unwrap();
        let score = score_grids(&truth, &grid).unwrap();
        assert_eq!(score.pmd, 0.0, "constant signal above theta can never be missed");
    }

    #[test]
    fn score_grids_identity_and_complement() {
        let truth = generate_traffic(&base_spec()).unwrap();
        let as_grid = |bits: Matrix<u8>| OccupancyGrid {
            bits,
            threshold: 1.0,
            kind: GridKind::Estimated,
            time_axis: Axis::new(0.0, 1e-3),
            freq_axis: Axis::new(915e6, 20e3),
            time_span: 2.0,
        };
        let same = score_grids(&truth, &as_grid(truth.grid.clone())).unwrap();
        assert_eq!(same.pfa, 0.0);
        assert_eq!(same.pmd, 0.0);
        let flipped = truth.grid.map(|&b| 1 - b);
        let opp = score_grids(&truth, &as_grid(flipped)).unwrap();
        assert_eq!(opp.pfa, 1.0);
        assert_eq!(opp.pmd, 1.0);
        let wrong = as_grid(Matrix::zeros(3, 3));
        assert!(matches!(score_grids(&truth, &wrong), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn duty_of_truth_matches_poisson_identity() {
        // expected duty = lambda * E[ToA] * E[bw] / (T... band): for Poisson
        // rectangles, busy probability of a cell is 1 - exp(-load), with
        // load = lambda * E[toa] * E[bw] / B; at low load it is ~ load
        let spec = TrafficSpec {
            arrival_rate: 20.0,
            toa: Dist::Fixed { value: 50e-3 },
            bandwidth: Dist::Fixed { value: 130e3 },
            duration: 50.0,
            time_resolution: 5e-3,
            ..base_spec()
        };
        let truth = generate_traffic(&spec).unwrap();
        let load = spec.arrival_rate * 50e-3 * 130e3 / 13e6;
        let expect = 1.0 - (-load).exp();
        let cells = truth.grid.len() as f64;
        // correlated cells: effective sample count is roughly the frame count
        let sd = (expect * (1.0 - expect)).sqrt() / (truth.frames.len() as f64).sqrt();
        assert!(
            (truth.duty() - expect).abs() < 4.0 * sd.max(1.0 / cells.sqrt()),
            "duty {} vs {expect}",
            truth.duty()
        );
    }

    #[test]
    fn frame_scoring_detects_exact_and_rejects_disjoint() {
        let spec = TrafficSpec { arrival_rate: 1.0, duration: 3.0, ..base_spec() };
        let truth = generate_traffic(&spec).unwrap();
        // estimated frames copied from the truth boxes
        let frames: Vec<crate::frames::Frame> = truth
            .frames
            .iter()
            .filter_map(|f| {
                let ((r0, r1), (c0, c1)) = f.cell_box()?;
                Some(crate::frames::Frame {
                    cluster_id: 1,
                    row_span: (r0, r1),
                    col_span: (c0, c1),
                    centroid_time_s: 0.0,
                    centroid_freq_hz: 0.0,
                    toa_s: 0.0,
                    bandwidth_hz: 0.0,
                    point_count: 0,
                })
            })
            .collect();
        let set = FrameSet {
            frames,
            time_resolution: spec.time_resolution,
            freq_resolution: spec.freq_resolution,
            time_span: spec.duration,
            band: spec.band,
        };
        let s = score_frames(&truth, &set, 0.5);
        assert_eq!(s.detected, s.true_frames);
        assert_eq!(s.false_frames, 0);

        let empty = FrameSet { frames: Vec::new(), ..set };
        let s2 = score_frames(&truth, &empty, 0.5);
        assert_eq!(s2.detected, 0);
    }

    #[test]
    fn roc_theta_to_zero_flags_everything() {
        let spec = TrafficSpec { duration: 0.5, ..base_spec() };
        let thetas = [1e-25, 1e-18];
        let pts = roc_sweep(&spec, &thetas, 0.5, 2.0, 0.5).unwrap();
        assert_relative_eq!(pts[0].pfa_ed, 1.0);
        assert_relative_eq!(pts[0].pd_ed, 1.0);
        assert!(pts[1].pfa_ed < 1.0);
    }

    #[test]
    fn iq_mode_places_tone_burst_where_expected() {
        use crate::spectrogram::{compute_spectrogram, SpectrogramConfig};
        let band = (915.0e6, 915.0e6 + 1.024e6);
        let spec = TrafficSpec {
            arrival_rate: 0.0,
            toa: Dist::Fixed { value: 40e-3 },
            bandwidth: Dist::Fixed { value: 8e3 },
            snr: 1000.0,
            fading: FadingMode::NoFading,
            band,
            duration: 0.1,
            noise_psd: 1e-18,
            time_resolution: 4e-3,
            freq_resolution: 8e3,
            seed: 5,
        };
        let fs = 1.024e6;
        let (rows, cols) = spec.grid_shape();
        assert_eq!((rows, cols), (25, 128));
        // one hand-placed frame centered on column 30, rows 5..=14
        let frame = TrueFrame {
            start_s: 0.02,
            toa_s: 0.04,
            center_freq_hz: band.0 + 30.0 * 8e3 + 4e3,
            bandwidth_hz: 8e3,
            snr: 1000.0,
            row_span: raster_range(0.02, 0.06, 4e-3, rows),
            col_span: raster_range(30.0 * 8e3, 31.0 * 8e3, 8e3, cols),
        };
        assert_eq!(frame.row_span, Some((5, 14)));
        assert_eq!(frame.col_span, Some((30, 30)));
        let truth = finish_truth(vec![frame], rows, cols, 0);
        let iq = synthesize_iq(&truth, &spec, fs).unwrap();
        // window matched to the grid: 4096 samples -> dt 4 ms; z 32 -> df 8 kHz
        let cfg = SpectrogramConfig::new(4096, 32).unwrap();
        let sg = compute_spectrogram(&iq, &cfg).unwrap();
        assert_eq!(sg.cols(), cols);
        // the tone rows: power at the tone column dwarfs the row median
        let col = 30usize;
        for r in 0..rows.min(sg.rows()) {
            let v = *sg.values.get(r, col);
            let mut row: Vec<f64> = sg.values.row(r).to_vec();
            row.sort_by(f64::total_cmp);
            let med = row[row.len() / 2];
            let expect_tone = (5..=14).contains(&r);
            assert_eq!(v > 100.0 * med, expect_tone, "row {r}");
        }
    }
}
