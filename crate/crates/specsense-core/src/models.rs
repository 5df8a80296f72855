//! Temporal and frequency interference models.
//!
//! The temporal side is a two-state continuous-time Markov chain: the busy
//! steady-state probability is the duty cycle and the autocorrelation of
//! the occupancy decays as `exp(-tau / tau_corr)`. The frequency side is a
//! Poisson arrival process whose rate grows linearly with the monitored
//! bandwidth. Normalized traffic `G(b) = lambda(b) * tau_corr / (1 - Psi)`
//! condenses both into one congestion figure.
//!
//! The autocorrelation here is the normalized autocovariance: with that
//! convention the transition probabilities
//! `p_ij(tau) = pi_j + (p_ij(0) - pi_j) R(tau)` solve the two-state chain
//! exactly, with `tau_corr = 1 / (q01 + q10)`. The raw product moment
//! `E[s(0)s(tau)]` would not decay to zero for a nonzero duty cycle.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameSet;

/// Fitted two-state CTMC occupancy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalModel {
    /// Busy steady-state probability (duty cycle).
    pub duty_cycle: f64,
    /// Autocorrelation decay constant, seconds.
    pub tau_corr: f64,
    /// Steady-state distribution `(idle, busy)`.
    pub steady_state: (f64, f64),
    /// Infinitesimal generator, rows sum to zero, 1/s.
    pub generator: [[f64; 2]; 2],
    /// Mean idle and busy sojourn times, seconds.
    pub dwell_times: (f64, f64),
}

impl TemporalModel {
    /// Build the full model from the duty cycle and correlation time.
    pub fn new(duty_cycle: f64, tau_corr: f64) -> Result<Self> {
        check_psi_tau(duty_cycle, tau_corr)?;
        Ok(Self {
            duty_cycle,
            tau_corr,
            steady_state: (1.0 - duty_cycle, duty_cycle),
            generator: generator_matrix(duty_cycle, tau_corr)?,
            dwell_times: dwell_times(duty_cycle, tau_corr)?,
        })
    }

    /// Transition probability matrix over a delay `tau`.
    pub fn transition(&self, tau: f64) -> Result<[[f64; 2]; 2]> {
        transition_probabilities(self.duty_cycle, self.tau_corr, tau)
    }
}

fn check_psi_tau(psi: f64, tau_corr: f64) -> Result<()> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::InvalidArgument(format!("duty cycle must lie in (0, 1), got {psi}")));
    }
    if !(tau_corr > 0.0) {
        return Err(Error::InvalidArgument("tau_corr must be positive".into()));
    }
    Ok(())
}

/// Normalized occupancy autocovariance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    /// `rho[l]` at lag `l * dt`; `rho[0] = 1` by construction.
    pub rho: Vec<f64>,
    /// Sample spacing, seconds.
    pub dt: f64,
    /// Sample mean of the state sequence.
    pub psi_hat: f64,
}

/// Estimate the normalized autocovariance of a binary state sequence up to
/// `max_lag` seconds: `rho(l dt) = (E[s_n s_{n+l}] - psi^2) / (psi (1 - psi))`.
pub fn estimate_autocorrelation(states: &[u8], dt: f64, max_lag: f64) -> Result<Autocorrelation> {
    if dt <= 0.0 || max_lag < 0.0 {
        return Err(Error::InvalidArgument("dt must be > 0 and max_lag >= 0".into()));
    }
    let n = states.len();
    let lags = (max_lag / dt).floor() as usize;
    if n < 2 || n <= lags {
        return Err(Error::InsufficientData(format!(
            "sequence of {n} samples cannot support {lags} lags"
        )));
    }
    let ones = states.iter().filter(|&&s| s != 0).count();
    let psi_hat = ones as f64 / n as f64;
    let var = psi_hat * (1.0 - psi_hat);
    if var == 0.0 {
        return Err(Error::Degenerate(
            "all-idle or all-busy sequence has zero variance".into(),
        ));
    }
    let mut rho = Vec::with_capacity(lags + 1);
    for l in 0..=lags {
        let m = n - l;
        let mut acc = 0usize;
        for i in 0..m {
            acc += (states[i] & states[i + l]) as usize;
        }
        let moment = acc as f64 / m as f64;
        rho.push((moment - psi_hat * psi_hat) / var);
    }
    Ok(Autocorrelation { rho, dt, psi_hat })
}

/// Fraction of the normalized autocorrelation treated as noise floor: lags
/// at or below this are excluded from the exponential fit.
pub const FIT_FLOOR: f64 = 0.05;

/// Least-squares exponential fit of the autocorrelation: regress
/// `ln rho(l dt)` on `l dt` through the origin over positive lags above the
/// noise floor, returning `tau_corr = -1 / slope`.
pub fn fit_exponential(acf: &Autocorrelation) -> Result<f64> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut used = 0usize;
    for (l, &r) in acf.rho.iter().enumerate().skip(1) {
        if r > FIT_FLOOR {
            let x = l as f64 * acf.dt;
            let y = r.ln();
            sxx += x * x;
            sxy += x * y;
            used += 1;
        }
    }
    if used < 3 {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs >= 3 usable lags, found {used}"
        )));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::Degenerate(
            "autocorrelation does not decay; exponential model mismatch".into(),
        ));
    }
    Ok(-1.0 / slope)
}

/// Transition probability matrix of the two-state chain over delay `tau`:
/// `p_ij(tau) = pi_j + (delta_ij - pi_j) exp(-tau / tau_corr)`.
pub fn transition_probabilities(psi: f64, tau_corr: f64, tau: f64) -> Result<[[f64; 2]; 2]> {
    check_psi_tau(psi, tau_corr)?;
    if tau < 0.0 {
        return Err(Error::InvalidArgument("tau must be >= 0".into()));
    }
    let r = (-tau / tau_corr).exp();
    Ok([
        [1.0 - psi + psi * r, psi - psi * r],
        [1.0 - psi - (1.0 - psi) * r, psi + (1.0 - psi) * r],
    ])
}

/// Infinitesimal generator `Q = (1 / tau_corr) [[-Psi, Psi], [1-Psi, Psi-1]]`.
pub fn generator_matrix(psi: f64, tau_corr: f64) -> Result<[[f64; 2]; 2]> {
    check_psi_tau(psi, tau_corr)?;
    let k = 1.0 / tau_corr;
    Ok([[-k * psi, k * psi], [k * (1.0 - psi), k * (psi - 1.0)]])
}

/// Mean sojourn times `(tau_0, tau_1) = (tau_corr / Psi, tau_corr / (1 - Psi))`.
pub fn dwell_times(psi: f64, tau_corr: f64) -> Result<(f64, f64)> {
    check_psi_tau(psi, tau_corr)?;
    Ok((tau_corr / psi, tau_corr / (1.0 - psi)))
}

/// Multiply two 2x2 matrices.
pub fn mat2_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Matrix exponential of a 2x2 by scaling and squaring with a Taylor core.
/// Independent of the closed-form transition matrix, so the two can check
/// each other.
pub fn mat2_exp(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let norm = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let a = [[m[0][0] * scale, m[0][1] * scale], [m[1][0] * scale, m[1][1] * scale]];
    // Taylor series on the scaled matrix
    let mut result = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    for k in 1..=20 {
        term = mat2_mul(&term, &a);
        let f = 1.0 / (1..=k).map(|x| x as f64).product::<f64>();
        for i in 0..2 {
            for j in 0..2 {
                result[i][j] += term[i][j] * f;
            }
        }
    }
    for _ in 0..squarings {
        result = mat2_mul(&result, &result);
    }
    result
}

/// Sample a stationary two-state chain at spacing `dt` for `duration`
/// seconds. The initial state is drawn from the steady state; sojourns are
/// exponential with the model's dwell times.
pub fn simulate_chain<R: Rng>(
    psi: f64,
    tau_corr: f64,
    duration: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    check_psi_tau(psi, tau_corr)?;
    if duration <= 0.0 || dt <= 0.0 {
        return Err(Error::InvalidArgument("duration and dt must be positive".into()));
    }
    let (tau0, tau1) = dwell_times(psi, tau_corr)?;
    let exp0 = Exp::new(1.0 / tau0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let exp1 = Exp::new(1.0 / tau1).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = (duration / dt).round() as usize;
    let mut states = vec![0u8; n];
    let mut state: u8 = u8::from(rng.gen::<f64>() < psi);
    let mut t = 0.0f64;
    let mut idx = 0usize;
    while idx < n {
        let dwell = if state == 1 { exp1.sample(rng) } else { exp0.sample(rng) };
        let t_end = t + dwell;
        // samples at k * dt strictly before the transition keep this state
        let last = ((t_end / dt).floor() as usize + 1).min(n);
        if last > idx {
            for s in &mut states[idx..last] {
                *s = state;
            }
            idx = last;
        }
        t = t_end;
        state ^= 1;
    }
    Ok(states)
}

/// Band arrival rate `lambda(B)`: frames per second over the capture.
pub fn arrival_rate(frames: &FrameSet) -> Result<f64> {
    if frames.time_span <= 0.0 {
        return Err(Error::InvalidArgument("frame set has no positive time span".into()));
    }
    Ok(frames.len() as f64 / frames.time_span)
}

/// Linear bandwidth model of the arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthFit {
    /// Fitted intercept `lambda(0)`, frames/s.
    pub lambda_0: f64,
    /// Fitted rate at the full band `lambda(B)`, frames/s.
    pub lambda_band: f64,
    /// Full band width `B`, Hz.
    pub band_width: f64,
    /// Mean squared residual of the linear fit.
    pub mse: f64,
    /// Empirical `(b, lambda_hat(b))` samples backing the fit.
    pub samples: Vec<(f64, f64)>,
}

impl BandwidthFit {
    /// `lambda(b) = (b/B) lambda(B) + ((B-b)/B) lambda(0)`.
    pub fn lambda_at(&self, b: f64) -> f64 {
        let frac = b / self.band_width;
        frac * self.lambda_band + (1.0 - frac) * self.lambda_0
    }
}

/// Empirical arrival rate versus monitored bandwidth.
///
/// For each requested width `b` a sub-band slides across the full band in
/// steps of the frequency resolution; a frame counts when its frequency
/// extent overlaps the sub-band. Counts are averaged over positions to
/// remove placement bias, divided by the capture time, and a least-squares
/// line through the `(b, lambda_hat)` points gives the intercept
/// `lambda(0)` and endpoint `lambda(B)`. Both endpoints lie exactly on the
/// fitted line by construction.
pub fn arrival_rate_vs_bandwidth(frames: &FrameSet, sub_band_widths: &[f64]) -> Result<BandwidthFit> {
    if frames.time_span <= 0.0 {
        return Err(Error::InvalidArgument("frame set has no positive time span".into()));
    }
    let (band_lo, band_hi) = frames.band;
    let band_width = band_hi - band_lo;
    if band_width <= 0.0 {
        return Err(Error::InvalidArgument("band width must be positive".into()));
    }
    let widths: Vec<f64> = sub_band_widths
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b <= band_width * (1.0 + 1e-12))
        .collect();
    if widths.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 distinct sub-band widths inside the band".into(),
        ));
    }
    let extents: Vec<(f64, f64)> = frames
        .frames
        .iter()
        .map(|f| {
            (f.centroid_freq_hz - f.bandwidth_hz / 2.0, f.centroid_freq_hz + f.bandwidth_hz / 2.0)
        })
        .collect();
    let stride = frames.freq_resolution;
    let mut samples = Vec::with_capacity(widths.len());
    for &b in &widths {
        let mut positions = 0usize;
        let mut total = 0usize;
        let mut lo = band_lo;
        loop {
            let hi = lo + b;
            if hi > band_hi + stride * 1e-9 {
                break;
            }
            total += extents.iter().filter(|&&(flo, fhi)| fhi >= lo && flo <= hi).count();
            positions += 1;
            lo += stride;
        }
        if positions == 0 {
            continue;
        }
        samples.push((b, total as f64 / positions as f64 / frames.time_span));
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientData("too few usable sub-band widths".into()));
    }
    // ordinary least squares with intercept
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mse = samples
        .iter()
        .map(|&(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum::<f64>()
        / n;
    Ok(BandwidthFit {
        lambda_0: intercept,
        lambda_band: intercept + slope * band_width,
        band_width,
        mse,
        samples,
    })
}

/// Normalized traffic `G(b) = lambda(b) * tau_corr / (1 - Psi)`, i.e.
/// `lambda(b) * tau_1`.
pub fn normalized_traffic(lambda_b: f64, psi: f64, tau_corr: f64) -> Result<f64> {
    check_psi_tau(psi, tau_corr)?;
    if lambda_b < 0.0 {
        return Err(Error::InvalidArgument("arrival rate must be >= 0".into()));
    }
    Ok(lambda_b * tau_corr / (1.0 - psi))
}

/// Fitted frequency-domain traffic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Band arrival rate `lambda(B)`, frames/s.
    pub band_arrival_rate: f64,
    /// Fitted intercept `lambda(0)`, frames/s.
    pub intercept: f64,
    /// Band width `B` in Hz.
    pub band_width: f64,
    /// Normalized traffic at the full band, `G(B)`.
    pub g_band: f64,
    /// Linear-fit mean squared error.
    pub fit_mse: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::frames::Frame;

    fn frame_at(center_hz: f64, bw_hz: f64) -> Frame {
        Frame {
            cluster_id: 1,
            row_span: (0, 0),
            col_span: (0, 0),
            centroid_time_s: 0.0,
            centroid_freq_hz: center_hz,
            toa_s: 1e-3,
            bandwidth_hz: bw_hz,
            point_count: 1,
        }
    }

    fn frame_set(frames: Vec<Frame>, span: f64) -> FrameSet {
        FrameSet {
            frames,
            time_resolution: 0.5e-3,
            freq_resolution: 20e3,
            time_span: span,
            band: (915e6, 928e6),
        }
    }

    #[test]
    fn autocorrelation_lag_zero_is_one() {
        let s: Vec<u8> = (0..500).map(|i| u8::from(i % 7 < 2)).collect();
        let acf = estimate_autocorrelation(&s, 1e-3, 20e-3).unwrap();
        assert_eq!(acf.rho[0], 1.0);
        assert_eq!(acf.rho.len(), 21);
    }

    #[test]
    fn autocorrelation_iid_sequence_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000usize;
        let s: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.3)).collect();
        let acf = estimate_autocorrelation(&s, 1.0, 10.0).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for (l, &r) in acf.rho.iter().enumerate().skip(1) {
            assert!(r.abs() < bound, "lag {l}: rho {r} exceeds {bound}");
        }
    }

    #[test]
    fn autocorrelation_rejects_degenerate_sequences() {
        assert!(matches!(
            estimate_autocorrelation(&[1u8; 100], 1.0, 5.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            estimate_autocorrelation(&[0u8; 100], 1.0, 5.0),
            Err(Error::Degenerate(_))
        ));
        assert!(estimate_autocorrelation(&[0, 1], 1.0, 10.0).is_err());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let tau_c = 7.85e-3;
        let dt = 0.5e-3;
        let rho: Vec<f64> = (0..60).map(|l| (-(l as f64) * dt / tau_c).exp()).collect();
        let acf = Autocorrelation { rho, dt, psi_hat: 0.02 };
        let fitted = fit_exponential(&acf).unwrap();
        assert_relative_eq!(fitted, tau_c, max_relative = 1e-9);
    }

    #[test]
    fn fit_with_one_percent_noise_within_five_percent() {
        let tau_c = 10e-3;
        let dt = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let rho: Vec<f64> = (0..30)
                .map(|l| {
                    let exact = (-(l as f64) * dt / tau_c).exp();
                    if l == 0 {
                        exact
                    } else {
                        exact + 0.01 * (rng.gen::<f64>() - 0.5) * 2.0
                    }
                })
                .collect();
            let acf = Autocorrelation { rho, dt, psi_hat: 0.5 };
            let fitted = fit_exponential(&acf).unwrap();
            worst = worst.max((fitted - tau_c).abs() / tau_c);
        }
        assert!(worst < 0.05, "worst relative error {worst}");
    }

    #[test]
    fn fit_error_paths() {
        let acf = Autocorrelation { rho: vec![1.0, 0.01, 0.01, 0.01], dt: 1.0, psi_hat: 0.5 };
        assert!(matches!(fit_exponential(&acf), Err(Error::InsufficientData(_))));
        let rising = Autocorrelation { rho: vec![1.0, 1.2, 1.4, 1.6], dt: 1.0, psi_hat: 0.5 };
        assert!(matches!(fit_exponential(&rising), Err(Error::Degenerate(_))));
    }

    #[test]
    fn transition_matrix_limits() {
        let p0 = transition_probabilities(0.3, 5e-3, 0.0).unwrap();
        assert_relative_eq!(p0[0][0], 1.0);
        assert_relative_eq!(p0[1][1], 1.0);
        let pinf = transition_probabilities(0.3, 5e-3, 10.0).unwrap();
        for row in pinf {
            assert_relative_eq!(row[0], 0.7, max_relative = 1e-9);
            assert_relative_eq!(row[1], 0.3, max_relative = 1e-9);
        }
    }

    #[test]
    fn transition_matrix_paper_example() {
        // duty cycle 0.02, tau_corr 7.85 ms, tau = tau_corr:
        // p11 = 0.02 + 0.98 e^-1
        let p = transition_probabilities(0.02, 7.85e-3, 7.85e-3).unwrap();
        assert_relative_eq!(p[1][1], 0.02 + 0.98 * (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(p[1][1], 0.3805, max_relative = 1e-3);
    }

    #[test]
    fn transition_rows_sum_to_one_and_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let psi = rng.gen::<f64>() * 0.98 + 0.01;
            let tau_c = rng.gen::<f64>() * 0.1 + 1e-4;
            let tau = rng.gen::<f64>() * 0.5;
            let p = transition_probabilities(psi, tau_c, tau).unwrap();
            for row in p {
                assert_relative_eq!(row[0] + row[1], 1.0, max_relative = 1e-12);
                assert!(row.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
            }
        }
    }

    #[test]
    fn chapman_kolmogorov_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let psi = rng.gen::<f64>() * 0.98 + 0.01;
            let tau_c = rng.gen::<f64>() * 0.1 + 1e-4;
            let t1 = rng.gen::<f64>() * 0.05;
            let t2 = rng.gen::<f64>() * 0.05;
            let lhs = transition_probabilities(psi, tau_c, t1 + t2).unwrap();
            let rhs = mat2_mul(
                &transition_probabilities(psi, tau_c, t1).unwrap(),
                &transition_probabilities(psi, tau_c, t2).unwrap(),
            );
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(lhs[i][j], rhs[i][j], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn generator_matches_symmetric_case_and_stationarity() {
        let q = generator_matrix(0.5, 1.0).unwrap();
        assert_eq!(q, [[-0.5, 0.5], [0.5, -0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let psi = rng.gen::<f64>() * 0.9 + 0.05;
            let tau_c = rng.gen::<f64>() * 0.1 + 1e-3;
            let q = generator_matrix(psi, tau_c).unwrap();
            // rows sum to zero, off-diagonals nonnegative
            assert_relative_eq!(q[0][0] + q[0][1], 0.0, epsilon = 1e-15);
            assert_relative_eq!(q[1][0] + q[1][1], 0.0, epsilon = 1e-15);
            assert!(q[0][1] >= 0.0 && q[1][0] >= 0.0);
            // pi Q = 0 for pi = (1 - psi, psi)
            let pi = (1.0 - psi, psi);
            assert_relative_eq!(pi.0 * q[0][0] + pi.1 * q[1][0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(pi.0 * q[0][1] + pi.1 * q[1][1], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generator_is_derivative_of_transition_at_zero() {
        let psi = 0.27;
        let tau_c = 3.1e-3;
        let q = generator_matrix(psi, tau_c).unwrap();
        let h = 1e-9;
        let p = transition_probabilities(psi, tau_c, h).unwrap();
        let id: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                let fd = (p[i][j] - id[i][j]) / h;
                assert_relative_eq!(fd, q[i][j], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn transition_equals_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let psi = rng.gen::<f64>() * 0.98 + 0.01;
            let tau_c = rng.gen::<f64>() * 0.1 + 1e-4;
            let tau = rng.gen::<f64>() * 0.2;
            let q = generator_matrix(psi, tau_c).unwrap();
            let qt = [[q[0][0] * tau, q[0][1] * tau], [q[1][0] * tau, q[1][1] * tau]];
            let via_exp = mat2_exp(&qt);
            let closed = transition_probabilities(psi, tau_c, tau).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(via_exp[i][j], closed[i][j], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn dwell_time_identities() {
        let (t0, t1) = dwell_times(0.5, 1.0).unwrap();
        assert_relative_eq!(t0, 2.0);
        assert_relative_eq!(t1, 2.0);
        // Site-1-like values
        let (t0, t1) = dwell_times(0.0035, 7.07e-3).unwrap();
        assert_relative_eq!(t1, 7.0948e-3, max_relative = 1e-4);
        assert_relative_eq!(t0, 2.02, max_relative = 1e-3);
        // harmonic identity
        assert_relative_eq!(1.0 / t0 + 1.0 / t1, 1.0 / 7.07e-3, max_relative = 1e-12);
    }

    #[test]
    fn simulated_chain_reproduces_duty_and_dwells() {
        let psi = 0.3;
        let tau_c = 5e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dt = 0.25e-3;
        let states = simulate_chain(psi, tau_c, 400.0, dt, &mut rng).unwrap();
        let n = states.len();
        let psi_hat = states.iter().filter(|&&s| s == 1).count() as f64 / n as f64;
        // CLT bound on the occupation fraction
        let sd = (2.0 * psi * (1.0 - psi) * tau_c / 400.0).sqrt();
        assert!((psi_hat - psi).abs() < 3.0 * sd, "psi_hat {psi_hat}");
        // dwell means from sampled sojourns (biased by +-dt/2, well inside 5%)
        let mut busy_runs = Vec::new();
        let mut idle_runs = Vec::new();
        let mut run = 1usize;
        for i in 1..n {
            if states[i] == states[i - 1] {
                run += 1;
            } else {
                if states[i - 1] == 1 {
                    busy_runs.push(run as f64 * dt);
                } else {
                    idle_runs.push(run as f64 * dt);
                }
                run = 1;
            }
        }
        let (t0, t1) = dwell_times(psi, tau_c).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(busy_runs.len() > 10_000);
        assert_relative_eq!(mean(&busy_runs), t1, max_relative = 0.05);
        assert_relative_eq!(mean(&idle_runs), t0, max_relative = 0.05);
    }

    #[test]
    fn arrival_rate_basics() {
        let set = frame_set(vec![frame_at(920e6, 100e3); 100], 10.0);
        assert_relative_eq!(arrival_rate(&set).unwrap(), 10.0);
        let empty = frame_set(Vec::new(), 10.0);
        assert_eq!(arrival_rate(&empty).unwrap(), 0.0);
    }

    #[test]
    fn bandwidth_fit_endpoints_exact_and_uniform_centroids_near_zero_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let frames: Vec<Frame> = (0..4000)
            .map(|_| frame_at(915.2e6 + rng.gen::<f64>() * 12.6e6, 10e3))
            .collect();
        let set = frame_set(frames, 100.0);
        let widths: Vec<f64> = (1..=10).map(|i| i as f64 * 1.3e6).collect();
        let fit = arrival_rate_vs_bandwidth(&set, &widths).unwrap();
        // endpoints of the linear law hit the fitted values exactly
        assert_relative_eq!(fit.lambda_at(0.0), fit.lambda_0, max_relative = 1e-12);
        assert_relative_eq!(fit.lambda_at(13e6), fit.lambda_band, max_relative = 1e-12);
        // uniform centroids with negligible width: lambda grows ~linearly
        // from a near-zero intercept
        assert!(fit.lambda_0.abs() < 0.1 * fit.lambda_band, "lambda_0 = {}", fit.lambda_0);
        assert_relative_eq!(fit.lambda_band, 40.0, max_relative = 0.05);
        assert!(fit.mse.is_finite());
    }

    #[test]
    fn bandwidth_fit_needs_two_widths() {
        let set = frame_set(vec![frame_at(920e6, 100e3); 10], 1.0);
        assert!(arrival_rate_vs_bandwidth(&set, &[1e6]).is_err());
    }

    #[test]
    fn normalized_traffic_values() {
        // Site 1: lambda 57.86, tau_corr 7.07 ms, Psi 0.0035 -> G ~ 0.41
        let g = normalized_traffic(57.86, 0.0035, 7.07e-3).unwrap();
        assert_relative_eq!(g, 0.41, epsilon = 0.005);
        // Site 3
        let g3 = normalized_traffic(6.87, 0.0006, 9.68e-3).unwrap();
        assert_relative_eq!(g3, 0.07, epsilon = 0.005);
        assert_eq!(normalized_traffic(0.0, 0.5, 1.0).unwrap(), 0.0);
    }
}
