//! Spectrum occupancy sensing and interference modeling for IoT shared bands.
//!
//! The crate turns raw IQ captures (or pre-computed power-spectral-density
//! matrices) into detected transmission frames and fitted channel models:
//!
//! 1. [`spectrogram`] — windowed short-time DFT with frequency-bin averaging.
//! 2. [`detection`] — noise calibration, threshold selection for a target
//!    false-alarm probability, and binarization into an occupancy matrix.
//! 3. [`clustering`] — point-process mapping and fully autonomous DBSCAN
//!    (minimum cluster size and scan radius derived from the data alone).
//! 4. [`frames`] — quartile-fence outlier filtering, frame reinforcement,
//!    estimated occupancy and duty cycles.
//! 5. [`models`] — two-state continuous-time Markov chain for the temporal
//!    behavior and a Poisson arrival-rate model for the frequency behavior.
//! 6. [`simulator`] — synthetic captures with known ground truth for
//!    closed-loop validation and ROC extraction.
//!
//! All detection math runs in linear units (W/Hz); dB conversions are
//! explicit. Everything seeded is deterministic: the same spec and seed
//! reproduce bit-identical captures.

pub mod clustering;
pub mod detection;
pub mod error;
pub mod frames;
pub mod grid;
pub mod io;
pub mod models;
pub mod simulator;
pub mod spectrogram;

pub use clustering::{auto_cluster, AutoParams, DbscanParams, PointSet, Space};
pub use detection::{
    analytic_pd_rayleigh, analytic_pfa, binarize, calibrate_noise, threshold_from_pfa, GridKind,
    NoiseCalibration, OccupancyGrid, Threshold,
};
pub use error::{Error, Result};
pub use frames::{duty_cycle, estimate_occupancy, DutyCycle, Frame, FrameSet, SenseEstimate};
pub use grid::{Axis, Matrix};
pub use models::{TemporalModel, TrafficModel};
pub use simulator::{
    generate_traffic, roc_sweep, synthesize_psd, FadingMode, GroundTruth, RocPoint, TrafficSpec,
};
pub use spectrogram::{
    compute_spectrogram, hamming_window, IqRecording, PsdUnits, Spectrogram, SpectrogramConfig,
};
