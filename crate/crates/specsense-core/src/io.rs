//! File formats: raw IQ, binary spectrograms and grids with TOML sidecar
//! headers, and the CSV exports consumed by plotting tools.
//!
//! Binary layouts are little-endian and row-major: `f32` for PSD values,
//! `u8` for occupancy bits. Each binary file `foo` has a text header at
//! `foo.toml` carrying the axes and units. All writers go through a
//! temp-file-and-rename step so partial outputs never appear under the
//! final name.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{GridKind, OccupancyGrid};
use crate::error::{Error, Result};
use crate::frames::FrameSet;
use crate::grid::{Axis, Matrix};
use crate::simulator::{RocPoint, TrueFrame};
use crate::spectrogram::{IqRecording, PsdUnits, Spectrogram};

/// Path of the TOML sidecar accompanying a binary file.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.file_name().unwrap_or_default().to_os_string();
    name.push(".toml");
    data_path.with_file_name(name)
}

/// Write bytes to `path` atomically (temp file in the same directory, then
/// rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Sidecar metadata for a raw IQ capture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqHeader {
    pub sample_rate_hz: f64,
    pub center_frequency_hz: f64,
}

/// Write interleaved little-endian `f32` I,Q pairs plus the sidecar.
pub fn write_iq(path: &Path, iq: &IqRecording) -> Result<()> {
    let mut bytes = Vec::with_capacity(iq.samples.len() * 8);
    for s in &iq.samples {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    atomic_write(path, &bytes)?;
    let header = IqHeader {
        sample_rate_hz: iq.sample_rate,
        center_frequency_hz: iq.center_frequency,
    };
    write_toml(&sidecar_path(path), &header)
}

/// Read an IQ capture and its sidecar.
pub fn read_iq(path: &Path) -> Result<IqRecording> {
    let header: IqHeader = read_toml(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{} is not a whole number of f32 I/Q pairs",
            path.display()
        )));
    }
    let samples: Vec<Complex64> = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect();
    IqRecording::new(samples, header.sample_rate_hz, header.center_frequency_hz)
}

/// Sidecar header for a binary spectrogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrogramHeader {
    pub rows: usize,
    pub cols: usize,
    pub time_start_s: f64,
    pub time_step_s: f64,
    pub freq_start_hz: f64,
    pub freq_step_hz: f64,
    pub time_span_s: f64,
    pub center_frequency_hz: f64,
    /// `"linear"` (W/Hz) or `"dbm_per_hz"`.
    pub units: String,
}

fn units_to_str(u: PsdUnits) -> &'static str {
    match u {
        PsdUnits::Linear => "linear",
        PsdUnits::DbmPerHz => "dbm_per_hz",
    }
}

fn units_from_str(s: &str) -> Result<PsdUnits> {
    match s {
        "linear" => Ok(PsdUnits::Linear),
        "dbm_per_hz" => Ok(PsdUnits::DbmPerHz),
        other => Err(Error::Format(format!("unknown units tag '{other}'"))),
    }
}

/// Write a spectrogram as little-endian `f32` row-major plus header.
pub fn write_spectrogram(path: &Path, spec: &Spectrogram) -> Result<()> {
    let mut bytes = Vec::with_capacity(spec.values.len() * 4);
    for &v in spec.values.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    atomic_write(path, &bytes)?;
    let header = SpectrogramHeader {
        rows: spec.rows(),
        cols: spec.cols(),
        time_start_s: spec.time_axis.start,
        time_step_s: spec.time_axis.step,
        freq_start_hz: spec.freq_axis.start,
        freq_step_hz: spec.freq_axis.step,
        time_span_s: spec.time_span,
        center_frequency_hz: spec.center_frequency,
        units: units_to_str(spec.units).to_string(),
    };
    write_toml(&sidecar_path(path), &header)
}

pub fn read_spectrogram(path: &Path) -> Result<Spectrogram> {
    let header: SpectrogramHeader = read_toml(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    let expected = header.rows * header.cols * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes for {}x{} f32, found {}",
            path.display(),
            header.rows,
            header.cols,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Spectrogram {
        values: Matrix::from_vec(header.rows, header.cols, data)?,
        time_axis: Axis::new(header.time_start_s, header.time_step_s),
        freq_axis: Axis::new(header.freq_start_hz, header.freq_step_hz),
        time_span: header.time_span_s,
        center_frequency: header.center_frequency_hz,
        units: units_from_str(&header.units)?,
    })
}

/// Sidecar header for a binary occupancy grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHeader {
    pub rows: usize,
    pub cols: usize,
    pub time_start_s: f64,
    pub time_step_s: f64,
    pub freq_start_hz: f64,
    pub freq_step_hz: f64,
    pub time_span_s: f64,
    pub threshold_w_per_hz: f64,
    /// `"observed"`, `"estimated"` or `"truth"`.
    pub kind: String,
}

fn kind_to_str(k: GridKind) -> &'static str {
    match k {
        GridKind::Observed => "observed",
        GridKind::Estimated => "estimated",
        GridKind::Truth => "truth",
    }
}

fn kind_from_str(s: &str) -> Result<GridKind> {
    match s {
        "observed" => Ok(GridKind::Observed),
        "estimated" => Ok(GridKind::Estimated),
        "truth" => Ok(GridKind::Truth),
        other => Err(Error::Format(format!("unknown grid kind '{other}'"))),
    }
}

/// Write an occupancy grid as raw `u8` row-major plus header.
pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    atomic_write(path, grid.bits.as_slice())?;
    let header = GridHeader {
        rows: grid.rows(),
        cols: grid.cols(),
        time_start_s: grid.time_axis.start,
        time_step_s: grid.time_axis.step,
        freq_start_hz: grid.freq_axis.start,
        freq_step_hz: grid.freq_axis.step,
        time_span_s: grid.time_span,
        threshold_w_per_hz: grid.threshold,
        kind: kind_to_str(grid.kind).to_string(),
    };
    write_toml(&sidecar_path(path), &header)
}

pub fn read_grid(path: &Path) -> Result<OccupancyGrid> {
    let header: GridHeader = read_toml(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    if bytes.len() != header.rows * header.cols {
        return Err(Error::Format(format!(
            "{}: expected {} bytes for {}x{} u8, found {}",
            path.display(),
            header.rows * header.cols,
            header.rows,
            header.cols,
            bytes.len()
        )));
    }
    Ok(OccupancyGrid {
        bits: Matrix::from_vec(header.rows, header.cols, bytes)?,
        threshold: header.threshold_w_per_hz,
        kind: kind_from_str(&header.kind)?,
        time_axis: Axis::new(header.time_start_s, header.time_step_s),
        freq_axis: Axis::new(header.freq_start_hz, header.freq_step_hz),
        time_span: header.time_span_s,
    })
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Calibration samples as one dBm/Hz value per line under a header row.
pub fn write_calibration_csv(path: &Path, samples_dbm: &[f64]) -> Result<()> {
    let mut out = String::from("psd_dbm_per_hz\n");
    for v in samples_dbm {
        out.push_str(&format!("{v}\n"));
    }
    atomic_write(path, out.as_bytes())
}

/// Read a calibration CSV (header row optional).
pub fn read_calibration_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue, // header row
            Err(e) => {
                return Err(Error::Format(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Frame list export.
pub fn write_frames_csv(path: &Path, frames: &FrameSet) -> Result<()> {
    let mut out =
        String::from("cluster_id,centroid_time_s,centroid_freq_hz,toa_s,bandwidth_hz,point_count\n");
    for f in &frames.frames {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.cluster_id, f.centroid_time_s, f.centroid_freq_hz, f.toa_s, f.bandwidth_hz,
            f.point_count
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Machine-readable frame list with the full grid geometry.
pub fn write_frames_json(path: &Path, frames: &FrameSet) -> Result<()> {
    let text = serde_json::to_string_pretty(frames).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

pub fn read_frames_json(path: &Path) -> Result<FrameSet> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Clustered points as `(n, k, label)` rows.
pub fn write_points_csv(path: &Path, points: &[(f64, f64)], labels: &[u32]) -> Result<()> {
    let mut out = String::from("n,k,label\n");
    for (p, l) in points.iter().zip(labels) {
        out.push_str(&format!("{},{},{l}\n", p.0, p.1));
    }
    atomic_write(path, out.as_bytes())
}

/// Per-bin duty cycle export.
pub fn write_duty_csv(path: &Path, freq_axis: &Axis, per_bin: &[f64]) -> Result<()> {
    let mut out = String::from("k,freq_hz,duty_cycle\n");
    for (k, v) in per_bin.iter().enumerate() {
        out.push_str(&format!("{k},{},{v}\n", freq_axis.value(k)));
    }
    atomic_write(path, out.as_bytes())
}

/// ROC sweep export: one row per threshold with the cell-level pairs for
/// energy detection and the framework.
pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut out = String::from("threshold,pfa_ed,pd_ed,pfa_fw,pd_fw,snr\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.threshold, p.pfa_ed, p.pd_ed, p.pfa_fw, p.pd_fw, p.snr
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Ground-truth frame list export.
pub fn write_truth_csv(path: &Path, frames: &[TrueFrame]) -> Result<()> {
    let mut out = String::from("start_s,center_freq_hz,toa_s,bandwidth_hz,snr_linear\n");
    for f in frames {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f.start_s, f.center_freq_hz, f.toa_s, f.bandwidth_hz, f.snr
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Read a ground-truth frame list back as raw physical rows
/// `(start_s, center_freq_hz, toa_s, bandwidth_hz, snr)`.
pub fn read_truth_csv(path: &Path) -> Result<Vec<(f64, f64, f64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("start_s")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!(
                "{} line {}: expected 5 fields, found {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 5];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f.parse().map_err(|e| {
                Error::Format(format!("{} line {}: {e}", path.display(), i + 1))
            })?;
        }
        out.push((vals[0], vals[1], vals[2], vals[3], vals[4]));
    }
    Ok(out)
}

/// Generic two-column curve export (autocorrelation, arrival-rate fits).
pub fn write_curve_csv(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = format!("{header}\n");
    for (x, y) in rows {
        out.push_str(&format!("{x},{y}\n"));
    }
    atomic_write(path, out.as_bytes())
}

/// Transition-probability curve export.
pub fn write_transition_csv(path: &Path, rows: &[(f64, [[f64; 2]; 2])]) -> Result<()> {
    let mut out = String::from("tau_s,p00,p01,p10,p11\n");
    for (tau, p) in rows {
        out.push_str(&format!("{tau},{},{},{},{}\n", p[0][0], p[0][1], p[1][0], p[1][1]));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrogram::SpectrogramConfig;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    #[test]
    fn iq_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("capture.iq");
        let samples: Vec<Complex64> =
            (0..300).map(|i| Complex64::new(i as f64 * 0.25, -(i as f64) * 0.5)).collect();
        let iq = IqRecording::new(samples, 30e6, 921.5e6).unwrap();
        write_iq(&path, &iq).unwrap();
        let back = read_iq(&path).unwrap();
        assert_eq!(back.sample_rate, 30e6);
        assert_eq!(back.center_frequency, 921.5e6);
        assert_eq!(back.samples.len(), 300);
        for (a, b) in back.samples.iter().zip(iq.samples.iter()) {
            assert_relative_eq!(a.re, b.re, max_relative = 1e-6);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-6);
        }
    }

    #[test]
    fn spectrogram_roundtrip_preserves_axes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("capture.psd");
        let iq = IqRecording::new(
            (0..256)
                .map(|i| Complex64::new((i as f64 * 0.31).sin(), (i as f64 * 0.17).cos()))
                .collect(),
            1e6,
            915e6,
        )
        .unwrap();
        let spec =
            crate::spectrogram::compute_spectrogram(&iq, &SpectrogramConfig::new(64, 4).unwrap())
                .unwrap();
        write_spectrogram(&path, &spec).unwrap();
        let back = read_spectrogram(&path).unwrap();
        assert_eq!(back.values.shape(), spec.values.shape());
        assert_eq!(back.time_axis, spec.time_axis);
        assert_eq!(back.freq_axis, spec.freq_axis);
        assert_eq!(back.units, PsdUnits::Linear);
        for (a, b) in back.values.as_slice().iter().zip(spec.values.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-30);
        }
    }

    #[test]
    fn grid_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("b.occ");
        let mut bits = Matrix::<u8>::zeros(7, 9);
        bits.set(2, 3, 1);
        bits.set(6, 8, 1);
        let grid = OccupancyGrid {
            bits,
            threshold: 3.3e-18,
            kind: GridKind::Observed,
            time_axis: Axis::new(0.0, 0.5e-3),
            freq_axis: Axis::new(915.01e6, 20e3),
            time_span: 3.4999e-3,
        };
        write_grid(&path, &grid).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.bits, grid.bits);
        assert_eq!(back.threshold, grid.threshold);
        assert_eq!(back.kind, GridKind::Observed);
    }

    #[test]
    fn calibration_csv_roundtrip_and_header_skip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cal.csv");
        let samples = vec![-154.2, -153.9, -155.01];
        write_calibration_csv(&path, &samples).unwrap();
        let back = read_calibration_csv(&path).unwrap();
        assert_eq!(back, samples);
        // malformed interior line errors
        std::fs::write(&path, "psd_dbm_per_hz\n-150.0\nbogus\n").unwrap();
        assert!(read_calibration_csv(&path).is_err());
    }

    #[test]
    fn corrupt_binary_length_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.psd");
        let header = SpectrogramHeader {
            rows: 2,
            cols: 2,
            time_start_s: 0.0,
            time_step_s: 1.0,
            freq_start_hz: 0.0,
            freq_step_hz: 1.0,
            time_span_s: 1.0,
            center_frequency_hz: 0.0,
            units: "linear".into(),
        };
        write_toml(&sidecar_path(&path), &header).unwrap();
        std::fs::write(&path, [0u8; 7]).unwrap();
        assert!(matches!(read_spectrogram(&path), Err(Error::Format(_))));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.csv");
        atomic_write(&path, b"x,y\n1,2\n").unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(entries, vec!["out.csv".to_string()]);
    }
}
