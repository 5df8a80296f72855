//! `specsense sense`: capture to frames, occupancy matrices and duty cycle.
//!
//! The capture can be processed in sequential row blocks (streaming-style);
//! frames split across a block boundary are merged when their boxes are
//! adjacent within one cell on the time axis and overlap (or nearly
//! overlap) in frequency.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use specsense_core::clustering::auto_cluster;
use specsense_core::detection::{binarize, threshold_from_pfa, NoiseCalibration, OccupancyGrid};
use specsense_core::frames::{duty_cycle, estimate_occupancy, Frame, FrameSet};
use specsense_core::grid::{Axis, Matrix};
use specsense_core::io as core_io;
use specsense_core::simulator::{finish_truth, score_frames, score_grids, TrueFrame, TrafficSpec};
use specsense_core::spectrogram::{
    compute_spectrogram, dbm_to_watts, from_dbm_per_hz, watts_to_dbm, PsdUnits, Spectrogram,
    SpectrogramConfig,
};

use crate::config::AppConfig;
use crate::errors::{config_err, data_err, io_err, CmdResult};
use crate::manifest::RunManifest;

pub struct Args {
    pub config: AppConfig,
    pub input: PathBuf,
    pub calibration: Option<PathBuf>,
    pub theta_dbm: Option<f64>,
    pub pfa: Option<f64>,
    pub delta: Option<f64>,
    pub block_rows: Option<usize>,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn run(args: Args) -> CmdResult<()> {
    let cfg = &args.config;
    let delta = args.delta.unwrap_or(cfg.clustering.delta);
    let kappa = cfg.frames.kappa;
    let pfa = args.pfa.unwrap_or(cfg.detection.pfa);
    let block_rows = args.block_rows.unwrap_or(cfg.sense.block_rows);

    if !args.input.exists() {
        return Err(io_err(anyhow!("input {} does not exist", args.input.display())));
    }
    let spec = load_capture(&args.input, cfg)?;

    // threshold: explicit value wins, otherwise the calibration quantile
    let (theta, used_pfa) = match (args.theta_dbm, &args.calibration) {
        (Some(dbm), _) => (dbm_to_watts(dbm), None),
        (None, Some(cal_path)) => {
            let dbm = core_io::read_calibration_csv(cal_path)?;
            let cal = NoiseCalibration::from_samples(dbm.iter().map(|&v| dbm_to_watts(v)))?;
            let t = threshold_from_pfa(&cal, pfa)?;
            if t.unverifiable {
                eprintln!(
                    "warning: target p_f {pfa:e} is below the calibration resolution; \
                     using the sample maximum"
                );
            }
            (t.value, Some(pfa))
        }
        (None, None) => {
            return Err(config_err(anyhow!(
                "either --calibration or --theta-dbm is required to binarize"
            )))
        }
    };

    let observed = binarize(&spec, theta)?;
    let (estimated, frame_set, chosen, merged_across_blocks) =
        sense_blocks(&observed, delta, kappa, block_rows)?;

    let duty = duty_cycle(&estimated)?;
    println!("busy cells observed: {}", observed.ones());
    println!("frames recovered: {}", frame_set.len());
    println!("overall duty cycle: {:.6}", duty.overall);
    if merged_across_blocks > 0 {
        println!("frames merged across block boundaries: {merged_across_blocks}");
    }

    super::ensure_out_dir(&args.out)?;
    let out = &args.out;
    core_io::write_grid(&out.join("b_grid.bin"), &observed)?;
    core_io::write_grid(&out.join("o_grid.bin"), &estimated)?;
    core_io::write_frames_csv(&out.join("frames.csv"), &frame_set)?;
    core_io::write_frames_json(&out.join("frames.json"), &frame_set)?;
    core_io::write_duty_csv(&out.join("duty_cycle.csv"), &estimated.freq_axis, &duty.per_bin)?;

    let mut manifest = RunManifest::new("sense", cfg).input(&args.input);
    if let Some(c) = &args.calibration {
        manifest.inputs.push(c.clone());
    }
    manifest.chosen.theta_w_per_hz = Some(theta);
    manifest.chosen.theta_dbm_per_hz = Some(watts_to_dbm(theta));
    manifest.chosen.pfa = used_pfa;
    manifest.chosen.delta = Some(delta);
    if let Some((mu, eps)) = chosen {
        manifest.chosen.mu = Some(mu);
        manifest.chosen.epsilon = Some(eps);
    }
    for name in ["b_grid.bin", "o_grid.bin", "frames.csv", "frames.json", "duty_cycle.csv"] {
        manifest.outputs.push(out.join(name));
    }

    // closed-loop scoring when ground truth is supplied
    if let Some(truth_path) = &args.truth {
        let rows = core_io::read_truth_csv(truth_path)?;
        let shape = observed.bits.shape();
        let band = observed.band();
        let pseudo_spec = TrafficSpec {
            arrival_rate: 0.0,
            toa: specsense_core::simulator::Dist::Fixed { value: 1.0 },
            bandwidth: specsense_core::simulator::Dist::Fixed { value: 1.0 },
            snr: 0.0,
            fading: Default::default(),
            band,
            duration: shape.0 as f64 * observed.time_axis.step,
            noise_psd: 1.0,
            time_resolution: observed.time_axis.step,
            freq_resolution: observed.freq_axis.step,
            seed: 0,
        };
        let frames: Vec<TrueFrame> = rows
            .into_iter()
            .map(|(start, center, toa, bw, snr)| {
                TrueFrame::rasterized(start, toa, center, bw, snr, &pseudo_spec)
            })
            .collect();
        let truth = finish_truth(frames, shape.0, shape.1, 0);
        let cell = score_grids(&truth, &estimated)?;
        let frame = score_frames(&truth, &frame_set, cfg.frames.min_overlap);
        let raw = score_grids(&truth, &observed)?;
        let score = serde_json::json!({
            "raw_energy_detection": {"pfa": raw.pfa, "pmd": raw.pmd, "pd": raw.pd},
            "framework": {"pfa": cell.pfa, "pmd": cell.pmd, "pd": cell.pd},
            "frame_level": {
                "true_frames": frame.true_frames,
                "detected": frame.detected,
                "detection_rate": frame.detection_rate,
                "false_frames": frame.false_frames,
            },
        });
        let score_path = out.join("score.json");
        core_io::atomic_write(&score_path, serde_json::to_string_pretty(&score).unwrap().as_bytes())?;
        manifest.inputs.push(truth_path.clone());
        manifest.outputs.push(score_path);
        println!(
            "scored against truth: pfa {:.3e} -> {:.3e}, pmd {:.3e} -> {:.3e}",
            raw.pfa, cell.pfa, raw.pmd, cell.pmd
        );
    }

    manifest.write(&out.join("manifest.json")).map_err(data_err)?;
    Ok(())
}

/// Load a capture: `.psd` binary spectrogram (converted to linear when in
/// dB units) or `.iq` raw capture run through the configured STFT.
fn load_capture(path: &Path, cfg: &AppConfig) -> CmdResult<Spectrogram> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("iq") => {
            let iq = core_io::read_iq(path)?;
            let sg_cfg = SpectrogramConfig {
                window_size: cfg.spectrogram.window_size,
                averaging_factor: cfg.spectrogram.averaging_factor,
                overlap: cfg.spectrogram.overlap,
            };
            Ok(compute_spectrogram(&iq, &sg_cfg)?)
        }
        _ => {
            let spec = core_io::read_spectrogram(path)?;
            Ok(match spec.units {
                PsdUnits::Linear => spec,
                PsdUnits::DbmPerHz => from_dbm_per_hz(&spec, 1e-3)?,
            })
        }
    }
}

type SenseOutput = (OccupancyGrid, FrameSet, Option<(u32, f64)>, usize);

/// Cluster and reinforce, block by block. Returns the merged estimated
/// grid, the merged frame set, the (mu, epsilon) chosen for the first
/// non-degenerate block, and the number of boundary merges.
fn sense_blocks(
    observed: &OccupancyGrid,
    delta: f64,
    kappa: f64,
    block_rows: usize,
) -> CmdResult<SenseOutput> {
    let rows = observed.rows();
    let cols = observed.cols();
    let block = if block_rows == 0 || block_rows >= rows { rows } else { block_rows };

    let mut all_frames: Vec<Frame> = Vec::new();
    let mut chosen: Option<(u32, f64)> = None;
    let mut merged_count = 0usize;
    let mut start = 0usize;
    while start < rows {
        let end = (start + block).min(rows);
        let sub = slice_grid(observed, start, end);
        let clustered = auto_cluster(&sub, delta)?;
        if chosen.is_none() {
            if let Some(p) = clustered.chosen {
                if p.epsilon > 0.0 {
                    chosen = Some((p.min_points, p.epsilon));
                }
            }
        }
        let est = estimate_occupancy(&clustered, &sub, delta, kappa)?;
        let block_is_first = start == 0;
        for mut f in est.frames.frames {
            f.row_span = (f.row_span.0 + start, f.row_span.1 + start);
            // merge with a frame ending within one cell of this block's
            // start when the column ranges are adjacent within one cell
            let mergeable = (!block_is_first && f.row_span.0 <= start + 1).then(|| {
                all_frames.iter().position(|g| {
                    g.row_span.1 + 2 >= start
                        && g.col_span.0 <= f.col_span.1 + 1
                        && f.col_span.0 <= g.col_span.1 + 1
                })
            });
            match mergeable.flatten() {
                Some(idx) => {
                    let g = &mut all_frames[idx];
                    g.row_span = (g.row_span.0.min(f.row_span.0), g.row_span.1.max(f.row_span.1));
                    g.col_span = (g.col_span.0.min(f.col_span.0), g.col_span.1.max(f.col_span.1));
                    merged_count += 1;
                }
                None => all_frames.push(f),
            }
        }
        start = end;
    }

    // renumber, recompute physical fields and rebuild the estimated grid
    let mut bits = Matrix::<u8>::zeros(rows, cols);
    for (i, f) in all_frames.iter_mut().enumerate() {
        f.cluster_id = (i + 1) as u32;
        let n_cells = f.row_span.1 - f.row_span.0 + 1;
        let k_cells = f.col_span.1 - f.col_span.0 + 1;
        f.toa_s = n_cells as f64 * observed.time_axis.step;
        f.bandwidth_hz = k_cells as f64 * observed.freq_axis.step;
        f.centroid_time_s = observed.time_axis.value(f.row_span.0)
            + (n_cells as f64 - 1.0) / 2.0 * observed.time_axis.step;
        f.centroid_freq_hz = observed.freq_axis.value(f.col_span.0)
            + (k_cells as f64 - 1.0) / 2.0 * observed.freq_axis.step;
        f.point_count = n_cells * k_cells;
        for n in f.row_span.0..=f.row_span.1 {
            let row = bits.row_mut(n);
            for cell in &mut row[f.col_span.0..=f.col_span.1] {
                *cell = 1;
            }
        }
    }

    let grid = OccupancyGrid {
        bits,
        threshold: observed.threshold,
        kind: specsense_core::detection::GridKind::Estimated,
        time_axis: observed.time_axis,
        freq_axis: observed.freq_axis,
        time_span: observed.time_span,
    };
    let frame_set = FrameSet {
        frames: all_frames,
        time_resolution: observed.time_axis.step,
        freq_resolution: observed.freq_axis.step,
        time_span: observed.time_span,
        band: observed.band(),
    };
    Ok((grid, frame_set, chosen, merged_count))
}

fn slice_grid(grid: &OccupancyGrid, start: usize, end: usize) -> OccupancyGrid {
    let cols = grid.cols();
    let mut bits = Matrix::<u8>::zeros(end - start, cols);
    for r in start..end {
        bits.row_mut(r - start).copy_from_slice(grid.bits.row(r));
    }
    OccupancyGrid {
        bits,
        threshold: grid.threshold,
        kind: grid.kind,
        time_axis: Axis::new(grid.time_axis.value(start), grid.time_axis.step),
        freq_axis: grid.freq_axis,
        time_span: grid.time_span,
    }
}
