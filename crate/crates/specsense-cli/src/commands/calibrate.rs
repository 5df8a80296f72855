//! `specsense calibrate`: noise ECDF and threshold selection.

use std::path::Path;

use anyhow::anyhow;
use specsense_core::detection::{calibrate_noise, threshold_from_pfa, NoiseCalibration};
use specsense_core::io as core_io;
use specsense_core::spectrogram::{dbm_to_watts, watts_to_dbm};

use crate::config::AppConfig;
use crate::errors::{data_err, io_err, CmdResult};
use crate::manifest::RunManifest;

pub fn run(config: &AppConfig, input: &Path, pfa: Option<f64>, out: &Path) -> CmdResult<()> {
    if !input.exists() {
        return Err(io_err(anyhow!("input {} does not exist", input.display())));
    }
    let pfa = pfa.unwrap_or(config.detection.pfa);

    let cal: NoiseCalibration = match input.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let dbm = core_io::read_calibration_csv(input)?;
            NoiseCalibration::from_samples(dbm.iter().map(|&v| dbm_to_watts(v)))?
        }
        _ => {
            let spec = core_io::read_spectrogram(input)?;
            calibrate_noise(&spec)?
        }
    };
    let threshold = threshold_from_pfa(&cal, pfa)?;

    let sigma2_dbm = watts_to_dbm(cal.mean_power());
    let theta_dbm = watts_to_dbm(threshold.value);
    println!("calibration samples: {}", cal.len());
    if cal.rejected() > 0 {
        eprintln!("warning: dropped {} non-finite samples", cal.rejected());
    }
    println!("mean noise power sigma^2: {sigma2_dbm:.2} dBm/Hz");
    println!("threshold theta (p_f = {pfa:e}): {theta_dbm:.2} dBm/Hz");
    if threshold.unverifiable {
        eprintln!(
            "warning: p_f = {pfa:e} is below 1/{}; threshold is the sample maximum and \
             the target cannot be verified from this calibration",
            cal.len()
        );
    }

    super::ensure_out_dir(out)?;
    let cal_path = out.join("calibration.csv");
    let samples_dbm: Vec<f64> = cal.samples().iter().map(|&v| watts_to_dbm(v)).collect();
    core_io::write_calibration_csv(&cal_path, &samples_dbm)?;

    let mut manifest = RunManifest::new("calibrate", config).input(input);
    manifest.chosen.pfa = Some(pfa);
    manifest.chosen.theta_w_per_hz = Some(threshold.value);
    manifest.chosen.theta_dbm_per_hz = Some(theta_dbm);
    manifest.outputs.push(cal_path);
    manifest.write(&out.join("manifest.json")).map_err(data_err)?;
    Ok(())
}
