pub mod calibrate;
pub mod model;
pub mod roc;
pub mod sense;
pub mod simulate;

use std::path::Path;

use crate::errors::{io_err, CmdResult};

/// Create the output directory if needed.
pub fn ensure_out_dir(out: &Path) -> CmdResult<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(anyhow::anyhow!("creating {}: {e}", out.display())))
}
