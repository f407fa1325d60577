//! One module per verb, plus the file layout they share.

pub mod analyze;
pub mod estimate;
pub mod fit;
pub mod generate;
pub mod report;
pub mod simulate;

use serde::{Deserialize, Serialize};
use std::path::Path;

use ddlab_core::dist_fit::{select_best, MIN_SELECT_SAMPLES};
use ddlab_core::io::{fit_rows, FitRow};
use ddlab_core::stationarity::PathTrack;

use crate::error::{at, io_at, CliError, CliResult};
use crate::output::Metadata;

pub const TRACE_FILE: &str = "trace.txt";
pub const PILOTS_FILE: &str = "pilots.ddg";
pub const GRIDS_DIR: &str = "grids";
pub const FRAMES_FILE: &str = "frames.csv";
pub const GRID_SPEC_FILE: &str = "grid.json";
pub const WINDOWS_FILE: &str = "windows.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const CDD_FILE: &str = "cdd.csv";
pub const STATIONARY_FILE: &str = "stationary_intervals.csv";
pub const INVARIANT_FILE: &str = "invariant_intervals.csv";
pub const SUMMARY_FILE: &str = "interval_summary.csv";
pub const TRACKS_FILE: &str = "tracks.csv";
pub const TCC_DIR: &str = "tcc";
pub const WEIGHTED_FILE: &str = "weighted.csv";
pub const FITS_FILE: &str = "fits.csv";
pub const BER_FILE: &str = "ber.csv";
pub const AWGN_FILE: &str = "awgn_reference.csv";
pub const REPORT_FILE: &str = "report.md";

/// One received grid of a generated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub window: usize,
    pub time_s: f64,
    pub file: String,
}

pub fn require_dir(dir: &Path, what: &str) -> CliResult<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "{what} directory {} does not exist",
            dir.display()
        )))
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_at(path))
}

/// Writes CSV rows and records the file.
pub fn write_table<T: Serialize>(
    dir: &Path,
    name: &str,
    rows: &[T],
    meta: &mut Metadata,
) -> CliResult<()> {
    let path = dir.join(name);
    ddlab_core::io::write_rows_file(&path, rows).map_err(at(&path))?;
    meta.output(dir, &path);
    Ok(())
}

pub fn read_table<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    ddlab_core::io::read_rows_file(path).map_err(at(path))
}

/// Fits every track with enough coefficients; shorter ones are noted.
pub fn fit_tracks(tracks: &[PathTrack], meta: &mut Metadata) -> CliResult<Vec<FitRow>> {
    let mut rows = Vec::new();
    for (i, track) in tracks.iter().enumerate() {
        let samples: Vec<f64> = track.points.iter().map(|p| p.h_hat.norm()).collect();
        if samples.len() < MIN_SELECT_SAMPLES {
            meta.notice(format!(
                "path {}: {} amplitude samples, fits need at least {MIN_SELECT_SAMPLES}",
                i + 1,
                samples.len()
            ));
            continue;
        }
        match select_best(&samples) {
            Ok(selection) => rows.extend(fit_rows(i + 1, &selection)),
            Err(e) => meta.notice(format!("path {}: no family could be fitted: {e}", i + 1)),
        }
    }
    Ok(rows)
}
