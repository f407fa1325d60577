use serde::Deserialize;

use ddlab_core::dist_fit::select_best;
use ddlab_core::io::fit_rows;

use super::analyze::{load_estimates, tracks};
use super::{fit_tracks, read_table, write_table, FITS_FILE};
use crate::config::{check_tolerance, FitConfig};
use crate::error::{CliError, CliResult};
use crate::output::{prepare, Metadata};
use crate::Context;

#[derive(Debug, Deserialize)]
struct SampleRow {
    amplitude: f64,
}

pub fn run(cfg: &FitConfig, ctx: &Context) -> CliResult<()> {
    let mut meta = Metadata::new("fit", cfg);
    let rows = match (&cfg.input, &cfg.samples) {
        (Some(input), None) => {
            check_tolerance(cfg.tolerance)?;
            let est = load_estimates(input, &mut meta)?;
            fit_tracks(&tracks(&est, cfg.tolerance), &mut meta)?
        }
        (None, Some(file)) => {
            let samples: Vec<f64> = read_table::<SampleRow>(file)?
                .into_iter()
                .map(|r| r.amplitude)
                .collect();
            if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(CliError::validation(format!(
                    "{}: amplitudes must be positive, got {bad}",
                    file.display()
                )));
            }
            fit_rows(0, &select_best(&samples)?)
        }
        _ => {
            return Err(CliError::validation(
                "fit needs exactly one of --input and --samples",
            ))
        }
    };
    let out = &ctx.out;
    prepare(out, ctx.force)?;
    write_table(out, FITS_FILE, &rows, &mut meta)?;
    meta.write(out)?;
    Ok(())
}
