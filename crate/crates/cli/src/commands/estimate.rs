use rayon::prelude::*;
use std::path::{Path, PathBuf};

use ddlab_core::dd_estimator::{
    coarse_dd, delay_kernel, detect_mpc, doppler_kernel, estimate_noise_floor,
    extract_pilot_fading, refine_paths_with, relative_l2, EstimatedPath, RefineOptions,
};
use ddlab_core::io::{read_grid_file, PathRow, WindowRow};
use ddlab_core::{GridSpec, PilotSymbols};

use super::{
    read_table, require_dir, write_json, write_table, FrameRow, FRAMES_FILE, GRIDS_DIR,
    GRID_SPEC_FILE,
};
use super::{PATHS_FILE, PILOTS_FILE, WINDOWS_FILE};
use crate::config::EstimateConfig;
use crate::error::{at, io_at, CliError, CliResult};
use crate::output::{prepare, Metadata};
use crate::Context;

struct WindowResult {
    window: WindowRow,
    paths: Vec<PathRow>,
    dropped: usize,
    failures: Vec<String>,
}

/// Grid files of a run: the frame list when present, otherwise every
/// `.ddg` file under `grids/` in name order, one block apart.
fn frames(input: &Path, spec: &GridSpec) -> CliResult<Vec<(usize, f64, PathBuf)>> {
    let listed = input.join(FRAMES_FILE);
    if listed.exists() {
        let rows: Vec<FrameRow> = read_table(&listed)?;
        return Ok(rows
            .into_iter()
            .map(|r| (r.window, r.time_s, input.join(r.file)))
            .collect());
    }
    let dir = input.join(GRIDS_DIR);
    let mut files = Vec::new();
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir).map_err(io_at(&dir))? {
            let path = entry.map_err(io_at(&dir))?.path();
            if path.extension().is_some_and(|e| e == "ddg") {
                files.push(path);
            }
        }
    }
    files.sort();
    let step = spec.block_duration_s();
    Ok(files
        .into_iter()
        .enumerate()
        .map(|(w, f)| (w, w as f64 * step, f))
        .collect())
}

pub fn run(cfg: &EstimateConfig, ctx: &Context) -> CliResult<()> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::validation("estimate needs --input"))?;
    if !(cfg.threshold_db > 0.0 && cfg.threshold_db.is_finite()) {
        return Err(CliError::validation(format!(
            "threshold must be positive, got {} dB",
            cfg.threshold_db
        )));
    }
    if cfg.max_paths == Some(0) {
        return Err(CliError::validation("max-paths must be at least 1"));
    }
    require_dir(input, "input")?;
    let pilot_path = input.join(PILOTS_FILE);
    if !pilot_path.exists() {
        return Err(CliError::Io(format!(
            "{} not found; is {} a generate output?",
            pilot_path.display(),
            input.display()
        )));
    }
    let pilot_grid = read_grid_file(&pilot_path).map_err(at(&pilot_path))?;
    let spec = pilot_grid.spec;
    let pilots = PilotSymbols {
        values: spec
            .pilot_positions()
            .map(|(m, n)| pilot_grid.at(m, n))
            .collect(),
    };
    let frames = frames(input, &spec)?;
    if frames.is_empty() {
        return Err(CliError::Io(format!(
            "no grid files found in {}",
            input.display()
        )));
    }

    let mut meta = Metadata::new("estimate", cfg);
    let options = RefineOptions {
        sweeps: cfg.sweeps,
        ..RefineOptions::default()
    };
    log::info!("estimating {} windows", frames.len());
    let results: Vec<WindowResult> = frames
        .par_iter()
        .map(|(w, t, file)| -> CliResult<WindowResult> {
            let rx = read_grid_file(file).map_err(at(file))?;
            if rx.spec != spec {
                return Err(CliError::validation(format!(
                    "{}: grid layout differs from the pilots",
                    file.display()
                )));
            }
            let grid = coarse_dd(&extract_pilot_fading(&rx, &pilots).map_err(at(file))?);
            let floor = estimate_noise_floor(&grid);
            let mut peaks = detect_mpc(&grid, &floor, cfg.threshold_db)?;
            if let Some(cap) = cfg.max_paths {
                peaks.truncate(cap);
            }
            let mut refined = refine_paths_with(&grid, &peaks, &options).map_err(at(file))?;
            // A peak made of other paths' leakage refines to a coefficient
            // below the detection level once those paths are cancelled.
            let level = floor.power * 10f64.powf(cfg.threshold_db / 10.0);
            let peak_power = |p: &EstimatedPath| {
                let c = delay_kernel(&spec, p.l_hat, p.l_hat.round())
                    * doppler_kernel(&spec, p.k_hat, p.k_hat.round());
                (p.h_hat * c).norm_sqr()
            };
            let kept: Vec<_> = refined
                .paths
                .iter()
                .filter(|p| peak_power(p) > level)
                .map(|p| p.peak_index)
                .collect();
            let dropped = refined.paths.len() - kept.len();
            if dropped > 0 {
                refined = refine_paths_with(&grid, &kept, &options).map_err(at(file))?;
            }
            let residual = if grid.power() > 0.0 {
                relative_l2(&refined.estimate, &grid)
            } else {
                0.0
            };
            Ok(WindowResult {
                window: WindowRow {
                    window: *w,
                    time_s: *t,
                    paths: refined.paths.len(),
                    noise_floor: floor.power,
                    failures: refined.failures.len(),
                    residual_relative: residual,
                },
                paths: refined
                    .paths
                    .iter()
                    .enumerate()
                    .map(|(i, p)| PathRow::new(*w, *t, i + 1, p, &spec))
                    .collect(),
                dropped,
                failures: refined
                    .failures
                    .iter()
                    .map(|f| {
                        format!(
                            "window {w}: peak {:?} not refined: {}",
                            f.peak_index, f.reason
                        )
                    })
                    .collect(),
            })
        })
        .collect::<CliResult<_>>()?;

    let out = &ctx.out;
    prepare(out, ctx.force)?;
    let mut windows = Vec::with_capacity(results.len());
    let mut paths = Vec::new();
    let dropped: usize = results.iter().map(|r| r.dropped).sum();
    if dropped > 0 {
        log::info!("{dropped} peaks refined below the detection level and were dropped");
    }
    for r in results {
        for f in r.failures {
            meta.notice(f);
        }
        windows.push(r.window);
        paths.extend(r.paths);
    }
    write_table(out, WINDOWS_FILE, &windows, &mut meta)?;
    write_table(out, PATHS_FILE, &paths, &mut meta)?;
    let spec_path = out.join(GRID_SPEC_FILE);
    write_json(&spec_path, &spec)?;
    meta.output(out, &spec_path);
    meta.write(out)?;
    log::info!(
        "{} paths over {} windows written to {}",
        paths.len(),
        windows.len(),
        out.display()
    );
    Ok(())
}
