use std::path::Path;

use ddlab_core::dd_estimator::{reconstruct_dd, EstimatedPath};
use ddlab_core::io::{
    group_paths, interval_rows, write_similarity_file, IntervalSummaryRow, PathRow, TrackRow,
    WeightedRow, WindowRow,
};
use ddlab_core::stationarity::{
    cdd_matrix, dd_power, dd_tcc_matrix, quasi_invariant_intervals, quasi_stationary_intervals,
    track_paths, weighted_params, PathTrack,
};
use ddlab_core::GridSpec;

use super::{
    fit_tracks, read_json, read_table, require_dir, write_table, CDD_FILE, FITS_FILE,
    GRID_SPEC_FILE,
};
use super::{
    INVARIANT_FILE, PATHS_FILE, STATIONARY_FILE, SUMMARY_FILE, TCC_DIR, TRACKS_FILE, WEIGHTED_FILE,
    WINDOWS_FILE,
};
use crate::config::{check_alphas, check_tolerance, AnalyzeConfig};
use crate::error::{at, io_at, CliError, CliResult};
use crate::output::{prepare, Metadata};
use crate::Context;

/// Estimation output read back from disk.
pub struct Estimates {
    pub spec: GridSpec,
    pub windows: Vec<WindowRow>,
    pub paths: Vec<Vec<EstimatedPath>>,
    pub step_s: f64,
}

pub fn load_estimates(input: &Path, meta: &mut Metadata) -> CliResult<Estimates> {
    require_dir(input, "input")?;
    for name in [GRID_SPEC_FILE, WINDOWS_FILE, PATHS_FILE] {
        if !input.join(name).exists() {
            return Err(CliError::Io(format!(
                "{} has no {name}; is it an estimate output?",
                input.display()
            )));
        }
    }
    let spec: GridSpec = read_json(&input.join(GRID_SPEC_FILE))?;
    spec.validate().map_err(at(&input.join(GRID_SPEC_FILE)))?;
    let windows: Vec<WindowRow> = read_table(&input.join(WINDOWS_FILE))?;
    let rows: Vec<PathRow> = read_table(&input.join(PATHS_FILE))?;
    let paths = group_paths(&windows, &rows).map_err(at(&input.join(PATHS_FILE)))?;
    let step_s = if windows.len() >= 2 {
        let step = windows[1].time_s - windows[0].time_s;
        let uneven = windows
            .windows(2)
            .any(|w| ((w[1].time_s - w[0].time_s) - step).abs() > 1e-9 * step.abs().max(1e-3));
        if !(step > 0.0) {
            return Err(CliError::validation(format!(
                "{WINDOWS_FILE}: window times must increase"
            )));
        }
        if uneven {
            meta.notice(format!(
                "window times are unevenly spaced; intervals assume a {:.6} s step",
                step
            ));
        }
        step
    } else {
        spec.block_duration_s()
    };
    Ok(Estimates {
        spec,
        windows,
        paths,
        step_s,
    })
}

pub fn tracks(est: &Estimates, tolerance: [f64; 2]) -> Vec<PathTrack> {
    track_paths(&est.paths, (tolerance[0], tolerance[1]), est.step_s)
}

pub fn run(cfg: &AnalyzeConfig, ctx: &Context) -> CliResult<()> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::validation("analyze needs --input"))?;
    check_alphas(&cfg.alpha)?;
    check_tolerance(cfg.tolerance)?;
    let mut meta = Metadata::new("analyze", cfg);
    let est = load_estimates(input, &mut meta)?;
    let out = &ctx.out;
    prepare(out, ctx.force)?;

    let mut summary = Vec::new();
    if est.windows.len() < 2 {
        meta.notice(format!(
            "{} window(s): stationarity analysis skipped",
            est.windows.len()
        ));
    } else {
        let spectra: Vec<_> = est
            .paths
            .iter()
            .zip(&est.windows)
            .map(|(p, w)| dd_power(&reconstruct_dd(p, &est.spec), w.time_s))
            .collect();
        let sim = cdd_matrix(&spectra)?;
        let path = out.join(CDD_FILE);
        write_similarity_file(&path, &sim).map_err(at(&path))?;
        meta.output(out, &path);
        let mut rows = Vec::new();
        for &alpha in &cfg.alpha {
            let report = quasi_stationary_intervals(&sim, alpha)?;
            log::info!(
                "alpha {alpha}: {} quasi-stationary intervals, mean {:.2} ms",
                report.runs.len(),
                report.t_mean_ms
            );
            rows.extend(interval_rows("stationary", &report));
            summary.push(IntervalSummaryRow::new("stationary", &report));
        }
        write_table(out, STATIONARY_FILE, &rows, &mut meta)?;
    }

    let tracks = tracks(&est, cfg.tolerance);
    let mut track_rows = Vec::new();
    let mut weighted = Vec::new();
    let mut invariant = Vec::new();
    let tcc_dir = out.join(TCC_DIR);
    for (i, track) in tracks.iter().enumerate() {
        let id = i + 1;
        track_rows.extend(track.points.iter().map(|p| TrackRow {
            path: id,
            window: est.windows[p.window].window,
            l_hat: p.l_hat,
            k_hat: p.k_hat,
            h_re: p.h_hat.re,
            h_im: p.h_hat.im,
        }));
        if let Ok((l_bar, k_bar)) = weighted_params(track) {
            let power =
                track.points.iter().map(|p| p.h_hat.norm_sqr()).sum::<f64>() / track.len() as f64;
            weighted.push(WeightedRow {
                path: id,
                points: track.len(),
                l_bar,
                k_bar,
                tau_ns: est.spec.delay_from_bins(l_bar) * 1e9,
                nu_hz: est.spec.doppler_from_bins(k_bar),
                mean_power_db: 10.0 * power.log10(),
            });
        }
        if track.len() < 2 {
            continue;
        }
        std::fs::create_dir_all(&tcc_dir).map_err(io_at(&tcc_dir))?;
        let path = tcc_dir.join(format!("path_{id}.csv"));
        write_similarity_file(&path, &dd_tcc_matrix(track)).map_err(at(&path))?;
        meta.output(out, &path);
        let scope = format!("path-{id}");
        for &alpha in &cfg.alpha {
            let report = quasi_invariant_intervals(track, alpha)?;
            invariant.extend(interval_rows(&scope, &report));
            summary.push(IntervalSummaryRow::new(&scope, &report));
        }
    }
    write_table(out, TRACKS_FILE, &track_rows, &mut meta)?;
    write_table(out, WEIGHTED_FILE, &weighted, &mut meta)?;
    write_table(out, INVARIANT_FILE, &invariant, &mut meta)?;
    write_table(out, SUMMARY_FILE, &summary, &mut meta)?;
    let fits = fit_tracks(&tracks, &mut meta)?;
    write_table(out, FITS_FILE, &fits, &mut meta)?;
    meta.write(out)?;
    log::info!(
        "{} tracks analyzed, results in {}",
        tracks.len(),
        out.display()
    );
    Ok(())
}
