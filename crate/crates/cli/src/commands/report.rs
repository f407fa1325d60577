use std::fmt::Write as _;
use std::path::Path;

use ddlab_core::io::{BerRow, FitRow, IntervalSummaryRow, WeightedRow, WindowRow};

use super::simulate::AwgnRow;
use super::{
    read_table, require_dir, AWGN_FILE, BER_FILE, FITS_FILE, REPORT_FILE, SUMMARY_FILE,
    WEIGHTED_FILE,
};
use super::{FRAMES_FILE, WINDOWS_FILE};
use crate::config::ReportConfig;
use crate::error::{io_at, CliError, CliResult};
use crate::output::{prepare, Metadata};
use crate::Context;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn table(doc: &mut String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let _ = writeln!(doc, "| {} |", header.join(" | "));
    let _ = writeln!(doc, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(doc, "| {} |", r.join(" | "));
    }
    doc.push('\n');
}

/// Appends the sections for every table found in `dir`; returns how many.
fn summarize(dir: &Path, doc: &mut String) -> CliResult<usize> {
    let mut found = 0;
    let _ = writeln!(doc, "## {}\n", dir.display());
    if dir.join(FRAMES_FILE).exists() {
        found += 1;
        let frames: Vec<super::FrameRow> = read_table(&dir.join(FRAMES_FILE))?;
        let span = frames.last().map_or(0.0, |f| f.time_s * 1e3);
        let _ = writeln!(
            doc,
            "Generated {} grids spanning {span:.2} ms.\n",
            frames.len()
        );
    }
    if dir.join(WINDOWS_FILE).exists() {
        found += 1;
        let rows: Vec<WindowRow> = read_table(&dir.join(WINDOWS_FILE))?;
        let paths: usize = rows.iter().map(|r| r.paths).sum();
        let worst = rows.iter().map(|r| r.residual_relative).fold(0.0, f64::max);
        let _ = writeln!(
            doc,
            "Estimation: {} windows, {paths} paths ({:.2} per window), worst relative residual {worst:.3e}.\n",
            rows.len(),
            paths as f64 / rows.len().max(1) as f64
        );
    }
    if dir.join(SUMMARY_FILE).exists() {
        found += 1;
        let rows: Vec<IntervalSummaryRow> = read_table(&dir.join(SUMMARY_FILE))?;
        doc.push_str("### Intervals\n\n");
        table(
            doc,
            &[
                "scope",
                "alpha",
                "intervals",
                "T max (ms)",
                "T min (ms)",
                "T mean (ms)",
            ],
            rows.iter().map(|r| {
                vec![
                    r.scope.clone(),
                    format!("{}", r.alpha),
                    r.intervals.to_string(),
                    format!("{:.2}", r.t_max_ms),
                    format!("{:.2}", r.t_min_ms),
                    format!("{:.2}", r.t_mean_ms),
                ]
            }),
        );
    }
    if dir.join(WEIGHTED_FILE).exists() {
        found += 1;
        let rows: Vec<WeightedRow> = read_table(&dir.join(WEIGHTED_FILE))?;
        doc.push_str("### Tracked paths\n\n");
        table(
            doc,
            &[
                "path",
                "windows",
                "delay (ns)",
                "Doppler (Hz)",
                "mean power (dB)",
            ],
            rows.iter().map(|r| {
                vec![
                    r.path.to_string(),
                    r.points.to_string(),
                    format!("{:.2}", r.tau_ns),
                    format!("{:.2}", r.nu_hz),
                    format!("{:.2}", r.mean_power_db),
                ]
            }),
        );
    }
    if dir.join(FITS_FILE).exists() {
        found += 1;
        let rows: Vec<FitRow> = read_table(&dir.join(FITS_FILE))?;
        if !rows.is_empty() {
            doc.push_str("### Selected amplitude distributions\n\n");
            table(
                doc,
                &["path", "family", "param 1", "param 2", "KS", "K (dB)"],
                rows.iter().filter(|r| r.selected).map(|r| {
                    vec![
                        r.path.to_string(),
                        r.family.name().to_string(),
                        opt(r.param1),
                        opt(r.param2),
                        opt(r.ks_statistic),
                        opt(r.k_factor_db),
                    ]
                }),
            );
        }
    }
    if dir.join(BER_FILE).exists() {
        found += 1;
        let rows: Vec<BerRow> = read_table(&dir.join(BER_FILE))?;
        doc.push_str("### BER\n\n");
        table(
            doc,
            &["channel", "lag (ms)", "SNR (dB)", "BER", "95% interval"],
            rows.iter().map(|r| {
                vec![
                    r.channel.clone(),
                    r.lag_ms
                        .map_or_else(|| "matched".into(), |l| format!("{l}")),
                    format!("{}", r.snr_db),
                    format!("{:.3e}", r.ber),
                    format!("[{:.3e}, {:.3e}]", r.ci_low, r.ci_high),
                ]
            }),
        );
    }
    if dir.join(AWGN_FILE).exists() {
        found += 1;
        let rows: Vec<AwgnRow> = read_table(&dir.join(AWGN_FILE))?;
        doc.push_str("### AWGN check\n\n");
        table(
            doc,
            &["Eb/N0 (dB)", "BER", "analytic", "deviation (sigma)"],
            rows.iter().map(|r| {
                vec![
                    format!("{:.2}", r.ebn0_db),
                    format!("{:.3e}", r.ber),
                    format!("{:.3e}", r.analytic),
                    format!("{:+.2}", r.z),
                ]
            }),
        );
    }
    Ok(found)
}

pub fn run(cfg: &ReportConfig, ctx: &Context) -> CliResult<()> {
    if cfg.inputs.is_empty() {
        return Err(CliError::validation(
            "report needs at least one --input directory",
        ));
    }
    let mut doc = String::from("# ddlab report\n\n");
    for dir in &cfg.inputs {
        require_dir(dir, "input")?;
        if summarize(dir, &mut doc)? == 0 {
            return Err(CliError::Io(format!(
                "{} holds no ddlab tables",
                dir.display()
            )));
        }
    }
    let mut meta = Metadata::new("report", cfg);
    let out = &ctx.out;
    prepare(out, ctx.force)?;
    let path = out.join(REPORT_FILE);
    std::fs::write(&path, doc).map_err(io_at(&path))?;
    meta.output(out, &path);
    meta.write(out)?;
    Ok(())
}
