use serde::{Deserialize, Serialize};

use ddlab_core::io::{ber_rows, read_trace_file};
use ddlab_core::otfs_link::{
    qpsk_awgn_ber, run_ber_sweep, run_mismatch_experiment, validate_snr_grid, BerCurve,
    ChannelSource, LinkConfig,
};

use super::{write_table, AWGN_FILE, BER_FILE};
use crate::config::{grid_spec, load_model, SimulateConfig};
use crate::error::{at, CliError, CliResult};
use crate::output::{prepare, resolve_seed, Metadata};
use crate::Context;

/// Simulated AWGN point next to the analytic QPSK curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwgnRow {
    pub snr_db: f64,
    pub ebn0_db: f64,
    pub ber: f64,
    pub analytic: f64,
    /// Deviation in binomial standard deviations.
    pub z: f64,
}

pub fn run(cfg: &SimulateConfig, ctx: &Context) -> CliResult<()> {
    let grid = grid_spec(&cfg.grid, cfg.delta_f_hz, "1x1")?;
    validate_snr_grid(&cfg.snr_db)?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(CliError::validation(format!(
            "alpha must lie in (0, 1), got {}",
            cfg.alpha
        )));
    }
    let source = match (&cfg.model, &cfg.trace, cfg.awgn) {
        (Some(name), None, false) => ChannelSource::model(&load_model(name)?, &grid, cfg.alpha)?,
        (None, Some(path), false) => ChannelSource::Trace(read_trace_file(path).map_err(at(path))?),
        (None, None, true) => ChannelSource::Awgn,
        _ => {
            return Err(CliError::validation(
                "simulate needs exactly one of --model, --trace and --awgn",
            ))
        }
    };
    let (seed, seed_source) = resolve_seed(ctx.seed_flag, ctx.seed_config);
    let config = LinkConfig {
        grid,
        snr_db: cfg.snr_db.clone(),
        frames_per_point: cfg.frames,
        seed,
    };
    config.validate()?;
    let mut meta = Metadata::new("simulate", cfg).seeded(seed, seed_source);
    let label = source.label();

    log::info!(
        "{label}: {} SNR points, {} frames each",
        cfg.snr_db.len(),
        cfg.frames
    );
    let curves = match &cfg.lags_ms {
        Some(lags) => run_mismatch_experiment(&source, lags, &config)?,
        None => vec![BerCurve {
            channel: label.clone(),
            lag_ms: None,
            points: run_ber_sweep(&source, &config)?,
        }],
    };
    let out = &ctx.out;
    prepare(out, ctx.force)?;
    let rows: Vec<_> = curves.iter().flat_map(ber_rows).collect();
    write_table(out, BER_FILE, &rows, &mut meta)?;
    if cfg.awgn {
        let reference: Vec<AwgnRow> = curves[0]
            .points
            .iter()
            .map(|p| {
                let analytic = qpsk_awgn_ber(p.ebn0_db());
                let sigma = (analytic * (1.0 - analytic) / p.bits as f64).sqrt();
                AwgnRow {
                    snr_db: p.snr_db,
                    ebn0_db: p.ebn0_db(),
                    ber: p.ber(),
                    analytic,
                    z: if sigma > 0.0 {
                        (p.ber() - analytic) / sigma
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        if let Some(worst) = reference.iter().map(|r| r.z.abs()).max_by(f64::total_cmp) {
            log::info!("largest deviation from the analytic curve: {worst:.2} sigma");
        }
        write_table(out, AWGN_FILE, &reference, &mut meta)?;
    }
    meta.write(out)?;
    log::info!("{} curve(s) written to {}", curves.len(), out.display());
    Ok(())
}
