use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ddlab_core::channel_model::{synthesize_tf_grid, ChannelGenerator, EvolutionConfig, PowerMode};
use ddlab_core::io::{write_grid_file, write_trace_file};
use ddlab_core::{PilotSymbols, TfGrid};

use super::{
    write_json, write_table, FrameRow, FRAMES_FILE, GRIDS_DIR, GRID_SPEC_FILE, PILOTS_FILE,
    TRACE_FILE,
};
use crate::config::{grid_spec, load_model, GenerateConfig};
use crate::error::{at, io_at, CliError, CliResult};
use crate::output::{prepare, resolve_seed, Metadata};
use crate::Context;

/// Upper bound on the number of windows of one run.
const MAX_WINDOWS: usize = 100_000;

pub fn run(cfg: &GenerateConfig, ctx: &Context) -> CliResult<()> {
    let model = load_model(&cfg.model)?;
    let spec = grid_spec(&cfg.grid, cfg.delta_f_hz, &cfg.pilot_spacing)?;
    let duration_ms = cfg.duration_ms.unwrap_or(model.t_qs_ms);
    let window_ms = cfg.window_ms.unwrap_or(spec.block_duration_s() * 1e3);
    if !(duration_ms > 0.0 && duration_ms.is_finite()) {
        return Err(CliError::validation(format!(
            "duration must be positive, got {duration_ms} ms"
        )));
    }
    if !(window_ms > 0.0 && window_ms.is_finite()) {
        return Err(CliError::validation(format!(
            "window step must be positive, got {window_ms} ms"
        )));
    }
    if cfg
        .snr_db
        .is_some_and(|s| s.is_nan() || s == f64::NEG_INFINITY)
    {
        return Err(CliError::validation("pilot SNR must be a number or inf"));
    }
    let windows = ((duration_ms / window_ms) * (1.0 - 1e-12)).ceil().max(1.0);
    if windows > MAX_WINDOWS as f64 {
        return Err(CliError::validation(format!(
            "{windows} windows exceed the limit of {MAX_WINDOWS}"
        )));
    }
    let windows = windows as usize;
    let evolution = EvolutionConfig {
        evolution: cfg.evolution,
        doppler_ramp: cfg.doppler_ramp,
        power: PowerMode::Table,
        alpha: cfg.alpha,
    };
    let generator = ChannelGenerator::new(&model, &spec, evolution)?;

    let (seed, source) = resolve_seed(ctx.seed_flag, ctx.seed_config);
    let mut meta = Metadata::new("generate", cfg).seeded(seed, source);
    let mut channel_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let mut traj = generator.start(0.0, &mut channel_rng);
    generator.realize(&traj).check_alias_free(&spec)?;

    let out = &ctx.out;
    prepare(out, ctx.force)?;
    let grids = out.join(GRIDS_DIR);
    if grids.exists() {
        // Drop windows left by an earlier, longer run.
        for entry in std::fs::read_dir(&grids).map_err(io_at(&grids))? {
            let path = entry.map_err(io_at(&grids))?.path();
            if path.extension().is_some_and(|e| e == "ddg") {
                std::fs::remove_file(&path).map_err(io_at(&path))?;
            }
        }
    }
    std::fs::create_dir_all(&grids).map_err(io_at(&grids))?;

    let pilots = PilotSymbols::qpsk(&spec, seed);
    let mut pilot_grid = TfGrid::zeros(spec);
    for ((m, n), v) in spec.pilot_positions().zip(&pilots.values) {
        *pilot_grid.at_mut(m, n) = *v;
    }
    let pilot_path = out.join(PILOTS_FILE);
    write_grid_file(&pilot_path, &pilot_grid).map_err(at(&pilot_path))?;
    meta.output(out, &pilot_path);

    let noise_power = match cfg.snr_db {
        Some(snr) if snr.is_finite() => generator.expected_total_power() * 10f64.powf(-snr / 10.0),
        _ => 0.0,
    };
    log::info!(
        "{}: {windows} windows of {} over {duration_ms} ms",
        model.name,
        cfg.grid
    );
    let mut trace = Vec::with_capacity(windows);
    let mut frames = Vec::with_capacity(windows);
    for w in 0..windows {
        let t = w as f64 * window_ms * 1e-3;
        generator.advance(&mut traj, t, &mut channel_rng)?;
        let paths = generator.realize(&traj);
        let rx = synthesize_tf_grid(&paths, &spec, &pilots, noise_power, &mut noise_rng)?;
        let name = format!("{GRIDS_DIR}/window_{w:05}.ddg");
        let path = out.join(&name);
        write_grid_file(&path, &rx).map_err(at(&path))?;
        frames.push(FrameRow {
            window: w,
            time_s: t,
            file: name,
        });
        trace.push(paths);
    }
    meta.outputs.push(format!("{GRIDS_DIR}/ ({windows} grids)"));
    let trace_path = out.join(TRACE_FILE);
    write_trace_file(&trace_path, &trace).map_err(at(&trace_path))?;
    meta.output(out, &trace_path);
    write_table(out, FRAMES_FILE, &frames, &mut meta)?;
    let spec_path = out.join(GRID_SPEC_FILE);
    write_json(&spec_path, &spec)?;
    meta.output(out, &spec_path);
    meta.write(out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}
