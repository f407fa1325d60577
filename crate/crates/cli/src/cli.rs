//! Command-line surface.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use ddlab_core::channel_model::Evolution;

use crate::config::{
    AnalyzeConfig, EstimateConfig, FitConfig, GenerateConfig, ReportConfig, SimulateConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "ddlab",
    version,
    about = "Delay-Doppler channel modeling, estimation and OTFS link simulation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a path-set trace and received pilot grids from a TDDL model.
    Generate(GenerateArgs),
    /// Estimate delay-Doppler paths in every grid of a generated run.
    Estimate(EstimateArgs),
    /// Stationarity, invariance, tracking and fits over estimation output.
    Analyze(AnalyzeArgs),
    /// Amplitude distribution fits of tracked paths or of a sample file.
    Fit(FitArgs),
    /// OTFS BER sweeps and channel mismatch experiments.
    Simulate(SimulateArgs),
    /// Markdown summary of finished runs.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Estimate(_) => "estimate",
            Command::Analyze(_) => "analyze",
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct GenerateArgs {
    /// Preset (TDDL-A, TDDL-B, TDDL-C) or model JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// Subcarriers by symbols, e.g. 128x64.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub delta_f_hz: Option<f64>,
    /// Pilot spacing in subcarriers by symbols, e.g. 2x2.
    #[arg(long)]
    pub pilot_spacing: Option<String>,
    #[arg(long)]
    pub duration_ms: Option<f64>,
    #[arg(long)]
    pub window_ms: Option<f64>,
    /// Pilot SNR; noiseless when absent.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long, value_parser = parse_evolution)]
    pub evolution: Option<Evolution>,
    /// Do not rotate coefficients by their Doppler phase over time.
    #[arg(long)]
    pub no_doppler_ramp: bool,
    /// Correlation level the fading calibration targets.
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn parse_evolution(s: &str) -> Result<Evolution, String> {
    match s.to_ascii_lowercase().as_str() {
        "ar" => Ok(Evolution::Ar),
        "static" => Ok(Evolution::Static),
        other => Err(format!(
            "unknown evolution '{other}', expected ar or static"
        )),
    }
}

impl GenerateArgs {
    pub fn apply(self, c: &mut GenerateConfig) {
        set(&mut c.model, self.model);
        set(&mut c.grid, self.grid);
        set(&mut c.delta_f_hz, self.delta_f_hz);
        set(&mut c.pilot_spacing, self.pilot_spacing);
        set_opt(&mut c.duration_ms, self.duration_ms);
        set_opt(&mut c.window_ms, self.window_ms);
        set_opt(&mut c.snr_db, self.snr_db);
        set(&mut c.evolution, self.evolution);
        set(&mut c.alpha, self.alpha);
        if self.no_doppler_ramp {
            c.doppler_ramp = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Detection threshold above the noise floor.
    #[arg(long)]
    pub threshold_db: Option<f64>,
    #[arg(long)]
    pub max_paths: Option<usize>,
    /// Extra cancellation passes of the refinement.
    #[arg(long)]
    pub sweeps: Option<usize>,
}

impl EstimateArgs {
    pub fn apply(self, c: &mut EstimateConfig) {
        set_opt(&mut c.input, self.input);
        set(&mut c.threshold_db, self.threshold_db);
        set_opt(&mut c.max_paths, self.max_paths);
        set(&mut c.sweeps, self.sweeps);
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `estimate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Similarity thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Tracking box in delay and Doppler bins, e.g. 0.5,0.5.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub tolerance: Option<Vec<f64>>,
}

impl AnalyzeArgs {
    pub fn apply(self, c: &mut AnalyzeConfig) {
        set_opt(&mut c.input, self.input);
        set(&mut c.alpha, self.alpha);
        if let Some(t) = self.tolerance {
            c.tolerance = [t[0], t[1]];
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory written by `estimate`.
    #[arg(long, conflicts_with = "samples")]
    pub input: Option<PathBuf>,
    /// CSV with an `amplitude` column.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub tolerance: Option<Vec<f64>>,
}

impl FitArgs {
    pub fn apply(self, c: &mut FitConfig) {
        // A source given on the command line replaces either source from the file.
        if self.input.is_some() || self.samples.is_some() {
            c.input = self.input;
            c.samples = self.samples;
        }
        if let Some(t) = self.tolerance {
            c.tolerance = [t[0], t[1]];
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    /// Preset or model JSON file.
    #[arg(long, conflicts_with_all = ["trace", "awgn"])]
    pub model: Option<String>,
    /// Path-set trace written by `generate`.
    #[arg(long, conflicts_with = "awgn")]
    pub trace: Option<PathBuf>,
    /// Single unit tap: checks the link against the analytic QPSK curve.
    #[arg(long)]
    pub awgn: bool,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub delta_f_hz: Option<f64>,
    /// SNR points, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub snr_db: Option<Vec<f64>>,
    /// Frames per SNR point.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Equalization lags in ms, comma separated; must include 0.
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl SimulateArgs {
    pub fn apply(self, c: &mut SimulateConfig) {
        if self.model.is_some() || self.trace.is_some() || self.awgn {
            c.model = self.model;
            c.trace = self.trace;
            c.awgn = self.awgn;
        }
        set(&mut c.grid, self.grid);
        set(&mut c.delta_f_hz, self.delta_f_hz);
        set(&mut c.snr_db, self.snr_db);
        set(&mut c.frames, self.frames);
        set_opt(&mut c.lags_ms, self.lags);
        set(&mut c.alpha, self.alpha);
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories to summarize; repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
}

impl ReportArgs {
    pub fn apply(self, c: &mut ReportConfig) {
        if !self.inputs.is_empty() {
            c.inputs = self.inputs;
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}
