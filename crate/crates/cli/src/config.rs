//! Run configuration: one TOML document with a section per command.
//! Command-line flags override the file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use ddlab_core::channel_model::{load_tddl_preset, Evolution, Preset, TddlModel};
use ddlab_core::GridSpec;

use crate::error::{io_at, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: Option<bool>,
    pub threads: Option<usize>,
    pub generate: GenerateConfig,
    pub estimate: EstimateConfig,
    pub analyze: AnalyzeConfig,
    pub fit: FitConfig,
    pub simulate: SimulateConfig,
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        match config.schema_version {
            None | Some(SCHEMA_VERSION) => Ok(config),
            Some(v) => Err(CliError::validation(format!(
                "{}: schema_version {v} is not supported (expected {SCHEMA_VERSION})",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Preset name or path to a model JSON file.
    pub model: String,
    pub grid: String,
    pub delta_f_hz: f64,
    pub pilot_spacing: String,
    /// Defaults to the model's quasi-stationary interval.
    pub duration_ms: Option<f64>,
    /// Defaults to one block.
    pub window_ms: Option<f64>,
    /// Pilot SNR against the expected channel power; absent means noiseless.
    pub snr_db: Option<f64>,
    pub evolution: Evolution,
    pub doppler_ramp: bool,
    pub alpha: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            model: "TDDL-C".into(),
            grid: "128x64".into(),
            delta_f_hz: 15e3,
            pilot_spacing: "2x2".into(),
            duration_ms: None,
            window_ms: None,
            snr_db: None,
            evolution: Evolution::Ar,
            doppler_ramp: true,
            alpha: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: Option<PathBuf>,
    pub threshold_db: f64,
    /// Keep at most this many of the strongest peaks per window.
    pub max_paths: Option<usize>,
    pub sweeps: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            input: None,
            threshold_db: 6.0,
            max_paths: None,
            sweeps: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub input: Option<PathBuf>,
    pub alpha: Vec<f64>,
    /// Association box for path tracking, in delay and Doppler bins.
    pub tolerance: [f64; 2],
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            input: None,
            alpha: vec![0.7, 0.8, 0.9],
            tolerance: [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Estimation output directory; every tracked path is fitted.
    pub input: Option<PathBuf>,
    /// Single-column CSV of amplitudes with an `amplitude` header.
    pub samples: Option<PathBuf>,
    pub tolerance: [f64; 2],
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            input: None,
            samples: None,
            tolerance: [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: Option<String>,
    /// Path-set trace as written by `generate`.
    pub trace: Option<PathBuf>,
    pub awgn: bool,
    pub grid: String,
    pub delta_f_hz: f64,
    pub snr_db: Vec<f64>,
    pub frames: usize,
    /// Equalization lags; absent means a matched sweep.
    pub lags_ms: Option<Vec<f64>>,
    pub alpha: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            model: None,
            trace: None,
            awgn: false,
            grid: "32x16".into(),
            delta_f_hz: 15e3,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            frames: 500,
            lags_ms: None,
            alpha: 0.9,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub inputs: Vec<PathBuf>,
}

/// Parses `AxB` into two positive integers.
pub fn parse_dims(text: &str, what: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::validation(format!("{what} must look like 32x16, got '{text}'"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn grid_spec(grid: &str, delta_f_hz: f64, pilot_spacing: &str) -> CliResult<GridSpec> {
    let (m, n) = parse_dims(grid, "grid")?;
    let (d_f, d_t) = parse_dims(pilot_spacing, "pilot spacing")?;
    Ok(GridSpec::new(m, n, delta_f_hz, d_f, d_t)?)
}

/// Resolves a preset name or a model file.
pub fn load_model(name: &str) -> CliResult<TddlModel> {
    if let Ok(preset) = name.parse::<Preset>() {
        return Ok(load_tddl_preset(preset));
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::validation(format!(
            "'{name}' is neither a preset (TDDL-A, TDDL-B, TDDL-C) nor a file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    TddlModel::from_json(&text).map_err(crate::error::at(path))
}

pub fn check_alphas(alphas: &[f64]) -> CliResult<()> {
    if alphas.is_empty() {
        return Err(CliError::validation(
            "at least one threshold alpha is required",
        ));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(CliError::validation(format!(
            "alpha must lie in (0, 1], got {a}"
        )));
    }
    Ok(())
}

pub fn check_tolerance(t: [f64; 2]) -> CliResult<()> {
    if t.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::validation(format!(
            "tracking tolerance must be positive, got {t:?}"
        )));
    }
    Ok(())
}
