//! Output directories and run metadata.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{io_at, CliError, CliResult};

pub const METADATA_FILE: &str = "metadata.json";

/// Claims `dir` for a command. A non-empty directory is only reused with
/// `force`.
pub fn prepare(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::validation(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let occupied = std::fs::read_dir(dir).map_err(io_at(dir))?.next().is_some();
        if occupied && !force {
            return Err(CliError::validation(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(io_at(dir))
}

/// Where the seed of a randomized command came from.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Flag,
    Config,
    Auto,
}

pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> (u64, SeedSource) {
    match (flag, config) {
        (Some(s), _) => (s, SeedSource::Flag),
        (None, Some(s)) => (s, SeedSource::Config),
        (None, None) => (rand::random(), SeedSource::Auto),
    }
}

/// Everything about a run that is not data: timing, seeds, notices and the
/// resolved settings. Kept apart so data files stay byte-identical.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub started_utc: String,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_source: Option<SeedSource>,
    pub threads: usize,
    pub settings: serde_json::Value,
    pub outputs: Vec<String>,
    pub notices: Vec<String>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl Metadata {
    pub fn new(command: &'static str, settings: &impl Serialize) -> Self {
        Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            started_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            elapsed_s: 0.0,
            seed: None,
            seed_source: None,
            threads: rayon::current_num_threads(),
            settings: serde_json::to_value(settings).expect("settings serialize"),
            outputs: Vec::new(),
            notices: Vec::new(),
            clock: Some(Instant::now()),
        }
    }

    pub fn seeded(mut self, seed: u64, source: SeedSource) -> Self {
        self.seed = Some(seed);
        self.seed_source = Some(source);
        self
    }

    pub fn output(&mut self, dir: &Path, file: &Path) {
        let rel = file.strip_prefix(dir).unwrap_or(file);
        self.outputs.push(rel.display().to_string());
    }

    /// Logs a notice and keeps it for the metadata file.
    pub fn notice(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.notices.push(msg);
    }

    pub fn write(mut self, dir: &Path) -> CliResult<PathBuf> {
        self.elapsed_s = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        let path = dir.join(METADATA_FILE);
        let mut text = serde_json::to_string_pretty(&self).expect("metadata serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_at(&path))?;
        Ok(path)
    }
}
