use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PilotSymbols, TfGrid};

/// One physical propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub tau_s: f64,
    pub nu_hz: f64,
    pub h: Complex64,
}

/// Instantaneous physical channel: a set of paths observed at `t_offset_s`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub t_offset_s: f64,
}

impl PathSet {
    pub fn new(paths: Vec<Path>, t_offset_s: f64) -> Self {
        PathSet { paths, t_offset_s }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `(l_i, k_i)` for every path.
    pub fn normalized(&self, grid: &GridSpec) -> Vec<(f64, f64)> {
        self.paths
            .iter()
            .map(|p| {
                (
                    grid.normalized_delay(p.tau_s),
                    grid.normalized_doppler(p.nu_hz),
                )
            })
            .collect()
    }

    pub fn check_alias_free(&self, grid: &GridSpec) -> Result<()> {
        for (i, (l, k)) in self.normalized(grid).into_iter().enumerate() {
            grid.check_alias_free(l, k)
                .map_err(|e| Error::config(format!("path {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.h.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: f64) -> PathSet {
        PathSet {
            paths: self
                .paths
                .iter()
                .map(|p| Path { h: p.h * c, ..*p })
                .collect(),
            t_offset_s: self.t_offset_s,
        }
    }
}

/// Noiseless channel frequency response `H(m, n)` of a block.
pub fn tf_response(paths: &PathSet, grid: &GridSpec, m: usize, n: usize) -> Complex64 {
    let (mf, nf) = (grid.m as f64, grid.n as f64);
    paths
        .normalized(grid)
        .iter()
        .zip(&paths.paths)
        .map(|(&(l, k), p)| {
            p.h * Complex64::from_polar(1.0, TAU * (n as f64 * k / nf - m as f64 * l / mf))
        })
        .sum()
}

fn complex_noise<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn check_pilots(grid: &GridSpec, pilots: &PilotSymbols) -> Result<()> {
    grid.validate()?;
    if pilots.values.len() != grid.pilot_count() {
        return Err(Error::config(format!(
            "{} pilot symbols supplied for {} pilot positions",
            pilots.values.len(),
            grid.pilot_count()
        )));
    }
    Ok(())
}

/// Received pilot grid `Y = H·X_p + w` at pilot positions, zero elsewhere.
pub fn synthesize_tf_grid<R: Rng + ?Sized>(
    paths: &PathSet,
    grid: &GridSpec,
    pilots: &PilotSymbols,
    noise_power: f64,
    rng: &mut R,
) -> Result<TfGrid> {
    check_pilots(grid, pilots)?;
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::domain(format!(
            "noise power must be non-negative, got {noise_power}"
        )));
    }
    let (mf, nf) = (grid.m as f64, grid.n as f64);
    let normalized = paths.normalized(grid);
    // Separable phasors per path: delay over subcarriers, Doppler over symbols.
    let delay: Vec<Vec<Complex64>> = normalized
        .iter()
        .map(|&(l, _)| {
            (0..grid.m)
                .map(|m| Complex64::from_polar(1.0, -TAU * m as f64 * l / mf))
                .collect()
        })
        .collect();
    let doppler: Vec<Vec<Complex64>> = normalized
        .iter()
        .zip(&paths.paths)
        .map(|(&(_, k), p)| {
            (0..grid.n)
                .map(|n| p.h * Complex64::from_polar(1.0, TAU * n as f64 * k / nf))
                .collect()
        })
        .collect();

    let mut out = TfGrid::zeros(*grid);
    for ((m, n), x) in grid.pilot_positions().zip(&pilots.values) {
        let h: Complex64 = (0..paths.len()).map(|i| doppler[i][n] * delay[i][m]).sum();
        let mut y = h * x;
        if noise_power > 0.0 {
            y += complex_noise(rng, noise_power);
        }
        *out.at_mut(m, n) = y;
    }
    Ok(out)
}

/// Received pilot grid of a long stream whose channel changes from symbol to
/// symbol. `per_symbol[n]` holds the paths seen during symbol `n`; their
/// coefficients already carry any Doppler rotation, so only the delays shape
/// the response across subcarriers.
pub fn synthesize_tf_stream<R: Rng + ?Sized>(
    per_symbol: &[PathSet],
    grid: &GridSpec,
    pilots: &PilotSymbols,
    noise_power: f64,
    rng: &mut R,
) -> Result<TfGrid> {
    check_pilots(grid, pilots)?;
    if per_symbol.len() != grid.n {
        return Err(Error::config(format!(
            "{} path sets supplied for a {}-symbol stream",
            per_symbol.len(),
            grid.n
        )));
    }
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::domain(format!(
            "noise power must be non-negative, got {noise_power}"
        )));
    }
    let mf = grid.m as f64;
    let mut out = TfGrid::zeros(*grid);
    for ((m, n), x) in grid.pilot_positions().zip(&pilots.values) {
        let h: Complex64 = per_symbol[n]
            .paths
            .iter()
            .map(|p| {
                p.h * Complex64::from_polar(
                    1.0,
                    -TAU * m as f64 * grid.normalized_delay(p.tau_s) / mf,
                )
            })
            .sum();
        let mut y = h * x;
        if noise_power > 0.0 {
            y += complex_noise(rng, noise_power);
        }
        *out.at_mut(m, n) = y;
    }
    Ok(out)
}
