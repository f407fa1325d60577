//! Stationarity and invariance of DD-domain channels.
//!
//! Spectral similarity between windows (collinearity of DD power spectra)
//! yields quasi-stationary intervals; per-path coefficient similarity across
//! windows yields quasi-invariant intervals. Both are found by partitioning
//! the time axis into contiguous runs whose pairwise similarities all reach
//! a threshold.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd_estimator::{EstimatedPath, PeriodicDdGrid};
use crate::error::{Error, Result};

/// Default association tolerance of [`track_paths`], in (delay, Doppler) bins.
pub const DEFAULT_TOLERANCE: (f64, f64) = (0.5, 0.5);

/// Default similarity threshold.
pub const DEFAULT_ALPHA: f64 = 0.9;

/// Relative spread of time steps still accepted as uniform.
const STEP_TOLERANCE: f64 = 1e-6;

/// DD power `|h(τ, ν)|²` of one window; `n` rows by `m` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DdPowerSpectrum {
    pub m: usize,
    pub n: usize,
    pub data: Vec<f64>,
    pub time_s: f64,
}

impl DdPowerSpectrum {
    pub fn new(m: usize, n: usize, data: Vec<f64>, time_s: f64) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::config(format!(
                "{} power values for a {n}x{m} spectrum",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain(format!("spectrum entry {i} is {}", data[i])));
        }
        Ok(DdPowerSpectrum { m, n, data, time_s })
    }

    /// At least one strictly positive entry.
    pub fn is_valid(&self) -> bool {
        self.data.iter().any(|&p| p > 0.0)
    }

    fn peak(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

pub fn dd_power(grid: &PeriodicDdGrid, time_s: f64) -> DdPowerSpectrum {
    DdPowerSpectrum {
        m: grid.spec.m,
        n: grid.spec.n,
        data: grid.data.iter().map(|v| v.norm_sqr()).collect(),
        time_s,
    }
}

/// Collinearity of two DD power spectra, in `[0, 1]`.
pub fn cdd(a: &DdPowerSpectrum, b: &DdPowerSpectrum) -> Result<f64> {
    if (a.m, a.n) != (b.m, b.n) {
        return Err(Error::config(format!(
            "spectrum sizes differ: {}x{} vs {}x{}",
            a.n, a.m, b.n, b.m
        )));
    }
    let (pa, pb) = (a.peak(), b.peak());
    if pa == 0.0 || pb == 0.0 {
        return Err(Error::domain("collinearity of an all-zero spectrum"));
    }
    // Normalizing by the peaks keeps the squared sums away from underflow.
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data.iter().zip(&b.data) {
        let (x, y) = (x / pa, y / pb);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    Ok((dot / (na * nb).sqrt()).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    Cdd,
    DdTcc,
}

/// Symmetric `T × T` similarity between time instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub size: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    pub kind: SimilarityKind,
    pub time_axis: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Spacing of the time axis, or zero for a single instant.
    pub fn time_step_s(&self) -> f64 {
        if self.time_axis.len() < 2 {
            0.0
        } else {
            (self.time_axis[self.time_axis.len() - 1] - self.time_axis[0])
                / (self.time_axis.len() - 1) as f64
        }
    }
}

fn check_uniform(times: &[f64]) -> Result<()> {
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(Error::config(format!(
            "time axis must increase, got step {step}"
        )));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > STEP_TOLERANCE * step {
            return Err(Error::config(format!(
                "time axis is not uniform: step {} at index {} vs {step}",
                w[1] - w[0],
                i + 1
            )));
        }
    }
    Ok(())
}

/// Pairwise collinearity of a uniformly sampled spectrum sequence.
pub fn cdd_matrix(spectra: &[DdPowerSpectrum]) -> Result<SimilarityMatrix> {
    let t = spectra.len();
    if t < 2 {
        return Err(Error::config(format!(
            "collinearity matrix needs at least 2 spectra, got {t}"
        )));
    }
    let time_axis: Vec<f64> = spectra.iter().map(|s| s.time_s).collect();
    check_uniform(&time_axis)?;
    let rows: Vec<Vec<f64>> = (0..t)
        .into_par_iter()
        .map(|i| {
            (0..t)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal if spectra[i].is_valid() => Ok(1.0),
                    std::cmp::Ordering::Greater => Ok(f64::NAN),
                    _ => cdd(&spectra[i], &spectra[j])
                        .map_err(|e| Error::domain(format!("spectra ({i}, {j}): {e}"))),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<f64> = rows.into_iter().flatten().collect();
    for i in 0..t {
        for j in 0..i {
            entries[i * t + j] = entries[j * t + i];
        }
    }
    Ok(SimilarityMatrix {
        size: t,
        entries,
        kind: SimilarityKind::Cdd,
        time_axis,
    })
}

/// How runs of mutually similar instants are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Agglomerative merging of adjacent runs by their weakest pair,
    /// strongest merge first. Runs are nested across thresholds.
    #[default]
    CompleteLinkage,
    /// Left-to-right: extend the current run while every pair stays above
    /// the threshold.
    Greedy,
    /// Left-to-right: extend while the run's first instant stays similar
    /// to each new one.
    Anchor,
}

/// Contiguous runs of a time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub alpha: f64,
    /// Inclusive index ranges.
    pub runs: Vec<(usize, usize)>,
    /// `(start_s, end_s)`; the end includes the last window's step.
    pub intervals: Vec<(f64, f64)>,
    pub t_max_ms: f64,
    pub t_min_ms: f64,
    pub t_mean_ms: f64,
}

impl IntervalReport {
    fn empty(alpha: f64) -> Self {
        IntervalReport {
            alpha,
            runs: Vec::new(),
            intervals: Vec::new(),
            t_max_ms: 0.0,
            t_min_ms: 0.0,
            t_mean_ms: 0.0,
        }
    }

    fn from_runs(alpha: f64, runs: Vec<(usize, usize)>, times: &[f64], step_s: f64) -> Self {
        let intervals: Vec<(f64, f64)> = runs
            .iter()
            .map(|&(i, j)| (times[i], times[j] + step_s))
            .collect();
        Self::from_parts(alpha, runs, intervals)
    }

    /// Rebuilds a report from its runs and their time spans.
    pub fn from_parts(alpha: f64, runs: Vec<(usize, usize)>, intervals: Vec<(f64, f64)>) -> Self {
        if runs.is_empty() {
            return Self::empty(alpha);
        }
        let lengths: Vec<f64> = intervals.iter().map(|(a, b)| (b - a) * 1e3).collect();
        IntervalReport {
            alpha,
            t_max_ms: lengths.iter().copied().fold(f64::MIN, f64::max),
            t_min_ms: lengths.iter().copied().fold(f64::MAX, f64::min),
            t_mean_ms: lengths.iter().sum::<f64>() / lengths.len() as f64,
            runs,
            intervals,
        }
    }

    pub fn lengths_ms(&self) -> Vec<f64> {
        self.intervals.iter().map(|(a, b)| (b - a) * 1e3).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "threshold must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Weakest pairwise similarity inside every run `[i..=j]`, row-major.
fn run_minima(t: usize, sim: &impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut w = vec![f64::INFINITY; t * t];
    for len in 1..t {
        for i in 0..t - len {
            let j = i + len;
            let inner = if len == 1 {
                f64::INFINITY
            } else {
                w[(i + 1) * t + j].min(w[i * t + j - 1])
            };
            w[i * t + j] = inner.min(sim(i, j));
        }
    }
    w
}

/// Partitions `0..t` into contiguous runs whose pairs all reach `alpha`.
pub fn partition_runs(
    t: usize,
    sim: impl Fn(usize, usize) -> f64,
    alpha: f64,
    mode: RunMode,
) -> Vec<(usize, usize)> {
    if t == 0 {
        return Vec::new();
    }
    match mode {
        RunMode::Anchor => {
            let mut runs = Vec::new();
            let mut i = 0;
            while i < t {
                let mut j = i;
                while j + 1 < t && sim(i, j + 1) >= alpha {
                    j += 1;
                }
                runs.push((i, j));
                i = j + 1;
            }
            runs
        }
        RunMode::Greedy => {
            let w = run_minima(t, &sim);
            let mut runs = Vec::new();
            let mut i = 0;
            while i < t {
                let mut j = i;
                while j + 1 < t && w[i * t + j + 1] >= alpha {
                    j += 1;
                }
                runs.push((i, j));
                i = j + 1;
            }
            runs
        }
        RunMode::CompleteLinkage => {
            let w = run_minima(t, &sim);
            let mut runs: Vec<(usize, usize)> = (0..t).map(|i| (i, i)).collect();
            // Merged weakest pair of each adjacent couple of runs. With
            // strongest-first merging this equals their complete linkage.
            let link = |a: (usize, usize), b: (usize, usize)| w[a.0 * t + b.1];
            let mut links: Vec<f64> = runs.windows(2).map(|p| link(p[0], p[1])).collect();
            loop {
                let best =
                    links
                        .iter()
                        .enumerate()
                        .fold(None, |acc: Option<(usize, f64)>, (i, &v)| match acc {
                            Some((_, b)) if b >= v => acc,
                            _ => Some((i, v)),
                        });
                let Some((i, v)) = best else { break };
                if !(v >= alpha) {
                    break;
                }
                runs[i] = (runs[i].0, runs[i + 1].1);
                runs.remove(i + 1);
                links.remove(i);
                if i > 0 {
                    links[i - 1] = link(runs[i - 1], runs[i]);
                }
                if i < links.len() {
                    links[i] = link(runs[i], runs[i + 1]);
                }
            }
            runs
        }
    }
}

pub fn quasi_stationary_intervals(m: &SimilarityMatrix, alpha: f64) -> Result<IntervalReport> {
    quasi_stationary_intervals_with(m, alpha, RunMode::default())
}

pub fn quasi_stationary_intervals_with(
    m: &SimilarityMatrix,
    alpha: f64,
    mode: RunMode,
) -> Result<IntervalReport> {
    check_alpha(alpha)?;
    if m.kind != SimilarityKind::Cdd {
        return Err(Error::config(
            "quasi-stationary intervals need a collinearity matrix",
        ));
    }
    let runs = partition_runs(m.size, |i, j| m.get(i, j), alpha, mode);
    Ok(IntervalReport::from_runs(
        alpha,
        runs,
        &m.time_axis,
        m.time_step_s(),
    ))
}

/// One window's estimate of a tracked path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub window: usize,
    pub l_hat: f64,
    pub k_hat: f64,
    pub h_hat: Complex64,
}

/// Estimates of one physical path across windows, in window order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrack {
    pub points: Vec<TrackPoint>,
    pub tolerance: (f64, f64),
    pub window_step_s: f64,
}

impl PathTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.h_hat).collect()
    }

    fn last(&self) -> &TrackPoint {
        self.points
            .last()
            .expect("tracks are created with one point")
    }
}

/// Greedy nearest-neighbour association of per-window estimates.
///
/// Within a window, candidate (estimate, track) pairs inside the tolerance
/// box are taken closest first, each estimate and track at most once.
/// A track is compared through its most recent point, so a missed window
/// leaves a gap rather than starting a new track.
pub fn track_paths(
    windows: &[Vec<EstimatedPath>],
    tolerance: (f64, f64),
    window_step_s: f64,
) -> Vec<PathTrack> {
    let (tl, tk) = tolerance;
    let mut tracks: Vec<PathTrack> = Vec::new();
    for (w, estimates) in windows.iter().enumerate() {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (e, est) in estimates.iter().enumerate() {
            for (t, track) in tracks.iter().enumerate() {
                let last = track.last();
                let (dl, dk) = (
                    (est.l_hat - last.l_hat).abs(),
                    (est.k_hat - last.k_hat).abs(),
                );
                if dl <= tl && dk <= tk {
                    let d = (dl / tl.max(f64::MIN_POSITIVE)).powi(2)
                        + (dk / tk.max(f64::MIN_POSITIVE)).powi(2);
                    pairs.push((d, e, t));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let mut used_est = vec![false; estimates.len()];
        let mut used_track = vec![false; tracks.len()];
        for (_, e, t) in pairs {
            if used_est[e] || used_track[t] {
                continue;
            }
            used_est[e] = true;
            used_track[t] = true;
            let est = &estimates[e];
            tracks[t].points.push(TrackPoint {
                window: w,
                l_hat: est.l_hat,
                k_hat: est.k_hat,
                h_hat: est.h_hat,
            });
        }
        for est in estimates
            .iter()
            .zip(&used_est)
            .filter(|(_, used)| !**used)
            .map(|(est, _)| est)
        {
            tracks.push(PathTrack {
                points: vec![TrackPoint {
                    window: w,
                    l_hat: est.l_hat,
                    k_hat: est.k_hat,
                    h_hat: est.h_hat,
                }],
                tolerance,
                window_step_s,
            });
        }
    }
    tracks
}

/// Amplitude-weighted mean delay and Doppler of a track.
pub fn weighted_params(track: &PathTrack) -> Result<(f64, f64)> {
    let total: f64 = track.points.iter().map(|p| p.h_hat.norm()).sum();
    if !(total > 0.0) {
        return Err(Error::domain(
            "weighted parameters of a track with no nonzero coefficient",
        ));
    }
    let l = track
        .points
        .iter()
        .map(|p| p.l_hat * p.h_hat.norm())
        .sum::<f64>()
        / total;
    let k = track
        .points
        .iter()
        .map(|p| p.k_hat * p.h_hat.norm())
        .sum::<f64>()
        / total;
    Ok((l, k))
}

/// DD temporal correlation coefficient of two coefficient samples.
pub fn dd_tcc(h_b: Complex64, h_c: Complex64) -> Result<f64> {
    let (a, b) = (h_b.norm(), h_c.norm());
    let top = a.max(b);
    if top == 0.0 {
        return Err(Error::domain("correlation of two zero coefficients"));
    }
    // |h_b·h_c*| / max(|h_b|², |h_c|²) without squaring.
    Ok(a.min(b) / top)
}

/// Two zero coefficients count as identical.
fn tcc_or_one(a: Complex64, b: Complex64) -> f64 {
    dd_tcc(a, b).unwrap_or(1.0)
}

/// DD-TCC matrix of a track; the time axis follows the track's windows.
pub fn dd_tcc_matrix(track: &PathTrack) -> SimilarityMatrix {
    let t = track.len();
    let mut entries = vec![0.0; t * t];
    for i in 0..t {
        for j in 0..t {
            entries[i * t + j] = tcc_or_one(track.points[i].h_hat, track.points[j].h_hat);
        }
    }
    SimilarityMatrix {
        size: t,
        entries,
        kind: SimilarityKind::DdTcc,
        time_axis: track
            .points
            .iter()
            .map(|p| p.window as f64 * track.window_step_s)
            .collect(),
    }
}

pub fn quasi_invariant_intervals(track: &PathTrack, alpha: f64) -> Result<IntervalReport> {
    quasi_invariant_intervals_with(track, alpha, RunMode::default())
}

/// Quasi-invariant intervals of one track. Missed windows break runs.
pub fn quasi_invariant_intervals_with(
    track: &PathTrack,
    alpha: f64,
    mode: RunMode,
) -> Result<IntervalReport> {
    check_alpha(alpha)?;
    if track.len() < 2 {
        return Ok(IntervalReport::empty(alpha));
    }
    let pts = &track.points;
    let mut runs = Vec::new();
    let mut start = 0;
    for end in 1..=pts.len() {
        if end == pts.len() || pts[end].window != pts[end - 1].window + 1 {
            let seg = &pts[start..end];
            let local = partition_runs(
                seg.len(),
                |i, j| tcc_or_one(seg[i].h_hat, seg[j].h_hat),
                alpha,
                mode,
            );
            runs.extend(local.into_iter().map(|(i, j)| (start + i, start + j)));
            start = end;
        }
    }
    let times: Vec<f64> = pts
        .iter()
        .map(|p| p.window as f64 * track.window_step_s)
        .collect();
    Ok(IntervalReport::from_runs(
        alpha,
        runs,
        &times,
        track.window_step_s,
    ))
}
