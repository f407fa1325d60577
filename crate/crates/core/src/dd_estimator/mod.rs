//! Delay-Doppler channel estimation from pilot-bearing resource grids.
//!
//! The chain is LS pilot extraction, a 2-D transform to the periodic DD
//! grid, peak detection against a noise floor and two-sample off-grid
//! refinement with successive cancellation.

mod kernel;

pub use kernel::{delay_kernel, dirichlet, doppler_kernel};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PilotSymbols, TfGrid};

/// Kernel magnitudes below this make the coefficient division meaningless.
const DEGENERATE_KERNEL: f64 = 1e-12;

/// Lowest median floor relative to the strongest bin (-240 dB).
const ROUNDING_FLOOR: f64 = 1e-24;

/// LS channel estimate on the pilot lattice, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTfFading {
    pub spec: GridSpec,
    /// `n` rows (symbols) by `m` columns (subcarriers).
    pub data: Vec<Complex64>,
}

impl SparseTfFading {
    pub fn at(&self, m: usize, n: usize) -> Complex64 {
        self.data[n * self.spec.m + m]
    }
}

/// Coarse DD estimate; `n` rows (Doppler bins) by `m` columns (delay bins).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDdGrid {
    pub spec: GridSpec,
    pub data: Vec<Complex64>,
}

impl PeriodicDdGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        PeriodicDdGrid {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.spec.m + l]
    }

    pub fn power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Largest absolute deviation from exact 2-D periodicity.
    pub fn max_periodic_deviation(&self) -> f64 {
        let (m, n) = (self.spec.m, self.spec.n);
        let (lp, kp) = (self.spec.delay_period(), self.spec.doppler_period());
        let mut worst = 0.0f64;
        for k in 0..n {
            for l in 0..m {
                let v = self.at(k, l);
                worst = worst.max((self.at((k + kp) % n, l) - v).norm());
                worst = worst.max((self.at(k, (l + lp) % m) - v).norm());
            }
        }
        worst
    }

    /// [`Self::max_periodic_deviation`] relative to the largest magnitude.
    pub fn periodicity_error(&self) -> f64 {
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            self.max_periodic_deviation() / scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFloorMethod {
    Known,
    MedianOfGrid,
}

/// Per-bin noise power of a coarse DD grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorEstimate {
    pub power: f64,
    pub method: NoiseFloorMethod,
}

impl NoiseFloorEstimate {
    pub fn known(power: f64) -> Result<Self> {
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::domain(format!(
                "noise floor must be positive, got {power}"
            )));
        }
        Ok(NoiseFloorEstimate {
            power,
            method: NoiseFloorMethod::Known,
        })
    }

    /// Floor of a coarse grid built from pilots observed in white noise of
    /// power `noise_power` per resource element.
    pub fn from_pilot_noise(spec: &GridSpec, noise_power: f64) -> Result<Self> {
        Self::known(noise_power * (spec.d_f * spec.d_t) as f64)
    }
}

/// One refined path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPath {
    /// Fractional delay in bins, within `[-1/2, M/d_f - 1/2)`.
    pub l_hat: f64,
    /// Fractional Doppler in bins, within `[-N/(2·d_t), N/(2·d_t))`.
    pub k_hat: f64,
    pub h_hat: Complex64,
    /// Detected peak `(k0, l0)`.
    pub peak_index: (usize, usize),
    /// Residual grid power after cancelling this path, relative to the
    /// input grid, in dB.
    pub residual_power_db: f64,
}

impl EstimatedPath {
    pub fn tau_s(&self, spec: &GridSpec) -> f64 {
        spec.delay_from_bins(self.l_hat)
    }

    pub fn nu_hz(&self, spec: &GridSpec) -> f64 {
        spec.doppler_from_bins(self.k_hat)
    }
}

/// A peak that could not be refined.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub peak_index: (usize, usize),
    pub reason: String,
}

/// Output of [`refine_paths`].
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub paths: Vec<EstimatedPath>,
    pub failures: Vec<PathFailure>,
    /// Superposition of the rebuilt path responses.
    pub estimate: PeriodicDdGrid,
    /// Input grid minus `estimate`.
    pub residual: PeriodicDdGrid,
}

/// LS division of the received pilots by the transmitted ones.
pub fn extract_pilot_fading(rx: &TfGrid, tx_pilots: &PilotSymbols) -> Result<SparseTfFading> {
    let spec = rx.spec;
    spec.validate()?;
    if tx_pilots.values.len() != spec.pilot_count() {
        return Err(Error::config(format!(
            "{} pilot symbols supplied for {} pilot positions",
            tx_pilots.values.len(),
            spec.pilot_count()
        )));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); spec.len()];
    for ((m, n), x) in spec.pilot_positions().zip(&tx_pilots.values) {
        if x.norm_sqr() == 0.0 {
            return Err(Error::domain(format!(
                "pilot symbol at (m={m}, n={n}) is zero"
            )));
        }
        data[n * spec.m + m] = rx.at(m, n) / x;
    }
    Ok(SparseTfFading { spec, data })
}

/// Inverse DFT over subcarriers and forward DFT over symbols, scaled so a
/// path of gain `h` produces `h·C_delay·C_doppler`.
pub fn coarse_dd(fading: &SparseTfFading) -> PeriodicDdGrid {
    let spec = fading.spec;
    let (m, n) = (spec.m, spec.n);
    let mut data = fading.data.clone();
    let mut planner = FftPlanner::<f64>::new();

    let ifft_m = planner.plan_fft_inverse(m);
    for row in data.chunks_exact_mut(m) {
        ifft_m.process(row);
    }

    let fft_n = planner.plan_fft_forward(n);
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..m {
        for (k, c) in column.iter_mut().enumerate() {
            *c = data[k * m + l];
        }
        fft_n.process(&mut column);
        for (k, c) in column.iter().enumerate() {
            data[k * m + l] = *c;
        }
    }

    let scale = (spec.d_f * spec.d_t) as f64 / ((m * n) as f64).sqrt();
    for v in &mut data {
        *v *= scale;
    }
    PeriodicDdGrid { spec, data }
}

fn fundamental_powers(grid: &PeriodicDdGrid) -> Vec<f64> {
    let (lp, kp) = (grid.spec.delay_period(), grid.spec.doppler_period());
    (0..kp)
        .flat_map(|k| (0..lp).map(move |l| (k, l)))
        .map(|(k, l)| grid.at(k, l).norm_sqr())
        .collect()
}

/// Median-based noise floor over one fundamental period. The median of an
/// exponential variable is `ln 2` times its mean.
pub fn estimate_noise_floor(grid: &PeriodicDdGrid) -> NoiseFloorEstimate {
    let mut p = fundamental_powers(grid);
    p.sort_by(f64::total_cmp);
    let n = p.len();
    let median = if n % 2 == 1 {
        p[n / 2]
    } else {
        0.5 * (p[n / 2 - 1] + p[n / 2])
    };
    // Noiseless grids have a median at rounding level; keep the floor well
    // above that so rounding ripples never pass as paths.
    let peak = p[n - 1];
    NoiseFloorEstimate {
        power: (median / std::f64::consts::LN_2)
            .max(peak * ROUNDING_FLOOR)
            .max(f64::MIN_POSITIVE),
        method: NoiseFloorMethod::MedianOfGrid,
    }
}

/// Bins `(k0, l0)` of the fundamental period whose power exceeds the floor
/// by more than `threshold_db` and that are local maxima of their periodic
/// 8-neighbourhood, strongest first.
///
/// On a plateau only the first bin in raster order survives: a bin must be
/// strictly above neighbours that precede it and at least equal to those
/// that follow it.
pub fn detect_mpc(
    grid: &PeriodicDdGrid,
    floor: &NoiseFloorEstimate,
    threshold_db: f64,
) -> Result<Vec<(usize, usize)>> {
    if !(threshold_db > 0.0 && threshold_db.is_finite()) {
        return Err(Error::domain(format!(
            "detection threshold must be positive, got {threshold_db} dB"
        )));
    }
    let (lp, kp) = (grid.spec.delay_period(), grid.spec.doppler_period());
    let power = fundamental_powers(grid);
    let threshold = floor.power * 10f64.powf(threshold_db / 10.0);
    let mut hits = Vec::new();
    for k in 0..kp {
        for l in 0..lp {
            let idx = k * lp + l;
            let p = power[idx];
            if !(p > threshold) {
                continue;
            }
            let mut is_peak = true;
            'scan: for dk in [kp - 1, 0, 1] {
                for dl in [lp - 1, 0, 1] {
                    let (nk, nl) = ((k + dk) % kp, (l + dl) % lp);
                    let nidx = nk * lp + nl;
                    if nidx == idx {
                        continue;
                    }
                    let q = power[nidx];
                    if q > p || (q == p && nidx < idx) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                hits.push((p, (k, l)));
            }
        }
    }
    hits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(hits.into_iter().map(|(_, kl)| kl).collect())
}

/// How the fractional offset is read off the peak and its larger neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolator {
    /// Exact inversion of the Dirichlet magnitude ratio for the grid period.
    #[default]
    Dirichlet,
    /// `a1 / (a0 + a1)`, the large-period limit of the Dirichlet inversion.
    Ratio,
}

impl Interpolator {
    /// Signed offset toward the larger neighbour; ties go to the `+1` side.
    fn offset(self, center: f64, below: f64, above: f64, period: usize) -> f64 {
        let (dir, side) = if above >= below {
            (1.0, above)
        } else {
            (-1.0, below)
        };
        if !(center + side > 0.0) {
            return 0.0;
        }
        let magnitude = match self {
            Interpolator::Ratio => side / (center + side),
            Interpolator::Dirichlet => {
                if center == 0.0 || period < 2 {
                    side / (center + side)
                } else {
                    // |D(ε)| / |D(ε-1)| = sin(π(1-ε)/L) / sin(πε/L) solved for ε.
                    let r = side / center;
                    let u = std::f64::consts::PI / period as f64;
                    (r * u.sin()).atan2(1.0 + r * u.cos()) / u
                }
            }
        };
        dir * magnitude
    }
}

/// Settings of [`refine_paths_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub interpolator: Interpolator,
    /// Extra cancellation passes after the first one. Each pass puts one path
    /// back onto the residual, estimates it again with the others removed and
    /// cancels it anew. Zero gives a single successive-cancellation pass.
    pub sweeps: usize,
    /// Passes stop early once no delay or Doppler estimate moves by more
    /// than this many bins.
    pub tolerance_bins: f64,
    /// Polish each interpolated estimate by maximizing the matched-filter
    /// output around it. Interpolation alone is biased by the leakage of
    /// other paths; the polished estimate is the per-path least-squares fit.
    pub polish: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            interpolator: Interpolator::Dirichlet,
            sweeps: 16,
            tolerance_bins: 1e-7,
            polish: true,
        }
    }
}

impl RefineOptions {
    /// One successive-cancellation pass with the large-period ratio rule.
    pub fn single_pass() -> Self {
        RefineOptions {
            interpolator: Interpolator::Ratio,
            sweeps: 0,
            tolerance_bins: 0.0,
            polish: false,
        }
    }
}

/// Off-grid refinement of detected peaks with successive cancellation.
pub fn refine_paths(grid: &PeriodicDdGrid, peaks: &[(usize, usize)]) -> Result<Refinement> {
    refine_paths_with(grid, peaks, &RefineOptions::default())
}

struct Working<'a> {
    spec: GridSpec,
    grid: &'a mut PeriodicDdGrid,
    interpolator: Interpolator,
    polish: bool,
}

/// Folds a delay into `[-1/2, L - 1/2)` bins, so a path at zero delay does
/// not jump between both ends of the period from one estimate to the next.
fn wrap_delay(l: f64, period: usize) -> f64 {
    (l + 0.5).rem_euclid(period as f64) - 0.5
}

/// Golden-section maximum of `f` on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > POLISH_TOLERANCE_BINS {
        if fa >= fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

const POLISH_TOLERANCE_BINS: f64 = 1e-9;
const POLISH_ROUNDS: usize = 8;
/// Relative gain the polished fit needs over plain interpolation; ties at
/// round-off keep the exact interpolated value.
const POLISH_MARGIN: f64 = 1e-10;

impl Working<'_> {
    /// Estimates `(l̂, k̂, ĥ)` from the peak at `(k0, l0)` of the current grid.
    fn estimate(&self, k0: usize, l0: usize) -> std::result::Result<(f64, f64, Complex64), String> {
        let (lp, kp) = (self.spec.delay_period(), self.spec.doppler_period());
        let g = &*self.grid;
        let peak = g.at(k0, l0);
        if !(peak.re.is_finite() && peak.im.is_finite()) {
            return Err(format!("peak value {peak} is not finite"));
        }
        let a0 = peak.norm();
        let l_off = self.interpolator.offset(
            a0,
            g.at(k0, (l0 + lp - 1) % lp).norm(),
            g.at(k0, (l0 + 1) % lp).norm(),
            lp,
        );
        let k_off = self.interpolator.offset(
            a0,
            g.at((k0 + kp - 1) % kp, l0).norm(),
            g.at((k0 + 1) % kp, l0).norm(),
            kp,
        );
        let l_hat = wrap_delay(l0 as f64 + l_off, lp);
        let half = kp as f64 / 2.0;
        let k_hat = (k0 as f64 + k_off + half).rem_euclid(kp as f64) - half;
        let c = delay_kernel(&self.spec, l_hat, l0 as f64)
            * doppler_kernel(&self.spec, k_hat, k0 as f64);
        if !(c.norm() >= DEGENERATE_KERNEL) {
            return Err(format!(
                "sampling kernel magnitude {:.3e} at the peak is degenerate",
                c.norm()
            ));
        }
        if !self.polish {
            return Ok((l_hat, k_hat, peak / c));
        }
        let h = peak / c;
        let (l_pol, k_pol, h_pol) = self.polish(l_hat, k_hat);
        // Interpolation is exact for an isolated path, so the polished fit
        // only replaces it when it explains more of the grid.
        let base = self.misfit(l_hat, k_hat, h);
        if self.misfit(l_pol, k_pol, h_pol) < base - POLISH_MARGIN * base.abs() {
            return Ok((
                wrap_delay(l_pol, lp),
                (k_pol + half).rem_euclid(kp as f64) - half,
                h_pol,
            ));
        }
        Ok((l_hat, k_hat, h))
    }

    /// `‖R − h·a(l, k)‖² − ‖R‖²`.
    fn misfit(&self, l_hat: f64, k_hat: f64, h: Complex64) -> f64 {
        let spec = &self.spec;
        let u: Vec<Complex64> = (0..spec.m)
            .map(|l| delay_kernel(spec, l_hat, l as f64))
            .collect();
        let v: Vec<Complex64> = (0..spec.n)
            .map(|k| doppler_kernel(spec, k_hat, k as f64))
            .collect();
        let inner: Complex64 = self
            .grid
            .data
            .chunks_exact(spec.m)
            .zip(&v)
            .map(|(row, vk)| {
                vk.conj()
                    * row
                        .iter()
                        .zip(&u)
                        .map(|(r, ul)| ul.conj() * r)
                        .sum::<Complex64>()
            })
            .sum();
        let energy = u.iter().map(|x| x.norm_sqr()).sum::<f64>()
            * v.iter().map(|x| x.norm_sqr()).sum::<f64>();
        h.norm_sqr() * energy - 2.0 * (h.conj() * inner).re
    }

    /// Alternating one-dimensional maximization of `|vᴴ R u|`, where `u` and
    /// `v` are the delay and Doppler responses. The response is separable,
    /// so each axis reduces to a length-`M` or length-`N` correlation.
    fn polish(&self, mut l_hat: f64, mut k_hat: f64) -> (f64, f64, Complex64) {
        let spec = &self.spec;
        let (m, n) = (spec.m, spec.n);
        let data = &self.grid.data;
        let delay = |l_path: f64| -> Vec<Complex64> {
            (0..m)
                .map(|l| delay_kernel(spec, l_path, l as f64))
                .collect()
        };
        let doppler = |k_path: f64| -> Vec<Complex64> {
            (0..n)
                .map(|k| doppler_kernel(spec, k_path, k as f64))
                .collect()
        };
        // Σ_k conj(v_k)·R[k, ·] and Σ_l conj(u_l)·R[·, l].
        let fold_rows = |v: &[Complex64]| -> Vec<Complex64> {
            let mut w = vec![Complex64::new(0.0, 0.0); m];
            for (k, vk) in v.iter().enumerate() {
                let vk = vk.conj();
                for (acc, r) in w.iter_mut().zip(&data[k * m..(k + 1) * m]) {
                    *acc += vk * r;
                }
            }
            w
        };
        let fold_cols = |u: &[Complex64]| -> Vec<Complex64> {
            data.chunks_exact(m)
                .map(|row| row.iter().zip(u).map(|(r, ul)| ul.conj() * r).sum())
                .collect()
        };
        let corr = |w: &[Complex64], a: &[Complex64]| -> Complex64 {
            w.iter().zip(a).map(|(x, y)| y.conj() * x).sum()
        };
        for _ in 0..POLISH_ROUNDS {
            let (l_old, k_old) = (l_hat, k_hat);
            let w = fold_rows(&doppler(k_hat));
            l_hat = golden_max(l_hat - 0.5, l_hat + 0.5, |l| corr(&w, &delay(l)).norm_sqr());
            let w = fold_cols(&delay(l_hat));
            k_hat = golden_max(k_hat - 0.5, k_hat + 0.5, |k| {
                corr(&w, &doppler(k)).norm_sqr()
            });
            if (l_hat - l_old).abs().max((k_hat - k_old).abs()) <= POLISH_TOLERANCE_BINS {
                break;
            }
        }
        let (u, v) = (delay(l_hat), doppler(k_hat));
        let energy = u.iter().map(|x| x.norm_sqr()).sum::<f64>()
            * v.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let h = corr(&fold_cols(&u), &v) / energy;
        (l_hat, k_hat, h)
    }

    /// Adds `sign·h·C_delay·C_doppler` of a path to the grid.
    fn apply(&mut self, l_hat: f64, k_hat: f64, h: Complex64, sign: f64) {
        kernel::accumulate_response(&self.spec, l_hat, k_hat, h * sign, &mut self.grid.data);
    }
}

pub fn refine_paths_with(
    grid: &PeriodicDdGrid,
    peaks: &[(usize, usize)],
    options: &RefineOptions,
) -> Result<Refinement> {
    let spec = grid.spec;
    let (lp, kp) = (spec.delay_period(), spec.doppler_period());
    for &(k0, l0) in peaks {
        if k0 >= kp || l0 >= lp {
            return Err(Error::domain(format!(
                "peak ({k0}, {l0}) lies outside the {kp}x{lp} fundamental period"
            )));
        }
    }
    let original_power = grid.power();
    let mut residual = grid.clone();
    let mut work = Working {
        spec,
        grid: &mut residual,
        interpolator: options.interpolator,
        polish: options.polish,
    };
    let mut found: Vec<((usize, usize), f64, f64, Complex64)> = Vec::with_capacity(peaks.len());
    let mut failures = Vec::new();

    for &(k0, l0) in peaks {
        match work.estimate(k0, l0) {
            Ok((l_hat, k_hat, h)) => {
                work.apply(l_hat, k_hat, h, -1.0);
                found.push(((k0, l0), l_hat, k_hat, h));
            }
            Err(reason) => failures.push(PathFailure {
                peak_index: (k0, l0),
                reason,
            }),
        }
    }

    for _ in 0..options.sweeps {
        let mut moved = 0.0f64;
        for entry in found.iter_mut() {
            let ((k0, l0), l_old, k_old, h_old) = *entry;
            let before = work.grid.power();
            work.apply(l_old, k_old, h_old, 1.0);
            let Ok((l_hat, k_hat, h)) = work.estimate(k0, l0) else {
                work.apply(l_old, k_old, h_old, -1.0);
                continue;
            };
            work.apply(l_hat, k_hat, h, -1.0);
            // Only accept updates that lower the residual, so passes never
            // make the fit worse.
            if work.grid.power() > before {
                work.apply(l_hat, k_hat, h, 1.0);
                work.apply(l_old, k_old, h_old, -1.0);
                continue;
            }
            let dl = (l_hat - l_old + lp as f64 / 2.0).rem_euclid(lp as f64) - lp as f64 / 2.0;
            let dk = (k_hat - k_old + kp as f64 / 2.0).rem_euclid(kp as f64) - kp as f64 / 2.0;
            moved = moved.max(dl.abs()).max(dk.abs());
            *entry = ((k0, l0), l_hat, k_hat, h);
        }
        if moved <= options.tolerance_bins {
            break;
        }
    }

    let mut estimate = PeriodicDdGrid::zeros(spec);
    let mut paths = Vec::with_capacity(found.len());
    for (peak_index, l_hat, k_hat, h_hat) in found {
        kernel::accumulate_response(&spec, l_hat, k_hat, h_hat, &mut estimate.data);
        let left: f64 = grid
            .data
            .iter()
            .zip(&estimate.data)
            .map(|(g, e)| (g - e).norm_sqr())
            .sum();
        let residual_power_db = if original_power > 0.0 {
            10.0 * (left / original_power).log10()
        } else {
            f64::NEG_INFINITY
        };
        paths.push(EstimatedPath {
            l_hat,
            k_hat,
            h_hat,
            peak_index,
            residual_power_db,
        });
    }
    Ok(Refinement {
        paths,
        failures,
        estimate,
        residual,
    })
}

/// Superposition of the periodic responses of `paths`.
pub fn reconstruct_dd(paths: &[EstimatedPath], spec: &GridSpec) -> PeriodicDdGrid {
    let mut out = PeriodicDdGrid::zeros(*spec);
    for p in paths {
        if p.h_hat != Complex64::new(0.0, 0.0) {
            kernel::accumulate_response(spec, p.l_hat, p.k_hat, p.h_hat, &mut out.data);
        }
    }
    out
}

/// Relative L2 distance `‖a - b‖ / ‖b‖`.
pub fn relative_l2(a: &PeriodicDdGrid, b: &PeriodicDdGrid) -> f64 {
    let num: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den = b.power();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests;
