//! DD-domain equivalent channel of an OTFS frame.
//!
//! Under ideal waveforms the channel acts on the `N×M` symbol array as a 2-D
//! circular convolution, so the matrix is block circulant with circulant
//! blocks. It is stored through its generating column and its 2-D DFT.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::channel_model::PathSet;
use crate::dd_estimator::dirichlet;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Below this ratio of smallest to largest eigenvalue magnitude a zero-noise
/// inversion is refused.
const SINGULAR_RATIO: f64 = 1e-12;

/// Unnormalized 2-D DFT over a Doppler-major `N×M` array.
#[derive(Clone)]
pub struct Fft2 {
    m: usize,
    n: usize,
    rows: [Arc<dyn Fft<f64>>; 2],
    cols: [Arc<dyn Fft<f64>>; 2],
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.n, self.m)
    }
}

impl Fft2 {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            m,
            n,
            rows: [planner.plan_fft_forward(m), planner.plan_fft_inverse(m)],
            cols: [planner.plan_fft_forward(n), planner.plan_fft_inverse(n)],
        }
    }

    fn run(&self, data: &mut [Complex64], direction: FftDirection) {
        let d = usize::from(direction == FftDirection::Inverse);
        for row in data.chunks_exact_mut(self.m) {
            self.rows[d].process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.n];
        for l in 0..self.m {
            for k in 0..self.n {
                col[k] = data[k * self.m + l];
            }
            self.cols[d].process(&mut col);
            for k in 0..self.n {
                data[k * self.m + l] = col[k];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, FftDirection::Forward);
    }

    /// Inverse transform including the `1/NM` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, FftDirection::Inverse);
        let s = 1.0 / (self.m * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// `H_DD` for one path set.
#[derive(Debug, Clone)]
pub struct DdChannelMatrix {
    pub m: usize,
    pub n: usize,
    pub source: PathSet,
    /// Entry `[(k, l), (0, 0)]`; every other entry is a cyclic shift of it.
    column: Vec<Complex64>,
    /// 2-D DFT of `column`, the eigenvalues of the matrix.
    spectrum: Vec<Complex64>,
    fft: Arc<Fft2>,
}

fn check_paths(paths: &PathSet, grid: &GridSpec) -> Result<GridSpec> {
    let full = GridSpec::full(grid.m, grid.n, grid.delta_f_hz)?;
    paths.check_alias_free(&full)?;
    if let Some(i) = paths
        .paths
        .iter()
        .position(|p| !(p.h.re.is_finite() && p.h.im.is_finite()))
    {
        return Err(Error::config(format!(
            "path {}: non-finite coefficient",
            i + 1
        )));
    }
    Ok(full)
}

/// Builds `H_DD` of an `M×N` frame from physical paths.
pub fn build_hdd(paths: &PathSet, grid: &GridSpec) -> Result<DdChannelMatrix> {
    let fft = Arc::new(Fft2::new(grid.m, grid.n));
    build_hdd_with(paths, grid, fft)
}

pub(crate) fn build_hdd_with(
    paths: &PathSet,
    grid: &GridSpec,
    fft: Arc<Fft2>,
) -> Result<DdChannelMatrix> {
    let full = check_paths(paths, grid)?;
    let (m, n) = (full.m, full.n);
    let (mf, nf) = (m as f64, n as f64);
    let weighted: Vec<(f64, f64, Complex64)> = paths
        .normalized(&full)
        .into_iter()
        .zip(&paths.paths)
        .map(|((l, k), p)| {
            (
                l,
                k,
                p.h * Complex64::from_polar(1.0, -TAU * p.nu_hz * p.tau_s),
            )
        })
        .collect();

    let scale = 1.0 / (mf * nf);
    let mut column = vec![Complex64::new(0.0, 0.0); m * n];
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m * n];
    for &(l, k, c) in &weighted {
        let dk: Vec<Complex64> = (0..n).map(|a| dirichlet(a as f64 - k, n)).collect();
        let dl: Vec<Complex64> = (0..m).map(|b| dirichlet(b as f64 - l, m)).collect();
        // Eigenvalue at (p, q) is the exponential-sum summand at (-p, -q).
        let ek: Vec<Complex64> = (0..n)
            .map(|p| Complex64::from_polar(1.0, TAU * k * ((n - p) % n) as f64 / nf))
            .collect();
        let el: Vec<Complex64> = (0..m)
            .map(|q| Complex64::from_polar(1.0, TAU * l * ((m - q) % m) as f64 / mf))
            .collect();
        for a in 0..n {
            for b in 0..m {
                column[a * m + b] += c * dk[a] * dl[b] * scale;
                spectrum[a * m + b] += c * ek[a] * el[b];
            }
        }
    }
    Ok(DdChannelMatrix {
        m,
        n,
        source: paths.clone(),
        column,
        spectrum,
        fft,
    })
}

impl DdChannelMatrix {
    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    /// Entry at Doppler-major row `(k, l)` and column `(k', l')`.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let (k, l) = (row / self.m, row % self.m);
        let (kc, lc) = (col / self.m, col % self.m);
        let a = (k + self.n - kc) % self.n;
        let b = (l + self.m - lc) % self.m;
        self.column[a * self.m + b]
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.entry(r, c))
    }

    fn check_len(&self, v: &[Complex64], what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::config(format!(
                "{what} has {} entries, channel expects {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `H·x` by explicit circular convolution.
    pub fn apply_direct(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x, "input")?;
        Ok((0..self.dim())
            .map(|r| {
                x.iter()
                    .enumerate()
                    .map(|(c, v)| self.entry(r, c) * v)
                    .sum()
            })
            .collect())
    }

    /// `H·x` through the 2-D DFT.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x, "input")?;
        let mut buf = x.to_vec();
        self.fft.forward(&mut buf);
        buf.iter_mut()
            .zip(&self.spectrum)
            .for_each(|(v, g)| *v *= g);
        self.fft.inverse(&mut buf);
        Ok(buf)
    }

    /// `Hᴴ(HHᴴ + (σ²/E_X)·I)⁻¹·y`, diagonalized by the 2-D DFT.
    pub fn mmse_equalize(&self, y: &[Complex64], sigma2: f64, e_x: f64) -> Result<Vec<Complex64>> {
        self.check_len(y, "received vector")?;
        let gamma = regularization(sigma2, e_x)?;
        if gamma == 0.0 {
            let max = self.spectrum.iter().map(|g| g.norm()).fold(0.0, f64::max);
            let min = self
                .spectrum
                .iter()
                .map(|g| g.norm())
                .fold(f64::INFINITY, f64::min);
            if !(min > SINGULAR_RATIO * max) {
                return Err(Error::numeric(format!(
                    "channel is singular for zero-noise equalization (eigenvalue ratio {:.3e})",
                    min / max
                )));
            }
        }
        let mut buf = y.to_vec();
        self.fft.forward(&mut buf);
        buf.iter_mut()
            .zip(&self.spectrum)
            .for_each(|(v, g)| *v *= g.conj() / (g.norm_sqr() + gamma));
        self.fft.inverse(&mut buf);
        Ok(buf)
    }
}

pub(crate) fn regularization(sigma2: f64, e_x: f64) -> Result<f64> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!(
            "noise power must be finite and non-negative, got {sigma2}"
        )));
    }
    if !(e_x > 0.0 && e_x.is_finite()) {
        return Err(Error::domain(format!(
            "symbol energy must be positive, got {e_x}"
        )));
    }
    Ok(sigma2 / e_x)
}
