//! Time-frequency and delay-Doppler grid geometry.
//!
//! Both grid kinds share one storage layout: `n` rows by `m` columns,
//! row-major. For a time-frequency grid the row is the OFDM symbol index and
//! the column is the subcarrier; for a delay-Doppler grid the row is the
//! Doppler bin `k` and the column is the delay bin `l`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resource grid dimensions, subcarrier spacing and pilot lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of subcarriers.
    pub m: usize,
    /// Number of symbols.
    pub n: usize,
    pub delta_f_hz: f64,
    /// Pilot spacing in frequency (subcarriers).
    pub d_f: usize,
    /// Pilot spacing in time (symbols).
    pub d_t: usize,
}

impl GridSpec {
    pub fn new(m: usize, n: usize, delta_f_hz: f64, d_f: usize, d_t: usize) -> Result<Self> {
        let spec = GridSpec {
            m,
            n,
            delta_f_hz,
            d_f,
            d_t,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid with a pilot on every resource element.
    pub fn full(m: usize, n: usize, delta_f_hz: f64) -> Result<Self> {
        Self::new(m, n, delta_f_hz, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::config(format!(
                "grid must be non-empty, got {}x{}",
                self.m, self.n
            )));
        }
        if !(self.delta_f_hz.is_finite() && self.delta_f_hz > 0.0) {
            return Err(Error::config(format!(
                "subcarrier spacing must be positive, got {}",
                self.delta_f_hz
            )));
        }
        if self.d_f == 0 || self.d_t == 0 {
            return Err(Error::config("pilot spacings must be at least 1"));
        }
        if !self.m.is_multiple_of(self.d_f) {
            return Err(Error::config(format!(
                "M = {} is not a multiple of d_f = {}",
                self.m, self.d_f
            )));
        }
        if !self.n.is_multiple_of(self.d_t) {
            return Err(Error::config(format!(
                "N = {} is not a multiple of d_t = {}",
                self.n, self.d_t
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// OFDM symbol duration `T = 1/Δf`.
    pub fn symbol_duration_s(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    pub fn block_duration_s(&self) -> f64 {
        self.n as f64 * self.symbol_duration_s()
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.m as f64 * self.delta_f_hz
    }

    /// Period of the coarse DD estimate along the delay axis, `M/d_f`.
    pub fn delay_period(&self) -> usize {
        self.m / self.d_f
    }

    /// Period of the coarse DD estimate along the Doppler axis, `N/d_t`.
    pub fn doppler_period(&self) -> usize {
        self.n / self.d_t
    }

    pub fn normalized_delay(&self, tau_s: f64) -> f64 {
        self.m as f64 * self.delta_f_hz * tau_s
    }

    pub fn normalized_doppler(&self, nu_hz: f64) -> f64 {
        self.n as f64 * self.symbol_duration_s() * nu_hz
    }

    pub fn delay_from_bins(&self, l: f64) -> f64 {
        l / (self.m as f64 * self.delta_f_hz)
    }

    pub fn doppler_from_bins(&self, k: f64) -> f64 {
        k / (self.n as f64 * self.symbol_duration_s())
    }

    /// Checks that a path with normalized delay `l` and Doppler `k` lands
    /// inside the alias-free region of the periodic DD estimate.
    pub fn check_alias_free(&self, l: f64, k: f64) -> std::result::Result<(), String> {
        let lp = self.delay_period() as f64;
        let kp = self.doppler_period() as f64;
        if !(0.0..lp).contains(&l) {
            return Err(format!("normalized delay {l:.4} outside [0, {lp})"));
        }
        if k.abs() >= kp / 2.0 {
            return Err(format!(
                "normalized Doppler {k:.4} outside (-{0}, {0})",
                kp / 2.0
            ));
        }
        Ok(())
    }

    pub fn is_pilot(&self, m: usize, n: usize) -> bool {
        m.is_multiple_of(self.d_f) && n.is_multiple_of(self.d_t)
    }

    pub fn pilot_count(&self) -> usize {
        self.delay_period() * self.doppler_period()
    }

    /// Pilot positions `(m, n)` in symbol-major order.
    pub fn pilot_positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n)
            .step_by(self.d_t)
            .flat_map(move |n| (0..self.m).step_by(self.d_f).map(move |m| (m, n)))
    }

    /// The same lattice with a different number of symbols.
    pub fn with_symbols(&self, n: usize) -> Result<Self> {
        Self::new(self.m, n, self.delta_f_hz, self.d_f, self.d_t)
    }
}

/// Transmitted pilot symbols, one per pilot position in
/// [`GridSpec::pilot_positions`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSymbols {
    pub values: Vec<Complex64>,
}

impl PilotSymbols {
    /// Unit-modulus QPSK pilots from a seeded generator.
    pub fn qpsk(spec: &GridSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let values = (0..spec.pilot_count())
            .map(|_| {
                let re = if rng.random::<bool>() { a } else { -a };
                let im = if rng.random::<bool>() { a } else { -a };
                Complex64::new(re, im)
            })
            .collect();
        PilotSymbols { values }
    }

    pub fn ones(spec: &GridSpec) -> Self {
        PilotSymbols {
            values: vec![Complex64::new(1.0, 0.0); spec.pilot_count()],
        }
    }

    /// Pilots of the sub-window starting at symbol `n0` spanning `n` symbols
    /// of a longer grid described by `spec`.
    pub fn window(&self, spec: &GridSpec, n0: usize, n: usize) -> Result<Self> {
        if !n0.is_multiple_of(spec.d_t) || !n.is_multiple_of(spec.d_t) || n0 + n > spec.n {
            return Err(Error::config(format!(
                "window [{n0}, {}) is not aligned to the pilot lattice of a {}-symbol grid",
                n0 + n,
                spec.n
            )));
        }
        let per_row = spec.delay_period();
        let start = (n0 / spec.d_t) * per_row;
        let end = ((n0 + n) / spec.d_t) * per_row;
        Ok(PilotSymbols {
            values: self.values[start..end].to_vec(),
        })
    }
}

/// Received time-frequency resource grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    pub spec: GridSpec,
    /// `spec.n` rows (symbols) by `spec.m` columns (subcarriers).
    pub data: Vec<Complex64>,
}

impl TfGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        TfGrid {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn at(&self, m: usize, n: usize) -> Complex64 {
        self.data[n * self.spec.m + m]
    }

    pub fn at_mut(&mut self, m: usize, n: usize) -> &mut Complex64 {
        &mut self.data[n * self.spec.m + m]
    }

    /// Symbols `[n0, n0 + n)` as a grid of its own.
    pub fn window(&self, n0: usize, n: usize) -> Result<TfGrid> {
        let spec = self.spec.with_symbols(n)?;
        if !n0.is_multiple_of(self.spec.d_t) || n0 + n > self.spec.n {
            return Err(Error::config(format!(
                "window [{n0}, {}) does not fit a {}-symbol grid with d_t = {}",
                n0 + n,
                self.spec.n,
                self.spec.d_t
            )));
        }
        let m = self.spec.m;
        Ok(TfGrid {
            spec,
            data: self.data[n0 * m..(n0 + n) * m].to_vec(),
        })
    }
}
