//! Time evolution of tap coefficients.
//!
//! Every tap is driven by a latent circular Gaussian `z ~ CN(0, 1)` that
//! follows a first-order autoregression in continuous time,
//! `z(t + δ) = ρ(δ)·z(t) + sqrt(1 - ρ(δ)²)·w` with `ρ(δ) = ρ_ref^(δ/L)`.
//! Rician and Rayleigh taps map `z` linearly onto the coefficient, so their
//! marginals hold exactly. Nakagami and Weibull taps push `|z|` through the
//! family quantile of `1 - exp(-|z|²)`, which is uniform, and keep the phase
//! of `z`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{DistributionSpec, Family, Path, PathSet, TddlModel};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evolution {
    /// Coefficients drawn once; only the Doppler rotation changes with time.
    Static,
    /// Continuous-time AR(1) evolution calibrated to each tap's `t_qi_min_ms`.
    Ar,
}

/// Which column of the model sets the tap power ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// Rescale each tap's distribution so `E|h_i|²/E|h_1|²` follows `power_db`.
    Table,
    /// Use the distribution parameters verbatim.
    Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub evolution: Evolution,
    /// Rotate each coefficient by `exp(j2π·ν·t)`.
    pub doppler_ramp: bool,
    pub power: PowerMode,
    /// DD-TCC level that the AR correlation must reach, in expectation, at
    /// lag `t_qi_min_ms`.
    pub alpha: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            evolution: Evolution::Ar,
            doppler_ramp: true,
            power: PowerMode::Table,
            alpha: 0.9,
        }
    }
}

/// Outcome of fitting `ρ_ref` for one tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub tap: usize,
    pub lag_s: f64,
    /// AR coefficient over one `lag_s`.
    pub rho_ref: f64,
    /// Mean DD-TCC at `lag_s` reached by the calibration sample.
    pub mean_tcc: f64,
    /// Set when even independent draws stay above α on average, so no
    /// correlation is needed and `rho_ref` is 0.
    pub independent_floor: bool,
}

const CALIBRATION_PAIRS: usize = 20_000;
const CALIBRATION_SEED: u64 = 0x5eed_ca1b;

/// Monotone lookup from `|z|²` to amplitude for families without a cheap
/// closed-form quantile.
#[derive(Debug, Clone)]
struct QuantileTable {
    ln_e0: f64,
    step: f64,
    ln_amp: Vec<f64>,
}

impl QuantileTable {
    const POINTS: usize = 4096;
    const E_MIN: f64 = 1e-14;
    const E_MAX: f64 = 60.0;

    fn new(spec: &DistributionSpec) -> Self {
        let ln_e0 = Self::E_MIN.ln();
        let step = (Self::E_MAX.ln() - ln_e0) / (Self::POINTS - 1) as f64;
        let ln_amp = (0..Self::POINTS)
            .map(|i| {
                let e = (ln_e0 + i as f64 * step).exp();
                spec.quantile(-(-e).exp_m1()).max(f64::MIN_POSITIVE).ln()
            })
            .collect();
        QuantileTable {
            ln_e0,
            step,
            ln_amp,
        }
    }

    fn amplitude(&self, e: f64) -> f64 {
        let x = ((e.max(Self::E_MIN).ln() - self.ln_e0) / self.step).min((Self::POINTS - 1) as f64);
        let i = (x.floor() as usize).min(Self::POINTS - 2);
        let f = x - i as f64;
        ((1.0 - f) * self.ln_amp[i] + f * self.ln_amp[i + 1]).exp()
    }
}

#[derive(Debug, Clone)]
enum TapLaw {
    /// `s·e^{jφ0} + σ·√2·z`.
    Gaussian { los: f64, sigma: f64 },
    /// Weibull: `a·(|z|²)^{1/b}` along the phase of `z`.
    Weibull { a: f64, b: f64 },
    /// Any other family via a tabulated quantile.
    Tabulated {
        table: QuantileTable,
        second_moment: f64,
    },
}

impl TapLaw {
    fn new(spec: &DistributionSpec) -> Self {
        let p = spec.params();
        match spec.family() {
            Family::Rician => TapLaw::Gaussian {
                los: p[0],
                sigma: p[1],
            },
            Family::Rayleigh => TapLaw::Gaussian {
                los: 0.0,
                sigma: p[0],
            },
            Family::Weibull => TapLaw::Weibull { a: p[0], b: p[1] },
            Family::Nakagami => TapLaw::Tabulated {
                table: QuantileTable::new(spec),
                second_moment: spec.second_moment(),
            },
        }
    }

    fn coefficient(&self, z: Complex64, phi0: f64) -> Complex64 {
        match self {
            TapLaw::Gaussian { los, sigma } => {
                Complex64::from_polar(*los, phi0) + z * (sigma * std::f64::consts::SQRT_2)
            }
            TapLaw::Weibull { a, b } => {
                let e = z.norm_sqr();
                if e == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                z / e.sqrt() * (a * e.powf(1.0 / b))
            }
            TapLaw::Tabulated { table, .. } => {
                let e = z.norm_sqr();
                if e == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                z / e.sqrt() * table.amplitude(e)
            }
        }
    }

    fn second_moment(&self) -> f64 {
        match self {
            TapLaw::Gaussian { los, sigma } => los * los + 2.0 * sigma * sigma,
            TapLaw::Weibull { a, b } => a * a * statrs::function::gamma::gamma(1.0 + 2.0 / b),
            TapLaw::Tabulated { second_moment, .. } => *second_moment,
        }
    }
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn min_max_ratio(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi == 0.0 {
        1.0
    } else {
        lo / hi
    }
}

/// Finds `ρ` such that the mean min/max amplitude ratio of two latent draws
/// with correlation `ρ` equals `alpha`. Common random numbers keep the mean
/// a smooth function of `ρ` so plain bisection applies.
fn calibrate(law: &TapLaw, alpha: f64) -> (f64, f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(CALIBRATION_SEED);
    let pairs: Vec<(Complex64, Complex64)> = (0..CALIBRATION_PAIRS)
        .map(|_| (standard_complex(&mut rng), standard_complex(&mut rng)))
        .collect();
    let base: Vec<f64> = pairs
        .iter()
        .map(|(z, _)| law.coefficient(*z, 0.0).norm())
        .collect();
    let mean_tcc = |rho: f64| {
        let c = (1.0 - rho * rho).max(0.0).sqrt();
        pairs
            .iter()
            .zip(&base)
            .map(|((z, w), &a)| min_max_ratio(a, law.coefficient(z * rho + w * c, 0.0).norm()))
            .sum::<f64>()
            / pairs.len() as f64
    };
    let floor = mean_tcc(0.0);
    if floor >= alpha {
        return (0.0, floor, true);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if mean_tcc(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi, mean_tcc(hi), false)
}

/// Draws time-evolving path sets for a TDDL model on a given grid.
#[derive(Debug, Clone)]
pub struct ChannelGenerator {
    model: TddlModel,
    grid: GridSpec,
    config: EvolutionConfig,
    laws: Vec<TapLaw>,
    calibrations: Vec<Calibration>,
}

/// Latent state of one channel trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrajectory {
    latent: Vec<Complex64>,
    phase0: Vec<f64>,
    t_s: f64,
}

impl ChannelTrajectory {
    pub fn time_s(&self) -> f64 {
        self.t_s
    }
}

impl ChannelGenerator {
    pub fn new(model: &TddlModel, grid: &GridSpec, config: EvolutionConfig) -> Result<Self> {
        model.validate()?;
        grid.validate()?;
        if !(config.alpha > 0.0 && config.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                config.alpha
            )));
        }
        for (i, tap) in model.taps.iter().enumerate() {
            let l = grid.normalized_delay(tap.delay_s());
            let k = grid.normalized_doppler(tap.doppler_hz);
            grid.check_alias_free(l, k).map_err(|e| {
                Error::config(format!(
                    "{} tap {} ({} ns, {} Hz): {e}",
                    model.name,
                    i + 1,
                    tap.delay_ns,
                    tap.doppler_hz
                ))
            })?;
        }
        let specs = match config.power {
            PowerMode::Table => model.table_scaled_distributions(),
            PowerMode::Distribution => model.taps.iter().map(|t| t.amplitude.clone()).collect(),
        };
        let laws: Vec<TapLaw> = specs.iter().map(TapLaw::new).collect();
        let calibrations = match config.evolution {
            Evolution::Static => Vec::new(),
            Evolution::Ar => laws
                .iter()
                .zip(&model.taps)
                .enumerate()
                .map(|(i, (law, tap))| {
                    let (rho_ref, mean_tcc, independent_floor) = calibrate(law, config.alpha);
                    Calibration {
                        tap: i + 1,
                        lag_s: tap.t_qi_min_ms * 1e-3,
                        rho_ref,
                        mean_tcc,
                        independent_floor,
                    }
                })
                .collect(),
        };
        Ok(ChannelGenerator {
            model: model.clone(),
            grid: *grid,
            config,
            laws,
            calibrations,
        })
    }

    pub fn model(&self) -> &TddlModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    /// Per-tap AR calibration; empty for static evolution.
    pub fn calibrations(&self) -> &[Calibration] {
        &self.calibrations
    }

    /// `Σ E|h_i|²` of the generated coefficients.
    pub fn expected_total_power(&self) -> f64 {
        self.laws.iter().map(TapLaw::second_moment).sum()
    }

    pub fn expected_tap_powers(&self) -> Vec<f64> {
        self.laws.iter().map(TapLaw::second_moment).collect()
    }

    /// AR coefficient of tap `i` over a time step `dt_s`.
    pub fn correlation(&self, tap: usize, dt_s: f64) -> f64 {
        match self.config.evolution {
            Evolution::Static => 1.0,
            Evolution::Ar => {
                let c = &self.calibrations[tap];
                c.rho_ref.powf(dt_s / c.lag_s)
            }
        }
    }

    /// Draws a fresh trajectory anchored at `t0_s`.
    pub fn start<R: Rng + ?Sized>(&self, t0_s: f64, rng: &mut R) -> ChannelTrajectory {
        let taps = self.laws.len();
        let phase0 = (0..taps).map(|_| rng.random::<f64>() * TAU).collect();
        let latent = (0..taps).map(|_| standard_complex(rng)).collect();
        ChannelTrajectory {
            latent,
            phase0,
            t_s: t0_s,
        }
    }

    /// Moves the trajectory forward to `t_s`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        traj: &mut ChannelTrajectory,
        t_s: f64,
        rng: &mut R,
    ) -> Result<()> {
        let dt = t_s - traj.t_s;
        if !(dt >= 0.0) {
            return Err(Error::domain(format!(
                "cannot move a trajectory back from {} s to {t_s} s",
                traj.t_s
            )));
        }
        if self.config.evolution == Evolution::Ar && dt > 0.0 {
            for (i, z) in traj.latent.iter_mut().enumerate() {
                let rho = self.correlation(i, dt);
                let w = standard_complex(rng);
                *z = *z * rho + w * (1.0 - rho * rho).max(0.0).sqrt();
            }
        }
        traj.t_s = t_s;
        Ok(())
    }

    /// A copy of `traj` with fresh latent states, the limit of `advance` over
    /// an unbounded step. Initial phases and time are kept.
    pub fn decorrelated<R: Rng + ?Sized>(
        &self,
        traj: &ChannelTrajectory,
        rng: &mut R,
    ) -> ChannelTrajectory {
        let latent = match self.config.evolution {
            Evolution::Static => traj.latent.clone(),
            Evolution::Ar => traj.latent.iter().map(|_| standard_complex(rng)).collect(),
        };
        ChannelTrajectory {
            latent,
            phase0: traj.phase0.clone(),
            t_s: traj.t_s,
        }
    }

    /// The path set at the trajectory's current time.
    pub fn realize(&self, traj: &ChannelTrajectory) -> PathSet {
        let paths = self
            .model
            .taps
            .iter()
            .zip(&self.laws)
            .zip(traj.latent.iter().zip(&traj.phase0))
            .map(|((tap, law), (&z, &phi0))| {
                let mut h = law.coefficient(z, phi0);
                if self.config.doppler_ramp {
                    h *= Complex64::from_polar(1.0, TAU * tap.doppler_hz * traj.t_s);
                }
                Path {
                    tau_s: tap.delay_s(),
                    nu_hz: tap.doppler_hz,
                    h,
                }
            })
            .collect();
        PathSet::new(paths, traj.t_s)
    }

    /// A single independent realization at `t_s`.
    pub fn draw<R: Rng + ?Sized>(&self, t_s: f64, rng: &mut R) -> PathSet {
        self.realize(&self.start(t_s, rng))
    }
}

/// One realization of `model` at `t_offset_s`.
///
/// Each call starts a new trajectory, so the coefficients follow the tap
/// marginals with an independent initial phase. Correlated sequences come
/// from [`ChannelGenerator::start`] and [`ChannelGenerator::advance`].
pub fn realize_path_set<R: Rng + ?Sized>(
    model: &TddlModel,
    grid: &GridSpec,
    t_offset_s: f64,
    rng: &mut R,
    evolution: &EvolutionConfig,
) -> Result<PathSet> {
    // A single draw never advances, so skip the AR calibration.
    let config = EvolutionConfig {
        evolution: Evolution::Static,
        ..*evolution
    };
    Ok(ChannelGenerator::new(model, grid, config)?.draw(t_offset_s, rng))
}
