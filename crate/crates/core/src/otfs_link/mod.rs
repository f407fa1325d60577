//! OTFS link simulation over DD-domain channels.
//!
//! Frames carry Gray-mapped QPSK on an `N×M` DD grid, pass through `H_DD`
//! with white Gaussian noise and are equalized with linear MMSE. SNR is
//! `E_X/σ²` with unit symbol energy; channels are scaled to unit expected
//! total power before transmission.

mod matrix;

pub use matrix::{build_hdd, DdChannelMatrix, Fft2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use crate::channel_model::{
    ChannelGenerator, Evolution, EvolutionConfig, Path, PathSet, PowerMode, TddlModel,
};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::special::q_function;
use matrix::{build_hdd_with, regularization};

pub const BITS_PER_SYMBOL: usize = 2;

/// Below this ratio of smallest to largest LU pivot the dense solve is
/// treated as singular.
const PIVOT_RATIO: f64 = 1e-13;

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constellation {
    Qpsk,
}

/// Vectorized DD symbols of one frame, index `k·M + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct OtfsFrame {
    pub symbols: Vec<Complex64>,
    pub m: usize,
    pub n: usize,
    pub constellation: Constellation,
}

impl OtfsFrame {
    pub fn mean_energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

fn qpsk_symbol(b0: bool, b1: bool) -> Complex64 {
    let a = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(a(b0), a(b1))
}

/// Gray-mapped QPSK: bit pair `(b0, b1)` sets the signs of the real and
/// imaginary parts, `0 → +`.
pub fn qpsk_modulate(bits: &[bool], m: usize, n: usize) -> Result<OtfsFrame> {
    if bits.len() != BITS_PER_SYMBOL * m * n {
        return Err(Error::config(format!(
            "{} bits supplied for a {m}x{n} QPSK frame needing {}",
            bits.len(),
            BITS_PER_SYMBOL * m * n
        )));
    }
    let symbols = bits
        .chunks_exact(2)
        .map(|b| qpsk_symbol(b[0], b[1]))
        .collect();
    Ok(OtfsFrame {
        symbols,
        m,
        n,
        constellation: Constellation::Qpsk,
    })
}

/// Minimum-distance QPSK decisions.
pub fn qpsk_demodulate(symbols: &[Complex64]) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|s| [s.re < 0.0, s.im < 0.0])
        .collect()
}

/// `σ²` for `snr_db = 10·log10(E_X/σ²)`; infinite SNR gives 0.
pub fn noise_variance(snr_db: f64, e_x: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        e_x * 10f64.powf(-snr_db / 10.0)
    }
}

pub fn ebn0_db(snr_db: f64) -> f64 {
    snr_db - 10.0 * (BITS_PER_SYMBOL as f64).log10()
}

/// Uncoded Gray QPSK bit error rate over AWGN, `Q(√(2·Eb/N0))`.
pub fn qpsk_awgn_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

fn unit_noise<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        })
        .collect()
}

/// `Y = H·X + n` with `n ~ CN(0, σ²·I)`.
pub fn transmit<R: Rng + ?Sized>(
    frame: &OtfsFrame,
    h: &DdChannelMatrix,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if (frame.m, frame.n) != (h.m, h.n) {
        return Err(Error::config(format!(
            "frame is {}x{} but the channel is {}x{}",
            frame.m, frame.n, h.m, h.n
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::domain(format!("invalid SNR {snr_db} dB")));
    }
    let mut y = h.apply(&frame.symbols)?;
    let sigma2 = noise_variance(snr_db, frame.mean_energy());
    if sigma2 > 0.0 {
        let s = sigma2.sqrt();
        for (v, w) in y.iter_mut().zip(unit_noise(rng, frame.symbols.len())) {
            *v += w * s;
        }
    }
    Ok(y)
}

/// `Hᴴ(HHᴴ + (σ²/E_X)·I)⁻¹·y` for an arbitrary square `H`.
///
/// Uses a Cholesky solve when `σ² > 0` and an LU solve of `H·x = y`
/// otherwise.
pub fn mmse_equalize(
    y: &[Complex64],
    h: &DMatrix<Complex64>,
    sigma2: f64,
    e_x: f64,
) -> Result<Vec<Complex64>> {
    if !h.is_square() || h.nrows() != y.len() {
        return Err(Error::config(format!(
            "channel is {}x{} but the received vector has {} entries",
            h.nrows(),
            h.ncols(),
            y.len()
        )));
    }
    let gamma = regularization(sigma2, e_x)?;
    let rhs = DVector::from_column_slice(y);
    let x = if gamma > 0.0 {
        let mut a = h * h.adjoint();
        for i in 0..a.nrows() {
            a[(i, i)] += gamma;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::numeric("MMSE system is not positive definite"))?;
        h.adjoint() * chol.solve(&rhs)
    } else {
        let lu = h.clone().lu();
        let pivots = lu.u().diagonal().map(|p| p.norm());
        let (lo, hi) = (pivots.min(), pivots.max());
        if !(lo > PIVOT_RATIO * hi) {
            return Err(Error::numeric(format!(
                "channel is singular for zero-noise equalization (pivot ratio {:.3e})",
                lo / hi
            )));
        }
        lu.solve(&rhs)
            .ok_or_else(|| Error::numeric("LU solve failed"))?
    };
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::numeric("equalizer output is not finite"));
    }
    Ok(x.iter().copied().collect())
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lo = if errors == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if errors == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Bit errors accumulated at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    /// Errors of each frame, in frame order.
    pub frame_errors: Vec<u64>,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn ebn0_db(&self) -> f64 {
        ebn0_db(self.snr_db)
    }

    pub fn wilson95(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits, Z_95)
    }

    pub fn bits_per_frame(&self) -> u64 {
        self.bits / self.frame_errors.len().max(1) as u64
    }
}

/// Mean and standard error of the per-frame BER difference `b - a` for two
/// points that share frame seeds.
pub fn paired_difference(a: &BerPoint, b: &BerPoint) -> Result<(f64, f64)> {
    let f = a.frame_errors.len();
    if f < 2 || f != b.frame_errors.len() || a.bits != b.bits {
        return Err(Error::config(
            "paired comparison needs matching frame counts of at least 2",
        ));
    }
    let per = a.bits_per_frame() as f64;
    let d: Vec<f64> = a
        .frame_errors
        .iter()
        .zip(&b.frame_errors)
        .map(|(&x, &y)| (y as f64 - x as f64) / per)
        .collect();
    let mean = d.iter().sum::<f64>() / f as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (f - 1) as f64;
    Ok((mean, (var / f as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub channel: String,
    /// Equalization lag, `None` for a matched sweep.
    pub lag_ms: Option<f64>,
    pub points: Vec<BerPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub grid: GridSpec,
    pub snr_db: Vec<f64>,
    pub frames_per_point: usize,
    pub seed: u64,
}

impl LinkConfig {
    /// Desk-scale frame of 32 subcarriers by 16 symbols at 15 kHz spacing.
    pub fn desk(snr_db: Vec<f64>, frames_per_point: usize, seed: u64) -> Result<Self> {
        Ok(LinkConfig {
            grid: GridSpec::full(32, 16, 15e3)?,
            snr_db,
            frames_per_point,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.frames_per_point == 0 {
            return Err(Error::config("frames_per_point must be at least 1"));
        }
        validate_snr_grid(&self.snr_db)
    }

    fn bits_per_frame(&self) -> usize {
        BITS_PER_SYMBOL * self.grid.m * self.grid.n
    }
}

/// SNR grids must be non-empty and strictly increasing; `+inf` is allowed.
pub fn validate_snr_grid(snr_db: &[f64]) -> Result<()> {
    if snr_db.is_empty() {
        return Err(Error::config("SNR grid is empty"));
    }
    if let Some(v) = snr_db
        .iter()
        .find(|v| v.is_nan() || **v == f64::NEG_INFINITY)
    {
        return Err(Error::config(format!("invalid SNR value {v}")));
    }
    if let Some(w) = snr_db.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::config(format!(
            "SNR grid must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Where per-frame channels come from.
#[derive(Debug, Clone)]
pub enum ChannelSource {
    Model(Box<ChannelGenerator>),
    /// Stored path sets in time order.
    Trace(Vec<PathSet>),
    /// A single unit tap at zero delay and Doppler.
    Awgn,
}

impl ChannelSource {
    /// Model source with AR evolution and coefficients referenced to the DD
    /// grid, so a trajectory changes only through its fading.
    pub fn model(model: &TddlModel, grid: &GridSpec, alpha: f64) -> Result<Self> {
        let config = EvolutionConfig {
            evolution: Evolution::Ar,
            doppler_ramp: false,
            power: PowerMode::Table,
            alpha,
        };
        Ok(ChannelSource::Model(Box::new(ChannelGenerator::new(
            model, grid, config,
        )?)))
    }

    pub fn label(&self) -> String {
        match self {
            ChannelSource::Model(g) => g.model().name.clone(),
            ChannelSource::Trace(_) => "trace".into(),
            ChannelSource::Awgn => "awgn".into(),
        }
    }

    /// Amplitude factor giving unit expected total power.
    fn scale(&self) -> Result<f64> {
        let power = match self {
            ChannelSource::Model(g) => g.expected_total_power(),
            ChannelSource::Trace(t) => {
                if t.is_empty() {
                    return Err(Error::config("channel trace is empty"));
                }
                t.iter().map(PathSet::total_power).sum::<f64>() / t.len() as f64
            }
            ChannelSource::Awgn => 1.0,
        };
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::config(format!(
                "channel source has unusable mean power {power}"
            )));
        }
        Ok(power.sqrt().recip())
    }

    fn check_trace(&self) -> Result<()> {
        if let ChannelSource::Trace(t) = self {
            if let Some(i) = (1..t.len()).find(|&i| !(t[i].t_offset_s >= t[i - 1].t_offset_s)) {
                return Err(Error::config(format!(
                    "trace record {} goes back in time",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

fn awgn_paths() -> PathSet {
    PathSet::new(
        vec![Path {
            tau_s: 0.0,
            nu_hz: 0.0,
            h: Complex64::new(1.0, 0.0),
        }],
        0.0,
    )
}

#[derive(Clone, Copy)]
enum Stream {
    Channel = 0,
    Bits = 1,
    Noise = 2,
    Evolution = 3,
}

fn frame_rng(seed: u64, frame: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64 * 4 + stream as u64);
    rng
}

/// Bits and unit-variance noise of one frame, shared by every SNR and lag.
struct FrameDraw {
    bits: Vec<bool>,
    frame: OtfsFrame,
    noise: Vec<Complex64>,
}

fn frame_draw(config: &LinkConfig, index: usize) -> Result<FrameDraw> {
    let mut brng = frame_rng(config.seed, index, Stream::Bits);
    let bits: Vec<bool> = (0..config.bits_per_frame())
        .map(|_| brng.random())
        .collect();
    let frame = qpsk_modulate(&bits, config.grid.m, config.grid.n)?;
    let mut nrng = frame_rng(config.seed, index, Stream::Noise);
    let noise = unit_noise(&mut nrng, config.grid.len());
    Ok(FrameDraw { bits, frame, noise })
}

/// Bit errors per SNR for a frame sent through `tx` and equalized with `eq`.
fn frame_errors(
    draw: &FrameDraw,
    tx: &DdChannelMatrix,
    eq: &DdChannelMatrix,
    snr_db: &[f64],
) -> Result<Vec<u64>> {
    let clean = tx.apply(&draw.frame.symbols)?;
    let e_x = 1.0;
    snr_db
        .iter()
        .map(|&snr| {
            let sigma2 = noise_variance(snr, e_x);
            let s = sigma2.sqrt();
            let y: Vec<Complex64> = clean
                .iter()
                .zip(&draw.noise)
                .map(|(c, w)| c + w * s)
                .collect();
            let x_hat = eq.mmse_equalize(&y, sigma2, e_x)?;
            Ok(qpsk_demodulate(&x_hat)
                .iter()
                .zip(&draw.bits)
                .filter(|(a, b)| a != b)
                .count() as u64)
        })
        .collect()
}

fn collect_points(config: &LinkConfig, per_frame: &[Vec<u64>]) -> Vec<BerPoint> {
    let bits = config.bits_per_frame() as u64;
    config
        .snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let frame_errors: Vec<u64> = per_frame.iter().map(|f| f[i]).collect();
            BerPoint {
                snr_db: snr,
                bit_errors: frame_errors.iter().sum(),
                bits: bits * per_frame.len() as u64,
                frame_errors,
            }
        })
        .collect()
}

/// BER versus SNR with an independent channel realization for every frame.
///
/// Frame `f` uses the same bits, noise shape and channel at every SNR.
pub fn run_ber_sweep(source: &ChannelSource, config: &LinkConfig) -> Result<Vec<BerPoint>> {
    config.validate()?;
    source.check_trace()?;
    let scale = source.scale()?;
    let fft = Arc::new(Fft2::new(config.grid.m, config.grid.n));
    let per_frame: Vec<Vec<u64>> = (0..config.frames_per_point)
        .into_par_iter()
        .map(|f| {
            let mut crng = frame_rng(config.seed, f, Stream::Channel);
            let paths = match source {
                ChannelSource::Model(g) => g.draw(0.0, &mut crng).scaled(scale),
                ChannelSource::Trace(t) => t[crng.random_range(0..t.len())].scaled(scale),
                ChannelSource::Awgn => awgn_paths(),
            };
            let h = build_hdd_with(&paths, &config.grid, fft.clone())?;
            frame_errors(&frame_draw(config, f)?, &h, &h, &config.snr_db)
        })
        .collect::<Result<_>>()?;
    Ok(collect_points(config, &per_frame))
}

/// Lags of the invariance experiment for a model: the matched case, every
/// distinct per-tap minimum quasi-invariant interval and the
/// quasi-stationary interval, ascending.
pub fn protocol_lags_ms(model: &TddlModel) -> Vec<f64> {
    let mut lags: Vec<f64> = std::iter::once(0.0)
        .chain(model.taps.iter().map(|t| t.t_qi_min_ms))
        .chain(std::iter::once(model.t_qs_ms))
        .collect();
    lags.sort_by(f64::total_cmp);
    lags.dedup();
    lags
}

fn validate_lags(lags_ms: &[f64], source: &ChannelSource) -> Result<()> {
    if let Some(l) = lags_ms.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::config(format!(
            "lags must be non-negative, got {l} ms"
        )));
    }
    if !lags_ms.contains(&0.0) {
        return Err(Error::config(
            "the lag list must include 0 ms as the matched reference",
        ));
    }
    if matches!(source, ChannelSource::Trace(_)) && lags_ms.iter().any(|l| l.is_infinite()) {
        return Err(Error::config("an unbounded lag needs a model source"));
    }
    Ok(())
}

/// Transmission through the channel at `t₂` and equalization with the
/// channel at `t₁ = t₂ - lag`, one curve per lag.
///
/// For a model both channels come from one trajectory; an infinite lag
/// redraws the fading state. For a trace, `t₂` is drawn among records at
/// least the largest lag after the first one and `t₁` is the record nearest
/// to `t₂ - lag`.
pub fn run_mismatch_experiment(
    source: &ChannelSource,
    lags_ms: &[f64],
    config: &LinkConfig,
) -> Result<Vec<BerCurve>> {
    config.validate()?;
    source.check_trace()?;
    validate_lags(lags_ms, source)?;
    let scale = source.scale()?;
    let fft = Arc::new(Fft2::new(config.grid.m, config.grid.n));
    let build = |p: &PathSet| build_hdd_with(&p.scaled(scale), &config.grid, fft.clone());

    let mut order: Vec<usize> = (0..lags_ms.len()).collect();
    order.sort_by(|&a, &b| lags_ms[a].total_cmp(&lags_ms[b]));
    let max_finite = lags_ms
        .iter()
        .copied()
        .filter(|l| l.is_finite())
        .fold(0.0, f64::max);
    let eligible = match source {
        ChannelSource::Trace(t) => {
            let t0 = t[0].t_offset_s;
            let first = t.partition_point(|p| p.t_offset_s - t0 < max_finite * 1e-3);
            if first == t.len() {
                return Err(Error::config(format!(
                    "trace is shorter than the largest lag {max_finite} ms"
                )));
            }
            first
        }
        _ => 0,
    };

    let per_frame: Vec<Vec<Vec<u64>>> = (0..config.frames_per_point)
        .into_par_iter()
        .map(|f| {
            let mut crng = frame_rng(config.seed, f, Stream::Channel);
            let mut erng = frame_rng(config.seed, f, Stream::Evolution);
            let draw = frame_draw(config, f)?;
            let mut out = vec![Vec::new(); lags_ms.len()];
            match source {
                ChannelSource::Model(g) => {
                    let start = g.start(0.0, &mut crng);
                    let eq = build(&g.realize(&start))?;
                    let mut traj = start.clone();
                    for &i in &order {
                        let lag = lags_ms[i];
                        let tx_paths = if lag.is_finite() {
                            g.advance(&mut traj, lag * 1e-3, &mut erng)?;
                            g.realize(&traj)
                        } else {
                            g.realize(&g.decorrelated(&start, &mut erng))
                        };
                        out[i] = frame_errors(&draw, &build(&tx_paths)?, &eq, &config.snr_db)?;
                    }
                }
                ChannelSource::Trace(t) => {
                    let i2 = crng.random_range(eligible..t.len());
                    let tx = build(&t[i2])?;
                    for (i, &lag) in lags_ms.iter().enumerate() {
                        let target = t[i2].t_offset_s - lag * 1e-3;
                        let i1 = nearest_record(t, target, i2);
                        out[i] = frame_errors(&draw, &tx, &build(&t[i1])?, &config.snr_db)?;
                    }
                }
                ChannelSource::Awgn => {
                    let h = build(&awgn_paths())?;
                    for slot in out.iter_mut() {
                        *slot = frame_errors(&draw, &h, &h, &config.snr_db)?;
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let label = source.label();
    Ok(lags_ms
        .iter()
        .enumerate()
        .map(|(i, &lag)| {
            let rows: Vec<Vec<u64>> = per_frame.iter().map(|f| f[i].clone()).collect();
            BerCurve {
                channel: label.clone(),
                lag_ms: Some(lag),
                points: collect_points(config, &rows),
            }
        })
        .collect())
}

/// Index of the record in `t[..=upto]` closest in time to `target`.
fn nearest_record(t: &[PathSet], target: f64, upto: usize) -> usize {
    let j = t[..=upto].partition_point(|p| p.t_offset_s < target);
    if j == 0 {
        return 0;
    }
    if j > upto {
        return upto;
    }
    if (t[j].t_offset_s - target).abs() < (target - t[j - 1].t_offset_s).abs() {
        j
    } else {
        j - 1
    }
}
