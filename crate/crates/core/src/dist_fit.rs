//! Maximum-likelihood fitting and Kolmogorov-Smirnov comparison of fading
//! amplitude distributions.
//!
//! All fits run on samples normalized to unit mean square and are mapped
//! back, which makes every estimator exactly scale equivariant.

use serde::{Deserialize, Serialize};

use crate::channel_model::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::special;

/// Fewest samples accepted by [`fit_mle`].
pub const MIN_FIT_SAMPLES: usize = 30;
/// Below this many samples a selection is flagged low-confidence.
pub const MIN_SELECT_SAMPLES: usize = 100;
/// A Rician fit with `s < NESTING_RATIO·σ` is declared Rayleigh.
pub const NESTING_RATIO: f64 = 0.1;
/// 99% point of the χ² law with one degree of freedom.
pub const LR_CRITICAL: f64 = 6.635;

/// Required score norm, per sample, on normalized data.
const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 200;
/// Relative spread below which samples count as constant.
const DEGENERATE_SPREAD: f64 = 1e-9;

pub fn pdf(family: Family, params: &[f64], x: f64) -> Result<f64> {
    let spec = DistributionSpec::new(family, params.to_vec())?;
    check_point(x)?;
    Ok(spec.pdf(x))
}

pub fn cdf(family: Family, params: &[f64], x: f64) -> Result<f64> {
    let spec = DistributionSpec::new(family, params.to_vec())?;
    check_point(x)?;
    Ok(spec.cdf(x))
}

fn check_point(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!(
            "amplitude must be non-negative, got {x}"
        )));
    }
    Ok(())
}

/// One family fitted to a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: Vec<f64>,
    pub ks_statistic: f64,
    pub sample_count: usize,
    pub log_likelihood: f64,
    /// Score norm per sample at the returned parameters, on normalized data.
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn spec(&self) -> DistributionSpec {
        DistributionSpec::new(self.family, self.params.clone())
            .expect("fitted parameters lie in the family domain")
    }
}

fn fit_error(family: Family, reason: impl Into<String>) -> Error {
    Error::Fit {
        family: family.name().to_string(),
        reason: reason.into(),
    }
}

fn check_samples(samples: &[f64], min: usize) -> Result<()> {
    if samples.len() < min {
        return Err(Error::domain(format!(
            "need at least {min} samples, got {}",
            samples.len()
        )));
    }
    if let Some(i) = samples.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::domain(format!(
            "sample {i} is {}; amplitudes must be positive",
            samples[i]
        )));
    }
    Ok(())
}

/// Samples divided by their root mean square, and that RMS.
fn normalize(samples: &[f64], family: Family) -> Result<(Vec<f64>, f64)> {
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt();
    let y: Vec<f64> = samples.iter().map(|x| x / rms).collect();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(0.0, f64::max);
    if hi - lo <= DEGENERATE_SPREAD {
        return Err(fit_error(
            family,
            format!("samples are constant ({})", samples[0]),
        ));
    }
    Ok((y, rms))
}

/// Maximum-likelihood parameters of `family` for positive `samples`.
pub fn fit_mle(samples: &[f64], family: Family) -> Result<DistributionSpec> {
    check_samples(samples, MIN_FIT_SAMPLES)?;
    fit_normalized(samples, family).map(|(spec, _)| spec)
}

fn fit_normalized(samples: &[f64], family: Family) -> Result<(DistributionSpec, f64)> {
    let (y, rms) = normalize(samples, family)?;
    let (params, grad) = match family {
        Family::Rayleigh => {
            // Mean square of y is one by construction.
            (vec![std::f64::consts::FRAC_1_SQRT_2], 0.0)
        }
        Family::Weibull => fit_weibull(&y)?,
        Family::Nakagami => fit_nakagami(&y)?,
        Family::Rician => fit_rician(&y)?,
    };
    if !(grad < GRADIENT_TOLERANCE) {
        return Err(fit_error(
            family,
            format!("score norm {grad:.3e} after {MAX_ITERATIONS} iterations"),
        ));
    }
    let spec =
        DistributionSpec::new(family, params).map_err(|e| fit_error(family, e.to_string()))?;
    Ok((spec.scaled(rms), grad))
}

/// Profile-likelihood shape equation of the Weibull law, solved by
/// safeguarded Newton steps in `ln b`.
fn fit_weibull(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len() as f64;
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n;
    // Centre logs so the power sums stay moderate for large shapes.
    let c: Vec<f64> = logs.iter().map(|l| l - mean_log).collect();
    let score = |b: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &c {
            let w = (b * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let (r1, r2) = (s1 / s0, s2 / s0);
        // g(b) = 1/b - Σw·l/Σw, and its derivative.
        (1.0 / b - r1, -1.0 / (b * b) - (r2 - r1 * r1))
    };
    let sd = (c.iter().map(|l| l * l).sum::<f64>() / n).sqrt();
    let mut b = std::f64::consts::PI / (6.0f64.sqrt() * sd);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut g = f64::NAN;
    for _ in 0..MAX_ITERATIONS {
        let (gv, dg) = score(b);
        g = gv;
        if g.abs() < 1e-13 {
            break;
        }
        // g is strictly decreasing in b.
        if g > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let mut next = b - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * b
            };
        }
        b = next;
    }
    let w_mean = c.iter().map(|l| (b * l).exp()).sum::<f64>() / n;
    let a = (mean_log + w_mean.ln() / b).exp();
    // Full score in (a, b): the scale component vanishes by construction.
    Ok((vec![a, b], g.abs()))
}

/// Shape equation `ln μ - ψ(μ) = ln E[y²] - E[ln y²]`.
fn fit_nakagami(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len() as f64;
    let omega = y.iter().map(|v| v * v).sum::<f64>() / n;
    let delta = omega.ln() - y.iter().map(|v| (v * v).ln()).sum::<f64>() / n;
    if !(delta > 0.0) {
        return Err(fit_error(Family::Nakagami, "no spread in log power"));
    }
    let f = |mu: f64| mu.ln() - special::digamma(mu) - delta;
    // Closed-form approximation of the gamma shape estimate.
    let mut mu = (3.0 - delta + ((delta - 3.0).powi(2) + 24.0 * delta).sqrt()) / (12.0 * delta);
    let mut fv = f(mu);
    for _ in 0..MAX_ITERATIONS {
        if fv.abs() < 1e-14 {
            break;
        }
        // Newton in ln μ keeps the iterate positive.
        let df = 1.0 - mu * special::trigamma(mu);
        let step = (-fv / df).clamp(-2.0, 2.0);
        mu *= step.exp();
        fv = f(mu);
    }
    Ok((vec![mu, omega], fv.abs()))
}

/// Per-sample Rician log-likelihood terms in `(s, v = σ²)`.
struct RicianScore {
    ll: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

fn rician_score(y: &[f64], s: f64, v: f64) -> RicianScore {
    let n = y.len() as f64;
    let mut out = RicianScore {
        ll: 0.0,
        grad: [0.0; 2],
        hess: [[0.0; 2]; 2],
    };
    for &x in y {
        let z = x * s / v;
        let a = special::bessel_ratio_i1_i0(z);
        let da = if z < 1e-8 { 0.5 } else { 1.0 - a / z - a * a };
        out.ll += x.ln() - v.ln() - (x * x + s * s) / (2.0 * v) + special::ln_bessel_i0(z);
        out.grad[0] += -s / v + x / v * a;
        out.grad[1] += -1.0 / v + (x * x + s * s) / (2.0 * v * v) - x * s / (v * v) * a;
        out.hess[0][0] += -1.0 / v + (x / v).powi(2) * da;
        out.hess[0][1] += s / (v * v) - x / (v * v) * a - x * z / (v * v) * da;
        out.hess[1][1] += 1.0 / (v * v) - (x * x + s * s) / (v * v * v)
            + 2.0 * x * s / (v * v * v) * a
            + x * s * z / (v * v * v) * da;
    }
    out.ll /= n;
    for g in &mut out.grad {
        *g /= n;
    }
    for row in &mut out.hess {
        for h in row {
            *h /= n;
        }
    }
    out.hess[1][0] = out.hess[0][1];
    out
}

/// Rician fit on unit mean-square data: a scan over the K-factor along the
/// curve where the σ equation holds, then damped Newton polishing.
fn fit_rician(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let on_curve = |k: f64| {
        let s2 = k / (k + 1.0);
        (s2.sqrt(), (1.0 - s2) / 2.0)
    };
    let mut best = (0.0, 0.5, rician_score(y, 0.0, 0.5).ll);
    for i in 0..=160 {
        let k = 10f64.powf(-4.0 + 9.0 * i as f64 / 160.0);
        let (s, v) = on_curve(k);
        let ll = rician_score(y, s, v).ll;
        if ll > best.2 {
            best = (s, v, ll);
        }
    }
    let (mut s, mut v) = (best.0, best.1);
    let mut sc = rician_score(y, s, v);
    for _ in 0..MAX_ITERATIONS {
        let gnorm = sc.grad[0].hypot(sc.grad[1]);
        if gnorm < 1e-12 {
            break;
        }
        let [[a, b], [_, d]] = sc.hess;
        let det = a * d - b * b;
        // Newton direction when the Hessian is negative definite, otherwise
        // plain ascent.
        let dir = if a < 0.0 && det > 0.0 {
            [
                -(d * sc.grad[0] - b * sc.grad[1]) / det,
                -(a * sc.grad[1] - b * sc.grad[0]) / det,
            ]
        } else {
            [sc.grad[0] * v, sc.grad[1] * v * v]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (ns, nv) = ((s + t * dir[0]).abs(), v + t * dir[1]);
            if nv > 0.0 {
                let nsc = rician_score(y, ns, nv);
                // Near the optimum the likelihood gain drops below rounding;
                // a shrinking score then decides.
                let flat = (nsc.ll - sc.ll).abs() <= 1e-14 * sc.ll.abs().max(1.0);
                if nsc.ll > sc.ll || (flat && nsc.grad[0].hypot(nsc.grad[1]) < gnorm) {
                    s = ns;
                    v = nv;
                    sc = nsc;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((vec![s, v.sqrt()], sc.grad[0].hypot(sc.grad[1])))
}

/// Two-sided KS distance between the empirical CDF of `samples` and `spec`.
pub fn ks_statistic(samples: &[f64], spec: &DistributionSpec) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = spec.cdf(v);
            ((i + 1) as f64 / n - f).abs().max((i as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn log_likelihood(samples: &[f64], spec: &DistributionSpec) -> f64 {
    samples.iter().map(|&x| spec.ln_pdf(x)).sum()
}

fn fit_result(samples: &[f64], family: Family) -> Result<FitResult> {
    let (spec, gradient_norm) = fit_normalized(samples, family)?;
    Ok(FitResult {
        family,
        params: spec.params().to_vec(),
        ks_statistic: ks_statistic(samples, &spec),
        sample_count: samples.len(),
        log_likelihood: log_likelihood(samples, &spec),
        gradient_norm,
    })
}

/// MLE fit of `family` with its KS distance and log-likelihood.
pub fn fit_family(samples: &[f64], family: Family) -> Result<FitResult> {
    check_samples(samples, MIN_FIT_SAMPLES)?;
    fit_result(samples, family)
}

/// Why the declared family differs from the minimum-KS family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestingRule {
    /// Minimum-KS family kept.
    None,
    /// Rician with `s < 0.1·σ`.
    RicianDegenerate,
    /// The winner does not beat its nested Rayleigh special case by the
    /// likelihood-ratio margin.
    LikelihoodRatio,
}

/// Outcome of comparing all four families on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Fit of the declared family.
    pub best: FitResult,
    /// Family with the smallest KS distance before nesting rules.
    pub min_ks_family: Family,
    pub rule: NestingRule,
    /// Per-family outcome in [`Family::ALL`] order; failures keep their
    /// message.
    pub fits: Vec<(Family, std::result::Result<FitResult, String>)>,
    pub low_confidence: bool,
}

impl Selection {
    pub fn family(&self) -> Family {
        self.best.family
    }

    pub fn fit_of(&self, family: Family) -> Option<&FitResult> {
        self.fits
            .iter()
            .find(|(f, _)| *f == family)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

/// Fits all families and declares the best one.
///
/// The minimum-KS family wins, subject to two parsimony rules that fall
/// back to Rayleigh, which every other family nests: a Rician winner with
/// `s < 0.1·σ`, and any winner whose log-likelihood gain over the Rayleigh
/// fit is below the 1-dof χ² 99% margin.
pub fn select_best(samples: &[f64]) -> Result<Selection> {
    check_samples(samples, 2)?;
    let fits: Vec<(Family, std::result::Result<FitResult, String>)> = Family::ALL
        .iter()
        .map(|&f| (f, fit_result(samples, f).map_err(|e| e.to_string())))
        .collect();
    let ok: Vec<&FitResult> = fits.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let Some(winner) = ok
        .iter()
        .min_by(|a, b| a.ks_statistic.total_cmp(&b.ks_statistic))
        .copied()
    else {
        let reasons: Vec<String> = fits
            .iter()
            .filter_map(|(f, r)| r.as_ref().err().map(|e| format!("{f}: {e}")))
            .collect();
        return Err(Error::Fit {
            family: "all".into(),
            reason: reasons.join("; "),
        });
    };
    let rayleigh = ok.iter().find(|r| r.family == Family::Rayleigh).copied();
    let mut rule = NestingRule::None;
    let mut best = winner.clone();
    if let Some(ray) = rayleigh {
        if winner.family == Family::Rician && winner.params[0] < NESTING_RATIO * winner.params[1] {
            rule = NestingRule::RicianDegenerate;
        } else if winner.family != Family::Rayleigh
            && 2.0 * (winner.log_likelihood - ray.log_likelihood) < LR_CRITICAL
        {
            rule = NestingRule::LikelihoodRatio;
        }
        if rule != NestingRule::None {
            best = ray.clone();
        }
    }
    Ok(Selection {
        best,
        min_ks_family: winner.family,
        rule,
        low_confidence: samples.len() < MIN_SELECT_SAMPLES,
        fits,
    })
}

/// Rician K-factor `s²/(2σ²)` in linear units and dB.
pub fn rician_k_factor(s: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(s >= 0.0 && s.is_finite()) {
        return Err(Error::domain(format!(
            "K-factor needs s >= 0 and sigma > 0, got s={s}, sigma={sigma}"
        )));
    }
    let k = s * s / (2.0 * sigma * sigma);
    Ok((k, 10.0 * k.log10()))
}

#[cfg(test)]
mod tests;
