use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::special;

/// Amplitude distribution families used for tap fading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Rician,
    Rayleigh,
    Nakagami,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Rician,
        Family::Rayleigh,
        Family::Nakagami,
        Family::Weibull,
    ];

    pub fn param_count(self) -> usize {
        match self {
            Family::Rayleigh => 1,
            _ => 2,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Rician => &["s", "sigma"],
            Family::Rayleigh => &["b"],
            Family::Nakagami => &["mu", "omega"],
            Family::Weibull => &["a", "b"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Rician => "Rician",
            Family::Rayleigh => "Rayleigh",
            Family::Nakagami => "Nakagami",
            Family::Weibull => "Weibull",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rician" | "rice" => Ok(Family::Rician),
            "rayleigh" => Ok(Family::Rayleigh),
            "nakagami" => Ok(Family::Nakagami),
            "weibull" => Ok(Family::Weibull),
            other => Err(Error::config(format!(
                "unknown distribution family '{other}'"
            ))),
        }
    }
}

/// A fully parameterized amplitude distribution.
///
/// Parameter order: Rician `(s, σ)`, Rayleigh `(b)`, Nakagami `(μ, ω)`,
/// Weibull `(a, b)` with `a` the scale and `b` the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DistributionSpec {
    family: Family,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: Family,
    params: Vec<f64>,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        DistributionSpec::new(raw.family, raw.params)
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        RawSpec {
            family: spec.family,
            params: spec.params,
        }
    }
}

impl DistributionSpec {
    pub fn new(family: Family, params: Vec<f64>) -> Result<Self> {
        if params.len() != family.param_count() {
            return Err(Error::domain(format!(
                "{family} takes {} parameter(s), got {}",
                family.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain(format!(
                "{family} parameters must be finite: {params:?}"
            )));
        }
        let ok = match family {
            // s = 0 is the Rayleigh limit and stays legal.
            Family::Rician => params[0] >= 0.0 && params[1] > 0.0,
            Family::Rayleigh => params[0] > 0.0,
            Family::Nakagami => params[0] > 1e-12 && params[1] > 0.0,
            Family::Weibull => params[0] > 0.0 && params[1] > 0.0,
        };
        if !ok {
            return Err(Error::domain(format!(
                "{family} parameters out of domain: {params:?}"
            )));
        }
        Ok(DistributionSpec { family, params })
    }

    pub fn rician(s: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Rician, vec![s, sigma])
    }

    pub fn rayleigh(b: f64) -> Result<Self> {
        Self::new(Family::Rayleigh, vec![b])
    }

    pub fn nakagami(mu: f64, omega: f64) -> Result<Self> {
        Self::new(Family::Nakagami, vec![mu, omega])
    }

    pub fn weibull(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Weibull, vec![a, b])
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// `E[X²]` of the amplitude.
    pub fn second_moment(&self) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Rician => p[0] * p[0] + 2.0 * p[1] * p[1],
            Family::Rayleigh => 2.0 * p[0] * p[0],
            Family::Nakagami => p[1],
            Family::Weibull => p[0] * p[0] * statrs::function::gamma::gamma(1.0 + 2.0 / p[1]),
        }
    }

    /// The distribution of `c·X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let p = &self.params;
        let params = match self.family {
            Family::Rician => vec![p[0] * c, p[1] * c],
            Family::Rayleigh => vec![p[0] * c],
            Family::Nakagami => vec![p[0], p[1] * c * c],
            Family::Weibull => vec![p[0] * c, p[1]],
        };
        DistributionSpec {
            family: self.family,
            params,
        }
    }
}

impl DistributionSpec {
    /// Log-density at `x`; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let p = &self.params;
        match self.family {
            Family::Rician => {
                let (s, sig2) = (p[0], p[1] * p[1]);
                let z = x * s / sig2;
                // ln I0(z) - (x² + s²)/(2σ²) folded so that large z stays finite.
                x.ln() - sig2.ln() + special::bessel_i0e(z).ln() - (x - s).powi(2) / (2.0 * sig2)
            }
            Family::Rayleigh => {
                let b2 = p[0] * p[0];
                x.ln() - b2.ln() - x * x / (2.0 * b2)
            }
            Family::Nakagami => {
                let (mu, omega) = (p[0], p[1]);
                std::f64::consts::LN_2 + mu * (mu / omega).ln() - special::ln_gamma_fn(mu)
                    + (2.0 * mu - 1.0) * x.ln()
                    - mu * x * x / omega
            }
            Family::Weibull => {
                let (a, b) = (p[0], p[1]);
                let r = x / a;
                (b / a).ln() + (b - 1.0) * r.ln() - r.powf(b)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        let p = &self.params;
        match self.family {
            Family::Rician => special::rician_cdf(x, p[0], p[1]),
            Family::Rayleigh => -(-x * x / (2.0 * p[0] * p[0])).exp_m1(),
            Family::Nakagami => special::reg_lower_gamma(p[0], p[0] * x * x / p[1]),
            Family::Weibull => -(-(x / p[0]).powf(p[1])).exp_m1(),
        }
    }

    /// Inverse CDF for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        let p = &self.params;
        match self.family {
            Family::Rayleigh => p[0] * (-2.0 * (-u).ln_1p()).sqrt(),
            Family::Weibull => p[0] * (-(-u).ln_1p()).powf(1.0 / p[1]),
            _ => special::invert_cdf(|x| self.cdf(x), u, self.second_moment().sqrt()),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// Draws one amplitude from `spec`.
pub fn sample_amplitude<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> f64 {
    let p = spec.params();
    match spec.family() {
        Family::Rician => {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            (p[0] + p[1] * x).hypot(p[1] * y)
        }
        Family::Rayleigh => {
            let u: f64 = rng.random();
            p[0] * (-2.0 * (-u).ln_1p()).sqrt()
        }
        Family::Nakagami => {
            // Validated parameters always form a valid gamma law.
            let g = Gamma::new(p[0], p[1] / p[0]).expect("validated Nakagami parameters");
            g.sample(rng).sqrt()
        }
        Family::Weibull => {
            let u: f64 = rng.random();
            p[0] * (-(-u).ln_1p()).powf(1.0 / p[1])
        }
    }
}
