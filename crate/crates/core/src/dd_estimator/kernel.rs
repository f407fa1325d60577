//! Periodic sampling kernels of the coarse DD estimate.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::grid::GridSpec;

/// Below this `|π·ε/L|` the Dirichlet ratio switches to its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-8;

/// `Σ_{m=0}^{L-1} exp(-j2π·m·δ/L)`.
pub fn dirichlet(delta: f64, len: usize) -> Complex64 {
    let l = len as f64;
    let q = (delta / l).round();
    let eps = delta - q * l;
    let x = PI * eps / l;
    let mut ratio = if x.abs() < SERIES_THRESHOLD {
        l * (1.0 - (PI * eps).powi(2) * (1.0 - 1.0 / (l * l)) / 6.0)
    } else {
        (PI * eps).sin() / x.sin()
    };
    // sin(πδ)/sin(πδ/L) picks up (-1)^{q(L-1)} when δ is folded by q periods.
    if (q as i64).rem_euclid(2) == 1 && len.is_multiple_of(2) {
        ratio = -ratio;
    }
    Complex64::from_polar(1.0, -PI * delta * (l - 1.0) / l) * ratio
}

/// Delay sampling component for a path at fractional delay `l_path`
/// evaluated at delay bin `l`.
pub fn delay_kernel(spec: &GridSpec, l_path: f64, l: f64) -> Complex64 {
    dirichlet(l_path - l, spec.delay_period()) * (spec.d_f as f64 / (spec.m as f64).sqrt())
}

/// Doppler sampling component for a path at fractional Doppler `k_path`
/// evaluated at Doppler bin `k`.
pub fn doppler_kernel(spec: &GridSpec, k_path: f64, k: f64) -> Complex64 {
    dirichlet(k - k_path, spec.doppler_period()) * (spec.d_t as f64 / (spec.n as f64).sqrt())
}

/// Full `N × M` periodic response of one path, added onto `out`
/// scaled by `sign`.
pub(crate) fn accumulate_response(
    spec: &GridSpec,
    l_path: f64,
    k_path: f64,
    h: Complex64,
    out: &mut [Complex64],
) {
    let delay: Vec<Complex64> = (0..spec.m)
        .map(|l| delay_kernel(spec, l_path, l as f64))
        .collect();
    for k in 0..spec.n {
        let row = h * doppler_kernel(spec, k_path, k as f64);
        for (o, d) in out[k * spec.m..(k + 1) * spec.m].iter_mut().zip(&delay) {
            *o += row * d;
        }
    }
}
