use super::*;
use crate::channel_model::{load_tddl_preset, sample_amplitude, Preset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn draw(spec: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_amplitude(spec, &mut rng)).collect()
}

fn specs() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::rician(0.032, 0.004).unwrap(),
        DistributionSpec::rician(0.006, 0.002).unwrap(),
        DistributionSpec::rayleigh(0.0045).unwrap(),
        DistributionSpec::nakagami(1.8, 2e-3).unwrap(),
        DistributionSpec::nakagami(0.6, 1e-4).unwrap(),
        DistributionSpec::weibull(0.0054, 1.1877).unwrap(),
        DistributionSpec::weibull(0.008, 1.38).unwrap(),
    ]
}

/// Composite Simpson integral of the density on `[0, x]`.
fn integrate_pdf(family: Family, params: &[f64], x: f64) -> f64 {
    let steps = 20_000;
    let h = x / steps as f64;
    let f = |t: f64| pdf(family, params, t).unwrap();
    let mut acc = f(0.0) + f(x);
    for i in 1..steps {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn cdf_landmarks() {
    let b = 0.0045;
    let median = b * (2.0 * std::f64::consts::LN_2).sqrt();
    assert!((cdf(Family::Rayleigh, &[b], median).unwrap() - 0.5).abs() < 1e-14);
    let (a, k) = (0.0054, 1.1877);
    assert!((cdf(Family::Weibull, &[a, k], a).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    for spec in specs() {
        assert_eq!(cdf(spec.family(), spec.params(), 0.0).unwrap(), 0.0);
        assert!((cdf(spec.family(), spec.params(), 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            cdf(spec.family(), spec.params(), f64::INFINITY).unwrap(),
            1.0
        );
    }
    assert!(cdf(Family::Rayleigh, &[-1.0], 0.1).is_err());
    assert!(pdf(Family::Weibull, &[1.0], 0.1).is_err());
    assert!(pdf(Family::Rayleigh, &[1.0], -0.1).is_err());
}

#[test]
fn densities_match_their_formulas() {
    // Direct evaluation of each density, with a truncated series for I0.
    let i0 = |z: f64| {
        (0..200)
            .map(|k| {
                (z / 2.0).powi(2 * k) / statrs::function::factorial::factorial(k as u64).powi(2)
            })
            .sum::<f64>()
    };
    let (s, sig, x): (f64, f64, f64) = (0.8, 0.5, 0.9);
    let rice =
        i0(x * s / (sig * sig)) * x / (sig * sig) * (-(x * x + s * s) / (2.0 * sig * sig)).exp();
    assert!((pdf(Family::Rician, &[s, sig], x).unwrap() / rice - 1.0).abs() < 1e-12);
    let ray = x / (sig * sig) * (-x * x / (2.0 * sig * sig)).exp();
    assert!((pdf(Family::Rayleigh, &[sig], x).unwrap() / ray - 1.0).abs() < 1e-12);
    assert!((pdf(Family::Rician, &[0.0, sig], x).unwrap() / ray - 1.0).abs() < 1e-12);
    let (mu, om): (f64, f64) = (1.7, 0.6);
    let naka = 2.0 * (mu / om).powf(mu) / statrs::function::gamma::gamma(mu)
        * x.powf(2.0 * mu - 1.0)
        * (-mu / om * x * x).exp();
    assert!((pdf(Family::Nakagami, &[mu, om], x).unwrap() / naka - 1.0).abs() < 1e-12);
    let (a, b): (f64, f64) = (0.7, 1.4);
    let wei = b / a * (x / a).powf(b - 1.0) * (-(x / a).powf(b)).exp();
    assert!((pdf(Family::Weibull, &[a, b], x).unwrap() / wei - 1.0).abs() < 1e-12);
}

#[test]
fn cdf_is_integral_of_pdf() {
    for spec in specs() {
        let scale = spec.second_moment().sqrt();
        for q in [0.3, 1.0, 2.2] {
            let x = q * scale;
            let num = integrate_pdf(spec.family(), spec.params(), x);
            let exact = cdf(spec.family(), spec.params(), x).unwrap();
            // Fractional powers at the origin slow Simpson's convergence.
            assert!(
                (num - exact).abs() < 1e-5,
                "{spec} at {x}: {num} vs {exact}"
            );
        }
    }
}

#[test]
fn rayleigh_fit_recovers_scale() {
    let spec = DistributionSpec::rayleigh(0.0045).unwrap();
    let x = draw(&spec, 100_000, 1);
    let b = fit_mle(&x, Family::Rayleigh).unwrap().params()[0];
    assert!((0.00445..=0.00455).contains(&b), "{b}");
    let direct = (x.iter().map(|v| v * v).sum::<f64>() / (2.0 * x.len() as f64)).sqrt();
    assert!((b / direct - 1.0).abs() < 1e-12);
}

#[test]
fn weibull_fit_recovers_parameters() {
    let spec = DistributionSpec::weibull(0.0054, 1.1877).unwrap();
    let x = draw(&spec, 100_000, 2);
    let fit = fit_family(&x, Family::Weibull).unwrap();
    assert!(
        (fit.params[0] / 0.0054 - 1.0).abs() < 0.02,
        "{:?}",
        fit.params
    );
    assert!(
        (fit.params[1] / 1.1877 - 1.0).abs() < 0.02,
        "{:?}",
        fit.params
    );
    assert!(fit.gradient_norm < 1e-8);
}

#[test]
fn iterative_fits_recover_parameters() {
    for (spec, seed) in [
        (DistributionSpec::rician(0.032, 0.004).unwrap(), 3),
        (DistributionSpec::rician(0.006, 0.002).unwrap(), 4),
        (DistributionSpec::nakagami(1.8, 2e-3).unwrap(), 5),
        (DistributionSpec::nakagami(0.6, 1e-4).unwrap(), 6),
    ] {
        let x = draw(&spec, 100_000, seed);
        let fit = fit_family(&x, spec.family()).unwrap();
        for (got, want) in fit.params.iter().zip(spec.params()) {
            assert!((got / want - 1.0).abs() < 0.02, "{spec}: {:?}", fit.params);
        }
        assert!(fit.gradient_norm < 1e-8);
    }
}

#[test]
fn fits_are_local_likelihood_maxima() {
    for (i, spec) in specs().iter().enumerate() {
        let x = draw(spec, 2000, 40 + i as u64);
        for family in Family::ALL {
            let fit = fit_family(&x, family).unwrap();
            let ll = |p: &[f64]| -> f64 {
                let s = DistributionSpec::new(family, p.to_vec()).unwrap();
                x.iter().map(|&v| s.pdf(v).ln()).sum()
            };
            let base = ll(&fit.params);
            assert!((base - fit.log_likelihood).abs() < 1e-6 * base.abs().max(1.0));
            for j in 0..fit.params.len() {
                for d in [-1e-3, 1e-3] {
                    let mut p = fit.params.clone();
                    if p[j] == 0.0 {
                        continue;
                    }
                    p[j] *= 1.0 + d;
                    assert!(ll(&p) <= base + 1e-9, "{family} on {spec}: param {j} {d}");
                }
            }
        }
    }
}

#[test]
fn constant_samples_fail() {
    let x = vec![0.01; 50];
    for family in Family::ALL {
        assert!(
            matches!(fit_mle(&x, family), Err(Error::Fit { .. })),
            "{family}"
        );
    }
    assert!(matches!(
        fit_mle(&x[..10], Family::Rayleigh),
        Err(Error::Domain(_))
    ));
    let mut bad = vec![0.01; 40];
    bad[3] = -1.0;
    assert!(fit_mle(&bad, Family::Weibull).is_err());
}

#[test]
fn ks_of_quantile_samples() {
    for spec in specs() {
        let n = 200;
        let x: Vec<f64> = (0..n)
            .map(|i| spec.quantile((i as f64 + 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&x, &spec);
        assert!((d - 0.5 / n as f64).abs() < 1e-9, "{spec}: {d}");
    }
    let spec = DistributionSpec::rayleigh(1.0).unwrap();
    let median = (2.0 * std::f64::consts::LN_2).sqrt();
    assert!((ks_statistic(&[median], &spec) - 0.5).abs() < 1e-15);
}

#[test]
fn ks_separates_a_wrong_family() {
    let truth = DistributionSpec::weibull(0.0054, 1.1877).unwrap();
    let mut wins = 0;
    for t in 0..100 {
        let x = draw(&truth, 1000, 1000 + t);
        let own = fit_family(&x, Family::Weibull).unwrap().ks_statistic;
        let other = fit_family(&x, Family::Rayleigh).unwrap().ks_statistic;
        wins += (other > own) as usize;
    }
    assert!(wins >= 90, "{wins}/100");
}

#[test]
fn free_weibull_shape_absorbs_rayleigh_data() {
    // Weibull with shape 2 is Rayleigh, so a free-shape fit cannot be told
    // apart from the true family by its KS distance alone.
    let truth = DistributionSpec::rayleigh(0.0045).unwrap();
    let mut larger = 0;
    for t in 0..100 {
        let x = draw(&truth, 1000, 2000 + t);
        let wei = fit_family(&x, Family::Weibull).unwrap();
        let ray = fit_family(&x, Family::Rayleigh).unwrap();
        assert!((wei.params[1] - 2.0).abs() < 0.2, "shape {}", wei.params[1]);
        assert!(wei.log_likelihood >= ray.log_likelihood - 1e-9);
        larger += (wei.ks_statistic > ray.ks_statistic) as usize;
    }
    eprintln!("free Weibull KS above Rayleigh KS in {larger}/100 trials");
}

#[test]
fn selection_examples() {
    let rice = DistributionSpec::rician(0.032, 0.004).unwrap();
    let sel = select_best(&draw(&rice, 10_000, 7)).unwrap();
    assert_eq!(sel.family(), Family::Rician);
    assert_eq!(sel.fits.len(), 4);
    assert!(!sel.low_confidence);

    let ray = DistributionSpec::rayleigh(0.0045).unwrap();
    let sel = select_best(&draw(&ray, 10_000, 8)).unwrap();
    assert_eq!(sel.family(), Family::Rayleigh);

    let sel = select_best(&draw(&ray, 10, 9)).unwrap();
    assert!(sel.low_confidence);
    assert!(select_best(&[]).is_err());
}

#[test]
fn rician_degeneracy_rule() {
    // Rician data with a tiny line-of-sight term.
    let spec = DistributionSpec::rician(0.0002, 0.004).unwrap();
    let mut declared_rayleigh = 0;
    for t in 0..20 {
        let sel = select_best(&draw(&spec, 1000, 300 + t)).unwrap();
        if sel.family() == Family::Rayleigh {
            declared_rayleigh += 1;
        }
        if sel.min_ks_family == Family::Rician {
            let r = sel.fit_of(Family::Rician).unwrap();
            assert_eq!(
                sel.family() == Family::Rayleigh,
                sel.rule != NestingRule::None
            );
            if r.params[0] < NESTING_RATIO * r.params[1] {
                assert_eq!(sel.rule, NestingRule::RicianDegenerate);
            }
        }
    }
    assert!(declared_rayleigh >= 18, "{declared_rayleigh}/20");
}

#[test]
fn likelihood_of_true_family_dominates() {
    // Rayleigh is nested in every other family and is left out here.
    for (i, spec) in [
        DistributionSpec::rician(0.032, 0.004).unwrap(),
        DistributionSpec::nakagami(0.6, 1e-4).unwrap(),
        DistributionSpec::weibull(0.0054, 1.1877).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let trials = 20u64;
        let wins: usize = (0..trials)
            .into_par_iter()
            .map(|t| {
                let x = draw(spec, 10_000, 500 + 100 * i as u64 + t);
                let own = fit_family(&x, spec.family()).unwrap().log_likelihood;
                let best_other = Family::ALL
                    .iter()
                    .filter(|&&f| f != spec.family())
                    .map(|&f| fit_family(&x, f).unwrap().log_likelihood)
                    .fold(f64::NEG_INFINITY, f64::max);
                (own >= best_other) as usize
            })
            .sum();
        assert!(
            wins * 100 >= 95 * trials as usize,
            "{spec}: {wins}/{trials}"
        );
    }
}

#[test]
fn selection_rate_across_families() {
    // The winning family of each fitted-parameter table row, plus its
    // Nakagami entry.
    let cases = [
        DistributionSpec::rician(0.032, 0.004).unwrap(),
        DistributionSpec::rayleigh(0.0045).unwrap(),
        DistributionSpec::nakagami(0.4052, 1e-4).unwrap(),
        DistributionSpec::weibull(0.0054, 1.1877).unwrap(),
    ];
    let mut correct = 0;
    for (i, spec) in cases.iter().enumerate() {
        let hits: usize = (0..100u64)
            .into_par_iter()
            .map(|t| {
                let sel = select_best(&draw(spec, 1000, 10_000 * (i as u64 + 1) + t)).unwrap();
                (sel.family() == spec.family()) as usize
            })
            .sum();
        eprintln!("{spec}: {hits}/100");
        correct += hits;
    }
    assert!(correct >= 360, "{correct}/400");
}

#[test]
fn k_factor_examples() {
    let (k, db) = rician_k_factor(0.032, 0.004).unwrap();
    assert!((k - 32.0).abs() < 1e-12);
    assert!((db - 15.05).abs() < 0.005);
    assert_eq!(rician_k_factor(0.0, 0.1).unwrap().0, 0.0);
    let (k, db) = rician_k_factor(0.3 * 2f64.sqrt(), 0.3).unwrap();
    assert!((k - 1.0).abs() < 1e-12 && db.abs() < 1e-12);
    assert!(matches!(rician_k_factor(0.1, 0.0), Err(Error::Domain(_))));
}

#[test]
fn preset_specs_fit_their_own_family() {
    for preset in Preset::ALL {
        for tap in load_tddl_preset(preset).taps {
            let x = draw(&tap.amplitude, 5000, 77);
            let fit = fit_family(&x, tap.amplitude.family()).unwrap();
            assert!(fit.gradient_norm < 1e-8);
            assert!(
                fit.ks_statistic < 0.03,
                "{}: {}",
                tap.amplitude,
                fit.ks_statistic
            );
        }
    }
}
