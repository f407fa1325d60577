//! Invariant suites shared by the property tests and the acceptance run.
//! Each runs at least 1000 generated cases.

use ddlab_core::channel_model::synthesize_tf_grid;
use ddlab_core::channel_model::{sample_amplitude, DistributionSpec, Family, Path, PathSet};
use ddlab_core::dd_estimator::{coarse_dd, extract_pilot_fading};
use ddlab_core::dist_fit::fit_mle;
use ddlab_core::io;
use ddlab_core::otfs_link::{build_hdd, mmse_equalize, qpsk_demodulate, qpsk_modulate};
use ddlab_core::stationarity::{
    cdd, dd_tcc, partition_runs, quasi_stationary_intervals, DdPowerSpectrum, IntervalReport,
    RunMode, SimilarityKind, SimilarityMatrix,
};
use ddlab_core::{GridSpec, PilotSymbols, TfGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestRunner;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub const CASES: u32 = 1000;

pub type Outcome = Result<(), String>;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn spectrum(m: usize, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m * n).prop_map(|mut v| {
        v[0] += 1e-3;
        v
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn symmetric_similarity() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..14).prop_flat_map(|t| {
        prop::collection::vec(0.0f64..1.0, t * t).prop_map(move |raw| {
            let mut e = vec![1.0; t * t];
            for i in 0..t {
                for j in i + 1..t {
                    e[i * t + j] = raw[i * t + j];
                    e[j * t + i] = raw[i * t + j];
                }
            }
            (t, e)
        })
    })
}

fn paths_on(grid: GridSpec) -> impl Strategy<Value = PathSet> {
    let (lp, kp) = (
        grid.delay_period() as f64,
        grid.doppler_period() as f64 / 2.0,
    );
    prop::collection::vec((0.0..lp - 1e-6, -kp + 1e-6..kp - 1e-6, complex()), 1..5).prop_map(
        move |v| {
            PathSet::new(
                v.into_iter()
                    .map(|(l, k, h)| Path {
                        tau_s: grid.delay_from_bins(l),
                        nu_hz: grid.doppler_from_bins(k),
                        h,
                    })
                    .collect(),
                0.0,
            )
        },
    )
}

/// Literal double-sum input-output relation of the OTFS frame.
pub fn brute_force(paths: &PathSet, grid: &GridSpec, x: &[Complex64]) -> Vec<Complex64> {
    let (m, n) = (grid.m, grid.n);
    let (mf, nf) = (m as f64, n as f64);
    let bins = paths.normalized(grid);
    (0..n * m)
        .map(|row| {
            let (k, l) = ((row / m) as f64, (row % m) as f64);
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, xv) in x.iter().enumerate() {
                let (kp, lp) = ((col / m) as f64, (col % m) as f64);
                for (p, &(li, ki)) in paths.paths.iter().zip(&bins) {
                    let sn: Complex64 = (0..n)
                        .map(|q| Complex64::from_polar(1.0, -TAU * (k - kp - ki) * q as f64 / nf))
                        .sum();
                    let sm: Complex64 = (0..m)
                        .map(|q| Complex64::from_polar(1.0, -TAU * (l - lp - li) * q as f64 / mf))
                        .sum();
                    acc +=
                        xv * p.h * Complex64::from_polar(1.0, -TAU * p.nu_hz * p.tau_s) * sn * sm;
                }
            }
            acc / (mf * nf)
        })
        .collect()
}

fn within(runs: &[(usize, usize)], (i, j): (usize, usize)) -> bool {
    runs.iter().any(|&(a, b)| a <= i && j <= b)
}

pub fn cdd_bounded_symmetric_and_scale_invariant() -> Outcome {
    let strategy = (spectrum(6, 4), spectrum(6, 4), 1e-6f64..1e6, 1e-6f64..1e6);
    TestRunner::new(config())
        .run(&strategy, |(a, b, ca, cb)| {
            let sa = DdPowerSpectrum::new(6, 4, a.clone(), 0.0).unwrap();
            let sb = DdPowerSpectrum::new(6, 4, b.clone(), 0.0).unwrap();
            let v = cdd(&sa, &sb).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - cdd(&sb, &sa).unwrap()).abs() < 1e-12);
            prop_assert!((cdd(&sa, &sa).unwrap() - 1.0).abs() < 1e-12);
            let scaled_a =
                DdPowerSpectrum::new(6, 4, a.iter().map(|x| x * ca).collect(), 0.0).unwrap();
            let scaled_b =
                DdPowerSpectrum::new(6, 4, b.iter().map(|x| x * cb).collect(), 0.0).unwrap();
            prop_assert!((cdd(&scaled_a, &scaled_b).unwrap() - v).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn dd_tcc_phase_invariant_and_bounded() -> Outcome {
    let strategy = (complex(), complex(), 0.0..TAU, 0.0..TAU);
    TestRunner::new(config())
        .run(&strategy, |(h, g, p1, p2)| {
            prop_assume!(h.norm() > 1e-9 || g.norm() > 1e-9);
            let v = dd_tcc(h, g).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let rotated = dd_tcc(
                h * Complex64::from_polar(1.0, p1),
                g * Complex64::from_polar(1.0, p2),
            )
            .unwrap();
            prop_assert!((rotated - v).abs() < 1e-12);
            prop_assert!((dd_tcc(g, h).unwrap() - v).abs() < 1e-15);
            if h.norm() > 1e-9 {
                prop_assert!(
                    (dd_tcc(h, h * Complex64::from_polar(1.0, p1)).unwrap() - 1.0).abs() < 1e-12
                );
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn coarse_estimate_is_periodic() -> Outcome {
    let strategy = (
        paths_on(GridSpec::new(16, 8, 15e3, 2, 2).unwrap()),
        any::<u64>(),
    );
    TestRunner::new(config())
        .run(&strategy, |(paths, seed)| {
            let grid = GridSpec::new(16, 8, 15e3, 2, 2).unwrap();
            let pilots = PilotSymbols::qpsk(&grid, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rx = synthesize_tf_grid(&paths, &grid, &pilots, 0.0, &mut rng).unwrap();
            let dd = coarse_dd(&extract_pilot_fading(&rx, &pilots).unwrap());
            prop_assert!(dd.periodicity_error() < 1e-12, "{}", dd.periodicity_error());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn grid_file_round_trip() -> Outcome {
    let strategy = (
        prop::sample::select(vec![
            (8usize, 4usize, 2usize, 2usize),
            (6, 6, 3, 1),
            (4, 2, 1, 1),
        ]),
        prop::collection::vec((any::<f32>(), any::<f32>()), 64),
        1.0f64..1e6,
    );
    TestRunner::new(config())
        .run(&strategy, |(dims, values, delta_f)| {
            let (m, n, d_f, d_t) = dims;
            let spec = GridSpec::new(m, n, delta_f, d_f, d_t).unwrap();
            let data: Vec<Complex64> = values
                .iter()
                .take(spec.len())
                .map(|&(a, b)| {
                    let fin = |v: f32| if v.is_finite() { v as f64 } else { 0.0 };
                    Complex64::new(fin(a), fin(b))
                })
                .collect();
            let grid = TfGrid { spec, data };
            let mut buf = Vec::new();
            io::write_grid(&mut buf, &grid).unwrap();
            prop_assert_eq!(io::read_grid(&buf[..]).unwrap(), grid);
            let mut again = Vec::new();
            io::write_grid(&mut again, &io::read_grid(&buf[..]).unwrap()).unwrap();
            prop_assert_eq!(again, buf);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn trace_round_trip() -> Outcome {
    let path = (0.0f64..1e-5, -500.0f64..500.0, -1e3f64..1e3, -1e-9f64..1e-9);
    let strategy = prop::collection::vec((-1e3f64..1e3, prop::collection::vec(path, 0..5)), 0..6);
    TestRunner::new(config())
        .run(&strategy, |records| {
            let trace: Vec<PathSet> = records
                .into_iter()
                .map(|(t, ps)| {
                    PathSet::new(
                        ps.into_iter()
                            .map(|(tau_s, nu_hz, re, im)| Path {
                                tau_s,
                                nu_hz,
                                h: Complex64::new(re, im),
                            })
                            .collect(),
                        t,
                    )
                })
                .collect();
            let mut buf = Vec::new();
            io::write_trace(&mut buf, &trace).unwrap();
            prop_assert_eq!(io::read_trace(&buf[..]).unwrap(), trace);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn similarity_and_interval_rows_round_trip() -> Outcome {
    let strategy = (symmetric_similarity(), 1e-4f64..1.0, 0.05f64..1.0);
    TestRunner::new(config())
        .run(&strategy, |((t, entries), step, alpha)| {
            let sim = SimilarityMatrix {
                size: t,
                entries,
                kind: SimilarityKind::Cdd,
                time_axis: (0..t).map(|i| i as f64 * step).collect(),
            };
            let mut buf = Vec::new();
            io::write_similarity(&mut buf, &sim).unwrap();
            let back = io::read_similarity(&buf[..]).unwrap();
            prop_assert_eq!(&back, &sim);

            let report = quasi_stationary_intervals(&sim, alpha).unwrap();
            let rows = io::interval_rows("stationary", &report);
            let mut buf = Vec::new();
            io::write_rows(&mut buf, &rows).unwrap();
            let read: Vec<io::IntervalRow> = io::read_rows(&buf[..]).unwrap();
            let groups = io::reports_from_rows(&read).unwrap();
            prop_assert_eq!(groups, vec![("stationary".to_string(), report)]);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn complete_linkage_runs_nest_across_thresholds() -> Outcome {
    let strategy = (symmetric_similarity(), 0.05f64..1.0, 0.05f64..1.0);
    TestRunner::new(config())
        .run(&strategy, |((t, e), a1, a2)| {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let sim = |i: usize, j: usize| e[i * t + j];
            let coarse = partition_runs(t, sim, lo, RunMode::CompleteLinkage);
            let fine = partition_runs(t, sim, hi, RunMode::CompleteLinkage);
            for &r in &fine {
                prop_assert!(within(&coarse, r), "{r:?} not inside {coarse:?}");
            }
            for (i, j) in fine.iter().copied() {
                for a in i..=j {
                    for b in a..=j {
                        prop_assert!(e[a * t + b] >= hi);
                    }
                }
            }
            let times: Vec<(f64, f64)> = coarse
                .iter()
                .map(|&(i, j)| (i as f64, j as f64 + 1.0))
                .collect();
            let rc = IntervalReport::from_parts(lo, coarse.clone(), times);
            let times: Vec<(f64, f64)> = fine
                .iter()
                .map(|&(i, j)| (i as f64, j as f64 + 1.0))
                .collect();
            let rf = IntervalReport::from_parts(hi, fine.clone(), times);
            prop_assert!(rf.t_mean_ms <= rc.t_mean_ms + 1e-9);
            prop_assert!(rf.t_max_ms <= rc.t_max_ms && rf.t_min_ms <= rc.t_min_ms);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn hdd_matches_double_sum() -> Outcome {
    let strategy = prop::sample::select(vec![
        (8usize, 4usize),
        (4, 4),
        (4, 8),
        (8, 8),
        (16, 4),
        (2, 2),
        (6, 2),
    ])
    .prop_flat_map(|(m, n)| {
        let grid = GridSpec::full(m, n, 15e3).unwrap();
        (
            Just(grid),
            paths_on(grid),
            prop::collection::vec(complex(), m * n),
        )
    });
    TestRunner::new(config())
        .run(&strategy, |(grid, paths, x)| {
            let want = brute_force(&paths, &grid, &x);
            let got = build_hdd(&paths, &grid).unwrap().apply(&x).unwrap();
            let err: f64 = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let norm: f64 = want.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(
                err <= 1e-10 * norm.max(1e-300),
                "relative error {}",
                err / norm
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn qpsk_round_trip_and_scalar_mmse() -> Outcome {
    let strategy = (
        prop::collection::vec(any::<bool>(), 32),
        complex(),
        0.0f64..10.0,
        0.1f64..10.0,
        complex(),
    );
    TestRunner::new(config())
        .run(&strategy, |(bits, h, sigma2, e_x, y)| {
            let frame = qpsk_modulate(&bits, 4, 4).unwrap();
            prop_assert_eq!(qpsk_demodulate(&frame.symbols), bits);
            prop_assume!(h.norm() > 1e-3);
            let got = mmse_equalize(&[y], &DMatrix::from_element(1, 1, h), sigma2, e_x).unwrap()[0];
            let want = h.conj() * y / (h.norm_sqr() + sigma2 / e_x);
            prop_assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-12));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn quantile_inverts_cdf() -> Outcome {
    let strategy = (
        prop::sample::select(Family::ALL.to_vec()),
        0.05f64..5.0,
        0.3f64..5.0,
        1e-6f64..0.999_999,
    );
    TestRunner::new(config())
        .run(&strategy, |(family, p1, p2, u)| {
            let spec = match family {
                Family::Rician => DistributionSpec::rician(p1, p2),
                Family::Rayleigh => DistributionSpec::rayleigh(p1),
                Family::Nakagami => DistributionSpec::nakagami(p2, p1),
                Family::Weibull => DistributionSpec::weibull(p1, p2),
            }
            .unwrap();
            let x = spec.quantile(u);
            prop_assert!(
                (spec.cdf(x) - u).abs() < 1e-8,
                "{:?} u {} x {} cdf {}",
                spec,
                u,
                x,
                spec.cdf(x)
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fits_are_scale_equivariant() -> Outcome {
    let strategy = (
        prop::sample::select(Family::ALL.to_vec()),
        any::<u64>(),
        1e-4f64..1e4,
        0.6f64..4.0,
    );
    TestRunner::new(config())
        .run(&strategy, |(family, seed, scale, shape)| {
            let truth = match family {
                Family::Rician => DistributionSpec::rician(shape, 1.0),
                Family::Rayleigh => DistributionSpec::rayleigh(1.0),
                Family::Nakagami => DistributionSpec::nakagami(shape, 1.0),
                Family::Weibull => DistributionSpec::weibull(1.0, shape),
            }
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..200)
                .map(|_| sample_amplitude(&truth, &mut rng))
                .collect();
            let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let base = fit_mle(&x, family).unwrap();
            let scaled = fit_mle(&xs, family).unwrap();
            let want = base.scaled(scale);
            for (a, b) in scaled.params().iter().zip(want.params()) {
                prop_assert!(
                    (a - b).abs() <= 1e-6 * b.abs().max(1e-12),
                    "{family:?}: {a} vs {b}"
                );
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub type Property = (&'static str, fn() -> Outcome);

#[allow(dead_code)]
pub const ALL: &[Property] = &[
    (
        "cdd_bounded_symmetric_and_scale_invariant",
        cdd_bounded_symmetric_and_scale_invariant,
    ),
    (
        "dd_tcc_phase_invariant_and_bounded",
        dd_tcc_phase_invariant_and_bounded,
    ),
    ("coarse_estimate_is_periodic", coarse_estimate_is_periodic),
    ("grid_file_round_trip", grid_file_round_trip),
    ("trace_round_trip", trace_round_trip),
    (
        "similarity_and_interval_rows_round_trip",
        similarity_and_interval_rows_round_trip,
    ),
    (
        "complete_linkage_runs_nest_across_thresholds",
        complete_linkage_runs_nest_across_thresholds,
    ),
    ("hdd_matches_double_sum", hdd_matches_double_sum),
    (
        "qpsk_round_trip_and_scalar_mmse",
        qpsk_round_trip_and_scalar_mmse,
    ),
    ("quantile_inverts_cdf", quantile_inverts_cdf),
    ("fits_are_scale_equivariant", fits_are_scale_equivariant),
];
