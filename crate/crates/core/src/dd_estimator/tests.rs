use super::*;
use crate::channel_model::{synthesize_tf_grid, Path, PathSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn paths_at(spec: &GridSpec, items: &[(f64, f64, Complex64)]) -> PathSet {
    PathSet::new(
        items
            .iter()
            .map(|&(l, k, h)| Path {
                tau_s: spec.delay_from_bins(l),
                nu_hz: spec.doppler_from_bins(k),
                h,
            })
            .collect(),
        0.0,
    )
}

fn coarse_of(spec: &GridSpec, items: &[(f64, f64, Complex64)]) -> PeriodicDdGrid {
    let pilots = PilotSymbols::qpsk(spec, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rx = synthesize_tf_grid(&paths_at(spec, items), spec, &pilots, 0.0, &mut rng).unwrap();
    coarse_dd(&extract_pilot_fading(&rx, &pilots).unwrap())
}

/// Direct evaluation of the scaled double sum defining the coarse grid.
fn brute_coarse(f: &SparseTfFading) -> Vec<Complex64> {
    let s = f.spec;
    let scale = (s.d_f * s.d_t) as f64 / ((s.m * s.n) as f64).sqrt();
    let mut out = vec![c(0.0, 0.0); s.len()];
    for k in 0..s.n {
        for l in 0..s.m {
            let mut acc = c(0.0, 0.0);
            for n in 0..s.n {
                for m in 0..s.m {
                    let phase =
                        TAU * (m as f64 * l as f64 / s.m as f64 - n as f64 * k as f64 / s.n as f64);
                    acc += f.at(m, n) * Complex64::from_polar(1.0, phase);
                }
            }
            out[k * s.m + l] = acc * scale;
        }
    }
    out
}

#[test]
fn ls_is_exact_without_noise() {
    let spec = GridSpec::new(16, 8, 15e3, 2, 2).unwrap();
    let paths = paths_at(&spec, &[(1.4, 0.7, c(0.6, -0.3)), (5.0, -1.2, c(0.1, 0.2))]);
    let pilots = PilotSymbols::qpsk(&spec, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rx = synthesize_tf_grid(&paths, &spec, &pilots, 0.0, &mut rng).unwrap();
    let f = extract_pilot_fading(&rx, &pilots).unwrap();
    for n in 0..spec.n {
        for m in 0..spec.m {
            if spec.is_pilot(m, n) {
                let h = crate::channel_model::tf_response(&paths, &spec, m, n);
                assert!((f.at(m, n) - h).norm() < 1e-12);
            } else {
                assert_eq!(f.at(m, n), c(0.0, 0.0));
            }
        }
    }
}

#[test]
fn ls_identity_channel() {
    let spec = GridSpec::new(8, 4, 15e3, 2, 1).unwrap();
    let pilots = PilotSymbols::qpsk(&spec, 2);
    let mut rx = TfGrid::zeros(spec);
    for ((m, n), x) in spec.pilot_positions().zip(&pilots.values) {
        *rx.at_mut(m, n) = *x;
    }
    let f = extract_pilot_fading(&rx, &pilots).unwrap();
    for n in 0..spec.n {
        for m in 0..spec.m {
            let expected = if spec.is_pilot(m, n) { 1.0 } else { 0.0 };
            assert!((f.at(m, n) - c(expected, 0.0)).norm() < 1e-15);
        }
    }
}

#[test]
fn ls_noise_mse() {
    let spec = GridSpec::full(128, 80, 15e3).unwrap();
    let paths = paths_at(&spec, &[(3.3, 1.1, c(0.5, 0.5))]);
    let pilots = PilotSymbols::qpsk(&spec, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = 0.02;
    let rx = synthesize_tf_grid(&paths, &spec, &pilots, p, &mut rng).unwrap();
    let f = extract_pilot_fading(&rx, &pilots).unwrap();
    let mse: f64 = spec
        .pilot_positions()
        .map(|(m, n)| {
            (f.at(m, n) - crate::channel_model::tf_response(&paths, &spec, m, n)).norm_sqr()
        })
        .sum::<f64>()
        / spec.pilot_count() as f64;
    assert!((mse / p - 1.0).abs() < 0.05, "mse {mse}");
}

#[test]
fn ls_rejects_zero_pilot() {
    let spec = GridSpec::new(8, 4, 15e3, 2, 2).unwrap();
    let mut pilots = PilotSymbols::ones(&spec);
    pilots.values[5] = c(0.0, 0.0);
    let err = extract_pilot_fading(&TfGrid::zeros(spec), &pilots)
        .unwrap_err()
        .to_string();
    assert!(err.contains("m=2, n=2"), "{err}");
}

#[test]
fn coarse_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d_f, d_t) in [(1, 1), (2, 2), (4, 1)] {
        let spec = GridSpec::new(8, 4, 15e3, d_f, d_t).unwrap();
        let mut data = vec![c(0.0, 0.0); spec.len()];
        for (m, n) in spec.pilot_positions() {
            data[n * spec.m + m] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let f = SparseTfFading { spec, data };
        let fast = coarse_dd(&f);
        for (a, b) in fast.data.iter().zip(brute_coarse(&f)) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn coarse_matches_kernel_closed_form() {
    let spec = GridSpec::new(32, 16, 15e3, 2, 2).unwrap();
    let (l, k, h) = (3.37, -1.61, c(0.3, 0.8));
    let g = coarse_of(&spec, &[(l, k, h)]);
    for kk in 0..spec.n {
        for ll in 0..spec.m {
            let expected =
                h * delay_kernel(&spec, l, ll as f64) * doppler_kernel(&spec, k, kk as f64);
            assert!((g.at(kk, ll) - expected).norm() < 1e-12);
        }
    }
}

#[test]
fn on_grid_full_pilot_peak() {
    let spec = GridSpec::full(16, 8, 15e3).unwrap();
    let h = c(0.6, -0.8);
    let g = coarse_of(&spec, &[(3.0, 2.0, h)]);
    let expected = ((spec.m * spec.n) as f64).sqrt() * h.norm();
    for k in 0..spec.n {
        for l in 0..spec.m {
            if (k, l) == (2, 3) {
                assert!((g.at(k, l).norm() - expected).abs() < 1e-12);
            } else {
                assert!(g.at(k, l).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn zero_fading_gives_zero_grid() {
    let spec = GridSpec::new(8, 4, 15e3, 2, 2).unwrap();
    let g = coarse_dd(&SparseTfFading {
        spec,
        data: vec![c(0.0, 0.0); spec.len()],
    });
    assert!(g.data.iter().all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn subsampled_pilots_replicate_peak() {
    let spec = GridSpec::new(16, 8, 15e3, 2, 2).unwrap();
    let g = coarse_of(&spec, &[(3.0, 1.0, c(1.0, 0.0))]);
    let peak = g.at(1, 3).norm();
    assert!(peak > 1.0);
    assert!((g.at(1 + 4, 3).norm() - peak).abs() < 1e-12);
    assert!((g.at(1, 3 + 8).norm() - peak).abs() < 1e-12);
    assert!((g.at(5, 11).norm() - peak).abs() < 1e-12);
    assert!(g.periodicity_error() < 1e-9);
}

#[test]
fn noise_floor_of_white_noise() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let pilots = PilotSymbols::qpsk(&spec, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let p = 0.3;
    let rx = synthesize_tf_grid(&PathSet::default(), &spec, &pilots, p, &mut rng).unwrap();
    let g = coarse_dd(&extract_pilot_fading(&rx, &pilots).unwrap());
    let est = estimate_noise_floor(&g);
    // Each coarse bin sums M·N/(d_f·d_t) pilots scaled by d_f·d_t/√(MN).
    let expected = NoiseFloorEstimate::from_pilot_noise(&spec, p)
        .unwrap()
        .power;
    assert!(
        (est.power / expected - 1.0).abs() < 0.1,
        "{} vs {expected}",
        est.power
    );
    assert_eq!(est.method, NoiseFloorMethod::MedianOfGrid);
}

#[test]
fn noise_floor_far_below_noiseless_peak() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let g = coarse_of(&spec, &[(5.3, 2.4, c(1.0, 0.0))]);
    let floor = estimate_noise_floor(&g).power;
    let peak = g.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    assert!(10.0 * (peak / floor).log10() > 40.0);
}

#[test]
fn known_floor_passes_through() {
    let f = NoiseFloorEstimate::known(0.123).unwrap();
    assert_eq!(f.power, 0.123);
    assert_eq!(f.method, NoiseFloorMethod::Known);
    assert!(NoiseFloorEstimate::known(0.0).is_err());
}

#[test]
fn detects_exactly_the_on_grid_paths() {
    let spec = GridSpec::new(64, 32, 15e3, 2, 2).unwrap();
    let g = coarse_of(
        &spec,
        &[
            (2.0, 1.0, c(1.0, 0.0)),
            (9.0, -3.0, c(0.0, 0.5)),
            (20.0, 6.0, c(-0.3, 0.0)),
        ],
    );
    let floor = estimate_noise_floor(&g);
    let peaks = detect_mpc(&g, &floor, 6.0).unwrap();
    assert_eq!(peaks, vec![(1, 2), (13, 9), (6, 20)]);
}

#[test]
fn false_alarm_count_matches_tail_oracle() {
    let spec = GridSpec::new(64, 64, 15e3, 2, 2).unwrap();
    let pilots = PilotSymbols::qpsk(&spec, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let p = 1.0;
    let floor = NoiseFloorEstimate::from_pilot_noise(&spec, p).unwrap();
    let trials = 100;
    let mut count = 0usize;
    for _ in 0..trials {
        let rx = synthesize_tf_grid(&PathSet::default(), &spec, &pilots, p, &mut rng).unwrap();
        let g = coarse_dd(&extract_pilot_fading(&rx, &pilots).unwrap());
        count += detect_mpc(&g, &floor, 6.0).unwrap().len();
    }
    // A bin fires when it is the largest of its nine i.i.d. exponential
    // neighbours and exceeds t = 10^0.6.
    let t = 10f64.powf(0.6);
    let per_bin = (1.0 - (1.0 - (-t).exp()).powi(9)) / 9.0;
    let expected = (trials * spec.pilot_count()) as f64 * per_bin;
    let sigma = expected.sqrt();
    assert!(
        (count as f64 - expected).abs() < 3.0 * sigma,
        "{count} vs {expected} ± {sigma}"
    );
}

#[test]
fn threshold_is_strict() {
    let spec = GridSpec::full(16, 8, 15e3).unwrap();
    let g = coarse_of(&spec, &[(3.0, 2.0, c(1.0, 0.0))]);
    let peak = g.at(2, 3).norm_sqr();
    let floor = NoiseFloorEstimate::known(peak / 10f64.powf(5.9 / 10.0)).unwrap();
    assert!(detect_mpc(&g, &floor, 6.0).unwrap().is_empty());
    let floor = NoiseFloorEstimate::known(peak / 10f64.powf(6.1 / 10.0)).unwrap();
    assert_eq!(detect_mpc(&g, &floor, 6.0).unwrap(), vec![(2, 3)]);
    assert!(detect_mpc(&g, &floor, 0.0).is_err());
}

#[test]
fn plateau_yields_single_detection() {
    let spec = GridSpec::full(8, 4, 15e3).unwrap();
    let mut g = PeriodicDdGrid::zeros(spec);
    g.data[spec.m + 2] = c(1.0, 0.0);
    g.data[spec.m + 3] = c(0.0, 1.0);
    let floor = NoiseFloorEstimate::known(0.01).unwrap();
    assert_eq!(detect_mpc(&g, &floor, 6.0).unwrap(), vec![(1, 2)]);
}

#[test]
fn refine_on_grid_single_path() {
    let spec = GridSpec::full(64, 32, 15e3).unwrap();
    let h = c(0.7, -0.2);
    let g = coarse_of(&spec, &[(7.0, -3.0, h)]);
    let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
    let r = refine_paths(&g, &peaks).unwrap();
    assert_eq!(r.paths.len(), 1);
    let p = r.paths[0];
    assert!((p.l_hat - 7.0).abs() < 1e-6);
    assert!((p.k_hat + 3.0).abs() < 1e-6);
    assert!((p.h_hat - h).norm() < 1e-6);
    assert!(r.residual.power() < 1e-10 * g.power());
}

#[test]
fn refine_off_grid_single_path() {
    let spec = GridSpec::full(128, 64, 15e3).unwrap();
    let h = c(1.0, 0.0);
    let g = coarse_of(&spec, &[(5.30, 2.00, h)]);
    let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
    let p = refine_paths(&g, &peaks[..1]).unwrap().paths[0];
    assert!((5.2..=5.4).contains(&p.l_hat), "{}", p.l_hat);
    let ratio = p.h_hat.norm() / h.norm();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
}

#[test]
fn refine_two_separated_paths() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let truth = [(4.3, 2.2, c(1.0, 0.3)), (12.6, -5.7, c(-0.2, 0.5))];
    let g = coarse_of(&spec, &truth);
    let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
    let r = refine_paths(&g, &peaks[..2]).unwrap();
    for (l, k, h) in truth {
        let p = r
            .paths
            .iter()
            .min_by(|a, b| {
                ((a.l_hat - l).abs() + (a.k_hat - k).abs())
                    .total_cmp(&((b.l_hat - l).abs() + (b.k_hat - k).abs()))
            })
            .unwrap();
        let err_db = 10.0 * (p.h_hat.norm_sqr() / h.norm_sqr()).log10();
        assert!(err_db.abs() < 1.0, "power error {err_db} dB");
    }
}

#[test]
fn refine_reports_degenerate_peak_and_continues() {
    let spec = GridSpec::full(32, 16, 15e3).unwrap();
    let mut g = coarse_of(&spec, &[(4.0, 2.0, c(1.0, 0.0)), (20.0, -5.0, c(0.5, 0.0))]);
    g.data[2 * spec.m + 4] = c(f64::NAN, 0.0);
    let r = refine_paths(&g, &[(2, 4), (11, 20)]).unwrap();
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].peak_index, (2, 4));
    assert_eq!(r.paths.len(), 1);
    assert!((r.paths[0].l_hat - 20.0).abs() < 1e-6);
}

#[test]
fn refine_rejects_peaks_outside_period() {
    let spec = GridSpec::new(16, 8, 15e3, 2, 2).unwrap();
    let g = PeriodicDdGrid::zeros(spec);
    assert!(refine_paths(&g, &[(0, 8)]).is_err());
}

#[test]
fn reconstruct_trivial_cases() {
    let spec = GridSpec::new(16, 8, 15e3, 2, 2).unwrap();
    assert!(reconstruct_dd(&[], &spec)
        .data
        .iter()
        .all(|v| *v == c(0.0, 0.0)));
    let zero = EstimatedPath {
        l_hat: 2.3,
        k_hat: 0.4,
        h_hat: c(0.0, 0.0),
        peak_index: (0, 2),
        residual_power_db: 0.0,
    };
    assert!(reconstruct_dd(&[zero], &spec)
        .data
        .iter()
        .all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn reconstruct_round_trip_well_separated() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let truth = [
        (3.25, 1.4, c(1.0, 0.0)),
        (11.7, -6.2, c(0.4, -0.3)),
        (30.1, 9.6, c(0.0, 0.6)),
    ];
    let g = coarse_of(&spec, &truth);
    let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
    let r = refine_paths(&g, &peaks[..3]).unwrap();
    let rebuilt = reconstruct_dd(&r.paths, &spec);
    let err = relative_l2(&rebuilt, &g);
    assert!(err < 1e-3, "relative L2 {err}");
    assert!(rebuilt.periodicity_error() < 1e-9);
    let scale = g.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(r.residual.max_periodic_deviation() < 1e-9 * scale);
}

#[test]
fn cancellation_is_monotone() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let g = coarse_of(
        &spec,
        &[
            (3.25, 1.4, c(1.0, 0.0)),
            (11.7, -6.2, c(0.4, -0.3)),
            (30.1, 9.6, c(0.0, 0.6)),
        ],
    );
    let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
    let r = refine_paths(&g, &peaks[..3]).unwrap();
    for w in r.paths.windows(2) {
        assert!(w[1].residual_power_db <= w[0].residual_power_db);
    }
    assert!(r.paths[0].residual_power_db <= 0.0);
}

#[test]
fn on_grid_correction_small_at_30_db() {
    let spec = GridSpec::full(64, 32, 15e3).unwrap();
    let pilots = PilotSymbols::qpsk(&spec, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let h = c(1.0, 0.0);
    // Peak-to-floor ratio M·N·|h|²/p = 30 dB.
    let p = (spec.m * spec.n) as f64 / 1000.0;
    let paths = paths_at(&spec, &[(10.0, 4.0, h)]);
    let trials = 50;
    let (mut dl, mut dk) = (0.0, 0.0);
    for _ in 0..trials {
        let rx = synthesize_tf_grid(&paths, &spec, &pilots, p, &mut rng).unwrap();
        let g = coarse_dd(&extract_pilot_fading(&rx, &pilots).unwrap());
        let r = refine_paths(&g, &[(4, 10)]).unwrap();
        dl += (r.paths[0].l_hat - 10.0).abs();
        dk += (r.paths[0].k_hat - 4.0).abs();
    }
    assert!(
        dl / trials as f64 <= 0.05 && dk / trials as f64 <= 0.05,
        "{dl} {dk}"
    );
}

#[test]
fn off_grid_accuracy_envelope() {
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut worst_l, mut worst_k) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let l = rng.random_range(1.0..60.0);
        let k = rng.random_range(-14.0..14.0);
        let h = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
        let g = coarse_of(&spec, &[(l, k, h)]);
        let peaks = detect_mpc(&g, &estimate_noise_floor(&g), 6.0).unwrap();
        let p = refine_paths(&g, &peaks[..1]).unwrap().paths[0];
        worst_l = worst_l.max((p.l_hat - l).abs());
        worst_k = worst_k.max((p.k_hat - k).abs());
    }
    assert!(
        worst_l <= 0.15 && worst_k <= 0.15,
        "worst {worst_l} {worst_k}"
    );
}

#[test]
fn ratio_interpolator_is_large_period_limit() {
    // Both rules agree to the O((π/L)²) bias of the ratio form.
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    let g = coarse_of(&spec, &[(10.27, 3.61, c(1.0, 0.0))]);
    let exact = refine_paths_with(
        &g,
        &[(4, 10)],
        &RefineOptions {
            sweeps: 0,
            ..Default::default()
        },
    )
    .unwrap()
    .paths[0];
    let ratio = refine_paths_with(&g, &[(4, 10)], &RefineOptions::single_pass())
        .unwrap()
        .paths[0];
    assert!((exact.l_hat - 10.27).abs() < 1e-9);
    assert!((exact.k_hat - 3.61).abs() < 1e-9);
    assert!((ratio.l_hat - 10.27).abs() < 2e-3);
    assert!((ratio.k_hat - 3.61).abs() < 5e-3);
    assert!((exact.l_hat - ratio.l_hat).abs() > 0.0);
}

#[test]
fn weak_paths_converge_for_any_phase() {
    // A dominant path 30 dB above two close weak ones: interpolation alone
    // stalls for some phase combinations.
    let spec = GridSpec::new(128, 64, 15e3, 2, 2).unwrap();
    for step in 0..8 {
        let phase = |i: usize| Complex64::from_polar(1.0, 0.7 * (step * i) as f64);
        let items = [
            (0.0, 0.6422, phase(1)),
            (1.7816, 0.1662, phase(2) * 0.0366),
            (4.107, -0.0923, phase(3) * 0.0166),
        ];
        let g = coarse_of(&spec, &items);
        let r = refine_paths(&g, &[(1, 0), (0, 2), (0, 4)]).unwrap();
        let rel = relative_l2(&r.estimate, &g);
        assert!(rel < 1e-6, "phase step {step}: relative residual {rel:e}");
    }
}
