//! Cross-module consistency: the Monte Carlo sampler against the closed
//! forms, the fidelity formula against direct alphabet integration, and the
//! shaped-pulse cascade against the time-sliced oracle.

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvteleport::gaussian::QuadraturePair;
use cvteleport::interaction::PhysicalParams;
use cvteleport::montecarlo::{
    run_teleportation, run_verification_batch, variance_vs_gain, RunStatistics,
};
use cvteleport::qnd::{sliced_cascade, PulseShape, QndCascade};
use cvteleport::teleport::{
    average_fidelity_from_moments, average_fidelity_quadrature, optimize_gain,
    teleport_coefficients, teleported_moments,
};

fn random_params(rng: &mut ChaCha8Rng) -> PhysicalParams {
    let gamma_s: f64 = rng.random_range(30.0..150.0);
    let gamma_extra: f64 = rng.random_range(0.0..60.0);
    let z: f64 = rng.random_range(1.3..4.0);
    let t: f64 = rng.random_range(1e-3..5e-3);
    PhysicalParams::new(gamma_s, gamma_extra, z, t).unwrap()
}

#[test]
fn monte_carlo_matches_analytic_variance_for_random_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let n = 60_000;
    for i in 0..10 {
        let p = random_params(&mut rng);
        let g: f64 = rng.random_range(0.0..1.5);
        let analytic = teleported_moments(QuadraturePair::ORIGIN, &p, g).var_x;
        let (_, stats) = run_teleportation(&p, g, QuadraturePair::ORIGIN, n, 1000 + i).unwrap();
        let se = analytic * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (stats.var_x - analytic).abs() < 3.0 * se,
            "case {i}: sampled {} vs analytic {analytic} (se {se})",
            stats.var_x
        );
        assert!((stats.var_p - analytic).abs() < 3.0 * se);
    }
}

#[test]
fn closed_form_fidelity_matches_alphabet_integration_on_random_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..20 {
        let p = random_params(&mut rng);
        let g: f64 = rng.random_range(0.0..1.6);
        let nbar: f64 = rng.random_range(0.0..10.0);
        let s = teleported_moments(QuadraturePair::ORIGIN, &p, g);
        let closed = average_fidelity_from_moments(s.var_x, s.var_p, s.transfer, nbar).unwrap();
        let integrated = average_fidelity_quadrature(s.var_x, s.var_p, s.transfer, nbar).unwrap();
        assert!(
            (closed - integrated).abs() < 1e-6,
            "tuple {i}: closed {closed} vs integrated {integrated}"
        );
    }
}

#[test]
fn verified_means_are_linear_in_the_input_with_slope_c_a() {
    let p = PhysicalParams::experimental_teleport();
    let g = 0.8;
    let c_a = teleport_coefficients(&p, g).c_a;
    let displacements = [0.0, 2.5, 5.0, 7.5, 10.0];
    let n = 20_000;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ses = Vec::new();
    for (i, &d) in displacements.iter().enumerate() {
        let (records, stats) =
            run_teleportation(&p, g, QuadraturePair::new(d, 0.0), n, 500 + i as u64).unwrap();
        let vx: f64 = records.iter().map(|r| r.verified.x).sum::<f64>() / n as f64;
        let var: f64 = records
            .iter()
            .map(|r| (r.verified.x - vx).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        xs.push(d);
        ys.push(vx);
        ses.push((var / n as f64).sqrt());
        let _ = stats;
    }
    // least-squares slope and its standard error
    let nx = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nx;
    let my = ys.iter().sum::<f64>() / nx;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let se_point = ses.iter().sum::<f64>() / nx;
    let se_slope = se_point / sxx.sqrt();
    assert!(
        (slope - c_a).abs() < 3.0 * se_slope,
        "slope {slope} vs c_A {c_a} (se {se_slope})"
    );
}

#[test]
fn sampled_marginals_pass_kurtosis_check() {
    let p = PhysicalParams::experimental_teleport();
    let n = 100_000;
    let (records, stats) = run_teleportation(&p, 0.7, QuadraturePair::new(3.0, -1.0), n, 77).unwrap();
    for pick in [|r: &cvteleport::RunRecord| r.teleported.x, |r: &cvteleport::RunRecord| r.teleported.p] {
        let vals: Vec<f64> = records.iter().map(pick).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let kurtosis = m4 / (m2 * m2);
        let se = (24.0 / n as f64).sqrt();
        assert!((kurtosis - 3.0).abs() < 3.0 * se, "kurtosis {kurtosis}");
    }
    let _ = stats;
}

#[test]
fn sampled_gain_scan_minimum_matches_analytic_argmin() {
    let p = PhysicalParams::experimental_teleport();
    let gains: Vec<f64> = (0..=8).map(|i| 0.1 + i as f64 * 0.1).collect();
    let scan = variance_vs_gain(&p, &gains, &[QuadraturePair::ORIGIN], 100_000, 3).unwrap();
    let analytic = variance_vs_gain(&p, &gains, &[QuadraturePair::ORIGIN], 0, 0).unwrap();
    assert!(
        (scan.fit.argmin - analytic.fit.argmin).abs() < 0.02,
        "sampled argmin {} vs analytic {}",
        scan.fit.argmin,
        analytic.fit.argmin
    );
}

#[test]
fn variance_shows_no_displacement_dependence() {
    let p = PhysicalParams::experimental_teleport();
    let inputs = [
        QuadraturePair::ORIGIN,
        QuadraturePair::new(5.0, 0.0),
        QuadraturePair::new(5.0 * 0.5f64.sqrt(), 5.0 * 0.5f64.sqrt()),
        QuadraturePair::new(0.0, 5.0),
        QuadraturePair::new(25.0, 0.0),
    ];
    let gains = [0.2, 0.6, 1.0];
    let scan = variance_vs_gain(&p, &gains, &inputs, 40_000, 8).unwrap();
    for (gi, row) in scan.stats.iter().enumerate() {
        let pools: Vec<f64> = row.iter().map(|s| 0.5 * (s.var_x + s.var_p)).collect();
        let mean = pools.iter().sum::<f64>() / pools.len() as f64;
        for (ii, pool) in pools.iter().enumerate() {
            let se = row[ii].stderr_var / 2.0f64.sqrt();
            assert!(
                (pool - mean).abs() < 3.0 * se,
                "gain {gi} input {ii}: {pool} vs {mean} (se {se})"
            );
        }
    }
}

#[test]
fn vacuum_verification_recovers_css_variance() {
    // variance of reconstructed single-shot outcomes, inverted back through
    // the readout model, reproduces the ideal 1/2
    let p = PhysicalParams::experimental_readout();
    let n = 100_000;
    let shots = run_verification_batch(&p, QuadraturePair::ORIGIN, (0.5, 0.5), n, 12).unwrap();
    let stats = RunStatistics::from_samples(
        &shots.iter().map(|s| s.x).collect::<Vec<_>>(),
        &shots.iter().map(|s| s.p).collect::<Vec<_>>(),
    )
    .unwrap();
    // the raw single-shot spread includes readout noise; strip it with the
    // reconstruction formula applied to measured-outcome variances
    let coeffs = cvteleport::readout_coefficients(&p).unwrap();
    let k2 = coeffs.kappa * coeffs.kappa;
    let eta = p.eta_b;
    let strip = |v: f64| {
        let meas = v * eta * k2; // undo the mean inversion scaling
        ((meas - 0.5 * (1.0 - eta)) / eta - coeffs.light_noise_variance(p.noise_multiplier)) / k2
    };
    let var_x = strip(stats.var_x);
    let var_p = strip(stats.var_p);
    assert_abs_diff_eq!(var_x, 0.5, epsilon = 0.015);
    assert_abs_diff_eq!(var_p, 0.5, epsilon = 0.015);
}

#[test]
fn qnd_cascade_matches_sliced_oracle_at_ten_thousand_steps() {
    let coupling = 1.3797;
    for (shape, g) in [
        (PulseShape::FLAT, 0.8),
        (PulseShape { exponent_b: -1.19, exponent_a: 0.296 }, 0.47),
        (PulseShape { exponent_b: 2.0, exponent_a: -0.5 }, 0.3),
    ] {
        let cascade = QndCascade::new(coupling, shape).unwrap();
        let analytic = cascade.coefficients(g);
        let sliced = sliced_cascade(coupling, shape, g, 10_000).unwrap();
        assert_abs_diff_eq!(analytic.c_b, sliced.c_b, epsilon = 2e-4);
        assert_abs_diff_eq!(analytic.c_a, sliced.c_a, epsilon = 2e-4);
        assert_abs_diff_eq!(analytic.c_q, sliced.c_q, epsilon = 2e-3);
        assert_abs_diff_eq!(analytic.variance(), sliced.variance(), epsilon = 5e-4);
    }
}

#[test]
fn optimal_gain_is_deterministic_and_bracket_independent() {
    let p = PhysicalParams::experimental_teleport();
    let (g1, f1) = optimize_gain(&p, 3.0).unwrap();
    let (g2, f2) = optimize_gain(&p, 3.0).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(f1, f2);
}

#[test]
fn general_formulas_converge_to_qnd_cascade() {
    // two independent derivations meet in the limit of large coupling
    // asymmetry at fixed coupling budget; deviations shrink as 1/Z^2
    let k = 1.3797;
    let t = 3e-3;
    let cascade = QndCascade::new(k, PulseShape::FLAT).unwrap();
    let mut prev_worst = f64::INFINITY;
    for z in [10.0, 50.0, 200.0] {
        let gamma_s = k / (t * z * z);
        let p = PhysicalParams::new(gamma_s, 0.0, z, t).unwrap();
        let mut worst = 0.0f64;
        for g in [0.0, 0.3, 0.7, 1.0] {
            let general = teleported_moments(QuadraturePair::ORIGIN, &p, g).var_x;
            worst = worst.max((general - cascade.variance(g)).abs());
        }
        assert!(worst < prev_worst, "not converging at Z = {z}");
        prev_worst = worst;
    }
    assert!(prev_worst < 1e-4, "Z = 200 deviation {prev_worst}");
}

#[test]
fn fidelity_ordering_across_regimes() {
    // removing decoherence can only help, and shaped QND pulses at the same
    // coupling budget sit on top
    let lossy = PhysicalParams::experimental_teleport();
    let lossless = PhysicalParams::new(73.0, 0.0, 6.3f64.sqrt(), 3e-3).unwrap();
    for n in [0.0, 1.0, 2.0, 5.0, 7.0, 10.0] {
        let (_, f_lossy) = optimize_gain(&lossy, n).unwrap();
        let (_, f_lossless) = optimize_gain(&lossless, n).unwrap();
        let qnd = cvteleport::teleport::optimize_qnd_pulses(6.3f64.sqrt(), 73.0 * 3e-3, n).unwrap();
        assert!(
            f_lossy < f_lossless && f_lossless < qnd.fidelity,
            "nbar {n}: {f_lossy} / {f_lossless} / {}",
            qnd.fidelity
        );
    }
}

#[test]
fn records_are_identical_for_any_worker_count() {
    let p = PhysicalParams::experimental_teleport();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_teleportation(&p, 0.8, QuadraturePair::new(5.0, 0.0), 10_000, 99))
            .unwrap()
    };
    let (r1, s1) = run(1);
    let (r4, s4) = run(4);
    assert_eq!(r1, r4);
    assert_eq!(s1, s4);
}
