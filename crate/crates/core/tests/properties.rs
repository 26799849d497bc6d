//! Property tests for the analytic layers: algebraic identities, bounds and
//! round-trip inversions over randomized inputs.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvteleport::gaussian::{coherent_overlap_fidelity, QuadraturePair};
use cvteleport::interaction::{
    apply_detection_efficiency, coupling_ratios, mode_envelopes, readout_coefficients,
    readout_moments, reconstruct_state, InteractionCoefficients, PhysicalParams,
};
use cvteleport::numerics::adaptive_simpson;
use cvteleport::teleport::{
    average_fidelity, classical_benchmark, teleport_coefficients, teleported_moments,
    FeedbackSplit,
};

fn random_params(rng: &mut ChaCha8Rng) -> PhysicalParams {
    let gamma_s: f64 = rng.random_range(10.0..200.0);
    let gamma_extra: f64 = rng.random_range(0.0..80.0);
    let z: f64 = rng.random_range(1.1..6.0);
    let t: f64 = rng.random_range(5e-4..8e-3);
    PhysicalParams::new(gamma_s, gamma_extra, z, t).unwrap()
}

#[test]
fn coupling_ratio_identity_over_thousand_z() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let z: f64 = rng.random_range(1.0f64..100.0).max(1.0 + 1e-9);
        let r = coupling_ratios(z).unwrap();
        assert_relative_eq!(r.mu * r.mu - r.nu * r.nu, 1.0, max_relative = 1e-10);
    }
}

#[test]
fn noise_coefficient_identity_over_random_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let c = readout_coefficients(&p).unwrap();
        assert!(
            c.noise_identity_deviation(&p) < 1e-10,
            "deviation {} for {:?}",
            c.noise_identity_deviation(&p),
            p
        );
    }
}

#[test]
fn kappa_is_monotone_in_duration_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let base = random_params(&mut rng);
        let bound = base.z * (base.gamma_s / (2.0 * base.gamma())).sqrt();
        let mut last = 0.0;
        for i in 1..=20 {
            let t = i as f64 * 1e-3;
            let k = readout_coefficients(&base.with_pulse_duration(t).unwrap()).unwrap().kappa;
            assert!(k > last, "kappa not increasing at T = {t}");
            assert!(k < bound + 1e-12, "kappa {k} above bound {bound}");
            last = k;
        }
    }
}

#[test]
fn envelope_normalizations_quadrature_vs_closed_form_hundred_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let (f_y, f_q, f_n) = mode_envelopes(&p).unwrap();
        assert!(f_y.normalization_deviation() < 1e-9);
        assert!(f_q.normalization_deviation() < 1e-9);
        assert!(f_n.normalization_deviation() < 1e-9);
    }
}

#[test]
fn barred_normalizations_quadrature_vs_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..40 {
        let p = random_params(&mut rng);
        let split = FeedbackSplit::new(&p);
        let g: f64 = rng.random_range(0.0..2.0);
        assert!(split.normalization_deviation(g) < 1e-9);
    }
}

#[test]
fn teleported_variances_are_phase_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let g: f64 = rng.random_range(-1.0..2.5);
        let s = teleported_moments(QuadraturePair::new(1.0, -2.0), &p, g);
        assert_eq!(s.var_x, s.var_p);
        assert!(s.var_x >= 0.0);
    }
}

#[test]
fn fidelity_non_increasing_in_alphabet_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let g: f64 = rng.random_range(0.0..2.0);
        let transfer = teleport_coefficients(&p, g).c_a;
        if (transfer - 1.0).abs() < 1e-6 {
            continue;
        }
        let mut prev = average_fidelity(&p, g, 0.0).unwrap();
        for i in 1..=8 {
            let f = average_fidelity(&p, g, i as f64 * 1.25).unwrap();
            assert!(f <= prev + 1e-15);
            prev = f;
        }
    }
}

#[test]
fn classical_benchmark_limits() {
    assert_eq!(classical_benchmark(0.0).unwrap(), 1.0);
    let mut prev = 1.0;
    for i in 1..=60 {
        let f = classical_benchmark(i as f64).unwrap();
        assert!(f < prev);
        prev = f;
    }
    assert!((classical_benchmark(1e12).unwrap() - 0.5).abs() < 1e-10);
}

/// Independent oracle: the overlap of a coherent state with a Gaussian state
/// as the phase-space integral `2π ∫∫ W₁ W₂ dx dp`.
fn overlap_by_integration(t: QuadraturePair, m: QuadraturePair, vx: f64, vp: f64) -> f64 {
    let w1 = move |x: f64, p: f64| {
        (1.0 / std::f64::consts::PI) * (-(x - t.x).powi(2) - (p - t.p).powi(2)).exp()
    };
    let w2 = move |x: f64, p: f64| {
        1.0 / (2.0 * std::f64::consts::PI * (vx * vp).sqrt())
            * (-(x - m.x).powi(2) / (2.0 * vx) - (p - m.p).powi(2) / (2.0 * vp)).exp()
    };
    let spread = vx.max(vp).max(0.5).sqrt();
    let cx = 0.5 * (t.x + m.x);
    let cp = 0.5 * (t.p + m.p);
    let half_w = 0.5 * ((t.x - m.x).abs().max((t.p - m.p).abs())) + 9.0 * spread;
    let inner = |x: f64| {
        adaptive_simpson(|p| w1(x, p) * w2(x, p), cp - half_w, cp + half_w, 1e-11)
    };
    2.0 * std::f64::consts::PI * adaptive_simpson(inner, cx - half_w, cx + half_w, 1e-11)
}

#[test]
fn overlap_matches_numerical_integration_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for _ in 0..20 {
        let t = QuadraturePair::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let m = QuadraturePair::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let closed = coherent_overlap_fidelity(t, m, 0.5, 0.5).unwrap();
        // vacuum-variance case reduces to the pure exponential
        let expo = (-((t.x - m.x).powi(2) + (t.p - m.p).powi(2)) / 2.0).exp();
        assert_relative_eq!(closed, expo, max_relative = 1e-12);
        let integrated = overlap_by_integration(t, m, 0.5, 0.5);
        assert_relative_eq!(closed, integrated, max_relative = 1e-8);
    }
    // and a few non-vacuum output variances
    for _ in 0..6 {
        let t = QuadraturePair::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let m = QuadraturePair::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let vx = rng.random_range(0.3..3.0);
        let vp = rng.random_range(0.3..3.0);
        let closed = coherent_overlap_fidelity(t, m, vx, vp).unwrap();
        let integrated = overlap_by_integration(t, m, vx, vp);
        assert_relative_eq!(closed, integrated, max_relative = 1e-8);
    }
}

proptest! {
    #[test]
    fn overlap_fidelity_stays_in_unit_interval(
        tx in -50.0f64..50.0, tp in -50.0f64..50.0,
        mx in -50.0f64..50.0, mp in -50.0f64..50.0,
        vx in 1e-3f64..100.0, vp in 1e-3f64..100.0,
    ) {
        let f = coherent_overlap_fidelity(
            QuadraturePair::new(tx, tp),
            QuadraturePair::new(mx, mp),
            vx,
            vp,
        ).unwrap();
        prop_assert!((0.0..=1.0).contains(&f), "f = {f}");
    }

    #[test]
    fn reconstruction_inverts_readout(
        kappa in 0.05f64..3.0,
        c_y in 0.0f64..2.0,
        c_q in 0.0f64..2.0,
        c_n in 0.0f64..1.0,
        mean_x in -20.0f64..20.0,
        mean_p in -20.0f64..20.0,
        var_x in 0.05f64..5.0,
        var_p in 0.05f64..5.0,
        eta in 0.05f64..1.0,
        m in 1.0f64..2.0,
    ) {
        let coeffs = InteractionCoefficients { kappa, c_y, c_q, c_n };
        let atom_mean = QuadraturePair::new(mean_x, mean_p);
        let lm = readout_moments(atom_mean, (var_x, var_p), &coeffs, m).unwrap();
        let measured = apply_detection_efficiency(&lm, eta).unwrap();
        let (got_mean, got_var) = reconstruct_state(&measured, &coeffs, m, eta).unwrap();
        prop_assert!((got_mean.x - mean_x).abs() < 1e-9 * (1.0 + mean_x.abs()));
        prop_assert!((got_mean.p - mean_p).abs() < 1e-9 * (1.0 + mean_p.abs()));
        prop_assert!((got_var.0 - var_x).abs() < 1e-9 * (1.0 + var_x));
        prop_assert!((got_var.1 - var_p).abs() < 1e-9 * (1.0 + var_p));
    }

    #[test]
    fn coupling_ratio_identity(z in 1.000001f64..100.0) {
        let r = coupling_ratios(z).unwrap();
        prop_assert!((r.mu * r.mu - r.nu * r.nu - 1.0).abs() < 1e-10);
        prop_assert!(r.mu > r.nu && r.nu > 0.0);
    }
}
