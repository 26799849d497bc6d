//! Single-pass atom–light interaction model.
//!
//! A drive pulse of duration `T` maps the collective spin quadratures of one
//! ensemble onto exponentially weighted sine/cosine light modes. Everything
//! here lives in the rotating frame at the Larmor frequency; the fast
//! `cos Ωt / sin Ωt` modulation is never simulated explicitly, its effect is
//! already folded into the mode normalizations (valid up to `O((ΩT)⁻¹)`).
//!
//! The readout relation for the measured modes is
//!
//! ```text
//! y_c = κ·p + c_y·Y_c + c_q·(−Q_s) + c_N·F_p
//! y_s = κ·x + c_y·Y_s + c_q·( Q_c) + c_N·F_x
//! ```
//!
//! with all light inputs vacuum (variance 1/2) and the decoherence noise
//! modes at variance m/2. The coefficients follow from the temporal mode
//! functions `f_y`, `f_q`, `f_N` built below.

use serde::Serialize;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::gaussian::QuadraturePair;
use crate::numerics::{ExpPolyMode, ExpTerm};

/// Interaction parameter set for one ensemble and one drive pulse.
///
/// `gamma_s` is the collective-coupling part of the transverse spin decay and
/// `gamma_extra` the decoherence part; the total decay rate is always derived
/// as `gamma() = gamma_s + gamma_extra` and never stored separately. `z` is
/// the coupling asymmetry (`z > 1` means the beamsplitter part dominates the
/// two-mode-squeezing part).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Collective-coupling decay rate, 1/s.
    pub gamma_s: f64,
    /// Decoherence contribution to the decay rate, 1/s.
    pub gamma_extra: f64,
    /// Coupling asymmetry, dimensionless, > 1.
    pub z: f64,
    /// Drive pulse duration, s.
    pub pulse_duration: f64,
    /// Decoherence-noise variance multiplier (noise mode variance is m/2).
    pub noise_multiplier: f64,
    /// Detection efficiency for readout of ensemble A.
    pub eta_a: f64,
    /// Detection efficiency for readout of ensemble B.
    pub eta_b: f64,
    /// Larmor frequency, rad/s. Metadata: only used to check that the
    /// rotating-frame approximation holds.
    pub omega_larmor: f64,
}

/// Measured defaults: total decay 99.3 1/s of which 26.3 1/s is decoherence,
/// Z² = 6.3, noise multiplier 1.3, detection efficiencies 0.89 / 0.80 and a
/// 322 kHz Larmor frequency.
pub const DEFAULT_GAMMA_TOTAL: f64 = 99.3;
pub const DEFAULT_GAMMA_EXTRA: f64 = 26.3;
pub const DEFAULT_Z_SQUARED: f64 = 6.3;
pub const DEFAULT_NOISE_MULTIPLIER: f64 = 1.3;
pub const DEFAULT_ETA_A: f64 = 0.89;
pub const DEFAULT_ETA_B: f64 = 0.80;
pub const DEFAULT_OMEGA_LARMOR: f64 = 2.0 * std::f64::consts::PI * 322e3;
/// Default teleportation drive pulse duration, s.
pub const DEFAULT_TELEPORT_PULSE: f64 = 3e-3;
/// Default verification/readout pulse duration, s.
pub const DEFAULT_READOUT_PULSE: f64 = 2e-3;

impl PhysicalParams {
    /// Build from the collective and decoherence rates.
    pub fn new(gamma_s: f64, gamma_extra: f64, z: f64, pulse_duration: f64) -> Result<Self> {
        let params = Self {
            gamma_s,
            gamma_extra,
            z,
            pulse_duration,
            noise_multiplier: DEFAULT_NOISE_MULTIPLIER,
            eta_a: DEFAULT_ETA_A,
            eta_b: DEFAULT_ETA_B,
            omega_larmor: DEFAULT_OMEGA_LARMOR,
        };
        params.validate()?;
        Ok(params)
    }

    /// Build from the total decay rate instead of the collective part;
    /// `gamma_s` is recovered as `gamma - gamma_extra`.
    pub fn from_total_decay(gamma: f64, gamma_extra: f64, z: f64, pulse_duration: f64) -> Result<Self> {
        Self::new(gamma - gamma_extra, gamma_extra, z, pulse_duration)
    }

    /// The measured parameter set with the teleportation drive pulse (3 ms).
    pub fn experimental_teleport() -> Self {
        Self::from_total_decay(
            DEFAULT_GAMMA_TOTAL,
            DEFAULT_GAMMA_EXTRA,
            DEFAULT_Z_SQUARED.sqrt(),
            DEFAULT_TELEPORT_PULSE,
        )
        .expect("default parameters are valid")
    }

    /// The measured parameter set with the readout pulse (2 ms).
    pub fn experimental_readout() -> Self {
        Self::experimental_teleport()
            .with_pulse_duration(DEFAULT_READOUT_PULSE)
            .expect("default parameters are valid")
    }

    /// Same rates, different pulse duration.
    pub fn with_pulse_duration(&self, pulse_duration: f64) -> Result<Self> {
        let mut p = self.clone();
        p.pulse_duration = pulse_duration;
        p.validate()?;
        Ok(p)
    }

    /// Total transverse decay rate `gamma_s + gamma_extra`, 1/s.
    pub fn gamma(&self) -> f64 {
        self.gamma_s + self.gamma_extra
    }

    /// Whether the rotating-frame treatment is trustworthy (`ΩT ≥ 100`).
    pub fn rotating_frame_valid(&self) -> bool {
        self.omega_larmor * self.pulse_duration >= 100.0
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("gamma_s", self.gamma_s)?;
        ensure_non_negative("gamma_extra", self.gamma_extra)?;
        ensure_non_negative("pulse_duration", self.pulse_duration)?;
        if !self.z.is_finite() || self.z <= 1.0 {
            return Err(Error::OutOfRange { name: "z", value: self.z, range: "(1, inf)" });
        }
        if !self.noise_multiplier.is_finite() || self.noise_multiplier < 1.0 {
            return Err(Error::OutOfRange {
                name: "noise_multiplier",
                value: self.noise_multiplier,
                range: "[1, inf)",
            });
        }
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::OutOfRange { name, value: eta, range: "[0, 1]" });
            }
        }
        if !self.rotating_frame_valid() {
            log::warn!(
                "omega_larmor * T = {:.1} < 100: outside the rotating-frame regime",
                self.omega_larmor * self.pulse_duration
            );
        }
        Ok(())
    }
}

/// Beamsplitter/two-mode-squeezing weights `mu = (Z + 1/Z)/2`,
/// `nu = (Z − 1/Z)/2`; they satisfy `mu² − nu² = 1` identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingRatios {
    pub mu: f64,
    pub nu: f64,
}

impl CouplingRatios {
    /// `mu / nu = (Z² + 1)/(Z² − 1)`.
    pub fn ratio(&self) -> f64 {
        self.mu / self.nu
    }
}

pub fn coupling_ratios(z: f64) -> Result<CouplingRatios> {
    ensure_positive("z", z)?;
    Ok(CouplingRatios { mu: 0.5 * (z + 1.0 / z), nu: 0.5 * (z - 1.0 / z) })
}

/// Coefficients of the single-pass readout relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionCoefficients {
    /// Atomic signal weight.
    pub kappa: f64,
    /// Input light y-quadrature weight.
    pub c_y: f64,
    /// Back-action (q-quadrature) weight.
    pub c_q: f64,
    /// Decoherence noise weight.
    pub c_n: f64,
}

impl InteractionCoefficients {
    /// Light plus decoherence noise added to each measured mode.
    pub fn light_noise_variance(&self, m: f64) -> f64 {
        0.5 * self.c_y * self.c_y + 0.5 * self.c_q * self.c_q + 0.5 * m * self.c_n * self.c_n
    }

    /// Relative deviation from the closed-form identity
    /// `c_N/c_q = sqrt(2·gamma_extra/gamma_s)/Z`.
    pub fn noise_identity_deviation(&self, params: &PhysicalParams) -> f64 {
        if self.c_q == 0.0 {
            return 0.0;
        }
        let expected = self.c_q * (2.0 * params.gamma_extra / params.gamma_s).sqrt() / params.z;
        if expected == 0.0 {
            self.c_n.abs()
        } else {
            (self.c_n - expected).abs() / expected
        }
    }
}

/// Which of the three temporal mode functions an envelope is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeKind {
    /// Light y-quadrature mode, normalization `N_y = ½∫f_y²`.
    LightY,
    /// Back-action mode, normalization `N_q = ½∫f_q²`.
    LightQ,
    /// Decoherence noise mode, normalization `N_N = ∫f_N²`.
    Noise,
}

impl EnvelopeKind {
    fn weight(self) -> f64 {
        match self {
            EnvelopeKind::LightY | EnvelopeKind::LightQ => 0.5,
            EnvelopeKind::Noise => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnvelopeKind::LightY => "f_y",
            EnvelopeKind::LightQ => "f_q",
            EnvelopeKind::Noise => "f_N",
        }
    }
}

/// A slowly varying temporal envelope on `[0, T]` together with its
/// normalization integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnvelope {
    pub kind: EnvelopeKind,
    mode: ExpPolyMode,
    duration: f64,
    normalization: f64,
}

impl ModeEnvelope {
    pub(crate) fn from_mode(kind: EnvelopeKind, mode: ExpPolyMode, duration: f64) -> Self {
        let normalization = kind.weight() * mode.square_integral(duration);
        Self { kind, mode, duration, normalization }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.mode.eval(t)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// The defining integral (`½∫f²` for light modes, `∫f²` for the noise
    /// mode), computed analytically at construction.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Recompute the normalization by adaptive quadrature and return the
    /// relative deviation from the stored closed form.
    pub fn normalization_deviation(&self) -> f64 {
        let quad = self.kind.weight() * self.mode.square_integral_quadrature(self.duration);
        if self.normalization == 0.0 {
            quad.abs()
        } else {
            (quad - self.normalization).abs() / self.normalization.abs()
        }
    }

}

/// Scale factors shared by the three envelopes.
struct EnvelopeScales {
    gamma: f64,
    decaying: f64, // e^{-2 gamma T}
    inv_sqrt_d: f64,
}

fn envelope_scales(params: &PhysicalParams) -> EnvelopeScales {
    let gamma = params.gamma();
    let t = params.pulse_duration;
    let d = -(-2.0 * gamma * t).exp_m1(); // 1 - e^{-2 gamma T}, cancellation-free
    EnvelopeScales { gamma, decaying: (-2.0 * gamma * t).exp(), inv_sqrt_d: 1.0 / d.sqrt() }
}

/// The three temporal mode functions `(f_y, f_q, f_N)` of a pulse.
///
/// `f_y` carries the surviving input-light quadrature, `f_q` the back-action
/// of the atoms onto the light and `f_N` the decoherence influx; `f_q` and
/// `f_N` share the same shape `e^{−γt} − e^{−2γT} e^{γt}`, which vanishes at
/// `t = T`.
pub fn mode_envelopes(params: &PhysicalParams) -> Result<(ModeEnvelope, ModeEnvelope, ModeEnvelope)> {
    let t = params.pulse_duration;
    if t <= 0.0 {
        return Err(Error::ZeroLengthMode);
    }
    let s = envelope_scales(params);
    let (gamma, gamma_s) = (s.gamma, params.gamma_s);
    let sqrt_gamma = gamma.sqrt();

    let f_y = ExpPolyMode::new(vec![
        ExpTerm {
            coef: (2.0 * sqrt_gamma - gamma_s / sqrt_gamma) * s.inv_sqrt_d,
            rate: -gamma,
            tpow: 0,
        },
        ExpTerm {
            coef: gamma_s / sqrt_gamma * s.decaying * s.inv_sqrt_d,
            rate: gamma,
            tpow: 0,
        },
    ]);
    let shape = |prefactor: f64| {
        ExpPolyMode::new(vec![
            ExpTerm { coef: prefactor * s.inv_sqrt_d, rate: -gamma, tpow: 0 },
            ExpTerm { coef: -prefactor * s.decaying * s.inv_sqrt_d, rate: gamma, tpow: 0 },
        ])
    };
    let f_q = shape(params.z * params.z * gamma_s / sqrt_gamma);
    let f_n = if params.gamma_extra == 0.0 {
        ExpPolyMode::zero()
    } else {
        shape(params.z * (gamma_s * params.gamma_extra).sqrt() / sqrt_gamma)
    };

    Ok((
        ModeEnvelope::from_mode(EnvelopeKind::LightY, f_y, t),
        ModeEnvelope::from_mode(EnvelopeKind::LightQ, f_q, t),
        ModeEnvelope::from_mode(EnvelopeKind::Noise, f_n, t),
    ))
}

/// Atomic-signal weight `κ = Z√(γ_s/2γ)·√(1−e^{−2γT})` of a pulse.
pub fn kappa(params: &PhysicalParams) -> f64 {
    let gamma = params.gamma();
    let d = -(-2.0 * gamma * params.pulse_duration).exp_m1();
    params.z * (params.gamma_s / (2.0 * gamma)).sqrt() * d.sqrt()
}

/// Readout coefficients of a pulse: the closed-form `κ` and the square roots
/// of the envelope normalizations.
///
/// `T = 0` has a well-defined no-interaction limit `(0, 1, 0, 0)` (the output
/// mode is the input vacuum mode) and is returned directly, while the mode
/// envelopes themselves are undefined there.
pub fn readout_coefficients(params: &PhysicalParams) -> Result<InteractionCoefficients> {
    if params.pulse_duration == 0.0 {
        return Ok(InteractionCoefficients { kappa: 0.0, c_y: 1.0, c_q: 0.0, c_n: 0.0 });
    }
    let (f_y, f_q, f_n) = mode_envelopes(params)?;
    Ok(InteractionCoefficients {
        kappa: kappa(params),
        c_y: f_y.normalization().sqrt(),
        c_q: f_q.normalization().sqrt(),
        c_n: f_n.normalization().sqrt(),
    })
}

/// Readout coefficients in the quantum non-demolition limit (`Z → ∞` at fixed
/// `γTZ²`, no decay): `κ = Z√(γT)`, `c_y = 1`, `c_q = κ²/√3`, `c_N = 0`.
pub fn qnd_coefficients(z: f64, gamma_t: f64) -> Result<InteractionCoefficients> {
    ensure_positive("z", z)?;
    ensure_non_negative("gamma_t", gamma_t)?;
    let kappa = z * gamma_t.sqrt();
    Ok(InteractionCoefficients { kappa, c_y: 1.0, c_q: kappa * kappa / 3.0f64.sqrt(), c_n: 0.0 })
}

/// First and second moments of the measured cosine/sine readout modes.
///
/// The cosine mode carries the atomic p-quadrature and the sine mode the
/// x-quadrature, so `var_c` pairs with `Var(p)` and `var_s` with `Var(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LightMoments {
    pub mean_c: f64,
    pub mean_s: f64,
    pub var_c: f64,
    pub var_s: f64,
}

/// Moments of the readout modes for an atomic state with the given mean and
/// variances, with all light inputs in vacuum and the noise mode at variance
/// m/2. Input modes are independent, so the variances add.
pub fn readout_moments(
    atom_mean: QuadraturePair,
    atom_var: (f64, f64),
    coeffs: &InteractionCoefficients,
    m: f64,
) -> Result<LightMoments> {
    let (var_x, var_p) = atom_var;
    ensure_positive("atom_var.x", var_x)?;
    ensure_positive("atom_var.p", var_p)?;
    let added = coeffs.light_noise_variance(m);
    let k2 = coeffs.kappa * coeffs.kappa;
    Ok(LightMoments {
        mean_c: coeffs.kappa * atom_mean.p,
        mean_s: coeffs.kappa * atom_mean.x,
        var_c: k2 * var_p + added,
        var_s: k2 * var_x + added,
    })
}

/// Detection modelled as a beamsplitter admixture of vacuum:
/// `mean → √η·mean`, `Var → η·Var + (1−η)/2`.
pub fn apply_detection_efficiency(light: &LightMoments, eta: f64) -> Result<LightMoments> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfRange { name: "eta", value: eta, range: "(0, 1]" });
    }
    let se = eta.sqrt();
    let mix = |v: f64| eta * v + 0.5 * (1.0 - eta);
    Ok(LightMoments {
        mean_c: se * light.mean_c,
        mean_s: se * light.mean_s,
        var_c: mix(light.var_c),
        var_s: mix(light.var_s),
    })
}

/// Invert the readout map, including detection efficiency: first undo the
/// efficiency admixture, then divide the means by `κ` and strip the light and
/// noise variances.
///
/// Returns the reconstructed atomic mean `(x, p)` and variances
/// `(Var(x), Var(p))`.
pub fn reconstruct_state(
    light: &LightMoments,
    coeffs: &InteractionCoefficients,
    m: f64,
    eta: f64,
) -> Result<(QuadraturePair, (f64, f64))> {
    if coeffs.kappa == 0.0 {
        return Err(Error::UnrecoverableSignal);
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfRange { name: "eta", value: eta, range: "(0, 1]" });
    }
    let se = eta.sqrt();
    let unmix = |v: f64| (v - 0.5 * (1.0 - eta)) / eta;
    let added = coeffs.light_noise_variance(m);
    let k2 = coeffs.kappa * coeffs.kappa;
    let mean = QuadraturePair::new(light.mean_s / se / coeffs.kappa, light.mean_c / se / coeffs.kappa);
    let var_x = (unmix(light.var_s) - added) / k2;
    let var_p = (unmix(light.var_c) - added) / k2;
    Ok((mean, (var_x, var_p)))
}
