//! Full teleportation channel.
//!
//! One drive pulse passes ensemble B (creating light–atom entanglement), then
//! ensemble A (mapping its state onto the light), and the measured sine and
//! cosine modes are fed back onto B as a conditional displacement with gain
//! `g`. The resulting atomic state of B is a linear combination of the
//! initial ensembles, the input light and the decoherence noise,
//!
//! ```text
//! x_B' = c̄_B x_B + c̄_A x_A + c̄_N,B F_B + c̄_N,A F_A + c̄_y Y + c̄_q Q
//! ```
//!
//! with an identical relation for the p-quadrature, so the channel is
//! phase-symmetric and `Var(x_B') = Var(p_B')` always. Gain enters every
//! envelope linearly, which makes the output variance an exact quadratic in
//! `g`.
//!
//! Sign convention: positive gain is the direction in which the feedback
//! cancels the entangled noise (the experimentally useful branch); the
//! transfer amplitude is `c̄_A = g·κ` and the mean of the teleported state is
//! `c̄_A` times the input mean.

use serde::Serialize;

use crate::error::{ensure_non_negative, Error, Result};
use crate::gaussian::{coherent_overlap_fidelity, QuadraturePair};
use crate::interaction::{kappa, PhysicalParams};
use crate::numerics::{adaptive_simpson, golden_section_min, ExpPolyMode, ExpTerm};

pub use crate::qnd::{optimize_qnd_pulses, optimize_qnd_pulses_for, PulseShape};

/// The barred coefficient set of the teleportation channel at a given gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeleportationCoefficients {
    /// Weight of ensemble B's initial state.
    pub c_b: f64,
    /// Transfer amplitude of ensemble A's state, `g·κ`.
    pub c_a: f64,
    /// Decoherence noise of ensemble B.
    pub c_nb: f64,
    /// Decoherence noise of ensemble A.
    pub c_na: f64,
    /// Input light y-quadrature.
    pub c_y: f64,
    /// Input light q-quadrature (back-action).
    pub c_q: f64,
    /// The gain used to build the set.
    pub gain: f64,
}

impl TeleportationCoefficients {
    /// Output variance `½(c̄_B² + c̄_A² + m c̄_N,B² + m c̄_N,A² + c̄_y² + c̄_q²)`,
    /// equal for both quadratures.
    pub fn variance(&self, m: f64) -> f64 {
        0.5 * (self.c_b * self.c_b
            + self.c_a * self.c_a
            + m * self.c_nb * self.c_nb
            + m * self.c_na * self.c_na
            + self.c_y * self.c_y
            + self.c_q * self.c_q)
    }
}

/// Analytic moments of the teleported state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeleportedState {
    pub mean: QuadraturePair,
    pub var_x: f64,
    pub var_p: f64,
    /// Amplitude ratio `|⟨x_B⟩/⟨x_A⟩| = c̄_A`.
    pub transfer: f64,
}

/// One stochastic channel of the teleportation relation, split into the
/// gain-independent part `u` (present in B's state before feedback) and the
/// part `v` fed back per unit gain. The full envelope at gain `g` is
/// `u + g·v`.
pub(crate) struct BarredChannel {
    pub u: ExpPolyMode,
    pub v: ExpPolyMode,
    /// Weight in the coefficient definition: ½ for light modes, 1 for noise.
    pub coeff_weight: f64,
    /// Variance of the underlying normalized mode: ½ for light, m/2 for noise.
    pub mode_variance: f64,
}

impl BarredChannel {
    /// Barred coefficient at gain `g`, `√(w·∫(u+gv)²)`.
    pub fn coefficient(&self, g: f64, duration: f64) -> f64 {
        (self.coeff_weight * self.envelope_square_integral(g, duration)).max(0.0).sqrt()
    }

    pub fn envelope_square_integral(&self, g: f64, duration: f64) -> f64 {
        self.u.square_integral(duration)
            + 2.0 * g * self.u.product_integral(&self.v, duration)
            + g * g * self.v.square_integral(duration)
    }

    /// Covariance data of the scalar contributions `U = ∫u·field`,
    /// `V = ∫v·field` to the output quadrature.
    pub fn contribution_cov(&self, duration: f64) -> ChannelCov {
        let d = self.coeff_weight * self.mode_variance;
        ChannelCov {
            var_u: d * self.u.square_integral(duration),
            cov_uv: d * self.u.product_integral(&self.v, duration),
            var_v: d * self.v.square_integral(duration),
        }
    }
}

/// Second moments of one channel's `(U, V)` contribution pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCov {
    pub var_u: f64,
    pub cov_uv: f64,
    pub var_v: f64,
}

/// Gain-separated form of the full teleportation relation: everything needed
/// to assemble the output for any gain, or to simulate runs with an explicit
/// Bell outcome and feedback step.
pub struct FeedbackSplit {
    /// `c̄_B` at zero gain, `e^{−γT}`.
    pub c_b0: f64,
    /// `d c̄_B / d g` (negative in the useful branch).
    pub c_b_slope: f64,
    /// Transfer per unit gain.
    pub kappa: f64,
    /// Pulse duration the envelopes live on.
    pub duration: f64,
    pub(crate) channels: [BarredChannel; 4],
}

/// Channel order inside [`FeedbackSplit::channels`].
pub(crate) const CHAN_Y: usize = 0;
pub(crate) const CHAN_Q: usize = 1;
pub(crate) const CHAN_NOISE_B: usize = 2;
pub(crate) const CHAN_NOISE_A: usize = 3;

impl FeedbackSplit {
    pub fn new(params: &PhysicalParams) -> Self {
        let gamma = params.gamma();
        let gamma_s = params.gamma_s;
        let gamma_extra = params.gamma_extra;
        let z = params.z;
        let t = params.pulse_duration;
        let m = params.noise_multiplier;
        let decay = (-gamma * t).exp();
        let e2 = (-2.0 * gamma * t).exp();
        let d = -(-2.0 * gamma * t).exp_m1();
        let sd = d.sqrt();
        let sqrt_gamma = gamma.sqrt();

        let c_b_slope = -z * (gamma_s / (2.0 * gamma)).sqrt()
            * (sd * (1.0 - gamma_s / gamma) + 2.0 * gamma_s * t * e2 / sd);

        // y channel: u survives from the beamsplitter influx during decay,
        // v is read back through the measured mode.
        let u_y = ExpPolyMode::new(vec![ExpTerm {
            coef: -(2.0 * gamma_s).sqrt() / z * decay,
            rate: gamma,
            tpow: 0,
        }]);
        let pref_y = gamma_s / sqrt_gamma / sd;
        let v_y = ExpPolyMode::new(vec![
            ExpTerm {
                coef: -pref_y * (2.0 * gamma / gamma_s - 2.0 + gamma_s / gamma),
                rate: -gamma,
                tpow: 0,
            },
            ExpTerm {
                coef: -pref_y * e2 * (2.0 - gamma_s / gamma - 2.0 * gamma_s * t),
                rate: gamma,
                tpow: 0,
            },
            ExpTerm { coef: -pref_y * e2 * 2.0 * gamma_s, rate: gamma, tpow: 1 },
        ]);

        // q channel
        let u_q = ExpPolyMode::new(vec![ExpTerm {
            coef: (2.0 * gamma_s).sqrt() * z * decay,
            rate: gamma,
            tpow: 0,
        }]);
        let pref_q = (2.0 * gamma_s).sqrt() * z * z * gamma_s.sqrt() / ((2.0 * gamma).sqrt() * sd);
        let v_q = ExpPolyMode::new(vec![
            ExpTerm { coef: -pref_q * (2.0 - gamma_s / gamma), rate: -gamma, tpow: 0 },
            ExpTerm {
                coef: pref_q * e2 * (2.0 - gamma_s / gamma - 2.0 * gamma_s * t),
                rate: gamma,
                tpow: 0,
            },
            ExpTerm { coef: pref_q * e2 * 2.0 * gamma_s, rate: gamma, tpow: 1 },
        ]);

        // decoherence influx of B during the pass, and its read-back
        let (u_nb, v_nb, v_na) = if gamma_extra == 0.0 {
            (ExpPolyMode::zero(), ExpPolyMode::zero(), ExpPolyMode::zero())
        } else {
            let root_2ge = (2.0 * gamma_extra).sqrt();
            let u_nb = ExpPolyMode::new(vec![ExpTerm {
                coef: root_2ge * decay,
                rate: gamma,
                tpow: 0,
            }]);
            // the time-ordered read-back integral reduces to
            // a1 e^{-γt} + (b1 + c1 t) e^{γt}
            let a1 = gamma_extra / (2.0 * gamma * gamma);
            let b1 = e2 * (2.0 * gamma * gamma_s * t - gamma_extra) / (2.0 * gamma * gamma);
            let c1 = -e2 * gamma_s / gamma;
            let k = z * (2.0 * gamma_s * gamma).sqrt() / sd;
            let v_nb = ExpPolyMode::new(vec![
                ExpTerm { coef: -root_2ge * k * a1, rate: -gamma, tpow: 0 },
                ExpTerm { coef: -root_2ge * k * b1, rate: gamma, tpow: 0 },
                ExpTerm { coef: -root_2ge * k * c1, rate: gamma, tpow: 1 },
            ]);
            // A's decoherence reaches B only through the measured light:
            // the envelope is the readout noise mode of the same pulse
            let pref_na = z * (gamma_s * gamma_extra).sqrt() / sqrt_gamma / sd;
            let v_na = ExpPolyMode::new(vec![
                ExpTerm { coef: -pref_na, rate: -gamma, tpow: 0 },
                ExpTerm { coef: pref_na * e2, rate: gamma, tpow: 0 },
            ]);
            (u_nb, v_nb, v_na)
        };

        let channels = [
            BarredChannel { u: u_y, v: v_y, coeff_weight: 0.5, mode_variance: 0.5 },
            BarredChannel { u: u_q, v: v_q, coeff_weight: 0.5, mode_variance: 0.5 },
            BarredChannel { u: u_nb, v: v_nb, coeff_weight: 1.0, mode_variance: 0.5 * m },
            BarredChannel { u: ExpPolyMode::zero(), v: v_na, coeff_weight: 1.0, mode_variance: 0.5 * m },
        ];

        Self { c_b0: decay, c_b_slope, kappa: kappa(params), duration: t, channels }
    }

    pub fn coefficients(&self, g: f64) -> TeleportationCoefficients {
        TeleportationCoefficients {
            c_b: self.c_b0 + g * self.c_b_slope,
            c_a: g * self.kappa,
            c_nb: self.channels[CHAN_NOISE_B].coefficient(g, self.duration),
            c_na: self.channels[CHAN_NOISE_A].coefficient(g, self.duration),
            c_y: self.channels[CHAN_Y].coefficient(g, self.duration),
            c_q: self.channels[CHAN_Q].coefficient(g, self.duration),
            gain: g,
        }
    }

    /// `(U, V)` covariance data for the four stochastic channels, in the
    /// order y, q, noise-B, noise-A.
    pub fn channel_covs(&self) -> [ChannelCov; 4] {
        [
            self.channels[CHAN_Y].contribution_cov(self.duration),
            self.channels[CHAN_Q].contribution_cov(self.duration),
            self.channels[CHAN_NOISE_B].contribution_cov(self.duration),
            self.channels[CHAN_NOISE_A].contribution_cov(self.duration),
        ]
    }

    /// Output variance at gain `g` assembled from the split pieces.
    pub fn variance(&self, g: f64) -> f64 {
        let c_b = self.c_b0 + g * self.c_b_slope;
        let c_a = g * self.kappa;
        let mut var = 0.5 * (c_b * c_b + c_a * c_a);
        for cov in self.channel_covs() {
            var += cov.var_u + 2.0 * g * cov.cov_uv + g * g * cov.var_v;
        }
        var
    }

    /// Quadrature self-check of every barred normalization: maximum relative
    /// deviation between the closed-form and adaptively integrated
    /// `∫(u+gv)²`.
    pub fn normalization_deviation(&self, g: f64) -> f64 {
        self.channels
            .iter()
            .map(|ch| {
                let closed = ch.envelope_square_integral(g, self.duration);
                let env = ch.u.add_scaled(&ch.v, g);
                let quad = env.square_integral_quadrature(self.duration);
                if closed == 0.0 {
                    quad.abs()
                } else {
                    (closed - quad).abs() / closed.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Barred coefficients of the channel at gain `g`.
pub fn teleport_coefficients(params: &PhysicalParams, g: f64) -> TeleportationCoefficients {
    FeedbackSplit::new(params).coefficients(g)
}

/// Analytic mean and variances of the teleported state for a coherent input.
///
/// Both ensembles and all light modes start in vacuum or coherent states;
/// the mean transfers with amplitude `c̄_A` and the variance is the
/// coefficient square sum, identical for x and p.
pub fn teleported_moments(
    input_mean: QuadraturePair,
    params: &PhysicalParams,
    g: f64,
) -> TeleportedState {
    let c = teleport_coefficients(params, g);
    let var = c.variance(params.noise_multiplier);
    TeleportedState {
        mean: QuadraturePair::new(c.c_a * input_mean.x, c.c_a * input_mean.p),
        var_x: var,
        var_p: var,
        transfer: c.c_a,
    }
}

/// Best classical (measure-and-prepare) average fidelity for a Gaussian
/// alphabet of width `nbar`: `(1 + n̄)/(1 + 2n̄)`.
pub fn classical_benchmark(nbar: f64) -> Result<f64> {
    ensure_non_negative("nbar", nbar)?;
    Ok((1.0 + nbar) / (1.0 + 2.0 * nbar))
}

/// Average fidelity over a Gaussian alphabet of width `nbar` for a symmetric
/// Gaussian channel with the given output variances and transfer amplitude.
pub fn average_fidelity_from_moments(
    var_x: f64,
    var_p: f64,
    transfer: f64,
    nbar: f64,
) -> Result<f64> {
    ensure_non_negative("nbar", nbar)?;
    let miss = (1.0 - transfer.abs()).powi(2);
    let fx = 2.0 / (1.0 + 2.0 * var_x + 2.0 * nbar * miss);
    let fp = 2.0 / (1.0 + 2.0 * var_p + 2.0 * nbar * miss);
    Ok((fx * fp).sqrt())
}

/// Closed-form average fidelity of the channel at gain `g`.
pub fn average_fidelity(params: &PhysicalParams, g: f64, nbar: f64) -> Result<f64> {
    let state = teleported_moments(QuadraturePair::ORIGIN, params, g);
    average_fidelity_from_moments(state.var_x, state.var_p, state.transfer, nbar)
}

/// Cross-check route for the average fidelity: numerically integrate the
/// single-shot overlap over the Gaussian input alphabet by iterated adaptive
/// quadrature. Must agree with [`average_fidelity_from_moments`] to high
/// accuracy; kept independent of it on purpose.
pub fn average_fidelity_quadrature(
    var_x: f64,
    var_p: f64,
    transfer: f64,
    nbar: f64,
) -> Result<f64> {
    ensure_non_negative("nbar", nbar)?;
    let single_shot = |x: f64, p: f64| {
        coherent_overlap_fidelity(
            QuadraturePair::new(x, p),
            QuadraturePair::new(transfer * x, transfer * p),
            var_x,
            var_p,
        )
        .expect("variances validated by caller")
    };
    if nbar == 0.0 {
        return Ok(single_shot(0.0, 0.0));
    }
    let limit = 10.0 * nbar.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * nbar);
    let outer = adaptive_simpson(
        |x| {
            adaptive_simpson(
                |p| single_shot(x, p) * (-(x * x + p * p) / (2.0 * nbar)).exp(),
                -limit,
                limit,
                1e-9,
            )
        },
        -limit,
        limit,
        1e-9,
    );
    Ok(norm * outer)
}

/// Maximize the average fidelity over the gain.
///
/// Coarse grid over `g ∈ [0, 3]` with step 0.01, then golden-section
/// refinement of the bracketing interval down to `|Δg| ≤ 1e-6`. The objective
/// is smooth and unimodal, so the result does not depend on the bracket.
pub fn optimize_gain(params: &PhysicalParams, nbar: f64) -> Result<(f64, f64)> {
    ensure_non_negative("nbar", nbar)?;
    let split = FeedbackSplit::new(params);
    let m = params.noise_multiplier;
    let fidelity = |g: f64| {
        let c = split.coefficients(g);
        average_fidelity_from_moments(c.variance(m), c.variance(m), c.c_a, nbar)
            .expect("nbar validated")
    };
    const STEP: f64 = 0.01;
    let mut best_g = 0.0;
    let mut best_f = fidelity(0.0);
    let mut g = STEP;
    while g <= 3.0 + 1e-12 {
        let f = fidelity(g);
        if f > best_f {
            best_f = f;
            best_g = g;
        }
        g += STEP;
    }
    let lo = (best_g - STEP).max(0.0);
    let hi = (best_g + STEP).min(3.0);
    let (g_star, neg_f) = golden_section_min(|g| -fidelity(g), lo, hi, 1e-7);
    Ok((g_star, -neg_f))
}

/// Gain at which the transfer amplitude reaches a target value,
/// `g = target / κ`.
pub fn gain_for_transfer(params: &PhysicalParams, target: f64) -> Result<f64> {
    let k = kappa(params);
    if k == 0.0 {
        return Err(Error::UnrecoverableSignal);
    }
    Ok(target / k)
}
