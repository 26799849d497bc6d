//! Shared numerical machinery: exponential-polynomial envelopes with exact
//! square integrals, adaptive quadrature for cross-checking them, and the
//! scalar/simplex minimizers used by the gain and pulse-shape optimizers.

/// One term `coef * t^tpow * exp(rate * t)` of an envelope on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub rate: f64,
    pub tpow: u8,
}

/// Envelope built from exponential-polynomial terms.
///
/// Every temporal mode function in this crate (readout modes, barred
/// teleportation modes, shaped QND drive combinations) is a finite sum of
/// `t^k e^{λt}` with `k ≤ 1`, so squares and pairwise products integrate in
/// closed form. The closed form is authoritative; [`ExpPolyMode::square_integral_quadrature`]
/// re-derives the same number by adaptive quadrature as a built-in self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyMode {
    terms: Vec<ExpTerm>,
}

impl ExpPolyMode {
    pub fn new(terms: Vec<ExpTerm>) -> Self {
        Self { terms }
    }

    /// The identically-zero envelope.
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let tp = match term.tpow {
                    0 => 1.0,
                    1 => t,
                    p => t.powi(p as i32),
                };
                term.coef * tp * (term.rate * t).exp()
            })
            .sum()
    }

    /// `∫₀ᵀ f(t)² dt`, integrated analytically term by term.
    pub fn square_integral(&self, upper: f64) -> f64 {
        let mut total = 0.0;
        for (i, a) in self.terms.iter().enumerate() {
            for b in &self.terms[i..] {
                let sym = if std::ptr::eq(a, b) { 1.0 } else { 2.0 };
                let k = a.tpow + b.tpow;
                total += sym * a.coef * b.coef * int_tk_exp(k, a.rate + b.rate, upper);
            }
        }
        total
    }

    /// `∫₀ᵀ f(t) g(t) dt`, analytic.
    pub fn product_integral(&self, other: &Self, upper: f64) -> f64 {
        let mut total = 0.0;
        for a in &self.terms {
            for b in &other.terms {
                total += a.coef * b.coef * int_tk_exp(a.tpow + b.tpow, a.rate + b.rate, upper);
            }
        }
        total
    }

    /// Quadrature route for `∫₀ᵀ f(t)² dt`; self-check path only.
    pub fn square_integral_quadrature(&self, upper: f64) -> f64 {
        adaptive_simpson(|t| self.eval(t).powi(2), 0.0, upper, 1e-10)
    }

    /// Sum of two envelopes with the second scaled, `f + s·g`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| ExpTerm {
            coef: s * t.coef,
            rate: t.rate,
            tpow: t.tpow,
        }));
        Self { terms }
    }
}

/// `∫₀ᵘ t^k e^{λt} dt` for `k ∈ {0, 1, 2}`.
///
/// Uses a series expansion when `|λu|` is small, where the direct closed
/// forms lose digits to cancellation.
pub fn int_tk_exp(k: u8, lambda: f64, upper: f64) -> f64 {
    let u = upper;
    let x = lambda * u;
    if x.abs() < 1e-4 {
        // ∫ t^k e^{λt} dt = Σ_j λ^j u^{k+j+1} / (j! (k+j+1))
        let mut sum = 0.0;
        let mut fact = 1.0;
        for j in 0..8u32 {
            if j > 0 {
                fact *= j as f64;
            }
            sum += x.powi(j as i32) / (fact * (k as f64 + j as f64 + 1.0));
        }
        return sum * u.powi(k as i32 + 1);
    }
    let e = (lambda * u).exp();
    match k {
        0 => x.exp_m1() / lambda,
        1 => (u * e - x.exp_m1() / lambda) / lambda,
        2 => {
            let i1 = (u * e - x.exp_m1() / lambda) / lambda;
            (u * u * e - 2.0 * i1) / lambda
        }
        _ => unreachable!("tpow above 2 is never produced by squared envelopes"),
    }
}

/// Adaptive Simpson quadrature with relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * eps, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * eps, depth - 1)
    }

    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    // scale the absolute budget off the first estimate; floor it so that
    // integrals of exactly-zero envelopes terminate immediately
    let eps = rel_tol * whole.abs().max(1e-300);
    recurse(&f, a, fa, b, fb, whole, m, fm, eps, 48)
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
///
/// Returns `(x_min, f_min)`. The bracket shrinks until its width is below
/// `xtol`; `f` is assumed unimodal on the bracket.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimal Nelder–Mead simplex minimizer in two dimensions.
///
/// Coordinates are clamped to `bounds` before evaluation, which is enough for
/// the smooth objectives optimized here.
pub fn nelder_mead_2d<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    scale: f64,
    bounds: [f64; 2],
    ftol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let clamp = |p: [f64; 2]| [p[0].clamp(bounds[0], bounds[1]), p[1].clamp(bounds[0], bounds[1])];
    let eval = |p: [f64; 2]| f(clamp(p));
    let mut pts = [
        start,
        [start[0] + scale, start[1]],
        [start[0], start[1] + scale],
    ];
    let mut vals = [eval(pts[0]), eval(pts[1]), eval(pts[2])];

    for _ in 0..max_iter {
        // order: best, middle, worst
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (vals[w] - vals[b]).abs() <= ftol * (1.0 + vals[b].abs()) {
            break;
        }
        let centroid = [
            0.5 * (pts[b][0] + pts[m][0]),
            0.5 * (pts[b][1] + pts[m][1]),
        ];
        let refl = [
            centroid[0] + (centroid[0] - pts[w][0]),
            centroid[1] + (centroid[1] - pts[w][1]),
        ];
        let f_refl = eval(refl);
        if f_refl < vals[b] {
            let exp = [
                centroid[0] + 2.0 * (centroid[0] - pts[w][0]),
                centroid[1] + 2.0 * (centroid[1] - pts[w][1]),
            ];
            let f_exp = eval(exp);
            if f_exp < f_refl {
                pts[w] = exp;
                vals[w] = f_exp;
            } else {
                pts[w] = refl;
                vals[w] = f_refl;
            }
        } else if f_refl < vals[m] {
            pts[w] = refl;
            vals[w] = f_refl;
        } else {
            let contr = [
                centroid[0] + 0.5 * (pts[w][0] - centroid[0]),
                centroid[1] + 0.5 * (pts[w][1] - centroid[1]),
            ];
            let f_contr = eval(contr);
            if f_contr < vals[w] {
                pts[w] = contr;
                vals[w] = f_contr;
            } else {
                // shrink toward the best vertex
                for i in 0..3 {
                    if i != b {
                        pts[i] = [
                            pts[b][0] + 0.5 * (pts[i][0] - pts[b][0]),
                            pts[b][1] + 0.5 * (pts[i][1] - pts[b][1]),
                        ];
                        vals[i] = eval(pts[i]);
                    }
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (clamp(pts[best]), vals[best])
}

/// Least-squares quadratic fit `y ≈ c0 + c1 x + c2 x²`.
///
/// Returns the coefficients and the maximum absolute residual.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> ([f64; 3], f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 3);
    // normal equations for the 3-parameter fit
    let n = xs.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let x2 = x * x;
        sx += x;
        sx2 += x2;
        sx3 += x2 * x;
        sx4 += x2 * x2;
        sy += y;
        sxy += x * y;
        sx2y += x2 * y;
    }
    let a = nalgebra::Matrix3::new(n, sx, sx2, sx, sx2, sx3, sx2, sx3, sx4);
    let b = nalgebra::Vector3::new(sy, sxy, sx2y);
    let c = a.lu().solve(&b).expect("quadratic fit normal equations are singular");
    let coeffs = [c[0], c[1], c[2]];
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (coeffs[0] + coeffs[1] * x + coeffs[2] * x * x - y).abs())
        .fold(0.0, f64::max);
    (coeffs, resid)
}
