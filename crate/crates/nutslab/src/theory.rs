//! Constants of the Gaussian analysis: integration-time laws of the ideal
//! kernels, their contraction rates, the regularisation constants, the
//! concentration geometry that fixes k*, and the gradient budgets.

use std::f64::consts::{PI, SQRT_2};

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::model::{dot, norm_sq};
use crate::quadrature::{bisect, integrate_pieces, NumericError};

/// Quadrature tolerance for every constant below.
pub const QUAD_TOL: f64 = 1e-10;
/// Agreement required between quadrature and closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Bisection width for the excluded-set half widths.
pub const BISECT_TOL: f64 = 1e-10;
/// The canonical error level of the constants table.
pub const CANONICAL_EPSILON: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("k* must be in 1..={max}, got {got}")]
    BadKstar { got: u32, max: u32 },
    #[error("|t| = {t} exceeds T0 = {t0}")]
    OutsideSupport { t: f64, t0: f64 },
    #[error("quadrature {quadrature} and closed form {closed_form} disagree")]
    Inconsistent { quadrature: f64, closed_form: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    Mul,
    Bps,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Mul, Variant::Bps];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mul => "mul",
            Variant::Bps => "bps",
        }
    }

    /// Penalty on the energy error in the acceptance bound: 1 for mul, 2 for BPS.
    pub fn energy_penalty(self) -> f64 {
        match self {
            Variant::Mul => 1.0,
            Variant::Bps => 2.0,
        }
    }
}

/// Law of the signed number of leapfrog steps T taken by an ideal kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLaw {
    pub variant: Variant,
    pub kstar: u32,
    /// Probabilities of T = −(2^{k*} − 1), …, 2^{k*} − 1.
    pub pmf: Vec<Ratio<i64>>,
}

pub const MAX_KSTAR: u32 = 20;

pub fn time_law_pmf(variant: Variant, kstar: u32) -> Result<TimeLaw, TheoryError> {
    if kstar == 0 || kstar > MAX_KSTAR {
        return Err(TheoryError::BadKstar { got: kstar, max: MAX_KSTAR });
    }
    let n = 1i64 << kstar;
    let pmf = (-(n - 1)..n)
        .map(|t| match variant {
            Variant::Mul => Ratio::new(n - t.abs(), n * n),
            Variant::Bps => {
                let half = n / 2;
                Ratio::new(half - (half - t.abs()).abs(), n * n / 2)
            }
        })
        .collect();
    Ok(TimeLaw { variant, kstar, pmf })
}

impl TimeLaw {
    pub fn max_steps(&self) -> i64 {
        (1i64 << self.kstar) - 1
    }

    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        let m = self.max_steps();
        -m..=m
    }

    pub fn prob_exact(&self, t: i64) -> Ratio<i64> {
        let m = self.max_steps();
        if t.abs() > m {
            Ratio::from_integer(0)
        } else {
            self.pmf[(t + m) as usize]
        }
    }

    pub fn prob(&self, t: i64) -> f64 {
        let r = self.prob_exact(t);
        *r.numer() as f64 / *r.denom() as f64
    }

    pub fn total_exact(&self) -> Ratio<i64> {
        self.pmf.iter().copied().sum()
    }

    /// Inverse-cdf draw from u ∈ [0, 1).
    pub fn sample_with(&self, u: f64) -> i64 {
        let mut acc = 0.0;
        for t in self.support() {
            acc += self.prob(t);
            if u < acc {
                return t;
            }
        }
        self.support().rev().find(|&t| self.prob(t) > 0.0).unwrap_or(0)
    }

    /// E|T|.
    pub fn mean_abs(&self) -> f64 {
        self.support().map(|t| t.abs() as f64 * self.prob(t)).sum()
    }

    /// E|cos(θ T)|, the contraction factor of the synchronous coupling for a
    /// per-step rotation angle θ.
    pub fn mean_abs_cos(&self, theta: f64) -> f64 {
        self.support().map(|t| (theta * t as f64).cos().abs() * self.prob(t)).sum()
    }

    /// sup_t |F_disc(t) − F_lim(t)| for the law of hT with h = T0/2^{k*}
    /// against the limit density on [−T0, T0].
    pub fn cdf_distance_to_limit(&self, t0: f64) -> Result<f64, TheoryError> {
        let h = t0 / (1u64 << self.kstar) as f64;
        let mut acc = 0.0;
        let mut sup: f64 = 0.0;
        for t in self.support() {
            let x = h * t as f64;
            let lim = time_law_limit_cdf(self.variant, t0, x)?;
            sup = sup.max((acc - lim).abs());
            acc += self.prob(t);
            sup = sup.max((acc - lim).abs());
        }
        Ok(sup)
    }
}

fn check_support(t0: f64, t: f64) -> Result<(), TheoryError> {
    if t0.is_nan() || t0 <= 0.0 {
        return Err(TheoryError::InvalidParameter(format!("T0 must be positive, got {t0}")));
    }
    if t.abs() > t0 {
        return Err(TheoryError::OutsideSupport { t, t0 });
    }
    Ok(())
}

/// Limit density of hT as h → 0 with 2^{k*} h = T0.
pub fn time_law_limit_density(variant: Variant, t0: f64, t: f64) -> Result<f64, TheoryError> {
    check_support(t0, t)?;
    Ok(match variant {
        Variant::Mul => (t0 - t.abs()) / (t0 * t0),
        Variant::Bps => (t0 - (t0 - 2.0 * t.abs()).abs()) / (t0 * t0),
    })
}

pub fn time_law_limit_cdf(variant: Variant, t0: f64, t: f64) -> Result<f64, TheoryError> {
    check_support(t0, t)?;
    let s = t.abs();
    let tail = match variant {
        Variant::Mul => (t0 * s - 0.5 * s * s) / (t0 * t0),
        Variant::Bps if s <= 0.5 * t0 => s * s / (t0 * t0),
        Variant::Bps => 0.25 + (2.0 * t0 * s - s * s - 0.75 * t0 * t0) / (t0 * t0),
    };
    Ok(0.5 + t.signum() * tail)
}

/// Limit density at T0 = π, evaluated on |t| ≤ π.
fn density_pi(variant: Variant, t: f64) -> f64 {
    let s = t.abs().min(PI);
    match variant {
        Variant::Mul => (PI - s) / (PI * PI),
        Variant::Bps => (PI - (PI - 2.0 * s).abs()) / (PI * PI),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rho {
    pub quadrature: f64,
    pub closed_form: f64,
}

pub fn rho_closed_form(variant: Variant) -> f64 {
    match variant {
        Variant::Mul => 1.0 - 2.0 / PI,
        Variant::Bps => 1.0 - 4.0 * (PI - 2.0) / (PI * PI),
    }
}

/// ρ = 1 − ∫_{−π}^{π} |cos t| L(t) dt, by quadrature and in closed form.
pub fn contraction_rho(variant: Variant) -> Result<Rho, TheoryError> {
    let f = |t: f64| t.cos().abs() * density_pi(variant, t);
    let integral = 2.0 * integrate_pieces(f, &[0.0, 0.5 * PI, PI], QUAD_TOL)?;
    let rho = Rho { quadrature: 1.0 - integral, closed_form: rho_closed_form(variant) };
    if (rho.quadrature - rho.closed_form).abs() > CLOSED_FORM_TOL {
        return Err(TheoryError::Inconsistent { quadrature: rho.quadrature, closed_form: rho.closed_form });
    }
    Ok(rho)
}

/// Half width w of the excluded set around 0 and the regularisation
/// constant ∫ |cot t| L(t) dt over the complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Creg {
    pub w: f64,
    /// Complement of the excluded set within [0, π].
    pub creg: f64,
    /// Complement within [−π, π], twice `creg` by symmetry.
    pub creg_two_sided: f64,
}

/// x / sin x, continuous at 0.
fn x_over_sin(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        x / x.sin()
    }
}

/// Mass of the excluded set as a function of its half width.
fn excluded_mass(variant: Variant, w: f64) -> Result<f64, TheoryError> {
    Ok(match variant {
        Variant::Mul => 2.0 * integrate_pieces(|t| density_pi(Variant::Mul, t), &[0.0, w], QUAD_TOL)?,
        Variant::Bps => 4.0 * integrate_pieces(|t| density_pi(Variant::Bps, t), &[0.0, w], QUAD_TOL)?,
    })
}

pub fn creg_constants(variant: Variant, eta: f64) -> Result<Creg, TheoryError> {
    if !(eta > 0.0 && eta < 1.0 / 3.0) {
        return Err(TheoryError::InvalidParameter(format!("eta must lie in (0, 1/3), got {eta}")));
    }
    let w = bisect(|w| excluded_mass(variant, w).unwrap_or(f64::NAN) - eta, 0.0, 0.5 * PI, BISECT_TOL)?;
    let creg = match variant {
        // |cot t| (π − t) = |cos t| (π − t)/sin(π − t), bounded up to t = π.
        Variant::Mul => {
            integrate_pieces(|t| t.cos().abs() * x_over_sin(PI - t) / (PI * PI), &[w, 0.5 * PI, PI], QUAD_TOL)?
        }
        Variant::Bps => integrate_pieces(
            |t| (t.cos() / t.sin()).abs() * density_pi(Variant::Bps, t),
            &[w, 0.5 * PI, PI - w],
            QUAD_TOL,
        )?,
    };
    Ok(Creg { w, creg, creg_two_sided: 2.0 * creg })
}

/// η* = (1 − ε/4)/12.
pub fn eta_star(epsilon: f64) -> f64 {
    (1.0 - epsilon / 4.0) / 12.0
}

/// F(η) = (1 − 3η − ε/4)^{3/2} η^{1/2}.
pub fn f_eta(eta: f64, epsilon: f64) -> f64 {
    (1.0 - 3.0 * eta - epsilon / 4.0).powf(1.5) * eta.sqrt()
}

/// C′ = 1/(2ρ) + offset / ln d.
///
/// `offset` is ln(η⁻¹ C_reg e^ρ √2), which reproduces the printed
/// coefficients; `offset_with_diameter` keeps the extra factor 2 from the
/// diameter bound 2√(2d) and is larger by ln 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CPrime {
    pub leading: f64,
    pub offset: f64,
    pub offset_with_diameter: f64,
}

impl CPrime {
    pub fn compute(variant: Variant, epsilon: f64) -> Result<Self, TheoryError> {
        let eta = eta_star(epsilon);
        let rho = contraction_rho(variant)?.closed_form;
        let creg = creg_constants(variant, eta)?.creg;
        let offset = (creg * rho.exp() * SQRT_2 / eta).ln();
        Ok(Self { leading: 1.0 / (2.0 * rho), offset, offset_with_diameter: offset + 2f64.ln() })
    }

    pub fn at(&self, d: f64) -> f64 {
        self.leading + self.offset / d.ln()
    }

    pub fn at_with_diameter(&self, d: f64) -> f64 {
        self.leading + self.offset_with_diameter / d.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingBudget {
    pub variant: Variant,
    pub d: f64,
    pub epsilon: f64,
    pub alpha0: f64,
    pub eta: f64,
    pub b: f64,
    pub cprime: f64,
    pub e: f64,
    pub h_bar: f64,
    /// H = E ⌈b⁻¹ ln(2/ε)⌉.
    pub horizon: f64,
    /// π E b⁻¹ ln(2/ε) / h̄.
    pub n_grad: f64,
    pub energy_penalty: f64,
    pub r: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Side conditions of the budget that fail at these parameters.
    pub violations: Vec<String>,
}

/// The gradient budget with C′ in its printed form.
pub fn mixing_budget(variant: Variant, d: f64, epsilon: f64, alpha0: f64) -> Result<MixingBudget, TheoryError> {
    let cp = CPrime::compute(variant, epsilon)?;
    mixing_budget_with(variant, d, epsilon, alpha0, cp.at(d))
}

pub fn mixing_budget_with(
    variant: Variant,
    d: f64,
    epsilon: f64,
    alpha0: f64,
    cprime: f64,
) -> Result<MixingBudget, TheoryError> {
    if !(d >= 3.0 && d.is_finite()) {
        return Err(TheoryError::InvalidParameter(format!("d must be at least 3, got {d}")));
    }
    if !(epsilon > 0.0 && epsilon <= 0.01) {
        return Err(TheoryError::InvalidParameter(format!("epsilon must lie in (0, 0.01], got {epsilon}")));
    }
    if !(alpha0 >= 0.0 && alpha0 <= d.sqrt()) {
        return Err(TheoryError::InvalidParameter(format!("alpha0 must lie in [0, sqrt(d)], got {alpha0}")));
    }
    let eta = eta_star(epsilon);
    let b = 1.0 - 3.0 * eta - epsilon / 4.0;
    let ln_d = d.ln();
    let l2e = (2.0 / epsilon).ln();
    let beta = variant.energy_penalty();
    let m = d.sqrt().max(alpha0);
    let e = cprime * ln_d;
    let h_bar = eta.sqrt() / (2.0 * cprime * beta.sqrt()) / ln_d / (1.0 + SQRT_2).sqrt() / m.sqrt()
        * b.sqrt()
        * l2e.powf(-0.75);
    let horizon = e * (l2e / b).ceil();
    let n_grad = PI * e * l2e / b / h_bar;
    let r = d.sqrt() * ((32.0 / epsilon).ln() + 8.0 * (e * l2e / b).ln()).sqrt();
    let delta = PI / 3.0 * (1.0 + SQRT_2) * cprime * m / d * ln_d / b * l2e.powf(1.5);
    let alpha = (1.0 + SQRT_2) * m * e / b * l2e.powf(1.5);

    let mut violations = Vec::new();
    let eps_cap = ((b * d.sqrt() / (cprime * ln_d * (1.0 + SQRT_2))).powf(2.0 / 3.0)).exp() / 2.0;
    if 1.0 / epsilon > eps_cap {
        violations.push(format!(
            "1/epsilon = {} exceeds exp((b sqrt(d)/(C' ln d (1+sqrt 2)))^(2/3))/2 = {eps_cap}",
            1.0 / epsilon
        ));
    }
    let lhs = 8.0 * (e * l2e / b).ln() + 32f64.ln();
    if lhs > 2.0 * (1.0 / epsilon).ln() {
        violations.push(format!(
            "8 ln(E ln(2/epsilon)/b) + ln 32 = {lhs} exceeds 2 ln(1/epsilon) = {}",
            2.0 * (1.0 / epsilon).ln()
        ));
    }
    if let Err(band) = check_admissible(h_bar, delta) {
        violations.push(format!("h_bar = {h_bar} is not admissible: {band}"));
    }
    Ok(MixingBudget {
        variant,
        d,
        epsilon,
        alpha0,
        eta,
        b,
        cprime,
        e,
        h_bar,
        horizon,
        n_grad,
        energy_penalty: beta,
        r,
        delta,
        alpha,
        violations,
    })
}

/// N_g(mul)/N_g(BPS) at finite d, and its ln d → ∞ limit (ρ_bps/ρ_mul)²/√2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientRatio {
    pub finite_d: f64,
    pub limit: f64,
}

pub fn gradient_ratio(d: f64, epsilon: f64) -> Result<GradientRatio, TheoryError> {
    let mul = mixing_budget(Variant::Mul, d, epsilon, 0.0)?;
    let bps = mixing_budget(Variant::Bps, d, epsilon, 0.0)?;
    let (rm, rb) = (rho_closed_form(Variant::Mul), rho_closed_form(Variant::Bps));
    Ok(GradientRatio { finite_d: mul.n_grad / bps.n_grad, limit: (rb / rm).powi(2) / SQRT_2 })
}

/// Every constant of the comparison, at one error level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub epsilon: f64,
    pub rho_mul: Rho,
    pub rho_bps: Rho,
    pub creg_mul: Creg,
    pub creg_bps: Creg,
    pub eta_star: f64,
    pub f_eta_star: f64,
    pub cprime_mul: CPrime,
    pub cprime_bps: CPrime,
    pub ratio_limit: f64,
}

impl TheoryConstants {
    pub fn compute(epsilon: f64) -> Result<Self, TheoryError> {
        let eta = eta_star(epsilon);
        let rho_mul = contraction_rho(Variant::Mul)?;
        let rho_bps = contraction_rho(Variant::Bps)?;
        Ok(Self {
            epsilon,
            rho_mul,
            rho_bps,
            creg_mul: creg_constants(Variant::Mul, eta)?,
            creg_bps: creg_constants(Variant::Bps, eta)?,
            eta_star: eta,
            f_eta_star: f_eta(eta, epsilon),
            cprime_mul: CPrime::compute(Variant::Mul, epsilon)?,
            cprime_bps: CPrime::compute(Variant::Bps, epsilon)?,
            ratio_limit: (rho_bps.closed_form / rho_mul.closed_form).powi(2) / SQRT_2,
        })
    }
}

/// Geometry of the typical-set reduction at step size h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationParams {
    pub d: f64,
    pub alpha: f64,
    pub r: f64,
    pub h: f64,
    /// Δ = h² max(α, r)/2 + h² d/8, the energy error bound.
    pub energy_bound: f64,
    /// δ = (π/2)(5 max(α, r)/d + h²), the angular margin.
    pub delta: f64,
}

pub fn delta_big_delta(d: f64, alpha: f64, r: f64, h: f64) -> Result<ConcentrationParams, TheoryError> {
    if !(d > 0.0 && alpha >= 0.0 && r >= 0.0 && h >= 0.0) {
        return Err(TheoryError::InvalidParameter("d must be positive and alpha, r, h nonnegative".into()));
    }
    let m = alpha.max(r);
    Ok(ConcentrationParams {
        d,
        alpha,
        r,
        h,
        energy_bound: h * h * m / 2.0 + h * h * d / 8.0,
        delta: PI / 2.0 * (5.0 * m / d + h * h),
    })
}

/// Membership of q in D_α = {|q|² − d ≤ α} and of p in the per-step test
/// max(|p|² − d, |qᵀp|) ≤ r.
pub fn concentration_check(alpha: f64, r: f64, q: &[f64], p: &[f64]) -> (bool, bool) {
    let d = q.len() as f64;
    let in_d = norm_sq(q) - d <= alpha;
    let in_e = (norm_sq(p) - d).max(dot(q, p).abs()) <= r;
    (in_d, in_e)
}

/// The unique k ≤ k_max with h(2^k − 1) ∈ (π + δ, 2π − δ), if any.
pub fn predict_kstar(h: f64, delta: f64, k_max: u32) -> Option<u32> {
    (1..=k_max.min(62)).find(|&k| {
        let span = h * ((1u64 << k) - 1) as f64;
        span > PI + delta && span < 2.0 * PI - delta
    })
}

/// A span h(2^k − 1) that falls in a forbidden band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForbiddenBand {
    pub k: u32,
    pub span: f64,
    pub band: (f64, f64),
}

impl std::fmt::Display for ForbiddenBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "h(2^{} - 1) = {} lies in ({}, {})", self.k, self.span, self.band.0, self.band.1)
    }
}

/// Checks that no span h(2^k − 1), k ≥ 1, lies in (0, δ) or (π − δ, π + δ].
pub fn check_admissible(h: f64, delta: f64) -> Result<(), ForbiddenBand> {
    for k in 1..63u32 {
        let span = h * ((1u64 << k) - 1) as f64;
        if span > 0.0 && span < delta {
            return Err(ForbiddenBand { k, span, band: (0.0, delta) });
        }
        if span > PI - delta && span <= PI + delta {
            return Err(ForbiddenBand { k, span, band: (PI - delta, PI + delta) });
        }
        if span > PI + delta {
            break;
        }
    }
    Ok(())
}

/// Nearest admissible step to `h` for which a k* exists, searching a
/// multiplicative grid of relative width `max_rel`.
pub fn snap_admissible(h: f64, delta: f64, k_max: u32, max_rel: f64) -> Option<f64> {
    let steps = 2000;
    (0..=steps)
        .flat_map(|i| {
            let f = max_rel * i as f64 / steps as f64;
            [h * (1.0 - f), h * (1.0 + f)]
        })
        .find(|&c| c > 0.0 && check_admissible(c, delta).is_ok() && predict_kstar(c, delta, k_max).is_some())
}

/// Coefficients (α_q^j, α_p^j), j = 0..=steps, of the large-|q₀| expansion
/// of leapfrog on C|q|^β: α_q^{j+1} = −α_q^j Cβh²/2 + h α_p^j and
/// α_p^{j+1} = −α_q^{j+1} Cβh/2, from α_q^0 = 1, α_p^0 = 0.
pub fn tail_coefficients(c: f64, beta: f64, h: f64, steps: usize) -> Vec<(f64, f64)> {
    let k = c * beta;
    let mut out = vec![(1.0, 0.0)];
    for _ in 0..steps {
        let (aq, ap) = *out.last().unwrap();
        let nq = -aq * k * h * h / 2.0 + h * ap;
        out.push((nq, -nq * k * h / 2.0));
    }
    out
}

/// |T| h |p| + (h T)² M, the displacement bound for gradients bounded by M.
pub fn jump_bound(t: i64, h: f64, p_norm: f64, m: f64) -> f64 {
    let s = h * t.unsigned_abs() as f64;
    s * p_norm + s * s * m
}
