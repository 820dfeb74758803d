//! Rules that build desingularizing functions for sums, minima, separable
//! sums and smooth compositions from those of the pieces.

use serde::{Deserialize, Serialize};

use crate::desing::{DesingFn, Form};
use crate::error::{KlError, Result};
use crate::eta::Eta;
use crate::grid::log_spaced;
use crate::linalg::{jacobian_fd, smallest_singular_value, spectral_norm, Matrix};

/// Default tolerance for [`active_set`].
pub const ACTIVE_TOL: f64 = 1e-12;

const CONCAVITY_POINTS: usize = 256;
const COMPOSITION_SAMPLES: usize = 32;
const COMPOSITION_SAFETY: f64 = 1.01;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub holds: bool,
}

/// Multiplier applied to the input function by a composition rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactor {
    /// Sampled `max 1/σ_min`, or `1/r` for a linear map.
    pub estimate: f64,
    pub safety: f64,
    /// `estimate · safety`.
    pub applied: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub phi: DesingFn,
    pub eta: Eta,
    /// Radius of the neighbourhood on which the result holds, in words.
    pub eps_note: String,
    pub assumptions_checked: Vec<AssumptionCheck>,
    /// Hypotheses that cannot be checked from the inputs and are taken on trust.
    pub unchecked: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale: Option<ScaleFactor>,
}

impl RuleResult {
    fn new(phi: DesingFn, eps_note: &str) -> Self {
        RuleResult {
            eta: phi.eta(),
            phi,
            eps_note: eps_note.to_string(),
            assumptions_checked: Vec::new(),
            unchecked: Vec::new(),
            scale: None,
        }
    }

    fn checked(mut self, name: impl Into<String>) -> Self {
        self.assumptions_checked.push(AssumptionCheck {
            name: name.into(),
            holds: true,
        });
        self
    }

    fn unchecked(mut self, what: &str) -> Self {
        self.unchecked.push(what.to_string());
        self
    }
}

/// Whether `φ′₋` strictly decreases on 256 log-spaced points of
/// `(10⁻⁶·T, T)`, `T = min(η, 1)`.
pub fn is_strictly_concave(phi: &DesingFn) -> Result<bool> {
    let hi = phi.eta().get().min(1.0) * (1.0 - 1e-9);
    let grid = log_spaced(hi * 1e-6, hi, CONCAVITY_POINTS);
    Ok(phi.check_phi_class(&grid)?.strictly_concave)
}

fn require_strictly_concave(phis: &[DesingFn]) -> Result<()> {
    let failing: Vec<String> = phis
        .iter()
        .enumerate()
        .map(|(i, f)| is_strictly_concave(f).map(|ok| (!ok).then(|| (i + 1).to_string())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(KlError::Assumption(format!(
            "input function(s) {} are not strictly concave",
            failing.join(", ")
        )))
    }
}

fn min_eta(phis: &[DesingFn]) -> Eta {
    phis.iter().map(DesingFn::eta).fold(Eta::INFINITE, Eta::min)
}

fn arg_scale(phis: &[DesingFn]) -> Result<u32> {
    if phis.is_empty() {
        return Err(KlError::arg("at least one function is required"));
    }
    u32::try_from(phis.len()).map_err(|_| KlError::arg("too many functions"))
}

/// `φ(t) = (1/α)·∫₀ᵗ max_i (φ_i)′₋(s/m) ds` for `f = Σ f_i`, on `η = min η_i`.
///
/// `alpha` is the regularity constant of the subgradient sums (see
/// [`estimate_alpha`](crate::verifier::estimate_alpha)).
pub fn sum_rule(phis: &[DesingFn], alpha: f64) -> Result<RuleResult> {
    let m = arg_scale(phis)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(KlError::arg(format!(
            "alpha must be a positive real, got {alpha}"
        )));
    }
    require_strictly_concave(phis)?;
    let eta = min_eta(phis);
    let phi = DesingFn::max_deriv_composite(phis.to_vec(), m, 1.0 / alpha, eta)?;
    Ok(RuleResult::new(
        phi,
        "eps = min eps_i, shrunk so the regularity bound holds on B(x̄, eps)",
    )
    .checked("inputs strictly concave")
    .checked("alpha > 0")
    .unchecked("regularity bound ‖Σu_i‖ ≥ α·Σ‖u_i‖ near x̄")
    .unchecked("at most one f_i is not locally Lipschitz")
    .unchecked("f_i continuous on their domains near x̄"))
}

/// `φ(t) = ∫₀ᵗ max_{i∈I(x̄)} (φ_i)′₋(s) ds` for `f = min f_i`; pass only the active `φ_i`.
pub fn min_rule(phis_active: &[DesingFn]) -> Result<RuleResult> {
    arg_scale(phis_active)?;
    let eta = min_eta(phis_active);
    let phi = DesingFn::max_deriv_composite(phis_active.to_vec(), 1, 1.0, eta)?;
    Ok(RuleResult::new(
        phi,
        "eps = min eps_i, shrunk so inactive f_i stay above f(x̄) + eta",
    )
    .checked("active set nonempty")
    .unchecked("inactive f_i are continuous at x̄")
    .unchecked("f = min f_i is continuous on dom ∂f near x̄"))
}

/// 0-based indices `i` with `values_at_xbar[i] ≤ f_xbar + tol`.
///
/// `f_xbar` must equal `min values_at_xbar` within `tol`.
pub fn active_set(values_at_xbar: &[f64], f_xbar: f64, tol: f64) -> Result<Vec<usize>> {
    if values_at_xbar.is_empty() {
        return Err(KlError::arg("no function values given"));
    }
    if !(tol >= 0.0) || !f_xbar.is_finite() || values_at_xbar.iter().any(|v| v.is_nan()) {
        return Err(KlError::arg("values and tolerance must be numbers"));
    }
    let min = values_at_xbar.iter().copied().fold(f64::INFINITY, f64::min);
    if (min - f_xbar).abs() > tol {
        return Err(KlError::arg(format!(
            "f(x̄) = {f_xbar} differs from the smallest value {min} by more than {tol}"
        )));
    }
    Ok(values_at_xbar
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= f_xbar + tol)
        .map(|(i, _)| i)
        .collect())
}

/// `φ(t) = ∫₀ᵗ max_i (φ_i)′₋(s/m) ds` for `f(x_1, …, x_m) = Σ f_i(x_i)`.
///
/// `eta_target` must be below `m·min η_i`; it may be infinite only when every
/// `η_i` is.
pub fn separable_sum_rule(phis: &[DesingFn], eta_target: Eta) -> Result<RuleResult> {
    let m = arg_scale(phis)?;
    let bound = min_eta(phis).get() * m as f64;
    let admissible = if eta_target.is_finite() {
        eta_target.get() < bound
    } else {
        !bound.is_finite()
    };
    if !admissible {
        return Err(KlError::Assumption(format!(
            "eta = {eta_target} must be below m·min eta_i = {bound}"
        )));
    }
    require_strictly_concave(phis)?;
    let phi = DesingFn::max_deriv_composite(phis.to_vec(), m, 1.0, eta_target)?;
    Ok(
        RuleResult::new(phi, "eps = min eps_i / √m on the product space")
            .checked("inputs strictly concave on (0, eta_i)")
            .checked(format!("eta < m·min eta_i = {bound}")),
    )
}

/// `φ(t) = m^θ/((1-θ)α)·t^{1-θ}` for inputs `t^{1-θ_i}/(1-θ_i)`, `θ = max θ_i`, on `η = m`.
pub fn power_sum_rule(thetas: &[f64], alpha: f64, m: u32) -> Result<DesingFn> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(KlError::arg(format!(
            "alpha must be a positive real, got {alpha}"
        )));
    }
    power_fast_path(thetas, m, 1.0 / alpha)
}

/// `φ(t) = m^θ/(1-θ)·t^{1-θ}`, the separable counterpart of [`power_sum_rule`].
pub fn power_separable_rule(thetas: &[f64], m: u32) -> Result<DesingFn> {
    power_fast_path(thetas, m, 1.0)
}

fn power_fast_path(thetas: &[f64], m: u32, factor: f64) -> Result<DesingFn> {
    if thetas.is_empty() {
        return Err(KlError::arg("at least one exponent is required"));
    }
    if m == 0 {
        return Err(KlError::arg("m must be a positive integer"));
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(KlError::arg(format!(
            "exponents must lie in [0, 1), got {t}"
        )));
    }
    let theta = thetas.iter().copied().fold(0.0, f64::max);
    let m = m as f64;
    let c = m.powf(theta) / (1.0 - theta) * factor;
    DesingFn::power(c, theta)?.with_eta(Eta::new(m)?)
}

/// A smooth map `F: ℝⁿ → ℝᵐ`.
pub trait SmoothMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    /// Analytic Jacobian; central differences are used when absent.
    fn jacobian(&self, _x: &[f64]) -> Option<Matrix> {
        None
    }
}

/// `F(x) = A·x − b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl SmoothMap for AffineMap {
    fn input_dim(&self) -> usize {
        self.a.cols()
    }

    fn output_dim(&self) -> usize {
        self.a.rows()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .mul_vec(x)
            .iter()
            .zip(&self.b)
            .map(|(v, b)| v - b)
            .collect()
    }

    fn jacobian(&self, _x: &[f64]) -> Option<Matrix> {
        Some(self.a.clone())
    }
}

fn jacobian_of(map: &dyn SmoothMap, x: &[f64]) -> Result<Matrix> {
    let j = match map.jacobian(x) {
        Some(j) => j,
        None => jacobian_fd(&|y: &[f64]| map.eval(y), x)?,
    };
    if j.rows() != map.output_dim() || j.cols() != map.input_dim() {
        return Err(KlError::numeric(format!(
            "Jacobian is {}x{}, expected {}x{}",
            j.rows(),
            j.cols(),
            map.output_dim(),
            map.input_dim()
        )));
    }
    Ok(j)
}

fn full_row_rank(j: &Matrix) -> Result<f64> {
    let sigma = smallest_singular_value(j)?;
    let norm = spectral_norm(j)?;
    if sigma <= RANK_TOL * norm.max(1.0) {
        return Err(KlError::Assumption(format!(
            "Jacobian is rank deficient (smallest singular value {sigma:e})"
        )));
    }
    Ok(sigma)
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(n);
    let mut k = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= k)
            .all(|&p| k % p != 0)
        {
            primes.push(k);
        }
        k += 1;
    }
    primes
}

/// First `count` points of the Halton sequence that fall in the open unit ball.
fn halton_ball(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let primes = first_primes(dim);
    let radical_inverse = |mut i: u64, base: u64| {
        let (mut r, mut f) = (0.0, 1.0 / base as f64);
        while i > 0 {
            r += f * (i % base) as f64;
            i /= base;
            f /= base as f64;
        }
        r
    };
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count && i < 1_000_000 {
        let p: Vec<f64> = primes
            .iter()
            .map(|&b| 2.0 * radical_inverse(i, b) - 1.0)
            .collect();
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            out.push(p);
        }
        i += 1;
    }
    out
}

/// `α·φ` for `f ∘ F` with `F` smooth and `∇F(x̄)` of full row rank.
///
/// `α = max 1/σ_min(∇F(x))` over `x̄` and 32 Halton points of `B(x̄, eps1)`,
/// times a safety factor of 1.01. The result is a sampled estimate.
pub fn composition_rule_smooth(
    phi: &DesingFn,
    map: &dyn SmoothMap,
    xbar: &[f64],
    eps1: f64,
) -> Result<RuleResult> {
    composition_with_safety(phi, map, xbar, eps1, COMPOSITION_SAFETY)
}

/// [`composition_rule_smooth`] with an explicit safety factor (`>= 1`).
pub fn composition_with_safety(
    phi: &DesingFn,
    map: &dyn SmoothMap,
    xbar: &[f64],
    eps1: f64,
    safety: f64,
) -> Result<RuleResult> {
    if xbar.len() != map.input_dim() {
        return Err(KlError::arg(format!(
            "base point has dimension {} but the map takes {} inputs",
            xbar.len(),
            map.input_dim()
        )));
    }
    if !(eps1.is_finite() && eps1 > 0.0) {
        return Err(KlError::arg(format!(
            "radius must be a positive real, got {eps1}"
        )));
    }
    if !(safety.is_finite() && safety >= 1.0) {
        return Err(KlError::arg(format!(
            "safety factor must be at least 1, got {safety}"
        )));
    }
    if map.output_dim() > map.input_dim() {
        return Err(KlError::Assumption(format!(
            "a {}→{} map cannot have a Jacobian of full row rank",
            map.input_dim(),
            map.output_dim()
        )));
    }
    let mut sigma = full_row_rank(&jacobian_of(map, xbar)?)?;
    for p in halton_ball(xbar.len(), COMPOSITION_SAMPLES) {
        let x: Vec<f64> = xbar.iter().zip(&p).map(|(c, v)| c + eps1 * v).collect();
        sigma = sigma.min(full_row_rank(&jacobian_of(map, &x)?)?);
    }
    let estimate = 1.0 / sigma;
    let applied = estimate * safety;
    let mut r = RuleResult::new(
        phi.scale(applied)?,
        "eps = min(eps1, radius of U_1 pulled back through F), not computed",
    )
    .checked("Jacobian of full row rank at x̄ and at the sampled points")
    .unchecked("the sampled bound 1/σ_min holds on the whole ball");
    r.scale = Some(ScaleFactor {
        estimate,
        safety,
        applied,
    });
    Ok(r)
}

/// `φ/r` for `f(A·x − b)` with `r = √λ_min(A·Aᵀ) > 0`; the neighbourhood shrinks to `ε/‖A‖`.
pub fn linear_precomposition_rule(phi: &DesingFn, a: &Matrix, b: &[f64]) -> Result<RuleResult> {
    if b.len() != a.rows() {
        return Err(KlError::arg(format!(
            "offset has length {} but the matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    if a.rows() > a.cols() {
        return Err(KlError::Assumption(format!(
            "a {}x{} matrix cannot have full row rank",
            a.rows(),
            a.cols()
        )));
    }
    let r = full_row_rank(a)?;
    let norm = spectral_norm(a)?;
    let estimate = 1.0 / r;
    let mut res = RuleResult::new(
        phi.scale(estimate)?,
        &format!("eps/‖A‖ = eps/{norm}; all of ℝⁿ if U_1 = ℝᵐ"),
    )
    .checked(format!("A has full row rank (r = {r})"));
    res.scale = Some(ScaleFactor {
        estimate,
        safety: 1.0,
        applied: estimate,
    });
    Ok(res)
}

/// Whether `phi` is one of the power forms accepted by the fast paths,
/// returning its exponent.
pub fn power_exponent(phi: &DesingFn) -> Option<f64> {
    match phi.form() {
        Form::Power { c, theta } if (c * (1.0 - theta) - 1.0).abs() < 1e-12 => Some(*theta),
        _ => None,
    }
}
