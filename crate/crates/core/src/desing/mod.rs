//! Concave desingularizing functions.
//!
//! A [`DesingFn`] is a concave, strictly increasing `φ: [0, η) → [0, ∞)` with
//! `φ(0) = 0`, right-continuous at zero. Every form exposes its value and its
//! left derivative `φ′₋`; forms without a closed-form antiderivative are
//! evaluated by integrating `φ′₋` from zero.

mod quad;
mod table;
mod text;

use serde::{Deserialize, Serialize};

use crate::error::{KlError, Result};
use crate::eta::Eta;

pub use quad::{integrate, QuadOptions};
pub use table::{fit_tail, Interp, Table, Tail, TailFit};
pub use text::parse_phi_spec;

/// Largest admissible `η` for [`Form::SqrtNegInvLog`]: `e^{-3/2}`.
///
/// Beyond it the left derivative `1/(2t(-ln t)^{3/2})` stops decreasing.
pub fn sqrt_neg_inv_log_max_eta() -> f64 {
    (-1.5f64).exp()
}

/// Quadrature lower cut for composite evaluation: `max(1e-12, t·1e-9)`.
fn quadrature_floor(t: f64) -> f64 {
    1e-12f64.max(t * 1e-9)
}

// width of a quadrature panel in ln s
const PANEL_WIDTH: f64 = 1.0;
const CROSSING_BISECTIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Form {
    /// `φ(t) = c·t^{1-θ}`.
    Power {
        c: f64,
        theta: f64,
    },
    /// `φ(t) = (-1/ln t)^{1/2}`.
    SqrtNegInvLog,
    /// `φ(t) = a·(1 - e^{-t/b})^{1/2}`.
    ScaledExpSqrt {
        a: f64,
        b: f64,
    },
    /// Piece `j` is used on `(b_j, b_{j+1}]` (with `b_0 = 0`), shifted so the
    /// result is continuous.
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<DesingFn>,
    },
    Tabulated(Table),
    /// `φ(t) = factor·∫₀ᵗ max_i (φ_i)′₋(s/m) ds` with `m = arg_scale`.
    MaxDerivComposite {
        inner: Vec<DesingFn>,
        arg_scale: u32,
        factor: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesingRepr")]
pub struct DesingFn {
    eta: Eta,
    #[serde(flatten)]
    form: Form,
}

#[derive(Deserialize)]
struct DesingRepr {
    #[serde(default)]
    eta: Option<Eta>,
    #[serde(flatten)]
    form: Form,
}

impl TryFrom<DesingRepr> for DesingFn {
    type Error = KlError;

    fn try_from(r: DesingRepr) -> Result<Self> {
        let eta = r.eta.unwrap_or_else(|| default_eta(&r.form));
        DesingFn::from_parts(r.form, eta)
    }
}

fn default_eta(form: &Form) -> Eta {
    match form {
        Form::SqrtNegInvLog => Eta::new(sqrt_neg_inv_log_max_eta()).expect("positive"),
        _ => Eta::INFINITE,
    }
}

/// Grid-based membership report for the concave `Φ_η` class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub positive_deriv: bool,
    pub nonincreasing_deriv: bool,
    pub strictly_increasing: bool,
    pub vanishes_near_zero: bool,
    pub strictly_concave: bool,
    /// `φ(t_min) / φ(t_max)`.
    pub near_zero_ratio: f64,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.positive_deriv
            && self.nonincreasing_deriv
            && self.strictly_increasing
            && self.vanishes_near_zero
    }
}

/// Options for [`DesingFn::check_phi_class`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// `φ(t_min)` must not exceed this fraction of `φ(t_max)`.
    ///
    /// Loose on purpose: `√(-1/ln t)` is still 0.23 at `t = 1e-8`.
    pub zero_ratio: f64,
    /// Relative slack when comparing consecutive derivative values.
    pub rel_slack: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            zero_ratio: 0.5,
            rel_slack: 1e-12,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(KlError::arg(format!(
            "{name} must be a positive real, got {v}"
        )))
    }
}

impl DesingFn {
    pub fn from_parts(form: Form, eta: Eta) -> Result<Self> {
        let f = DesingFn { eta, form };
        f.validate()?;
        Ok(f)
    }

    /// `c·t^{1-θ}` on `[0, ∞)`.
    pub fn power(c: f64, theta: f64) -> Result<Self> {
        Self::from_parts(Form::Power { c, theta }, Eta::INFINITE)
    }

    /// `√(-1/ln t)` on `[0, e^{-3/2})`.
    pub fn sqrt_neg_inv_log() -> Self {
        Self::from_parts(Form::SqrtNegInvLog, default_eta(&Form::SqrtNegInvLog))
            .expect("default domain is valid")
    }

    pub fn scaled_exp_sqrt(a: f64, b: f64) -> Result<Self> {
        Self::from_parts(Form::ScaledExpSqrt { a, b }, Eta::INFINITE)
    }

    pub fn piecewise(breakpoints: Vec<f64>, pieces: Vec<DesingFn>, eta: Eta) -> Result<Self> {
        Self::from_parts(
            Form::Piecewise {
                breakpoints,
                pieces,
            },
            eta,
        )
    }

    pub fn tabulated(table: Table, eta: Eta) -> Result<Self> {
        Self::from_parts(Form::Tabulated(table), eta)
    }

    pub fn max_deriv_composite(
        inner: Vec<DesingFn>,
        arg_scale: u32,
        factor: f64,
        eta: Eta,
    ) -> Result<Self> {
        Self::from_parts(
            Form::MaxDerivComposite {
                inner,
                arg_scale,
                factor,
            },
            eta,
        )
    }

    /// Same function restricted (or extended) to `[0, eta)`.
    pub fn with_eta(&self, eta: Eta) -> Result<Self> {
        Self::from_parts(self.form.clone(), eta)
    }

    pub fn eta(&self) -> Eta {
        self.eta
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    fn validate(&self) -> Result<()> {
        let eta = self.eta.get();
        match &self.form {
            Form::Power { c, theta } => {
                check_positive("c", *c)?;
                if !(theta.is_finite() && (0.0..1.0).contains(theta)) {
                    return Err(KlError::arg(format!(
                        "theta must lie in [0, 1), got {theta}"
                    )));
                }
            }
            Form::SqrtNegInvLog => {
                if eta > sqrt_neg_inv_log_max_eta() * (1.0 + 1e-12) {
                    return Err(KlError::arg(format!(
                        "sqrt(-1/ln t) is concave only up to eta = exp(-3/2); got eta = {eta}"
                    )));
                }
            }
            Form::ScaledExpSqrt { a, b } => {
                check_positive("a", *a)?;
                check_positive("b", *b)?;
            }
            Form::Piecewise {
                breakpoints,
                pieces,
            } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(KlError::arg(format!(
                        "{} breakpoints need {} pieces, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        pieces.len()
                    )));
                }
                for (j, &b) in breakpoints.iter().enumerate() {
                    check_positive("breakpoint", b)?;
                    if j > 0 && b <= breakpoints[j - 1] {
                        return Err(KlError::arg("breakpoints must be strictly increasing"));
                    }
                    if b >= eta {
                        return Err(KlError::arg(format!(
                            "breakpoint {b} is not below eta {eta}"
                        )));
                    }
                }
                for (j, piece) in pieces.iter().enumerate() {
                    let upper = breakpoints.get(j).copied();
                    let fits = match upper {
                        Some(b) => b < piece.eta.get(),
                        None => eta <= piece.eta.get(),
                    };
                    if !fits {
                        return Err(KlError::arg(format!(
                            "piece {j} (eta = {}) does not cover its segment",
                            piece.eta
                        )));
                    }
                }
                for (j, &b) in breakpoints.iter().enumerate() {
                    let left = pieces[j].left_deriv(b)?;
                    let right = pieces[j + 1].left_deriv(b)?;
                    if right > left * (1.0 + 1e-12) {
                        return Err(KlError::arg(format!(
                            "piecewise function is not concave at breakpoint {b}: slope {left} then {right}"
                        )));
                    }
                }
            }
            Form::Tabulated(table) => {
                if table.last_node() >= eta {
                    return Err(KlError::arg(format!(
                        "table node {} is not below eta {eta}",
                        table.last_node()
                    )));
                }
            }
            Form::MaxDerivComposite {
                inner,
                arg_scale,
                factor,
            } => {
                if inner.is_empty() {
                    return Err(KlError::arg("composite needs at least one inner function"));
                }
                if *arg_scale == 0 {
                    return Err(KlError::arg("arg_scale must be a positive integer"));
                }
                check_positive("factor", *factor)?;
                let m = *arg_scale as f64;
                for (i, f) in inner.iter().enumerate() {
                    if eta > m * f.eta.get() {
                        return Err(KlError::arg(format!(
                            "composite eta {eta} exceeds m·eta_{i} = {}",
                            m * f.eta.get()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_value_domain(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t < self.eta.get() {
            Ok(())
        } else {
            Err(KlError::Domain {
                t,
                eta: self.eta.get(),
            })
        }
    }

    fn check_deriv_domain(&self, t: f64) -> Result<()> {
        if self.eta.contains_open(t) {
            Ok(())
        } else {
            Err(KlError::Domain {
                t,
                eta: self.eta.get(),
            })
        }
    }

    /// `φ(t)` for `0 <= t < η`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_value_domain(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match &self.form {
            Form::Power { c, theta } => Ok(c * t.powf(1.0 - theta)),
            Form::SqrtNegInvLog => Ok(1.0 / (-t.ln()).sqrt()),
            Form::ScaledExpSqrt { a, b } => Ok(a * (-(-t / b).exp_m1()).sqrt()),
            Form::Piecewise {
                breakpoints,
                pieces,
            } => {
                let seg = breakpoints.partition_point(|&b| b < t);
                let mut value = 0.0;
                let mut start = 0.0;
                for (j, piece) in pieces.iter().enumerate().take(seg) {
                    let end = breakpoints[j];
                    value += piece.eval(end)? - piece.eval(start)?;
                    start = end;
                }
                let piece = &pieces[seg];
                Ok(value + piece.eval(t)? - piece.eval(start)?)
            }
            Form::Tabulated(table) => Ok(table.integral(t)),
            Form::MaxDerivComposite {
                inner,
                arg_scale,
                factor,
            } => composite_eval(inner, *arg_scale as f64, *factor, t),
        }
    }

    /// Left derivative `φ′₋(t)` for `0 < t < η`.
    pub fn left_deriv(&self, t: f64) -> Result<f64> {
        self.check_deriv_domain(t)?;
        match &self.form {
            Form::Power { c, theta } => {
                if *theta == 0.0 {
                    Ok(*c)
                } else {
                    Ok(c * (1.0 - theta) * t.powf(-theta))
                }
            }
            Form::SqrtNegInvLog => {
                let l = -t.ln();
                Ok(0.5 / (t * l * l.sqrt()))
            }
            Form::ScaledExpSqrt { a, b } => {
                let x = t / b;
                Ok(a * (-x).exp() / (2.0 * b * (-(-x).exp_m1()).sqrt()))
            }
            Form::Piecewise {
                breakpoints,
                pieces,
            } => {
                let seg = breakpoints.partition_point(|&b| b < t);
                pieces[seg].left_deriv(t)
            }
            Form::Tabulated(table) => Ok(table.deriv(t)),
            Form::MaxDerivComposite {
                inner,
                arg_scale,
                factor,
            } => {
                let (_, d) = argmax_deriv(inner, t / *arg_scale as f64)?;
                Ok(factor * d)
            }
        }
    }

    /// Whether `eval(t)` uses a tabulated derivative outside its node range
    /// with a constant continuation.
    pub fn extrapolates(&self, t: f64) -> bool {
        match &self.form {
            Form::Tabulated(table) => table.extrapolates(t),
            Form::Piecewise {
                breakpoints,
                pieces,
            } => pieces[breakpoints.partition_point(|&b| b < t)].extrapolates(t),
            Form::MaxDerivComposite {
                inner, arg_scale, ..
            } => {
                let m = *arg_scale as f64;
                let lo = quadrature_floor(t) / m;
                inner
                    .iter()
                    .any(|f| f.extrapolates(t / m) || f.extrapolates(lo))
            }
            _ => false,
        }
    }

    /// Points in `(lo, hi)` where `φ′₋` may jump or kink.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_kinks(lo, hi, &mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_kinks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match &self.form {
            Form::Tabulated(table) => {
                out.extend(table.s_grid().iter().copied().filter(|&s| s > lo && s < hi))
            }
            Form::Piecewise {
                breakpoints,
                pieces,
            } => {
                out.extend(breakpoints.iter().copied().filter(|&s| s > lo && s < hi));
                for p in pieces {
                    p.collect_kinks(lo, hi, out);
                }
            }
            Form::MaxDerivComposite {
                inner, arg_scale, ..
            } => {
                let m = *arg_scale as f64;
                let start = out.len();
                for f in inner {
                    f.collect_kinks(lo / m, hi / m, out);
                }
                for v in &mut out[start..] {
                    *v *= m;
                }
            }
            _ => {}
        }
    }

    /// `c·φ` on the same domain.
    pub fn scale(&self, c: f64) -> Result<DesingFn> {
        check_positive("scale factor", c)?;
        if c == 1.0 {
            return Ok(self.clone());
        }
        let form = match &self.form {
            Form::Power { c: k, theta } => Form::Power {
                c: k * c,
                theta: *theta,
            },
            Form::ScaledExpSqrt { a, b } => Form::ScaledExpSqrt { a: a * c, b: *b },
            Form::Tabulated(table) => Form::Tabulated(table.scaled(c)?),
            Form::Piecewise {
                breakpoints,
                pieces,
            } => Form::Piecewise {
                breakpoints: breakpoints.clone(),
                pieces: pieces.iter().map(|p| p.scale(c)).collect::<Result<_>>()?,
            },
            Form::MaxDerivComposite {
                inner,
                arg_scale,
                factor,
            } => Form::MaxDerivComposite {
                inner: inner.clone(),
                arg_scale: *arg_scale,
                factor: factor * c,
            },
            Form::SqrtNegInvLog => Form::MaxDerivComposite {
                inner: vec![self.clone()],
                arg_scale: 1,
                factor: c,
            },
        };
        DesingFn::from_parts(form, self.eta)
    }

    /// Checks the `Φ_η` conditions plus concavity on a sorted grid in `(0, η)`.
    pub fn check_phi_class(&self, grid: &[f64]) -> Result<ValidityReport> {
        self.check_phi_class_with(grid, CheckOptions::default())
    }

    pub fn check_phi_class_with(&self, grid: &[f64], opts: CheckOptions) -> Result<ValidityReport> {
        validate_grid(grid, self.eta)?;
        let d: Vec<f64> = grid
            .iter()
            .map(|&t| self.left_deriv(t))
            .collect::<Result<_>>()?;
        let v: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
        let positive_deriv = d.iter().all(|x| x.is_finite() && *x > 0.0);
        let nonincreasing_deriv = d.windows(2).all(|w| w[1] <= w[0] * (1.0 + opts.rel_slack));
        let strictly_concave = d.windows(2).all(|w| w[1] < w[0]);
        let strictly_increasing = v[0] > 0.0 && v.windows(2).all(|w| w[1] > w[0]);
        let near_zero_ratio = v[0] / v[v.len() - 1];
        let vanishes_near_zero =
            self.eval(0.0)? == 0.0 && (grid.len() == 1 || near_zero_ratio <= opts.zero_ratio);
        Ok(ValidityReport {
            positive_deriv,
            nonincreasing_deriv,
            strictly_increasing,
            vanishes_near_zero,
            strictly_concave,
            near_zero_ratio,
        })
    }

    /// Tabulates `φ′₋` on `s_grid` as a log-log interpolated table with a fitted tail.
    pub fn materialize(&self, s_grid: &[f64]) -> Result<DesingFn> {
        validate_grid(s_grid, self.eta)?;
        let mut d: Vec<f64> = s_grid
            .iter()
            .map(|&s| self.left_deriv(s))
            .collect::<Result<_>>()?;
        for j in 1..d.len() {
            if d[j] > d[j - 1] {
                if d[j] > d[j - 1] * (1.0 + 1e-12) {
                    return Err(KlError::arg(format!(
                        "left derivative increases at s = {}",
                        s_grid[j]
                    )));
                }
                // rounding in pow/exp
                d[j] = d[j - 1];
            }
        }
        let tail = fit_tail(s_grid, &d, TailFit::Auto);
        let table = Table::new(s_grid.to_vec(), d, Interp::LogLinear, tail)?;
        DesingFn::tabulated(table, self.eta)
    }

    /// Serializes to the JSON document format.
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("DesingFn always serializes")
    }

    pub fn from_document(doc: &str) -> Result<DesingFn> {
        serde_json::from_str(doc).map_err(|e| KlError::parse(e.line(), e.to_string()))
    }
}

pub(crate) fn validate_grid(grid: &[f64], eta: Eta) -> Result<()> {
    if grid.is_empty() {
        return Err(KlError::arg("grid is empty"));
    }
    for (j, &t) in grid.iter().enumerate() {
        if !eta.contains_open(t) {
            return Err(KlError::Domain { t, eta: eta.get() });
        }
        if j > 0 && t <= grid[j - 1] {
            return Err(KlError::arg(format!(
                "grid is not strictly increasing at index {j}"
            )));
        }
    }
    Ok(())
}

/// Index and value of the largest left derivative (first index wins ties).
fn argmax_deriv(inner: &[DesingFn], s: f64) -> Result<(usize, f64)> {
    let mut best = (0, inner[0].left_deriv(s)?);
    for (i, f) in inner.iter().enumerate().skip(1) {
        let d = f.left_deriv(s)?;
        if d > best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

fn composite_eval(inner: &[DesingFn], m: f64, factor: f64, t: f64) -> Result<f64> {
    if inner.len() == 1 {
        return Ok(factor * m * inner[0].eval(t / m)?);
    }
    let floor = quadrature_floor(t);
    // ∫₀^floor max_i ≥ max_i ∫₀^floor, with equality when one branch dominates near 0
    let mut tail: f64 = 0.0;
    let cut = floor.min(t);
    for f in inner {
        tail = tail.max(f.eval(cut / m)?);
    }
    let tail = factor * m * tail;
    if t <= floor {
        return Ok(tail);
    }

    let integrand = |u: f64| -> f64 {
        let s = u.exp().min(t);
        match argmax_deriv(inner, s / m) {
            Ok((_, d)) => s * d,
            Err(_) => f64::NAN,
        }
    };
    let argmax_at = |u: f64| -> Result<usize> { Ok(argmax_deriv(inner, u.exp().min(t) / m)?.0) };

    let (u0, u1) = (floor.ln(), t.ln());
    let mut edges: Vec<f64> = Vec::new();
    let panels = ((u1 - u0) / PANEL_WIDTH).ceil().max(1.0) as usize;
    for k in 0..=panels {
        edges.push(u0 + (u1 - u0) * k as f64 / panels as f64);
    }
    for f in inner {
        edges.extend(f.kinks(floor / m, t / m).into_iter().map(|s| (s * m).ln()));
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let opts = QuadOptions::default();
    let mut body = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (ia, ib) = (argmax_at(a)?, argmax_at(b)?);
        let pieces: Vec<(f64, f64)> = if ia != ib {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..CROSSING_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if argmax_at(mid)? == ia {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let c = 0.5 * (lo + hi);
            vec![(a, c), (c, b)]
        } else {
            vec![(a, b)]
        };
        for (pa, pb) in pieces {
            body += integrate(integrand, pa, pb, opts).map_err(|e| match e {
                KlError::Numeric { message, partial } => KlError::Numeric {
                    message,
                    partial: tail + factor * (body + partial),
                },
                other => other,
            })?;
        }
    }
    Ok(tail + factor * body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        let p = DesingFn::power(2.0, 0.5).unwrap();
        assert!(close(p.eval(0.25).unwrap(), 1.0, 1e-15));
        let l = DesingFn::sqrt_neg_inv_log();
        assert!(close(l.eval((-4.0f64).exp()).unwrap(), 0.5, 1e-15));
        let e = DesingFn::scaled_exp_sqrt(2.0, 2.0).unwrap();
        let expected = 2.0 * (1.0 - (-1.0f64).exp()).sqrt();
        assert!(close(e.eval(2.0).unwrap(), expected, 1e-15));
        assert!((e.eval(2.0).unwrap() - 1.5900).abs() < 5e-4);
    }

    #[test]
    fn eval_at_zero_is_exact_zero() {
        for f in [
            DesingFn::power(3.0, 0.2).unwrap(),
            DesingFn::sqrt_neg_inv_log(),
            DesingFn::scaled_exp_sqrt(1.0, 1.0).unwrap(),
        ] {
            assert_eq!(f.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn domain_errors() {
        let l = DesingFn::sqrt_neg_inv_log();
        assert!(matches!(l.eval(0.5), Err(KlError::Domain { .. })));
        assert!(matches!(l.eval(-1e-3), Err(KlError::Domain { .. })));
        assert!(matches!(l.left_deriv(0.0), Err(KlError::Domain { .. })));
        assert!(l.eval(f64::NAN).is_err());
        let p = DesingFn::power(1.0, 0.5)
            .unwrap()
            .with_eta(Eta::new(1.0).unwrap())
            .unwrap();
        assert!(p.eval(1.0).is_err());
    }

    #[test]
    fn left_deriv_examples() {
        let p = DesingFn::power(2.0, 0.5).unwrap();
        assert!(close(p.left_deriv(0.04).unwrap(), 5.0, 1e-14));
        let l = DesingFn::sqrt_neg_inv_log();
        let e4 = 4.0f64.exp();
        assert!(close(
            l.left_deriv((-4.0f64).exp()).unwrap(),
            e4 / 16.0,
            1e-14
        ));
        let lin = DesingFn::power(1.0, 0.0).unwrap();
        let comp = DesingFn::max_deriv_composite(vec![lin], 1, 1.0, Eta::INFINITE).unwrap();
        for t in [1e-9, 0.3, 17.0] {
            assert_eq!(comp.left_deriv(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(DesingFn::power(0.0, 0.5).is_err());
        assert!(DesingFn::power(1.0, 1.0).is_err());
        assert!(DesingFn::power(1.0, -0.1).is_err());
        assert!(DesingFn::scaled_exp_sqrt(1.0, f64::INFINITY).is_err());
        assert!(DesingFn::sqrt_neg_inv_log()
            .with_eta(Eta::new(0.5).unwrap())
            .is_err());
        assert!(DesingFn::max_deriv_composite(vec![], 1, 1.0, Eta::INFINITE).is_err());
        let l = DesingFn::sqrt_neg_inv_log();
        assert!(DesingFn::max_deriv_composite(vec![l.clone()], 1, 1.0, Eta::INFINITE).is_err());
        assert!(DesingFn::max_deriv_composite(vec![l], 2, 1.0, Eta::new(0.4).unwrap()).is_ok());
    }

    #[test]
    fn check_class_examples() {
        let grid = log_grid(1e-8, 0.999, 128);
        let r = DesingFn::power(1.0, 0.5)
            .unwrap()
            .check_phi_class(&grid)
            .unwrap();
        assert!(r.passed() && r.strictly_concave, "{r:?}");
        let r = DesingFn::power(1.0, 0.0)
            .unwrap()
            .check_phi_class(&grid)
            .unwrap();
        assert!(r.passed() && !r.strictly_concave, "{r:?}");
        assert!(DesingFn::power(1.0, 0.0)
            .unwrap()
            .check_phi_class(&[])
            .is_err());
    }

    #[test]
    fn scale_examples() {
        let s = DesingFn::power(1.0, 0.5).unwrap().scale(3.0).unwrap();
        assert_eq!(s.form(), &Form::Power { c: 3.0, theta: 0.5 });
        let l = DesingFn::sqrt_neg_inv_log();
        assert_eq!(l.scale(1.0).unwrap(), l);
        let s = l.scale(2.0).unwrap();
        assert!(close(s.eval((-4.0f64).exp()).unwrap(), 1.0, 1e-14));
        assert_eq!(s.eta(), l.eta());
        assert!(l.scale(0.0).is_err());
        assert!(l.scale(-2.0).is_err());
    }

    #[test]
    fn scale_round_trip() {
        let fns = [
            DesingFn::sqrt_neg_inv_log(),
            DesingFn::scaled_exp_sqrt(1.5, 0.7).unwrap(),
            DesingFn::power(0.3, 0.75).unwrap(),
        ];
        let r = 2.0f64.sqrt();
        for f in &fns {
            let g = f.scale(1.0 / r).unwrap().scale(r).unwrap();
            for t in log_grid(1e-6, 0.2, 17) {
                assert!(close(g.eval(t).unwrap(), f.eval(t).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn materialize_matches_closed_form_at_midpoints() {
        let f = DesingFn::power(1.0, 0.5).unwrap();
        let grid = log_grid(1e-8, 1.0, 64);
        let m = f.materialize(&grid).unwrap();
        for w in grid.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (a, b) = (m.eval(t).unwrap(), f.eval(t).unwrap());
            assert!(close(a, b, 0.01), "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn materialize_edge_cases() {
        let f = DesingFn::power(1.0, 0.5)
            .unwrap()
            .with_eta(Eta::new(1.0).unwrap())
            .unwrap();
        let one = f.materialize(&[0.25]).unwrap();
        assert!(one.eval(0.5).unwrap() > one.eval(0.25).unwrap());
        assert!(matches!(
            f.materialize(&[0.5, 1.0]),
            Err(KlError::Domain { .. })
        ));
        assert!(f.materialize(&[]).is_err());
    }

    #[test]
    fn piecewise_example_b2_shape() {
        // √(2t) up to 1/2, then t/2 + 3/4
        let f = DesingFn::piecewise(
            vec![0.5],
            vec![
                DesingFn::power(2f64.sqrt(), 0.5).unwrap(),
                DesingFn::power(0.5, 0.0).unwrap(),
            ],
            Eta::INFINITE,
        )
        .unwrap();
        assert!(close(f.eval(0.5).unwrap(), 1.0, 1e-15));
        assert!(close(f.eval(2.0).unwrap(), 1.75, 1e-15));
        assert!(close(f.eval(0.08).unwrap(), 0.4, 1e-15));
        assert!(close(f.left_deriv(0.5).unwrap(), 1.0, 1e-15));
        assert_eq!(f.left_deriv(0.6).unwrap(), 0.5);
    }

    #[test]
    fn piecewise_rejects_convex_join() {
        let r = DesingFn::piecewise(
            vec![0.5],
            vec![
                DesingFn::power(0.5, 0.0).unwrap(),
                DesingFn::power(2.0, 0.0).unwrap(),
            ],
            Eta::INFINITE,
        );
        assert!(r.is_err());
    }

    #[test]
    fn composite_crossing_is_located() {
        // max(1, 2·s^{-1/2}·1/2... ) : d = max(s^{-1/2}, 1) crosses at s = 1
        let f = DesingFn::max_deriv_composite(
            vec![
                DesingFn::power(2.0, 0.5).unwrap(),
                DesingFn::power(1.0, 0.0).unwrap(),
            ],
            1,
            1.0,
            Eta::INFINITE,
        )
        .unwrap();
        // ∫₀^1 s^{-1/2} + ∫₁^3 1 = 2 + 2
        assert!(close(f.eval(3.0).unwrap(), 4.0, 1e-10));
        assert!(close(f.eval(0.25).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn composite_bounded_by_sum_of_inner() {
        let inner = vec![
            DesingFn::power(1.0, 0.3).unwrap(),
            DesingFn::scaled_exp_sqrt(1.0, 0.5).unwrap(),
        ];
        let f = DesingFn::max_deriv_composite(inner.clone(), 2, 1.5, Eta::INFINITE).unwrap();
        for t in log_grid(1e-9, 10.0, 25) {
            let bound: f64 = inner
                .iter()
                .map(|g| 1.5 * 2.0 * g.eval(t / 2.0).unwrap())
                .sum();
            assert!(f.eval(t).unwrap() <= bound * (1.0 + 1e-9));
        }
        assert!(f.eval(1e-15).unwrap() < 1e-4);
    }

    #[test]
    fn document_round_trip_all_forms() {
        let table =
            Table::new(vec![0.1, 0.2], vec![2.0, 1.0], Interp::Step, Tail::Constant).unwrap();
        let fns = vec![
            DesingFn::power(0.1 + 0.2, 0.5).unwrap(),
            DesingFn::sqrt_neg_inv_log(),
            DesingFn::scaled_exp_sqrt(2.0, 2.0).unwrap(),
            DesingFn::tabulated(table, Eta::new(0.7).unwrap()).unwrap(),
            DesingFn::piecewise(
                vec![0.5],
                vec![
                    DesingFn::power(2f64.sqrt(), 0.5).unwrap(),
                    DesingFn::power(0.5, 0.0).unwrap(),
                ],
                Eta::INFINITE,
            )
            .unwrap(),
            DesingFn::max_deriv_composite(
                vec![
                    DesingFn::sqrt_neg_inv_log(),
                    DesingFn::power(1.0, 0.0).unwrap(),
                ],
                1,
                1.0 / 3.0,
                DesingFn::sqrt_neg_inv_log().eta(),
            )
            .unwrap(),
        ];
        for f in fns {
            let doc = f.to_document();
            let back = DesingFn::from_document(&doc).unwrap();
            assert_eq!(back, f, "{doc}");
            assert_eq!(back.to_document(), doc);
        }
    }

    #[test]
    fn document_defaults_and_rejections() {
        let f = DesingFn::from_document(r#"{"form":"sqrt_neg_inv_log"}"#).unwrap();
        assert_eq!(f.eta().get(), sqrt_neg_inv_log_max_eta());
        let f = DesingFn::from_document(r#"{"form":"power","c":1,"theta":0.5}"#).unwrap();
        assert!(!f.eta().is_finite());
        assert!(DesingFn::from_document(r#"{"form":"power","c":-1,"theta":0.5}"#).is_err());
        assert!(DesingFn::from_document(
            r#"{"form":"tabulated","s_grid":[0.1,0.2],"d_values":[1.0,2.0]}"#
        )
        .is_err());
        assert!(DesingFn::from_document("{").is_err());
    }
}
