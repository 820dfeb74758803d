//! Worked examples with analytic values, subgradient distances and, where
//! known, reference desingularizing functions.

use std::sync::Arc;

use crate::desing::DesingFn;
use crate::eta::Eta;
use crate::oracle::{AnalyticOracle, FnOracle};

pub struct CorpusEntry {
    pub id: &'static str,
    pub oracle: Arc<dyn FnOracle>,
    pub xbar: Vec<f64>,
    pub eps: f64,
    pub eta: Eta,
    pub reference_phi: Option<DesingFn>,
    /// `reference_phi` is the exact modulus, not just some desingularizing function.
    pub reference_exact: bool,
    /// Where the example comes from, in words.
    pub provenance: &'static str,
    /// Summands or branches, for entries built from several functions.
    pub components: Vec<Arc<dyn FnOracle>>,
    /// Reference functions of `components`, when known.
    pub component_phis: Vec<DesingFn>,
}

impl std::fmt::Debug for CorpusEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorpusEntry")
            .field("id", &self.id)
            .field("xbar", &self.xbar)
            .field("eps", &self.eps)
            .field("eta", &self.eta)
            .field("reference_phi", &self.reference_phi)
            .field("reference_exact", &self.reference_exact)
            .field("components", &self.components.len())
            .finish()
    }
}

fn exp_eta() -> Eta {
    Eta::new((-1.5f64).exp()).expect("positive")
}

fn sqrt_two_thirds() -> f64 {
    (2.0f64 / 3.0).sqrt()
}

/// `e^{-1/x²}` with `f(0) = 0`.
pub fn exp_neg_inv_sq() -> AnalyticOracle {
    let value = |x: &[f64]| {
        if x[0] == 0.0 {
            0.0
        } else {
            (-1.0 / (x[0] * x[0])).exp()
        }
    };
    let grad = move |x: &[f64]| {
        let t = x[0];
        if t == 0.0 {
            0.0
        } else {
            2.0 / (t * t * t) * (-1.0 / (t * t)).exp()
        }
    };
    AnalyticOracle::new(1, value, move |x| grad(x).abs()).with_sampler(move |x| vec![vec![grad(x)]])
}

/// `|x|`; `∂f(0) = [-1, 1]`.
pub fn abs_val() -> AnalyticOracle {
    AnalyticOracle::new(1, |x| x[0].abs(), |x| if x[0] == 0.0 { 0.0 } else { 1.0 }).with_sampler(
        |x| {
            if x[0] == 0.0 {
                vec![vec![-1.0], vec![0.0], vec![1.0]]
            } else {
                vec![vec![x[0].signum()]]
            }
        },
    )
}

/// `min(e^{-1/x²}, |x|)`, differentiated through the active branch.
pub fn min_exp_abs() -> AnalyticOracle {
    let (f, g) = (exp_neg_inv_sq(), abs_val());
    let (f2, g2) = (f.clone(), g.clone());
    AnalyticOracle::new(
        1,
        move |x| f.value(x).min(g.value(x)),
        move |x| {
            let (a, b) = (f2.value(x), g2.value(x));
            if a < b {
                f2.subgrad_dist(x)
            } else if b < a {
                g2.subgrad_dist(x)
            } else {
                f2.subgrad_dist(x).min(g2.subgrad_dist(x))
            }
        },
    )
}

/// `x²/2` for `|x| ≤ ρ`, `2ρ|x| − 3ρ²/2` beyond.
pub fn huber_like(rho: f64) -> AnalyticOracle {
    let value = move |x: &[f64]| {
        let a = x[0].abs();
        if a <= rho {
            a * a / 2.0
        } else {
            2.0 * rho * a - 1.5 * rho * rho
        }
    };
    let grad = move |x: &[f64]| {
        let a = x[0].abs();
        x[0].signum() * if a <= rho { a } else { 2.0 * rho }
    };
    AnalyticOracle::new(1, value, move |x| grad(x).abs()).with_sampler(move |x| vec![vec![grad(x)]])
}

/// Exact modulus of [`huber_like`]: `√(2t)` up to `ρ²/2`, then `t/(2ρ) + 3ρ/4`.
pub fn huber_like_modulus(rho: f64) -> DesingFn {
    let first = DesingFn::power(2f64.sqrt(), 0.5).expect("valid");
    let second = DesingFn::power(1.0 / (2.0 * rho), 0.0).expect("valid");
    DesingFn::piecewise(vec![rho * rho / 2.0], vec![first, second], Eta::INFINITE).expect("valid")
}

/// `−ln(1 − x²)` on `(−1, 1)`.
pub fn neg_log_factor() -> AnalyticOracle {
    let value = |x: &[f64]| {
        let t = x[0];
        if t.abs() >= 1.0 {
            f64::INFINITY
        } else {
            -(-t * t).ln_1p()
        }
    };
    let grad = |x: &[f64]| 2.0 * x[0] / (1.0 - x[0] * x[0]);
    AnalyticOracle::new(1, value, move |x| {
        if x[0].abs() >= 1.0 {
            f64::INFINITY
        } else {
            grad(x).abs()
        }
    })
    .with_sampler(move |x| {
        if x[0].abs() >= 1.0 {
            vec![]
        } else {
            vec![vec![grad(x)]]
        }
    })
}

/// `−ln(1 − x₁²) − ln(1 − x₂²)` on `(−1, 1)²`.
pub fn neg_log_separable() -> AnalyticOracle {
    let inside = |x: &[f64]| x.iter().all(|t| t.abs() < 1.0);
    let grad = |x: &[f64]| -> Vec<f64> { x.iter().map(|t| 2.0 * t / (1.0 - t * t)).collect() };
    AnalyticOracle::new(
        2,
        move |x| {
            if inside(x) {
                x.iter().map(|t| -(-t * t).ln_1p()).sum()
            } else {
                f64::INFINITY
            }
        },
        move |x| {
            if inside(x) {
                grad(x).iter().map(|g| g * g).sum::<f64>().sqrt()
            } else {
                f64::INFINITY
            }
        },
    )
    .with_sampler(move |x| if inside(x) { vec![grad(x)] } else { vec![] })
    .with_domain_hint(crate::oracle::DomainHint::Box {
        lower: vec![-1.0, -1.0],
        upper: vec![1.0, 1.0],
    })
}

/// `f(x) = a·x`.
pub fn linear(a: f64) -> AnalyticOracle {
    AnalyticOracle::smooth(1, move |x| a * x[0], move |_| vec![a])
}

/// `1 − x²` for `x ≠ 0`, `0` at `0`.
pub fn demo_f() -> AnalyticOracle {
    AnalyticOracle::value_only(1, |x| if x[0] == 0.0 { 0.0 } else { 1.0 - x[0] * x[0] })
}

/// `x²/2` for `x ≠ 1`, `0` at `1`.
pub fn demo_g() -> AnalyticOracle {
    AnalyticOracle::value_only(1, |x| if x[0] == 1.0 { 0.0 } else { x[0] * x[0] / 2.0 })
}

/// `min(demo_f, demo_g)`: continuous although both pieces are not.
pub fn min_continuity_demo() -> AnalyticOracle {
    let (f, g) = (demo_f(), demo_g());
    AnalyticOracle::value_only(1, move |x| f.value(x).min(g.value(x)))
}

/// All worked examples.
pub fn corpus() -> Vec<CorpusEntry> {
    let sqrt_log = DesingFn::sqrt_neg_inv_log();
    let exp_sqrt_1 = DesingFn::scaled_exp_sqrt(1.0, 1.0).expect("valid");
    vec![
        CorpusEntry {
            id: "exp_neg_inv_sq",
            oracle: Arc::new(exp_neg_inv_sq()),
            xbar: vec![0.0],
            eps: sqrt_two_thirds(),
            eta: exp_eta(),
            reference_phi: Some(sqrt_log.clone()),
            reference_exact: true,
            provenance: "flat function exp(-1/x^2): exact modulus sqrt(-1/ln t); no power function c·t^(1-θ) desingularizes it",
            components: vec![],
            component_phis: vec![],
        },
        CorpusEntry {
            id: "abs_val",
            oracle: Arc::new(abs_val()),
            xbar: vec![0.0],
            eps: 1.0,
            eta: Eta::INFINITE,
            reference_phi: Some(DesingFn::power(1.0, 0.0).expect("valid")),
            reference_exact: true,
            provenance: "absolute value |x| at 0: sharp minimum, φ(t) = t",
            components: vec![],
            component_phis: vec![],
        },
        CorpusEntry {
            id: "min_exp_abs",
            oracle: Arc::new(min_exp_abs()),
            xbar: vec![0.0],
            eps: sqrt_two_thirds(),
            eta: exp_eta(),
            reference_phi: Some(sqrt_log.clone()),
            reference_exact: true,
            provenance: "min rule: min(exp(-1/x^2), |x|) with φ = sqrt(-1/ln t), the rule's max of derivatives reproducing the exact modulus",
            components: vec![Arc::new(exp_neg_inv_sq()), Arc::new(abs_val())],
            component_phis: vec![sqrt_log, DesingFn::power(1.0, 0.0).expect("valid")],
        },
        CorpusEntry {
            id: "huber_like",
            oracle: Arc::new(huber_like(1.0)),
            xbar: vec![0.0],
            eps: 10.0,
            eta: Eta::INFINITE,
            reference_phi: Some(huber_like_modulus(1.0)),
            reference_exact: true,
            provenance: "Huber-like function with ρ = 1: nondifferentiable exact modulus sqrt(2t), then t/(2ρ) + 3ρ/4",
            components: vec![],
            component_phis: vec![],
        },
        CorpusEntry {
            id: "neg_log_separable",
            oracle: Arc::new(neg_log_separable()),
            xbar: vec![0.0, 0.0],
            eps: 1.0,
            eta: Eta::INFINITE,
            reference_phi: Some(DesingFn::scaled_exp_sqrt(2.0, 2.0).expect("valid")),
            reference_exact: false,
            provenance: "separable sum -ln(1-x1^2) - ln(1-x2^2): φ(t) = 2·sqrt(1 - exp(-t/2)) from factors sqrt(1 - exp(-t))",
            components: vec![Arc::new(neg_log_factor()), Arc::new(neg_log_factor())],
            component_phis: vec![exp_sqrt_1.clone(), exp_sqrt_1.clone()],
        },
        CorpusEntry {
            id: "neg_log_factor",
            oracle: Arc::new(neg_log_factor()),
            xbar: vec![0.0],
            eps: 1.0,
            eta: Eta::INFINITE,
            reference_phi: Some(exp_sqrt_1),
            reference_exact: true,
            provenance: "one factor -ln(1-x^2) of the separable example: exact modulus sqrt(1 - exp(-t))",
            components: vec![],
            component_phis: vec![],
        },
        CorpusEntry {
            id: "linear_pair",
            oracle: Arc::new(linear(0.5)),
            xbar: vec![0.0],
            eps: 1.0,
            eta: Eta::INFINITE,
            reference_phi: None,
            reference_exact: false,
            provenance: "f1(x) = x, f2(x) = -x/2: |f1' + f2'| = 1/3 (|f1'| + |f2'|), a regularity constant of 1/3 without disjoint subdifferentials",
            components: vec![Arc::new(linear(1.0)), Arc::new(linear(-0.5))],
            component_phis: vec![],
        },
        CorpusEntry {
            id: "min_continuity_demo",
            oracle: Arc::new(min_continuity_demo()),
            xbar: vec![0.0],
            eps: 1.0,
            eta: Eta::INFINITE,
            reference_phi: None,
            reference_exact: false,
            provenance: "min of the discontinuous 1-x^2 (0 at 0) and x^2/2 (0 at 1): continuous, x^2/2 on |x| <= sqrt(2/3), 1-x^2 beyond",
            components: vec![Arc::new(demo_f()), Arc::new(demo_g())],
            component_phis: vec![],
        },
    ]
}

/// Looks up an entry by id; `example-b2` is accepted for `huber_like`.
pub fn find(id: &str) -> Option<CorpusEntry> {
    let id = match id {
        "example-b2" => "huber_like",
        other => other,
    };
    corpus().into_iter().find(|e| e.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_present() {
        let ids: Vec<&str> = corpus().iter().map(|e| e.id).collect();
        for want in [
            "exp_neg_inv_sq",
            "abs_val",
            "min_exp_abs",
            "huber_like",
            "neg_log_separable",
            "linear_pair",
            "min_continuity_demo",
        ] {
            assert!(ids.contains(&want), "{want}");
        }
        assert!(find("example-b2").is_some());
        assert!(find("nope").is_none());
    }

    #[test]
    fn point_values() {
        assert!((exp_neg_inv_sq().value(&[0.5]) - (-4.0f64).exp()).abs() < 1e-17);
        assert!((exp_neg_inv_sq().value(&[0.5]) - 0.0183156).abs() < 1e-7);
        assert_eq!(huber_like(1.0).subgrad_dist(&[2.0]), 2.0);
        assert_eq!(huber_like(1.0).value(&[2.0]), 2.5);
        assert!(neg_log_separable().value(&[1.0, 0.0]).is_infinite());
    }

    #[test]
    fn min_demo_is_continuous_piecewise() {
        let h = min_continuity_demo();
        let c = (2.0f64 / 3.0).sqrt();
        for x in [-1.5, -0.9, -c, -0.3, 0.0, 0.4, 0.8, 1.0, 1.2] {
            let want = if f64::abs(x) <= c {
                x * x / 2.0
            } else {
                1.0 - x * x
            };
            assert!((h.value(&[x]) - want).abs() < 1e-15, "{x}");
        }
    }

    #[test]
    fn huber_modulus_closed_form() {
        let phi = huber_like_modulus(1.0);
        assert!((phi.eval(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi.eval(2.0).unwrap() - 1.75).abs() < 1e-15);
        assert!((phi.eval(0.1).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_bounds_sampled_norms() {
        for e in corpus() {
            if !e.oracle.has_subgrad() {
                continue;
            }
            let dim = e.xbar.len();
            for k in 0..50 {
                let x: Vec<f64> = (0..dim)
                    .map(|i| e.eps * ((k * 7 + i * 3) as f64 / 50.0 - 0.5))
                    .collect();
                if let Some(us) = e.oracle.subgrad_sample(&x) {
                    let d = e.oracle.subgrad_dist(&x);
                    for u in us {
                        assert!(d <= crate::oracle::norm(&u) * (1.0 + 1e-12), "{} {x:?} {d} {u:?}", e.id);
                    }
                }
            }
        }
    }
}
