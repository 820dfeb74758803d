//! Grid checks of the KL inequality, the regularity condition on subgradient
//! sums, and pointwise dominance between desingularizing functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::desing::DesingFn;
use crate::error::{KlError, Result};
use crate::eta::Eta;
use crate::grid::GridSpec;
use crate::oracle::{norm, FnOracle};

pub const KL_TOLERANCE: f64 = 1e-6;
pub const DOMINANCE_TOLERANCE: f64 = 1e-9;
pub const MAX_ALPHA_TUPLES: usize = 100_000;
pub const ALPHA_SEED: u64 = 0x6b6c_616c_7068_61;

const MAX_RECORDED_VIOLATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: Vec<f64>,
    pub gap: f64,
    pub dist: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KLReport {
    pub passed: bool,
    /// `min φ′₋(f(x) − f(x̄))·dist(0, ∂f(x)) − 1` over tested points; `None` if nothing was tested.
    pub worst_margin: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
    /// The first violations in grid order, capped at 100; see `violation_count`.
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    /// Violations at points with `dist(0, ∂f(x)) = 0`.
    pub hard_violations: usize,
    pub tested_count: usize,
    pub skipped_count: usize,
    /// The slice was empty; the inequality holds vacuously.
    pub vacuous: bool,
    pub eta: Eta,
    /// The requested η exceeded `phi`'s and was lowered.
    pub eta_clipped: bool,
    pub eps: f64,
    pub xbar: Vec<f64>,
    pub tolerance: f64,
    pub grid: GridSpec,
}

/// Checks `φ′₋(f(x) − f(x̄))·dist(0, ∂f(x)) ≥ 1` at every grid point with
/// `‖x − x̄‖ < eps` and `0 < f(x) − f(x̄) < η`.
///
/// The effective η is `min(eta, phi.eta)`. A relative shortfall up to
/// [`KL_TOLERANCE`] still counts as satisfied.
pub fn verify_kl(
    oracle: &dyn FnOracle,
    xbar: &[f64],
    eps: f64,
    eta: Eta,
    phi: &DesingFn,
    grid: &GridSpec,
) -> Result<KLReport> {
    verify_kl_with_tolerance(oracle, xbar, eps, eta, phi, grid, KL_TOLERANCE)
}

/// [`verify_kl`] with a custom relative tolerance (`> 0`).
pub fn verify_kl_with_tolerance(
    oracle: &dyn FnOracle,
    xbar: &[f64],
    eps: f64,
    eta: Eta,
    phi: &DesingFn,
    grid: &GridSpec,
    tol: f64,
) -> Result<KLReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(KlError::arg(format!("tolerance must be positive, got {tol}")));
    }
    check_dim(oracle, xbar)?;
    if !oracle.has_subgrad() {
        return Err(KlError::arg(
            "oracle does not provide subgradient distances",
        ));
    }
    let f0 = oracle.value(xbar);
    if !f0.is_finite() {
        return Err(KlError::arg(format!("f(x̄) = {f0} is not finite")));
    }
    let eff_eta = eta.min(phi.eta());
    let points = grid.points(xbar, eps)?;

    let mut report = KLReport {
        passed: true,
        worst_margin: None,
        worst_point: None,
        violations: Vec::new(),
        violation_count: 0,
        hard_violations: 0,
        tested_count: 0,
        skipped_count: 0,
        vacuous: false,
        eta: eff_eta,
        eta_clipped: eff_eta.get() < eta.get(),
        eps,
        xbar: xbar.to_vec(),
        tolerance: tol,
        grid: grid.clone(),
    };

    for x in points {
        let gap = oracle.value(&x) - f0;
        if !eff_eta.contains_open(gap) {
            report.skipped_count += 1;
            continue;
        }
        let dist = oracle.subgrad_dist(&x);
        if dist.is_nan() || dist < 0.0 {
            return Err(KlError::numeric(format!(
                "oracle returned subgradient distance {dist} at {x:?}"
            )));
        }
        report.tested_count += 1;
        let margin = if dist == 0.0 {
            report.hard_violations += 1;
            -1.0
        } else if dist.is_infinite() {
            f64::INFINITY
        } else {
            phi.left_deriv(gap)? * dist - 1.0
        };
        if report.worst_margin.map_or(true, |w| margin < w) {
            report.worst_margin = Some(margin);
            report.worst_point = Some(x.clone());
        }
        if margin < -tol {
            report.violation_count += 1;
            if report.violations.len() < MAX_RECORDED_VIOLATIONS {
                report.violations.push(Violation {
                    x,
                    gap,
                    dist,
                    margin,
                });
            }
        }
    }
    report.vacuous = report.tested_count == 0;
    report.passed = report.violation_count == 0;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    /// `min ‖Σ uᵢ‖ / Σ ‖uᵢ‖` over the sampled tuples and selections.
    pub alpha: f64,
    /// `alpha` is numerically zero: the regularity condition fails on the samples.
    pub degenerate: bool,
    pub tuples: usize,
    /// Tuples whose selections were all zero.
    pub skipped: usize,
    /// The Cartesian product exceeded the cap and was subsampled.
    pub subsampled: bool,
}

/// Empirical regularity constant for subgradients of `oracles` drawn at
/// independent grid points of `B(x̄, eps0)`.
///
/// Tuples are the Cartesian product of the per-function grids; above
/// [`MAX_ALPHA_TUPLES`] a fixed-seed random subset is used. The result is an
/// empirical value only: it bounds the true constant from above.
pub fn estimate_alpha(
    oracles: &[&dyn FnOracle],
    xbar: &[f64],
    eps0: f64,
    grid: &GridSpec,
) -> Result<AlphaEstimate> {
    estimate_alpha_seeded(oracles, xbar, eps0, grid, ALPHA_SEED)
}

/// [`estimate_alpha`] with an explicit seed for the tuple subsampling.
pub fn estimate_alpha_seeded(
    oracles: &[&dyn FnOracle],
    xbar: &[f64],
    eps0: f64,
    grid: &GridSpec,
    seed: u64,
) -> Result<AlphaEstimate> {
    if oracles.len() < 2 {
        return Err(KlError::arg(
            "the regularity constant needs at least two functions",
        ));
    }
    let points = grid.points(xbar, eps0)?;
    // per function: the nonempty subgradient samples at each grid point
    let mut samples: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(oracles.len());
    for (i, o) in oracles.iter().enumerate() {
        check_dim(*o, xbar)?;
        let mut per_point = Vec::new();
        for x in &points {
            let s = o.subgrad_sample(x).ok_or_else(|| {
                KlError::arg(format!("function {} has no subgradient sampler", i + 1))
            })?;
            if s.iter().any(|u| u.len() != xbar.len()) {
                return Err(KlError::numeric(format!(
                    "function {} returned a subgradient of the wrong dimension",
                    i + 1
                )));
            }
            if !s.is_empty() {
                per_point.push(s);
            }
        }
        samples.push(per_point);
    }
    let sizes: Vec<usize> = samples.iter().map(Vec::len).collect();
    if sizes.contains(&0) {
        return Err(KlError::numeric(
            "no usable tuple: some function has no subgradients on the grid",
        ));
    }
    let total = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    let subsampled = total.map_or(true, |t| t > MAX_ALPHA_TUPLES);

    let mut best = f64::INFINITY;
    let mut tuples = 0usize;
    let mut skipped = 0usize;
    let mut visit = |idx: &[usize]| {
        let chosen: Vec<&Vec<Vec<f64>>> = idx.iter().zip(&samples).map(|(&k, s)| &s[k]).collect();
        tuples += 1;
        match tuple_ratio(&chosen, xbar.len()) {
            Some(r) => best = best.min(r),
            None => skipped += 1,
        }
    };
    if subsampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..MAX_ALPHA_TUPLES {
            for (k, &n) in idx.iter_mut().zip(&sizes) {
                *k = rng.gen_range(0..n);
            }
            visit(&idx);
        }
    } else {
        for_each_index(&sizes, &mut visit);
    }
    if !best.is_finite() {
        return Err(KlError::numeric(
            "no usable tuple: every sampled subgradient selection was zero",
        ));
    }
    Ok(AlphaEstimate {
        alpha: best,
        degenerate: best <= f64::EPSILON,
        tuples,
        skipped,
        subsampled,
    })
}

/// Minimum ratio over all selections `uᵢ ∈ sets[i]`; `None` if every selection is all-zero.
fn tuple_ratio(sets: &[&Vec<Vec<f64>>], dim: usize) -> Option<f64> {
    let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let mut best: Option<f64> = None;
    for_each_index(&sizes, &mut |sel: &[usize]| {
        let mut sum = vec![0.0; dim];
        let mut norms = 0.0;
        for (set, &k) in sets.iter().zip(sel) {
            let u = &set[k];
            for (a, b) in sum.iter_mut().zip(u) {
                *a += b;
            }
            norms += norm(u);
        }
        if norms > 0.0 {
            let r = norm(&sum) / norms;
            best = Some(best.map_or(r, |b: f64| b.min(r)));
        }
    });
    best
}

fn for_each_index(sizes: &[usize], f: &mut dyn FnMut(&[usize])) {
    if sizes.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx);
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < sizes[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// True iff `phi_small(t) ≤ phi_big(t) + tol` at every `t` in `grid`.
///
/// `tol` is [`DOMINANCE_TOLERANCE`] absolute plus `1e-6` relative to `phi_big(t)`.
pub fn dominance_test(phi_small: &DesingFn, phi_big: &DesingFn, grid: &[f64]) -> Result<bool> {
    let eta = phi_small.eta().min(phi_big.eta());
    for &t in grid {
        if !eta.contains_open(t) {
            return Err(KlError::Domain { t, eta: eta.get() });
        }
        let big = phi_big.eval(t)?;
        if phi_small.eval(t)? > big + DOMINANCE_TOLERANCE + 1e-6 * big.abs() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_dim(oracle: &dyn FnOracle, xbar: &[f64]) -> Result<()> {
    if oracle.dim() != xbar.len() {
        return Err(KlError::arg(format!(
            "base point has dimension {} but the function has dimension {}",
            xbar.len(),
            oracle.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticOracle;

    fn abs() -> AnalyticOracle {
        AnalyticOracle::new(1, |x| x[0].abs(), |x| if x[0] == 0.0 { 0.0 } else { 1.0 })
    }

    #[test]
    fn abs_with_identity_phi_has_zero_margin() {
        let phi = DesingFn::power(1.0, 0.0).unwrap();
        let r = verify_kl(
            &abs(),
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1),
        )
        .unwrap();
        assert!(r.passed);
        assert_eq!(r.worst_margin, Some(0.0));
        assert_eq!(r.tested_count, 1998);
        assert_eq!(r.skipped_count, 1);
    }

    #[test]
    fn too_small_phi_fails() {
        let phi = DesingFn::power(0.5, 0.0).unwrap();
        let r = verify_kl(
            &abs(),
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1),
        )
        .unwrap();
        assert!(!r.passed);
        assert!((r.worst_margin.unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(r.violation_count, r.tested_count);
        assert_eq!(r.violations.len(), 100);
    }

    #[test]
    fn zero_distance_in_slice_is_hard_violation() {
        let f = AnalyticOracle::new(1, |x| x[0] * x[0], |_| 0.0);
        let phi = DesingFn::power(1.0, 0.5).unwrap();
        let r = verify_kl(
            &f,
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1),
        )
        .unwrap();
        assert!(!r.passed);
        assert_eq!(r.hard_violations, r.tested_count);
        assert_eq!(r.worst_margin, Some(-1.0));
    }

    #[test]
    fn empty_slice_is_vacuous() {
        let f = AnalyticOracle::new(1, |_| 0.0, |_| 0.0);
        let phi = DesingFn::power(1.0, 0.0).unwrap();
        let r = verify_kl(
            &f,
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1),
        )
        .unwrap();
        assert!(r.passed && r.vacuous);
        assert_eq!(r.tested_count, 0);
        assert_eq!(r.worst_margin, None);
    }

    #[test]
    fn eta_is_clipped_to_phi() {
        let phi = DesingFn::power(1.0, 0.0)
            .unwrap()
            .with_eta(Eta::new(0.5).unwrap())
            .unwrap();
        let r = verify_kl(
            &abs(),
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1),
        )
        .unwrap();
        assert!(r.eta_clipped);
        assert_eq!(r.eta.get(), 0.5);
        assert!(r.tested_count < 1000);
    }

    #[test]
    fn infinite_base_value_is_rejected() {
        let f = AnalyticOracle::new(
            1,
            |x| if x[0] == 0.0 { f64::INFINITY } else { 0.0 },
            |_| 1.0,
        );
        let phi = DesingFn::power(1.0, 0.0).unwrap();
        assert!(verify_kl(
            &f,
            &[0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1)
        )
        .is_err());
        assert!(verify_kl(
            &f,
            &[0.0, 0.0],
            1.0,
            Eta::INFINITE,
            &phi,
            &GridSpec::default_for(1)
        )
        .is_err());
    }

    fn linear(slope: f64) -> AnalyticOracle {
        AnalyticOracle::smooth(1, move |x| slope * x[0], move |_| vec![slope])
    }

    #[test]
    fn alpha_of_linear_pairs() {
        let g = GridSpec::Uniform { counts: vec![11] };
        let (a, b) = (linear(1.0), linear(-0.5));
        let est = estimate_alpha(&[&a, &b], &[0.0], 1.0, &g).unwrap();
        assert!((est.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!(!est.degenerate && !est.subsampled);
        assert_eq!(est.tuples, 81);

        let c = linear(-1.0);
        let est = estimate_alpha(&[&a, &c], &[0.0], 1.0, &g).unwrap();
        assert_eq!(est.alpha, 0.0);
        assert!(est.degenerate);

        let est = estimate_alpha(&[&a, &a], &[0.0], 1.0, &g).unwrap();
        assert_eq!(est.alpha, 1.0);
    }

    #[test]
    fn alpha_subsamples_large_products() {
        let (a, b) = (linear(1.0), linear(2.0));
        let est = estimate_alpha(&[&a, &b, &a], &[0.0], 1.0, &GridSpec::default_for(1)).unwrap();
        assert!(est.subsampled);
        assert_eq!(est.tuples, MAX_ALPHA_TUPLES);
    }

    #[test]
    fn alpha_errors() {
        let a = linear(1.0);
        let g = GridSpec::default_for(1);
        assert!(estimate_alpha(&[&a], &[0.0], 1.0, &g).is_err());
        let zero = linear(0.0);
        assert!(estimate_alpha(&[&zero, &zero], &[0.0], 1.0, &g).is_err());
        let no_sampler = abs();
        assert!(estimate_alpha(&[&a, &no_sampler], &[0.0], 1.0, &g).is_err());
    }

    #[test]
    fn dominance_examples() {
        let grid = crate::grid::log_spaced(1e-6, 0.5, 50);
        let p2 = DesingFn::power(2.0, 0.5).unwrap();
        let p1 = DesingFn::power(1.0, 0.5).unwrap();
        assert!(dominance_test(&p1, &p2, &grid).unwrap());
        assert!(!dominance_test(&p2, &p1, &grid).unwrap());
        assert!(dominance_test(&p1, &p1, &grid).unwrap());
        let capped = p1.with_eta(Eta::new(0.1).unwrap()).unwrap();
        assert!(dominance_test(&capped, &p2, &grid).is_err());
    }
}
