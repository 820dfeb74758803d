use kl_core::grid::log_spaced;
use kl_core::oracles::{self, corpus};
use kl_core::{verify_kl, DesingFn, FnOracle, GridSpec};

#[test]
fn has_the_worked_examples() {
    let ids: Vec<&str> = corpus().iter().map(|e| e.id).collect();
    for id in [
        "exp_neg_inv_sq",
        "abs_val",
        "min_exp_abs",
        "huber_like",
        "neg_log_separable",
        "linear_pair",
        "min_continuity_demo",
    ] {
        assert!(ids.contains(&id), "{id}");
    }
    assert!(oracles::find("example-b2").is_some());
    assert!(oracles::find("nope").is_none());
}

#[test]
fn reference_functions_pass_on_default_grids() {
    for entry in corpus() {
        let Some(phi) = &entry.reference_phi else {
            continue;
        };
        let grid = GridSpec::default_for(entry.xbar.len());
        let r = verify_kl(entry.oracle.as_ref(), &entry.xbar, entry.eps, entry.eta, phi, &grid)
            .unwrap();
        assert!(r.passed, "{}: worst margin {:?} at {:?}", entry.id, r.worst_margin, r.worst_point);
        assert!(r.tested_count > 0, "{}", entry.id);
    }
}

#[test]
fn component_references_pass_too() {
    for entry in corpus() {
        for (o, phi) in entry.components.iter().zip(&entry.component_phis) {
            let grid = GridSpec::default_for(o.dim());
            let r = verify_kl(o.as_ref(), &entry.xbar[..o.dim()], entry.eps, entry.eta, phi, &grid)
                .unwrap();
            assert!(r.passed, "{} component", entry.id);
        }
    }
}

#[test]
fn separable_chain() {
    let phi = DesingFn::scaled_exp_sqrt(2.0, 2.0).unwrap();
    for t in log_spaced(1e-9, 10.0, 200) {
        let mid = 2.0 * (t / 2.0).sqrt();
        assert!(phi.eval(t).unwrap() <= mid && mid <= 2.0 * t.sqrt());
    }
}

#[test]
fn point_values() {
    assert!((oracles::exp_neg_inv_sq().value(&[0.5]) - (-4.0f64).exp()).abs() < 1e-15);
    assert_eq!(oracles::huber_like(1.0).subgrad_dist(&[2.0]), 2.0);
    let demo = oracles::min_continuity_demo();
    assert!(!demo.has_subgrad());
    // continuous at 0 and 1 although both pieces jump there
    for x in [0.0, 1.0] {
        let near = demo.value(&[x + 1e-9]);
        assert!((demo.value(&[x]) - near).abs() < 1e-6);
    }
}
