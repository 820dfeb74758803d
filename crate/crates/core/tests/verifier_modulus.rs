use kl_core::grid::log_spaced;
use kl_core::modulus::{build_cloud, estimate_h, estimate_modulus, exact_modulus, ModulusOptions, SGrid};
use kl_core::oracles;
use kl_core::tables::TabulatedOracle;
use kl_core::{dominance_test, estimate_alpha, verify_kl, DesingFn, Eta, FnOracle, GridSpec};

fn explicit(points: impl IntoIterator<Item = f64>) -> GridSpec {
    GridSpec::Explicit {
        points: points.into_iter().map(|x| vec![x]).collect(),
    }
}

#[test]
fn margin_is_monotone_in_phi() {
    let oracle = oracles::huber_like(1.0);
    let grid = GridSpec::Uniform { counts: vec![801] };
    let mut last = f64::NEG_INFINITY;
    for c in [0.5, 1.0, 1.5, 2.0, 4.0] {
        let phi = DesingFn::power(c, 0.5).unwrap();
        let r = verify_kl(&oracle, &[0.0], 10.0, Eta::INFINITE, &phi, &grid).unwrap();
        let m = r.worst_margin.unwrap();
        assert!(m >= last, "c = {c}: {m} < {last}");
        last = m;
    }
}

#[test]
fn stationary_points_are_hard_violations() {
    // f(x) = x² on [-1, 1] but flat at x = 1/2: dist = 0 inside the slice
    let oracle = kl_core::AnalyticOracle::new(
        1,
        |x| x[0] * x[0],
        |x| if x[0] == 0.5 { 0.0 } else { 2.0 * x[0].abs() },
    );
    let phi = DesingFn::power(10.0, 0.5).unwrap();
    let r = verify_kl(&oracle, &[0.0], 1.0, Eta::INFINITE, &phi, &explicit([0.25, 0.5])).unwrap();
    assert!(!r.passed);
    assert_eq!(r.hard_violations, 1);
    assert_eq!(r.worst_margin, Some(-1.0));
}

#[test]
fn alpha_is_antitone_under_refinement() {
    let f1 = oracles::abs_val();
    let f2 = oracles::linear(-0.3);
    let fs: [&dyn FnOracle; 2] = [&f1, &f2];
    let coarse: Vec<f64> = log_spaced(0.1, 0.9, 7).into_iter().collect();
    let mut fine = coarse.clone();
    fine.extend(log_spaced(0.01, 0.9, 13).into_iter().map(|x| -x));
    let a = estimate_alpha(&fs, &[0.0], 1.0, &explicit(coarse)).unwrap();
    let b = estimate_alpha(&fs, &[0.0], 1.0, &explicit(fine)).unwrap();
    assert!(b.alpha <= a.alpha, "{} > {}", b.alpha, a.alpha);
    assert!(!a.subsampled && !b.subsampled);
}

#[test]
fn refinement_raises_h_and_modulus() {
    let oracle = oracles::neg_log_factor();
    let coarse: Vec<f64> = (1..40).map(|k| k as f64 / 41.0).collect();
    let mut fine = coarse.clone();
    fine.extend((1..80).map(|k| -(k as f64) / 83.0));
    fine.extend((1..25).map(|k| k as f64 / 26.0));
    let ca = build_cloud(&oracle, &[0.0], 1.0, Eta::INFINITE, &explicit(coarse)).unwrap();
    let cb = build_cloud(&oracle, &[0.0], 1.0, Eta::INFINITE, &explicit(fine)).unwrap();
    let levels = SGrid::SampleGaps.levels(&ca);
    let (ha, hb) = (estimate_h(&ca, &levels).unwrap(), estimate_h(&cb, &levels).unwrap());
    for (a, b) in ha.h_values.iter().zip(&hb.h_values) {
        assert!(b >= a);
    }
    let ma = exact_modulus(&ha, ModulusOptions::default()).unwrap();
    let mb = exact_modulus(&hb, ModulusOptions::default()).unwrap();
    for &t in &levels {
        assert!(mb.eval(t).unwrap() >= ma.eval(t).unwrap());
    }
}

#[test]
fn modulus_is_optimal_and_self_consistent() {
    for entry in oracles::corpus() {
        let Some(reference) = entry.reference_phi.clone() else {
            continue;
        };
        let grid = GridSpec::default_for(entry.xbar.len());
        let run = estimate_modulus(
            entry.oracle.as_ref(),
            &entry.xbar,
            entry.eps,
            entry.eta,
            &grid,
            SGrid::SampleGaps,
            ModulusOptions::default(),
        )
        .unwrap();
        let phi = run.modulus.phi.clone().expect("nonempty slice");
        let on_cloud = GridSpec::Explicit {
            points: run.cloud.points.clone(),
        };
        let own = verify_kl(entry.oracle.as_ref(), &entry.xbar, entry.eps, entry.eta, &phi, &on_cloud)
            .unwrap();
        assert!(own.passed, "{}: {:?}", entry.id, own.worst_margin);
        assert!(own.worst_margin.unwrap() >= -1e-6);
        let theirs = verify_kl(
            entry.oracle.as_ref(),
            &entry.xbar,
            entry.eps,
            entry.eta,
            &reference,
            &on_cloud,
        )
        .unwrap();
        assert!(theirs.passed, "{}", entry.id);
        let gaps = run.cloud.distinct_gaps();
        assert!(dominance_test(&phi, &reference, &gaps).unwrap(), "{}", entry.id);

        // ±x can give gaps one ulp apart; strict increase is only meaningful above rounding
        let mut spread = gaps.clone();
        spread.dedup_by(|a, b| *a <= *b * (1.0 + 1e-12));
        let report = phi.check_phi_class(&spread).unwrap();
        assert!(
            report.positive_deriv && report.nonincreasing_deriv && report.strictly_increasing,
            "{}: {report:?}",
            entry.id
        );
        assert!(run.h.h_values.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn cloud_file_round_trips_through_tabulated_oracle() {
    let oracle = oracles::huber_like(1.0);
    let cloud = build_cloud(
        &oracle,
        &[0.0],
        10.0,
        Eta::INFINITE,
        &GridSpec::log_radial_1d(201, 1e-3),
    )
    .unwrap();
    let text = cloud.to_table();
    let tab = TabulatedOracle::parse(&text).unwrap();
    let again = build_cloud(
        &tab,
        &[0.0],
        10.0,
        Eta::INFINITE,
        &GridSpec::Explicit {
            points: tab.points().to_vec(),
        },
    )
    .unwrap();
    assert_eq!(again.points, cloud.points);
    assert_eq!(again.dists, cloud.dists);
    assert_eq!(again.values, cloud.values);
}
