use anosov_core::cover::CoverPoint;
use anosov_core::dynamics::{full_spectrum_qr, BranchSelector};
use anosov_core::fixtures::{fixture3, linear3, perturbed3};
use anosov_core::t3::*;
use anosov_core::Vector;

#[test]
fn fixture_wu_leaf_is_a_pulled_back_line() {
    let f = fixture3();
    let x = CoverPoint::from_vector(&Vector::new3(0.2, 0.5, 0.7));
    let leaf = integrate_wu_leaf(&f, &x, 1.0, 1e-3).unwrap();
    assert!(conjugated_leaf_defect(&f, &leaf.segment).unwrap() < 1e-5);
    assert!(leaf.stretch_ok, "{} vs {}", leaf.stretch, leaf.expected);
}

#[test]
fn wu_leaves_are_quasi_isometric() {
    for f in [linear3(), fixture3()] {
        let q = wu_quasi_isometry(&f, &CoverPoint::from_vector(&Vector::new3(0.4, 0.1, 0.9)), 20.0, 0.01).unwrap();
        let last = q.rows.last().unwrap();
        assert!(last.leaf_distance / last.euclidean <= 1.1, "{last:?}");
    }
}

#[test]
fn wu_leaves_are_invariant() {
    let f = fixture3();
    let d = wu_invariance_defect(&f, &CoverPoint::from_vector(&Vector::new3(0.8, 0.3, 0.6)), 0.1, 1e-3).unwrap();
    assert!(d < 1e-5, "{d}");
}

#[test]
fn linear_holonomy_mean_is_one() {
    let r = holonomy_probe(&linear3(), &HolonomyOptions::default()).unwrap();
    assert_eq!(r.jacobian.len(), 1000);
    assert!((0.97..=1.03).contains(&r.mean));
}

#[test]
fn fixture_holonomy_matches_change_of_variables() {
    let r = holonomy_probe(&fixture3(), &HolonomyOptions::default()).unwrap();
    let err = r.max_prediction_error.unwrap();
    assert!(err < 0.05, "{err}");
    assert!(r.endpoint_defect < 1e-6);
    assert!(r.ac_passed);
}

#[test]
fn spectrum_sum_is_log_degree() {
    let q = full_spectrum_qr(&linear3(), &Vector::new3(0.1, 0.2, 0.3), 20_000, &BranchSelector::RandomSeeded(1)).unwrap();
    let sum: f64 = q.exponents.iter().map(|e| e.value).sum();
    assert!((sum - 3f64.ln()).abs() < 1e-6);
    let want = [-1.065_493_95, 0.581_731_1, 1.582_373_3];
    for (e, w) in q.exponents.iter().zip(want) {
        assert!((e.value - w).abs() < 1e-3, "{} {}", e.value, w);
    }
}

#[test]
fn teo3_suites() {
    let lin = teo3_suite(&linear3(), &Teo3Options::default()).unwrap();
    assert!(lin.all_passed() && lin.consistent, "{:?}", lin.items);
    let fix = teo3_suite(&fixture3(), &Teo3Options::default()).unwrap();
    assert!(fix.all_passed() && fix.consistent, "{:?}", fix.items);
    let per = teo3_suite(&perturbed3(0.03).unwrap(), &Teo3Options::default()).unwrap();
    assert!(!per.hypotheses_hold);
    for i in [2, 3, 4] {
        assert!(!per.items[i - 1].passed);
    }
    assert!(per.consistent);
    assert!(per.periodic.exponent("wu").unwrap().spread > 1e-3 && per.periodic.exponent("su").unwrap().spread > 1e-3);
}
