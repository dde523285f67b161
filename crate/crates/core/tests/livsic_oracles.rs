use anosov_core::conjugacy::solve_conjugacy;
use anosov_core::fixtures::{fixture2, perturbed2, seeded_perturbation};
use anosov_core::livsic::*;
use anosov_core::teoplus::{teoplus_suite, TeoplusOptions};
use anosov_core::trig::grid_point;

#[test]
fn gauge_does_not_depend_on_the_grid() {
    let f = fixture2();
    let psi = log_jacobian_potential(&f);
    let a = livsic_solve(&f, &psi, &LivsicOptions { grid: 128, ..LivsicOptions::for_dim(2) }).unwrap();
    let b = livsic_solve(&f, &psi, &LivsicOptions { grid: 192, ..LivsicOptions::for_dim(2) }).unwrap();
    let pts: Vec<_> = (0..97 * 97).map(|i| grid_point(2, 97, 0.5, i)).collect();
    let diff: Vec<f64> = pts.iter().map(|x| a.eval(x) - b.eval(x)).collect();
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    let sup = diff.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    assert!(sup < 1e-6, "{sup}");
}

#[test]
fn fixture_passes_every_item() {
    let f = fixture2();
    let h = solve_conjugacy(&f).unwrap();
    let r = teoplus_suite(&f, Some(&h), &TeoplusOptions::default()).unwrap();
    assert!(r.all_passed(), "{:#?}", r.items);
    assert!(r.periodic.orbits.iter().all(|o| (o.total_jacobian / 2f64.powi(o.period as i32) - 1.0).abs() < 1e-6));
    assert!(r.livsic.as_ref().unwrap().residual < 1e-8);
    let t = r.transfer.as_ref().unwrap();
    assert!(t.residual < 1e-6);
    assert_eq!(t.boxes.len(), 20);
    assert!(t.boxes.iter().all(|b| b.relative_defect.abs() < 3.0 * b.stderr));
    assert!(r.ensure_consistent().is_ok());
}

#[test]
fn generic_perturbation_fails_together() {
    let f = perturbed2(0.1).unwrap();
    let r = teoplus_suite(&f, None, &TeoplusOptions::default()).unwrap();
    assert!(!r.verdict(4).unwrap().passed);
    assert!(r.livsic.is_none());
    assert!(r.livsic_error.as_deref().unwrap().contains("obstruction"));
    assert!(r.obstruction.iter().any(|row| row.sum.abs() > 1e-3));
    assert!(r.consistent);
}

#[test]
fn seeded_perturbations_never_split() {
    let opts = TeoplusOptions::default();
    for seed in 0..10 {
        let f = seeded_perturbation(seed).unwrap();
        let r = teoplus_suite(&f, None, &opts).unwrap();
        assert!(r.ensure_consistent().is_ok(), "seed {seed}: {:?}", r.items);
    }
}
