use anosov_core::cover::torus_distance;
use anosov_core::fixtures::{fixture2, fixture3, linear2, perturbed2};
use anosov_core::periodic::*;

/// `|det(Aⁿ − I)|` for a 2×2 matrix by hand, independent of the lattice code.
fn lefschetz2(a: [[i64; 2]; 2], n: u32) -> i64 {
    let mut p = [[1i64, 0], [0, 1]];
    for _ in 0..n {
        p = [
            [p[0][0] * a[0][0] + p[0][1] * a[1][0], p[0][0] * a[0][1] + p[0][1] * a[1][1]],
            [p[1][0] * a[0][0] + p[1][1] * a[1][0], p[1][0] * a[0][1] + p[1][1] * a[1][1]],
        ];
    }
    ((p[0][0] - 1) * (p[1][1] - 1) - p[0][1] * p[1][0]).abs()
}

#[test]
fn counts_on_linear_and_perturbed_maps() {
    assert_eq!([1, 2, 3, 4].map(|n| lefschetz2([[2, 2], [1, 2]], n)), [1, 7, 31, 119]);
    for f in [linear2(), perturbed2(0.05).unwrap(), perturbed2(0.1).unwrap(), fixture2()] {
        for n in 1..=5 {
            let orbits = find_periodic(&f, n).unwrap();
            assert_eq!(orbits.len() as i64, lefschetz2([[2, 2], [1, 2]], n), "{} n={n}", f.kind_name());
            assert!(orbits.iter().all(|o| o.residual < 1e-10));
        }
    }
}

#[test]
fn orbits_close_up_and_jacobians_multiply() {
    let f = perturbed2(0.1).unwrap();
    let orbits = find_periodic(&f, 3).unwrap();
    for o in &orbits {
        let image = f.eval_torus(&o.point).unwrap();
        assert!(orbits.iter().any(|q| torus_distance(&q.point, &image) < 1e-8));
        let mut x = o.point;
        let mut prod = 1.0;
        for _ in 0..3 {
            prod *= f.jf(&x).unwrap();
            x = f.eval_torus(&x).unwrap();
        }
        assert!((prod / o.total_jacobian - 1.0).abs() < 1e-10);
    }
}

#[test]
fn fixture_periodic_data_are_rigid() {
    let r = periodic_data_report(&fixture2(), 4, TAU_FIXTURE).unwrap();
    assert!(r.exponents.iter().all(|s| s.spread < 1e-8), "{:?}", r.exponents);
    assert!(r.log_jacobian.max_deviation < 1e-8);
    assert!(r.jacobian_ratio_defect < 1e-8);
    for o in &r.orbits {
        let ratio = o.total_jacobian / 2f64.powi(o.period as i32);
        assert!((ratio - 1.0).abs() < 1e-8);
    }
}

#[test]
fn fixture3_periodic_data_are_rigid() {
    let r = periodic_data_report(&fixture3(), 2, TAU_FIXTURE).unwrap();
    // χ(t) = t³ − 7t² + 11t − 3: |χ(1)| = 2 and |χ(1)·χ(−1)| = 44
    assert_eq!(r.counts.iter().map(|c| c.1).collect::<Vec<_>>(), [2, 44]);
    assert!(r.exponents.iter().all(|s| s.verdict.passed()), "{:?}", r.exponents);
}

#[test]
fn perturbed_periodic_data_vary() {
    let r = periodic_data_report(&perturbed2(0.1).unwrap(), 4, TAU_SAMPLED).unwrap();
    let u = r.exponent("u").unwrap();
    assert!(u.spread > 1e-3);
    match &u.verdict {
        RigidityVerdict::Violated { witness, spread } => {
            assert!(witness.0 < witness.1 && *spread > 1e-3);
        }
        v => panic!("{v:?}"),
    }
}
