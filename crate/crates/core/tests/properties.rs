use anosov_core::cover::{torus_distance, CoverPoint};
use anosov_core::dynamics::{backward_orbit, inverse_branches, BranchSelector};
use anosov_core::fixtures::{a2, perturbed2, psi2_family};
use anosov_core::livsic::{livsic_solve, LivsicOptions};
use anosov_core::map::invert_diffeo;
use anosov_core::{Error, ToralMap, TrigScalar, TrigTerm, Vector};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_is_equivariant(eps in 0.0..0.1f64, x in unit(), y in unit(), m0 in -5i64..5, m1 in -5i64..5) {
        let f = perturbed2(eps).unwrap();
        let p = Vector::new2(x, y);
        let m = Vector::new2(m0 as f64, m1 as f64);
        let lhs = f.eval_lift(&(p + m)).unwrap();
        let rhs = f.eval_lift(&p).unwrap() + f.a().mul_vec(&m);
        prop_assert!((lhs - rhs).norm_inf() < 1e-12);
    }

    #[test]
    fn coordinate_change_round_trip(which in 0usize..5, x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let psi = &psi2_family()[which];
        let target = Vector::new2(x, y);
        let p = invert_diffeo(psi, &target).unwrap();
        prop_assert!((p + psi.eval(&p) - target).norm_inf() < 1e-11);
    }

    #[test]
    fn inverse_branches_are_distinct_preimages(eps in 0.0..0.1f64, x in unit(), y in unit()) {
        let f = perturbed2(eps).unwrap();
        let target = Vector::new2(x, y);
        let b = inverse_branches(&f, &target).unwrap();
        prop_assert_eq!(b.len(), 2);
        for p in &b {
            prop_assert!(torus_distance(&f.eval_torus(p).unwrap(), &target) < 1e-10);
        }
        prop_assert!(torus_distance(&b[0], &b[1]) > 1e-6);
    }

    #[test]
    fn backward_orbits_are_prefix_stable(seed in any::<u64>(), x in unit(), y in unit()) {
        let f = perturbed2(0.08).unwrap();
        let sel = BranchSelector::RandomSeeded(seed);
        let p = Vector::new2(x, y);
        let long = backward_orbit(&f, &p, 12, &sel).unwrap();
        prop_assert_eq!(long.truncated(6), backward_orbit(&f, &p, 6, &sel).unwrap());
        prop_assert!(long.max_defect(&f).unwrap() < 1e-10);
    }

    #[test]
    fn cover_inverse_undoes_the_map(eps in 0.0..0.1f64, x in -4.0..4.0f64, y in -4.0..4.0f64) {
        let f = perturbed2(eps).unwrap();
        let p = CoverPoint::from_vector(&Vector::new2(x, y));
        let (q, _) = f.inverse_cover(&f.eval_cover(&p).unwrap()).unwrap();
        prop_assert!(q.distance(&p) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// For a trigonometric `g`, the potential `g∘f − g` has `g` itself as
    /// the mean-zero solution.
    #[test]
    fn coboundaries_are_solved_exactly(eps in 0.0..0.1f64, c in -0.5..0.5f64, s in -0.5..0.5f64, k0 in -2i32..=2, k1 in 1i32..=2) {
        let f = perturbed2(eps).unwrap();
        let g = TrigScalar::new(2, 0.0, vec![TrigTerm::new(0, &[k0, k1], c, s)]);
        let psi = |x: &Vector| -> Result<f64, Error> { Ok(g.eval(&f.eval_torus(x)?) - g.eval(x)) };
        let sol = livsic_solve(&f, &psi, &LivsicOptions { degree: 3, grid: 24, test_grid: 24 }).unwrap();
        prop_assert!(sol.residual < 1e-10, "{}", sol.residual);
        for i in 0..20 {
            let x = Vector::new2(0.05 * i as f64, 0.37 * i as f64 % 1.0);
            prop_assert!((sol.eval(&x) - g.eval(&x)).abs() < 1e-9);
        }
    }
}

#[test]
fn conjugated_maps_need_a_diffeomorphism() {
    let big = anosov_core::TrigField::new(2, vec![TrigTerm::new(0, &[0, 1], 0.0, 0.5)]);
    assert!(matches!(ToralMap::conjugated(a2(), big), Err(Error::NotDiffeomorphism { .. })));
}
