use anosov_core::cover::CoverPoint;
use anosov_core::dynamics::{Bundle, Sampler};
use anosov_core::fixtures::{fixture2, linear2, linear3};
use anosov_core::leaf::leaf_segment;
use anosov_core::srb::*;
use anosov_core::{ToralMap, Vector};

fn segment(f: &ToralMap, bundle: Bundle) -> anosov_core::leaf::LeafSegment {
    leaf_segment(f, &CoverPoint::from_vector(&Vector::new2(0.35, 0.6)), bundle, -0.25, 0.25, 1e-3).unwrap()
}

fn normalized(v: Vec<f64>, h: f64) -> Vec<f64> {
    let l = integrate_samples(&v, h);
    v.into_iter().map(|x| x / l).collect()
}

#[test]
fn fixture_leaf_is_a_pulled_back_line() {
    let f = fixture2();
    let seg = segment(&f, Bundle::U);
    let base = f.phi(&seg.base.to_vector());
    let e_s = f.model().dual_row(0);
    let worst = seg.points().iter().map(|p| e_s.dot(&(f.phi(&p.to_vector()) - base)).abs()).fold(0.0, f64::max);
    // distance in φ-coordinates bounds the distance to φ⁻¹ of the line up to ‖Dφ⁻¹‖ ≈ 1
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn unstable_density_is_the_stretch_of_phi() {
    let f = fixture2();
    let seg = segment(&f, Bundle::U);
    let prof = conditional_density_u(&f, &seg, seg.base_index, 20).unwrap();
    let h = seg.t[1] - seg.t[0];
    assert!((integrate_samples(&prof.density, h) - 1.0).abs() < 1e-8);
    let e_u = f.model().direction(1);
    let oracle =
        normalized(seg.points().iter().map(|p| 1.0 / f.phi_jacobian(&p.frac).inverse().unwrap().mul_vec(&e_u).norm()).collect(), h);
    let err = prof.density.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn pushforward_by_the_conjugacy_is_uniform() {
    let f = fixture2();
    let seg = segment(&f, Bundle::U);
    let prof = conditional_density_u(&f, &seg, seg.base_index, 20).unwrap();
    let pts = seg.points();
    let e = f.model().dual_row(1);
    let s: Vec<f64> = pts.iter().map(|p| e.dot(&f.phi(&p.to_vector()))).collect();
    let ell = s[s.len() - 1] - s[0];
    // ½∫|ρ_f − s′/ℓ| dt with s′ by differences of φ along the samples
    let n = s.len();
    let mut tv = 0.0;
    for i in 0..n - 1 {
        let dt = seg.t[i + 1] - seg.t[i];
        let ds = (s[i + 1] - s[i]) / dt;
        let rho = 0.5 * (prof.density[i] + prof.density[i + 1]);
        tv += 0.5 * (rho - ds / ell).abs() * dt;
    }
    assert!(tv < 1e-3, "{tv}");
}

#[test]
fn truncation_is_controlled() {
    let f = fixture2();
    let seg = segment(&f, Bundle::U);
    let k10 = conditional_density_u(&f, &seg, seg.base_index, 10).unwrap();
    let k20 = conditional_density_u(&f, &seg, seg.base_index, 20).unwrap();
    let change = k10.density.iter().zip(&k20.density).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(change <= k10.tail_bound, "{change} {}", k10.tail_bound);

    let (x, y) = (seg.point(seg.base_index), seg.point(seg.len() - 1));
    let a = delta_u(&f, &x, &y, 8).unwrap();
    let b = delta_u(&f, &x, &y, 13).unwrap();
    assert!(b.tail_bound / a.tail_bound < 0.5, "{a:?} {b:?}");
}

#[test]
fn unstable_cocycle_and_inverse() {
    let f = fixture2();
    let seg = segment(&f, Bundle::U);
    let (x, y, z) = (seg.point(0), seg.point(seg.len() / 3), seg.point(seg.len() - 1));
    let k = 30;
    let (xy, yz, xz) = (delta_u(&f, &x, &y, k).unwrap(), delta_u(&f, &y, &z, k).unwrap(), delta_u(&f, &x, &z, k).unwrap());
    let yx = delta_u(&f, &y, &x, k).unwrap();
    let tol = 2.0 * (xy.tail_bound + yz.tail_bound + xz.tail_bound);
    assert!((xy.value * yz.value - xz.value).abs() <= tol.max(1e-14), "{xy:?} {yz:?} {xz:?}");
    assert!((xy.value * yx.value - 1.0).abs() <= (2.0 * (xy.tail_bound + yx.tail_bound)).max(1e-14));
    assert!((xy.value - 1.0).abs() > 1e-4);
}

#[test]
fn stable_density_matches_phi() {
    let f = fixture2();
    let seg = segment(&f, Bundle::S);
    let prof = conditional_density_s(&f, &seg, seg.base_index, 30).unwrap();
    let h = seg.t[1] - seg.t[0];
    // Δˢ(x, y) telescopes to Jφ(x)‖Dφ(x)γ′‖ / (Jφ(y)‖Dφ(y)γ′‖)
    let e_s = f.model().direction(0);
    let oracle = normalized(
        seg.points()
            .iter()
            .map(|p| {
                let j = f.phi_jacobian(&p.frac);
                j.inverse().unwrap().mul_vec(&e_s).norm() / j.det()
            })
            .collect(),
        h,
    );
    let err = prof.density.iter().zip(&oracle).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn pesin_on_linear_maps() {
    let r = pesin_report(&linear2(), &Sampler::LebesgueUniform { seed: 1 }, 10_000, 2).unwrap();
    assert!(r.difference.abs() < 1e-12);
    assert_eq!(r.verdict, PesinVerdict::ConsistentSRB);
    let r3 = pesin_report(&linear3(), &Sampler::LebesgueUniform { seed: 1 }, 20_000, 2).unwrap();
    // 1.789·4.866 = 3/0.345
    assert!(r3.difference.abs() < 1e-3);
    assert!((r3.e1 - 2.164).abs() < 1e-3, "{}", r3.e1);
}

#[test]
fn pesin_on_the_fixture_with_its_invariant_density() {
    let f = fixture2();
    // the invariant density of φ⁻¹∘A∘φ is Jφ
    let rho = |x: &Vector| f.phi_jacobian(x).det();
    let sampler = Sampler::DensityWeighted { density: &rho, bound: 1.1, seed: 3 };
    let r = pesin_report(&f, &sampler, 200_000, 4).unwrap();
    assert!(r.stderr <= 2e-3, "{}", r.stderr);
    assert!(r.difference.abs() < 3.0 * r.stderr, "{r:?}");
    assert_eq!(r.verdict, PesinVerdict::ConsistentSRB);
}
