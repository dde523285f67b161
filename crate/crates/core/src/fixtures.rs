//! Canonical matrices and maps used by the suites, examples and tests.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::IntegerMatrix;
use crate::map::ToralMap;
use crate::trig::{TrigField, TrigTerm};

/// `[[2,2],[1,2]]`: degree 2, eigenvalues `2 ± √2`.
pub fn a2() -> IntegerMatrix {
    IntegerMatrix::new(&[&[2, 2], &[1, 2]]).expect("valid matrix")
}

/// Companion matrix of `x³ − 7x² + 11x − 3`: degree 3, three real
/// eigenvalues in `(0,1)`, `(1,2)` and `(4,5)`.
pub fn a3() -> IntegerMatrix {
    IntegerMatrix::new(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]]).expect("valid matrix")
}

fn sin(component: usize, k: &[i32], amp: f64) -> TrigTerm {
    TrigTerm::new(component, k, 0.0, amp)
}

/// `ψ = (0.03 sin 2πx₂, 0.02 sin 2πx₁)`.
pub fn psi2() -> TrigField {
    TrigField::new(2, alloc::vec![sin(0, &[0, 1], 0.03), sin(1, &[1, 0], 0.02)])
}

/// `ψ = (0.02 sin 2πx₂, 0.015 sin 2πx₃, 0.01 sin 2πx₁)`.
pub fn psi3() -> TrigField {
    TrigField::new(3, alloc::vec![sin(0, &[0, 1, 0], 0.02), sin(1, &[0, 0, 1], 0.015), sin(2, &[1, 0, 0], 0.01)])
}

/// Five coordinate changes of different Fourier support on 𝕋².
pub fn psi2_family() -> Vec<TrigField> {
    alloc::vec![
        psi2(),
        TrigField::new(2, alloc::vec![sin(0, &[1, 1], 0.02), TrigTerm::new(1, &[1, -1], 0.015, 0.0)]),
        TrigField::new(2, alloc::vec![sin(0, &[2, 0], 0.01), sin(1, &[0, 2], 0.012), TrigTerm::new(1, &[1, 0], 0.01, 0.0)]),
        TrigField::new(2, alloc::vec![TrigTerm::new(0, &[0, 1], 0.02, 0.01), TrigTerm::new(1, &[1, 1], 0.01, -0.01)]),
        TrigField::new(2, alloc::vec![sin(0, &[3, 1], 0.004), sin(1, &[1, 2], 0.006), sin(0, &[0, 1], 0.01)]),
    ]
}

pub fn linear2() -> ToralMap {
    ToralMap::linear(a2()).expect("hyperbolic")
}

pub fn linear3() -> ToralMap {
    ToralMap::linear(a3()).expect("hyperbolic")
}

/// `φ⁻¹ ∘ A ∘ φ` on 𝕋² with [`psi2`].
pub fn fixture2() -> ToralMap {
    ToralMap::conjugated(a2(), psi2()).expect("sup |Dψ| < 1")
}

pub fn fixture3() -> ToralMap {
    ToralMap::conjugated(a3(), psi3()).expect("sup |Dψ| < 1")
}

/// `Ax + ε(sin 2πx₁, 0)`.
pub fn perturbed2(eps: f64) -> Result<ToralMap> {
    ToralMap::perturbed(a2(), TrigField::new(2, alloc::vec![sin(0, &[1, 0], eps)]))
}

/// `Ax + ε(sin 2πx₁, 0, sin 2πx₂)`.
pub fn perturbed3(eps: f64) -> Result<ToralMap> {
    ToralMap::perturbed(a3(), TrigField::new(3, alloc::vec![sin(0, &[1, 0, 0], eps), sin(2, &[0, 1, 0], eps)]))
}

/// Random perturbation of `A₂` built from the modes `|k|∞ ≤ 1`, scaled so
/// that `sup ‖Dp‖` lies in `[0.15, 0.4]`.
pub fn seeded_perturbation(seed: u64) -> Result<ToralMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: [[i32; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];
    let mut terms = Vec::new();
    for c in 0..2 {
        for k in &modes {
            terms.push(TrigTerm::new(c, k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    let raw = TrigField::new(2, terms);
    let target = rng.gen_range(0.15..0.4);
    let p = raw.scaled(target / raw.sup_jacobian_norm(64));
    ToralMap::perturbed(a2(), p)
}

/// Cone test in eigen-coordinates `(v_s, v_u)`: at every point of a
/// `g`-grid, `Df` maps `{|v_s| ≤ γ|v_u|}` into its interior while growing
/// `|v_u|`, and `Df⁻¹` does the same for `{|v_u| ≤ γ|v_s|}`. Images of
/// sectors are sectors, so checking the two edges suffices. A sufficient
/// condition for hyperbolicity on 𝕋², up to grid resolution.
pub fn cone_check(f: &ToralMap, g: usize, gamma: f64) -> Result<bool> {
    use crate::linalg::Vector;
    let m = f.model();
    let mut ok = true;
    let mut err = None;
    crate::trig::for_each_grid_point(2, g, 0.5, |x| {
        if !ok || err.is_some() {
            return;
        }
        let j = match f.jacobian(&x) {
            Ok(j) => j,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let Some(ji) = j.inverse() else {
            ok = false;
            return;
        };
        for sgn in [-1.0, 1.0] {
            let w = m.coords(&j.mul_vec(&m.from_coords(&Vector::new2(sgn * gamma, 1.0))));
            let z = m.coords(&ji.mul_vec(&m.from_coords(&Vector::new2(1.0, sgn * gamma))));
            if !(w[0].abs() < gamma * w[1].abs() && w[1].abs() > 1.0 && z[1].abs() < gamma * z[0].abs() && z[0].abs() > 1.0) {
                ok = false;
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}
