//! Eigen-data of an integer matrix and the hyperbolicity classification.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::IntegerMatrix;
use crate::linalg::{Matrix, Vector};

/// Eigenvalues within this distance of the unit circle are treated as neutral.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Classification {
    AnosovEndomorphism,
    Expanding,
    InvertibleAnosov,
    NotHyperbolic,
}

/// One eigenvalue. Complex pairs appear twice with opposite `im`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Eigen {
    pub re: f64,
    pub im: f64,
    /// Unit eigenvector for real eigenvalues.
    pub direction: Option<Vector>,
}

impl Eigen {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearModel {
    matrix: IntegerMatrix,
    degree: u64,
    char_poly: Vec<i128>,
    irreducible: bool,
    /// Sorted by modulus, ascending.
    eigen: Vec<Eigen>,
    exponents: Vec<f64>,
    classification: Classification,
    /// Columns are the eigendirections when the spectrum is real.
    basis: Option<Matrix>,
    dual: Option<Matrix>,
}

impl LinearModel {
    pub fn new(matrix: IntegerMatrix) -> Self {
        let (char_poly, irreducible) = matrix.char_poly_and_irreducibility();
        let a = matrix.to_matrix();
        let mut eigen: Vec<Eigen> = poly_roots(&char_poly)
            .into_iter()
            .map(|(re, im)| Eigen { re, im, direction: if im == 0.0 { Some(null_direction(&a, re)) } else { None } })
            .collect();
        eigen.sort_by(|x, y| x.modulus().total_cmp(&y.modulus()).then(x.im.total_cmp(&y.im)));
        let exponents = eigen.iter().map(|e| e.modulus().ln()).collect();
        let degree = matrix.degree();
        let classification = classify_moduli(degree, eigen.iter().map(Eigen::modulus));
        let basis = if eigen.iter().all(Eigen::is_real) {
            let cols: Vec<Vector> = eigen.iter().map(|e| e.direction.unwrap()).collect();
            Some(Matrix::from_columns(&cols))
        } else {
            None
        };
        let dual = basis.and_then(|b| b.inverse());
        Self { matrix, degree, char_poly, irreducible, eigen, exponents, classification, basis, dual }
    }

    pub fn matrix(&self) -> &IntegerMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn char_poly(&self) -> &[i128] {
        &self.char_poly
    }

    pub fn irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn eigen(&self) -> &[Eigen] {
        &self.eigen
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    /// Real eigenvalue `i` (ascending modulus). Panics on complex spectra;
    /// [`LinearModel::require_anosov`] rules those out.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        assert!(self.eigen[i].is_real());
        self.eigen[i].re
    }

    pub fn direction(&self, i: usize) -> Vector {
        self.eigen[i].direction.expect("complex eigenvalue has no real direction")
    }

    pub fn basis(&self) -> Option<&Matrix> {
        self.basis.as_ref()
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn coords(&self, v: &Vector) -> Vector {
        self.dual.as_ref().expect("real eigenbasis").mul_vec(v)
    }

    pub fn from_coords(&self, c: &Vector) -> Vector {
        self.basis.as_ref().expect("real eigenbasis").mul_vec(c)
    }

    /// Row `i` of the dual basis: the linear functional picking the
    /// `i`-th eigen-coordinate.
    pub fn dual_row(&self, i: usize) -> Vector {
        self.dual.as_ref().expect("real eigenbasis").row(i)
    }

    /// Number of eigenvalues inside the unit circle.
    pub fn stable_dim(&self) -> usize {
        self.eigen.iter().filter(|e| e.modulus() < 1.0).count()
    }

    /// Ensures the model is a non-invertible Anosov endomorphism with a real
    /// eigenbasis, which every dynamical routine relies on.
    pub fn require_anosov(&self) -> Result<()> {
        if self.classification != Classification::AnosovEndomorphism {
            return Err(Error::NotAnosov(self.classification));
        }
        if self.dual.is_none() {
            return Err(Error::InvalidMatrix("complex eigenvalues are not supported"));
        }
        Ok(())
    }
}

/// Classifies an integer matrix by the moduli of its eigenvalues.
pub fn classify(a: &IntegerMatrix) -> Classification {
    LinearModel::new(*a).classification()
}

fn classify_moduli(degree: u64, moduli: impl Iterator<Item = f64>) -> Classification {
    let mut stable = 0;
    let mut unstable = 0;
    for m in moduli {
        if (m - 1.0).abs() <= HYPERBOLICITY_TOL {
            return Classification::NotHyperbolic;
        }
        if m < 1.0 {
            stable += 1;
        } else {
            unstable += 1;
        }
    }
    if degree == 1 {
        Classification::InvertibleAnosov
    } else if stable == 0 {
        Classification::Expanding
    } else if unstable == 0 {
        Classification::NotHyperbolic
    } else {
        Classification::AnosovEndomorphism
    }
}

/// Roots of a monic integer polynomial of degree 2 or 3 as `(re, im)`.
pub fn poly_roots(p: &[i128]) -> Vec<(f64, f64)> {
    let c: Vec<f64> = p.iter().map(|&x| x as f64).collect();
    real_poly_roots(&c)
}

/// Roots of a monic real polynomial `[1, c₁, …]` of degree 2 or 3.
pub fn real_poly_roots(c: &[f64]) -> Vec<(f64, f64)> {
    match c.len() {
        3 => quadratic_roots(c[1], c[2]),
        4 => cubic_roots(c[1], c[2], c[3]),
        _ => panic!("only degree 2 and 3 are supported"),
    }
}

fn quadratic_roots(b: f64, c: f64) -> Vec<(f64, f64)> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
        if q == 0.0 {
            return alloc::vec![(0.0, 0.0), (0.0, 0.0)];
        }
        alloc::vec![(q, 0.0), (c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        alloc::vec![(re, im), (re, -im)]
    }
}

fn cubic_roots(a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let f = |x: f64| ((x + a) * x + b) * x + c;
    let df = |x: f64| (3.0 * x + 2.0 * a) * x + b;
    let polish = |mut x: f64| {
        for _ in 0..4 {
            let d = df(x);
            if d == 0.0 {
                break;
            }
            let step = f(x) / d;
            x -= step;
            if step.abs() <= 1e-17 * x.abs() {
                break;
            }
        }
        x
    };
    // depressed cubic t³ + pt + q with x = t − a/3
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc < 0.0 {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        let tau = core::f64::consts::TAU;
        (0..3).map(|k| (polish(2.0 * r * ((phi + tau * k as f64) / 3.0).cos() - shift), 0.0)).collect()
    } else {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let x0 = polish(u + v - shift);
        // deflate: x³ + ax² + bx + c = (x − x0)(x² + b1 x + c1)
        let b1 = a + x0;
        let c1 = b + x0 * b1;
        let mut out = alloc::vec![(x0, 0.0)];
        for (re, im) in quadratic_roots(b1, c1) {
            out.push(if im == 0.0 { (polish(re), 0.0) } else { (re, im) });
        }
        out
    }
}

/// Unit vector spanning the kernel of `A − λI` for a simple real eigenvalue.
fn null_direction(a: &Matrix, lambda: f64) -> Vector {
    let n = a.dim();
    let m = a.sub(&Matrix::identity(n).scale(lambda));
    let mut best = Vector::zeros(n);
    if n == 2 {
        for i in 0..2 {
            let cand = Vector::new2(-m.get(i, 1), m.get(i, 0));
            if cand.norm() > best.norm() {
                best = cand;
            }
        }
    } else {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let cand = m.row(i).cross(&m.row(j));
            if cand.norm() > best.norm() {
                best = cand;
            }
        }
    }
    let mut v = best.normalized();
    // one step of shifted inverse iteration
    let r = a.mul_vec(&v) - v * lambda;
    if r.norm() > 0.0 {
        if let Some(fix) = m.add(&Matrix::identity(n).scale(1e-7 * lambda.abs().max(1.0))).solve(&v) {
            let w = fix.normalized();
            let rw = a.mul_vec(&w) - w * lambda;
            if rw.norm() < r.norm() {
                v = w;
            }
        }
    }
    canonical_sign(v)
}

/// Flips `v` so that its largest-magnitude component is positive.
pub fn canonical_sign(v: Vector) -> Vector {
    let mut k = 0;
    for i in 1..v.dim() {
        if v[i].abs() > v[k].abs() + 1e-12 {
            k = i;
        }
    }
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn im(rows: &[&[i64]]) -> IntegerMatrix {
        IntegerMatrix::new(rows).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&im(&[&[2, 2], &[1, 2]])), Classification::AnosovEndomorphism);
        assert_eq!(classify(&im(&[&[2, 1], &[1, 1]])), Classification::InvertibleAnosov);
        assert_eq!(classify(&im(&[&[2, 0], &[0, 1]])), Classification::NotHyperbolic);
        assert_eq!(classify(&im(&[&[2, 0], &[0, 3]])), Classification::Expanding);
        assert_eq!(classify(&im(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]])), Classification::AnosovEndomorphism);
    }

    #[test]
    fn quadratic_eigenvalues() {
        let m = LinearModel::new(im(&[&[2, 2], &[1, 2]]));
        let s2 = 2f64.sqrt();
        assert!((m.eigenvalue(0) - (2.0 - s2)).abs() < 1e-15);
        assert!((m.eigenvalue(1) - (2.0 + s2)).abs() < 1e-15);
        assert!((m.exponents()[1] - (2.0 + s2).ln()).abs() < 1e-15);
    }

    #[test]
    fn cubic_eigenvalues_match_independent_bisection() {
        let m = LinearModel::new(im(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]]));
        let f = |x: f64| ((x - 7.0) * x + 11.0) * x - 3.0;
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(lo) < 0.0) == (f(mid) < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let want = [bisect(0.0, 1.0), bisect(1.0, 2.5), bisect(4.0, 5.0)];
        for (i, w) in want.iter().enumerate() {
            assert!((m.eigenvalue(i) - w).abs() < 1e-13, "{} vs {}", m.eigenvalue(i), w);
        }
    }

    #[test]
    fn directions_are_eigenvectors() {
        for a in [im(&[&[2, 2], &[1, 2]]), im(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]]), im(&[&[3, 1], &[1, 1]])] {
            let m = LinearModel::new(a);
            let mat = a.to_matrix();
            for i in 0..a.dim() {
                let v = m.direction(i);
                assert!((v.norm() - 1.0).abs() < 1e-14);
                let r = mat.mul_vec(&v) - v * m.eigenvalue(i);
                assert!(r.norm() < 1e-12, "residual {}", r.norm());
            }
        }
    }

    #[test]
    fn exponents_sum_to_log_degree() {
        for a in [im(&[&[2, 2], &[1, 2]]), im(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]]), im(&[&[5, 3], &[2, 1]])] {
            let m = LinearModel::new(a);
            let s: f64 = m.exponents().iter().sum();
            assert!((s - (m.degree() as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_pair_reported() {
        // x³ − x − 2 style companion has one real root and a complex pair
        let a = im(&[&[0, 0, 2], &[1, 0, 1], &[0, 1, 0]]);
        let m = LinearModel::new(a);
        assert_eq!(m.eigen().iter().filter(|e| !e.is_real()).count(), 2);
        let s: f64 = m.exponents().iter().sum();
        assert!((s - 2f64.ln()).abs() < 1e-12);
        assert!(m.require_anosov().is_err());
    }
}
