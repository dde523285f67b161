//! Finite trigonometric polynomials on 𝕋ⁿ.
//!
//! Each term contributes `a·cos 2π⟨k,x⟩ + b·sin 2π⟨k,x⟩`. Arguments are
//! reduced mod ℤⁿ before evaluation, so periodicity holds to rounding even
//! far from the fundamental domain.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_traits::Float;

use crate::linalg::{Matrix, Vector, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigTerm {
    /// Output component for vector fields; ignored by scalar series.
    pub component: usize,
    pub k: [i32; MAX_DIM],
    pub cos: f64,
    pub sin: f64,
}

impl TrigTerm {
    pub fn new(component: usize, k: &[i32], cos: f64, sin: f64) -> Self {
        let mut kk = [0; MAX_DIM];
        kk[..k.len()].copy_from_slice(k);
        Self { component, k: kk, cos, sin }
    }

    #[inline]
    fn phase(&self, r: &Vector) -> f64 {
        let mut s = 0.0;
        for i in 0..r.dim() {
            s += self.k[i] as f64 * r[i];
        }
        TAU * s
    }
}

/// Reduces `x` into `[0, 1)ⁿ`.
#[inline]
pub fn fold(x: &Vector) -> Vector {
    x.map(|t| {
        let r = t - t.floor();
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    })
}

/// ℤⁿ-periodic vector field ℝⁿ → ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigField {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigField {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Self {
        assert!((2..=MAX_DIM).contains(&dim));
        for t in &terms {
            assert!(t.component < dim, "term component out of range");
        }
        Self { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| TrigTerm { cos: t.cos * s, sin: t.sin * s, ..*t }).collect();
        Self { dim: self.dim, terms }
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        let r = fold(x);
        let mut out = Vector::zeros(self.dim);
        for t in &self.terms {
            let (s, c) = t.phase(&r).sin_cos();
            out[t.component] += t.cos * c + t.sin * s;
        }
        out
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let r = fold(x);
        let mut out = Matrix::zeros(self.dim);
        for t in &self.terms {
            let (s, c) = t.phase(&r).sin_cos();
            let g = TAU * (t.sin * c - t.cos * s);
            for j in 0..self.dim {
                if t.k[j] != 0 {
                    let v = out.get(t.component, j) + g * t.k[j] as f64;
                    out.set(t.component, j, v);
                }
            }
        }
        out
    }

    pub fn eval_with_jacobian(&self, x: &Vector) -> (Vector, Matrix) {
        let r = fold(x);
        let mut v = Vector::zeros(self.dim);
        let mut m = Matrix::zeros(self.dim);
        for t in &self.terms {
            let (s, c) = t.phase(&r).sin_cos();
            v[t.component] += t.cos * c + t.sin * s;
            let g = TAU * (t.sin * c - t.cos * s);
            for j in 0..self.dim {
                if t.k[j] != 0 {
                    let e = m.get(t.component, j) + g * t.k[j] as f64;
                    m.set(t.component, j, e);
                }
            }
        }
        (v, m)
    }

    /// Per-component bound `Σ |a| + |b|` on the sup norm.
    pub fn sup_bound(&self) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for t in &self.terms {
            out[t.component] += t.cos.abs() + t.sin.abs();
        }
        out
    }

    /// Largest spectral norm of the Jacobian over a `gⁿ` grid.
    pub fn sup_jacobian_norm(&self, g: usize) -> f64 {
        let mut best: f64 = 0.0;
        for_each_grid_point(self.dim, g, 0.0, |x| {
            best = best.max(self.jacobian(&x).norm_2());
        });
        best
    }
}

/// ℤⁿ-periodic scalar function.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigScalar {
    dim: usize,
    constant: f64,
    terms: Vec<TrigTerm>,
}

impl TrigScalar {
    pub fn new(dim: usize, constant: f64, terms: Vec<TrigTerm>) -> Self {
        Self { dim, constant, terms }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 0.0, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        let r = fold(x);
        let mut out = self.constant;
        for t in &self.terms {
            let (s, c) = t.phase(&r).sin_cos();
            out += t.cos * c + t.sin * s;
        }
        out
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let r = fold(x);
        let mut out = Vector::zeros(self.dim);
        for t in &self.terms {
            let (s, c) = t.phase(&r).sin_cos();
            let g = TAU * (t.sin * c - t.cos * s);
            for j in 0..self.dim {
                out[j] += g * t.k[j] as f64;
            }
        }
        out
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.cos.abs()).max(t.sin.abs()))
    }
}

/// Visits the points `(i + offset)/g` of a uniform grid in `[0,1)ⁿ`, last
/// coordinate fastest.
pub fn for_each_grid_point(dim: usize, g: usize, offset: f64, mut f: impl FnMut(Vector)) {
    let total = g.pow(dim as u32);
    for idx in 0..total {
        f(grid_point(dim, g, offset, idx));
    }
}

/// Point number `idx` of the grid visited by [`for_each_grid_point`].
pub fn grid_point(dim: usize, g: usize, offset: f64, mut idx: usize) -> Vector {
    let mut x = Vector::zeros(dim);
    for i in (0..dim).rev() {
        x[i] = ((idx % g) as f64 + offset) / g as f64;
        idx /= g;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> TrigField {
        TrigField::new(
            2,
            alloc::vec![
                TrigTerm::new(0, &[0, 1], 0.0, 0.03),
                TrigTerm::new(1, &[1, 0], 0.0, 0.02),
                TrigTerm::new(1, &[1, -2], 0.01, 0.005)
            ],
        )
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = field();
        let x = Vector::new2(0.31, 0.77);
        let j = f.jacobian(&x);
        let h = 1e-6;
        for c in 0..2 {
            let e = Vector::basis(2, c) * h;
            let d = (f.eval(&(x + e)) - f.eval(&(x - e))) * (0.5 / h);
            for r in 0..2 {
                assert!((d[r] - j.get(r, c)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn periodic_exactly() {
        let f = field();
        let x = Vector::new2(0.123, 0.456);
        let y = x + Vector::new2(3.0, -2.0);
        assert!(f.eval(&x).distance(&f.eval(&y)) < 1e-15);
    }

    #[test]
    fn fold_ties_go_to_zero() {
        let v = fold(&Vector::new2(1.0, -1e-18));
        assert_eq!(v[0], 0.0);
        assert!(v[1] < 1.0);
    }

    #[test]
    fn sup_norm_of_single_mode() {
        let f = TrigField::new(2, alloc::vec![TrigTerm::new(0, &[0, 1], 0.0, 0.03)]);
        let s = f.sup_jacobian_norm(64);
        assert!((s - 0.06 * core::f64::consts::PI).abs() < 1e-12);
    }
}
