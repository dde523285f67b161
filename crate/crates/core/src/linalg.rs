//! Stack-allocated vectors and matrices for dimensions 2 and 3.
//!
//! Every object in this crate lives on 𝕋² or 𝕋³, so a fixed `[f64; 3]`
//! payload with a runtime dimension tag is enough. Unused trailing slots are
//! kept at zero so that norms and dot products never see stale data.

use core::fmt;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};
use num_traits::Float;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vector {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} not supported");
        Self { dim, c: [0.0; MAX_DIM] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut out = Self::zeros(v.len());
        out.c[..v.len()].copy_from_slice(v);
        out
    }

    pub fn new2(a: f64, b: f64) -> Self {
        Self { dim: 2, c: [a, b, 0.0] }
    }

    pub fn new3(a: f64, b: f64, c: f64) -> Self {
        Self { dim: 3, c: [a, b, c] }
    }

    /// Unit basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.c[i] = 1.0;
        v
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        let mut v = Self::zeros(dim);
        for x in v.c[..dim].iter_mut() {
            *x = value;
        }
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.c[0] * other.c[0] + self.c[1] * other.c[1] + self.c[2] * other.c[2]
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Returns `self / |self|`; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            *self
        } else {
            *self * (1.0 / n)
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn map(&self, mut op: impl FnMut(f64) -> f64) -> Self {
        let mut out = *self;
        for x in out.as_mut_slice() {
            *x = op(*x);
        }
        out
    }

    /// Cross product; both operands must be three-dimensional.
    pub fn cross(&self, other: &Self) -> Self {
        assert!(self.dim == 3 && other.dim == 3);
        let (a, b) = (self.c, other.c);
        Self::new3(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])
    }
}

/// Angle in `[0, π/2]` between the lines spanned by `a` and `b`.
pub fn line_angle(a: &Vector, b: &Vector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return core::f64::consts::FRAC_PI_2;
    }
    let c = (a.dot(b) / (na * nb)).abs().min(1.0);
    // acos loses precision near 0; use the sine of the angle instead.
    let d = *a * (1.0 / na) - *b * ((a.dot(b)).signum() / nb);
    let half = (d.norm() * 0.5).min(1.0);
    if c > 0.9 {
        2.0 * half.asin()
    } else {
        c.acos()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.c[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.c[i]
    }
}

impl Add for Vector {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        debug_assert_eq!(self.dim, o.dim);
        Self { dim: self.dim, c: [self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2]] }
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Vector {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        debug_assert_eq!(self.dim, o.dim);
        Self { dim: self.dim, c: [self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2]] }
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vector {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self { dim: self.dim, c: [self.c[0] * s, self.c[1] * s, self.c[2] * s] }
    }
}

impl Neg for Vector {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Square matrix of dimension 2 or 3, row-major.
#[derive(Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for i in 0..self.dim {
            l.entry(&&self.m[i][..self.dim]);
        }
        l.finish()
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} not supported");
        Self { dim, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut out = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim, "matrix must be square");
            out.m[i][..dim].copy_from_slice(r);
        }
        out
    }

    /// Builds the matrix whose columns are `cols`.
    pub fn from_columns(cols: &[Vector]) -> Self {
        let dim = cols.len();
        let mut out = Self::zeros(dim);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..dim {
                out.m[i][j] = c[i];
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn column(&self, j: usize) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for i in 0..self.dim {
            v[i] = self.m[i][j];
        }
        v
    }

    pub fn row(&self, i: usize) -> Vector {
        Vector::from_slice(&self.m[i][..self.dim])
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            out[i] = self.m[i][0] * v.c[0] + self.m[i][1] * v.c[1] + self.m[i][2] * v.c[2];
        }
        out
    }

    pub fn mul_mat(&self, o: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, o.dim);
        let mut out = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, o: &Matrix) -> Matrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] -= o.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] *= s;
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Adjugate (classical adjoint), so that `A · adj(A) = det(A) · I`.
    pub fn adjugate(&self) -> Matrix {
        let m = &self.m;
        let mut out = Matrix::zeros(self.dim);
        match self.dim {
            1 => out.m[0][0] = 1.0,
            2 => {
                out.m[0][0] = m[1][1];
                out.m[0][1] = -m[0][1];
                out.m[1][0] = -m[1][0];
                out.m[1][1] = m[0][0];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = minor_index(j);
                        let (c0, c1) = minor_index(i);
                        let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        out.m[i][j] = sign * minor;
                    }
                }
            }
        }
        out
    }

    /// Inverse, or `None` when the determinant is not safely nonzero.
    pub fn inverse(&self) -> Option<Matrix> {
        let d = self.det();
        let scale = self.norm_max().powi(self.dim as i32).max(f64::MIN_POSITIVE);
        if !d.is_finite() || d.abs() <= 1e-300 || d.abs() / scale < 1e-14 {
            return None;
        }
        Some(self.adjugate().scale(1.0 / d))
    }

    /// Solves `self · x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Vector) -> Option<Vector> {
        let n = self.dim;
        let mut a = self.m;
        let mut x = *b;
        let scale = self.norm_max().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if a[i][k].abs() > a[piv][k].abs() {
                    piv = i;
                }
            }
            if a[piv][k].abs() <= 1e-15 * scale {
                return None;
            }
            a.swap(k, piv);
            x.c.swap(k, piv);
            for i in k + 1..n {
                let l = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= l * a[k][j];
                }
                x.c[i] -= l * x.c[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = x.c[k];
            for j in k + 1..n {
                s -= a[k][j] * x.c[j];
            }
            x.c[k] = s / a[k][k];
        }
        Some(x)
    }

    pub fn norm_max(&self) -> f64 {
        let mut out: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out = out.max(self.m[i][j].abs());
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    /// Spectral norm via the largest eigenvalue of `MᵀM` (power iteration).
    pub fn norm_2(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut v = Vector::filled(self.dim, 1.0).normalized();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = g.mul_vec(&v);
            let n = w.norm();
            if n == 0.0 {
                return 0.0;
            }
            v = w * (1.0 / n);
            if (n - lambda).abs() <= 1e-15 * n {
                lambda = n;
                break;
            }
            lambda = n;
        }
        lambda.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.m[i][j].is_finite()))
    }
}

fn minor_index(skip: usize) -> (usize, usize) {
    match skip {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Modified Gram–Schmidt on the columns of `m`. Returns the orthonormal factor
/// and the diagonal of the triangular factor (signed).
pub fn qr_diagonal(m: &Matrix) -> (Matrix, Vector) {
    let n = m.dim();
    let mut q: [Vector; MAX_DIM] = [Vector::zeros(n); MAX_DIM];
    let mut r = Vector::zeros(n);
    for j in 0..n {
        let mut v = m.column(j);
        for qi in q.iter().take(j) {
            let p = qi.dot(&v);
            v -= *qi * p;
        }
        // second pass keeps the frame orthonormal under heavy stretching
        for qi in q.iter().take(j) {
            let p = qi.dot(&v);
            v -= *qi * p;
        }
        let nv = v.norm();
        r[j] = nv;
        q[j] = if nv > 0.0 { v * (1.0 / nv) } else { v };
    }
    (Matrix::from_columns(&q[..n]), r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let a = Matrix::from_rows(&[&[0.0, 0.0, 3.0], &[1.0, 0.0, -11.0], &[0.0, 1.0, 7.0]]);
        let inv = a.inverse().unwrap();
        let id = a.mul_mat(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, j) - want).abs() < 1e-14);
            }
        }
        assert!((a.det() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn solve_matches_inverse() {
        let a = Matrix::from_rows(&[&[2.0, 2.0], &[1.0, 2.0]]);
        let b = Vector::new2(0.3, -1.7);
        let x = a.solve(&b).unwrap();
        let y = a.inverse().unwrap().mul_vec(&b);
        assert!(x.distance(&y) < 1e-15);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.inverse().is_none());
        assert!(a.solve(&Vector::new2(1.0, 1.0)).is_none());
    }

    #[test]
    fn line_angle_small_and_right() {
        let a = Vector::new2(1.0, 0.0);
        let b = Vector::new2(1.0, 1e-9);
        assert!((line_angle(&a, &b) - 1e-9).abs() < 1e-20);
        assert!((line_angle(&a, &-b) - 1e-9).abs() < 1e-20);
        assert!((line_angle(&a, &Vector::new2(0.0, 2.0)) - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn qr_diagonal_product_is_determinant() {
        let a = Matrix::from_rows(&[&[2.3, 1.0, 0.2], &[0.1, 1.7, -0.4], &[0.5, 0.3, 0.9]]);
        let (q, r) = qr_diagonal(&a);
        assert!((r[0] * r[1] * r[2] - a.det().abs()).abs() < 1e-13);
        let qtq = q.transpose().mul_mat(&q);
        assert!(qtq.sub(&Matrix::identity(3)).norm_max() < 1e-14);
    }
}
