//! Exact integer matrices: characteristic polynomials, irreducibility over ℚ,
//! and a column Hermite form used to enumerate ℤⁿ / Bℤⁿ.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector, MAX_DIM};

/// Integer lattice vector with room for three coordinates.
pub type IVec = [i128; MAX_DIM];

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegerMatrix {
    dim: usize,
    e: [[i64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for i in 0..self.dim {
            l.entry(&&self.e[i][..self.dim]);
        }
        l.finish()
    }
}

impl fmt::Display for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.e[i][j])?;
            }
        }
        write!(f, "]")
    }
}

impl IntegerMatrix {
    /// Builds a matrix from rows. Fails unless it is 2×2 or 3×3 with nonzero
    /// determinant.
    pub fn new(rows: &[&[i64]]) -> Result<Self> {
        let dim = rows.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidMatrix("dimension must be 2 or 3"));
        }
        let mut e = [[0i64; MAX_DIM]; MAX_DIM];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::InvalidMatrix("matrix must be square"));
            }
            e[i][..dim].copy_from_slice(r);
        }
        let out = Self { dim, e };
        if out.det() == 0 {
            return Err(Error::InvalidMatrix("determinant is zero"));
        }
        Ok(out)
    }

    /// Same as [`IntegerMatrix::new`] but allows a zero determinant. Used for
    /// intermediate objects like `Aⁿ − I`.
    fn raw(dim: usize, e: [[i64; MAX_DIM]; MAX_DIM]) -> Self {
        Self { dim, e }
    }

    pub fn identity(dim: usize) -> Self {
        let mut e = [[0i64; MAX_DIM]; MAX_DIM];
        for (i, row) in e.iter_mut().enumerate().take(dim) {
            row[i] = 1;
        }
        Self { dim, e }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.e[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.dim).map(|i| self.e[i][..self.dim].to_vec()).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.e[i][j] as f64);
            }
        }
        m
    }

    pub fn det(&self) -> i128 {
        det_i128(self.dim, &widen(&self.e))
    }

    pub fn degree(&self) -> u64 {
        self.det().unsigned_abs() as u64
    }

    pub fn trace(&self) -> i128 {
        (0..self.dim).map(|i| self.e[i][i] as i128).sum()
    }

    /// Monic characteristic polynomial, highest degree first:
    /// `[1, c₁, …, cₙ]` for `xⁿ + c₁xⁿ⁻¹ + … + cₙ`.
    pub fn char_poly(&self) -> Vec<i128> {
        let e = widen(&self.e);
        match self.dim {
            2 => alloc::vec![1, -self.trace(), self.det()],
            _ => {
                let minors =
                    e[0][0] * e[1][1] - e[0][1] * e[1][0] + e[0][0] * e[2][2] - e[0][2] * e[2][0] + e[1][1] * e[2][2] - e[1][2] * e[2][1];
                alloc::vec![1, -self.trace(), minors, -self.det()]
            }
        }
    }

    /// Characteristic polynomial and whether it is irreducible over ℚ.
    ///
    /// A monic integer polynomial of degree ≤ 3 factors over ℚ exactly when it
    /// has a rational root, and by Gauss's lemma such a root is an integer
    /// dividing the constant term.
    pub fn char_poly_and_irreducibility(&self) -> (Vec<i128>, bool) {
        let p = self.char_poly();
        let irreducible = !has_integer_root(&p);
        (p, irreducible)
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        let n = self.dim;
        let mut e = [[0i64; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let mut s: i128 = 0;
                for k in 0..n {
                    s += self.e[i][k] as i128 * o.e[k][j] as i128;
                }
                e[i][j] = i64::try_from(s).map_err(|_| Error::Overflow("integer matrix product"))?;
            }
        }
        Ok(Self::raw(n, e))
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut out = Self::identity(self.dim);
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// `self − I`, determinant not checked.
    pub fn minus_identity(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out.e[i][i] -= 1;
        }
        out
    }

    pub fn mul_ivec(&self, v: &IVec) -> Result<IVec> {
        let mut out = [0i128; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut s: i128 = 0;
            for (j, vj) in v.iter().enumerate().take(self.dim) {
                let t = (self.e[i][j] as i128).checked_mul(*vj).ok_or(Error::Overflow("lattice vector"))?;
                s = s.checked_add(t).ok_or(Error::Overflow("lattice vector"))?;
            }
            *o = s;
        }
        Ok(out)
    }

    /// Conjugate `P · self · P⁻¹` by a unimodular `P`.
    pub fn conjugate_by(&self, p: &Self) -> Result<Self> {
        let d = p.det();
        if d.abs() != 1 {
            return Err(Error::InvalidMatrix("conjugator must be unimodular"));
        }
        let adj = adjugate_i128(p.dim, &widen(&p.e));
        let mut inv = [[0i64; MAX_DIM]; MAX_DIM];
        for i in 0..p.dim {
            for j in 0..p.dim {
                inv[i][j] = (adj[i][j] * d) as i64;
            }
        }
        let pinv = Self::raw(p.dim, inv);
        p.mul(self)?.mul(&pinv)
    }

    /// Hermite form of the column lattice, see [`Hermite`].
    pub fn hermite(&self) -> Result<Hermite> {
        Hermite::new(self)
    }
}

fn widen(e: &[[i64; MAX_DIM]; MAX_DIM]) -> [[i128; MAX_DIM]; MAX_DIM] {
    let mut out = [[0i128; MAX_DIM]; MAX_DIM];
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            out[i][j] = e[i][j] as i128;
        }
    }
    out
}

fn det_i128(dim: usize, m: &[[i128; MAX_DIM]; MAX_DIM]) -> i128 {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

fn adjugate_i128(dim: usize, m: &[[i128; MAX_DIM]; MAX_DIM]) -> [[i128; MAX_DIM]; MAX_DIM] {
    let mut out = [[0i128; MAX_DIM]; MAX_DIM];
    if dim == 2 {
        out[0][0] = m[1][1];
        out[0][1] = -m[0][1];
        out[1][0] = -m[1][0];
        out[1][1] = m[0][0];
        return out;
    }
    let skip = |s: usize| match s {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = skip(j);
            let (c0, c1) = skip(i);
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            out[i][j] = if (i + j) % 2 == 0 { minor } else { -minor };
        }
    }
    out
}

fn eval_poly(p: &[i128], x: i128) -> Option<i128> {
    let mut acc: i128 = 0;
    for c in p {
        acc = acc.checked_mul(x)?.checked_add(*c)?;
    }
    Some(acc)
}

fn has_integer_root(p: &[i128]) -> bool {
    let c0 = *p.last().unwrap();
    if c0 == 0 {
        return true;
    }
    let c = c0.unsigned_abs();
    let mut d: u128 = 1;
    while d * d <= c {
        if c.is_multiple_of(d) {
            for r in [d, c / d] {
                let r = r as i128;
                if eval_poly(p, r) == Some(0) || eval_poly(p, -r) == Some(0) {
                    return true;
                }
            }
        }
        d += 1;
    }
    false
}

/// Column Hermite form `B · U = H` with `U` unimodular and `H` lower
/// triangular with positive diagonal. Since `Bℤⁿ = Hℤⁿ`, the box
/// `{k : 0 ≤ kᵢ < Hᵢᵢ}` is a complete set of coset representatives for
/// `ℤⁿ / Bℤⁿ`.
#[derive(Clone, Debug)]
pub struct Hermite {
    dim: usize,
    h: [[i128; MAX_DIM]; MAX_DIM],
    u: [[i128; MAX_DIM]; MAX_DIM],
}

impl Hermite {
    pub fn new(b: &IntegerMatrix) -> Result<Self> {
        let n = b.dim;
        let mut h = widen(&b.e);
        let mut u = widen(&IntegerMatrix::identity(n).e);
        for i in 0..n {
            // Euclid on row i across columns i..n, mirrored on U.
            loop {
                let mut piv = None;
                for j in i..n {
                    if h[i][j] != 0 && piv.is_none_or(|p: usize| h[i][j].abs() < h[i][p].abs()) {
                        piv = Some(j);
                    }
                }
                let Some(p) = piv else {
                    return Err(Error::InvalidMatrix("singular lattice basis"));
                };
                swap_cols(&mut h, n, i, p);
                swap_cols(&mut u, n, i, p);
                let mut done = true;
                for j in i + 1..n {
                    if h[i][j] != 0 {
                        let q = h[i][j].div_euclid(h[i][i]);
                        sub_col(&mut h, n, j, i, q)?;
                        sub_col(&mut u, n, j, i, q)?;
                        if h[i][j] != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    break;
                }
            }
            if h[i][i] < 0 {
                for r in 0..n {
                    h[r][i] = -h[r][i];
                    u[r][i] = -u[r][i];
                }
            }
        }
        Ok(Self { dim: n, h, u })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> IVec {
        let mut d = [1i128; MAX_DIM];
        for (i, di) in d.iter_mut().enumerate().take(self.dim) {
            *di = self.h[i][i];
        }
        d
    }

    /// Index `[ℤⁿ : Bℤⁿ] = |det B|`.
    pub fn index(&self) -> u128 {
        (0..self.dim).map(|i| self.h[i][i] as u128).product()
    }

    /// Coset representative number `idx` in mixed-radix order.
    pub fn representative(&self, mut idx: u128) -> IVec {
        let mut k = [0i128; MAX_DIM];
        for (i, ki) in k.iter_mut().enumerate().take(self.dim) {
            let hi = self.h[i][i] as u128;
            *ki = (idx % hi) as i128;
            idx /= hi;
        }
        k
    }

    pub fn representatives(&self) -> Vec<IVec> {
        (0..self.index()).map(|i| self.representative(i)).collect()
    }

    /// Position of a reduced representative in [`Hermite::representatives`].
    pub fn index_of(&self, k: &IVec) -> u128 {
        let mut idx: u128 = 0;
        for i in (0..self.dim).rev() {
            idx = idx * self.h[i][i] as u128 + k[i] as u128;
        }
        idx
    }

    /// Splits `v = B·q + k` with `k` in the representative box. Returns `(k, q)`.
    pub fn reduce(&self, v: &IVec) -> Result<(IVec, IVec)> {
        let n = self.dim;
        let mut t = [0i128; MAX_DIM];
        let mut k = [0i128; MAX_DIM];
        for i in 0..n {
            let mut r = v[i];
            for j in 0..i {
                let s = self.h[i][j].checked_mul(t[j]).ok_or(Error::Overflow("lattice reduction"))?;
                r = r.checked_sub(s).ok_or(Error::Overflow("lattice reduction"))?;
            }
            t[i] = r.div_euclid(self.h[i][i]);
            k[i] = r.rem_euclid(self.h[i][i]);
        }
        // v = H t + k = B U t + k
        let mut q = [0i128; MAX_DIM];
        for (i, qi) in q.iter_mut().enumerate().take(n) {
            let mut s: i128 = 0;
            for (j, tj) in t.iter().enumerate().take(n) {
                let p = self.u[i][j].checked_mul(*tj).ok_or(Error::Overflow("lattice reduction"))?;
                s = s.checked_add(p).ok_or(Error::Overflow("lattice reduction"))?;
            }
            *qi = s;
        }
        Ok((k, q))
    }
}

fn swap_cols(m: &mut [[i128; MAX_DIM]; MAX_DIM], n: usize, a: usize, b: usize) {
    if a != b {
        for row in m.iter_mut().take(n) {
            row.swap(a, b);
        }
    }
}

fn sub_col(m: &mut [[i128; MAX_DIM]; MAX_DIM], n: usize, dst: usize, src: usize, q: i128) -> Result<()> {
    for row in m.iter_mut().take(n) {
        let t = row[src].checked_mul(q).ok_or(Error::Overflow("hermite form"))?;
        row[dst] = row[dst].checked_sub(t).ok_or(Error::Overflow("hermite form"))?;
    }
    Ok(())
}

pub fn ivec_to_vector(dim: usize, v: &IVec) -> Vector {
    let mut out = Vector::zeros(dim);
    for i in 0..dim {
        out[i] = v[i] as f64;
    }
    out
}

pub fn ivec_add(a: &IVec, b: &IVec) -> Result<IVec> {
    let mut out = [0i128; MAX_DIM];
    for i in 0..MAX_DIM {
        out[i] = a[i].checked_add(b[i]).ok_or(Error::Overflow("lattice vector"))?;
    }
    Ok(out)
}

pub fn ivec_sub(a: &IVec, b: &IVec) -> Result<IVec> {
    let mut out = [0i128; MAX_DIM];
    for i in 0..MAX_DIM {
        out[i] = a[i].checked_sub(b[i]).ok_or(Error::Overflow("lattice vector"))?;
    }
    Ok(out)
}

/// `|det(Aⁿ − I)|`, the number of fixed points of any map homotopic to `A`
/// with no eigenvalue a root of unity.
pub fn count_periodic_linear(a: &IntegerMatrix, n: u32) -> Result<u128> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be positive"));
    }
    let b = a.pow(n)?.minus_identity();
    let d = b.det();
    if d == 0 {
        return Err(Error::Degenerate("det(Aⁿ − I) = 0"));
    }
    Ok(d.unsigned_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a2() -> IntegerMatrix {
        IntegerMatrix::new(&[&[2, 2], &[1, 2]]).unwrap()
    }

    fn a3() -> IntegerMatrix {
        IntegerMatrix::new(&[&[0, 0, 3], &[1, 0, -11], &[0, 1, 7]]).unwrap()
    }

    #[test]
    fn char_poly_examples() {
        assert_eq!(a2().char_poly_and_irreducibility(), (alloc::vec![1, -4, 2], true));
        let d = IntegerMatrix::new(&[&[2, 0], &[0, 3]]).unwrap();
        assert_eq!(d.char_poly_and_irreducibility(), (alloc::vec![1, -5, 6], false));
        assert_eq!(a3().char_poly_and_irreducibility(), (alloc::vec![1, -7, 11, -3], true));
    }

    #[test]
    fn reducible_cubic_detected() {
        // block diagonal: (x − 2)(x² − 3x + 1)
        let m = IntegerMatrix::new(&[&[2, 0, 0], &[0, 2, 1], &[0, 1, 1]]).unwrap();
        assert!(!m.char_poly_and_irreducibility().1);
    }

    #[test]
    fn zero_determinant_rejected() {
        assert!(IntegerMatrix::new(&[&[1, 2], &[2, 4]]).is_err());
        assert!(IntegerMatrix::new(&[&[1]]).is_err());
    }

    #[test]
    fn periodic_counts() {
        let got: Vec<u128> = (1..=6).map(|n| count_periodic_linear(&a2(), n).unwrap()).collect();
        assert_eq!(got, alloc::vec![1, 7, 31, 119, 431, 1519]);
        let got: Vec<u128> = (1..=4).map(|n| count_periodic_linear(&a3(), n).unwrap()).collect();
        assert_eq!(got, alloc::vec![2, 44, 518, 5104]);
    }

    #[test]
    fn degenerate_count() {
        let m = IntegerMatrix::new(&[&[2, 0], &[0, 1]]).unwrap();
        assert!(matches!(count_periodic_linear(&m, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hermite_reduces_every_vector() {
        for b in [a2(), a3(), a2().pow(3).unwrap().minus_identity(), a3().pow(2).unwrap().minus_identity()] {
            let h = b.hermite().unwrap();
            assert_eq!(h.index(), b.det().unsigned_abs());
            for x in -7i128..=7 {
                for y in -5i128..=5 {
                    let v = [x, y, if b.dim() == 3 { x - 2 * y } else { 0 }];
                    let (k, q) = h.reduce(&v).unwrap();
                    let bq = b.mul_ivec(&q).unwrap();
                    assert_eq!(ivec_add(&bq, &k).unwrap(), v);
                    for i in 0..b.dim() {
                        assert!(k[i] >= 0 && k[i] < h.diagonal()[i]);
                    }
                    assert_eq!(h.representative(h.index_of(&k)), k);
                }
            }
        }
    }

    #[test]
    fn representatives_are_distinct_cosets() {
        let b = a2().pow(2).unwrap().minus_identity();
        let h = b.hermite().unwrap();
        let reps = h.representatives();
        assert_eq!(reps.len(), 7);
        for i in 0..reps.len() {
            for j in 0..i {
                let d = ivec_sub(&reps[i], &reps[j]).unwrap();
                let (k, _) = h.reduce(&d).unwrap();
                assert_ne!(k, [0, 0, 0]);
            }
        }
    }

    #[test]
    fn conjugation_by_unimodular() {
        let p = IntegerMatrix::new(&[&[1, 1], &[0, 1]]).unwrap();
        let c = a2().conjugate_by(&p).unwrap();
        assert_eq!(c.char_poly(), a2().char_poly());
    }
}
