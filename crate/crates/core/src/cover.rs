//! Points of the universal cover ℝⁿ stored as an exact integer cell plus a
//! fractional part in `[0,1)ⁿ`.
//!
//! Backward orbits on the cover leave the fundamental domain geometrically
//! fast along stable directions, so a plain `f64` would lose the fractional
//! part after a few dozen steps. Keeping the cell exact means the torus
//! projection never degrades.

use crate::error::{Error, Result};
use crate::lattice::{ivec_add, ivec_sub, ivec_to_vector, IVec};
use crate::linalg::{Vector, MAX_DIM};
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverPoint {
    pub cell: IVec,
    pub frac: Vector,
}

impl CoverPoint {
    pub fn from_vector(x: &Vector) -> Self {
        Self::from_parts([0; MAX_DIM], x)
    }

    /// `cell + x` with `x` an arbitrary finite offset.
    pub fn from_parts(cell: IVec, x: &Vector) -> Self {
        let mut cell = cell;
        let mut frac = *x;
        for i in 0..x.dim() {
            let fl = x[i].floor();
            let mut r = x[i] - fl;
            let mut c = fl as i128;
            if r >= 1.0 {
                r = 0.0;
                c += 1;
            }
            cell[i] += c;
            frac[i] = r;
        }
        Self { cell, frac }
    }

    pub fn dim(&self) -> usize {
        self.frac.dim()
    }

    /// Projection to the torus.
    pub fn torus(&self) -> Vector {
        self.frac
    }

    /// Floating-point coordinates; exact only while the cell is small.
    pub fn to_vector(&self) -> Vector {
        ivec_to_vector(self.dim(), &self.cell) + self.frac
    }

    pub fn translate(&self, d: &Vector) -> Self {
        Self::from_parts(self.cell, &(self.frac + *d))
    }

    pub fn shift(&self, m: &IVec) -> Result<Self> {
        Ok(Self { cell: ivec_add(&self.cell, m)?, frac: self.frac })
    }

    /// `self − other` as a real vector. Requires the cells to be close.
    pub fn diff(&self, other: &Self) -> Vector {
        let dc = ivec_sub(&self.cell, &other.cell).unwrap_or([i128::MAX; MAX_DIM]);
        ivec_to_vector(self.dim(), &dc) + (self.frac - other.frac)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.diff(other).norm()
    }

    pub fn checked_cell_norm(&self) -> Result<i128> {
        self.cell.iter().try_fold(0i128, |m, c| c.checked_abs().map(|a| m.max(a)).ok_or(Error::Overflow("cover cell")))
    }
}

/// Distance on 𝕋ⁿ with the flat metric.
pub fn torus_distance(a: &Vector, b: &Vector) -> f64 {
    torus_delta(a, b).norm()
}

/// Shortest representative of `a − b` modulo ℤⁿ.
pub fn torus_delta(a: &Vector, b: &Vector) -> Vector {
    (*a - *b).map(|t| t - t.round())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_rejoin() {
        let x = Vector::new2(-2.25, 3.5);
        let c = CoverPoint::from_vector(&x);
        assert_eq!(c.cell[..2], [-3, 3]);
        assert_eq!(c.frac, Vector::new2(0.75, 0.5));
        assert_eq!(c.to_vector(), x);
    }

    #[test]
    fn translate_crosses_cells() {
        let c = CoverPoint::from_vector(&Vector::new2(0.9, 0.1)).translate(&Vector::new2(0.2, -0.2));
        assert_eq!(c.cell[..2], [1, -1]);
        assert!((c.frac[0] - 0.1).abs() < 1e-15 && (c.frac[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn torus_distance_wraps() {
        let d = torus_distance(&Vector::new2(0.01, 0.5), &Vector::new2(0.99, 0.5));
        assert!((d - 0.02).abs() < 1e-15);
    }
}
