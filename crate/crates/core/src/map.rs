//! Toral maps homotopic to a linear Anosov endomorphism.

use alloc::vec::Vec;

use num_traits::Float;

use crate::cover::CoverPoint;
use crate::error::{Error, Result};
use crate::lattice::{ivec_add, ivec_sub, Hermite, IVec, IntegerMatrix};
use crate::linalg::{Matrix, Vector};
use crate::spectrum::LinearModel;
use crate::trig::{fold, for_each_grid_point, TrigField};

/// Newton tolerance for inverting `φ = id + ψ` and the perturbed lift.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_STEPS: usize = 50;

/// Grid resolution per axis for construction-time checks.
pub const CHECK_GRID: usize = 64;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MapKind {
    Linear,
    /// `f̄(x) = Ax + p(x)`.
    Perturbed {
        p: TrigField,
    },
    /// `f = φ⁻¹ ∘ A ∘ φ` with `φ = id + ψ`.
    Conjugated {
        psi: TrigField,
    },
}

#[derive(Clone, Debug)]
pub struct ToralMap {
    model: LinearModel,
    a: Matrix,
    a_inv: Matrix,
    hermite: Hermite,
    reps: Vec<IVec>,
    kind: MapKind,
    /// `sup |Dψ|` on the check grid for the conjugated kind, `sup |Dp|` for
    /// the perturbed kind, zero otherwise.
    kappa: f64,
}

/// Image point and Jacobian produced by one application of the lift.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub image: Vector,
    pub jac: Matrix,
}

impl ToralMap {
    pub fn linear(a: IntegerMatrix) -> Result<Self> {
        Self::build(a, MapKind::Linear)
    }

    pub fn perturbed(a: IntegerMatrix, p: TrigField) -> Result<Self> {
        Self::build(a, MapKind::Perturbed { p })
    }

    pub fn conjugated(a: IntegerMatrix, psi: TrigField) -> Result<Self> {
        Self::build(a, MapKind::Conjugated { psi })
    }

    pub fn build(a: IntegerMatrix, kind: MapKind) -> Result<Self> {
        let model = LinearModel::new(a);
        model.require_anosov()?;
        let af = a.to_matrix();
        let a_inv = af.inverse().ok_or(Error::InvalidMatrix("matrix not invertible over ℝ"))?;
        let hermite = a.hermite()?;
        let reps = hermite.representatives();
        let mut kappa = 0.0;
        match &kind {
            MapKind::Linear => {}
            MapKind::Perturbed { p } | MapKind::Conjugated { psi: p } => {
                if p.dim() != a.dim() {
                    return Err(Error::InvalidArgument("field dimension differs from matrix dimension"));
                }
                kappa = p.sup_jacobian_norm(CHECK_GRID);
            }
        }
        if let MapKind::Conjugated { .. } = &kind {
            if kappa >= 1.0 {
                return Err(Error::NotDiffeomorphism { sup_norm: kappa });
            }
        }
        let map = Self { model, a: af, a_inv, hermite, reps, kind, kappa };
        if let MapKind::Perturbed { p } = &map.kind {
            let mut min_det = f64::INFINITY;
            for_each_grid_point(a.dim(), CHECK_GRID, 0.0, |x| {
                min_det = min_det.min(af.add(&p.jacobian(&x)).det().abs());
            });
            if min_det < 1e-8 {
                return Err(Error::Degenerate("perturbed Jacobian is singular on the check grid"));
            }
        }
        Ok(map)
    }

    /// Member `t ∈ [0, 1]` of the straight homotopy to `A`: the field `p` or
    /// `ψ` is scaled by `t`. Construction checks are skipped since scaling
    /// down keeps `sup |Dψ| < 1`.
    pub fn homotopy(&self, t: f64) -> Self {
        let kind = match &self.kind {
            MapKind::Linear => MapKind::Linear,
            MapKind::Perturbed { p } => MapKind::Perturbed { p: p.scaled(t) },
            MapKind::Conjugated { psi } => MapKind::Conjugated { psi: psi.scaled(t) },
        };
        Self { kind, kappa: self.kappa * t, ..self.clone() }
    }

    /// `f̄ⁿ(x)` and `Dfⁿ(x)` for a point on the cover of moderate size.
    pub fn iterate_with_jacobian(&self, x: &Vector, n: u32) -> Result<(Vector, Matrix)> {
        let mut y = *x;
        let mut j = Matrix::identity(self.dim());
        for _ in 0..n {
            let cell = y.map(f64::floor);
            let st = self.step(&(y - cell))?;
            y = st.image + self.a.mul_vec(&cell);
            j = st.jac.mul_mat(&j);
        }
        Ok((y, j))
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            MapKind::Linear => "linear",
            MapKind::Perturbed { .. } => "perturbed",
            MapKind::Conjugated { .. } => "conjugated",
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn degree(&self) -> u64 {
        self.model.degree()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn hermite(&self) -> &Hermite {
        &self.hermite
    }

    /// Coset representatives of ℤⁿ / Aℤⁿ; branch `i` of the inverse uses `reps()[i]`.
    pub fn reps(&self) -> &[IVec] {
        &self.reps
    }

    /// Whether the map is known to be special by construction.
    pub fn special_by_construction(&self) -> bool {
        !matches!(self.kind, MapKind::Perturbed { .. })
    }

    fn psi(&self) -> Option<&TrigField> {
        match &self.kind {
            MapKind::Conjugated { psi } => Some(psi),
            _ => None,
        }
    }

    /// `φ(x) = x + ψ(x)` for the conjugated kind, the identity otherwise.
    pub fn phi(&self, x: &Vector) -> Vector {
        match self.psi() {
            Some(psi) => *x + psi.eval(x),
            None => *x,
        }
    }

    pub fn phi_jacobian(&self, x: &Vector) -> Matrix {
        let n = self.dim();
        match self.psi() {
            Some(psi) => Matrix::identity(n).add(&psi.jacobian(x)),
            None => Matrix::identity(n),
        }
    }

    pub fn phi_inverse(&self, y: &Vector) -> Result<Vector> {
        match self.psi() {
            Some(psi) => invert_diffeo(psi, y),
            None => Ok(*y),
        }
    }

    /// Lift on a point of moderate size; no cell splitting.
    fn lift_raw(&self, x: &Vector) -> Result<Vector> {
        Ok(match &self.kind {
            MapKind::Linear => self.a.mul_vec(x),
            MapKind::Perturbed { p } => self.a.mul_vec(x) + p.eval(x),
            MapKind::Conjugated { psi } => invert_diffeo(psi, &self.a.mul_vec(&(*x + psi.eval(x))))?,
        })
    }

    /// `f̄(x)`. The integer part of `x` is carried through `A` exactly, so
    /// `f̄(x + m) = f̄(x) + Am` holds up to one rounding.
    pub fn eval_lift(&self, x: &Vector) -> Result<Vector> {
        let n = x.map(f64::floor);
        let r = *x - n;
        Ok(self.lift_raw(&r)? + self.a.mul_vec(&n))
    }

    /// `f(x)` on the torus, folded into `[0,1)ⁿ`.
    pub fn eval_torus(&self, x: &Vector) -> Result<Vector> {
        Ok(fold(&self.lift_raw(&fold(x))?))
    }

    /// Lift on an exact cover point.
    pub fn eval_cover(&self, x: &CoverPoint) -> Result<CoverPoint> {
        let w = self.lift_raw(&x.frac)?;
        let an = self.model.matrix().mul_ivec(&x.cell)?;
        Ok(CoverPoint::from_parts(an, &w))
    }

    /// `f̄(x)` and `Df(x)` for `x` in or near the fundamental domain.
    pub fn step(&self, x: &Vector) -> Result<Step> {
        match &self.kind {
            MapKind::Linear => Ok(Step { image: self.a.mul_vec(x), jac: self.a }),
            MapKind::Perturbed { p } => {
                let (v, dp) = p.eval_with_jacobian(x);
                Ok(Step { image: self.a.mul_vec(x) + v, jac: self.a.add(&dp) })
            }
            MapKind::Conjugated { psi } => {
                let (v, dpsi) = psi.eval_with_jacobian(x);
                let image = invert_diffeo(psi, &self.a.mul_vec(&(*x + v)))?;
                let n = self.dim();
                let dphi_x = Matrix::identity(n).add(&dpsi);
                let dphi_fx = Matrix::identity(n).add(&psi.jacobian(&image));
                let inv = dphi_fx.inverse().ok_or(Error::IllConditioned("coordinate-change Jacobian"))?;
                Ok(Step { image, jac: inv.mul_mat(&self.a).mul_mat(&dphi_x) })
            }
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.step(x)?.jac)
    }

    /// `Jf(x) = |det Df(x)|`.
    pub fn jf(&self, x: &Vector) -> Result<f64> {
        Ok(self.jacobian(x)?.det().abs())
    }

    /// `g(x) = f̄(x) − Ax`, which is ℤⁿ-periodic.
    pub fn displacement(&self, x: &Vector) -> Result<Vector> {
        let r = fold(x);
        Ok(self.lift_raw(&r)? - self.a.mul_vec(&r))
    }

    /// Global inverse of the lift on a point of moderate size.
    pub fn inverse_lift_raw(&self, z: &Vector) -> Result<Vector> {
        match &self.kind {
            MapKind::Linear => Ok(self.a_inv.mul_vec(z)),
            MapKind::Perturbed { p } => self.newton_perturbed_inverse(p, z),
            MapKind::Conjugated { psi } => {
                let w = self.a_inv.mul_vec(&(*z + psi.eval(z)));
                invert_diffeo(psi, &w)
            }
        }
    }

    fn newton_perturbed_inverse(&self, p: &TrigField, z: &Vector) -> Result<Vector> {
        let mut x = self.a_inv.mul_vec(z);
        let mut res = self.a.mul_vec(&x) + p.eval(&x) - *z;
        let mut rn = res.norm_inf();
        for _ in 0..NEWTON_MAX_STEPS {
            if rn < 0.1 * NEWTON_TOL {
                return Ok(x);
            }
            let j = self.a.add(&p.jacobian(&x));
            let dx = j.solve(&res).ok_or(Error::IllConditioned("perturbed Jacobian"))?;
            let mut t = 1.0;
            loop {
                let cand = x - dx * t;
                let r2 = self.a.mul_vec(&cand) + p.eval(&cand) - *z;
                let n2 = r2.norm_inf();
                if n2 < rn || t < 1e-4 {
                    x = cand;
                    res = r2;
                    rn = n2;
                    break;
                }
                t *= 0.5;
            }
        }
        if rn < NEWTON_TOL {
            Ok(x)
        } else {
            Err(Error::NonConvergence { what: "inverse of perturbed lift", steps: NEWTON_MAX_STEPS, residual: rn })
        }
    }

    /// `f̄⁻¹(x)` on an exact cover point, together with the branch index.
    ///
    /// With `cell = Aq + c` and `c` a coset representative,
    /// `f̄⁻¹(cell + r) = f̄⁻¹(c + r) + q`.
    pub fn inverse_cover(&self, x: &CoverPoint) -> Result<(CoverPoint, usize)> {
        let (c, q) = self.hermite.reduce(&x.cell)?;
        let z = crate::lattice::ivec_to_vector(self.dim(), &c) + x.frac;
        let w = self.inverse_lift_raw(&z)?;
        Ok((CoverPoint::from_parts(q, &w), self.hermite.index_of(&c) as usize))
    }

    /// Preimage of a torus point along branch `i`.
    pub fn inverse_branch(&self, y: &Vector, i: usize) -> Result<Vector> {
        let c = crate::lattice::ivec_to_vector(self.dim(), &self.reps[i]);
        Ok(fold(&self.inverse_lift_raw(&(fold(y) + c))?))
    }

    /// Cover point over `frac` whose `k`-th cover preimage lies on branch
    /// `digits[k]`. Each backward step `f̄⁻¹(c + r) = m + r'` carries an
    /// integer part `m`, so the cell is rebuilt from the deepest point up:
    /// `cell₋ₖ = A(cell₋ₖ₋₁ − mₖ) + c_{digits[k]}`.
    pub fn cover_point_with_past(&self, frac: &Vector, digits: &[usize]) -> Result<CoverPoint> {
        let a = self.model.matrix();
        let mut carries = Vec::with_capacity(digits.len());
        let mut r = fold(frac);
        for &d in digits {
            let c = self.reps.get(d).ok_or(Error::InvalidArgument("branch digit out of range"))?;
            let w = self.inverse_lift_raw(&(crate::lattice::ivec_to_vector(self.dim(), c) + r))?;
            let p = CoverPoint::from_parts([0; 3], &w);
            carries.push(p.cell);
            r = p.frac;
        }
        let mut cell: IVec = [0; 3];
        for (&d, m) in digits.iter().zip(&carries).rev() {
            let q = ivec_sub(&cell, m)?;
            cell = ivec_add(&a.mul_ivec(&q)?, &self.reps[d])?;
        }
        Ok(CoverPoint::from_parts(cell, frac))
    }
}

/// Solves `y = x + ψ(x)` by Newton from `x = y`, after reducing `y` mod ℤⁿ.
pub fn invert_diffeo(psi: &TrigField, y: &Vector) -> Result<Vector> {
    let n = y.map(f64::floor);
    let r = *y - n;
    let dim = y.dim();
    let mut x = r;
    let mut resid = f64::INFINITY;
    for step in 0..=NEWTON_MAX_STEPS {
        let (v, dpsi) = psi.eval_with_jacobian(&x);
        let res = x + v - r;
        resid = res.norm_inf();
        if resid < 0.05 * NEWTON_TOL || step == NEWTON_MAX_STEPS {
            break;
        }
        let j = Matrix::identity(dim).add(&dpsi);
        let dx = j.solve(&res).ok_or(Error::IllConditioned("coordinate-change Jacobian"))?;
        x -= dx;
        if dx.norm_inf() < 1e-17 {
            let v = psi.eval(&x);
            resid = (x + v - r).norm_inf();
            break;
        }
    }
    if resid < NEWTON_TOL {
        Ok(x + n)
    } else {
        Err(Error::NonConvergence { what: "coordinate-change inverse", steps: NEWTON_MAX_STEPS, residual: resid })
    }
}
