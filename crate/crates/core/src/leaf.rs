//! Arclength continuation of invariant direction fields on the cover.

use alloc::vec::Vec;

use num_traits::Float;

use crate::cover::CoverPoint;
use crate::dynamics::{direction_at, orient, reference_direction, Bundle};
use crate::error::{Error, Result};
use crate::linalg::{line_angle, Vector};
use crate::map::ToralMap;

/// Default continuation step.
pub const LEAF_STEP: f64 = 1e-3;

/// Polyline sampled along a leaf, stored as offsets from an exact base point
/// so that long leaves keep full precision.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeafSegment {
    pub base: CoverPoint,
    pub bundle: Bundle,
    /// Signed arclength of each sample, increasing.
    pub t: Vec<f64>,
    pub offsets: Vec<Vector>,
    /// Index of the base point.
    pub base_index: usize,
}

impl LeafSegment {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0]
    }

    pub fn point(&self, i: usize) -> CoverPoint {
        self.base.translate(&self.offsets[i])
    }

    pub fn points(&self) -> Vec<CoverPoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Unit secant between neighbouring samples around `i`.
    pub fn tangent(&self, i: usize) -> Vector {
        let (a, b) = if i + 1 < self.len() { (i, i + 1) } else { (i - 1, i) };
        (self.offsets[b] - self.offsets[a]).normalized()
    }

    /// Euclidean distance from `x` to the polyline.
    pub fn distance_to(&self, x: &CoverPoint) -> f64 {
        let y = x.diff(&self.base);
        polyline_distance(&self.offsets, &y)
    }
}

/// Distance from `y` to the polyline through `pts`.
pub fn polyline_distance(pts: &[Vector], y: &Vector) -> f64 {
    if pts.len() == 1 {
        return pts[0].distance(y);
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        let l2 = d.dot(&d);
        let s = if l2 > 0.0 { ((*y - w[0]).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((w[0] + d * s).distance(y));
    }
    best
}

fn field(f: &ToralMap, base: &CoverPoint, offset: &Vector, bundle: Bundle, prev: &Vector) -> Result<Vector> {
    let v = direction_at(f, &base.translate(offset), bundle, false)?.direction;
    if !v.is_finite() {
        return Err(Error::LeafFailure("non-finite direction"));
    }
    Ok(orient(v, prev))
}

fn integrate(f: &ToralMap, base: &CoverPoint, bundle: Bundle, t_end: f64, max_step: f64, v0: Vector) -> Result<(Vec<f64>, Vec<Vector>)> {
    let n = (t_end.abs() / max_step).ceil() as usize;
    let mut ts = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    ts.push(0.0);
    xs.push(Vector::zeros(base.dim()));
    if n == 0 {
        return Ok((ts, xs));
    }
    let h = t_end / n as f64;
    let mut tan = v0;
    let mut x = xs[0];
    for i in 1..=n {
        let k1 = field(f, base, &x, bundle, &tan)?;
        let k2 = field(f, base, &(x + k1 * (0.5 * h)), bundle, &k1)?;
        let k3 = field(f, base, &(x + k2 * (0.5 * h)), bundle, &k2)?;
        let k4 = field(f, base, &(x + k3 * h), bundle, &k3)?;
        if line_angle(&k1, &k4) > 0.5 {
            return Err(Error::LeafFailure("direction field turned too fast for the step"));
        }
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        tan = k4;
        ts.push(h * i as f64);
        xs.push(x);
    }
    Ok((ts, xs))
}

/// Leaf of `bundle` through `x` from signed arclength `t0 ≤ 0` to `t1 ≥ 0`
/// by RK4 with steps no longer than `max_step`. Positive arclength follows
/// the orientation of `A`'s eigendirection.
pub fn leaf_segment(f: &ToralMap, x: &CoverPoint, bundle: Bundle, t0: f64, t1: f64, max_step: f64) -> Result<LeafSegment> {
    if !(t0 <= 0.0 && t1 >= 0.0 && max_step > 0.0) {
        return Err(Error::InvalidArgument("leaf range must contain the base point"));
    }
    let reference = reference_direction(f, bundle)?;
    let v0 = orient(direction_at(f, x, bundle, true)?.direction, &reference);
    let (tb, xb) = integrate(f, x, bundle, t0, max_step, v0)?;
    let (tf, xf) = integrate(f, x, bundle, t1, max_step, v0)?;
    let base_index = tb.len() - 1;
    let mut t: Vec<f64> = tb.into_iter().rev().collect();
    let mut offsets: Vec<Vector> = xb.into_iter().rev().collect();
    t.extend_from_slice(&tf[1..]);
    offsets.extend_from_slice(&xf[1..]);
    Ok(LeafSegment { base: *x, bundle, t, offsets, base_index })
}

/// One-sided leaf of length `length` from `x`.
pub fn leaf_from(f: &ToralMap, x: &CoverPoint, bundle: Bundle, length: f64, max_step: f64) -> Result<LeafSegment> {
    if length >= 0.0 {
        leaf_segment(f, x, bundle, 0.0, length, max_step)
    } else {
        leaf_segment(f, x, bundle, length, 0.0, max_step)
    }
}

/// Point at signed arclength `t` along the leaf through `x`.
pub fn leaf_point(f: &ToralMap, x: &CoverPoint, bundle: Bundle, t: f64, max_step: f64) -> Result<CoverPoint> {
    let seg = leaf_from(f, x, bundle, t, max_step)?;
    Ok(if t >= 0.0 { seg.point(seg.len() - 1) } else { seg.point(0) })
}

/// Largest distance from the image under `f̄` of each sample of `seg` to a
/// freshly integrated leaf through the image of the base point.
pub fn invariance_defect(f: &ToralMap, seg: &LeafSegment, stretch_bound: f64, max_step: f64) -> Result<f64> {
    let images: Vec<CoverPoint> = seg.points().iter().map(|p| f.eval_cover(p)).collect::<Result<_>>()?;
    let fx = images[seg.base_index];
    let reach = stretch_bound * seg.t[0].abs().max(seg.t[seg.len() - 1].abs());
    let target = leaf_segment(f, &fx, seg.bundle, -reach, reach, max_step)?;
    Ok(images.iter().map(|p| target.distance_to(p)).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuasiIsometryRow {
    pub radius: f64,
    pub leaf_distance: f64,
    pub euclidean: f64,
    /// Angle between `y − x` and the linear `σ`-direction.
    pub angle_to_linear: f64,
    /// `‖Aⁿ(y−x)‖ / (e^{nλ^σ_A} ‖y−x‖)` with `n = 3`.
    pub growth_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuasiIsometry {
    pub bundle: Bundle,
    pub rows: Vec<QuasiIsometryRow>,
    /// Fitted from the two largest radii: `d_W ≤ Q⁻¹ ‖x − y‖ + b`.
    pub q: f64,
    pub b: f64,
}

/// Grows the leaf through `x` to each radius and compares leaf and
/// Euclidean distances.
pub fn quasi_isometry_probe(f: &ToralMap, x: &CoverPoint, bundle: Bundle, radii: &[f64], max_step: f64) -> Result<QuasiIsometry> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= 0.0 {
        return Err(Error::InvalidArgument("radii must be positive and increasing"));
    }
    let rmax = radii[radii.len() - 1];
    let seg = leaf_from(f, x, bundle, rmax, max_step)?;
    let e = reference_direction(f, bundle)?;
    let lambda = f.model().exponents()[crate::dynamics::bundle_index(f, bundle)?];
    let a = f.a();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let i = seg.t.partition_point(|&t| t < r - 1e-12).min(seg.len() - 1);
        let d = seg.offsets[i];
        let a3 = a.mul_vec(&a.mul_vec(&a.mul_vec(&d)));
        rows.push(QuasiIsometryRow {
            radius: r,
            leaf_distance: seg.t[i],
            euclidean: d.norm(),
            angle_to_linear: line_angle(&d, &e),
            growth_ratio: a3.norm() / ((3.0 * lambda).exp() * d.norm()),
        });
    }
    let (r1, r2) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    let slope = (r2.leaf_distance - r1.leaf_distance) / (r2.euclidean - r1.euclidean);
    Ok(QuasiIsometry { bundle, q: 1.0 / slope, b: r2.leaf_distance - slope * r2.euclidean, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntegerMatrix;
    use crate::trig::{TrigField, TrigTerm};

    fn a2() -> IntegerMatrix {
        IntegerMatrix::new(&[&[2, 2], &[1, 2]]).unwrap()
    }

    #[test]
    fn linear_leaf_is_straight() {
        let f = ToralMap::linear(a2()).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.3, 0.4));
        let seg = leaf_segment(&f, &x, Bundle::U, -0.5, 0.5, LEAF_STEP).unwrap();
        let e = f.model().direction(1);
        for (t, o) in seg.t.iter().zip(&seg.offsets) {
            let err = o.distance(&(e * *t));
            assert!(err < 1e-12, "{t} {err}");
        }
        assert_eq!(seg.offsets[seg.base_index], Vector::zeros(2));
    }

    #[test]
    fn linear_quasi_isometry_is_exact() {
        let f = ToralMap::linear(a2()).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.1, 0.2));
        let q = quasi_isometry_probe(&f, &x, Bundle::S, &[1.0, 2.0, 4.0], 0.01).unwrap();
        assert!((q.q - 1.0).abs() < 1e-9 && q.b.abs() < 1e-9);
        for r in &q.rows {
            assert!((r.growth_ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_unstable_leaf_is_invariant() {
        let p = TrigField::new(2, alloc::vec![TrigTerm::new(0, &[1, 0], 0.0, 0.05)]);
        let f = ToralMap::perturbed(a2(), p).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.37, 0.81));
        let seg = leaf_segment(&f, &x, Bundle::U, -0.1, 0.1, LEAF_STEP).unwrap();
        assert!(invariance_defect(&f, &seg, 4.5, LEAF_STEP).unwrap() < 1e-5);
    }

    #[test]
    fn polyline_distance_basics() {
        let pts = [Vector::new2(0.0, 0.0), Vector::new2(1.0, 0.0)];
        assert!((polyline_distance(&pts, &Vector::new2(0.5, 0.3)) - 0.3).abs() < 1e-15);
        assert!((polyline_distance(&pts, &Vector::new2(2.0, 0.0)) - 1.0).abs() < 1e-15);
    }
}
