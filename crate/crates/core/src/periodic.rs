//! Periodic points of the lift, found by continuation from the linear model,
//! and the periodic data (exponents and Jacobians) they carry.

use alloc::vec::Vec;

use num_traits::Float;

use crate::cover::torus_distance;
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::lattice::{count_periodic_linear, ivec_to_vector, IVec};
use crate::linalg::{Matrix, Vector};
use crate::map::{MapKind, ToralMap};
use crate::spectrum::real_poly_roots;
use crate::trig::{fold, for_each_grid_point};

/// Residual required of every returned point.
pub const ORBIT_TOL: f64 = 1e-10;
/// Points closer than this on the torus are the same point.
pub const DEDUP_TOL: f64 = 1e-8;
pub const DEFAULT_N_MAX: u32 = 6;
/// Rigidity tolerance for maps with exact periodic data.
pub const TAU_FIXTURE: f64 = 1e-6;
/// Rigidity tolerance for sampled maps.
pub const TAU_SAMPLED: f64 = 1e-3;

/// A point `p` with `f̄ⁿ(p) = p + m`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodicOrbit {
    pub period: u32,
    pub minimal_period: u32,
    pub point: Vector,
    pub shift: IVec,
    /// `(1/n) ln |μᵢ|` for the eigenvalues of `Dfⁿ(p)`, ascending.
    pub exponents: Vec<f64>,
    /// `Jfⁿ(p)` as the product of `Jf` along the orbit.
    pub total_jacobian: f64,
    pub residual: f64,
}

impl PeriodicOrbit {
    /// `(1/n) ln Jfⁿ(p)`.
    pub fn log_jacobian_rate(&self) -> f64 {
        self.total_jacobian.ln() / self.period as f64
    }
}

fn newton_periodic(f: &ToralMap, x0: Vector, n: u32, m: &Vector, tol: f64, max_iter: usize) -> Option<(Vector, f64)> {
    let dim = f.dim();
    let mut x = x0;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let (y, j) = f.iterate_with_jacobian(&x, n).ok()?;
        let r = y - x - *m;
        let rn = r.norm_inf();
        if !rn.is_finite() {
            return None;
        }
        if rn < tol {
            return Some((x, rn));
        }
        if rn > 4.0 * last && last < 1e-3 {
            return None;
        }
        last = rn;
        let dx = j.sub(&Matrix::identity(dim)).solve(&r)?;
        x -= dx;
        if x.distance(&x0) > 2.0 {
            return None;
        }
    }
    None
}

/// Fixed points of `f̄ⁿ − m` for the linear model, one per class of
/// `ℤⁿ/(Aⁿ − I)ℤⁿ`, together with their shifts.
pub fn linear_periodic_points(f: &ToralMap, n: u32) -> Result<Vec<(Vector, Vector)>> {
    let an = f.model().matrix().pow(n)?;
    let b = an.minus_identity();
    if b.det() == 0 {
        return Err(Error::Degenerate("Aⁿ − I is singular"));
    }
    let bf = b.to_matrix();
    let dim = f.dim();
    let reps = b.hermite()?.representatives();
    let mut out = Vec::with_capacity(reps.len());
    for k in &reps {
        let kv = ivec_to_vector(dim, k);
        let x = bf.solve(&kv).ok_or(Error::IllConditioned("Aⁿ − I"))?;
        let j = x.map(f64::floor);
        let xf = x - j;
        out.push((xf, kv - bf.mul_vec(&j)));
    }
    Ok(out)
}

fn continue_point(f: &ToralMap, x0: Vector, m: &Vector, n: u32) -> Result<Vector> {
    if matches!(f.kind(), MapKind::Linear) {
        return Ok(x0);
    }
    let mut t = 0.0;
    let mut dt = 0.25;
    let mut x = x0;
    while t < 1.0 {
        let t1 = (t + dt).min(1.0);
        match newton_periodic(&f.homotopy(t1), x, n, m, 1e-11, 25) {
            Some((y, _)) => {
                x = y;
                t = t1;
                dt = (dt * 1.5).min(0.5);
            }
            None => {
                dt *= 0.5;
                if dt < 1e-6 {
                    return Err(Error::NonConvergence { what: "periodic continuation", steps: 0, residual: t });
                }
            }
        }
    }
    Ok(x)
}

/// Moves `x` into `[0,1)ⁿ`, adjusting the shift of `f̄ⁿ(x) = x + m`.
fn normalize(b: &Matrix, x: Vector, m: Vector) -> (Vector, Vector) {
    let mut j = x.map(f64::floor);
    let mut p = x - j;
    for i in 0..p.dim() {
        if p[i] >= 1.0 {
            p[i] = 0.0;
            j[i] += 1.0;
        }
    }
    (p, m - b.mul_vec(&j))
}

fn build_orbit(f: &ToralMap, x: Vector, m: Vector, n: u32) -> Result<PeriodicOrbit> {
    let b = f.model().matrix().pow(n)?.minus_identity().to_matrix();
    let (p, m) = normalize(&b, x, m);
    let polished = newton_periodic(f, p, n, &m, 1e-12, 8).map_or(p, |r| r.0);
    let (point, shift) = normalize(&b, polished, m);
    let mut shift_i = [0i128; 3];
    for i in 0..f.dim() {
        shift_i[i] = shift[i].round() as i128;
    }
    let (y, dfn) = f.iterate_with_jacobian(&point, n)?;
    let residual = (y - point - ivec_to_vector(f.dim(), &shift_i)).norm_inf();
    let mut total_jacobian = 1.0;
    let mut z = point;
    let mut minimal_period = n;
    for k in 1..=n {
        let st = f.step(&z)?;
        total_jacobian *= st.jac.det().abs();
        z = fold(&st.image);
        if k < n && n.is_multiple_of(k) && minimal_period == n && torus_distance(&z, &point) < DEDUP_TOL {
            minimal_period = k;
        }
    }
    Ok(PeriodicOrbit { period: n, minimal_period, point, shift: shift_i, exponents: periodic_exponents(&dfn, n), total_jacobian, residual })
}

/// `(1/n) ln |μ|` for the eigenvalues of `M = Dfⁿ(p)`, ascending. The
/// smallest modulus is taken from `|det M|` divided by the others, which is
/// accurate even when it is tiny.
pub fn periodic_exponents(m: &Matrix, n: u32) -> Vec<f64> {
    let dim = m.dim();
    let det = m.det();
    let coeffs: Vec<f64> = if dim == 2 {
        alloc::vec![1.0, -m.trace(), det]
    } else {
        let minors = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0) + m.get(0, 0) * m.get(2, 2) - m.get(0, 2) * m.get(2, 0)
            + m.get(1, 1) * m.get(2, 2)
            - m.get(1, 2) * m.get(2, 1);
        alloc::vec![1.0, -m.trace(), minors, -det]
    };
    let mut mods: Vec<f64> = real_poly_roots(&coeffs).iter().map(|(re, im)| re.hypot(*im)).collect();
    mods.sort_by(|a, b| a.total_cmp(b));
    let others: f64 = mods[1..].iter().product();
    mods[0] = det.abs() / others;
    mods.iter().map(|v| v.ln() / n as f64).collect()
}

/// All points of period `n` (not necessarily minimal) in `[0,1)ⁿ`.
///
/// Each exact periodic point of `A` is continued along `A + t·p` (or the
/// scaled coordinate change) from `t = 0` to `t = 1` with its lattice shift
/// held fixed. The number found must equal `|det(Aⁿ − I)|`.
pub fn find_periodic(f: &ToralMap, n: u32) -> Result<Vec<PeriodicOrbit>> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be positive"));
    }
    let expected = count_periodic_linear(f.model().matrix(), n)?;
    let seeds = linear_periodic_points(f, n)?;
    let mut orbits = try_map_indexed(seeds.len(), |i| {
        let (x0, m) = seeds[i];
        let x = continue_point(f, x0, &m, n)?;
        build_orbit(f, x, m, n)
    })?;
    orbits.sort_by(|a, b| {
        for i in 0..a.point.dim() {
            let c = a.point[i].total_cmp(&b.point[i]);
            if c != core::cmp::Ordering::Equal {
                return c;
            }
        }
        core::cmp::Ordering::Equal
    });
    let unique = dedup(orbits);
    if unique.len() as u128 != expected || unique.iter().any(|o| !(o.residual < ORBIT_TOL)) {
        return Err(Error::CountMismatch { period: n, found: unique.len(), expected });
    }
    Ok(unique)
}

fn dedup(orbits: Vec<PeriodicOrbit>) -> Vec<PeriodicOrbit> {
    let mut out: Vec<PeriodicOrbit> = Vec::with_capacity(orbits.len());
    for o in orbits {
        if !out.iter().any(|p| torus_distance(&p.point, &o.point) < DEDUP_TOL) {
            out.push(o);
        }
    }
    out
}

/// Newton from every point of a `g`ⁿ grid, with the shift rounded from the
/// seed. Slow and without guarantees; used to cross-check
/// [`find_periodic`].
pub fn find_periodic_grid(f: &ToralMap, n: u32, g: usize) -> Result<Vec<Vector>> {
    let mut seeds = Vec::new();
    for_each_grid_point(f.dim(), g, 0.5, |x| seeds.push(x));
    let found = try_map_indexed(seeds.len(), |i| -> Result<Option<Vector>> {
        let x0 = seeds[i];
        let (y, _) = f.iterate_with_jacobian(&x0, n)?;
        let m = (y - x0).map(f64::round);
        Ok(newton_periodic(f, x0, n, &m, 1e-12, 40).map(|(x, _)| fold(&x)))
    })?;
    let mut out: Vec<Vector> = Vec::new();
    for x in found.into_iter().flatten() {
        if !out.iter().any(|p| torus_distance(p, &x) < DEDUP_TOL) {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RigidityVerdict {
    RigidWithin {
        tau: f64,
    },
    /// Indices into the report's orbit list realizing the spread.
    Violated {
        witness: (usize, usize),
        spread: f64,
    },
}

impl RigidityVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RigidityVerdict::RigidWithin { .. })
    }
}

/// Spread of one periodic quantity over all orbits.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spread {
    pub name: alloc::string::String,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    /// Largest deviation from the linear value.
    pub max_deviation: f64,
    pub linear_value: f64,
    pub verdict: RigidityVerdict,
}

fn spread_of(name: &str, values: &[f64], linear: f64, tau: f64) -> Spread {
    let (mut imin, mut imax) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    let spread = values[imax] - values[imin];
    let max_deviation = values.iter().map(|v| (v - linear).abs()).fold(0.0, f64::max);
    let verdict = if max_deviation <= tau {
        RigidityVerdict::RigidWithin { tau }
    } else {
        let far = values.iter().enumerate().max_by(|a, b| (a.1 - linear).abs().total_cmp(&(b.1 - linear).abs())).unwrap().0;
        let other = if far == imin { imax } else { imin };
        RigidityVerdict::Violated { witness: (far.min(other), far.max(other)), spread }
    };
    Spread { name: name.into(), min: values[imin], max: values[imax], spread, max_deviation, linear_value: linear, verdict }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodicDataReport {
    pub n_max: u32,
    pub tau: f64,
    /// `(n, found, expected)`.
    pub counts: Vec<(u32, usize, u128)>,
    pub orbits: Vec<PeriodicOrbit>,
    /// One entry per exponent index, ascending, named after the bundle.
    pub exponents: Vec<Spread>,
    /// `(1/n) ln Jfⁿ(p)` against `ln d`.
    pub log_jacobian: Spread,
    /// Largest `|Jfⁿ(p)/dⁿ − 1|`.
    pub jacobian_ratio_defect: f64,
}

impl PeriodicDataReport {
    pub fn exponent(&self, name: &str) -> Option<&Spread> {
        self.exponents.iter().find(|s| s.name == name)
    }
}

pub fn periodic_data_report(f: &ToralMap, n_max: u32, tau: f64) -> Result<PeriodicDataReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive"));
    }
    let mut orbits = Vec::new();
    let mut counts = Vec::new();
    for n in 1..=n_max {
        let found = find_periodic(f, n)?;
        counts.push((n, found.len(), count_periodic_linear(f.model().matrix(), n)?));
        orbits.extend(found);
    }
    let names: &[&str] = if f.dim() == 2 { &["s", "u"] } else { &["s", "wu", "su"] };
    let lin = f.model().exponents();
    let exponents = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let v: Vec<f64> = orbits.iter().map(|o| o.exponents[i]).collect();
            spread_of(name, &v, lin[i], tau)
        })
        .collect();
    let ln_d = (f.degree() as f64).ln();
    let lj: Vec<f64> = orbits.iter().map(|o| o.log_jacobian_rate()).collect();
    let jacobian_ratio_defect =
        orbits.iter().map(|o| (o.total_jacobian / (f.degree() as f64).powi(o.period as i32) - 1.0).abs()).fold(0.0, f64::max);
    Ok(PeriodicDataReport {
        n_max,
        tau,
        counts,
        exponents,
        log_jacobian: spread_of("log_jacobian", &lj, ln_d, tau),
        jacobian_ratio_defect,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntegerMatrix;
    use crate::trig::{TrigField, TrigTerm};

    fn a2() -> IntegerMatrix {
        IntegerMatrix::new(&[&[2, 2], &[1, 2]]).unwrap()
    }

    fn perturbed(eps: f64) -> ToralMap {
        ToralMap::perturbed(a2(), TrigField::new(2, alloc::vec![TrigTerm::new(0, &[1, 0], 0.0, eps)])).unwrap()
    }

    #[test]
    fn linear_period_two_points_are_rational() {
        let f = ToralMap::linear(a2()).unwrap();
        let pts = find_periodic(&f, 2).unwrap();
        assert_eq!(pts.len(), 7);
        let b = Matrix::from_rows(&[&[5.0, 8.0], &[4.0, 5.0]]);
        for p in &pts {
            let k = b.mul_vec(&p.point);
            assert!((k - k.map(f64::round)).norm_inf() < 1e-12);
            assert!(p.residual < ORBIT_TOL);
        }
    }

    #[test]
    fn perturbed_fixed_point_near_origin() {
        let pts = find_periodic(&perturbed(0.05), 1).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(torus_distance(&pts[0].point, &Vector::new2(0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn counts_match_lefschetz() {
        let f = perturbed(0.1);
        for (n, want) in [(1, 1), (2, 7), (3, 31), (4, 119)] {
            assert_eq!(find_periodic(&f, n).unwrap().len(), want);
        }
    }

    #[test]
    fn grid_route_agrees() {
        let f = perturbed(0.1);
        let cont = find_periodic(&f, 2).unwrap();
        let grid = find_periodic_grid(&f, 2, 48).unwrap();
        assert_eq!(grid.len(), cont.len());
        for g in &grid {
            assert!(cont.iter().any(|c| torus_distance(&c.point, g) < 1e-8));
        }
    }

    #[test]
    fn minimal_periods_and_multiplicativity() {
        let f = perturbed(0.1);
        let pts = find_periodic(&f, 4).unwrap();
        let minimal: Vec<u32> = pts.iter().map(|p| p.minimal_period).collect();
        assert_eq!(minimal.iter().filter(|&&k| k == 1).count(), 1);
        assert_eq!(minimal.iter().filter(|&&k| k == 2).count(), 6);
        for p in &pts {
            let (_, dfn) = f.iterate_with_jacobian(&p.point, 4).unwrap();
            assert!((dfn.det().abs() / p.total_jacobian - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_report_is_rigid() {
        let f = ToralMap::linear(a2()).unwrap();
        let r = periodic_data_report(&f, 3, TAU_FIXTURE).unwrap();
        assert!(r.exponents.iter().all(|s| s.verdict.passed() && s.spread < 1e-12));
        assert!(r.jacobian_ratio_defect < 1e-12);
    }

    #[test]
    fn perturbed_report_is_not_rigid() {
        let r = periodic_data_report(&perturbed(0.1), 4, TAU_SAMPLED).unwrap();
        assert!(r.exponent("u").unwrap().spread > 1e-3);
        assert!(!r.exponent("u").unwrap().verdict.passed());
    }
}
