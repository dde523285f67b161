//! Conditional densities of the SRB and inverse SRB measures along leaves,
//! and the Pesin / inverse-Pesin consistency check.

use alloc::vec::Vec;

use num_traits::Float;

use crate::cover::CoverPoint;
use crate::dynamics::{
    cover_backward_orbit, default_depth, full_spectrum_qr, reference_direction, stable_log_stretches, unstable_log_stretches,
    BranchSelector, Bundle, ExponentEstimate, Sampler,
};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::leaf::LeafSegment;
use crate::linalg::{Matrix, Vector};
use crate::map::ToralMap;
use crate::stats::{batch_means, BATCHES};
use crate::trig::fold;

/// Past of a cover point with `ln J^u f` recorded at `x₋₁ … x₋K`.
#[derive(Clone, Debug)]
pub struct UnstablePast {
    pub points: Vec<CoverPoint>,
    /// `log_ju[k−1] = ln J^u f(x₋ₖ)`.
    pub log_ju: Vec<f64>,
}

/// One pass along the cover past to depth `K + K_dir`: the unstable
/// direction is seeded at the deepest point and pushed forward, recording
/// stretches at the last `K` points.
pub fn unstable_past(f: &ToralMap, x: &CoverPoint, depth: usize) -> Result<UnstablePast> {
    let kd = default_depth(f, Bundle::U);
    let orbit = cover_backward_orbit(f, x, depth + kd)?;
    let cover = orbit.cover.expect("cover orbit");
    let mut v = reference_direction(f, Bundle::U)?;
    let mut log_ju = alloc::vec![0.0; depth];
    for k in (1..=depth + kd).rev() {
        let w = f.jacobian(&orbit.points[k])?.mul_vec(&v);
        let nw = w.norm();
        if k <= depth {
            log_ju[k - 1] = nw.ln();
        }
        v = w * (1.0 / nw);
    }
    Ok(UnstablePast { points: cover[1..=depth].to_vec(), log_ju })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaEstimate {
    pub value: f64,
    /// Bound on `|value − Δ|` from the geometric tail.
    pub tail_bound: f64,
    pub depth: usize,
}

/// Relative tail bound on a product `Π exp(aₖ − bₖ)` whose terms are
/// controlled by distances `dₖ` contracting geometrically.
fn tail_bound(terms: &[f64], dists: &[f64]) -> f64 {
    let k = dists.len();
    if k < 2 || dists[k - 1] == 0.0 {
        return 0.0;
    }
    let lip = terms.iter().zip(dists).filter(|(_, d)| **d > 0.0).map(|(t, d)| t.abs() / d).fold(0.0, f64::max);
    let rho = (dists[k - 1] / dists[k - 2]).min(0.99);
    let tail = lip * dists[k - 1] * rho / (1.0 - rho);
    2.0 * tail.exp_m1()
}

/// Sums `terms` up to the depth where the two orbits come closest. Past
/// that depth the separation is rounding error amplified by the transverse
/// expansion, not the leaf geometry. Orbits that never approach each other
/// are not on one leaf.
fn truncated_product(terms: &[f64], dists: &[f64]) -> Result<DeltaEstimate> {
    let (kmin, dmin) = dists.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0, 0.0));
    if dists.len() >= 2 && dists[0] > 1e-12 && dmin > 1e-2 * dists[0] {
        return Err(Error::NotOnSameLeaf);
    }
    let k = kmin + 1;
    let value = terms[..k].iter().sum::<f64>().exp();
    Ok(DeltaEstimate { value, tail_bound: value * tail_bound(&terms[..k], &dists[..k]), depth: k })
}

fn delta_from_pasts(px: &UnstablePast, py: &UnstablePast) -> Result<DeltaEstimate> {
    let dists: Vec<f64> = px.points.iter().zip(&py.points).map(|(a, b)| a.distance(b)).collect();
    let terms: Vec<f64> = px.log_ju.iter().zip(&py.log_ju).map(|(a, b)| a - b).collect();
    truncated_product(&terms, &dists)
}

/// `Δᵘ(x, y) = Π_{k≥1} J^u f(x₋ₖ)/J^u f(y₋ₖ)` along cover pasts, truncated
/// at depth `K`. Points on a common unstable leaf have pasts that converge;
/// pasts that separate are reported as [`Error::NotOnSameLeaf`].
pub fn delta_u(f: &ToralMap, x: &CoverPoint, y: &CoverPoint, depth: usize) -> Result<DeltaEstimate> {
    if x == y {
        return Ok(DeltaEstimate { value: 1.0, tail_bound: 0.0, depth });
    }
    delta_from_pasts(&unstable_past(f, x, depth)?, &unstable_past(f, y, depth)?)
}

/// Unnormalized `Δᵘ(x_ref, xᵢ)` for points of one leaf.
pub fn leaf_density_samples(f: &ToralMap, pts: &[CoverPoint], ref_index: usize) -> Result<Vec<f64>> {
    let depth = default_depth(f, Bundle::U);
    let pasts = try_map_indexed(pts.len(), |i| unstable_past(f, &pts[i], depth))?;
    (0..pts.len()).map(|i| delta_from_pasts(&pasts[ref_index], &pasts[i]).map(|d| d.value)).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityProfile {
    pub t: Vec<f64>,
    pub density: Vec<f64>,
    pub ref_index: usize,
    pub depth: usize,
    /// `L = ∫ Δ` over the segment.
    pub normalization: f64,
    /// Largest tail bound of the normalized samples.
    pub tail_bound: f64,
}

/// Quadrature on equally spaced samples: Simpson for an even number of
/// intervals, trapezoid otherwise.
pub fn integrate_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    if n == 0 {
        return 0.0;
    }
    if n.is_multiple_of(2) {
        let mut s = values[0] + values[n];
        for (i, v) in values.iter().enumerate().take(n).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    } else {
        (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n])) * h
    }
}

/// `ρ^u = Δᵘ(ref, ·)/L` along a segment.
pub fn conditional_density_u(f: &ToralMap, seg: &LeafSegment, ref_index: usize, depth: usize) -> Result<DensityProfile> {
    if seg.bundle != Bundle::U && seg.bundle != Bundle::Su {
        return Err(Error::InvalidArgument("unstable conditional densities need an unstable segment"));
    }
    let pts = seg.points();
    let pasts = try_map_indexed(pts.len(), |i| unstable_past(f, &pts[i], depth))?;
    let deltas: Vec<DeltaEstimate> = (0..pts.len()).map(|i| delta_from_pasts(&pasts[ref_index], &pasts[i])).collect::<Result<_>>()?;
    normalize_profile(seg, ref_index, depth, &deltas)
}

fn normalize_profile(seg: &LeafSegment, ref_index: usize, depth: usize, deltas: &[DeltaEstimate]) -> Result<DensityProfile> {
    let h = seg.t[1] - seg.t[0];
    let vals: Vec<f64> = deltas.iter().map(|d| d.value).collect();
    let l = integrate_samples(&vals, h);
    if !(l > 0.0) {
        return Err(Error::Degenerate("density integrates to zero"));
    }
    Ok(DensityProfile {
        t: seg.t.clone(),
        density: vals.iter().map(|v| v / l).collect(),
        ref_index,
        depth,
        normalization: l,
        tail_bound: deltas.iter().map(|d| d.tail_bound / l).fold(0.0, f64::max),
    })
}

/// Forward orbit of `x` with `ln Jf` and `ln J^s f` per step.
fn stable_forward(f: &ToralMap, x: &Vector, depth: usize) -> Result<(Vec<Vector>, Vec<f64>, Vec<f64>)> {
    let kd = default_depth(f, Bundle::S);
    let mut pts = Vec::with_capacity(depth + kd);
    let mut jacs: Vec<Matrix> = Vec::with_capacity(depth + kd);
    let mut z = fold(x);
    for _ in 0..depth + kd {
        let st = f.step(&z)?;
        pts.push(z);
        jacs.push(st.jac);
        z = fold(&st.image);
    }
    let mut v = reference_direction(f, Bundle::S)?;
    let mut log_js = alloc::vec![0.0; depth];
    for k in (0..depth + kd).rev() {
        let w = jacs[k].solve(&v).ok_or(Error::IllConditioned("Jacobian"))?;
        let nw = w.norm();
        v = w * (1.0 / nw);
        if k < depth {
            log_js[k] = -nw.ln();
        }
    }
    let log_j = jacs[..depth].iter().map(|j| j.det().abs().ln()).collect();
    pts.truncate(depth);
    Ok((pts, log_j, log_js))
}

/// `Δˢ(x, y) = Π_{k≥0} [Jf(fᵏx)/Jf(fᵏy)]·[J^s f(fᵏx)/J^s f(fᵏy)]`, the
/// product as written, truncated at `K`. Stable leaves carry no past.
pub fn delta_s(f: &ToralMap, x: &CoverPoint, y: &CoverPoint, depth: usize) -> Result<DeltaEstimate> {
    if x == y {
        return Ok(DeltaEstimate { value: 1.0, tail_bound: 0.0, depth });
    }
    // forward orbits on the cover keep track of the true separation
    let (px, jx, sx) = stable_forward(f, &x.frac, depth)?;
    let (py, jy, sy) = stable_forward(f, &y.frac, depth)?;
    let d0 = y.diff(x);
    let mut dists = Vec::with_capacity(depth);
    for k in 0..depth {
        let d = crate::cover::torus_delta(&py[k], &px[k]);
        dists.push(if k == 0 { d0.norm() } else { d.norm() });
    }
    let terms: Vec<f64> = (0..depth).map(|k| (jx[k] - jy[k]) + (sx[k] - sy[k])).collect();
    truncated_product(&terms, &dists)
}

/// Stable conditional density `Δˢ(ref, ·)/L` along a stable segment.
pub fn conditional_density_s(f: &ToralMap, seg: &LeafSegment, ref_index: usize, depth: usize) -> Result<DensityProfile> {
    if seg.bundle != Bundle::S {
        return Err(Error::InvalidArgument("stable conditional densities need a stable segment"));
    }
    let pts = seg.points();
    let deltas = try_map_indexed(pts.len(), |i| delta_s(f, &pts[ref_index], &pts[i], depth))?;
    normalize_profile(seg, ref_index, depth, &deltas)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PesinVerdict {
    ConsistentSRB,
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PesinReport {
    pub exponents: Vec<ExponentEstimate>,
    /// Sum of positive exponents.
    pub e1: f64,
    /// `ln d − λ^s`.
    pub e2: f64,
    pub difference: f64,
    pub stderr: f64,
    pub verdict: PesinVerdict,
    pub sampler: alloc::string::String,
    pub n: usize,
}

/// Floor below which a difference counts as zero regardless of the error bar.
const PESIN_FLOOR: f64 = 1e-12;

/// Compares the two entropy surrogates along orbits started from `sampler`.
/// On 𝕋² the error bar is a batch-means error of the same-orbit series
/// `ln J^u + ln J^s − ln d`; on 𝕋³ it comes from `ln Jf − ln d` (the QR
/// identity makes the two equal).
pub fn pesin_report(f: &ToralMap, sampler: &Sampler<'_>, n: usize, chains: usize) -> Result<PesinReport> {
    let chains = chains.max(1);
    let per = n / chains;
    if per < crate::dynamics::MIN_SAMPLES {
        return Err(Error::InvalidArgument("each chain needs at least 1000 iterates"));
    }
    let starts = sampler.draw(f.dim(), chains)?;
    let ln_d = (f.degree() as f64).ln();
    let seed = sampler.seed().unwrap_or(0);
    if f.dim() == 2 {
        let series = try_map_indexed(chains, |c| -> Result<(Vec<f64>, Vec<f64>)> {
            let sel = BranchSelector::RandomSeeded(seed.wrapping_add(c as u64));
            Ok((unstable_log_stretches(f, &starts[c], per, &sel)?, stable_log_stretches(f, &starts[c], per)?))
        })?;
        let u: Vec<f64> = series.iter().flat_map(|s| s.0.iter().copied()).collect();
        let s: Vec<f64> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
        let comb: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a + b - ln_d).collect();
        let eu = batch_means(&u, BATCHES);
        let es = batch_means(&s, BATCHES);
        let diff = batch_means(&comb, BATCHES);
        let e1 = eu.mean;
        let e2 = ln_d - es.mean;
        let difference = e1 - e2;
        Ok(PesinReport {
            exponents: alloc::vec![
                ExponentEstimate { bundle: Bundle::S, value: es.mean, stderr: es.stderr, n: es.n },
                ExponentEstimate { bundle: Bundle::U, value: eu.mean, stderr: eu.stderr, n: eu.n },
            ],
            e1,
            e2,
            difference,
            stderr: diff.stderr,
            verdict: verdict(difference, diff.stderr),
            sampler: sampler.name().into(),
            n: per * chains,
        })
    } else {
        let per = per.max(10_000);
        let runs =
            try_map_indexed(chains, |c| full_spectrum_qr(f, &starts[c], per, &BranchSelector::RandomSeeded(seed.wrapping_add(c as u64))))?;
        let mut exps = Vec::new();
        for i in 0..3 {
            let vals: Vec<f64> = runs.iter().map(|r| r.exponents[i].value).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let se = (runs.iter().map(|r| r.exponents[i].stderr.powi(2)).sum::<f64>()).sqrt() / runs.len() as f64;
            exps.push(ExponentEstimate { bundle: runs[0].exponents[i].bundle, value: mean, stderr: se, n: per * chains });
        }
        let e1 = exps[1].value + exps[2].value;
        let e2 = ln_d - exps[0].value;
        let difference = e1 - e2;
        let stderr = (runs.iter().map(|r| r.log_jacobian.stderr.powi(2)).sum::<f64>()).sqrt() / runs.len() as f64;
        Ok(PesinReport {
            exponents: exps,
            e1,
            e2,
            difference,
            stderr,
            verdict: verdict(difference, stderr),
            sampler: sampler.name().into(),
            n: per * chains,
        })
    }
}

fn verdict(difference: f64, stderr: f64) -> PesinVerdict {
    if difference.abs() <= (3.0 * stderr).max(PESIN_FLOOR) {
        PesinVerdict::ConsistentSRB
    } else {
        PesinVerdict::Inconsistent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntegerMatrix;
    use crate::leaf::{leaf_segment, LEAF_STEP};
    use crate::trig::{TrigField, TrigTerm};

    fn a2() -> IntegerMatrix {
        IntegerMatrix::new(&[&[2, 2], &[1, 2]]).unwrap()
    }

    #[test]
    fn linear_delta_is_one() {
        let f = ToralMap::linear(a2()).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.2, 0.3));
        let y = x.translate(&(f.model().direction(1) * 0.2));
        let d = delta_u(&f, &x, &y, 20).unwrap();
        assert!((d.value - 1.0).abs() < 1e-14);
        assert_eq!(delta_u(&f, &x, &x, 20).unwrap().value, 1.0);
    }

    #[test]
    fn off_leaf_pasts_separate() {
        let f = ToralMap::linear(a2()).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.2, 0.3));
        let y = x.translate(&(f.model().direction(0) * 0.01));
        assert_eq!(delta_u(&f, &x, &y, 20), Err(Error::NotOnSameLeaf));
    }

    #[test]
    fn linear_density_is_uniform() {
        let f = ToralMap::linear(a2()).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.6, 0.1));
        let seg = leaf_segment(&f, &x, Bundle::U, -0.25, 0.25, 0.01).unwrap();
        let prof = conditional_density_u(&f, &seg, seg.base_index, 20).unwrap();
        assert!(prof.density.iter().all(|d| (d - 2.0).abs() < 1e-12));
    }

    #[test]
    fn delta_s_linear_and_cocycle() {
        let p = TrigField::new(2, alloc::vec![TrigTerm::new(0, &[1, 0], 0.0, 0.05)]);
        let f = ToralMap::perturbed(a2(), p).unwrap();
        let x = CoverPoint::from_vector(&Vector::new2(0.3, 0.6));
        let seg = leaf_segment(&f, &x, Bundle::S, -0.1, 0.1, LEAF_STEP).unwrap();
        let (a, b, c) = (seg.point(0), seg.point(100), seg.point(200));
        let ab = delta_s(&f, &a, &b, 40).unwrap();
        let bc = delta_s(&f, &b, &c, 40).unwrap();
        let ac = delta_s(&f, &a, &c, 40).unwrap();
        let tol = 2.0 * (ab.tail_bound + bc.tail_bound + ac.tail_bound);
        assert!((ab.value * bc.value - ac.value).abs() <= tol, "{ab:?} {bc:?} {ac:?}");
        assert!(tol < 1e-3);
        let lin = ToralMap::linear(a2()).unwrap();
        let y = x.translate(&(lin.model().direction(0) * 0.3));
        assert!((delta_s(&lin, &x, &y, 40).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_and_trapezoid() {
        let v: Vec<f64> = (0..=4).map(|i| (i as f64 * 0.25).powi(2)).collect();
        assert!((integrate_samples(&v, 0.25) - 1.0 / 3.0).abs() < 1e-15);
        assert!((integrate_samples(&[1.0, 1.0, 1.0, 1.0], 0.5) - 1.5).abs() < 1e-15);
    }
}
