//! Partially hyperbolic machinery on 𝕋³: the splitting `E^s ⊕ E^wu ⊕ E^su`,
//! weak unstable leaves, a holonomy diagnostic for absolute continuity of
//! the wu-foliation, and the four-way equivalence on periodic data.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cover::CoverPoint;
use crate::dynamics::{direction_at, reference_direction, Bundle};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::leaf::{leaf_from, leaf_point, leaf_segment, quasi_isometry_probe, LeafSegment, QuasiIsometry};
use crate::linalg::{line_angle, Matrix, Vector};
use crate::map::{MapKind, ToralMap};
use crate::periodic::{periodic_data_report, PeriodicDataReport};
use crate::stats::ks_uniform;
use crate::teoplus::ItemVerdict;

/// Smallest accepted one-step domination ratio.
pub const DOMINATION_GAP: f64 = 1.05;
/// Smallest accepted angle between bundles.
pub const MIN_ANGLE: f64 = 1e-4;
pub const INVARIANCE_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TripleFrame {
    pub basepoint: CoverPoint,
    pub s: Vector,
    pub wu: Vector,
    pub su: Vector,
    /// Minimum over the sampled orbit of `‖Df v^wu‖/‖Df v^s‖` and
    /// `‖Df v^su‖/‖Df v^wu‖`.
    pub gaps: [f64; 2],
    /// Mean log stretch of each bundle over the sampled orbit.
    pub log_stretches: [f64; 3],
    pub min_angle: f64,
    /// Largest angle between `Df(x)v^σ(x)` and `v^σ(f x)`.
    pub invariance: f64,
    pub orbit_points: usize,
}

fn frame_at(f: &ToralMap, x: &CoverPoint) -> Result<[Vector; 3]> {
    Ok([
        direction_at(f, x, Bundle::S, false)?.direction,
        direction_at(f, x, Bundle::Wu, false)?.direction,
        direction_at(f, x, Bundle::Su, false)?.direction,
    ])
}

/// The three directions at `x` and at `n − 1` further points of its
/// forward orbit, with one-step domination ratios and invariance defects.
pub fn triple_splitting(f: &ToralMap, x: &CoverPoint, n: usize) -> Result<TripleFrame> {
    if f.dim() != 3 {
        return Err(Error::InvalidArgument("the triple splitting lives on 𝕋³"));
    }
    let n = n.max(1);
    let mut pts = alloc::vec![*x];
    for _ in 0..n {
        let next = f.eval_cover(pts.last().unwrap())?;
        pts.push(next);
    }
    let frames = try_map_indexed(pts.len(), |i| frame_at(f, &pts[i]))?;
    let mut gaps = [f64::INFINITY; 2];
    let mut sums = [0.0; 3];
    let mut invariance: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    for k in 0..n {
        let j = f.jacobian(&pts[k].frac)?;
        let fr = &frames[k];
        min_angle = min_angle.min(line_angle(&fr[0], &fr[1])).min(line_angle(&fr[1], &fr[2])).min(line_angle(&fr[0], &fr[2]));
        let mut st = [0.0; 3];
        for b in 0..3 {
            let w = j.mul_vec(&fr[b]);
            st[b] = w.norm();
            sums[b] += st[b].ln();
            invariance = invariance.max(line_angle(&w, &frames[k + 1][b]));
        }
        gaps[0] = gaps[0].min(st[1] / st[0]);
        gaps[1] = gaps[1].min(st[2] / st[1]);
    }
    if gaps[0] < DOMINATION_GAP || gaps[1] < DOMINATION_GAP {
        return Err(Error::DominationFailure { gap: gaps[0].min(gaps[1]) });
    }
    if min_angle < MIN_ANGLE {
        return Err(Error::Degenerate("bundles are nearly parallel"));
    }
    let fr = &frames[0];
    Ok(TripleFrame {
        basepoint: *x,
        s: fr[0],
        wu: fr[1],
        su: fr[2],
        gaps,
        log_stretches: sums.map(|s| s / n as f64),
        min_angle,
        invariance,
        orbit_points: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WuLeaf {
    pub segment: LeafSegment,
    /// Length of the image polyline over the length of the segment.
    pub stretch: f64,
    /// `e^{λ^wu_A}`.
    pub expected: f64,
    pub stretch_ok: bool,
}

/// Relative tolerance on the wu stretch of a segment.
pub const STRETCH_TOL: f64 = 0.1;

/// wu-leaf of the given length from `x` and the stretch of its image.
pub fn integrate_wu_leaf(f: &ToralMap, x: &CoverPoint, length: f64, max_step: f64) -> Result<WuLeaf> {
    let segment = leaf_from(f, x, Bundle::Wu, length, max_step)?;
    let images: Vec<Vector> = segment.points().iter().map(|p| f.eval_cover(p).map(|q| q.diff(x))).collect::<Result<_>>()?;
    let image_length: f64 = images.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let stretch = image_length / segment.length();
    let expected = f.model().exponents()[1].exp();
    Ok(WuLeaf { stretch_ok: (stretch / expected - 1.0).abs() < STRETCH_TOL, segment, stretch, expected })
}

/// Quasi-isometry of the wu-foliation: leaf against Euclidean distance out
/// to arclength `radius`.
pub fn wu_quasi_isometry(f: &ToralMap, x: &CoverPoint, radius: f64, max_step: f64) -> Result<QuasiIsometry> {
    quasi_isometry_probe(f, x, Bundle::Wu, &[radius / 4.0, radius / 2.0, radius], max_step)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HolonomyOptions {
    pub center: Vector,
    pub radius: f64,
    /// Offset of the target disk along `e^wu`.
    pub offset: f64,
    pub samples: usize,
    pub k: usize,
    pub seed: u64,
    pub max_step: f64,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self { center: Vector::new3(0.3, 0.4, 0.5), radius: 0.1, offset: 0.4, samples: 1000, k: 8, seed: 11, max_step: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HolonomyRecord {
    /// Orthonormal basis `(q₁, q₂)` of `span(e^s, e^su)` shared by both disks.
    pub plane: [Vector; 2],
    /// Unit normal, oriented along `e^wu`.
    pub normal: Vector,
    pub source_center: Vector,
    pub target_center: Vector,
    /// Disk coordinates of each source point and its leaf image.
    pub source: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
    /// Arclength travelled along each leaf.
    pub travel: Vec<f64>,
    pub endpoint_defect: f64,
    /// k-NN Jacobian estimates.
    pub jacobian: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub median: f64,
    /// Median with `4k` neighbours, for the stability check.
    pub median_wide: f64,
    /// KS distance of the normalized squared radius of the image points.
    pub ks: f64,
    /// Change-of-variables prediction for conjugated maps.
    pub predicted: Option<Vec<f64>>,
    pub max_prediction_error: Option<f64>,
    /// Jacobians finite, positive and stable under the neighbour count.
    pub ac_passed: bool,
}

/// Endpoint tolerance when locating the crossing with the target disk.
const CROSSING_TOL: f64 = 1e-9;
/// Relative agreement of the two k-NN medians.
const AC_STABILITY: f64 = 0.05;

fn follow_to_plane(
    f: &ToralMap,
    z: &CoverPoint,
    normal: &Vector,
    c2: &Vector,
    chunk: f64,
    budget: f64,
    max_step: f64,
) -> Result<(Vector, f64, f64)> {
    let g = |p: &CoverPoint| normal.dot(&(p.to_vector() - *c2));
    let mut start = *z;
    let mut travelled = 0.0;
    loop {
        if travelled >= budget {
            return Err(Error::LeafMiss);
        }
        let seg = leaf_from(f, &start, Bundle::Wu, chunk, max_step)?;
        let vals: Vec<f64> = seg.points().iter().map(g).collect();
        let Some(i) = vals.windows(2).position(|w| w[0] <= 0.0 && w[1] > 0.0) else {
            if vals[0] > 0.0 {
                return Err(Error::LeafMiss);
            }
            start = seg.point(seg.len() - 1);
            travelled += seg.length();
            continue;
        };
        let base = seg.point(i);
        let h = seg.t[i + 1] - seg.t[i];
        // secant in arclength from the last sample before the crossing
        let (mut s0, mut g0, mut s1, mut g1) = (0.0, vals[i], h, vals[i + 1]);
        let mut best = (seg.point(i + 1), g1.abs(), seg.t[i + 1]);
        for _ in 0..8 {
            let s = s1 - g1 * (s1 - s0) / (g1 - g0);
            let p = leaf_point(f, &base, Bundle::Wu, s, max_step)?;
            let gp = g(&p);
            if gp.abs() < best.1 {
                best = (p, gp.abs(), seg.t[i] + s);
            }
            if gp.abs() < CROSSING_TOL {
                break;
            }
            (s0, g0, s1, g1) = (s1, g1, s, gp);
        }
        return Ok((best.0.to_vector(), best.1, travelled + best.2));
    }
}

/// Least-squares linear map from neighbour offsets in the source to those
/// in the target, and its absolute determinant.
fn knn_jacobians(src: &[[f64; 2]], dst: &[[f64; 2]], k: usize) -> Vec<f64> {
    let n = src.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| ((src[j][0] - src[i][0]).powi(2) + (src[j][1] - src[i][1]).powi(2), j)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            let mut bx = [0.0; 2];
            let mut by = [0.0; 2];
            for &(_, j) in d.iter().take(k) {
                let a = [src[j][0] - src[i][0], src[j][1] - src[i][1]];
                let b = [dst[j][0] - dst[i][0], dst[j][1] - dst[i][1]];
                sxx += a[0] * a[0];
                sxy += a[0] * a[1];
                syy += a[1] * a[1];
                for r in 0..2 {
                    bx[r] += a[0] * b[r];
                    by[r] += a[1] * b[r];
                }
            }
            // M solves M·(AᵀA) = BᵀA; det M = det(BᵀA)/det(AᵀA)
            let det_ata = sxx * syy - sxy * sxy;
            let det_bta = bx[0] * by[1] - bx[1] * by[0];
            (det_bta / det_ata).abs()
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Follows wu-leaves from random points of a flat `s×su` disk to a
/// parallel disk displaced along `e^wu`, and estimates the Jacobian of the
/// holonomy by nearest-neighbour area ratios.
pub fn holonomy_probe(f: &ToralMap, opts: &HolonomyOptions) -> Result<HolonomyRecord> {
    if f.dim() != 3 {
        return Err(Error::InvalidArgument("holonomy probes live on 𝕋³"));
    }
    let m = f.model();
    let (es, ewu, esu) = (m.direction(0), reference_direction(f, Bundle::Wu)?, m.direction(2));
    let q1 = es.normalized();
    let q2 = (esu - q1 * q1.dot(&esu)).normalized();
    let mut normal = q1.cross(&q2).normalized();
    if normal.dot(&ewu) < 0.0 {
        normal = -normal;
    }
    let c1 = opts.center;
    let c2 = c1 + ewu * opts.offset;
    let budget = 2.0 * opts.offset / normal.dot(&ewu) + 4.0 * opts.radius;
    let chunk = 1.25 * opts.offset + opts.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let source: Vec<[f64; 2]> = (0..opts.samples)
        .map(|_| {
            let r = opts.radius * rng.gen::<f64>().sqrt();
            let a = TAU * rng.gen::<f64>();
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let hits = try_map_indexed(source.len(), |i| {
        let z = c1 + q1 * source[i][0] + q2 * source[i][1];
        follow_to_plane(f, &CoverPoint::from_vector(&z), &normal, &c2, chunk, budget, opts.max_step)
    })?;
    let target: Vec<[f64; 2]> = hits.iter().map(|(w, _, _)| [q1.dot(&(*w - c2)), q2.dot(&(*w - c2))]).collect();
    let travel: Vec<f64> = hits.iter().map(|h| h.2).collect();
    let endpoint_defect = hits.iter().map(|h| h.1).fold(0.0, f64::max);
    let jacobian = knn_jacobians(&source, &target, opts.k);
    let wide = knn_jacobians(&source, &target, 4 * opts.k);
    let est = crate::stats::iid(&jacobian);
    let med = median(&jacobian);
    let med_wide = median(&wide);

    let (cx, _, _) = follow_to_plane(f, &CoverPoint::from_vector(&c1), &normal, &c2, chunk, budget, opts.max_step)?;
    let tc = [q1.dot(&(cx - c2)), q2.dot(&(cx - c2))];
    let radial: Vec<f64> =
        target.iter().map(|t| (((t[0] - tc[0]).powi(2) + (t[1] - tc[1]).powi(2)) / opts.radius.powi(2)).min(1.0)).collect();
    let ks = ks_uniform(&radial);

    let predicted = match f.kind() {
        MapKind::Linear => Some(alloc::vec![1.0; source.len()]),
        MapKind::Conjugated { .. } => {
            let proj = |dphi: &Matrix| {
                let (r0, r2) = (m.dual_row(0), m.dual_row(2));
                let a = dphi.mul_vec(&q1);
                let b = dphi.mul_vec(&q2);
                (r0.dot(&a) * r2.dot(&b) - r0.dot(&b) * r2.dot(&a)).abs()
            };
            Some(
                source
                    .iter()
                    .zip(&hits)
                    .map(|(s, (w, _, _))| {
                        let z = c1 + q1 * s[0] + q2 * s[1];
                        proj(&f.phi_jacobian(&z)) / proj(&f.phi_jacobian(w))
                    })
                    .collect(),
            )
        }
        MapKind::Perturbed { .. } => None,
    };
    let max_prediction_error = predicted.as_ref().map(|p| jacobian.iter().zip(p).map(|(j, q)| (j / q - 1.0).abs()).fold(0.0, f64::max));
    let ac_passed = jacobian.iter().all(|j| j.is_finite() && *j > 0.0) && (med / med_wide - 1.0).abs() < AC_STABILITY;
    Ok(HolonomyRecord {
        plane: [q1, q2],
        normal,
        source_center: c1,
        target_center: c2,
        source,
        target,
        travel,
        endpoint_defect,
        mean: est.mean,
        stderr: est.stderr,
        median: med,
        median_wide: med_wide,
        jacobian,
        ks,
        predicted,
        max_prediction_error,
        ac_passed,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Teo3Options {
    pub tau: f64,
    pub n_max: u32,
    pub holonomy: HolonomyOptions,
    pub splitting_points: usize,
}

impl Default for Teo3Options {
    fn default() -> Self {
        Self { tau: 1e-6, n_max: 3, holonomy: HolonomyOptions::default(), splitting_points: 20 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Teo3Report {
    pub splitting: TripleFrame,
    pub periodic: PeriodicDataReport,
    pub holonomy: HolonomyRecord,
    pub items: Vec<ItemVerdict>,
    /// Whether the map is special and preserves a smooth volume by
    /// construction. Otherwise item (1) is a diagnostic outside the
    /// equivalence.
    pub hypotheses_hold: bool,
    pub consistent: bool,
    pub note: String,
}

impl Teo3Report {
    pub fn ensure_consistent(&self) -> Result<()> {
        if self.consistent {
            Ok(())
        } else {
            let split: Vec<String> =
                self.items.iter().map(|v| format!("({})={}", v.item, if v.passed { "pass" } else { "fail" })).collect();
            Err(Error::InconsistentVerdicts(split.join(" ")))
        }
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|v| v.passed)
    }
}

fn verdict(item: u8, statement: &str, value: f64, threshold: f64, passed: bool, detail: String) -> ItemVerdict {
    let margin = if value == 0.0 {
        f64::INFINITY
    } else if passed {
        threshold / value
    } else {
        value / threshold
    };
    ItemVerdict { item, statement: statement.into(), passed, value, threshold, margin, detail }
}

pub fn teo3_suite(f: &ToralMap, opts: &Teo3Options) -> Result<Teo3Report> {
    let splitting = triple_splitting(f, &CoverPoint::from_vector(&opts.holonomy.center), opts.splitting_points)?;
    let periodic = periodic_data_report(f, opts.n_max, opts.tau)?;
    let holonomy = holonomy_probe(f, &opts.holonomy)?;
    let dev = |name: &str| periodic.exponent(name).map(|s| s.max_deviation).unwrap_or(f64::INFINITY);
    let (ds, dwu, dsu) = (dev("s"), dev("wu"), dev("su"));
    let stability = (holonomy.median / holonomy.median_wide - 1.0).abs();
    let items = alloc::vec![
        verdict(
            1,
            "the wu-foliation is absolutely continuous",
            stability,
            AC_STABILITY,
            holonomy.ac_passed,
            format!("k-NN median {:.4} vs {:.4}, KS {:.3}", holonomy.median, holonomy.median_wide, holonomy.ks),
        ),
        verdict(
            2,
            "lambda^wu_f(p) = lambda^wu_A on Per(f)",
            dwu,
            opts.tau,
            dwu <= opts.tau,
            format!("spread {:.3e}", periodic.exponent("wu").map(|s| s.spread).unwrap_or(f64::NAN))
        ),
        verdict(
            3,
            "lambda^su_f(p) = lambda^su_A on Per(f)",
            dsu,
            opts.tau,
            dsu <= opts.tau,
            format!("spread {:.3e}", periodic.exponent("su").map(|s| s.spread).unwrap_or(f64::NAN))
        ),
        verdict(
            4,
            "all three periodic exponents equal the linear ones",
            ds.max(dwu).max(dsu),
            opts.tau,
            ds.max(dwu).max(dsu) <= opts.tau,
            format!("deviations s {ds:.3e}, wu {dwu:.3e}, su {dsu:.3e}"),
        ),
    ];
    let hypotheses_hold = f.special_by_construction();
    let scope: Vec<&ItemVerdict> = items.iter().filter(|v| hypotheses_hold || v.item != 1).collect();
    let consistent = scope.iter().all(|v| v.passed) || scope.iter().all(|v| !v.passed);
    let note = if hypotheses_hold {
        String::from("special by construction; all four items are compared")
    } else {
        String::from("not special by construction; item (1) is diagnostic only and items (2)-(4) are compared")
    };
    Ok(Teo3Report { splitting, periodic, holonomy, items, hypotheses_hold, consistent, note })
}

/// Hausdorff-type distance from the samples of `seg` to `φ⁻¹` of the
/// straight wu-line through `φ(base)`, for conjugated maps.
pub fn conjugated_leaf_defect(f: &ToralMap, seg: &LeafSegment) -> Result<f64> {
    let e = f.model().direction(crate::dynamics::bundle_index(f, seg.bundle)?);
    let base = seg.base.to_vector();
    let pb = f.phi(&base);
    let mut worst: f64 = 0.0;
    for p in seg.points() {
        let x = p.to_vector();
        let d = f.phi(&x) - pb;
        let t = d.dot(&e);
        let target = invert_near(f, &(pb + e * t), &x)?;
        worst = worst.max(target.distance(&x));
    }
    Ok(worst)
}

/// `φ⁻¹(y)` on the cover, choosing the lift nearest `guess`.
fn invert_near(f: &ToralMap, y: &Vector, guess: &Vector) -> Result<Vector> {
    let r = f.phi_inverse(y)?;
    let shift = (*guess - r).map(f64::round);
    Ok(r + shift)
}

/// Segment through `x` used by the invariance check.
pub fn wu_invariance_defect(f: &ToralMap, x: &CoverPoint, half_length: f64, max_step: f64) -> Result<f64> {
    let seg = leaf_segment(f, x, Bundle::Wu, -half_length, half_length, max_step)?;
    let bound = 1.5 * f.model().exponents()[1].exp();
    crate::leaf::invariance_defect(f, &seg, bound, max_step)
}
