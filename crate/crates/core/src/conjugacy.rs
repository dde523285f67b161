//! The conjugacy `H̄ ∘ f̄ = A ∘ H̄` on the cover, leafwise regularity of `H̄`,
//! and the exponent dichotomy experiment.
//!
//! Writing `H̄ = id + u` and `g = f̄ − A`, each eigen-coordinate satisfies
//! `u_σ(f̄x) = λ_σ u_σ(x) − g_σ(x)`. Expanding coordinates are summed along
//! the forward torus orbit, contracting ones along the exact backward cover
//! orbit. The unstable part is ℤⁿ-periodic; the stable part is periodic
//! only when the map is special, otherwise `H̄` is a conjugacy of lifts and
//! nothing more.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cover::CoverPoint;
use crate::dynamics::{cover_backward_orbit, default_depth, direction_at, Bundle};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::leaf::{leaf_from, leaf_point, leaf_segment, LeafSegment};
use crate::linalg::Vector;
use crate::map::{MapKind, ToralMap};
use crate::periodic::{find_periodic, PeriodicDataReport};
use crate::stats::{iid, MeanEstimate};
use crate::trig::{for_each_grid_point, grid_point};

/// Target for the geometric tail of each series.
pub const TAIL_TOL: f64 = 1e-11;
/// Largest acceptable functional-equation residual on the construction grid.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Series ratios at or above this stall.
pub const STALL_RATIO: f64 = 1.0 - 1e-3;
/// `H̄` counts as periodic when `|u(x + m) − u(x)|` stays below this.
pub const PERIODICITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugacyOptions {
    /// Points per axis of the residual grid.
    pub grid: usize,
    pub tail_tol: f64,
    pub residual_tol: f64,
}

impl ConjugacyOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self { grid: if dim == 2 { 128 } else { 24 }, tail_tol: TAIL_TOL, residual_tol: RESIDUAL_TOL }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugacySummary {
    /// Truncation depth per eigen-coordinate, ascending modulus.
    pub depths: Vec<usize>,
    /// Sum of the geometric tail bounds.
    pub tail_bound: f64,
    /// `sup |H̄∘f̄ − A∘H̄|` on the residual grid.
    pub residual: f64,
    pub grid: usize,
    /// `max |u(x + eᵢ) − u(x)|` on sample points.
    pub periodicity_defect: f64,
    pub periodic: bool,
    pub sup_u: f64,
    /// `Σ_σ sup|g_σ| / |1 − |λ_σ||`, an a priori bound for `sup |u|`.
    pub majorant: f64,
    /// Winding number of `H̄` on the boundary of the unit square (𝕋² only).
    pub winding: Option<i64>,
}

/// The displacement `u = H̄ − id` as an evaluable field.
#[derive(Clone, Debug)]
pub struct ConjugacyField {
    map: ToralMap,
    lambdas: Vec<f64>,
    depths: Vec<usize>,
    summary: ConjugacySummary,
}

fn series_depth(lambda: f64, sup: f64, tol: f64) -> Result<usize> {
    let r = if lambda.abs() > 1.0 { 1.0 / lambda.abs() } else { lambda.abs() };
    if r >= STALL_RATIO {
        return Err(Error::SeriesStall { ratio: r });
    }
    if sup == 0.0 {
        return Ok(0);
    }
    // unstable terms start at r¹, stable ones at r⁰
    let first = if lambda.abs() > 1.0 { r } else { 1.0 };
    let k = ((tol * (1.0 - r) / (sup * first)).ln() / r.ln()).ceil().max(0.0) as usize;
    Ok(k + 1)
}

fn tail(lambda: f64, sup: f64, k: usize) -> f64 {
    if lambda.abs() > 1.0 {
        let r = 1.0 / lambda.abs();
        sup * r.powi(k as i32 + 1) / (1.0 - r)
    } else {
        let r = lambda.abs();
        sup * r.powi(k as i32) / (1.0 - r)
    }
}

impl ConjugacyField {
    pub fn map(&self) -> &ToralMap {
        &self.map
    }

    pub fn summary(&self) -> &ConjugacySummary {
        &self.summary
    }

    /// `u(x)` at a cover point.
    pub fn displacement(&self, x: &CoverPoint) -> Result<Vector> {
        let f = &self.map;
        let dim = f.dim();
        let mut c = Vector::zeros(dim);
        if matches!(f.kind(), MapKind::Linear) {
            return Ok(c);
        }
        let model = f.model();
        let a = f.a();
        let ku = (0..dim).filter(|&i| self.lambdas[i].abs() > 1.0).map(|i| self.depths[i]).max().unwrap_or(0);
        let mut z = x.frac;
        let mut pw: Vec<f64> = self.lambdas.iter().map(|l| 1.0 / l).collect();
        for k in 0..ku {
            let img = f.eval_lift(&z)?;
            let g = model.coords(&(img - a.mul_vec(&z)));
            for i in 0..dim {
                if self.lambdas[i].abs() > 1.0 && k < self.depths[i] {
                    c[i] += pw[i] * g[i];
                    pw[i] /= self.lambdas[i];
                }
            }
            z = crate::trig::fold(&img);
        }
        let ks = (0..dim).filter(|&i| self.lambdas[i].abs() < 1.0).map(|i| self.depths[i]).max().unwrap_or(0);
        if ks > 0 {
            let past = cover_backward_orbit(f, x, ks)?;
            let mut pw = alloc::vec![1.0; dim];
            for k in 1..=ks {
                let p = past.points[k];
                let g = model.coords(&(f.eval_lift(&p)? - a.mul_vec(&p)));
                for i in 0..dim {
                    if self.lambdas[i].abs() < 1.0 && k <= self.depths[i] {
                        c[i] -= pw[i] * g[i];
                        pw[i] *= self.lambdas[i];
                    }
                }
            }
        }
        Ok(model.from_coords(&c))
    }

    /// `H̄(x) = x + u(x)`.
    pub fn h(&self, x: &CoverPoint) -> Result<CoverPoint> {
        Ok(x.translate(&self.displacement(x)?))
    }

    /// `|H̄(f̄x) − A H̄(x)|` at a cover point.
    pub fn residual_at(&self, x: &CoverPoint) -> Result<f64> {
        let f = &self.map;
        let fx = f.eval_cover(x)?;
        let lhs = self.h(&fx)?;
        let hx = self.h(x)?;
        // A·H̄(x) as a cover point: exact on the cell, floating on the rest
        let cell = f.model().matrix().mul_ivec(&hx.cell)?;
        let rhs = CoverPoint::from_parts(cell, &f.a().mul_vec(&hx.frac));
        Ok(lhs.diff(&rhs).norm())
    }

    /// `H̄⁻¹(y)`: fixed-point iteration `x ← y − u(x)`, with a leaf search
    /// on 𝕋² when the iteration stalls.
    pub fn h_inverse(&self, y: &CoverPoint) -> Result<CoverPoint> {
        let mut x = *y;
        let mut best = (f64::INFINITY, x);
        for _ in 0..60 {
            let u = self.displacement(&x)?;
            let r = x.translate(&u).diff(y).norm();
            if r < best.0 {
                best = (r, x);
            }
            if r < 1e-11 {
                return Ok(x);
            }
            x = y.translate(&-u);
        }
        if best.0 < 1e-9 {
            return Ok(best.1);
        }
        if self.map.dim() == 2 {
            return self.h_inverse_by_leaves(y, best.1);
        }
        Err(Error::InversionFailure { locus: describe(y) })
    }

    /// Eigen-coordinates of `H̄(x) − y`.
    fn offset_coords(&self, x: &CoverPoint, y: &CoverPoint) -> Result<Vector> {
        Ok(self.map.model().coords(&self.h(x)?.diff(y)))
    }

    fn h_inverse_by_leaves(&self, y: &CoverPoint, start: CoverPoint) -> Result<CoverPoint> {
        // H̄ sends f-stable leaves into A-stable lines, so the unstable
        // coordinate is constant along them, and vice versa.
        let x1 = self.match_along(start, y, Bundle::S, 0)?;
        let x2 = self.match_along(x1, y, Bundle::U, 1)?;
        if self.h(&x2)?.diff(y).norm() < 1e-9 {
            Ok(x2)
        } else {
            Err(Error::InversionFailure { locus: describe(y) })
        }
    }

    /// Moves along the `bundle` leaf through `x` until eigen-coordinate
    /// `comp` of `H̄ − y` vanishes; the coordinate is monotone along the leaf.
    fn match_along(&self, x: CoverPoint, y: &CoverPoint, bundle: Bundle, comp: usize) -> Result<CoverPoint> {
        let f = &self.map;
        let d0 = self.offset_coords(&x, y)?[comp];
        if d0.abs() < 1e-13 {
            return Ok(x);
        }
        let mut span = (4.0 * d0.abs()).max(1e-3);
        for _ in 0..8 {
            let seg = leaf_segment(f, &x, bundle, -span, span, (span / 32.0).min(0.01))?;
            let vals: Vec<f64> = seg.points().iter().map(|p| self.offset_coords(p, y).map(|c| c[comp])).collect::<Result<_>>()?;
            if let Some(i) = (0..vals.len() - 1).find(|&i| vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum()) {
                return self.refine(&seg, i, &vals, y, bundle, comp);
            }
            span *= 4.0;
        }
        Err(Error::InversionFailure { locus: describe(y) })
    }

    fn refine(&self, seg: &LeafSegment, i: usize, vals: &[f64], y: &CoverPoint, bundle: Bundle, comp: usize) -> Result<CoverPoint> {
        let f = &self.map;
        let base = seg.point(i);
        let h = seg.t[i + 1] - seg.t[i];
        let (mut a, mut fa) = (0.0, vals[i]);
        let (mut b, mut fb) = (h, vals[i + 1]);
        let mut side = 0;
        let mut best = base;
        for _ in 0..100 {
            if fa == 0.0 {
                return Ok(if a == 0.0 { base } else { leaf_point(f, &base, bundle, a, h)? });
            }
            // Illinois variant of regula falsi
            let t = (a * fb - b * fa) / (fb - fa);
            let p = leaf_point(f, &base, bundle, t, h.max(1e-12))?;
            let ft = self.offset_coords(&p, y)?[comp];
            best = p;
            if ft.abs() < 1e-12 || (b - a).abs() < 1e-14 {
                return Ok(p);
            }
            if ft.signum() == fb.signum() {
                b = t;
                fb = ft;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = t;
                fa = ft;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Ok(best)
    }
}

fn describe(y: &CoverPoint) -> String {
    use alloc::format;
    let v = y.frac;
    if v.dim() == 2 {
        format!("cell ({}, {}) + ({:.6}, {:.6})", y.cell[0], y.cell[1], v[0], v[1])
    } else {
        format!("cell ({}, {}, {}) + ({:.6}, {:.6}, {:.6})", y.cell[0], y.cell[1], y.cell[2], v[0], v[1], v[2])
    }
}

pub fn solve_conjugacy(f: &ToralMap) -> Result<ConjugacyField> {
    solve_conjugacy_with(f, &ConjugacyOptions::for_dim(f.dim()))
}

pub fn solve_conjugacy_with(f: &ToralMap, opts: &ConjugacyOptions) -> Result<ConjugacyField> {
    f.model().require_anosov()?;
    let dim = f.dim();
    let lambdas: Vec<f64> = (0..dim).map(|i| f.model().eigenvalue(i)).collect();
    // sup |g_σ| on a grid, padded for the points between grid nodes
    let mut sup = alloc::vec![0.0f64; dim];
    let g_grid = if dim == 2 { 64 } else { 24 };
    let mut err = None;
    for_each_grid_point(dim, g_grid, 0.0, |x| match f.displacement(&x) {
        Ok(g) => {
            let c = f.model().coords(&g);
            for i in 0..dim {
                sup[i] = sup[i].max(c[i].abs());
            }
        }
        Err(e) => err = Some(e),
    });
    if let Some(e) = err {
        return Err(e);
    }
    let sup: Vec<f64> = sup.iter().map(|s| 1.25 * s).collect();
    let depths: Vec<usize> = (0..dim).map(|i| series_depth(lambdas[i], sup[i], opts.tail_tol)).collect::<Result<_>>()?;
    let tail_bound = (0..dim).map(|i| tail(lambdas[i], sup[i], depths[i])).sum();
    let majorant = (0..dim).map(|i| sup[i] / (1.0 - lambdas[i].abs()).abs()).sum();
    let mut field = ConjugacyField {
        map: f.clone(),
        lambdas,
        depths: depths.clone(),
        summary: ConjugacySummary {
            depths,
            tail_bound,
            residual: 0.0,
            grid: opts.grid,
            periodicity_defect: 0.0,
            periodic: true,
            sup_u: 0.0,
            majorant,
            winding: None,
        },
    };
    let npts = opts.grid.pow(dim as u32);
    let per_point = try_map_indexed(npts, |i| -> Result<(f64, f64)> {
        let x = CoverPoint::from_vector(&grid_point(dim, opts.grid, 0.0, i));
        Ok((field.residual_at(&x)?, field.displacement(&x)?.norm()))
    })?;
    let residual = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let sup_u = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(residual < opts.residual_tol) {
        return Err(Error::ResidualTooLarge { residual, tolerance: opts.residual_tol });
    }
    let mut defect: f64 = 0.0;
    for i in 0..16 {
        let x = CoverPoint::from_vector(&grid_point(dim, 4, 0.37, i % 4usize.pow(dim as u32)));
        let u0 = field.displacement(&x)?;
        let mut m = [0i128; 3];
        m[i % dim] = 1;
        defect = defect.max((field.displacement(&x.shift(&m)?)? - u0).norm());
    }
    field.summary.residual = residual;
    field.summary.sup_u = sup_u;
    field.summary.periodicity_defect = defect;
    field.summary.periodic = defect < PERIODICITY_TOL;
    if dim == 2 {
        field.summary.winding = Some(winding_number(&field, 256)?);
    }
    Ok(field)
}

/// Winding of `H̄` along the boundary of `[0,1]²` around `H̄(½,½)`.
pub fn winding_number(h: &ConjugacyField, samples_per_side: usize) -> Result<i64> {
    let center = h.h(&CoverPoint::from_vector(&Vector::new2(0.5, 0.5)))?;
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)];
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut first = 0.0;
    for s in 0..4 {
        let (x0, y0) = corners[s];
        let (x1, y1) = corners[s + 1];
        for j in 0..samples_per_side {
            let t = j as f64 / samples_per_side as f64;
            let p = CoverPoint::from_vector(&Vector::new2(x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
            let d = h.h(&p)?.diff(&center);
            let ang = d[1].atan2(d[0]);
            match prev {
                None => first = ang,
                Some(a) => total += wrap(ang - a),
            }
            prev = Some(ang);
        }
    }
    total += wrap(first - prev.unwrap());
    Ok((total / core::f64::consts::TAU).round() as i64)
}

fn wrap(a: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    a - tau * (a / tau).round()
}

/// Fraction of sampled pairs `t < t'` on an unstable leaf for which the
/// unstable coordinate of `H̄` is also ordered.
pub fn monotone_on_leaf(h: &ConjugacyField, seg: &LeafSegment, pairs: usize, seed: u64) -> Result<(usize, usize)> {
    let e = h.map.model().dual_row(h.map.dim() - 1);
    let base_h = h.h(&seg.base)?;
    let coord: Vec<f64> = seg.points().iter().map(|p| h.h(p).map(|q| e.dot(&q.diff(&base_h)))).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let i = rng.gen_range(0..seg.len());
        let mut j = rng.gen_range(0..seg.len());
        if i == j {
            j = (j + 1) % seg.len();
        }
        let (i, j) = (i.min(j), i.max(j));
        if !(coord[j] > coord[i]) {
            bad += 1;
        }
    }
    Ok((pairs, bad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProbeVerdict {
    Stabilizing,
    Degenerate,
    Inconclusive,
}

/// Relative spread over the last four scales below which the difference
/// quotient counts as stabilized.
pub const STABILIZING_SPREAD: f64 = 0.02;
/// Monotone relative drift above which it counts as degenerate.
pub const DEGENERATE_DRIFT: f64 = 0.25;

pub fn default_scales() -> Vec<f64> {
    (3..=14).map(|j| 0.5f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeafwiseProbe {
    pub label: String,
    pub point: Vector,
    /// `(δ, q(δ))`, decreasing `δ`.
    pub rows: Vec<(f64, f64)>,
    /// `(max − min)/mean` of `q` over the last four scales.
    pub tail_spread: f64,
    /// `q(δ_min)/q(δ_max) − 1`.
    pub drift: f64,
    pub monotone: bool,
    pub verdict: ProbeVerdict,
}

/// Difference quotients `q(δ) = |H̄(x) − H̄(y_δ)|/δ` with `y_δ` at arclength
/// `δ` along the unstable leaf through the cover point `x`.
pub fn leafwise_derivative_probe(h: &ConjugacyField, x: &CoverPoint, scales: &[f64], label: &str) -> Result<LeafwiseProbe> {
    if scales.len() < 4 || scales.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("scales must be decreasing, at least four"));
    }
    let f = &h.map;
    let hx = h.h(x)?;
    let seg = leaf_from(f, x, Bundle::U, scales[0], (scales[0] / 64.0).min(1e-3))?;
    let rows = scales
        .iter()
        .map(|&d| {
            let y = if d >= seg.length() - 1e-15 { seg.point(seg.len() - 1) } else { leaf_point(f, x, Bundle::U, d, d / 16.0)? };
            Ok((d, h.h(&y)?.diff(&hx).norm() / d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(classify_probe(label, x.frac, rows))
}

pub fn classify_probe(label: &str, point: Vector, rows: Vec<(f64, f64)>) -> LeafwiseProbe {
    let q: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let last = &q[q.len() - 4..];
    let (lo, hi) = last.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mean = last.iter().sum::<f64>() / 4.0;
    let tail_spread = (hi - lo) / mean;
    let drift = q[q.len() - 1] / q[0] - 1.0;
    let up = q.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-3));
    let down = q.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-3));
    let monotone = up || down;
    let verdict = if tail_spread < STABILIZING_SPREAD && drift.abs() <= DEGENERATE_DRIFT {
        ProbeVerdict::Stabilizing
    } else if monotone && drift.abs() > DEGENERATE_DRIFT {
        ProbeVerdict::Degenerate
    } else {
        ProbeVerdict::Inconclusive
    };
    LeafwiseProbe { label: label.into(), point, rows, tail_spread, drift, monotone, verdict }
}

/// Branch digits that follow the periodic orbit of `p` backwards.
pub fn periodic_past(f: &ToralMap, p: &Vector, period: u32, depth: usize) -> Result<Vec<usize>> {
    let mut orbit = alloc::vec![*p];
    for _ in 1..period {
        orbit.push(f.eval_torus(orbit.last().unwrap())?);
    }
    let n = orbit.len();
    let mut digits = Vec::with_capacity(n);
    for j in 0..n {
        let y = orbit[(n - j % n) % n];
        let target = orbit[(2 * n - j % n - 1) % n];
        let branches = crate::dynamics::inverse_branches(f, &y)?;
        let (i, _) = branches
            .iter()
            .enumerate()
            .map(|(i, b)| (i, crate::cover::torus_distance(b, &target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        digits.push(i);
    }
    Ok((0..depth).map(|k| digits[k % n]).collect())
}

/// Depth of the encoded past for probe and sample points.
pub fn past_depth(f: &ToralMap) -> usize {
    let ks = default_depth(f, Bundle::S) + 20;
    ks.min(if f.dim() == 2 { 50 } else { 40 })
}

/// Cover points with pasts: fixed points and period-two points of `f`
/// following their own orbits backwards, then random points with random
/// pasts, `count` in total.
pub fn probe_points(f: &ToralMap, count: usize, seed: u64) -> Result<Vec<(String, CoverPoint)>> {
    use alloc::format;
    let depth = past_depth(f);
    let mut out = Vec::new();
    for n in 1..=2u32 {
        for o in find_periodic(f, n)? {
            if o.minimal_period != n || out.len() >= count {
                continue;
            }
            let digits = periodic_past(f, &o.point, n, depth)?;
            out.push((format!("period-{n}"), f.cover_point_with_past(&o.point, &digits)?));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let (x, digits) = random_point_with_past(f, &mut rng, depth);
        out.push((String::from("random"), f.cover_point_with_past(&x, &digits)?));
    }
    Ok(out)
}

fn random_point_with_past(f: &ToralMap, rng: &mut ChaCha8Rng, depth: usize) -> (Vector, Vec<usize>) {
    let dim = f.dim();
    let mut x = Vector::zeros(dim);
    for i in 0..dim {
        x[i] = rng.gen::<f64>();
    }
    let d = f.reps().len();
    (x, (0..depth).map(|_| rng.gen_range(0..d)).collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DichotomyReport {
    /// `λ^u_f(m̃)` with its i.i.d. standard error.
    pub lambda_f: MeanEstimate,
    pub lambda_a: f64,
    pub difference: f64,
    /// `λ^u_f(m̃) ≥ λ^u_A − 3·stderr`.
    pub ruelle_holds: bool,
    pub probes: Vec<LeafwiseProbe>,
    pub stabilizing: usize,
    pub degenerate: usize,
    /// Spread of the periodic unstable exponents, when a report was given.
    pub periodic_spread: Option<f64>,
    /// `smooth` when periodic data are rigid and every probe stabilizes,
    /// `null-set` when periodic data vary, `undecided` otherwise.
    pub side: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DichotomyOptions {
    pub samples: usize,
    /// Forward steps averaged per sample.
    pub steps: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        Self { samples: 1000, steps: 10, probes: 10, seed: 1 }
    }
}

/// Per-sample averages of `ln J^u f` along `L` steps from `H̄⁻¹(y)`, where
/// `y` is Lebesgue with a uniformly random past. The law of `H̄⁻¹(y)` is the
/// lift of the measure of maximal entropy, so the mean estimates
/// `λ^u_f(m̃)`.
pub fn unstable_exponent_mme(h: &ConjugacyField, samples: usize, steps: usize, seed: u64) -> Result<MeanEstimate> {
    let f = &h.map;
    let depth = past_depth(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vector, Vec<usize>)> = (0..samples).map(|_| random_point_with_past(f, &mut rng, depth)).collect();
    let values = try_map_indexed(samples, |i| -> Result<f64> {
        let (y, digits) = &draws[i];
        let yc = f.cover_point_with_past(y, digits)?;
        let x = h.h_inverse(&yc)?;
        let mut v = direction_at(f, &x, Bundle::U, false)?.direction;
        let mut z = x.frac;
        let mut acc = 0.0;
        for _ in 0..steps {
            let st = f.step(&z)?;
            let w = st.jac.mul_vec(&v);
            let nw = w.norm();
            acc += nw.ln();
            v = w * (1.0 / nw);
            z = crate::trig::fold(&st.image);
        }
        Ok(acc / steps as f64)
    })?;
    Ok(iid(&values))
}

pub fn dichotomy_experiment(h: &ConjugacyField, periodic: Option<&PeriodicDataReport>, opts: &DichotomyOptions) -> Result<DichotomyReport> {
    let f = &h.map;
    if f.dim() != 2 {
        return Err(Error::InvalidArgument("the dichotomy experiment is set on 𝕋²"));
    }
    let lambda_a = f.model().exponents()[1];
    let lambda_f = unstable_exponent_mme(h, opts.samples, opts.steps, opts.seed)?;
    let points = probe_points(f, opts.probes, opts.seed ^ 0x5eed)?;
    let scales = default_scales();
    let probes = try_map_indexed(points.len(), |i| leafwise_derivative_probe(h, &points[i].1, &scales, &points[i].0))?;
    let stabilizing = probes.iter().filter(|p| p.verdict == ProbeVerdict::Stabilizing).count();
    let degenerate = probes.iter().filter(|p| p.verdict == ProbeVerdict::Degenerate).count();
    let periodic_spread = periodic.and_then(|r| r.exponent("u")).map(|s| s.spread);
    let rigid = periodic.and_then(|r| r.exponent("u")).map(|s| s.verdict.passed());
    let side = match rigid {
        Some(true) if stabilizing == probes.len() => "smooth",
        Some(false) => "null-set",
        None if stabilizing == probes.len() => "smooth",
        None if degenerate > 0 => "null-set",
        _ => "undecided",
    };
    Ok(DichotomyReport {
        difference: lambda_f.mean - lambda_a,
        ruelle_holds: lambda_f.mean >= lambda_a - 3.0 * lambda_f.stderr,
        lambda_f,
        lambda_a,
        probes,
        stabilizing,
        degenerate,
        periodic_spread,
        side: side.into(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeafReconstruction {
    pub step: f64,
    pub length: f64,
    /// Arclength along the `f`-leaf and the reconstructed `A`-leaf coordinate.
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    /// Largest distance between the reconstruction and the reference.
    pub max_error: f64,
}

/// Alternative to the series solution when scoring a reconstruction.
pub type LeafReference<'a> = dyn Fn(&CoverPoint) -> Result<CoverPoint> + Sync + 'a;

/// Integrates `s′(t) = ρ^u_f(t)/ρ^u_A` along the unstable leaf of length
/// `length` from `x` with Simpson steps (RK4 on a quadrature), anchored at
/// `H̄(x)` and scaled so that the endpoint matches `H̄`. The result is compared
/// with `reference` (default: the series solution) at every node.
pub fn reconstruct_h_on_leaf(
    h: &ConjugacyField,
    x: &CoverPoint,
    length: f64,
    step: f64,
    reference: Option<&LeafReference<'_>>,
) -> Result<LeafReconstruction> {
    let f = &h.map;
    let n = (length / step).round() as usize;
    if n == 0 || ((n as f64) * step - length).abs() > 1e-9 * length {
        return Err(Error::InvalidArgument("length must be a multiple of the step"));
    }
    let seg = leaf_from(f, x, Bundle::U, length, step / 2.0)?;
    if seg.len() != 2 * n + 1 {
        return Err(Error::LeafFailure("unexpected sample count"));
    }
    let pts = seg.points();
    let rho = crate::srb::leaf_density_samples(f, &pts, 0)?;
    let mut s = alloc::vec![0.0; n + 1];
    for i in 0..n {
        s[i + 1] = s[i] + step / 6.0 * (rho[2 * i] + 4.0 * rho[2 * i + 1] + rho[2 * i + 2]);
    }
    let reference_at = |p: &CoverPoint| -> Result<CoverPoint> {
        match reference {
            Some(r) => r(p),
            None => h.h(p),
        }
    };
    let h0 = reference_at(&pts[0])?;
    let h1 = reference_at(&pts[2 * n])?;
    let e_u = f.model().direction(f.dim() - 1);
    let ell = h1.diff(&h0).dot(&e_u);
    let total = s[n];
    let mut max_error: f64 = 0.0;
    let mut t = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let si = ell * s[i] / total;
        let approx = h0.translate(&(e_u * si));
        let exact = reference_at(&pts[2 * i])?;
        max_error = max_error.max(approx.diff(&exact).norm());
        t.push(seg.t[2 * i]);
        out.push(si);
    }
    Ok(LeafReconstruction { step, length, t, s: out, max_error })
}

/// Observed order `log₂(e(h)/e(h/2))` for a sequence of halving steps.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> f64 {
    let n = steps.len().min(errors.len()) as f64;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
