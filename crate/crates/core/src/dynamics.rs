//! Orbits on the torus and the cover, inverse branches, invariant directions
//! estimated along explicit pasts, and Lyapunov exponents.

use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cover::{torus_distance, CoverPoint};
use crate::error::{Error, Result};
use crate::lattice::IVec;
use crate::linalg::{line_angle, qr_diagonal, Matrix, Vector};
use crate::map::ToralMap;
use crate::stats::{batch_means, MeanEstimate, BATCHES};
use crate::trig::fold;

/// Cauchy-gap threshold for direction certificates.
pub const CAUCHY_TOL: f64 = 1e-9;

/// Minimum orbit length for exponent estimates.
pub const MIN_SAMPLES: usize = 1000;

/// Minimum pairwise distance between distinct inverse branches.
pub const BRANCH_SEPARATION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bundle {
    /// Stable.
    S,
    /// Unstable (the dominant expanding direction).
    U,
    /// Weak unstable, 𝕋³ only.
    Wu,
    /// Strong unstable, 𝕋³ only.
    Su,
}

impl Bundle {
    pub fn name(self) -> &'static str {
        match self {
            Bundle::S => "s",
            Bundle::U => "u",
            Bundle::Wu => "wu",
            Bundle::Su => "su",
        }
    }
}

/// How a backward orbit chooses among the `d` preimages at each step.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BranchSelector {
    /// Always branch `i`.
    FixedIndex(usize),
    /// Independent uniform branch per step from a ChaCha stream.
    RandomSeeded(u64),
    /// The past determined by the lift of `x₀` to `cell + x₀` under the
    /// global inverse of `f̄`.
    AlongCoverLeaf { cell: IVec },
}

impl BranchSelector {
    pub fn cover(x: &CoverPoint) -> Self {
        BranchSelector::AlongCoverLeaf { cell: x.cell }
    }

    pub fn describe(&self) -> alloc::string::String {
        use alloc::format;
        match self {
            BranchSelector::FixedIndex(i) => format!("fixed:{i}"),
            BranchSelector::RandomSeeded(s) => format!("random:{s}"),
            BranchSelector::AlongCoverLeaf { cell } => format!("cover:{},{},{}", cell[0], cell[1], cell[2]),
        }
    }
}

/// Finite past `(x₀, x₋₁, …, x₋K)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackwardOrbit {
    pub points: Vec<Vector>,
    pub branch_choices: Vec<usize>,
    /// Cover points, present for [`BranchSelector::AlongCoverLeaf`].
    pub cover: Option<Vec<CoverPoint>>,
}

impl BackwardOrbit {
    pub fn depth(&self) -> usize {
        self.branch_choices.len()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            points: self.points[..=k].to_vec(),
            branch_choices: self.branch_choices[..k].to_vec(),
            cover: self.cover.as_ref().map(|c| c[..=k].to_vec()),
        }
    }

    /// Largest `|f(x₋₍ₖ₊₁₎) − x₋ₖ|` on the torus.
    pub fn max_defect(&self, f: &ToralMap) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.depth() {
            let img = f.eval_torus(&self.points[k + 1])?;
            worst = worst.max(torus_distance(&img, &self.points[k]));
        }
        Ok(worst)
    }
}

/// All `d` preimages of `y`, seeded at the linear preimages `A⁻¹(y + c)`.
pub fn inverse_branches(f: &ToralMap, y: &Vector) -> Result<Vec<Vector>> {
    let out: Vec<Vector> = (0..f.reps().len()).map(|i| f.inverse_branch(y, i)).collect::<Result<_>>()?;
    for i in 0..out.len() {
        for j in 0..i {
            let d = torus_distance(&out[i], &out[j]);
            if d <= BRANCH_SEPARATION {
                return Err(Error::BranchCollision { distance: d });
            }
        }
    }
    Ok(out)
}

pub fn backward_orbit(f: &ToralMap, x0: &Vector, depth: usize, selector: &BranchSelector) -> Result<BackwardOrbit> {
    let x0 = fold(x0);
    let d = f.reps().len();
    let mut points = Vec::with_capacity(depth + 1);
    let mut choices = Vec::with_capacity(depth);
    points.push(x0);
    match selector {
        BranchSelector::FixedIndex(i) => {
            if *i >= d {
                return Err(Error::InvalidArgument("branch index exceeds the degree"));
            }
            for _ in 0..depth {
                let next = f.inverse_branch(points.last().unwrap(), *i)?;
                points.push(next);
                choices.push(*i);
            }
            Ok(BackwardOrbit { points, branch_choices: choices, cover: None })
        }
        BranchSelector::RandomSeeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..depth {
                let i = rng.gen_range(0..d);
                let next = f.inverse_branch(points.last().unwrap(), i)?;
                points.push(next);
                choices.push(i);
            }
            Ok(BackwardOrbit { points, branch_choices: choices, cover: None })
        }
        BranchSelector::AlongCoverLeaf { cell } => {
            let mut c = CoverPoint::from_parts(*cell, &x0);
            let mut cover = Vec::with_capacity(depth + 1);
            cover.push(c);
            for _ in 0..depth {
                let (prev, i) = f.inverse_cover(&c)?;
                c = prev;
                points.push(c.frac);
                cover.push(c);
                choices.push(i);
            }
            Ok(BackwardOrbit { points, branch_choices: choices, cover: Some(cover) })
        }
    }
}

/// Backward cover orbit of an exact cover point.
pub fn cover_backward_orbit(f: &ToralMap, x: &CoverPoint, depth: usize) -> Result<BackwardOrbit> {
    backward_orbit(f, &x.frac, depth, &BranchSelector::cover(x))
}

/// Forward torus orbit `x₀, …, x_N` (length `n + 1`).
pub fn forward_orbit(f: &ToralMap, x0: &Vector, n: usize) -> Result<Vec<Vector>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = fold(x0);
    out.push(x);
    for _ in 0..n {
        x = f.eval_torus(&x)?;
        out.push(x);
    }
    Ok(out)
}

/// Contraction ratio per step that governs convergence of a direction
/// estimate for the given bundle, read off the linear model.
pub fn linear_gap_ratio(f: &ToralMap, bundle: Bundle) -> f64 {
    let m = f.model();
    let mods: Vec<f64> = m.eigen().iter().map(|e| e.modulus()).collect();
    let n = mods.len();
    match (n, bundle) {
        (2, _) => mods[0] / mods[1],
        (_, Bundle::U) | (_, Bundle::Su) => mods[1] / mods[2],
        (_, Bundle::Wu) => (mods[0] / mods[1]).max(mods[1] / mods[2]),
        (_, Bundle::S) => mods[0] / mods[1],
    }
}

/// Depth after which a direction estimate should meet the Cauchy tolerance,
/// with 30% slack on the linear contraction rate.
pub fn default_depth(f: &ToralMap, bundle: Bundle) -> usize {
    depth_for_ratio(linear_gap_ratio(f, bundle), CAUCHY_TOL * 1e-3)
}

pub fn depth_for_ratio(ratio: f64, tol: f64) -> usize {
    let r = ratio.clamp(1e-6, 0.999);
    ((tol.ln() / (0.7 * r.ln())).ceil() as usize + 2).max(8)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionEstimate {
    pub direction: Vector,
    /// Angle between the depth-`K` and depth-`(K−1)` estimates.
    pub certificate: f64,
    pub depth: usize,
}

/// Index of the dominant (top) eigendirection of `A`.
fn top(f: &ToralMap) -> usize {
    f.dim() - 1
}

fn push_forward(f: &ToralMap, pts_deepest_first: &[Vector], seed: Vector) -> Result<Vector> {
    let mut v = seed;
    for x in pts_deepest_first {
        v = f.jacobian(x)?.mul_vec(&v).normalized();
    }
    Ok(v)
}

/// Unstable (dominant expanding) direction at `x₀` for the past in `orbit`:
/// the normalized pushforward of `A`'s top eigendirection from `x₋K`.
pub fn unstable_direction(f: &ToralMap, orbit: &BackwardOrbit) -> Result<DirectionEstimate> {
    let k = orbit.depth();
    if k < 2 {
        return Err(Error::InvalidArgument("backward orbit too short"));
    }
    let seed = f.model().direction(top(f));
    let mut pts: Vec<Vector> = orbit.points[1..].to_vec();
    pts.reverse();
    let vk = push_forward(f, &pts, seed)?;
    let vk1 = push_forward(f, &pts[1..], seed)?;
    let certificate = line_angle(&vk, &vk1);
    if !(certificate < CAUCHY_TOL) {
        return Err(Error::NotConverged { certificate });
    }
    Ok(DirectionEstimate { direction: orient(vk, &seed), certificate, depth: k })
}

/// Unstable direction at an exact cover point using its own cover past.
pub fn unstable_direction_cover(f: &ToralMap, x: &CoverPoint, depth: usize) -> Result<DirectionEstimate> {
    unstable_direction(f, &cover_backward_orbit(f, x, depth)?)
}

/// Stable direction at `x` by pulling `A`'s stable eigendirection back
/// along `n_forward` forward iterates. No past is needed.
pub fn stable_direction(f: &ToralMap, x: &Vector, n_forward: usize) -> Result<DirectionEstimate> {
    if n_forward < 2 {
        return Err(Error::InvalidArgument("forward orbit too short"));
    }
    let orbit = forward_orbit(f, x, n_forward)?;
    let jacs: Vec<Matrix> = orbit[..n_forward].iter().map(|p| f.jacobian(p)).collect::<Result<_>>()?;
    let seed = f.model().direction(0);
    let pull = |from: usize| -> Result<Vector> {
        let mut v = seed;
        for j in jacs[..from].iter().rev() {
            v = j.solve(&v).ok_or(Error::IllConditioned("Jacobian"))?.normalized();
        }
        Ok(v)
    };
    let vn = pull(n_forward)?;
    let vn1 = pull(n_forward - 1)?;
    let certificate = line_angle(&vn, &vn1);
    if !(certificate < CAUCHY_TOL) {
        return Err(Error::NotConverged { certificate });
    }
    Ok(DirectionEstimate { direction: orient(vn, &seed), certificate, depth: n_forward })
}

/// Index into the ascending eigen data of `A` for a one-dimensional bundle.
pub fn bundle_index(f: &ToralMap, bundle: Bundle) -> Result<usize> {
    match (f.dim(), bundle) {
        (_, Bundle::S) => Ok(0),
        (2, Bundle::U) => Ok(1),
        (2, _) => Err(Error::InvalidArgument("wu/su bundles exist only on 𝕋³")),
        (_, Bundle::Wu) => Ok(1),
        (_, Bundle::U) | (_, Bundle::Su) => Ok(2),
    }
}

/// Eigendirection of `A` for the bundle, the `σ`-direction of the linear model.
pub fn reference_direction(f: &ToralMap, bundle: Bundle) -> Result<Vector> {
    Ok(f.model().direction(bundle_index(f, bundle)?))
}

fn orthonormal_pair(a: Vector, b: Vector) -> (Vector, Vector) {
    let a = a.normalized();
    let b = (b - a * a.dot(&b)).normalized();
    (a, b)
}

/// Normal of the pushforward of `span(a, b)` along `jacs` in order.
fn push_plane<'a>(jacs: impl Iterator<Item = &'a Matrix>, a: Vector, b: Vector) -> Vector {
    let (mut p, mut q) = orthonormal_pair(a, b);
    for j in jacs {
        (p, q) = orthonormal_pair(j.mul_vec(&p), j.mul_vec(&q));
    }
    p.cross(&q).normalized()
}

/// Normal of the pullback of `span(a, b)` along `jacs` taken in reverse.
fn pull_plane<'a>(jacs: impl DoubleEndedIterator<Item = &'a Matrix>, a: Vector, b: Vector) -> Result<Vector> {
    let (mut p, mut q) = orthonormal_pair(a, b);
    for j in jacs.rev() {
        let pp = j.solve(&p).ok_or(Error::IllConditioned("Jacobian"))?;
        let qq = j.solve(&q).ok_or(Error::IllConditioned("Jacobian"))?;
        (p, q) = orthonormal_pair(pp, qq);
    }
    Ok(p.cross(&q).normalized())
}

/// Weak unstable direction on 𝕋³ at a cover point: the line where the
/// unstable plane (pushed forward along the cover past) meets the
/// centre-stable plane (pulled back along the forward orbit).
pub fn weak_unstable_direction(f: &ToralMap, x: &CoverPoint, certify: bool) -> Result<DirectionEstimate> {
    if f.dim() != 3 {
        return Err(Error::InvalidArgument("wu bundle exists only on 𝕋³"));
    }
    let m = f.model();
    let (es, ewu, esu) = (m.direction(0), m.direction(1), m.direction(2));
    let kb = default_depth(f, Bundle::Wu);
    let kf = kb;
    let past = cover_backward_orbit(f, x, kb)?;
    let back: Vec<Matrix> = past.points[1..].iter().rev().map(|p| f.jacobian(p)).collect::<Result<_>>()?;
    let fwd_pts = forward_orbit(f, &x.frac, kf)?;
    let fwd: Vec<Matrix> = fwd_pts[..kf].iter().map(|p| f.jacobian(p)).collect::<Result<_>>()?;
    let wu_at = |b: &[Matrix], fw: &[Matrix]| -> Result<Vector> {
        let nu = push_plane(b.iter(), ewu, esu);
        let ncs = pull_plane(fw.iter(), es, ewu)?;
        let w = nu.cross(&ncs);
        if w.norm() < 1e-8 {
            return Err(Error::Degenerate("unstable and centre-stable planes coincide"));
        }
        Ok(orient(w.normalized(), &ewu))
    };
    let v = wu_at(&back, &fwd)?;
    let certificate = if certify {
        let c = line_angle(&v, &wu_at(&back[1..], &fwd[..kf - 1])?);
        if !(c < CAUCHY_TOL) {
            return Err(Error::NotConverged { certificate: c });
        }
        c
    } else {
        0.0
    };
    Ok(DirectionEstimate { direction: v, certificate, depth: kb })
}

/// `σ`-direction at a cover point, oriented along `A`'s eigendirection.
/// Unstable data read the past from the cover; the stable direction only
/// depends on the torus point. Without `certify` the Cauchy gap is skipped.
pub fn direction_at(f: &ToralMap, x: &CoverPoint, bundle: Bundle, certify: bool) -> Result<DirectionEstimate> {
    let reference = reference_direction(f, bundle)?;
    match bundle {
        Bundle::Wu => weak_unstable_direction(f, x, certify),
        Bundle::U | Bundle::Su => {
            let k = default_depth(f, Bundle::U);
            let orbit = cover_backward_orbit(f, x, k)?;
            if certify {
                return unstable_direction(f, &orbit);
            }
            let mut pts: Vec<Vector> = orbit.points[1..].to_vec();
            pts.reverse();
            let v = push_forward(f, &pts, reference)?;
            Ok(DirectionEstimate { direction: orient(v, &reference), certificate: 0.0, depth: k })
        }
        Bundle::S => {
            let k = default_depth(f, Bundle::S);
            if certify {
                return stable_direction(f, &x.frac, k);
            }
            let mut v = reference;
            let orbit = forward_orbit(f, &x.frac, k)?;
            for p in orbit[..k].iter().rev() {
                v = f.jacobian(p)?.solve(&v).ok_or(Error::IllConditioned("Jacobian"))?.normalized();
            }
            Ok(DirectionEstimate { direction: orient(v, &reference), certificate: 0.0, depth: k })
        }
    }
}

/// Flips `v` to have a non-negative component along `reference`.
pub fn orient(v: Vector, reference: &Vector) -> Vector {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

/// Stable/unstable frame at `x₀` on 𝕋².
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplittingFrame {
    pub basepoint: Vector,
    pub s: Vector,
    pub u: Vector,
    pub certificate: f64,
}

pub fn splitting_frame(f: &ToralMap, x0: &Vector, selector: &BranchSelector) -> Result<SplittingFrame> {
    let orbit = backward_orbit(f, x0, default_depth(f, Bundle::U), selector)?;
    let u = unstable_direction(f, &orbit)?;
    let s = stable_direction(f, x0, default_depth(f, Bundle::S))?;
    if line_angle(&u.direction, &s.direction) <= 1e-6 {
        return Err(Error::Degenerate("stable and unstable directions are parallel"));
    }
    Ok(SplittingFrame { basepoint: fold(x0), s: s.direction, u: u.direction, certificate: u.certificate.max(s.certificate) })
}

/// Source of initial points for exponent estimates.
pub enum Sampler<'a> {
    LebesgueUniform {
        seed: u64,
    },
    /// Lebesgue samples pushed through a map, typically `h⁻¹`.
    PushforwardByConjugacy {
        map: &'a (dyn Fn(&Vector) -> Result<Vector> + Sync),
        seed: u64,
    },
    SinglePoint(Vector),
    /// Rejection sampling from a density bounded by `bound`.
    DensityWeighted {
        density: &'a (dyn Fn(&Vector) -> f64 + Sync),
        bound: f64,
        seed: u64,
    },
}

impl Sampler<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::LebesgueUniform { .. } => "lebesgue",
            Sampler::PushforwardByConjugacy { .. } => "pushforward",
            Sampler::SinglePoint(_) => "point",
            Sampler::DensityWeighted { .. } => "density",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Sampler::LebesgueUniform { seed } | Sampler::PushforwardByConjugacy { seed, .. } | Sampler::DensityWeighted { seed, .. } => {
                Some(*seed)
            }
            Sampler::SinglePoint(_) => None,
        }
    }

    /// `count` initial points, deterministic in the seed.
    pub fn draw(&self, dim: usize, count: usize) -> Result<Vec<Vector>> {
        let uniform = |rng: &mut ChaCha8Rng| {
            let mut v = Vector::zeros(dim);
            for i in 0..dim {
                v[i] = rng.gen::<f64>();
            }
            v
        };
        match self {
            Sampler::LebesgueUniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..count).map(|_| uniform(&mut rng)).collect())
            }
            Sampler::PushforwardByConjugacy { map, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..count).map(|_| map(&uniform(&mut rng)).map(|x| fold(&x))).collect()
            }
            Sampler::SinglePoint(x) => Ok(alloc::vec![fold(x); count]),
            Sampler::DensityWeighted { density, bound, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(count);
                let mut tries = 0usize;
                while out.len() < count {
                    tries += 1;
                    if tries > 1000 * count + 1000 {
                        return Err(Error::NonConvergence { what: "rejection sampling", steps: tries, residual: 0.0 });
                    }
                    let x = uniform(&mut rng);
                    let rho = density(&x);
                    if rho > *bound {
                        return Err(Error::InvalidArgument("density exceeds its stated bound"));
                    }
                    if rng.gen::<f64>() * bound < rho {
                        out.push(x);
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentEstimate {
    pub bundle: Bundle,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl ExponentEstimate {
    fn from_series(bundle: Bundle, series: &[f64]) -> Self {
        let MeanEstimate { mean, stderr, n } = batch_means(series, BATCHES);
        Self { bundle, value: mean, stderr, n }
    }
}

/// Per-step values `ln |Df(xₖ) vₖ|` along the forward orbit of `x0` for the
/// top expanding direction seeded from the past chosen by `selector`.
pub fn unstable_log_stretches(f: &ToralMap, x0: &Vector, n: usize, selector: &BranchSelector) -> Result<Vec<f64>> {
    let orbit = backward_orbit(f, x0, default_depth(f, Bundle::U), selector)?;
    let mut v = unstable_direction(f, &orbit)?.direction;
    let mut x = fold(x0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let st = f.step(&x)?;
        let w = st.jac.mul_vec(&v);
        let nw = w.norm();
        out.push(nw.ln());
        v = w * (1.0 / nw);
        x = fold(&st.image);
    }
    Ok(out)
}

/// Per-step values `ln |Df(xₖ) vₖ|` for the stable direction, by a backward
/// sweep over the forward orbit.
pub fn stable_log_stretches(f: &ToralMap, x0: &Vector, n: usize) -> Result<Vec<f64>> {
    let extra = default_depth(f, Bundle::S);
    let mut jacs = Vec::with_capacity(n + extra);
    let mut x = fold(x0);
    for _ in 0..n + extra {
        let st = f.step(&x)?;
        jacs.push(st.jac);
        x = fold(&st.image);
    }
    let mut v = f.model().direction(0);
    let mut out = alloc::vec![0.0; n];
    for k in (0..n + extra).rev() {
        let w = jacs[k].solve(&v).ok_or(Error::IllConditioned("Jacobian"))?;
        let nw = w.norm();
        v = w * (1.0 / nw);
        if k < n {
            out[k] = -nw.ln();
        }
    }
    Ok(out)
}

/// Birkhoff average of `ln |Df · v^σ|` with a batch-means error bar.
pub fn lyapunov_exponent(
    f: &ToralMap,
    sampler: &Sampler<'_>,
    bundle: Bundle,
    n: usize,
    selector: &BranchSelector,
) -> Result<ExponentEstimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument("exponent estimates need at least 1000 iterates"));
    }
    let x0 = sampler.draw(f.dim(), 1)?[0];
    let series = match bundle {
        Bundle::U | Bundle::Su => unstable_log_stretches(f, &x0, n, selector)?,
        Bundle::S => stable_log_stretches(f, &x0, n)?,
        Bundle::Wu => return Err(Error::InvalidArgument("use full_spectrum_qr for the weak unstable exponent")),
    };
    Ok(ExponentEstimate::from_series(bundle, &series))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QrSpectrum {
    /// Ascending.
    pub exponents: Vec<ExponentEstimate>,
    /// Birkhoff average of `ln Jf` along the same orbit.
    pub log_jacobian: MeanEstimate,
    /// `|Σ λᵢ − ⟨ln Jf⟩|`.
    pub identity_gap: f64,
}

/// Benettin QR on the tangent cocycle. The frame is warmed up along the
/// backward orbit chosen by `selector`, so the forward averages start
/// aligned with the Oseledets splitting of that past.
pub fn full_spectrum_qr(f: &ToralMap, x0: &Vector, n: usize, selector: &BranchSelector) -> Result<QrSpectrum> {
    if f.dim() == 3 && n < 10_000 {
        return Err(Error::InvalidArgument("the 𝕋³ spectrum needs at least 10⁴ iterates"));
    }
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument("exponent estimates need at least 1000 iterates"));
    }
    let dim = f.dim();
    let warm = [Bundle::U, Bundle::Wu, Bundle::S].iter().map(|b| default_depth(f, *b)).max().unwrap();
    let orbit = backward_orbit(f, x0, warm, selector)?;
    let mut q = Matrix::identity(dim);
    for x in orbit.points[1..].iter().rev() {
        q = qr_diagonal(&f.jacobian(x)?.mul_mat(&q)).0;
    }
    let mut series: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(n); dim];
    let mut log_j = Vec::with_capacity(n);
    let mut x = fold(x0);
    for _ in 0..n {
        let st = f.step(&x)?;
        let (qn, r) = qr_diagonal(&st.jac.mul_mat(&q));
        for i in 0..dim {
            if !(r[i].abs() > 1e-300) {
                return Err(Error::Degenerate("QR pivot below 1e-300"));
            }
            series[i].push(r[i].abs().ln());
        }
        log_j.push(st.jac.det().abs().ln());
        q = qn;
        x = fold(&st.image);
    }
    let bundles: &[Bundle] = if dim == 2 { &[Bundle::U, Bundle::S] } else { &[Bundle::Su, Bundle::Wu, Bundle::S] };
    let mut exponents: Vec<ExponentEstimate> = series.iter().zip(bundles).map(|(s, b)| ExponentEstimate::from_series(*b, s)).collect();
    exponents.reverse();
    let log_jacobian = batch_means(&log_j, BATCHES);
    let total: f64 = exponents.iter().map(|e| e.value).sum();
    Ok(QrSpectrum { exponents, identity_gap: (total - log_jacobian.mean).abs(), log_jacobian })
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
    fn linear_preimages_of_origin() {
        let f = ToralMap::linear(a2()).unwrap();
        let mut b = inverse_branches(&f, &Vector::new2(0.0, 0.0)).unwrap();
        b.sort_by(|x, y| x[1].total_cmp(&y[1]));
        assert!(b[0].distance(&Vector::new2(0.0, 0.0)) < 1e-15);
        assert!(b[1].distance(&Vector::new2(0.0, 0.5)) < 1e-15);
    }

    #[test]
    fn fixed_point_backward_orbit() {
        let f = ToralMap::linear(a2()).unwrap();
        let o = backward_orbit(&f, &Vector::new2(0.0, 0.0), 5, &BranchSelector::FixedIndex(0)).unwrap();
        assert!(o.points.iter().all(|p| p.norm() == 0.0));
        assert_eq!(o.branch_choices.len(), 5);
    }

    #[test]
    fn prefix_property_and_determinism() {
        let f = perturbed(0.05);
        let x = Vector::new2(0.3, 0.6);
        for sel in [BranchSelector::RandomSeeded(7), BranchSelector::FixedIndex(1), BranchSelector::AlongCoverLeaf { cell: [2, -1, 0] }] {
            let o10 = backward_orbit(&f, &x, 10, &sel).unwrap();
            let o5 = backward_orbit(&f, &x, 5, &sel).unwrap();
            assert_eq!(o10.truncated(5), o5);
            assert_eq!(backward_orbit(&f, &x, 10, &sel).unwrap(), o10);
            assert!(o10.max_defect(&f).unwrap() < 1e-10);
        }
    }

    #[test]
    fn linear_directions_are_eigendirections() {
        let f = ToralMap::linear(a2()).unwrap();
        let fr = splitting_frame(&f, &Vector::new2(0.2, 0.7), &BranchSelector::RandomSeeded(3)).unwrap();
        assert!(line_angle(&fr.u, &f.model().direction(1)) < 1e-12);
        assert!(line_angle(&fr.s, &f.model().direction(0)) < 1e-12);
    }

    #[test]
    fn linear_exponents_exact() {
        let f = ToralMap::linear(a2()).unwrap();
        let s2 = 2f64.sqrt();
        let u = lyapunov_exponent(&f, &Sampler::LebesgueUniform { seed: 1 }, Bundle::U, 1000, &BranchSelector::RandomSeeded(1)).unwrap();
        let s = lyapunov_exponent(&f, &Sampler::LebesgueUniform { seed: 1 }, Bundle::S, 1000, &BranchSelector::RandomSeeded(1)).unwrap();
        assert!((u.value - (2.0 + s2).ln()).abs() < 1e-12);
        assert!((s.value - (2.0 - s2).ln()).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = ToralMap::linear(a2()).unwrap();
        assert!(
            lyapunov_exponent(&f, &Sampler::SinglePoint(Vector::new2(0.1, 0.1)), Bundle::U, 10, &BranchSelector::FixedIndex(0)).is_err()
        );
    }

    #[test]
    fn qr_spectrum_sums_to_log_jacobian() {
        let f = perturbed(0.05);
        let q = full_spectrum_qr(&f, &Vector::new2(0.1, 0.2), 5000, &BranchSelector::RandomSeeded(2)).unwrap();
        assert!(q.identity_gap < 1e-10);
        assert!(q.exponents[0].value < 0.0 && q.exponents[1].value > 0.0);
    }

    #[test]
    fn depth_grows_as_gap_shrinks() {
        assert!(depth_for_ratio(0.5, 1e-12) > depth_for_ratio(0.2, 1e-12));
    }
}
