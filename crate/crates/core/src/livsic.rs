//! Livsic cohomological equation `φ∘f − φ = ψ` by least-squares spectral
//! collocation, the periodic obstruction table, and checks that `e^{−φ}` is
//! a fixed point of the transfer operator.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::inverse_branches;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, try_map_indexed};
use crate::linalg::Vector;
use crate::map::ToralMap;
use crate::periodic::find_periodic;
use crate::stats::{iid, MeanEstimate};
use crate::trig::{fold, grid_point, TrigScalar, TrigTerm};

/// Orbit-sum tolerance per unit period.
pub const OBSTRUCTION_TOL: f64 = 1e-6;
/// Periods scanned for the obstruction.
pub const OBSTRUCTION_PERIODS: u32 = 4;
/// Smallest admissible ratio of Cholesky pivots.
const PIVOT_RATIO: f64 = 1e-13;

/// Scalar potential on the torus.
pub type Potential<'a> = dyn Fn(&Vector) -> Result<f64> + Sync + 'a;

/// `ψ = ln Jf − ln d`.
pub fn log_jacobian_potential(f: &ToralMap) -> impl Fn(&Vector) -> Result<f64> + Sync + '_ {
    let ln_d = (f.degree() as f64).ln();
    move |x| Ok(f.jf(x)?.ln() - ln_d)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObstructionRow {
    pub period: u32,
    pub point: Vector,
    /// `Σ_{j<n} ψ(fʲp)`.
    pub sum: f64,
    pub tolerance: f64,
}

impl ObstructionRow {
    pub fn passed(&self) -> bool {
        self.sum.abs() < self.tolerance
    }
}

/// Orbit sums of `ψ` over every periodic point of minimal period `n ≤ n_max`.
pub fn obstruction_table(f: &ToralMap, psi: &Potential<'_>, n_max: u32) -> Result<Vec<ObstructionRow>> {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        for o in find_periodic(f, n)? {
            if o.minimal_period != n {
                continue;
            }
            let mut x = o.point;
            let mut sum = 0.0;
            for _ in 0..n {
                sum += psi(&x)?;
                x = f.eval_torus(&x)?;
            }
            rows.push(ObstructionRow { period: n, point: o.point, sum, tolerance: OBSTRUCTION_TOL * n as f64 });
        }
    }
    Ok(rows)
}

/// Largest violation in the table, if any.
pub fn worst_obstruction(rows: &[ObstructionRow]) -> Option<&ObstructionRow> {
    rows.iter().filter(|r| !r.passed()).max_by(|a, b| a.sum.abs().total_cmp(&b.sum.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LivsicOptions {
    /// Fourier cutoff `|k|∞ ≤ D`.
    pub degree: usize,
    /// Collocation points per axis.
    pub grid: usize,
    /// Test points per axis for the reported residual, offset by half a cell.
    pub test_grid: usize,
}

impl LivsicOptions {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 2 {
            Self { degree: 8, grid: 128, test_grid: 128 }
        } else {
            Self { degree: 3, grid: 40, test_grid: 24 }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LivsicSolution {
    /// Mean-zero trigonometric polynomial.
    pub phi: TrigScalar,
    pub options: LivsicOptions,
    /// Sup of `|φ∘f − φ − ψ|` on the test grid.
    pub residual: f64,
    /// Root-mean-square residual on the collocation grid.
    pub collocation_rms: f64,
    /// Smallest over largest Cholesky pivot.
    pub pivot_ratio: f64,
    pub obstruction: Vec<ObstructionRow>,
}

impl LivsicSolution {
    pub fn eval(&self, x: &Vector) -> f64 {
        self.phi.eval(x)
    }

    /// `e^{−φ(x)}`, unnormalized.
    pub fn density(&self, x: &Vector) -> f64 {
        (-self.phi.eval(x)).exp()
    }
}

/// Wave vectors `k ≠ 0` with `|k|∞ ≤ D` whose first nonzero entry is
/// positive, so that `{cos, sin}` over them spans the mean-zero part.
pub fn half_space_modes(dim: usize, degree: usize) -> Vec<[i32; 3]> {
    let d = degree as i32;
    let mut out = Vec::new();
    let z_range = if dim == 3 { -d..=d } else { 0..=0 };
    for a in -d..=d {
        for b in -d..=d {
            for c in z_range.clone() {
                let k = [a, b, c];
                let first = k.iter().copied().find(|v| *v != 0);
                if matches!(first, Some(v) if v > 0) {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn basis_at(modes: &[[i32; 3]], x: &Vector, out: &mut [f64]) {
    let r = fold(x);
    for (i, k) in modes.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..r.dim() {
            s += k[j] as f64 * r[j];
        }
        let (sn, cs) = (TAU * s).sin_cos();
        out[2 * i] = cs;
        out[2 * i + 1] = sn;
    }
}

/// In-place Cholesky of a dense symmetric matrix stored row-major; returns
/// the ratio of the smallest to the largest pivot.
fn cholesky(m: &mut [f64], n: usize) -> Result<f64> {
    let mut pmin = f64::INFINITY;
    let mut pmax: f64 = 0.0;
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::IllConditioned("normal equations are not positive definite"));
        }
        let l = d.sqrt();
        m[j * n + j] = l;
        pmin = pmin.min(d);
        pmax = pmax.max(d);
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / l;
        }
    }
    Ok(pmin / pmax)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `φ∘f − φ = ψ` after checking the periodic obstruction. The
/// unknowns are the Fourier coefficients of a mean-zero `φ`; the normal
/// equations of the collocation system on a `G`ⁿ grid are solved by
/// Cholesky.
pub fn livsic_solve(f: &ToralMap, psi: &Potential<'_>, opts: &LivsicOptions) -> Result<LivsicSolution> {
    let obstruction = obstruction_table(f, psi, OBSTRUCTION_PERIODS)?;
    if let Some(w) = worst_obstruction(&obstruction) {
        return Err(Error::ObstructionViolated { period: w.period, value: w.sum });
    }
    livsic_fit(f, psi, opts, obstruction)
}

/// The collocation fit alone, with a caller-supplied obstruction table.
pub fn livsic_fit(f: &ToralMap, psi: &Potential<'_>, opts: &LivsicOptions, obstruction: Vec<ObstructionRow>) -> Result<LivsicSolution> {
    let dim = f.dim();
    let modes = half_space_modes(dim, opts.degree);
    let n = 2 * modes.len();
    let total = opts.grid.pow(dim as u32);
    const CHUNK: usize = 2048;
    let chunks = total.div_ceil(CHUNK);
    let partial = try_map_indexed(chunks, |c| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let mut m = alloc::vec![0.0; n * n];
        let mut rhs = alloc::vec![0.0; n];
        let mut bx = alloc::vec![0.0; n];
        let mut bf = alloc::vec![0.0; n];
        let mut psi2 = 0.0;
        for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
            let x = grid_point(dim, opts.grid, 0.0, idx);
            let fx = f.eval_torus(&x)?;
            basis_at(&modes, &x, &mut bx);
            basis_at(&modes, &fx, &mut bf);
            for (a, b) in bf.iter_mut().zip(&bx) {
                *a -= b;
            }
            let p = psi(&x)?;
            psi2 += p * p;
            for i in 0..n {
                let ri = bf[i];
                rhs[i] += ri * p;
                let row = &mut m[i * n..i * n + i + 1];
                for (mij, rj) in row.iter_mut().zip(&bf[..=i]) {
                    *mij += ri * rj;
                }
            }
        }
        Ok((m, rhs, psi2))
    })?;
    let mut m = alloc::vec![0.0; n * n];
    let mut rhs = alloc::vec![0.0; n];
    let mut psi2 = 0.0;
    for (pm, pr, p2) in &partial {
        for (a, b) in m.iter_mut().zip(pm) {
            *a += b;
        }
        for (a, b) in rhs.iter_mut().zip(pr) {
            *a += b;
        }
        psi2 += p2;
    }
    let rhs0 = rhs.clone();
    let pivot_ratio = cholesky(&mut m, n)?;
    if pivot_ratio < PIVOT_RATIO {
        return Err(Error::IllConditioned("Livsic normal equations"));
    }
    cholesky_solve(&m, n, &mut rhs);
    // ‖Rc − ψ‖² = ‖ψ‖² − cᵀRᵀψ at the least-squares optimum
    let fit: f64 = rhs.iter().zip(&rhs0).map(|(c, b)| c * b).sum();
    let collocation_rms = ((psi2 - fit).max(0.0) / total as f64).sqrt();
    let terms = modes
        .iter()
        .enumerate()
        .filter(|(i, _)| rhs[2 * i] != 0.0 || rhs[2 * i + 1] != 0.0)
        .map(|(i, k)| TrigTerm::new(0, &k[..dim], rhs[2 * i], rhs[2 * i + 1]))
        .collect();
    let phi = TrigScalar::new(dim, 0.0, terms);
    let residual = livsic_residual(f, psi, &phi, opts.test_grid)?;
    Ok(LivsicSolution { phi, options: *opts, residual, collocation_rms, pivot_ratio, obstruction })
}

/// Sup of `|φ(fx) − φ(x) − ψ(x)|` over a `g`ⁿ grid offset by half a cell.
pub fn livsic_residual(f: &ToralMap, psi: &Potential<'_>, phi: &TrigScalar, g: usize) -> Result<f64> {
    let dim = f.dim();
    let total = g.pow(dim as u32);
    let vals = try_map_indexed(total, |i| -> Result<f64> {
        let x = grid_point(dim, g, 0.5, i);
        Ok((phi.eval(&f.eval_torus(&x)?) - phi.eval(&x) - psi(&x)?).abs())
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxTest {
    pub lower: Vector,
    pub side: Vector,
    /// `m_ρ(V)` estimate.
    pub measure: f64,
    /// `(m_ρ(f⁻¹V) − m_ρ(V)) / m_ρ(V)`.
    pub relative_defect: f64,
    pub stderr: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferCheck {
    /// Sup over test points of `|Σ_{fy=x} ρ(y)/Jf(y) − ρ(x)| / ρ(x)`.
    pub residual: f64,
    pub points: usize,
    pub boxes: Vec<BoxTest>,
    pub samples: usize,
    /// `∫ Jf·ρ∘f dm / ∫ ρ dm`, which equals `d` for an invariant `ρ dm`.
    pub degree_estimate: MeanEstimate,
    pub degree_passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferOptions {
    pub points: usize,
    pub boxes: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self { points: 1000, boxes: 20, samples: 100_000, seed: 5 }
    }
}

/// Relative floor on the degree identity, below Monte Carlo resolution when
/// the estimator has almost no variance.
const DEGREE_FLOOR: f64 = 1e-6;

/// Checks that `ρ dm` is `f`-invariant: pointwise through the transfer
/// operator, on random boxes by Monte Carlo, and through the degree
/// identity.
pub fn transfer_fixed_point_check(f: &ToralMap, rho: &(dyn Fn(&Vector) -> f64 + Sync), opts: &TransferOptions) -> Result<TransferCheck> {
    let dim = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let uniform = |rng: &mut ChaCha8Rng| {
        let mut v = Vector::zeros(dim);
        for i in 0..dim {
            v[i] = rng.gen::<f64>();
        }
        v
    };
    let tests: Vec<Vector> = (0..opts.points).map(|_| uniform(&mut rng)).collect();
    let defects = try_map_indexed(tests.len(), |i| -> Result<f64> {
        let x = &tests[i];
        let mut s = 0.0;
        for y in inverse_branches(f, x)? {
            s += rho(&y) / f.jf(&y)?;
        }
        let r = rho(x);
        Ok((s - r).abs() / r)
    })?;
    let residual = defects.into_iter().fold(0.0, f64::max);

    let boxes: Vec<(Vector, Vector)> = (0..opts.boxes)
        .map(|_| {
            let lo = uniform(&mut rng);
            let mut side = Vector::zeros(dim);
            for i in 0..dim {
                side[i] = rng.gen_range(0.1..0.5);
            }
            (lo, side)
        })
        .collect();
    let samples: Vec<Vector> = (0..opts.samples).map(|_| uniform(&mut rng)).collect();
    let evals = try_map_indexed(samples.len(), |i| -> Result<(Vector, f64, f64, f64)> {
        let x = &samples[i];
        let st = f.step(x)?;
        let fx = fold(&st.image);
        let r = rho(x);
        Ok((fx, r, st.jac.det().abs() * rho(&fx), r))
    })?;
    let inside = |p: &Vector, lo: &Vector, side: &Vector| (0..dim).all(|i| (p[i] - lo[i]).rem_euclid(1.0) < side[i]);
    let box_tests = map_indexed(boxes.len(), |b| {
        let (lo, side) = &boxes[b];
        let diffs: Vec<f64> = evals
            .iter()
            .zip(&samples)
            .map(|((fx, r, _, _), x)| r * (inside(fx, lo, side) as u8 as f64 - inside(x, lo, side) as u8 as f64))
            .collect();
        let mass: Vec<f64> = evals.iter().zip(&samples).map(|((_, r, _, _), x)| r * inside(x, lo, side) as u8 as f64).collect();
        let d = iid(&diffs);
        let m = iid(&mass).mean;
        BoxTest {
            lower: *lo,
            side: *side,
            measure: m,
            relative_defect: d.mean / m,
            stderr: d.stderr / m,
            passed: d.mean.abs() <= 3.0 * d.stderr,
        }
    });

    // ratio estimator with a delta-method error bar
    let num: Vec<f64> = evals.iter().map(|e| e.2).collect();
    let den: Vec<f64> = evals.iter().map(|e| e.3).collect();
    let nm = iid(&num);
    let dm = iid(&den);
    let ratio = nm.mean / dm.mean;
    let lin: Vec<f64> = num.iter().zip(&den).map(|(a, b)| (a - ratio * b) / dm.mean).collect();
    let se = iid(&lin).stderr;
    let d = f.degree() as f64;
    let degree_estimate = MeanEstimate { mean: ratio, stderr: se, n: samples.len() };
    Ok(TransferCheck {
        residual,
        points: opts.points,
        boxes: box_tests,
        samples: opts.samples,
        degree_passed: (ratio - d).abs() <= 3.0 * se + DEGREE_FLOOR * d,
        degree_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fixture2, linear2, perturbed2};

    #[test]
    fn mode_count() {
        assert_eq!(half_space_modes(2, 8).len(), (17 * 17 - 1) / 2);
        assert_eq!(half_space_modes(3, 3).len(), (7 * 7 * 7 - 1) / 2);
    }

    #[test]
    fn zero_potential_gives_zero() {
        let f = linear2();
        let zero = |_: &Vector| Ok(0.0);
        let sol = livsic_solve(&f, &zero, &LivsicOptions { degree: 4, grid: 32, test_grid: 32 }).unwrap();
        assert!(sol.phi.terms().iter().all(|t| t.cos == 0.0 && t.sin == 0.0));
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn fixture_potential_is_log_jacobian_of_phi() {
        let f = fixture2();
        let psi = log_jacobian_potential(&f);
        let sol = livsic_solve(&f, &psi, &LivsicOptions::for_dim(2)).unwrap();
        assert!(sol.residual < 1e-8, "{}", sol.residual);
        // φ = −ln Jφ + c, compared after removing the mean on a grid
        let g = 64;
        let diffs: Vec<f64> = (0..g * g)
            .map(|i| {
                let x = grid_point(2, g, 0.25, i);
                sol.eval(&x) + f.phi_jacobian(&x).det().abs().ln()
            })
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!(diffs.iter().all(|d| (d - mean).abs() < 1e-6));
    }

    #[test]
    fn perturbed_violates_obstruction() {
        let f = perturbed2(0.1).unwrap();
        let psi = log_jacobian_potential(&f);
        match livsic_solve(&f, &psi, &LivsicOptions::for_dim(2)) {
            Err(Error::ObstructionViolated { value, .. }) => assert!(value.abs() > 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_transfer_is_exact() {
        let f = linear2();
        let one = |_: &Vector| 1.0;
        let c = transfer_fixed_point_check(&f, &one, &TransferOptions { samples: 10_000, ..Default::default() }).unwrap();
        assert!(c.residual < 1e-12);
        assert!(c.degree_passed);
    }

    #[test]
    fn fixture_density_is_invariant() {
        let f = fixture2();
        let psi = log_jacobian_potential(&f);
        let sol = livsic_solve(&f, &psi, &LivsicOptions::for_dim(2)).unwrap();
        let rho = |x: &Vector| sol.density(x);
        let c = transfer_fixed_point_check(&f, &rho, &TransferOptions::default()).unwrap();
        assert!(c.residual < 1e-6, "{}", c.residual);
        assert!(c.boxes.iter().all(|b| b.passed), "{:?}", c.boxes);
        assert!(c.degree_passed, "{:?}", c.degree_estimate);
    }

    #[test]
    fn fixture3_potential_solves() {
        let f = crate::fixtures::fixture3();
        let psi = log_jacobian_potential(&f);
        let sol = livsic_solve(&f, &psi, &LivsicOptions::for_dim(3)).unwrap();
        assert!(sol.residual < 1e-8, "{} {}", sol.residual, sol.pivot_ratio);
    }

    #[test]
    fn cholesky_solves_spd() {
        let mut m = alloc::vec![4.0, 0.0, 2.0, 3.0];
        let mut b = alloc::vec![2.0, 5.0];
        // only the lower triangle is read
        m[1] = 0.0;
        m[2] = 2.0;
        let r = cholesky(&mut m, 2).unwrap();
        cholesky_solve(&m, 2, &mut b);
        assert!(r > 0.0);
        assert!((4.0 * b[0] + 2.0 * b[1] - 2.0).abs() < 1e-14 && (2.0 * b[0] + 3.0 * b[1] - 5.0).abs() < 1e-14);
    }
}
