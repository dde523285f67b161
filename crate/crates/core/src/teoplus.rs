//! The five-way equivalence on 𝕋²: invariant absolutely continuous measure,
//! smooth conjugacy, `C¹` invariant density, `Jfⁿ(p) = dⁿ`, and
//! `Jfⁿ(p) = cⁿ`. Each item gets its own computed verdict; for a special map
//! they must agree.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::conjugacy::{default_scales, leafwise_derivative_probe, probe_points, ConjugacyField, LeafwiseProbe, ProbeVerdict};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::linalg::Vector;
use crate::livsic::{
    livsic_fit, log_jacobian_potential, obstruction_table, worst_obstruction, LivsicOptions, LivsicSolution, ObstructionRow, TransferCheck,
    TransferOptions, OBSTRUCTION_PERIODS,
};
use crate::map::ToralMap;
use crate::periodic::{periodic_data_report, PeriodicDataReport};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TeoplusOptions {
    /// Tolerance on periodic data.
    pub tau: f64,
    pub n_max: u32,
    pub livsic: LivsicOptions,
    /// Sup residual accepted from the Livsic fit.
    pub livsic_tol: f64,
    pub transfer: TransferOptions,
    /// Pointwise transfer-operator tolerance.
    pub transfer_tol: f64,
    /// Leafwise probes used for item (2) when a conjugacy is supplied.
    pub probes: usize,
    pub seed: u64,
}

impl Default for TeoplusOptions {
    fn default() -> Self {
        Self {
            tau: 1e-6,
            n_max: OBSTRUCTION_PERIODS,
            livsic: LivsicOptions::for_dim(2),
            livsic_tol: 1e-8,
            transfer: TransferOptions::default(),
            transfer_tol: 1e-6,
            probes: 4,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ItemVerdict {
    pub item: u8,
    pub statement: String,
    pub passed: bool,
    /// Measured quantity the verdict rests on.
    pub value: f64,
    pub threshold: f64,
    /// `threshold / value` when passing, `value / threshold` when failing.
    pub margin: f64,
    pub detail: String,
}

fn item(item: u8, statement: &str, value: f64, threshold: f64, extra: bool, detail: String) -> ItemVerdict {
    let passed = extra && value <= threshold;
    let margin = if value == 0.0 {
        f64::INFINITY
    } else if passed {
        threshold / value
    } else {
        value / threshold
    };
    ItemVerdict { item, statement: statement.into(), passed, value, threshold, margin, detail }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TeoplusReport {
    pub items: Vec<ItemVerdict>,
    pub consistent: bool,
    pub periodic: PeriodicDataReport,
    pub obstruction: Vec<ObstructionRow>,
    pub livsic: Option<LivsicSolution>,
    pub livsic_error: Option<String>,
    pub transfer: Option<TransferCheck>,
    /// `ln c`, the mean of `(1/n) ln Jfⁿ(p)`.
    pub log_c: f64,
    pub probes: Vec<LeafwiseProbe>,
}

impl TeoplusReport {
    pub fn verdict(&self, i: u8) -> Option<&ItemVerdict> {
        self.items.iter().find(|v| v.item == i)
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|v| v.passed)
    }

    /// [`Error::InconsistentVerdicts`] when the items disagree.
    pub fn ensure_consistent(&self) -> Result<()> {
        if self.consistent {
            Ok(())
        } else {
            let split: Vec<String> =
                self.items.iter().map(|v| format!("({})={}", v.item, if v.passed { "pass" } else { "fail" })).collect();
            Err(Error::InconsistentVerdicts(split.join(" ")))
        }
    }
}

/// Runs every item on a map of 𝕋². The conjugacy, when given, feeds the
/// leafwise probes of item (2); periodic rigidity of both exponents is
/// always part of it.
pub fn teoplus_suite(f: &ToralMap, h: Option<&ConjugacyField>, opts: &TeoplusOptions) -> Result<TeoplusReport> {
    if f.dim() != 2 {
        return Err(Error::InvalidArgument("the equivalence suite is set on 𝕋²"));
    }
    let periodic = periodic_data_report(f, opts.n_max, opts.tau)?;
    let d = f.degree() as f64;

    // (4) Jfⁿ(p) = dⁿ
    let v4 = item(
        4,
        "Jf^n(p) = d^n at every periodic point",
        periodic.jacobian_ratio_defect,
        opts.tau,
        true,
        format!("max |Jf^n/d^n - 1| over {} points, n <= {}", periodic.orbits.len(), opts.n_max),
    );

    // (5) Jfⁿ(p) = cⁿ
    let rates: Vec<f64> = periodic.orbits.iter().map(|o| o.log_jacobian_rate()).collect();
    let log_c = rates.iter().sum::<f64>() / rates.len() as f64;
    let c_spread = rates.iter().map(|r| (r - log_c).abs()).fold(0.0, f64::max);

    // (1), (3) through the Livsic density
    let psi = log_jacobian_potential(f);
    let obstruction = obstruction_table(f, &psi, opts.n_max)?;
    let (livsic, livsic_error) = match worst_obstruction(&obstruction) {
        Some(w) => (None, Some(format!("{}", Error::ObstructionViolated { period: w.period, value: w.sum }))),
        None => match livsic_fit(f, &psi, &opts.livsic, obstruction.clone()) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(format!("{e}"))),
        },
    };
    let transfer = match &livsic {
        Some(sol) => {
            let rho = |x: &Vector| sol.density(x);
            Some(crate::livsic::transfer_fixed_point_check(f, &rho, &opts.transfer)?)
        }
        None => None,
    };
    let worst_sum = obstruction.iter().map(|r| r.sum.abs() / r.period as f64).fold(0.0, f64::max);
    let degree_ok = transfer.as_ref().map(|t| t.degree_passed);

    let v5 = item(
        5,
        "Jf^n(p) = c^n for one constant c",
        c_spread,
        opts.tau,
        degree_ok.unwrap_or(true),
        format!(
            "c = {:.12}, |ln c - ln d| = {:.3e}, degree identity {}",
            log_c.exp(),
            (log_c - d.ln()).abs(),
            match (&transfer, degree_ok) {
                (Some(t), Some(ok)) =>
                    format!("{:.9} +- {:.1e} ({})", t.degree_estimate.mean, t.degree_estimate.stderr, if ok { "holds" } else { "fails" }),
                _ => String::from("not available"),
            }
        ),
    );

    let v1 = match (&livsic, &transfer) {
        (Some(sol), Some(t)) => {
            let worst_box = t.boxes.iter().map(|b| b.relative_defect.abs() / (3.0 * b.stderr).max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
            item(
                1,
                "f preserves an absolutely continuous measure",
                worst_box,
                1.0,
                t.degree_passed && sol.residual <= opts.livsic_tol,
                format!(
                    "worst box defect in units of 3 se over {} boxes; degree identity {}",
                    t.boxes.len(),
                    if t.degree_passed { "holds" } else { "fails" }
                ),
            )
        }
        _ => item(
            1,
            "f preserves an absolutely continuous measure",
            worst_sum,
            crate::livsic::OBSTRUCTION_TOL,
            false,
            livsic_error.clone().unwrap_or_default(),
        ),
    };
    let v3 = match (&livsic, &transfer) {
        (Some(sol), Some(t)) => item(
            3,
            "f preserves a measure with C^1 density",
            t.residual,
            opts.transfer_tol,
            sol.residual <= opts.livsic_tol,
            format!("Livsic residual {:.3e}, transfer residual {:.3e}", sol.residual, t.residual),
        ),
        _ => item(
            3,
            "f preserves a measure with C^1 density",
            worst_sum,
            crate::livsic::OBSTRUCTION_TOL,
            false,
            livsic_error.clone().unwrap_or_default(),
        ),
    };

    // (2) smooth conjugacy: rigid periodic exponents and stabilizing probes
    let probes = match h {
        Some(h) => {
            let pts = probe_points(f, opts.probes, opts.seed)?;
            let scales = default_scales();
            try_map_indexed(pts.len(), |i| leafwise_derivative_probe(h, &pts[i].1, &scales, &pts[i].0))?
        }
        None => Vec::new(),
    };
    let stabilizing = probes.iter().filter(|p| p.verdict == ProbeVerdict::Stabilizing).count();
    let exp_dev = periodic.exponents.iter().map(|s| s.max_deviation).fold(0.0, f64::max);
    let v2 = item(
        2,
        "f is smoothly conjugate to A",
        exp_dev,
        opts.tau,
        stabilizing == probes.len(),
        format!("periodic exponent deviation {:.3e}; probes stabilizing {}/{}", exp_dev, stabilizing, probes.len()),
    );

    let items = alloc::vec![v1, v2, v3, v4, v5];
    let consistent = items.iter().all(|v| v.passed) || items.iter().all(|v| !v.passed);
    Ok(TeoplusReport { items, consistent, periodic, obstruction, livsic, livsic_error, transfer, log_c, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{linear2, perturbed2};

    fn quick() -> TeoplusOptions {
        TeoplusOptions {
            n_max: 3,
            livsic: LivsicOptions { degree: 4, grid: 32, test_grid: 32 },
            transfer: TransferOptions { points: 200, boxes: 5, samples: 5000, seed: 2 },
            ..Default::default()
        }
    }

    #[test]
    fn linear_passes_everything() {
        let r = teoplus_suite(&linear2(), None, &quick()).unwrap();
        assert!(r.all_passed(), "{:?}", r.items);
        assert!(r.ensure_consistent().is_ok());
    }

    #[test]
    fn perturbed_fails_together() {
        let r = teoplus_suite(&perturbed2(0.1).unwrap(), None, &quick()).unwrap();
        assert!(r.items.iter().all(|v| !v.passed), "{:?}", r.items);
        assert!(r.livsic.is_none());
        assert!(r.consistent);
    }
}
