//! One function per subcommand. Each returns a [`Report`]; writing it out
//! is the caller's job.

use std::cell::OnceCell;

use anosov_core::conjugacy::{
    dichotomy_experiment, fitted_order, reconstruct_h_on_leaf, solve_conjugacy_with, ConjugacyField, ConjugacyOptions, DichotomyOptions,
    LeafwiseProbe,
};
use anosov_core::dynamics::{full_spectrum_qr, lyapunov_exponent, BranchSelector, Bundle, ExponentEstimate, Sampler};
use anosov_core::exec::try_map_indexed;
use anosov_core::leaf::leaf_segment;
use anosov_core::livsic::{
    livsic_fit, log_jacobian_potential, obstruction_table, transfer_fixed_point_check, worst_obstruction, LivsicOptions, TransferOptions,
};
use anosov_core::periodic::periodic_data_report;
use anosov_core::srb::{conditional_density_s, conditional_density_u, pesin_report, DensityProfile};
use anosov_core::t3::{teo3_suite, HolonomyOptions, Teo3Options};
use anosov_core::teoplus::{teoplus_suite, ItemVerdict, TeoplusOptions};
use anosov_core::{CoverPoint, Error, ToralMap, Vector};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{LabResult, ModuleContext};
use crate::report::{num, to_value, Report, Status, Table};
use crate::svg::{Plot, Series, Style};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Spectrum,
    Periodic,
    Conjugacy,
    Dichotomy,
    Srb,
    Livsic,
    Teoplus,
    T3,
    /// Every command that applies to the map's dimension.
    All,
}

impl Command {
    pub const EACH: [Command; 8] = [
        Command::Spectrum,
        Command::Periodic,
        Command::Conjugacy,
        Command::Dichotomy,
        Command::Srb,
        Command::Livsic,
        Command::Teoplus,
        Command::T3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Periodic => "periodic",
            Command::Conjugacy => "conjugacy",
            Command::Dichotomy => "dichotomy",
            Command::Srb => "srb",
            Command::Livsic => "livsic",
            Command::Teoplus => "teoplus",
            Command::T3 => "t3",
            Command::All => "all",
        }
    }

    /// Dimension the command is restricted to, if any.
    pub fn only_dim(self) -> Option<usize> {
        match self {
            Command::Dichotomy | Command::Teoplus => Some(2),
            Command::T3 => Some(3),
            _ => None,
        }
    }
}

/// A map together with lazily computed objects shared between commands.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub f: ToralMap,
    conjugacy: OnceCell<anosov_core::Result<ConjugacyField>>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> LabResult<Self> {
        let f = cfg.map.build().during("map")?;
        Ok(Context { cfg, f, conjugacy: OnceCell::new() })
    }

    fn conjugacy(&self) -> anosov_core::Result<&ConjugacyField> {
        let p = &self.cfg.conjugacy;
        self.conjugacy
            .get_or_init(|| {
                solve_conjugacy_with(&self.f, &ConjugacyOptions { grid: p.grid, tail_tol: p.tail_tol, residual_tol: p.residual_tol })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn run(&self, cmd: Command) -> LabResult<Report> {
        let name = cmd.name();
        if let Some(d) = cmd.only_dim() {
            if self.f.dim() != d {
                let why = if d == 2 { "this command is defined on 𝕋² only" } else { "this command is defined on 𝕋³ only" };
                return Err(Error::InvalidArgument(why)).during(name);
            }
        }
        match cmd {
            Command::Spectrum => self.spectrum(),
            Command::Periodic => self.periodic(),
            Command::Conjugacy => self.conjugacy_report(),
            Command::Dichotomy => self.dichotomy(),
            Command::Srb => self.srb(),
            Command::Livsic => self.livsic(),
            Command::Teoplus => self.teoplus(),
            Command::T3 => self.t3(),
            Command::All => Err(Error::InvalidArgument("`all` is not a single command")),
        }
        .during(name)
    }

    fn coords(&self, prefix: &str) -> Vec<String> {
        (1..=self.f.dim()).map(|i| format!("{prefix}{i}")).collect()
    }

    fn spectrum(&self) -> anosov_core::Result<Report> {
        let (f, p) = (&self.f, &self.cfg.spectrum);
        let sampler = Sampler::LebesgueUniform { seed: p.seed };
        let selector = BranchSelector::RandomSeeded(p.seed);
        let linear = f.model().exponents().to_vec();
        let (estimates, qr): (Vec<ExponentEstimate>, _) = if f.dim() == 2 {
            let e = [Bundle::S, Bundle::U]
                .iter()
                .map(|b| lyapunov_exponent(f, &sampler, *b, p.n, &selector))
                .collect::<anosov_core::Result<_>>()?;
            (e, None)
        } else {
            let x0 = sampler.draw(3, 1)?[0];
            let q = full_spectrum_qr(f, &x0, p.n, &selector)?;
            (q.exponents.clone(), Some(q))
        };
        let mut table = Table::new("exponents", &["map", "bundle", "n", "value", "stderr", "linear", "selector", "seed"]);
        let mut rows = Vec::new();
        for (e, lin) in estimates.iter().zip(&linear) {
            table.push([
                self.cfg.name.clone(),
                e.bundle.name().to_string(),
                e.n.to_string(),
                num(e.value),
                num(e.stderr),
                num(*lin),
                selector.describe(),
                p.seed.to_string(),
            ]);
            rows.push(json!({ "bundle": e.bundle.name(), "value": e.value, "stderr": e.stderr, "n": e.n, "linear": lin, "difference": e.value - lin }));
        }
        let mut result = json!({ "sampler": sampler.name(), "selector": selector.describe(), "estimates": rows });
        if let Some(q) = qr {
            result["log_jacobian"] = to_value(&q.log_jacobian);
            result["identity_gap"] = json!(q.identity_gap);
        }
        let mut r = Report::new("spectrum", result);
        r.tables.push(table);
        Ok(r)
    }

    fn periodic(&self) -> anosov_core::Result<Report> {
        let p = &self.cfg.periodic;
        let report = periodic_data_report(&self.f, p.n_max, p.tau)?;
        let rigid = report.exponents.iter().all(|s| s.verdict.passed()) && report.log_jacobian.verdict.passed();
        let mut counts = Table::new("counts", &["n", "found", "expected"]);
        for (n, found, expected) in &report.counts {
            counts.push([n.to_string(), found.to_string(), expected.to_string()]);
        }
        let mut header: Vec<String> = vec!["period".into(), "minimal_period".into()];
        header.extend(self.coords("x"));
        header.extend(report.exponents.iter().map(|s| format!("exponent_{}", s.name)));
        header.extend(["log_jacobian_rate".into(), "residual".into()]);
        let mut orbits = Table::new("orbits", &header);
        for o in &report.orbits {
            let mut row = vec![o.period.to_string(), o.minimal_period.to_string()];
            row.extend(o.point.as_slice().iter().map(|v| num(*v)));
            row.extend(o.exponents.iter().map(|v| num(*v)));
            row.extend([num(o.log_jacobian_rate()), num(o.residual)]);
            orbits.push(row);
        }
        let mut r = Report::new("periodic", json!({ "rigid": rigid, "report": to_value(&report) }));
        r.tables.extend([counts, orbits]);
        Ok(r)
    }

    fn conjugacy_report(&self) -> anosov_core::Result<Report> {
        let h = self.conjugacy()?;
        let p = &self.cfg.conjugacy;
        let f = &self.f;
        let pts = Sampler::LebesgueUniform { seed: p.seed }.draw(f.dim(), p.fresh_points)?;
        let fresh = try_map_indexed(pts.len(), |i| -> anosov_core::Result<(f64, f64)> {
            let x = CoverPoint::from_vector(&pts[i]);
            Ok((h.residual_at(&x)?, h.displacement(&x)?.norm_inf()))
        })?;
        let max_residual = fresh.iter().map(|v| v.0).fold(0.0, f64::max);
        let sup_displacement = fresh.iter().map(|v| v.1).fold(0.0, f64::max);

        let mut header = self.coords("x");
        header.extend(["residual".into(), "displacement".into()]);
        let mut table = Table::new("fresh", &header);
        for (x, (res, u)) in pts.iter().zip(&fresh) {
            let mut row: Vec<String> = x.as_slice().iter().map(|v| num(*v)).collect();
            row.extend([num(*res), num(*u)]);
            table.push(row);
        }
        let mut result = json!({
            "summary": to_value(h.summary()),
            "fresh": { "points": pts.len(), "max_residual": max_residual, "sup_displacement": sup_displacement },
        });
        let mut r = Report::new("conjugacy", json!(null));
        if f.dim() == 2 {
            let x = CoverPoint::from_vector(&Vector::from_slice(&self.cfg.srb.point));
            let steps = [0.5, 0.25, 0.125, 0.0625];
            let errors = steps
                .iter()
                .map(|&s| reconstruct_h_on_leaf(h, &x, 1.0, s, None).map(|l| l.max_error))
                .collect::<anosov_core::Result<Vec<_>>>()?;
            let mut rec = Table::new("reconstruction", &["step", "max_error"]);
            for (s, e) in steps.iter().zip(&errors) {
                rec.push([num(*s), num(*e)]);
            }
            result["reconstruction"] =
                json!({ "length": 1.0, "steps": steps, "errors": errors, "fitted_order": fitted_order(&steps, &errors) });
            r.tables.push(rec);
        }
        r.result = result;
        r.tables.insert(0, table);
        Ok(r)
    }

    fn dichotomy(&self) -> anosov_core::Result<Report> {
        let p = &self.cfg.dichotomy;
        let h = self.conjugacy()?;
        let periodic = periodic_data_report(&self.f, p.n_max, self.cfg.periodic.tau)?;
        let report = dichotomy_experiment(
            h,
            Some(&periodic),
            &DichotomyOptions { samples: p.samples, steps: p.steps, probes: p.probes, seed: p.seed },
        )?;
        let mut r = Report::new("dichotomy", to_value(&report));
        r.tables.push(probe_table(&report.probes));
        r.figures.push(("probes", probe_plot("Leafwise difference quotients", &report.probes)));
        Ok(r)
    }

    fn srb(&self) -> anosov_core::Result<Report> {
        let (f, p) = (&self.f, &self.cfg.srb);
        let pesin = pesin_report(f, &Sampler::LebesgueUniform { seed: p.seed }, p.pesin_n, p.pesin_chains)?;
        let mut result = json!({ "pesin": to_value(&pesin) });
        let mut r = Report::new("srb", json!(null));
        if f.dim() == 2 {
            let x = CoverPoint::from_vector(&Vector::from_slice(&p.point));
            let mut series = Vec::new();
            for bundle in [Bundle::U, Bundle::S] {
                let seg = leaf_segment(f, &x, bundle, -p.length / 2.0, p.length / 2.0, p.step)?;
                let prof = match bundle {
                    Bundle::U => conditional_density_u(f, &seg, seg.base_index, p.depth)?,
                    _ => conditional_density_s(f, &seg, seg.base_index, p.depth)?,
                };
                let name = if bundle == Bundle::U { "density_u" } else { "density_s" };
                r.tables.push(density_table(name, &prof));
                series.push(Series {
                    label: format!("{} leaf", bundle.name()),
                    points: prof.t.iter().copied().zip(prof.density.iter().copied()).collect(),
                });
                result[name] = to_value(&prof);
            }
            r.figures.push((
                "densities",
                Plot {
                    title: "Conditional densities along local leaves".into(),
                    x_label: "arclength".into(),
                    y_label: "density".into(),
                    log_x: false,
                    log_y: false,
                    style: Style::Line,
                    series,
                },
            ));
        }
        r.result = result;
        Ok(r)
    }

    fn livsic_options(&self) -> (LivsicOptions, TransferOptions) {
        let p = &self.cfg.livsic;
        (
            LivsicOptions { degree: p.degree, grid: p.grid, test_grid: p.test_grid },
            TransferOptions { points: p.transfer_points, boxes: p.transfer_boxes, samples: p.transfer_samples, seed: p.seed },
        )
    }

    fn livsic(&self) -> anosov_core::Result<Report> {
        let f = &self.f;
        let psi = log_jacobian_potential(f);
        let rows = obstruction_table(f, &psi, self.cfg.livsic.n_max)?;
        let mut obstruction = Table::new("obstruction", &{
            let mut h = vec!["period".to_string()];
            h.extend(self.coords("x"));
            h.extend(["sum".into(), "tolerance".into(), "passed".into()]);
            h
        });
        for row in &rows {
            let mut cells = vec![row.period.to_string()];
            cells.extend(row.point.as_slice().iter().map(|v| num(*v)));
            cells.extend([num(row.sum), num(row.tolerance), row.passed().to_string()]);
            obstruction.push(cells);
        }
        if let Some(w) = worst_obstruction(&rows) {
            let mut r = Report::new(
                "livsic",
                json!({ "potential": "ln Jf - ln d", "obstruction": to_value(&rows), "worst": to_value(w), "solution": null, "transfer": null }),
            );
            r.status = Status::Obstructed;
            r.tables.push(obstruction);
            return Ok(r);
        }
        let (lopts, topts) = self.livsic_options();
        let sol = livsic_fit(f, &psi, &lopts, rows)?;
        let rho = |x: &Vector| sol.density(x);
        let transfer = transfer_fixed_point_check(f, &rho, &topts)?;
        let mut boxes = Table::new("boxes", &["index", "measure", "relative_defect", "stderr", "passed"]);
        for (i, b) in transfer.boxes.iter().enumerate() {
            boxes.push([i.to_string(), num(b.measure), num(b.relative_defect), num(b.stderr), b.passed.to_string()]);
        }
        let mut r = Report::new(
            "livsic",
            json!({ "potential": "ln Jf - ln d", "obstruction": to_value(&sol.obstruction), "worst": null, "solution": to_value(&sol), "transfer": to_value(&transfer) }),
        );
        r.tables.extend([obstruction, boxes]);
        Ok(r)
    }

    fn teoplus(&self) -> anosov_core::Result<Report> {
        let p = &self.cfg.teoplus;
        let (livsic, transfer) = self.livsic_options();
        let opts = TeoplusOptions {
            tau: p.tau,
            n_max: p.n_max,
            livsic,
            livsic_tol: p.livsic_tol,
            transfer,
            transfer_tol: p.transfer_tol,
            probes: p.probes,
            seed: p.seed,
        };
        // Without a conjugacy item (2) rests on periodic data alone.
        let h = self.conjugacy().ok();
        let report = teoplus_suite(&self.f, h, &opts)?;
        let mut r = Report::new("teoplus", json!({ "conjugacy_used": h.is_some(), "report": to_value(&report) }));
        if !report.consistent {
            r.status = Status::Inconsistent;
        }
        r.tables.push(item_table(&report.items));
        if !report.probes.is_empty() {
            r.tables.push(probe_table(&report.probes));
            r.figures.push(("probes", probe_plot("Leafwise difference quotients", &report.probes)));
        }
        Ok(r)
    }

    fn t3(&self) -> anosov_core::Result<Report> {
        let p = &self.cfg.t3;
        let opts = Teo3Options {
            tau: p.tau,
            n_max: p.n_max,
            holonomy: HolonomyOptions {
                center: Vector::from_slice(&p.center),
                radius: p.radius,
                offset: p.offset,
                samples: p.samples,
                k: p.k,
                seed: p.seed,
                max_step: p.max_step,
            },
            splitting_points: p.splitting_points,
        };
        let report = teo3_suite(&self.f, &opts)?;
        let hol = &report.holonomy;
        let mut table = Table::new("holonomy", &["source_1", "source_2", "target_1", "target_2", "travel", "jacobian"]);
        for i in 0..hol.source.len() {
            table.push([
                num(hol.source[i][0]),
                num(hol.source[i][1]),
                num(hol.target[i][0]),
                num(hol.target[i][1]),
                num(hol.travel[i]),
                hol.jacobian.get(i).map_or_else(String::new, |v| num(*v)),
            ]);
        }
        let mut r = Report::new("t3", to_value(&report));
        if !report.consistent {
            r.status = Status::Inconsistent;
        }
        r.figures.push((
            "holonomy",
            Plot {
                title: "Weak unstable holonomy between transversal disks".into(),
                x_label: "first disk coordinate".into(),
                y_label: "second disk coordinate".into(),
                log_x: false,
                log_y: false,
                style: Style::Points,
                series: vec![
                    Series { label: "source".into(), points: hol.source.iter().map(|p| (p[0], p[1])).collect() },
                    Series { label: "image".into(), points: hol.target.iter().map(|p| (p[0], p[1])).collect() },
                ],
            },
        ));
        r.tables.extend([item_table(&report.items), table]);
        Ok(r)
    }
}

fn density_table(name: &'static str, prof: &DensityProfile) -> Table {
    let mut t = Table::new(name, &["t", "density"]);
    for (s, d) in prof.t.iter().zip(&prof.density) {
        t.push([num(*s), num(*d)]);
    }
    t
}

fn item_table(items: &[ItemVerdict]) -> Table {
    let mut t = Table::new("items", &["item", "statement", "passed", "value", "threshold", "margin", "detail"]);
    for v in items {
        t.push([
            v.item.to_string(),
            v.statement.clone(),
            v.passed.to_string(),
            num(v.value),
            num(v.threshold),
            num(v.margin),
            v.detail.clone(),
        ]);
    }
    t
}

fn probe_table(probes: &[LeafwiseProbe]) -> Table {
    let mut t = Table::new("probes", &["label", "delta", "quotient", "verdict"]);
    for p in probes {
        for (d, q) in &p.rows {
            t.push([p.label.clone(), num(*d), num(*q), format!("{:?}", p.verdict)]);
        }
    }
    t
}

fn probe_plot(title: &str, probes: &[LeafwiseProbe]) -> Plot {
    Plot {
        title: title.into(),
        x_label: "leaf distance".into(),
        y_label: "difference quotient".into(),
        log_x: true,
        log_y: true,
        style: Style::Line,
        series: probes.iter().map(|p| Series { label: p.label.clone(), points: p.rows.clone() }).collect(),
    }
}
