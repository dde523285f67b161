//! Experiment configuration: a TOML file with one table per suite. Every
//! key is optional except the map; unknown keys are errors. Resolution fills
//! in every default so that reports carry the complete parameter set.

use std::path::{Path, PathBuf};

use anosov_core::{IntegerMatrix, ToralMap, TrigField, TrigTerm};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult, Location};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    map: Option<RawMap>,
    spectrum: Option<RawSpectrum>,
    periodic: Option<RawPeriodic>,
    conjugacy: Option<RawConjugacy>,
    dichotomy: Option<RawDichotomy>,
    srb: Option<RawSrb>,
    livsic: Option<RawLivsic>,
    teoplus: Option<RawTeoplus>,
    t3: Option<RawT3>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    file: Option<String>,
    kind: Option<String>,
    matrix: Option<Vec<Vec<i64>>>,
    terms: Option<Vec<RawTerm>>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawTerm {
    pub component: usize,
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    n: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeriodic {
    n_max: Option<u32>,
    tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConjugacy {
    grid: Option<usize>,
    tail_tol: Option<f64>,
    residual_tol: Option<f64>,
    fresh_points: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDichotomy {
    samples: Option<usize>,
    steps: Option<usize>,
    probes: Option<usize>,
    n_max: Option<u32>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSrb {
    point: Option<Vec<f64>>,
    length: Option<f64>,
    step: Option<f64>,
    depth: Option<usize>,
    pesin_n: Option<usize>,
    pesin_chains: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLivsic {
    degree: Option<usize>,
    grid: Option<usize>,
    test_grid: Option<usize>,
    n_max: Option<u32>,
    transfer_points: Option<usize>,
    transfer_boxes: Option<usize>,
    transfer_samples: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTeoplus {
    tau: Option<f64>,
    n_max: Option<u32>,
    livsic_tol: Option<f64>,
    transfer_tol: Option<f64>,
    probes: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawT3 {
    tau: Option<f64>,
    n_max: Option<u32>,
    center: Option<Vec<f64>>,
    radius: Option<f64>,
    offset: Option<f64>,
    samples: Option<usize>,
    k: Option<usize>,
    max_step: Option<f64>,
    splitting_points: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<String>,
    svg: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Linear,
    Perturbed,
    Conjugated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapSpec {
    pub kind: Kind,
    pub matrix: Vec<Vec<i64>>,
    /// Perturbation `p` or coordinate change `ψ`, empty for linear maps.
    pub terms: Vec<RawTerm>,
    /// File the map was read from, when it was not inline.
    pub source: Option<String>,
}

impl MapSpec {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn build(&self) -> anosov_core::Result<ToralMap> {
        let rows: Vec<&[i64]> = self.matrix.iter().map(|r| r.as_slice()).collect();
        let a = IntegerMatrix::new(&rows)?;
        let field = TrigField::new(self.dim(), self.terms.iter().map(|t| TrigTerm::new(t.component, &t.k, t.cos, t.sin)).collect());
        match self.kind {
            Kind::Linear => ToralMap::linear(a),
            Kind::Perturbed => ToralMap::perturbed(a, field),
            Kind::Conjugated => ToralMap::conjugated(a, field),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumParams {
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicParams {
    pub n_max: u32,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyParams {
    pub grid: usize,
    pub tail_tol: f64,
    pub residual_tol: f64,
    pub fresh_points: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DichotomyParams {
    pub samples: usize,
    pub steps: usize,
    pub probes: usize,
    pub n_max: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrbParams {
    pub point: Vec<f64>,
    pub length: f64,
    pub step: f64,
    pub depth: usize,
    pub pesin_n: usize,
    pub pesin_chains: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LivsicParams {
    pub degree: usize,
    pub grid: usize,
    pub test_grid: usize,
    pub n_max: u32,
    pub transfer_points: usize,
    pub transfer_boxes: usize,
    pub transfer_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TeoplusParams {
    pub tau: f64,
    pub n_max: u32,
    pub livsic_tol: f64,
    pub transfer_tol: f64,
    pub probes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct T3Params {
    pub tau: f64,
    pub n_max: u32,
    pub center: Vec<f64>,
    pub radius: f64,
    pub offset: f64,
    pub samples: usize,
    pub k: usize,
    pub max_step: f64,
    pub splitting_points: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputParams {
    pub format: Format,
    pub svg: bool,
}

/// Fully resolved configuration. Serialized verbatim into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub map: MapSpec,
    pub spectrum: SpectrumParams,
    pub periodic: PeriodicParams,
    pub conjugacy: ConjugacyParams,
    pub dichotomy: DichotomyParams,
    pub srb: SrbParams,
    pub livsic: LivsicParams,
    pub teoplus: TeoplusParams,
    pub t3: T3Params,
    pub output: OutputParams,
    /// Not part of the report: results do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the first `key =` or `[key]` in the text, for diagnostics on
/// values that parsed but did not validate.
fn find_line(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(leaf).is_some_and(|r| r.trim_start().starts_with('=')) || t == format!("[{key}]")
        })
        .map(|i| i + 1)
}

fn parse_raw(path: &Path, text: &str) -> LabResult<RawConfig> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        let key = message.split('`').nth(1).map(str::to_string).unwrap_or_else(|| String::from("?"));
        LabError::Config { at: Location { file: path.to_path_buf(), line: e.span().map(|s| line_of(text, s.start)), key }, message }
    })
}

fn read(path: &Path) -> LabResult<String> {
    std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

fn bad(path: &Path, text: &str, key: &str, message: impl Into<String>) -> LabError {
    LabError::Config { at: Location { file: path.to_path_buf(), line: find_line(text, key), key: key.into() }, message: message.into() }
}

fn resolve_map(path: &Path, text: &str, raw: Option<RawMap>) -> LabResult<MapSpec> {
    let Some(mut raw) = raw else {
        return Err(bad(path, text, "map", "missing [map] table"));
    };
    let mut source = None;
    let (mut path, mut text) = (path.to_path_buf(), text.to_string());
    if let Some(file) = raw.file.take() {
        if raw.kind.is_some() || raw.matrix.is_some() || raw.terms.is_some() {
            return Err(bad(&path, &text, "map.file", "a map file reference excludes inline map keys"));
        }
        let target = path.parent().unwrap_or(Path::new(".")).join(&file);
        let inner_text = read(&target)?;
        let inner = parse_raw(&target, &inner_text)?;
        raw = inner.map.ok_or_else(|| bad(&target, &inner_text, "map", "referenced file has no [map] table"))?;
        if raw.file.is_some() {
            return Err(bad(&target, &inner_text, "map.file", "map files cannot be chained"));
        }
        source = Some(file);
        path = target;
        text = inner_text;
    }
    let matrix = raw.matrix.ok_or_else(|| bad(&path, &text, "map.matrix", "missing required key `matrix`"))?;
    let dim = matrix.len();
    if !(2..=3).contains(&dim) || matrix.iter().any(|r| r.len() != dim) {
        return Err(bad(&path, &text, "map.matrix", "matrix must be square of size 2 or 3"));
    }
    let kind = match raw.kind.as_deref().unwrap_or(if raw.terms.is_some() { "perturbed" } else { "linear" }) {
        "linear" => Kind::Linear,
        "perturbed" => Kind::Perturbed,
        "conjugated" => Kind::Conjugated,
        other => return Err(bad(&path, &text, "map.kind", format!("unknown map kind `{other}` (linear, perturbed, conjugated)"))),
    };
    let terms = raw.terms.unwrap_or_default();
    if kind == Kind::Linear && !terms.is_empty() {
        return Err(bad(&path, &text, "map.terms", "linear maps take no terms"));
    }
    for t in &terms {
        if t.component >= dim || t.k.len() != dim {
            return Err(bad(&path, &text, "map.terms", format!("term {t:?} does not fit dimension {dim}")));
        }
    }
    Ok(MapSpec { kind, matrix, terms, source })
}

fn point(path: &Path, text: &str, key: &str, v: Option<Vec<f64>>, default: Vec<f64>, dim: usize) -> LabResult<Vec<f64>> {
    let v = v.unwrap_or(default);
    if v.len() != dim {
        return Err(bad(path, text, key, format!("expected {dim} coordinates")));
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> LabResult<Self> {
        let text = read(path)?;
        Self::parse(path, &text, overrides)
    }

    /// `path` is used for diagnostics and to resolve map file references.
    pub fn parse(path: &Path, text: &str, overrides: &Overrides) -> LabResult<Self> {
        let raw = parse_raw(path, text)?;
        let map = resolve_map(path, text, raw.map)?;
        let dim = map.dim();
        let two = dim == 2;
        let seed = overrides.seed.or(raw.seed).unwrap_or(1);
        let name = raw.name.unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());

        let sp = raw.spectrum.unwrap_or_default();
        let spectrum = SpectrumParams { n: sp.n.unwrap_or(if two { 100_000 } else { 20_000 }), seed: sp.seed.unwrap_or(seed) };

        let pe = raw.periodic.unwrap_or_default();
        let sampled = map.kind == Kind::Perturbed;
        let periodic = PeriodicParams {
            n_max: pe.n_max.unwrap_or(if two { 4 } else { 3 }),
            tau: pe.tau.unwrap_or(if sampled { anosov_core::periodic::TAU_SAMPLED } else { anosov_core::periodic::TAU_FIXTURE }),
        };

        let cj = raw.conjugacy.unwrap_or_default();
        let copts = anosov_core::conjugacy::ConjugacyOptions::for_dim(dim);
        let conjugacy = ConjugacyParams {
            grid: cj.grid.unwrap_or(copts.grid),
            tail_tol: cj.tail_tol.unwrap_or(copts.tail_tol),
            residual_tol: cj.residual_tol.unwrap_or(copts.residual_tol),
            fresh_points: cj.fresh_points.unwrap_or(1000),
            seed: cj.seed.unwrap_or(seed),
        };

        let di = raw.dichotomy.unwrap_or_default();
        let dd = anosov_core::conjugacy::DichotomyOptions::default();
        let dichotomy = DichotomyParams {
            samples: di.samples.unwrap_or(dd.samples),
            steps: di.steps.unwrap_or(dd.steps),
            probes: di.probes.unwrap_or(dd.probes),
            n_max: di.n_max.unwrap_or(periodic.n_max),
            seed: di.seed.unwrap_or(seed),
        };

        let sr = raw.srb.unwrap_or_default();
        let srb = SrbParams {
            point: point(path, text, "srb.point", sr.point, if two { vec![0.35, 0.6] } else { vec![0.35, 0.6, 0.2] }, dim)?,
            length: sr.length.unwrap_or(0.5),
            step: sr.step.unwrap_or(anosov_core::leaf::LEAF_STEP),
            depth: sr.depth.unwrap_or(20),
            pesin_n: sr.pesin_n.unwrap_or(if two { 200_000 } else { 40_000 }),
            pesin_chains: sr.pesin_chains.unwrap_or(4),
            seed: sr.seed.unwrap_or(seed),
        };

        let lv = raw.livsic.unwrap_or_default();
        let lo = anosov_core::livsic::LivsicOptions::for_dim(dim);
        let to = anosov_core::livsic::TransferOptions::default();
        let livsic = LivsicParams {
            degree: lv.degree.unwrap_or(lo.degree),
            grid: lv.grid.unwrap_or(lo.grid),
            test_grid: lv.test_grid.unwrap_or(lo.test_grid),
            n_max: lv.n_max.unwrap_or(anosov_core::livsic::OBSTRUCTION_PERIODS.min(if two { 4 } else { 3 })),
            transfer_points: lv.transfer_points.unwrap_or(to.points),
            transfer_boxes: lv.transfer_boxes.unwrap_or(to.boxes),
            transfer_samples: lv.transfer_samples.unwrap_or(to.samples),
            seed: lv.seed.unwrap_or(seed),
        };

        let te = raw.teoplus.unwrap_or_default();
        let td = anosov_core::teoplus::TeoplusOptions::default();
        let teoplus = TeoplusParams {
            tau: te.tau.unwrap_or(td.tau),
            n_max: te.n_max.unwrap_or(td.n_max),
            livsic_tol: te.livsic_tol.unwrap_or(td.livsic_tol),
            transfer_tol: te.transfer_tol.unwrap_or(td.transfer_tol),
            probes: te.probes.unwrap_or(td.probes),
            seed: te.seed.unwrap_or(seed),
        };

        let t3 = raw.t3.unwrap_or_default();
        let hd = anosov_core::t3::HolonomyOptions::default();
        let t3d = anosov_core::t3::Teo3Options::default();
        let t3 = T3Params {
            tau: t3.tau.unwrap_or(t3d.tau),
            n_max: t3.n_max.unwrap_or(t3d.n_max),
            center: point(path, text, "t3.center", t3.center, hd.center.as_slice().to_vec(), 3)?,
            radius: t3.radius.unwrap_or(hd.radius),
            offset: t3.offset.unwrap_or(hd.offset),
            samples: t3.samples.unwrap_or(hd.samples),
            k: t3.k.unwrap_or(hd.k),
            max_step: t3.max_step.unwrap_or(hd.max_step),
            splitting_points: t3.splitting_points.unwrap_or(t3d.splitting_points),
            seed: t3.seed.unwrap_or(seed),
        };

        let out = raw.output.unwrap_or_default();
        let format = match (overrides.format, out.format.as_deref()) {
            (Some(f), _) => f,
            (None, None | Some("json")) => Format::Json,
            (None, Some("csv")) => Format::Csv,
            (None, Some("both")) => Format::Both,
            (None, Some(other)) => return Err(bad(path, text, "output.format", format!("unknown format `{other}` (json, csv, both)"))),
        };
        let output = OutputParams { format, svg: out.svg.unwrap_or(true) };

        Ok(ExperimentConfig {
            name,
            seed,
            map,
            spectrum,
            periodic,
            conjugacy,
            dichotomy,
            srb,
            livsic,
            teoplus,
            t3,
            output,
            threads: overrides.threads.or(raw.threads),
        })
    }
}

/// Directory that holds the config, for relative references.
pub fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
