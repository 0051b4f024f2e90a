//! Experiment configuration: a dotted-key structured-text format parsed
//! strictly — unknown keys are rejected by name, resolution and horizon have
//! no defaults, and every value is validated against the preconditions of
//! the module that consumes it before any computation starts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use toml::value::{Table, Value};

use crate::error::{Error, Result};
use crate::estimates::EstimateParams;
use crate::grid::RadialGrid;
use crate::manifold::{TargetKind, TargetManifold};
use crate::solver::{DataFamily, InitialData};

/// Which experiment the harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// One evolution with the full diagnostics series.
    Run,
    /// The same run repeated under grid refinement, with measured orders.
    Convergence,
    /// One run per data amplitude, with monotonicity tables.
    Sweep,
    /// The synthetic characteristic-flux corpus.
    DivCurl,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::DivCurl => "divcurl",
        }
    }
}

/// Grid geometry keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dr: f64,
    pub r_max: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(self.dr, self.r_max)?))
    }
}

/// Time-stepping keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub cfl: f64,
}

/// Target-manifold keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub ambient_dim: Option<usize>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<Arc<TargetManifold>> {
        Ok(Arc::new(match self.kind {
            TargetKind::UnitSphere => TargetManifold::unit_sphere(3)?,
            TargetKind::CliffordTorus => TargetManifold::clifford_torus(),
            TargetKind::Flat => TargetManifold::flat(self.ambient_dim.unwrap_or(2))?,
        }))
    }
}

/// Frame-diagnostics keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaugeSpec {
    pub enabled: bool,
    pub antisymmetrize: bool,
}

/// Weighted-estimate keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatesSpec {
    pub params: EstimateParams,
    pub h2_enabled: bool,
}

/// Everything a single evolution needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub target: TargetSpec,
    pub data: InitialData,
    pub gauge: GaugeSpec,
    pub estimates: EstimatesSpec,
    /// Diagnostics sampling stride in steps.
    pub save_every: usize,
}

impl PdeConfig {
    /// Time step implied by the grid and the CFL number.
    pub fn dt(&self) -> f64 {
        self.time.cfl * self.grid.dr
    }

    /// The same configuration at half the grid spacing.
    pub fn refined(&self) -> PdeConfig {
        let mut out = self.clone();
        out.grid.dr *= 0.5;
        out
    }

    /// The same configuration with a different data amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> PdeConfig {
        let mut out = self.clone();
        out.data.amplitude = amplitude;
        out
    }
}

/// Experiment-scoped keys (all optional, with stated defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Refinement levels of a convergence study (≥ 3).
    pub levels: usize,
    /// Sweep amplitudes; defaults to the single configured data amplitude.
    pub amplitudes: Option<Vec<f64>>,
    /// Corpus trials.
    pub trials: usize,
    /// Corpus lattice cells per side.
    pub corpus_cells: usize,
}

/// A fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Present for every experiment kind that evolves the field; absent is
    /// only legal for the corpus kind.
    pub pde: Option<PdeConfig>,
}

impl RunConfig {
    /// Parse and validate a configuration document.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let root: Table = text
            .parse::<Table>()
            .map_err(|e| Error::Config(format!("config is not valid structured text: {e}")))?;
        reject_unknown_keys(&root)?;
        build_config(&root)
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    /// The PDE section, or a config error naming the experiment kind.
    pub fn pde(&self) -> Result<&PdeConfig> {
        self.pde.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "experiment.kind = \"{}\" needs the grid/time/target/data sections",
                self.experiment.kind.as_str()
            ))
        })
    }

    /// Sweep amplitudes: the explicit list, or the single configured one.
    pub fn sweep_amplitudes(&self) -> Result<Vec<f64>> {
        if let Some(list) = &self.experiment.amplitudes {
            return Ok(list.clone());
        }
        Ok(vec![self.pde()?.data.amplitude])
    }

    /// Canonical `key = value` echo of every resolved setting, used by the
    /// run manifest. Floats are rendered with full round-trip precision.
    pub fn canonical_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("experiment.kind = {}", self.experiment.kind.as_str()),
            format!("seed = {}", self.seed),
            format!("output.dir = {}", self.output_dir.display()),
        ];
        match self.experiment.kind {
            ExperimentKind::Convergence => {
                out.push(format!("experiment.levels = {}", self.experiment.levels));
            }
            ExperimentKind::Sweep => {
                if let Some(amps) = &self.experiment.amplitudes {
                    let rendered: Vec<String> =
                        amps.iter().map(|a| format!("{a:.16e}")).collect();
                    out.push(format!("experiment.amplitudes = [{}]", rendered.join(", ")));
                }
            }
            ExperimentKind::DivCurl => {
                out.push(format!("experiment.trials = {}", self.experiment.trials));
                out.push(format!("experiment.grid = {}", self.experiment.corpus_cells));
            }
            ExperimentKind::Run => {}
        }
        if let Some(pde) = &self.pde {
            out.push(format!("output.save_every = {}", pde.save_every));
            out.push(format!("grid.dr = {:.16e}", pde.grid.dr));
            out.push(format!("grid.r_max = {:.16e}", pde.grid.r_max));
            out.push(format!("time.t_end = {:.16e}", pde.time.t_end));
            out.push(format!("time.cfl = {:.16e}", pde.time.cfl));
            out.push(format!("target.kind = {}", target_kind_str(pde.target.kind)));
            if let Some(n) = pde.target.ambient_dim {
                out.push(format!("target.ambient_dim = {n}"));
            }
            out.push(format!("data.family = {}", family_str(pde.data.family)));
            if pde.data.family != DataFamily::Zero {
                out.push(format!("data.amplitude = {:.16e}", pde.data.amplitude));
                out.push(format!("data.width = {:.16e}", pde.data.width));
                out.push(format!("data.center = {:.16e}", pde.data.center));
            }
            out.push(format!("gauge.enabled = {}", pde.gauge.enabled));
            out.push(format!("gauge.antisymmetrize = {}", pde.gauge.antisymmetrize));
            out.push(format!("estimates.alpha = {:.16e}", pde.estimates.params.alpha));
            out.push(format!("estimates.beta = {:.16e}", pde.estimates.params.beta));
            out.push(format!("estimates.sigma = {:.16e}", pde.estimates.params.sigma));
            out.push(format!("estimates.h2_enabled = {}", pde.estimates.h2_enabled));
        }
        out
    }
}

fn target_kind_str(kind: TargetKind) -> &'static str {
    match kind {
        TargetKind::UnitSphere => "sphere",
        TargetKind::CliffordTorus => "clifford_torus",
        TargetKind::Flat => "flat",
    }
}

fn family_str(family: DataFamily) -> &'static str {
    match family {
        DataFamily::GaussianBump => "gaussian",
        DataFamily::RingBump => "ring",
        DataFamily::Zero => "zero",
    }
}

/// Every key the format understands, as (section, key) pairs; a bare key
/// uses an empty section.
const KNOWN_KEYS: &[(&str, &str)] = &[
    ("", "seed"),
    ("experiment", "kind"),
    ("experiment", "levels"),
    ("experiment", "amplitudes"),
    ("experiment", "trials"),
    ("experiment", "grid"),
    ("output", "dir"),
    ("output", "save_every"),
    ("grid", "dr"),
    ("grid", "r_max"),
    ("time", "t_end"),
    ("time", "cfl"),
    ("target", "kind"),
    ("target", "ambient_dim"),
    ("data", "family"),
    ("data", "amplitude"),
    ("data", "width"),
    ("data", "center"),
    ("gauge", "enabled"),
    ("gauge", "antisymmetrize"),
    ("estimates", "alpha"),
    ("estimates", "beta"),
    ("estimates", "sigma"),
    ("estimates", "h2_enabled"),
];

fn reject_unknown_keys(root: &Table) -> Result<()> {
    for (section, value) in root {
        let is_section = KNOWN_KEYS.iter().any(|(s, _)| s == section);
        let is_bare = KNOWN_KEYS.iter().any(|(s, k)| s.is_empty() && k == section);
        if is_bare {
            continue;
        }
        if !is_section {
            return Err(Error::Config(format!("unknown config key `{section}`")));
        }
        let table = value.as_table().ok_or_else(|| {
            Error::Config(format!("config key `{section}` must be a section of keys"))
        })?;
        for (key, inner) in table {
            if !KNOWN_KEYS.iter().any(|(s, k)| s == section && k == key) {
                return Err(Error::Config(format!("unknown config key `{section}.{key}`")));
            }
            if inner.is_table() {
                return Err(Error::Config(format!(
                    "config key `{section}.{key}` must be a value, not a section"
                )));
            }
        }
    }
    Ok(())
}

fn section<'a>(root: &'a Table, name: &str) -> Option<&'a Table> {
    root.get(name).and_then(Value::as_table)
}

fn value_as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn req_f64(table: Option<&Table>, section: &str, key: &str) -> Result<f64> {
    let v = table
        .and_then(|t| t.get(key))
        .ok_or_else(|| Error::Config(format!("missing required config key `{section}.{key}`")))?;
    let x = value_as_f64(v).ok_or_else(|| {
        Error::Config(format!("config key `{section}.{key}` must be a number"))
    })?;
    if !x.is_finite() {
        return Err(Error::Config(format!("config key `{section}.{key}` must be finite")));
    }
    Ok(x)
}

fn opt_f64(table: Option<&Table>, section: &str, key: &str, default: f64) -> Result<f64> {
    match table.and_then(|t| t.get(key)) {
        None => Ok(default),
        Some(_) => req_f64(table, section, key),
    }
}

fn req_str<'a>(table: Option<&'a Table>, section: &str, key: &str) -> Result<&'a str> {
    let v = table
        .and_then(|t| t.get(key))
        .ok_or_else(|| Error::Config(format!("missing required config key `{section}.{key}`")))?;
    v.as_str()
        .ok_or_else(|| Error::Config(format!("config key `{section}.{key}` must be a string")))
}

fn opt_usize(table: Option<&Table>, section: &str, key: &str, default: usize) -> Result<usize> {
    match table.and_then(|t| t.get(key)) {
        None => Ok(default),
        Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
        Some(_) => Err(Error::Config(format!(
            "config key `{section}.{key}` must be a nonnegative integer"
        ))),
    }
}

fn opt_bool(table: Option<&Table>, section: &str, key: &str, default: bool) -> Result<bool> {
    match table.and_then(|t| t.get(key)) {
        None => Ok(default),
        Some(Value::Boolean(b)) => Ok(*b),
        Some(_) => {
            Err(Error::Config(format!("config key `{section}.{key}` must be true or false")))
        }
    }
}

fn build_config(root: &Table) -> Result<RunConfig> {
    let exp = section(root, "experiment");
    let kind = match req_str(exp, "experiment", "kind")? {
        "run" => ExperimentKind::Run,
        "convergence" => ExperimentKind::Convergence,
        "sweep" => ExperimentKind::Sweep,
        "divcurl" => ExperimentKind::DivCurl,
        other => {
            return Err(Error::Config(format!(
                "config key `experiment.kind` has unknown value \"{other}\" \
                 (expected run, convergence, sweep, or divcurl)"
            )))
        }
    };
    let levels = opt_usize(exp, "experiment", "levels", 3)?;
    if levels < 3 {
        return Err(Error::Config("config key `experiment.levels` must be ≥ 3".into()));
    }
    let trials = opt_usize(exp, "experiment", "trials", 100)?;
    if trials == 0 {
        return Err(Error::Config("config key `experiment.trials` must be ≥ 1".into()));
    }
    let corpus_cells = opt_usize(exp, "experiment", "grid", 64)?;
    if corpus_cells < 4 {
        return Err(Error::Config("config key `experiment.grid` must be ≥ 4 cells".into()));
    }
    let amplitudes = match exp.and_then(|t| t.get("amplitudes")) {
        None => None,
        Some(Value::Array(items)) => {
            let mut list = Vec::with_capacity(items.len());
            for item in items {
                let a = value_as_f64(item).ok_or_else(|| {
                    Error::Config("config key `experiment.amplitudes` must list numbers".into())
                })?;
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::Config(
                        "config key `experiment.amplitudes` entries must be finite and ≥ 0"
                            .into(),
                    ));
                }
                list.push(a);
            }
            if list.is_empty() {
                return Err(Error::Config(
                    "config key `experiment.amplitudes` must not be empty".into(),
                ));
            }
            if list.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(
                    "config key `experiment.amplitudes` must be sorted ascending".into(),
                ));
            }
            Some(list)
        }
        Some(_) => {
            return Err(Error::Config(
                "config key `experiment.amplitudes` must be an array of numbers".into(),
            ))
        }
    };

    let out = section(root, "output");
    let output_dir = PathBuf::from(req_str(out, "output", "dir")?);
    let save_every = opt_usize(out, "output", "save_every", 1)?;
    if save_every == 0 {
        return Err(Error::Config("config key `output.save_every` must be ≥ 1".into()));
    }

    let seed = match root.get("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => {
            return Err(Error::Config("config key `seed` must be a nonnegative integer".into()))
        }
    };

    let needs_pde = kind != ExperimentKind::DivCurl;
    let has_pde = section(root, "grid").is_some()
        || section(root, "time").is_some()
        || section(root, "target").is_some()
        || section(root, "data").is_some();
    let pde = if needs_pde || has_pde {
        Some(build_pde(root, save_every)?)
    } else {
        None
    };

    Ok(RunConfig {
        experiment: ExperimentSpec { kind, levels, amplitudes, trials, corpus_cells },
        output_dir,
        seed,
        pde,
    })
}

fn build_pde(root: &Table, save_every: usize) -> Result<PdeConfig> {
    let grid_t = section(root, "grid");
    let dr = req_f64(grid_t, "grid", "dr")?;
    let r_max = req_f64(grid_t, "grid", "r_max")?;
    let grid = GridSpec { dr, r_max };
    grid.build().map_err(|e| {
        Error::Config(format!("config keys `grid.dr`/`grid.r_max` rejected: {e}"))
    })?;

    let time_t = section(root, "time");
    let t_end = req_f64(time_t, "time", "t_end")?;
    if !(t_end > 0.0) {
        return Err(Error::Config("config key `time.t_end` must be positive".into()));
    }
    let cfl = req_f64(time_t, "time", "cfl")?;
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Config("config key `time.cfl` must lie in (0, 1]".into()));
    }

    let target_t = section(root, "target");
    let kind = match req_str(target_t, "target", "kind")? {
        "sphere" => TargetKind::UnitSphere,
        "clifford_torus" => TargetKind::CliffordTorus,
        "flat" => TargetKind::Flat,
        other => {
            return Err(Error::Config(format!(
                "config key `target.kind` has unknown value \"{other}\" \
                 (expected sphere, clifford_torus, or flat)"
            )))
        }
    };
    let ambient_raw = target_t.and_then(|t| t.get("ambient_dim"));
    let ambient_dim = match (kind, ambient_raw) {
        (TargetKind::Flat, Some(Value::Integer(n))) if *n >= 1 => Some(*n as usize),
        (TargetKind::Flat, Some(_)) => {
            return Err(Error::Config(
                "config key `target.ambient_dim` must be a positive integer".into(),
            ))
        }
        (TargetKind::Flat, None) => {
            return Err(Error::Config(
                "missing required config key `target.ambient_dim` (flat target)".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(Error::Config(
                "config key `target.ambient_dim` only applies to target.kind = \"flat\"".into(),
            ))
        }
        (_, None) => None,
    };
    let target = TargetSpec { kind, ambient_dim };
    target.build().map_err(|e| {
        Error::Config(format!("config key `target.ambient_dim` rejected: {e}"))
    })?;

    let data_t = section(root, "data");
    let family = match req_str(data_t, "data", "family")? {
        "gaussian" => DataFamily::GaussianBump,
        "ring" => DataFamily::RingBump,
        "zero" => DataFamily::Zero,
        other => {
            return Err(Error::Config(format!(
                "config key `data.family` has unknown value \"{other}\" \
                 (expected gaussian, ring, or zero)"
            )))
        }
    };
    let data = if family == DataFamily::Zero {
        for key in ["amplitude", "width", "center"] {
            if data_t.and_then(|t| t.get(key)).is_some() {
                return Err(Error::Config(format!(
                    "config key `data.{key}` does not apply to data.family = \"zero\""
                )));
            }
        }
        InitialData::zero()
    } else {
        let amplitude = req_f64(data_t, "data", "amplitude")?;
        let width = req_f64(data_t, "data", "width")?;
        if !(width > 0.0) {
            return Err(Error::Config("config key `data.width` must be positive".into()));
        }
        let center = req_f64(data_t, "data", "center")?;
        if center < 0.0 {
            return Err(Error::Config("config key `data.center` must be ≥ 0".into()));
        }
        InitialData { family, amplitude, width, center }
    };
    let limit = r_max - t_end - 1.0;
    if data.support_radius() > limit {
        return Err(Error::Config(format!(
            "data support radius {} exceeds grid.r_max − time.t_end − 1 = {limit}; \
             enlarge `grid.r_max` or shrink `data.width`/`data.center`/`time.t_end`",
            data.support_radius()
        )));
    }

    let gauge_t = section(root, "gauge");
    let gauge = GaugeSpec {
        enabled: opt_bool(gauge_t, "gauge", "enabled", true)?,
        antisymmetrize: opt_bool(gauge_t, "gauge", "antisymmetrize", true)?,
    };

    let est_t = section(root, "estimates");
    let alpha = opt_f64(est_t, "estimates", "alpha", 0.2)?;
    let beta = opt_f64(est_t, "estimates", "beta", 0.2)?;
    let sigma = opt_f64(est_t, "estimates", "sigma", 0.01)?;
    let params = EstimateParams::new(alpha, beta, sigma).map_err(|e| {
        Error::Config(format!("config keys `estimates.alpha`/`estimates.beta`/`estimates.sigma` rejected: {e}"))
    })?;
    let estimates =
        EstimatesSpec { params, h2_enabled: opt_bool(est_t, "estimates", "h2_enabled", true)? };

    Ok(PdeConfig {
        grid,
        time: TimeSpec { t_end, cfl },
        target,
        data,
        gauge,
        estimates,
        save_every,
    })
}
