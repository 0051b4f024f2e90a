//! Experiment orchestration: single runs with their streamed diagnostics,
//! grid-refinement studies with measured orders, amplitude sweeps with
//! monotonicity tables, and the synthetic characteristic-flux corpus —
//! each persisted as a structured-text manifest plus a fixed-column CSV
//! whose bytes are reproducible for a fixed configuration and seed.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::config::{ExperimentKind, PdeConfig, RunConfig};
use crate::diagnostics::{DiagnosticsEngine, DiagnosticsRecord, DiagnosticsSettings};
use crate::divcurl::{corpus_row, CorpusRow};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::RadialGrid;
use crate::solver::{evolve, init_state, EvolveOptions, FieldState, StepOptions};

/// Library version stamped into every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cosine modes per direction of the synthetic corpus surfaces.
const CORPUS_SURFACE_MODES: usize = 4;

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Failed { message: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    fn line(&self) -> String {
        match self {
            RunStatus::Completed => "status = completed".into(),
            RunStatus::Failed { message } => format!("status = failed: {message}"),
        }
    }
}

/// The record of one executed single-run experiment.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Snapshot of the configuration that produced the record.
    pub config: RunConfig,
    /// Per-time diagnostics rows.
    pub rows: Vec<DiagnosticsRecord>,
    pub status: RunStatus,
    pub wall_clock: Duration,
    /// Code version tag.
    pub version: &'static str,
    /// Largest pre-projection constraint residual over every step.
    pub pre_projection_max: f64,
    /// Energy of the initial slice.
    pub initial_energy: f64,
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceLevel {
    pub dr: f64,
    /// L²(r dr) distance of the final position field from the reference run.
    pub solution_error: f64,
    /// max over time of the summed frame-identity residuals.
    pub gauge_residual: f64,
    /// max over time of the weighted balance defect.
    pub balance_residual: f64,
}

/// Measured refinement orders between consecutive levels.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub solution_orders: Vec<f64>,
    pub gauge_orders: Vec<f64>,
    pub balance_orders: Vec<f64>,
}

impl ConvergenceReport {
    /// Order measured between the two finest levels.
    pub fn final_solution_order(&self) -> f64 {
        *self.solution_orders.last().unwrap_or(&f64::NAN)
    }
}

/// One amplitude of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub amplitude: f64,
    pub e0: f64,
    pub h2_initial: f64,
    pub h2_sup: f64,
    /// sup_t H²(t) / H²(first diagnosed slice); 0 when the initial value is 0.
    pub h2_ratio: f64,
    /// Time integral of the β-weighted component norm.
    pub w_beta_int: f64,
    pub g1_int: f64,
    pub g2_int: f64,
    pub g_beta_int: f64,
    pub null_bilinear: f64,
    pub null_quartic: f64,
    pub status: RunStatus,
}

/// Whether a per-amplitude functional is nondecreasing across the sweep.
#[derive(Debug, Clone)]
pub struct MonotoneEntry {
    pub name: &'static str,
    pub nondecreasing: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub monotone: Vec<MonotoneEntry>,
}

/// The synthetic-corpus results with their observed extremes.
#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub rows: Vec<CorpusRow>,
    pub max_ratio1: f64,
    pub max_ratio2: f64,
    pub max_bilinear_ratio: f64,
    pub max_invariant_residual: f64,
}

/// What `run_experiment` produced, by experiment kind.
#[derive(Debug, Clone)]
pub enum ExperimentReport {
    Run(RunRecord),
    Convergence(ConvergenceReport),
    Sweep(SweepReport),
    Corpus(CorpusReport),
}

// ───────────────────────── single runs ─────────────────────────

struct SingleRun {
    rows: Vec<DiagnosticsRecord>,
    pre_projection_max: f64,
    initial_energy: f64,
    final_state: Option<FieldState>,
    failure: Option<Error>,
}

fn diagnostics_settings(pde: &PdeConfig) -> DiagnosticsSettings {
    DiagnosticsSettings {
        params: pde.estimates.params,
        gauge_enabled: pde.gauge.enabled,
        antisymmetrize: pde.gauge.antisymmetrize,
        h2_enabled: pde.estimates.h2_enabled,
        stride: pde.save_every,
    }
}

/// Run one evolution to the configured horizon, streaming diagnostics.
/// Instability is captured in `failure` (with the rows collected so far);
/// any other error propagates.
fn execute_single(pde: &PdeConfig) -> Result<SingleRun> {
    let grid = pde.grid.build()?;
    let target = pde.target.build()?;
    let state = init_state(&pde.data, grid, target, pde.time.t_end)?;
    let mut engine = DiagnosticsEngine::new(diagnostics_settings(pde))?;
    let opts = EvolveOptions {
        step: StepOptions { cfl_max: pde.time.cfl, ..StepOptions::default() },
        save_every: usize::MAX,
    };
    let outcome = evolve(state, pde.time.t_end, pde.dt(), opts, &mut [&mut engine]);
    let (final_state, failure) = match outcome {
        Ok(traj) => (Some(traj.last().clone()), None),
        Err(e @ Error::NumericalBlowup { .. }) => (None, Some(e)),
        Err(e) => return Err(e),
    };
    let pre_projection_max = engine.pre_projection_max();
    let initial_energy = engine.initial_energy().unwrap_or(0.0);
    let rows = engine.finish()?;
    Ok(SingleRun { rows, pre_projection_max, initial_energy, final_state, failure })
}

// ───────────────────────── convergence study ─────────────────────────

/// Run the configured experiment at `levels` successive grid halvings plus a
/// 4×-finer reference, and measure the refinement order of the solution
/// error and of the identity residuals between consecutive levels.
pub fn convergence_study(config: &RunConfig, levels: usize) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::Config("config key `experiment.levels` must be ≥ 3".into()));
    }
    let base = config.pde()?.clone();

    let mut pdes = Vec::with_capacity(levels);
    pdes.push(base.clone());
    for _ in 1..levels {
        pdes.push(pdes.last().unwrap().refined());
    }
    let reference_pde = pdes.last().unwrap().refined().refined();

    let mut finals = Vec::with_capacity(levels);
    let mut gauge = Vec::with_capacity(levels);
    let mut balance = Vec::with_capacity(levels);
    for pde in &pdes {
        let run = execute_single(pde)?;
        if let Some(e) = run.failure {
            return Err(e);
        }
        let g = run
            .rows
            .iter()
            .map(|r| r.gauge_res_213 + r.gauge_res_214)
            .fold(0.0_f64, f64::max);
        let b = run.rows.iter().map(|r| r.balance_residual).fold(0.0_f64, f64::max);
        gauge.push(g);
        balance.push(b);
        finals.push(run.final_state.expect("completed run has a final state"));
    }
    let reference = {
        let run = execute_single(&reference_pde)?;
        if let Some(e) = run.failure {
            return Err(e);
        }
        run.final_state.expect("completed run has a final state")
    };

    let mut rows = Vec::with_capacity(levels);
    for (pde, state) in pdes.iter().zip(&finals) {
        rows.push(ConvergenceLevel {
            dr: pde.grid.dr,
            solution_error: l2_position_error(state, &reference),
            gauge_residual: gauge.remove(0),
            balance_residual: balance.remove(0),
        });
    }
    let order_of = |f: fn(&ConvergenceLevel) -> f64| -> Vec<f64> {
        rows.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect()
    };
    Ok(ConvergenceReport {
        solution_orders: order_of(|l| l.solution_error),
        gauge_orders: order_of(|l| l.gauge_residual),
        balance_orders: order_of(|l| l.balance_residual),
        levels: rows,
    })
}

/// L²(r dr) distance between the position fields of two states at the same
/// time, evaluated on the coarser grid with the finer field interpolated.
fn l2_position_error(coarse: &FieldState, fine: &FieldState) -> f64 {
    let grid = &coarse.grid;
    let n = coarse.phi.comps();
    let mut acc = 0.0;
    for j in 0..grid.len() {
        let r = grid.node(j);
        let here = coarse.phi.node(j);
        let mut diff_sq = 0.0;
        for c in 0..n {
            let there = interp_cubic(&fine.grid, &fine.phi, r, c);
            diff_sq += (here[c] - there) * (here[c] - there);
        }
        acc += r * diff_sq;
    }
    (acc * grid.dr()).sqrt()
}

/// Four-point Lagrange interpolation of one component of a nodal field at
/// radius `r`, on the cell-centered grid that holds it.
fn interp_cubic(grid: &RadialGrid, field: &VectorField, r: f64, comp: usize) -> f64 {
    let h = grid.dr();
    let n = grid.len();
    let x = r / h - 0.5; // fractional node index
    let i0 = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = x - i0 as f64; // position within [i0 .. i0+3], ideally in [1, 2]
    let mut value = 0.0;
    for (k, idx) in (i0..i0 + 4).enumerate() {
        let mut w = 1.0;
        for m in 0..4 {
            if m != k {
                w *= (s - m as f64) / (k as f64 - m as f64);
            }
        }
        value += w * field.node(idx)[comp];
    }
    value
}

// ───────────────────────── amplitude sweep ─────────────────────────

/// One run per amplitude. Numerical instability is recorded in the row's
/// status without aborting the remaining amplitudes.
pub fn amplitude_sweep(config: &RunConfig, amplitudes: &[f64]) -> Result<SweepReport> {
    if amplitudes.is_empty() {
        return Err(Error::Config("config key `experiment.amplitudes` must not be empty".into()));
    }
    if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::Config(
            "config key `experiment.amplitudes` entries must be finite and ≥ 0".into(),
        ));
    }
    if amplitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config(
            "config key `experiment.amplitudes` must be sorted ascending".into(),
        ));
    }
    let base = config.pde()?.clone();
    let pdes: Vec<PdeConfig> = amplitudes.iter().map(|&a| base.with_amplitude(a)).collect();
    let runs = indexed_parallel(pdes.len(), worker_count()?, |i| execute_single(&pdes[i]));

    let mut rows = Vec::with_capacity(amplitudes.len());
    for (&a, run) in amplitudes.iter().zip(runs) {
        let run = run?;
        let status = match &run.failure {
            None => RunStatus::Completed,
            Some(e) => RunStatus::Failed { message: e.to_string() },
        };
        let h2_initial = run.rows.first().map_or(0.0, |r| r.h2);
        let h2_sup = run.rows.iter().map(|r| r.h2).fold(0.0_f64, f64::max);
        let h2_ratio = if h2_initial > 0.0 { h2_sup / h2_initial } else { 0.0 };
        let w_beta_int = trapezoid_over_rows(&run.rows, |r| r.w_beta);
        let last = run.rows.last();
        rows.push(SweepRow {
            amplitude: a,
            e0: run.initial_energy,
            h2_initial,
            h2_sup,
            h2_ratio,
            w_beta_int,
            g1_int: last.map_or(0.0, |r| r.g1_int),
            g2_int: last.map_or(0.0, |r| r.g2_int),
            g_beta_int: last.map_or(0.0, |r| r.g_beta_int),
            null_bilinear: last.map_or(0.0, |r| r.null_bilinear),
            null_quartic: last.map_or(0.0, |r| r.null_quartic),
            status,
        });
    }

    let monotone = monotone_table(&rows);
    Ok(SweepReport { rows, monotone })
}

fn trapezoid_over_rows(rows: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    let mut acc = 0.0;
    for pair in rows.windows(2) {
        acc += 0.5 * (f(&pair[0]) + f(&pair[1])) * (pair[1].t - pair[0].t);
    }
    acc
}

fn monotone_table(rows: &[SweepRow]) -> Vec<MonotoneEntry> {
    let functionals: [(&'static str, fn(&SweepRow) -> f64); 7] = [
        ("e0", |r| r.e0),
        ("w_beta_int", |r| r.w_beta_int),
        ("g1_int", |r| r.g1_int),
        ("g2_int", |r| r.g2_int),
        ("g_beta_int", |r| r.g_beta_int),
        ("null_bilinear", |r| r.null_bilinear),
        ("null_quartic", |r| r.null_quartic),
    ];
    let completed: Vec<&SweepRow> = rows.iter().filter(|r| r.status.is_completed()).collect();
    functionals
        .into_iter()
        .map(|(name, f)| {
            let nondecreasing = completed.windows(2).all(|w| {
                let (a, b) = (f(w[0]), f(w[1]));
                b >= a - 1e-12 * a.abs().max(1.0)
            });
            MonotoneEntry { name, nondecreasing }
        })
        .collect()
}

// ───────────────────────── worker pool ─────────────────────────

/// Run `job(0..count)` over at most `workers` scoped threads and collect the
/// results in index order, so output never depends on scheduling.
fn indexed_parallel<T, F>(count: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, count.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                *slots[i].lock().expect("result slot lock") = Some(job(i));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("result slot lock")
                .expect("every index was claimed by a worker")
        })
        .collect()
}

/// Worker-count cap from the environment, if set and valid.
fn thread_cap_from(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "environment variable WAVEMAP_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}

/// Resolved worker count: hardware parallelism, capped by WAVEMAP_THREADS.
pub fn worker_count() -> Result<usize> {
    let hw = std::thread::available_parallelism().map(usize::from).unwrap_or(1);
    let env = std::env::var("WAVEMAP_THREADS").ok();
    Ok(match thread_cap_from(env.as_deref())? {
        Some(cap) => cap.min(hw.max(1)).max(1),
        None => hw,
    })
}

/// Evaluate `trials` synthetic fields on a `cells`-per-side lattice with
/// seeds `seed, seed+1, …`, spread over at most `workers` threads. Results
/// are ordered by trial index regardless of scheduling.
pub fn divcurl_corpus(
    seed: u64,
    trials: usize,
    cells: usize,
    workers: usize,
) -> Result<CorpusReport> {
    if trials == 0 {
        return Err(Error::Config("config key `experiment.trials` must be ≥ 1".into()));
    }
    let results = indexed_parallel(trials, workers, |i| {
        corpus_row(seed + i as u64, cells, CORPUS_SURFACE_MODES)
    });
    let rows = results.into_iter().collect::<Result<Vec<CorpusRow>>>()?;
    let fold = |f: fn(&CorpusRow) -> f64| rows.iter().map(f).fold(0.0_f64, f64::max);
    Ok(CorpusReport {
        max_ratio1: fold(|r| r.flux.ratio1),
        max_ratio2: fold(|r| r.flux.ratio2),
        max_bilinear_ratio: fold(|r| r.bilinear.ratio),
        max_invariant_residual: fold(|r| r.invariant_residual),
        rows,
    })
}

// ───────────────────────── persistence ─────────────────────────

fn render(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn series_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn diagnostics_csv(rows: &[DiagnosticsRecord]) -> String {
    let rendered: Vec<Vec<String>> =
        rows.iter().map(|r| r.values().iter().map(|v| render(*v)).collect()).collect();
    series_csv(&DiagnosticsRecord::COLUMNS, &rendered)
}

fn convergence_csv(report: &ConvergenceReport) -> String {
    let header = [
        "level",
        "dr",
        "solution_error",
        "solution_order",
        "gauge_residual",
        "gauge_order",
        "balance_residual",
        "balance_order",
    ];
    let order_at = |orders: &[f64], level: usize| -> f64 {
        if level == 0 {
            f64::NAN
        } else {
            orders[level - 1]
        }
    };
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            vec![
                i.to_string(),
                render(l.dr),
                render(l.solution_error),
                render(order_at(&report.solution_orders, i)),
                render(l.gauge_residual),
                render(order_at(&report.gauge_orders, i)),
                render(l.balance_residual),
                render(order_at(&report.balance_orders, i)),
            ]
        })
        .collect();
    series_csv(&header, &rows)
}

fn sweep_csv(report: &SweepReport) -> String {
    let header = [
        "amplitude",
        "e0",
        "h2_initial",
        "h2_sup",
        "h2_ratio",
        "w_beta_int",
        "g1_int",
        "g2_int",
        "g_beta_int",
        "null_bilinear",
        "null_quartic",
        "completed",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                render(r.amplitude),
                render(r.e0),
                render(r.h2_initial),
                render(r.h2_sup),
                render(r.h2_ratio),
                render(r.w_beta_int),
                render(r.g1_int),
                render(r.g2_int),
                render(r.g_beta_int),
                render(r.null_bilinear),
                render(r.null_quartic),
                if r.status.is_completed() { "1" } else { "0" }.to_string(),
            ]
        })
        .collect();
    series_csv(&header, &rows)
}

fn corpus_csv(report: &CorpusReport) -> String {
    let header = ["seed", "ratio1", "ratio2", "bilinear_ratio", "invariant_residuals"];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                render(r.flux.ratio1),
                render(r.flux.ratio2),
                render(r.bilinear.ratio),
                render(r.invariant_residual),
            ]
        })
        .collect();
    series_csv(&header, &rows)
}

fn manifest_text(
    config: &RunConfig,
    status: &RunStatus,
    results: &[String],
    wall: Duration,
) -> String {
    let mut lines = vec![
        "wavemap experiment record".to_string(),
        format!("version = {VERSION}"),
        status.line(),
        "[config]".to_string(),
    ];
    lines.extend(config.canonical_lines());
    lines.push("[results]".to_string());
    lines.extend(results.iter().cloned());
    lines.push(format!("wall_clock_seconds = {:.3}", wall.as_secs_f64()));
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

fn persist(
    config: &RunConfig,
    status: &RunStatus,
    results: &[String],
    csv: &str,
    wall: Duration,
) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("series.csv"), csv)?;
    write_text(&dir.join("manifest"), &manifest_text(config, status, results, wall))
}

// ───────────────────────── the experiment driver ─────────────────────────

/// Execute the configured experiment, write `manifest` and `series.csv`
/// into the output directory, and return the in-memory report. A run that
/// hits numerical instability is persisted with its failure status and then
/// propagated as the error it raised.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    match config.experiment.kind {
        ExperimentKind::Run => {
            let pde = config.pde()?;
            let run = execute_single(pde)?;
            let status = match &run.failure {
                None => RunStatus::Completed,
                Some(e) => RunStatus::Failed { message: e.to_string() },
            };
            let max_drift =
                run.rows.iter().map(|r| r.energy_drift).fold(0.0_f64, f64::max);
            let results = vec![
                format!("rows = {}", run.rows.len()),
                format!("initial_energy = {}", render(run.initial_energy)),
                format!("max_energy_drift = {}", render(max_drift)),
                format!("pre_projection_max = {}", render(run.pre_projection_max)),
            ];
            let wall = started.elapsed();
            persist(config, &status, &results, &diagnostics_csv(&run.rows), wall)?;
            if let Some(e) = run.failure {
                return Err(e);
            }
            Ok(ExperimentReport::Run(RunRecord {
                config: config.clone(),
                rows: run.rows,
                status,
                wall_clock: wall,
                version: VERSION,
                pre_projection_max: run.pre_projection_max,
                initial_energy: run.initial_energy,
            }))
        }
        ExperimentKind::Convergence => {
            let report = convergence_study(config, config.experiment.levels)?;
            let results = vec![
                format!("levels = {}", report.levels.len()),
                format!("solution_order_final = {}", render(report.final_solution_order())),
                format!(
                    "gauge_order_min = {}",
                    render(report.gauge_orders.iter().copied().fold(f64::INFINITY, f64::min))
                ),
                format!(
                    "balance_order_min = {}",
                    render(report.balance_orders.iter().copied().fold(f64::INFINITY, f64::min))
                ),
            ];
            persist(
                config,
                &RunStatus::Completed,
                &results,
                &convergence_csv(&report),
                started.elapsed(),
            )?;
            Ok(ExperimentReport::Convergence(report))
        }
        ExperimentKind::Sweep => {
            let amplitudes = config.sweep_amplitudes()?;
            let report = amplitude_sweep(config, &amplitudes)?;
            let mut results = vec![format!("amplitudes = {}", report.rows.len())];
            for entry in &report.monotone {
                results.push(format!("monotone.{} = {}", entry.name, entry.nondecreasing));
            }
            for row in &report.rows {
                if let RunStatus::Failed { message } = &row.status {
                    results.push(format!("failed_amplitude {} : {message}", render(row.amplitude)));
                }
            }
            persist(
                config,
                &RunStatus::Completed,
                &results,
                &sweep_csv(&report),
                started.elapsed(),
            )?;
            Ok(ExperimentReport::Sweep(report))
        }
        ExperimentKind::DivCurl => {
            let report = divcurl_corpus(
                config.seed,
                config.experiment.trials,
                config.experiment.corpus_cells,
                worker_count()?,
            )?;
            let results = vec![
                format!("trials = {}", report.rows.len()),
                format!("max_ratio1 = {}", render(report.max_ratio1)),
                format!("max_ratio2 = {}", render(report.max_ratio2)),
                format!("max_bilinear_ratio = {}", render(report.max_bilinear_ratio)),
                format!("max_invariant_residual = {}", render(report.max_invariant_residual)),
            ];
            persist(
                config,
                &RunStatus::Completed,
                &results,
                &corpus_csv(&report),
                started.elapsed(),
            )?;
            Ok(ExperimentReport::Corpus(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn tiny_config(kind: &str, dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            r#"
            [experiment]
            kind = "{kind}"
            {extra}
            [output]
            dir = "{}"
            [grid]
            dr = 0.0625
            r_max = 6.0
            [time]
            t_end = 0.5
            cfl = 0.5
            [target]
            kind = "sphere"
            [data]
            family = "ring"
            amplitude = 0.2
            width = 0.35
            center = 1.2
            "#,
            dir.display()
        );
        RunConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn zero_amplitude_run_writes_all_zero_series_and_reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
            [experiment]
            kind = "run"
            [output]
            dir = "{}"
            [grid]
            dr = 0.125
            r_max = 4.0
            [time]
            t_end = 0.5
            cfl = 0.5
            [target]
            kind = "sphere"
            [data]
            family = "zero"
            "#,
            dir.path().display()
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        run_experiment(&config).unwrap();
        let csv_path = dir.path().join("series.csv");
        let first = std::fs::read(&csv_path).unwrap();
        let text = String::from_utf8(first.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), DiagnosticsRecord::COLUMNS.join(","));
        let mut data_rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), DiagnosticsRecord::COLUMNS.len());
            for cell in &cells[1..] {
                assert_eq!(cell.parse::<f64>().unwrap(), 0.0, "nonzero cell in {line}");
            }
            data_rows += 1;
        }
        assert!(data_rows >= 3);
        assert!(dir.path().join("manifest").exists());

        run_experiment(&config).unwrap();
        let second = std::fs::read(&csv_path).unwrap();
        assert_eq!(first, second, "rerun changed the series bytes");
    }

    #[test]
    fn manifest_records_version_status_and_config_echo() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config("run", dir.path(), "");
        run_experiment(&config).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest")).unwrap();
        assert!(manifest.starts_with("wavemap experiment record\n"));
        assert!(manifest.contains(&format!("version = {VERSION}")));
        assert!(manifest.contains("status = completed"));
        assert!(manifest.contains("experiment.kind = run"));
        assert!(manifest.contains("grid.dr = 6.25"));
        assert!(manifest.lines().last().unwrap().starts_with("wall_clock_seconds = "));
    }

    #[test]
    fn flat_convergence_study_measures_second_order_solutions() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
            [experiment]
            kind = "convergence"
            [output]
            dir = "{}"
            [grid]
            dr = 0.0625
            r_max = 5.0
            [time]
            t_end = 0.5
            cfl = 0.5
            [target]
            kind = "flat"
            ambient_dim = 2
            [data]
            family = "gaussian"
            amplitude = 0.5
            width = 0.3
            center = 0.8
            [gauge]
            enabled = false
            [estimates]
            h2_enabled = false
            "#,
            dir.path().display()
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        let report = match run_experiment(&config).unwrap() {
            ExperimentReport::Convergence(r) => r,
            other => panic!("expected convergence report, got {other:?}"),
        };
        assert_eq!(report.levels.len(), 3);
        assert!(
            report.levels.windows(2).all(|w| w[1].solution_error < w[0].solution_error),
            "errors not decreasing: {:?}",
            report.levels
        );
        let order = report.final_solution_order();
        assert!((order - 2.0).abs() < 0.35, "solution order {order}");
        let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert!(csv.starts_with("level,dr,solution_error,solution_order,"));
        assert!(csv.contains("NaN"), "level 0 has no order");
    }

    #[test]
    fn sweep_reports_monotone_functionals_and_survives_blowup() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
            [experiment]
            kind = "sweep"
            amplitudes = [0.1, 0.2, 2000000000.0]
            [output]
            dir = "{}"
            [grid]
            dr = 0.0625
            r_max = 6.0
            [time]
            t_end = 0.5
            cfl = 0.5
            [target]
            kind = "flat"
            ambient_dim = 2
            [data]
            family = "gaussian"
            amplitude = 0.1
            width = 0.3
            center = 0.8
            "#,
            dir.path().display()
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        let report = match run_experiment(&config).unwrap() {
            ExperimentReport::Sweep(r) => r,
            other => panic!("expected sweep report, got {other:?}"),
        };
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows[0].status.is_completed());
        assert!(report.rows[1].status.is_completed());
        assert!(
            !report.rows[2].status.is_completed(),
            "expected instability at amplitude 2e9"
        );
        assert!(report.rows[1].e0 > report.rows[0].e0);
        assert!(report.monotone.iter().all(|m| m.nondecreasing), "{:?}", report.monotone);
        let manifest = std::fs::read_to_string(dir.path().join("manifest")).unwrap();
        assert!(manifest.contains("failed_amplitude"));
        let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",0"), "failed row not flagged: {last}");
    }

    #[test]
    fn corpus_results_are_identical_across_worker_counts() {
        let solo = divcurl_corpus(11, 6, 16, 1).unwrap();
        let multi = divcurl_corpus(11, 6, 16, 4).unwrap();
        assert_eq!(corpus_csv(&solo), corpus_csv(&multi));
        assert_eq!(solo.rows.len(), 6);
        assert!(solo.max_bilinear_ratio > 0.0);
        assert_eq!(solo.max_invariant_residual, 0.0);
    }

    #[test]
    fn corpus_experiment_kind_writes_five_column_csv() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
            seed = 5
            [experiment]
            kind = "divcurl"
            trials = 4
            grid = 16
            [output]
            dir = "{}"
            "#,
            dir.path().display()
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        run_experiment(&config).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "seed,ratio1,ratio2,bilinear_ratio,invariant_residuals");
        let first = lines.next().unwrap();
        assert!(first.starts_with("5,"), "seed column: {first}");
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn thread_cap_parsing_accepts_integers_and_names_the_variable() {
        assert_eq!(thread_cap_from(None).unwrap(), None);
        assert_eq!(thread_cap_from(Some("3")).unwrap(), Some(3));
        for bad in ["0", "-1", "many", ""] {
            match thread_cap_from(Some(bad)) {
                Err(Error::Config(msg)) => assert!(msg.contains("WAVEMAP_THREADS")),
                other => panic!("expected config error for {bad:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn blowup_in_a_plain_run_is_persisted_then_propagated() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
            [experiment]
            kind = "run"
            [output]
            dir = "{}"
            [grid]
            dr = 0.0625
            r_max = 6.0
            [time]
            t_end = 0.5
            cfl = 0.5
            [target]
            kind = "flat"
            ambient_dim = 2
            [data]
            family = "gaussian"
            amplitude = 2000000000.0
            width = 0.3
            center = 0.8
            "#,
            dir.path().display()
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        match run_experiment(&config) {
            Err(Error::NumericalBlowup { .. }) => {}
            other => panic!("expected blowup, got {other:?}"),
        }
        let manifest = std::fs::read_to_string(dir.path().join("manifest")).unwrap();
        assert!(manifest.contains("status = failed:"));
    }
}
