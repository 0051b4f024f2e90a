//! Streaming per-run diagnostics: an [`Observer`] that watches an evolution,
//! holds a moving three-slice window for centered time differencing, and
//! assembles one fixed-order record per interior slice — energies, weighted
//! norms, identity residuals, connection cross-checks, and the accumulated
//! nonlinear space-time integrals.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::estimates::{
    balance_residual, energy, h2_energy, nonlinear_integrals, null_balance_source,
    weighted_norms, EstimateParams,
};
use crate::gauge::{
    a0_radius_bound, a0_from_f01, connection_a0, curvature_f01, frame_for, gauge_residuals,
    FrameWindow, GaugeFrame, MatrixField,
};
use crate::solver::{FieldState, Observer, StateWindow, StepInfo};

/// One row of the diagnostics time series. Field order is the CSV column
/// order; every field is a scalar so the series is a plain numeric table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    /// Time of the (middle) slice the row describes.
    pub t: f64,
    /// Conserved energy ½∫(|Φ_t|²+|Φ_r|²) r dr.
    pub energy: f64,
    /// |E(t) − E(0)| / E(0) (absolute difference when E(0) = 0).
    pub energy_drift: f64,
    /// max_r distance of Φ from the target manifold.
    pub constraint_residual: f64,
    /// max_r normal component of Φ_t.
    pub tangency_residual: f64,
    /// ∫ r^{−β} (|q₀|² + |q₁|²) dr.
    pub w_beta: f64,
    /// sup_r |Q₀(r)| of the cumulative weighted component integral.
    pub q0_profile_max: f64,
    /// Second-order energy E₁ of the derivative fields.
    pub h2: f64,
    /// L¹(dr) defect of the weighted balance identity.
    pub balance_residual: f64,
    /// L²(r dr) residual of the q₀ evolution identity.
    pub gauge_res_213: f64,
    /// L²(r dr) residual of the q₁ transport identity.
    pub gauge_res_214: f64,
    /// L∞ gap between the time-differenced connection and the curvature
    /// integral route.
    pub f01_consistency: f64,
    /// sup_r r·‖A₀(r)‖_F.
    pub a0_rmax_bound: f64,
    /// Accumulated ∫∫ of the first curvature-coupled source majorant.
    pub g1_int: f64,
    /// Accumulated ∫∫ of the second curvature-coupled source majorant.
    pub g2_int: f64,
    /// Accumulated ∫∫ |G_β| dr dt of the null-balance source.
    pub g_beta_int: f64,
    /// Accumulated ∫∫ r^{2−β}(|Ψ_u|²|Φ_v|² + |Φ_u|²|Ψ_v|²) dr dt.
    pub null_bilinear: f64,
    /// Accumulated ∫∫ r^{3β} |Φ_u|²|Φ_v|² dr dt.
    pub null_quartic: f64,
}

impl DiagnosticsRecord {
    /// CSV column names, in the exact serialization order.
    pub const COLUMNS: [&'static str; 18] = [
        "t",
        "energy",
        "energy_drift",
        "constraint_residual",
        "tangency_residual",
        "w_beta",
        "q0_profile_max",
        "h2",
        "balance_residual",
        "gauge_res_213",
        "gauge_res_214",
        "f01_consistency",
        "a0_rmax_bound",
        "g1_int",
        "g2_int",
        "g_beta_int",
        "null_bilinear",
        "null_quartic",
    ];

    /// Row values in column order.
    pub fn values(&self) -> [f64; 18] {
        [
            self.t,
            self.energy,
            self.energy_drift,
            self.constraint_residual,
            self.tangency_residual,
            self.w_beta,
            self.q0_profile_max,
            self.h2,
            self.balance_residual,
            self.gauge_res_213,
            self.gauge_res_214,
            self.f01_consistency,
            self.a0_rmax_bound,
            self.g1_int,
            self.g2_int,
            self.g_beta_int,
            self.null_bilinear,
            self.null_quartic,
        ]
    }

    /// First violated row invariant, if any: every column nonnegative except
    /// t, time strictly increasing, accumulators nondecreasing.
    pub fn invariant_defect(&self, prev: Option<&Self>) -> Option<String> {
        let vals = self.values();
        for (name, v) in Self::COLUMNS.iter().zip(vals).skip(1) {
            if !(v >= 0.0) {
                return Some(format!("column {name} = {v} is negative or NaN"));
            }
        }
        if let Some(p) = prev {
            if !(self.t > p.t) {
                return Some(format!("time not increasing: {} after {}", self.t, p.t));
            }
            for (name, now, before) in [
                ("g1_int", self.g1_int, p.g1_int),
                ("g2_int", self.g2_int, p.g2_int),
                ("g_beta_int", self.g_beta_int, p.g_beta_int),
                ("null_bilinear", self.null_bilinear, p.null_bilinear),
                ("null_quartic", self.null_quartic, p.null_quartic),
            ] {
                if now < before {
                    return Some(format!("accumulator {name} decreased: {before} -> {now}"));
                }
            }
        }
        None
    }
}

/// What the engine computes and how often it samples the evolution.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsSettings {
    /// Exponents of the weighted estimates.
    pub params: EstimateParams,
    /// Build orthonormal frames and evaluate all frame-based columns.
    pub gauge_enabled: bool,
    /// Replace the raw time connection by its antisymmetric part.
    pub antisymmetrize: bool,
    /// Evaluate the second-order energy and its source accumulators.
    pub h2_enabled: bool,
    /// Sample every `stride`-th step (step indices divisible by `stride`).
    pub stride: usize,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        DiagnosticsSettings {
            params: EstimateParams::default(),
            gauge_enabled: true,
            antisymmetrize: true,
            h2_enabled: true,
            stride: 1,
        }
    }
}

/// One sampled slice held in the moving window: the state, its frame, and
/// the scalars that need no time differencing.
struct SliceEntry {
    state: FieldState,
    frame: Option<GaugeFrame>,
    energy: f64,
    constraint: f64,
    tangency: f64,
    w_beta: f64,
    q0_max: f64,
}

/// Nonnegative spatial integrands sampled at one row time, pending the
/// trapezoid accumulation into space-time integrals.
#[derive(Debug, Clone, Copy)]
struct RowIntegrands {
    t: f64,
    g1: f64,
    g2: f64,
    g_beta: f64,
    bilinear: f64,
    quartic: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulators {
    g1: f64,
    g2: f64,
    g_beta: f64,
    bilinear: f64,
    quartic: f64,
}

/// Observer that streams diagnostics rows out of an evolution.
///
/// The engine samples every `stride`-th step, keeps the last three sampled
/// slices, and emits one record per interior sampled slice (so a run of N
/// sampled slices yields N − 2 rows). Any failure inside a diagnostic
/// evaluation is latched and surfaced by [`DiagnosticsEngine::finish`].
pub struct DiagnosticsEngine {
    settings: DiagnosticsSettings,
    window: VecDeque<SliceEntry>,
    rows: Vec<DiagnosticsRecord>,
    acc: Accumulators,
    prev_integrands: Option<RowIntegrands>,
    reference_energy: Option<f64>,
    pre_projection_max: f64,
    failure: Option<Error>,
}

impl DiagnosticsEngine {
    pub fn new(settings: DiagnosticsSettings) -> Result<Self> {
        settings.params.validate()?;
        if settings.stride == 0 {
            return Err(Error::BadParams { reason: "diagnostics stride must be ≥ 1".into() });
        }
        Ok(DiagnosticsEngine {
            settings,
            window: VecDeque::with_capacity(3),
            rows: Vec::new(),
            acc: Accumulators::default(),
            prev_integrands: None,
            reference_energy: None,
            pre_projection_max: 0.0,
            failure: None,
        })
    }

    /// Rows finalized so far.
    pub fn rows(&self) -> &[DiagnosticsRecord] {
        &self.rows
    }

    /// Largest pre-projection constraint residual seen over every step.
    pub fn pre_projection_max(&self) -> f64 {
        self.pre_projection_max
    }

    /// Energy of the first sampled slice, the drift reference.
    pub fn initial_energy(&self) -> Option<f64> {
        self.reference_energy
    }

    /// Consume the engine; errors if any diagnostic evaluation failed
    /// mid-run, otherwise yields the completed rows.
    pub fn finish(self) -> Result<Vec<DiagnosticsRecord>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.rows),
        }
    }

    fn push_slice(&mut self, state: &FieldState) -> Result<()> {
        let seed = self.window.back().and_then(|e| e.frame.as_ref());
        let frame = if self.settings.gauge_enabled {
            Some(frame_for(state, seed)?)
        } else {
            None
        };
        let e = energy(state)?;
        let (w_beta, q0_max) = match &frame {
            Some(f) => {
                let wn = weighted_norms(f, &self.settings.params)?;
                (wn.w_beta, wn.q0_profile_max)
            }
            None => (0.0, 0.0),
        };
        let entry = SliceEntry {
            state: state.clone(),
            frame,
            energy: e,
            constraint: state.constraint_residual_max(),
            tangency: state.tangency_residual_max(),
            w_beta,
            q0_max,
        };
        if self.reference_energy.is_none() {
            self.reference_energy = Some(e);
        }
        self.window.push_back(entry);
        if self.window.len() == 3 {
            self.finalize_middle()?;
            self.window.pop_front();
        }
        Ok(())
    }

    fn finalize_middle(&mut self) -> Result<()> {
        let (p, m, n) = (&self.window[0], &self.window[1], &self.window[2]);
        let states = StateWindow::new(&p.state, &m.state, &n.state)?;
        let params = &self.settings.params;
        let grid = &m.state.grid;

        let e0 = self.reference_energy.unwrap_or(0.0);
        let drift = if e0 > 0.0 { (m.energy - e0).abs() / e0 } else { m.energy.abs() };

        let mut record = DiagnosticsRecord {
            t: m.state.t,
            energy: m.energy,
            energy_drift: drift,
            constraint_residual: m.constraint,
            tangency_residual: m.tangency,
            w_beta: m.w_beta,
            q0_profile_max: m.q0_max,
            h2: 0.0,
            balance_residual: 0.0,
            gauge_res_213: 0.0,
            gauge_res_214: 0.0,
            f01_consistency: 0.0,
            a0_rmax_bound: 0.0,
            g1_int: self.acc.g1,
            g2_int: self.acc.g2,
            g_beta_int: self.acc.g_beta,
            null_bilinear: self.acc.bilinear,
            null_quartic: self.acc.quartic,
        };

        let mut integrands = RowIntegrands {
            t: m.state.t,
            g1: 0.0,
            g2: 0.0,
            g_beta: 0.0,
            bilinear: 0.0,
            quartic: 0.0,
        };

        if self.settings.h2_enabled {
            record.h2 = h2_energy(&states)?.e1;
            let si = nonlinear_integrals(&states, params)?;
            integrands.g1 = si.g1;
            integrands.g2 = si.g2;
            integrands.bilinear = si.bilinear;
            integrands.quartic = si.quartic;
        }

        if let (Some(fp), Some(fm), Some(fn_)) = (&p.frame, &m.frame, &n.frame) {
            let frames = FrameWindow::new(fp, fm, fn_)?;
            let gr = gauge_residuals(&states, &frames)?;
            record.gauge_res_213 = gr.q0_evolution;
            record.gauge_res_214 = gr.q1_transport;
            record.balance_residual = balance_residual(&states, &frames, params)?;

            let conn = connection_a0(fp, fn_, self.settings.antisymmetrize)?;
            let f01 = curvature_f01(&m.state, fm)?;
            let a0_curv = a0_from_f01(grid, &f01)?;
            record.f01_consistency = max_entry_gap(&conn.a0, &a0_curv);
            record.a0_rmax_bound = a0_radius_bound(grid, &conn.a0);

            let source = null_balance_source(&states, &frames, params.beta, params.sigma)?;
            let abs_source: Vec<f64> = source.iter().map(|v| v.abs()).collect();
            integrands.g_beta = grid.weighted_integral(&abs_source, 0.0)?;
        }

        if let Some(prev) = self.prev_integrands {
            let dt = integrands.t - prev.t;
            self.acc.g1 += 0.5 * (prev.g1 + integrands.g1) * dt;
            self.acc.g2 += 0.5 * (prev.g2 + integrands.g2) * dt;
            self.acc.g_beta += 0.5 * (prev.g_beta + integrands.g_beta) * dt;
            self.acc.bilinear += 0.5 * (prev.bilinear + integrands.bilinear) * dt;
            self.acc.quartic += 0.5 * (prev.quartic + integrands.quartic) * dt;
            record.g1_int = self.acc.g1;
            record.g2_int = self.acc.g2;
            record.g_beta_int = self.acc.g_beta;
            record.null_bilinear = self.acc.bilinear;
            record.null_quartic = self.acc.quartic;
        }
        self.prev_integrands = Some(integrands);

        self.rows.push(record);
        Ok(())
    }
}

/// Largest entry-wise absolute gap between two matrix fields of equal shape.
fn max_entry_gap(a: &MatrixField, b: &MatrixField) -> f64 {
    let k = a.rank();
    let mut gap = 0.0_f64;
    for j in 0..a.nodes() {
        for row in 0..k {
            for col in 0..k {
                gap = gap.max((a.entry(j, row, col) - b.entry(j, row, col)).abs());
            }
        }
    }
    gap
}

impl Observer for DiagnosticsEngine {
    fn observe(&mut self, info: &StepInfo, state: &FieldState) {
        self.pre_projection_max = self.pre_projection_max.max(info.pre_projection_residual);
        if self.failure.is_some() || info.step % self.settings.stride != 0 {
            return;
        }
        if let Err(e) = self.push_slice(state) {
            self.failure = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::SliceIntegrals;
    use crate::grid::RadialGrid;
    use crate::manifold::{TargetKind, TargetManifold};
    use crate::solver::{evolve, init_state, EvolveOptions, InitialData};
    use std::sync::Arc;

    fn run_with_engine(
        kind: TargetKind,
        data: InitialData,
        dr: f64,
        r_max: f64,
        t_end: f64,
        settings: DiagnosticsSettings,
    ) -> DiagnosticsEngine {
        let grid = Arc::new(RadialGrid::new(dr, r_max).unwrap());
        let target = Arc::new(match kind {
            TargetKind::UnitSphere => TargetManifold::unit_sphere(3).unwrap(),
            TargetKind::CliffordTorus => TargetManifold::clifford_torus(),
            TargetKind::Flat => TargetManifold::flat(2).unwrap(),
        });
        let state = init_state(&data, grid, target, t_end).unwrap();
        let mut engine = DiagnosticsEngine::new(settings).unwrap();
        let opts = EvolveOptions { save_every: 1, ..Default::default() };
        evolve(state, t_end, 0.5 * dr, opts, &mut [&mut engine]).unwrap();
        engine
    }

    #[test]
    fn zero_data_rows_are_identically_zero_except_time() {
        let engine = run_with_engine(
            TargetKind::UnitSphere,
            InitialData::zero(),
            0.125,
            4.0,
            0.5,
            DiagnosticsSettings::default(),
        );
        let rows = engine.finish().unwrap();
        assert!(rows.len() >= 3, "expected several rows, got {}", rows.len());
        let mut last_t = 0.0;
        for row in &rows {
            assert!(row.t > last_t);
            last_t = row.t;
            for (name, v) in DiagnosticsRecord::COLUMNS.iter().zip(row.values()).skip(1) {
                assert_eq!(v, 0.0, "column {name} nonzero on the zero run");
            }
        }
    }

    #[test]
    fn flat_run_satisfies_row_invariants_and_has_no_curvature_sources() {
        let engine = run_with_engine(
            TargetKind::Flat,
            InitialData::gaussian(0.3, 0.3, 1.0),
            0.0625,
            6.0,
            0.5,
            DiagnosticsSettings::default(),
        );
        assert!(engine.initial_energy().unwrap() > 0.0);
        let rows = engine.finish().unwrap();
        let mut prev: Option<&DiagnosticsRecord> = None;
        for row in &rows {
            assert_eq!(row.invariant_defect(prev), None);
            assert_eq!(row.g1_int, 0.0);
            assert_eq!(row.g2_int, 0.0);
            prev = Some(row);
        }
        let last = rows.last().unwrap();
        assert!(last.energy_drift < 1e-3, "drift {}", last.energy_drift);
        assert!(last.h2 > 0.0);
        assert!(last.w_beta > 0.0);
        assert!(last.null_bilinear > 0.0);
        assert!(last.null_quartic > 0.0);
    }

    #[test]
    fn sphere_ring_run_produces_finite_gauge_columns() {
        let engine = run_with_engine(
            TargetKind::UnitSphere,
            InitialData::ring(0.2, 0.4, 2.0),
            0.0625,
            8.0,
            0.5,
            DiagnosticsSettings::default(),
        );
        let rows = engine.finish().unwrap();
        let mut prev: Option<&DiagnosticsRecord> = None;
        for row in &rows {
            assert_eq!(row.invariant_defect(prev), None);
            prev = Some(row);
        }
        let last = rows.last().unwrap();
        assert!(last.a0_rmax_bound > 0.0);
        assert!(last.g1_int > 0.0);
        assert!(last.g_beta_int > 0.0);
        assert!(last.f01_consistency > 0.0 && last.f01_consistency < 1.0);
        assert!(last.gauge_res_213 < 1.0 && last.gauge_res_214 < 1.0);
    }

    #[test]
    fn stride_controls_row_cadence() {
        let dr = 0.125;
        let settings = DiagnosticsSettings { stride: 2, ..Default::default() };
        let engine = run_with_engine(
            TargetKind::Flat,
            InitialData::gaussian(0.2, 0.3, 1.0),
            dr,
            6.0,
            0.5,
            settings,
        );
        let rows = engine.finish().unwrap();
        let dt = 0.5 * dr;
        let spacing = rows[1].t - rows[0].t;
        assert!((spacing - 2.0 * dt).abs() < 1e-12, "row spacing {spacing}");
        // 8 steps of dt = 0.0625 → sampled steps {0,2,4,6,8} → 3 interior rows.
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn disabled_gauge_and_h2_zero_their_columns() {
        let settings = DiagnosticsSettings {
            gauge_enabled: false,
            h2_enabled: false,
            ..Default::default()
        };
        let engine = run_with_engine(
            TargetKind::UnitSphere,
            InitialData::ring(0.2, 0.4, 2.0),
            0.0625,
            8.0,
            0.25,
            settings,
        );
        let rows = engine.finish().unwrap();
        for row in &rows {
            assert!(row.energy > 0.0);
            for v in [
                row.w_beta,
                row.q0_profile_max,
                row.h2,
                row.balance_residual,
                row.gauge_res_213,
                row.gauge_res_214,
                row.f01_consistency,
                row.a0_rmax_bound,
                row.g1_int,
                row.g2_int,
                row.g_beta_int,
                row.null_bilinear,
                row.null_quartic,
            ] {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn accumulators_match_posthoc_trajectory_recomputation() {
        let dr = 0.0625;
        let dt = 0.5 * dr;
        let t_end = 16.0 * dt;
        let grid = Arc::new(RadialGrid::new(dr, 8.0).unwrap());
        let target = Arc::new(TargetManifold::unit_sphere(3).unwrap());
        let data = InitialData::ring(0.2, 0.4, 2.0);

        let state = init_state(&data, grid.clone(), target.clone(), t_end).unwrap();
        let mut engine = DiagnosticsEngine::new(DiagnosticsSettings::default()).unwrap();
        let opts = EvolveOptions { save_every: 1, ..Default::default() };
        let traj = evolve(state, t_end, dt, opts, &mut [&mut engine]).unwrap();
        let rows = engine.finish().unwrap();

        // Recompute the bilinear accumulator from the stored trajectory with
        // an explicit window loop and trapezoid weights.
        let params = EstimateParams::default();
        let mut slice_vals: Vec<(f64, SliceIntegrals)> = Vec::new();
        for w in traj.snapshots.windows(3) {
            let sw = StateWindow::new(&w[0], &w[1], &w[2]).unwrap();
            slice_vals.push((w[1].t, nonlinear_integrals(&sw, &params).unwrap()));
        }
        let mut acc = 0.0;
        for pair in slice_vals.windows(2) {
            let ((t0, a), (t1, b)) = (pair[0], pair[1]);
            acc += 0.5 * (a.bilinear + b.bilinear) * (t1 - t0);
        }
        let got = rows.last().unwrap().null_bilinear;
        assert!(
            (got - acc).abs() <= 1e-12 * (1.0 + acc.abs()),
            "engine {got} vs post-hoc {acc}"
        );
        assert_eq!(rows.len(), traj.snapshots.len() - 2);
    }
}
