//! Time evolution of radially symmetric wave maps.
//!
//! The field Φ(t, r) takes values on an embedded target manifold and obeys
//!
//! ```text
//! Φ_tt − Φ_rr − Φ_r / r = 4 B(Φ)(Φ_u, Φ_v),
//! ```
//!
//! with B the second fundamental form and Φ_u, Φ_v the null-coordinate
//! derivatives. The integrator is a two-step leapfrog on the ambient
//! representation followed by pointwise closest-point projection of the
//! position and tangent projection of the reconstructed velocity. The first
//! step is bootstrapped by a Taylor expansion using Φ_tt from the equation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{norm, VectorField};
use crate::grid::RadialGrid;
use crate::manifold::TargetManifold;

/// Gaussian tail cut: beyond `center + SUPPORT_SIGMAS * width` the profile
/// is below 2.6e-18 of the amplitude and is treated as zero for causality
/// accounting.
const SUPPORT_SIGMAS: f64 = 9.0;

/// Initial data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFamily {
    /// Φ₀ ≡ base point, Φ₁ a Gaussian bump along the canonical direction.
    GaussianBump,
    /// Φ₀ a geodesic displacement by a Gaussian bump profile, Φ₁ the same
    /// profile along the transverse tangent direction — data that genuinely
    /// explores two target dimensions.
    RingBump,
    /// Constant map at the base point with zero velocity.
    Zero,
}

/// Parameters of the initial data profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub family: DataFamily,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl InitialData {
    pub fn zero() -> Self {
        InitialData { family: DataFamily::Zero, amplitude: 0.0, width: 1.0, center: 0.0 }
    }

    pub fn gaussian(amplitude: f64, width: f64, center: f64) -> Self {
        InitialData { family: DataFamily::GaussianBump, amplitude, width, center }
    }

    pub fn ring(amplitude: f64, width: f64, center: f64) -> Self {
        InitialData { family: DataFamily::RingBump, amplitude, width, center }
    }

    /// Bump profile a · exp(−(r−c)² / (2w²)).
    pub fn profile(&self, r: f64) -> f64 {
        match self.family {
            DataFamily::Zero => 0.0,
            _ => {
                let z = (r - self.center) / self.width;
                self.amplitude * (-0.5 * z * z).exp()
            }
        }
    }

    /// Radius beyond which the profile is numerically zero.
    pub fn support_radius(&self) -> f64 {
        match self.family {
            DataFamily::Zero => 0.0,
            _ => self.center + SUPPORT_SIGMAS * self.width,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.family {
            DataFamily::Zero => true,
            _ => {
                self.amplitude.is_finite()
                    && self.width > 0.0
                    && self.width.is_finite()
                    && self.center >= 0.0
                    && self.center.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParams { reason: format!("invalid initial data {self:?}") })
        }
    }
}

/// Full field state at a fixed time: position Φ and velocity Φ_t per node.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub phi: VectorField,
    pub phi_t: VectorField,
    pub grid: Arc<RadialGrid>,
    pub target: Arc<TargetManifold>,
}

impl FieldState {
    /// Largest distance of any node from the target manifold.
    pub fn constraint_residual_max(&self) -> f64 {
        (0..self.grid.len())
            .map(|j| self.target.constraint_residual(self.phi.node(j)))
            .fold(0.0_f64, f64::max)
    }

    /// Largest normal component of the velocity at any node.
    pub fn tangency_residual_max(&self) -> f64 {
        (0..self.grid.len())
            .map(|j| self.target.tangency_residual(self.phi.node(j), self.phi_t.node(j)))
            .fold(0.0_f64, f64::max)
    }

    /// Centered radial derivative of Φ (even reflection through the axis).
    pub fn phi_r(&self) -> VectorField {
        self.grid
            .radial_derivative_even(&self.phi)
            .expect("state field length always matches its grid")
    }

    /// Largest distance |Φ(r) − p| over all nodes.
    pub fn sup_distance_to(&self, p: &[f64]) -> f64 {
        (0..self.grid.len())
            .map(|j| {
                self.phi
                    .node(j)
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0_f64, f64::max)
    }
}

/// Construct the initial state for a data family on a given grid and target.
///
/// `t_planned` is the evolution horizon the caller intends to run; the data
/// support must satisfy `support_radius ≤ r_max − t_planned − 1` so that no
/// signal reaches the outer boundary (unit causal margin).
pub fn init_state(
    data: &InitialData,
    grid: Arc<RadialGrid>,
    target: Arc<TargetManifold>,
    t_planned: f64,
) -> Result<FieldState> {
    data.validate()?;
    let limit = grid.r_max() - t_planned - 1.0;
    let support = data.support_radius();
    if support > limit {
        return Err(Error::SupportViolation { support, limit });
    }
    let n = target.ambient_dim();
    let nj = grid.len();
    let base = target.base_point();
    let dir = target.canonical_direction();
    let mut phi = VectorField::zeros(nj, n);
    let mut phi_t = VectorField::zeros(nj, n);
    match data.family {
        DataFamily::Zero => {
            for j in 0..nj {
                phi.node_mut(j).copy_from_slice(&base);
            }
        }
        DataFamily::GaussianBump => {
            // Velocity bump: constant position, tangent velocity along the
            // canonical direction at the base point.
            for j in 0..nj {
                phi.node_mut(j).copy_from_slice(&base);
                let s = data.profile(grid.node(j));
                for (out, d) in phi_t.node_mut(j).iter_mut().zip(&dir) {
                    *out = s * d;
                }
            }
        }
        DataFamily::RingBump => {
            // Displacement bump: position runs along the geodesic from the
            // base point, parameterized by the profile; the velocity carries
            // the same profile along the transverse direction, which is
            // tangent at every point of the geodesic.
            let transverse = target.transverse_direction();
            for j in 0..nj {
                let s = data.profile(grid.node(j));
                let (gamma, _) = target.geodesic_from_base(s);
                phi.node_mut(j).copy_from_slice(&gamma);
                for (out, d) in phi_t.node_mut(j).iter_mut().zip(&transverse) {
                    *out = s * d;
                }
            }
        }
    }
    Ok(FieldState { t: 0.0, phi, phi_t, grid, target })
}

/// Three consecutive, uniformly spaced snapshots from one run — the minimal
/// stencil for centered time differencing of diagnostic quantities.
#[derive(Debug, Clone, Copy)]
pub struct StateWindow<'a> {
    pub prev: &'a FieldState,
    pub mid: &'a FieldState,
    pub next: &'a FieldState,
}

impl<'a> StateWindow<'a> {
    pub fn new(prev: &'a FieldState, mid: &'a FieldState, next: &'a FieldState) -> Result<Self> {
        let d1 = mid.t - prev.t;
        let d2 = next.t - mid.t;
        if !(d1 > 0.0) || !(d2 > 0.0) || (d1 - d2).abs() > 1e-9 * d1.max(d2) {
            return Err(Error::BadParams {
                reason: format!("window times not uniform: {}, {}, {}", prev.t, mid.t, next.t),
            });
        }
        for s in [prev, next] {
            if s.grid.len() != mid.grid.len()
                || (s.grid.dr() - mid.grid.dr()).abs() > 1e-15
                || s.target.kind() != mid.target.kind()
                || s.target.ambient_dim() != mid.target.ambient_dim()
            {
                return Err(Error::BadParams {
                    reason: "window slices disagree on grid or target".into(),
                });
            }
        }
        Ok(StateWindow { prev, mid, next })
    }

    /// Uniform slice spacing.
    pub fn dt(&self) -> f64 {
        self.mid.t - self.prev.t
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.mid.grid
    }

    pub fn target(&self) -> &Arc<TargetManifold> {
        &self.mid.target
    }
}

/// Stability and safety options for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Maximum admissible dt / dr ratio.
    pub cfl_max: f64,
    /// Abort threshold on max |Φ_t|.
    pub blowup_cap: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { cfl_max: 0.5, blowup_cap: 1e6 }
    }
}

/// Two-step leapfrog integrator with projection.
///
/// Keeps the previous position slice internally; the public state always
/// holds (Φ, Φ_t) at the current time.
pub struct Stepper {
    state: FieldState,
    prev_phi: Option<VectorField>,
    dt: f64,
    opts: StepOptions,
    // scratch buffers reused across steps
    lap: VectorField,
    phi_r: VectorField,
    accel: VectorField,
    accel_b: VectorField,
    last_pre_projection_residual: f64,
}

impl Stepper {
    pub fn new(state: FieldState, dt: f64, opts: StepOptions) -> Result<Self> {
        let max_dt = opts.cfl_max * state.grid.dr();
        if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, cfl: opts.cfl_max, max_dt });
        }
        let nj = state.grid.len();
        let n = state.target.ambient_dim();
        Ok(Stepper {
            state,
            prev_phi: None,
            dt,
            opts,
            lap: VectorField::zeros(nj, n),
            phi_r: VectorField::zeros(nj, n),
            accel: VectorField::zeros(nj, n),
            accel_b: VectorField::zeros(nj, n),
            last_pre_projection_residual: 0.0,
        })
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Maximum distance of the raw (pre-projection) update from the target
    /// manifold in the most recent step.
    pub fn last_pre_projection_residual(&self) -> f64 {
        self.last_pre_projection_residual
    }

    /// Φ_tt = Φ_rr + Φ_r/r + 4 B(Φ)(Φ_u, Φ_v), written into `out`.
    fn accel_into(
        grid: &RadialGrid,
        target: &TargetManifold,
        phi: &VectorField,
        phi_t: &VectorField,
        lap: &mut VectorField,
        phi_r: &mut VectorField,
        out: &mut VectorField,
    ) {
        grid.radial_laplacian_into(phi, lap);
        grid.radial_derivative_even_into(phi, phi_r);
        let n = target.ambient_dim();
        let mut pu = vec![0.0; n];
        let mut pv = vec![0.0; n];
        let mut b = vec![0.0; n];
        for j in 0..grid.len() {
            let v = phi_t.node(j);
            let dr = phi_r.node(j);
            for c in 0..n {
                pu[c] = 0.5 * (v[c] - dr[c]);
                pv[c] = 0.5 * (v[c] + dr[c]);
            }
            target.b_form(phi.node(j), &pu, &pv, &mut b);
            let l = lap.node(j);
            let o = out.node_mut(j);
            for c in 0..n {
                o[c] = l[c] + 4.0 * b[c];
            }
        }
    }

    /// Advance one step of size dt.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let grid = self.state.grid.clone();
        let target = self.state.target.clone();
        let nj = grid.len();
        let n = target.ambient_dim();

        Self::accel_into(
            &grid,
            &target,
            &self.state.phi,
            &self.state.phi_t,
            &mut self.lap,
            &mut self.phi_r,
            &mut self.accel,
        );

        let mut new_phi = VectorField::zeros(nj, n);
        match &self.prev_phi {
            None => {
                // Taylor bootstrap: Φ¹ = Φ⁰ + dt Φ_t⁰ + dt²/2 Φ_tt⁰.
                for j in 0..nj {
                    let p = self.state.phi.node(j);
                    let v = self.state.phi_t.node(j);
                    let a = self.accel.node(j);
                    let o = new_phi.node_mut(j);
                    for c in 0..n {
                        o[c] = p[c] + dt * v[c] + 0.5 * dt * dt * a[c];
                    }
                }
            }
            Some(prev) => {
                // Leapfrog: Φ^{n+1} = 2Φⁿ − Φ^{n−1} + dt² Φ_ttⁿ.
                for j in 0..nj {
                    let p = self.state.phi.node(j);
                    let q = prev.node(j);
                    let a = self.accel.node(j);
                    let o = new_phi.node_mut(j);
                    for c in 0..n {
                        o[c] = 2.0 * p[c] - q[c] + dt * dt * a[c];
                    }
                }
            }
        }

        // Project the raw update back onto the target, recording how far it
        // drifted (the per-step constraint violation of the raw scheme).
        let mut residual = 0.0_f64;
        for j in 0..nj {
            let node = new_phi.node_mut(j);
            residual = residual.max(target.constraint_residual(node));
            target.project_in_place(node).map_err(|_| Error::NumericalBlowup {
                t: self.state.t + dt,
                max_vel: f64::INFINITY,
                cap: self.opts.blowup_cap,
            })?;
        }
        self.last_pre_projection_residual = residual;

        // Velocity at the new time.
        let mut new_v = VectorField::zeros(nj, n);
        match &self.prev_phi {
            None => {
                // Heun correction: v¹ = v⁰ + dt/2 (a⁰ + a¹), with a¹
                // evaluated at the new position and a predicted velocity.
                let mut pred_v = VectorField::zeros(nj, n);
                for j in 0..nj {
                    let v = self.state.phi_t.node(j);
                    let a = self.accel.node(j);
                    let o = pred_v.node_mut(j);
                    for c in 0..n {
                        o[c] = v[c] + dt * a[c];
                    }
                }
                Self::accel_into(
                    &grid,
                    &target,
                    &new_phi,
                    &pred_v,
                    &mut self.lap,
                    &mut self.phi_r,
                    &mut self.accel_b,
                );
                for j in 0..nj {
                    let v = self.state.phi_t.node(j);
                    let a0 = self.accel.node(j);
                    let a1 = self.accel_b.node(j);
                    let o = new_v.node_mut(j);
                    for c in 0..n {
                        o[c] = v[c] + 0.5 * dt * (a0[c] + a1[c]);
                    }
                }
            }
            Some(prev) => {
                // One-sided second-order reconstruction at t^{n+1}.
                let inv_2dt = 0.5 / dt;
                for j in 0..nj {
                    let p1 = new_phi.node(j);
                    let p0 = self.state.phi.node(j);
                    let pm = prev.node(j);
                    let o = new_v.node_mut(j);
                    for c in 0..n {
                        o[c] = (3.0 * p1[c] - 4.0 * p0[c] + pm[c]) * inv_2dt;
                    }
                }
            }
        }
        let mut max_vel = 0.0_f64;
        for j in 0..nj {
            target.tangent_project_in_place(new_phi.node(j), new_v.node_mut(j));
            max_vel = max_vel.max(norm(new_v.node(j)));
        }
        let new_t = self.state.t + dt;
        if !max_vel.is_finite() || max_vel > self.opts.blowup_cap {
            return Err(Error::NumericalBlowup { t: new_t, max_vel, cap: self.opts.blowup_cap });
        }

        self.prev_phi = Some(std::mem::replace(&mut self.state.phi, new_phi));
        self.state.phi_t = new_v;
        self.state.t = new_t;
        Ok(())
    }
}

/// Per-step information passed to observers alongside the state.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// Step index; 0 is the initial state before any step.
    pub step: usize,
    /// Pre-projection constraint residual of the step that produced this
    /// state (0 for the initial state).
    pub pre_projection_residual: f64,
}

/// Callback invoked after every step (and once on the initial state).
pub trait Observer {
    fn observe(&mut self, info: &StepInfo, state: &FieldState);
}

impl<F: FnMut(&StepInfo, &FieldState)> Observer for F {
    fn observe(&mut self, info: &StepInfo, state: &FieldState) {
        self(info, state)
    }
}

/// Options controlling `evolve`.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub step: StepOptions,
    /// Keep a snapshot every `save_every` steps (first and last always kept).
    pub save_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { step: StepOptions::default(), save_every: usize::MAX }
    }
}

/// A time-ordered collection of state snapshots from one evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub dt: f64,
    pub n_steps: usize,
    pub scheme: &'static str,
}

impl Trajectory {
    pub fn initial(&self) -> &FieldState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory always holds at least one snapshot")
    }
}

/// Evolve `state` to `t_end` with target step `dt_target` (shrunk uniformly
/// so the horizon is hit exactly), invoking observers after every step.
pub fn evolve(
    state: FieldState,
    t_end: f64,
    dt_target: f64,
    opts: EvolveOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    if t_end < state.t {
        return Err(Error::BadParams {
            reason: format!("t_end = {t_end} precedes state time {}", state.t),
        });
    }
    let span = t_end - state.t;
    let n_steps = if span == 0.0 { 0 } else { (span / dt_target - 1e-9).ceil().max(1.0) as usize };
    let dt = if n_steps == 0 { dt_target } else { span / n_steps as f64 };

    let mut stepper = Stepper::new(state, dt, opts.step)?;
    let info0 = StepInfo { step: 0, pre_projection_residual: 0.0 };
    for obs in observers.iter_mut() {
        obs.observe(&info0, stepper.state());
    }
    let mut snapshots = vec![stepper.state().clone()];
    let save_every = opts.save_every.max(1);
    for k in 1..=n_steps {
        stepper.step()?;
        let info = StepInfo {
            step: k,
            pre_projection_residual: stepper.last_pre_projection_residual(),
        };
        for obs in observers.iter_mut() {
            obs.observe(&info, stepper.state());
        }
        if k % save_every == 0 && k != n_steps {
            snapshots.push(stepper.state().clone());
        }
    }
    if n_steps > 0 {
        snapshots.push(stepper.state().clone());
    }
    Ok(Trajectory { snapshots, dt, n_steps, scheme: "leapfrog-projection" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::TargetKind;

    fn sphere_setup(dr: f64, r_max: f64) -> (Arc<RadialGrid>, Arc<TargetManifold>) {
        (
            Arc::new(RadialGrid::new(dr, r_max).unwrap()),
            Arc::new(TargetManifold::unit_sphere(3).unwrap()),
        )
    }

    fn energy(state: &FieldState) -> f64 {
        crate::estimates::energy(state).unwrap()
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let (grid, target) = sphere_setup(0.125, 8.0);
        let state = init_state(&InitialData::zero(), grid, target.clone(), 4.0).unwrap();
        let base = target.base_point();
        let traj = evolve(state, 1.0, 0.0625, EvolveOptions::default(), &mut []).unwrap();
        assert!(traj.last().sup_distance_to(&base) < 1e-15);
        assert_eq!(traj.last().phi_t.max_node_norm(), 0.0);
    }

    #[test]
    fn support_violation_is_rejected() {
        let (grid, target) = sphere_setup(0.125, 8.0);
        // support radius ≈ 0 + 9·1 = 9 > 8 − 4 − 1
        let data = InitialData::gaussian(0.1, 1.0, 0.0);
        let err = init_state(&data, grid, target, 4.0);
        assert!(matches!(err, Err(Error::SupportViolation { .. })));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let (grid, target) = sphere_setup(0.125, 8.0);
        let state = init_state(&InitialData::zero(), grid, target, 1.0).unwrap();
        let err = Stepper::new(state, 0.125, StepOptions::default());
        assert!(matches!(err, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn blowup_cap_aborts_the_run() {
        let (grid, target) = sphere_setup(2.0_f64.powi(-5), 8.0);
        let data = InitialData::gaussian(0.5, 0.3, 0.0);
        let state = init_state(&data, grid, target, 2.0).unwrap();
        let opts = EvolveOptions {
            step: StepOptions { blowup_cap: 0.1, ..Default::default() },
            ..Default::default()
        };
        let err = evolve(state, 2.0, 2.0_f64.powi(-6), opts, &mut []);
        assert!(matches!(err, Err(Error::NumericalBlowup { .. })));
    }

    #[test]
    fn flat_gaussian_energy_matches_closed_form() {
        // E₀ = ½ ∫ r |Φ₁|² dr with |Φ₁|² = a² e^{-(r-c)²/w²}; for a = 1,
        // w² = 1/2, c = 0 this is ½ ∫ r e^{-2r²} dr = 1/8.
        let grid = Arc::new(RadialGrid::new(2.0_f64.powi(-7), 8.0).unwrap());
        let target = Arc::new(TargetManifold::flat(1).unwrap());
        let data = InitialData::gaussian(1.0, 0.5_f64.sqrt(), 0.0);
        let state = init_state(&data, grid, target, 0.0).unwrap();
        assert!((energy(&state) - 0.125).abs() < 1e-5, "E0 = {}", energy(&state));
    }

    #[test]
    fn ring_bump_energy_matches_closed_form() {
        // Displacement-plus-transverse-velocity data on the sphere with
        // profile s₀ = a e^{-(r-c)²/(2w²)}: the geodesic is unit speed and
        // the velocity has magnitude s₀, so E = ½∫ r (s₀² + s₀'²) dr. For
        // c ≫ w the Gaussian moments give E = a²c√π (w/2 + 1/(4w)).
        let grid = Arc::new(RadialGrid::new(2.0_f64.powi(-7), 10.0).unwrap());
        let target = Arc::new(TargetManifold::unit_sphere(3).unwrap());
        let (a, w, c) = (0.1, 0.5, 3.0);
        let data = InitialData::ring(a, w, c);
        let state = init_state(&data, grid, target, 0.0).unwrap();
        assert!(state.phi_t.max_node_norm() > 0.0);
        assert!(state.constraint_residual_max() < 1e-14);
        assert!(state.tangency_residual_max() < 1e-13);
        let expected = a * a * c * std::f64::consts::PI.sqrt() * (0.5 * w + 0.25 / w);
        assert!(
            (energy(&state) - expected).abs() < 1e-5,
            "E = {} vs {expected}",
            energy(&state)
        );
    }

    #[test]
    fn sphere_run_preserves_constraint_and_tangency() {
        let (grid, target) = sphere_setup(2.0_f64.powi(-5), 8.0);
        let data = InitialData::gaussian(0.1, 0.5, 0.0);
        let state = init_state(&data, grid, target, 2.0).unwrap();
        let traj = evolve(state, 2.0, 2.0_f64.powi(-6), EvolveOptions::default(), &mut [])
            .unwrap();
        let last = traj.last();
        assert!(last.constraint_residual_max() < 1e-14, "{}", last.constraint_residual_max());
        assert!(last.tangency_residual_max() < 1e-13, "{}", last.tangency_residual_max());
        assert_eq!(last.target.kind(), TargetKind::UnitSphere);
    }

    #[test]
    fn energy_drift_is_small_and_second_order() {
        let mut drifts = Vec::new();
        for k in [5, 6] {
            let (grid, target) = sphere_setup(2.0_f64.powi(-k), 8.0);
            let data = InitialData::gaussian(0.1, 0.5, 0.0);
            let state = init_state(&data, grid, target, 2.0).unwrap();
            let e0 = energy(&state);
            let mut max_drift = 0.0_f64;
            let mut watch = |_: &StepInfo, s: &FieldState| {
                max_drift = max_drift.max((energy(s) - e0).abs() / e0);
            };
            let mut obs: Vec<&mut dyn Observer> = vec![&mut watch];
            evolve(state, 2.0, 2.0_f64.powi(-k - 1), EvolveOptions::default(), &mut obs)
                .unwrap();
            drifts.push(max_drift);
        }
        assert!(drifts[0] < 2e-3, "drift too large: {:?}", drifts);
        assert!(drifts[1] < drifts[0] / 3.0, "drift not ~second order: {:?}", drifts);
    }

    #[test]
    fn propagation_speed_is_finite() {
        let (grid, target) = sphere_setup(2.0_f64.powi(-5), 12.0);
        let data = InitialData::gaussian(0.2, 0.3, 2.0);
        let state = init_state(&data, grid.clone(), target.clone(), 4.0).unwrap();
        let t_end = 3.0;
        let traj = evolve(state, t_end, 2.0_f64.powi(-6), EvolveOptions::default(), &mut [])
            .unwrap();
        let last = traj.last();
        let base = target.base_point();
        let front = data.support_radius() + t_end + 2.0 * grid.dr();
        let mut outside = 0.0_f64;
        for j in 0..grid.len() {
            if grid.node(j) > front {
                let d: f64 = last
                    .phi
                    .node(j)
                    .iter()
                    .zip(&base)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                outside = outside.max(d.max(norm(last.phi_t.node(j))));
            }
        }
        assert!(outside < 1e-12, "signal escaped the light cone: {outside}");
    }

    #[test]
    fn small_amplitude_stays_near_base_point() {
        let (grid, target) = sphere_setup(2.0_f64.powi(-5), 8.0);
        let data = InitialData::gaussian(1e-3, 0.4, 1.0);
        let state = init_state(&data, grid, target.clone(), 2.0).unwrap();
        let traj = evolve(state, 2.0, 2.0_f64.powi(-6), EvolveOptions::default(), &mut [])
            .unwrap();
        assert!(traj.last().sup_distance_to(&target.base_point()) < 1e-2);
    }

    #[test]
    fn trajectory_snapshots_are_time_ordered() {
        let (grid, target) = sphere_setup(0.125, 8.0);
        let data = InitialData::gaussian(0.05, 0.5, 1.0);
        let state = init_state(&data, grid, target, 1.0).unwrap();
        let opts = EvolveOptions { save_every: 4, ..Default::default() };
        let traj = evolve(state, 1.0, 0.0625, opts, &mut []).unwrap();
        assert!(traj.snapshots.len() > 2);
        for w in traj.snapshots.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        assert!((traj.last().t - 1.0).abs() < 1e-12);
    }
}
