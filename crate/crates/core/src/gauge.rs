//! Orthonormal frames on the pull-back bundle along the evolving map.
//!
//! The frame is radially parallel (zero radial connection): it is seeded at
//! the outermost node by Gram–Schmidt on tangent-projected coordinate axes
//! and transported inward by project-and-reorthonormalize. The remaining
//! time component of the connection, A₀, is computed two independent ways —
//! by centered time differencing of the frame, and by integrating the
//! curvature component F₀₁ inward from the outer boundary where A₀ is
//! normalized to zero. Frame components q₀, q₁ of (Φ_t, Φ_r) satisfy the
//! transported field equations, whose residuals this module measures.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{axpy, dot, normalize, VectorField};
use crate::grid::RadialGrid;
use crate::solver::{FieldState, StateWindow};

/// Rejection threshold for a Gram–Schmidt candidate after removing the
/// components along already-accepted directions.
const GS_MIN_NORM: f64 = 1e-6;

/// Per-node square matrices of a fixed rank (row-major k×k blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    nodes: usize,
    k: usize,
    data: Vec<f64>,
}

impl MatrixField {
    pub fn zeros(nodes: usize, k: usize) -> Self {
        MatrixField { nodes, k, data: vec![0.0; nodes * k * k] }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn node(&self, j: usize) -> &[f64] {
        let s = self.k * self.k;
        &self.data[j * s..(j + 1) * s]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        let s = self.k * self.k;
        &mut self.data[j * s..(j + 1) * s]
    }

    /// Entry (a, b) at node j; the matrix acts on component vectors as
    /// (M q)_a = Σ_b M[a][b] q_b.
    pub fn entry(&self, j: usize, a: usize, b: usize) -> f64 {
        self.node(j)[a * self.k + b]
    }

    /// out_a = Σ_b M[a][b] x_b at node j.
    pub fn apply(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let m = self.node(j);
        let k = self.k;
        for a in 0..k {
            let mut acc = 0.0;
            for b in 0..k {
                acc += m[a * k + b] * x[b];
            }
            out[a] = acc;
        }
    }

    /// Largest |entry| over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of the matrix at node j.
    pub fn frobenius(&self, j: usize) -> f64 {
        self.node(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest symmetric part |(M + Mᵀ)/2| entry over all nodes.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.nodes {
            let m = self.node(j);
            for a in 0..self.k {
                for b in 0..self.k {
                    worst = worst.max(0.5 * (m[a * self.k + b] + m[b * self.k + a]).abs());
                }
            }
        }
        worst
    }

    fn antisymmetrize(&mut self) {
        let k = self.k;
        for j in 0..self.nodes {
            let m = self.node_mut(j);
            for a in 0..k {
                for b in (a + 1)..k {
                    let half = 0.5 * (m[a * k + b] - m[b * k + a]);
                    m[a * k + b] = half;
                    m[b * k + a] = -half;
                }
                m[a * k + a] = 0.0;
            }
        }
    }
}

/// Orthonormal tangent frame along one time slice, with the components of
/// (Φ_t, Φ_r) in that frame.
#[derive(Debug, Clone)]
pub struct GaugeFrame {
    t: f64,
    grid: Arc<RadialGrid>,
    k: usize,
    vectors: Vec<VectorField>,
    q0: VectorField,
    q1: VectorField,
    components_filled: bool,
}

impl GaugeFrame {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    /// Frame vector e_i as a nodal ambient field.
    pub fn vector(&self, i: usize) -> &VectorField {
        &self.vectors[i]
    }

    pub fn has_vectors(&self) -> bool {
        !self.vectors.is_empty()
    }

    /// Components of Φ_t in the frame (nodes × rank).
    pub fn q0(&self) -> Result<&VectorField> {
        if self.components_filled {
            Ok(&self.q0)
        } else {
            Err(Error::FrameMismatch { reason: "frame components not yet computed".into() })
        }
    }

    /// Components of Φ_r in the frame (nodes × rank).
    pub fn q1(&self) -> Result<&VectorField> {
        if self.components_filled {
            Ok(&self.q1)
        } else {
            Err(Error::FrameMismatch { reason: "frame components not yet computed".into() })
        }
    }

    /// Frame carrying prescribed component fields and no frame vectors;
    /// for synthetic diagnostics and tests of component-level functionals.
    pub fn from_components(
        t: f64,
        grid: Arc<RadialGrid>,
        q0: VectorField,
        q1: VectorField,
    ) -> Result<Self> {
        if q0.comps() != q1.comps() || q0.nodes() != grid.len() || q1.nodes() != grid.len() {
            return Err(Error::FieldLengthMismatch { expected: grid.len(), got: q0.nodes() });
        }
        let k = q0.comps();
        Ok(GaugeFrame { t, grid, k, vectors: Vec::new(), q0, q1, components_filled: true })
    }

    /// Largest |⟨e_a, e_b⟩ − δ_ab| over nodes and index pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.grid.len() {
            for a in 0..self.k {
                for b in a..self.k {
                    let d = dot(self.vectors[a].node(j), self.vectors[b].node(j));
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((d - target).abs());
                }
            }
        }
        worst
    }

    /// Largest normal component of any frame vector relative to the state.
    pub fn tangency_residual(&self, state: &FieldState) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.grid.len() {
            for e in &self.vectors {
                worst = worst
                    .max(state.target.tangency_residual(state.phi.node(j), e.node(j)));
            }
        }
        worst
    }

    /// Largest tangent part of (e_i(r_{j+1}) − e_i(r_j))/dr — the discrete
    /// radial covariant derivative the construction drives to zero.
    pub fn radial_transport_residual(&self, state: &FieldState) -> f64 {
        let dr = self.grid.dr();
        let n = state.target.ambient_dim();
        let mut diff = vec![0.0; n];
        let mut worst = 0.0_f64;
        for j in 0..self.grid.len().saturating_sub(1) {
            for e in &self.vectors {
                let lo = e.node(j);
                let hi = e.node(j + 1);
                for c in 0..n {
                    diff[c] = (hi[c] - lo[c]) / dr;
                }
                state.target.tangent_project_in_place(state.phi.node(j), &mut diff);
                worst = worst.max(dot(&diff, &diff).sqrt());
            }
        }
        worst
    }
}

/// Orthonormalize up to `needed` vectors out of `candidates` (in order),
/// discarding near-dependent ones.
fn gram_schmidt_select(
    candidates: &[Vec<f64>],
    needed: usize,
    node: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(needed);
    for cand in candidates {
        if accepted.len() == needed {
            break;
        }
        let mut w = cand.clone();
        for a in &accepted {
            let c = dot(&w, a);
            axpy(-c, a, &mut w);
        }
        if normalize(&mut w) > GS_MIN_NORM {
            accepted.push(w);
        }
    }
    if accepted.len() < needed {
        return Err(Error::DegenerateFrame { node, found: accepted.len(), needed });
    }
    Ok(accepted)
}

/// Build the radially parallel orthonormal frame on one time slice.
///
/// The outermost node is seeded by Gram–Schmidt over the previous slice's
/// outer frame (when given) followed by the coordinate axes, everything
/// tangent-projected at Φ(r_max); the frame is then transported inward by
/// tangent projection and re-orthonormalization. Component fields are left
/// unfilled — see [`q_components`] / [`frame_for`].
pub fn build_frame(state: &FieldState, seed: Option<&GaugeFrame>) -> Result<GaugeFrame> {
    let grid = state.grid.clone();
    let target = &state.target;
    let n = target.ambient_dim();
    let k = target.intrinsic_dim();
    let nj = grid.len();
    if let Some(s) = seed {
        if s.k != k || s.grid.len() != nj || (s.grid.dr() - grid.dr()).abs() > 1e-15 {
            return Err(Error::FrameMismatch {
                reason: "seed frame built on a different grid or target".into(),
            });
        }
        if !s.has_vectors() {
            return Err(Error::FrameMismatch { reason: "seed frame has no vectors".into() });
        }
    }

    let mut vectors = vec![VectorField::zeros(nj, n); k];
    let outer = nj - 1;
    let p = state.phi.node(outer);
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(k + n);
    if let Some(s) = seed {
        for i in 0..k {
            candidates.push(s.vectors[i].node(outer).to_vec());
        }
    }
    for axis in 0..n {
        let mut c = vec![0.0; n];
        c[axis] = 1.0;
        candidates.push(c);
    }
    for c in candidates.iter_mut() {
        target.tangent_project_in_place(p, c);
    }
    let outer_frame = gram_schmidt_select(&candidates, k, outer)?;
    for (i, e) in outer_frame.iter().enumerate() {
        vectors[i].node_mut(outer).copy_from_slice(e);
    }

    for j in (0..outer).rev() {
        let p = state.phi.node(j);
        let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            let mut w = vectors[i].node(j + 1).to_vec();
            target.tangent_project_in_place(p, &mut w);
            for a in &accepted {
                let c = dot(&w, a);
                axpy(-c, a, &mut w);
            }
            if normalize(&mut w) <= GS_MIN_NORM {
                return Err(Error::DegenerateFrame { node: j, found: i, needed: k });
            }
            accepted.push(w);
        }
        for (i, e) in accepted.iter().enumerate() {
            vectors[i].node_mut(j).copy_from_slice(e);
        }
    }

    Ok(GaugeFrame {
        t: state.t,
        grid,
        k,
        vectors,
        q0: VectorField::zeros(nj, k),
        q1: VectorField::zeros(nj, k),
        components_filled: false,
    })
}

/// Fill the frame components q₀ⁱ = ⟨Φ_t, e_i⟩ and q₁ⁱ = ⟨Φ_r, e_i⟩ (with
/// Φ_r by centered even-parity differencing).
pub fn q_components(state: &FieldState, frame: &mut GaugeFrame) -> Result<()> {
    if !frame.has_vectors() {
        return Err(Error::FrameMismatch { reason: "frame has no vectors".into() });
    }
    if (frame.t - state.t).abs() > 1e-12 * state.t.abs().max(1.0)
        || frame.grid.len() != state.grid.len()
    {
        return Err(Error::FrameMismatch {
            reason: "frame was built from a different state".into(),
        });
    }
    let phi_r = state.phi_r();
    for j in 0..frame.grid.len() {
        for i in 0..frame.k {
            frame.q0.node_mut(j)[i] = dot(state.phi_t.node(j), frame.vectors[i].node(j));
            frame.q1.node_mut(j)[i] = dot(phi_r.node(j), frame.vectors[i].node(j));
        }
    }
    frame.components_filled = true;
    Ok(())
}

/// Build the frame and fill its components in one call.
pub fn frame_for(state: &FieldState, seed: Option<&GaugeFrame>) -> Result<GaugeFrame> {
    let mut frame = build_frame(state, seed)?;
    q_components(state, &mut frame)?;
    Ok(frame)
}

/// A₀ from centered time differencing of the frame, with the measured
/// antisymmetry defect of the raw matrix.
#[derive(Debug, Clone)]
pub struct ConnectionReport {
    /// Time at which A₀ is centered (midpoint of the two slices).
    pub t: f64,
    pub a0: MatrixField,
    /// Largest |(A + Aᵀ)/2| entry before enforcement.
    pub antisymmetry_defect: f64,
}

/// A₀[a][b] = ⟨D_t e_b, e_a⟩ at the midpoint of two frames, by the centered
/// difference quotient of e_b against the time-averaged e_a. When
/// `antisymmetrize` is set the result is replaced by (A − Aᵀ)/2, which the
/// component identities rely on for their cancellation structure.
pub fn connection_a0(
    prev: &GaugeFrame,
    next: &GaugeFrame,
    antisymmetrize: bool,
) -> Result<ConnectionReport> {
    if !prev.has_vectors() || !next.has_vectors() {
        return Err(Error::FrameMismatch { reason: "connection needs frame vectors".into() });
    }
    if prev.k != next.k
        || prev.grid.len() != next.grid.len()
        || (prev.grid.dr() - next.grid.dr()).abs() > 1e-15
    {
        return Err(Error::FrameMismatch { reason: "frames built on different grids".into() });
    }
    let span = next.t - prev.t;
    if !(span > 0.0) {
        return Err(Error::FrameMismatch {
            reason: format!("frames not time-ordered: {} .. {}", prev.t, next.t),
        });
    }
    let k = prev.k;
    let nj = prev.grid.len();
    let n = prev.vectors[0].comps();
    let mut a0 = MatrixField::zeros(nj, k);
    let mut rate = vec![0.0; n];
    let mut avg = vec![0.0; n];
    for j in 0..nj {
        for b in 0..k {
            let eb_next = next.vectors[b].node(j);
            let eb_prev = prev.vectors[b].node(j);
            for c in 0..n {
                rate[c] = (eb_next[c] - eb_prev[c]) / span;
            }
            for a in 0..k {
                let ea_next = next.vectors[a].node(j);
                let ea_prev = prev.vectors[a].node(j);
                for c in 0..n {
                    avg[c] = 0.5 * (ea_next[c] + ea_prev[c]);
                }
                a0.node_mut(j)[a * k + b] = dot(&rate, &avg);
            }
        }
    }
    let defect = a0.symmetry_defect();
    if antisymmetrize {
        a0.antisymmetrize();
    }
    Ok(ConnectionReport { t: 0.5 * (prev.t + next.t), a0, antisymmetry_defect: defect })
}

/// Curvature component F₀₁[a][b] = ⟨R(Φ_t, Φ_r) e_b, e_a⟩ evaluated through
/// the Gauss equation; the independent source for A₀ = ∫_r^{r_max} F₀₁ ds.
pub fn curvature_f01(state: &FieldState, frame: &GaugeFrame) -> Result<MatrixField> {
    if !frame.has_vectors() {
        return Err(Error::FrameMismatch { reason: "frame has no vectors".into() });
    }
    if frame.grid.len() != state.grid.len() {
        return Err(Error::FrameMismatch {
            reason: "frame and state grids differ".into(),
        });
    }
    let k = frame.k;
    let nj = state.grid.len();
    let phi_r = state.phi_r();
    let mut f01 = MatrixField::zeros(nj, k);
    for j in 0..nj {
        let p = state.phi.node(j);
        let x = state.phi_t.node(j);
        let y = phi_r.node(j);
        for a in 0..k {
            for b in 0..k {
                let val = state
                    .target
                    .curvature(p, x, y, frame.vectors[b].node(j), frame.vectors[a].node(j))?;
                f01.node_mut(j)[a * k + b] = val;
            }
        }
    }
    Ok(f01)
}

/// Integrate the curvature inward: A₀(r) = ∫_r^{r_max} F₀₁ ds, the gauge
/// normalization with a vanishing connection at the outer boundary.
pub fn a0_from_f01(grid: &RadialGrid, f01: &MatrixField) -> Result<MatrixField> {
    if f01.nodes() != grid.len() {
        return Err(Error::FieldLengthMismatch { expected: grid.len(), got: f01.nodes() });
    }
    let k = f01.rank();
    let nj = grid.len();
    let mut out = MatrixField::zeros(nj, k);
    let mut profile = vec![0.0; nj];
    for a in 0..k {
        for b in 0..k {
            for (j, slot) in profile.iter_mut().enumerate() {
                *slot = f01.entry(j, a, b);
            }
            let cum = grid.cumulative_from_outer(&profile)?;
            for j in 0..nj {
                out.node_mut(j)[a * k + b] = cum[j];
            }
        }
    }
    Ok(out)
}

/// sup_r r·‖A₀(r)‖_F — the measured decay-rate constant of the connection.
pub fn a0_radius_bound(grid: &RadialGrid, a0: &MatrixField) -> f64 {
    (0..grid.len()).fold(0.0_f64, |m, j| m.max(grid.node(j) * a0.frobenius(j)))
}

/// Three consecutive frames matched to a [`StateWindow`].
#[derive(Debug, Clone, Copy)]
pub struct FrameWindow<'a> {
    pub prev: &'a GaugeFrame,
    pub mid: &'a GaugeFrame,
    pub next: &'a GaugeFrame,
}

impl<'a> FrameWindow<'a> {
    pub fn new(prev: &'a GaugeFrame, mid: &'a GaugeFrame, next: &'a GaugeFrame) -> Result<Self> {
        let d1 = mid.t - prev.t;
        let d2 = next.t - mid.t;
        if !(d1 > 0.0) || !(d2 > 0.0) || (d1 - d2).abs() > 1e-9 * d1.max(d2) {
            return Err(Error::FrameMismatch {
                reason: format!("frame times not uniform: {}, {}, {}", prev.t, mid.t, next.t),
            });
        }
        if prev.k != mid.k || next.k != mid.k || prev.grid.len() != mid.grid.len() {
            return Err(Error::FrameMismatch {
                reason: "frame ranks or grids differ across the window".into(),
            });
        }
        Ok(FrameWindow { prev, mid, next })
    }

    /// Validate that the frames were built on the given state window.
    pub fn matches(&self, states: &StateWindow<'_>) -> Result<()> {
        for (f, s) in [
            (self.prev, states.prev),
            (self.mid, states.mid),
            (self.next, states.next),
        ] {
            if (f.t - s.t).abs() > 1e-12 * s.t.abs().max(1.0) || f.grid.len() != s.grid.len() {
                return Err(Error::FrameMismatch {
                    reason: "frames do not match the state window".into(),
                });
            }
        }
        Ok(())
    }
}

/// L²(r dr) residuals of the frame-component field equations at the middle
/// slice of a window:
/// evolution residual  ∂_t q₀ + A₀ q₀ − (1/r) ∂_r(r q₁)
/// transport residual  ∂_t q₁ + A₀ q₁ − ∂_r q₀.
#[derive(Debug, Clone, Copy)]
pub struct GaugeResiduals {
    pub q0_evolution: f64,
    pub q1_transport: f64,
}

pub fn gauge_residuals(
    states: &StateWindow<'_>,
    frames: &FrameWindow<'_>,
) -> Result<GaugeResiduals> {
    frames.matches(states)?;
    let grid = states.grid();
    let nj = grid.len();
    let k = frames.mid.k;
    let dt = states.dt();
    let a0 = connection_a0(frames.prev, frames.next, true)?.a0;

    let q0_prev = frames.prev.q0()?;
    let q0_mid = frames.mid.q0()?;
    let q0_next = frames.next.q0()?;
    let q1_prev = frames.prev.q1()?;
    let q1_mid = frames.mid.q1()?;
    let q1_next = frames.next.q1()?;

    // Spatial derivatives of the component profiles (no parity structure).
    let dq0 = grid.derivative_field(q0_mid)?;
    let mut div_rq1 = VectorField::zeros(nj, k);
    let mut profile = vec![0.0; nj];
    for i in 0..k {
        for (j, slot) in profile.iter_mut().enumerate() {
            *slot = grid.node(j) * q1_mid.node(j)[i];
        }
        let d = grid.derivative_profile(&profile)?;
        for j in 0..nj {
            div_rq1.node_mut(j)[i] = d[j] / grid.node(j);
        }
    }

    let mut res0 = vec![0.0; nj];
    let mut res1 = vec![0.0; nj];
    let mut a0q = vec![0.0; k];
    let inv_2dt = 0.5 / dt;
    for j in 0..nj {
        let mut acc0 = 0.0;
        a0.apply(j, q0_mid.node(j), &mut a0q);
        for i in 0..k {
            let ddt = (q0_next.node(j)[i] - q0_prev.node(j)[i]) * inv_2dt;
            let r = ddt + a0q[i] - div_rq1.node(j)[i];
            acc0 += r * r;
        }
        res0[j] = acc0;
        let mut acc1 = 0.0;
        a0.apply(j, q1_mid.node(j), &mut a0q);
        for i in 0..k {
            let ddt = (q1_next.node(j)[i] - q1_prev.node(j)[i]) * inv_2dt;
            let r = ddt + a0q[i] - dq0.node(j)[i];
            acc1 += r * r;
        }
        res1[j] = acc1;
    }
    Ok(GaugeResiduals {
        q0_evolution: grid.weighted_integral(&res0, 1.0)?.sqrt(),
        q1_transport: grid.weighted_integral(&res1, 1.0)?.sqrt(),
    })
}
