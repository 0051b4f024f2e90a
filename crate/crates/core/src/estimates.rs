//! Monitored functionals of the evolving map: conserved energy, weighted
//! norms of the frame components, the weighted balance law and its
//! null-coordinate repackaging, second-order energies with their curvature
//! sources, accumulated nonlinear space-time integrals, and the
//! Sobolev–Hardy interpolation ratio.
//!
//! Everything here is a quadrature over immutable slices; time derivatives
//! are centered differences across a three-slice window.

use crate::error::{Error, Result};
use crate::field::{dot, norm, VectorField};
use crate::gauge::{connection_a0, FrameWindow, GaugeFrame};
use crate::grid::RadialGrid;
use crate::solver::{FieldState, StateWindow};

/// Exponents (α, β, σ) of the weighted estimates.
///
/// α weights the balance law (r^{1−α}), β the spatial norms (r^{−β}) and the
/// bilinear integral (r^{2−β}), σ the cumulative regularization ξ^{−σ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams { alpha: 0.2, beta: 0.2, sigma: 0.01 }
    }
}

impl EstimateParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        let p = EstimateParams { alpha, beta, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Admissibility: 0 < σ < min(α, β), α < 1, 1/10 ≤ β ≤ 1/4. The σ upper
    /// bounds keep the cumulative weight integrable and the null-form
    /// domination floors nonnegative in both exponent families.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::BadParams { reason: format!("sigma = {} must be > 0", self.sigma) });
        }
        if !(self.beta >= 0.1 && self.beta <= 0.25) {
            return Err(Error::BadParams {
                reason: format!("beta = {} outside [0.1, 0.25]", self.beta),
            });
        }
        if !(self.alpha < 1.0 && self.alpha > 0.0) {
            return Err(Error::BadParams {
                reason: format!("alpha = {} outside (0, 1)", self.alpha),
            });
        }
        if self.sigma >= self.alpha || self.sigma >= self.beta {
            return Err(Error::BadParams {
                reason: format!(
                    "sigma = {} must be below alpha = {} and beta = {}",
                    self.sigma, self.alpha, self.beta
                ),
            });
        }
        Ok(())
    }

    /// The α used when the quartic space-time integral is active, pinned by
    /// the exponent matching 2 − 2α = 3β.
    pub fn quartic_alpha(&self) -> f64 {
        1.0 - 1.5 * self.beta
    }

    /// Copy of the parameters with α replaced by the quartic-matched value.
    pub fn with_quartic_alpha(&self) -> Result<Self> {
        EstimateParams::new(self.quartic_alpha(), self.beta, self.sigma)
    }
}

/// Conserved energy ½∫(|Φ_t|² + |Φ_r|²) r dr.
pub fn energy(state: &FieldState) -> Result<f64> {
    let phi_r = state.phi_r();
    let profile: Vec<f64> = (0..state.grid.len())
        .map(|j| {
            dot(state.phi_t.node(j), state.phi_t.node(j)) + dot(phi_r.node(j), phi_r.node(j))
        })
        .collect();
    Ok(0.5 * state.grid.weighted_integral(&profile, 1.0)?)
}

/// Component-wise cumulative integral F(r) = ∫₀^r ξ^{−σ} f(ξ) dξ by midpoint
/// quadrature from the axis.
pub fn cumulative_weighted_integral(
    grid: &RadialGrid,
    f: &VectorField,
    sigma: f64,
) -> Result<VectorField> {
    if f.nodes() != grid.len() {
        return Err(Error::FieldLengthMismatch { expected: grid.len(), got: f.nodes() });
    }
    if !(sigma < 1.0) {
        return Err(Error::BadParams {
            reason: format!("cumulative weight exponent sigma = {sigma} must be < 1"),
        });
    }
    let k = f.comps();
    let nj = grid.len();
    let mut out = VectorField::zeros(nj, k);
    let mut profile = vec![0.0; nj];
    for i in 0..k {
        for (j, slot) in profile.iter_mut().enumerate() {
            *slot = grid.node(j).powf(-sigma) * f.node(j)[i];
        }
        let cum = grid.cumulative_from_axis(&profile)?;
        for j in 0..nj {
            out.node_mut(j)[i] = cum[j];
        }
    }
    Ok(out)
}

/// Weighted spatial norms of one slice's frame components.
#[derive(Debug, Clone)]
pub struct WeightedNorms {
    /// ∫ r^{−β} (|q₀|² + |q₁|²) dr.
    pub w_beta: f64,
    /// Q₀(r) = ∫₀^r ξ^{−σ} q₁ dξ, nodal profile.
    pub q0_profile: VectorField,
    /// Q(r) = r^{σ−α} Q₀(r), nodal profile.
    pub q_profile: VectorField,
    /// sup_r |Q₀(r)|.
    pub q0_profile_max: f64,
}

pub fn weighted_norms(frame: &GaugeFrame, params: &EstimateParams) -> Result<WeightedNorms> {
    params.validate()?;
    let grid = frame.grid();
    let q0 = frame.q0()?;
    let q1 = frame.q1()?;
    let profile: Vec<f64> = (0..grid.len())
        .map(|j| dot(q0.node(j), q0.node(j)) + dot(q1.node(j), q1.node(j)))
        .collect();
    let w_beta = grid.weighted_integral(&profile, -params.beta)?;
    let q0_profile = cumulative_weighted_integral(grid, q1, params.sigma)?;
    let mut q_profile = q0_profile.clone();
    let mut q0_max = 0.0_f64;
    for j in 0..grid.len() {
        let w = grid.node(j).powf(params.sigma - params.alpha);
        q0_max = q0_max.max(q0_profile.node_norm(j));
        for v in q_profile.node_mut(j) {
            *v *= w;
        }
    }
    Ok(WeightedNorms { w_beta, q0_profile, q_profile, q0_profile_max: q0_max })
}

/// The same β-weighted norm computed without a frame, from the field
/// derivatives themselves (with Φ_r projected to the tangent space, the
/// vector the frame expands).
pub fn w_beta_frame_free(state: &FieldState, beta: f64) -> Result<f64> {
    let phi_r = state.phi_r();
    let mut tangent = vec![0.0; state.target.ambient_dim()];
    let profile: Vec<f64> = (0..state.grid.len())
        .map(|j| {
            tangent.copy_from_slice(phi_r.node(j));
            state.target.tangent_project_in_place(state.phi.node(j), &mut tangent);
            dot(state.phi_t.node(j), state.phi_t.node(j)) + dot(&tangent, &tangent)
        })
        .collect();
    state.grid.weighted_integral(&profile, -beta)
}

/// Per-slice flux profiles of the weighted balance law with exponent `e`:
/// the quantity under ∂_t, the quantity under ∂_r, and the undifferentiated
/// zeroth-order terms.
struct FluxProfiles {
    time_flux: Vec<f64>,
    space_flux: Vec<f64>,
    zeroth: Vec<f64>,
}

fn flux_profiles(frame: &GaugeFrame, e: f64, sigma: f64) -> Result<FluxProfiles> {
    let grid = frame.grid();
    let q0 = frame.q0()?;
    let q1 = frame.q1()?;
    let qc = cumulative_weighted_integral(grid, q1, sigma)?;
    let nj = grid.len();
    let mut time_flux = vec![0.0; nj];
    let mut space_flux = vec![0.0; nj];
    let mut zeroth = vec![0.0; nj];
    let c6 = (e - sigma + 1.0) / 4.0;
    let c7 = (1.0 + e - 2.0 * sigma) * (e - sigma + 1.0) / 4.0;
    for j in 0..nj {
        let r = grid.node(j);
        let a = q0.node(j);
        let b = q1.node(j);
        let q = qc.node(j);
        let en = dot(a, a) + dot(b, b);
        let cross = dot(a, b);
        let w1 = r.powf(1.0 - e);
        let ws = r.powf(sigma - e);
        time_flux[j] = -w1 * cross - 0.5 * ws * dot(q, a);
        space_flux[j] = 0.5 * w1 * en
            + 0.5 * ws * dot(q, b)
            + c6 * r.powf(2.0 * sigma - 1.0 - e) * dot(q, q);
        zeroth[j] = 0.5 * e * r.powf(-e) * en
            + c7 * r.powf(2.0 * sigma - 2.0 - e) * dot(q, q);
    }
    Ok(FluxProfiles { time_flux, space_flux, zeroth })
}

/// Right-hand side of the balance law at the middle slice: the connection
/// and regularization couplings, written in the absolutely convergent
/// cumulative form
/// |q₀|²/(2rᵉ) − ⟨q₀, J⟩/(2r^{e−σ}) + ⟨q₀, I_A⟩/(2r^{e−σ}) + ½r^{σ−e}⟨A₀q₀, Q₀⟩
/// with J = ∫₀^r ξ^{−σ} ∂_ξ q₀ dξ and I_A = ∫₀^r ξ^{−σ} A₀ q₁ dξ.
fn balance_rhs(
    states: &StateWindow<'_>,
    frames: &FrameWindow<'_>,
    e: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    let grid = states.grid();
    let nj = grid.len();
    let k = frames.mid.rank();
    let a0 = connection_a0(frames.prev, frames.next, true)?.a0;
    let q0 = frames.mid.q0()?;
    let q1 = frames.mid.q1()?;
    let dq0 = grid.derivative_field(q0)?;
    let j_cum = cumulative_weighted_integral(grid, &dq0, sigma)?;
    let mut a0q1 = VectorField::zeros(nj, k);
    for j in 0..nj {
        a0.apply(j, q1.node(j), a0q1.node_mut(j));
    }
    let ia_cum = cumulative_weighted_integral(grid, &a0q1, sigma)?;
    let qc = cumulative_weighted_integral(grid, q1, sigma)?;
    let mut rhs = vec![0.0; nj];
    let mut a0q0 = vec![0.0; k];
    for j in 0..nj {
        let r = grid.node(j);
        let a = q0.node(j);
        a0.apply(j, a, &mut a0q0);
        rhs[j] = 0.5 * r.powf(-e) * dot(a, a)
            - 0.5 * r.powf(sigma - e) * dot(a, j_cum.node(j))
            + 0.5 * r.powf(sigma - e) * dot(a, ia_cum.node(j))
            + 0.5 * r.powf(sigma - e) * dot(&a0q0, qc.node(j));
    }
    Ok(rhs)
}

/// L¹(dr) defect of the weighted balance law over a three-slice window:
/// centered ∂_t of the time flux, centered ∂_r of the space flux, plus the
/// zeroth-order terms, minus the right-hand side.
pub fn balance_residual(
    states: &StateWindow<'_>,
    frames: &FrameWindow<'_>,
    params: &EstimateParams,
) -> Result<f64> {
    params.validate()?;
    frames.matches(states)?;
    let grid = states.grid();
    let dt = states.dt();
    let f_prev = flux_profiles(frames.prev, params.alpha, params.sigma)?;
    let f_mid = flux_profiles(frames.mid, params.alpha, params.sigma)?;
    let f_next = flux_profiles(frames.next, params.alpha, params.sigma)?;
    let d_space = grid.derivative_profile(&f_mid.space_flux)?;
    let rhs = balance_rhs(states, frames, params.alpha, params.sigma)?;
    let defect: Vec<f64> = (0..grid.len())
        .map(|j| {
            let ddt = (f_next.time_flux[j] - f_prev.time_flux[j]) / (2.0 * dt);
            (ddt + d_space[j] + f_mid.zeroth[j] - rhs[j]).abs()
        })
        .collect();
    grid.weighted_integral(&defect, 0.0)
}

/// Whether the cumulative Q₀ couplings participate in the null-form
/// repackaging or are dropped (the flat diagnostic mode, where the densities
/// reduce to pure null-derivative squares).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QZeroTerms {
    Full,
    Dropped,
}

/// Nodal profiles of the null-form densities P₊/P₋ and their domination
/// floors ¼r^{1−e}|q₀±q₁|².
#[derive(Debug, Clone)]
pub struct NullBalance {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub floor_plus: Vec<f64>,
    pub floor_minus: Vec<f64>,
}

impl NullBalance {
    /// min over nodes and both families of (P − floor); nonnegative (up to
    /// roundoff) whenever e ≥ σ.
    pub fn domination_margin(&self) -> f64 {
        let mut m = f64::INFINITY;
        for j in 0..self.p_plus.len() {
            m = m.min(self.p_plus[j] - self.floor_plus[j]);
            m = m.min(self.p_minus[j] - self.floor_minus[j]);
        }
        m
    }
}

/// Null-form densities with exponent `e` on one slice:
/// P∓ = ½r^{1−e}|q₀∓q₁|² + ½r^{σ−e}⟨Q₀, q₁∓q₀⟩ + ((e−σ+1)/4) r^{2σ−1−e}|Q₀|².
pub fn null_balance_fields(
    frame: &GaugeFrame,
    e: f64,
    sigma: f64,
    qzero: QZeroTerms,
) -> Result<NullBalance> {
    let grid = frame.grid();
    let q0 = frame.q0()?;
    let q1 = frame.q1()?;
    let nj = grid.len();
    let k = frame.rank();
    let qc = match qzero {
        QZeroTerms::Full => cumulative_weighted_integral(grid, q1, sigma)?,
        QZeroTerms::Dropped => VectorField::zeros(nj, k),
    };
    let c = (e - sigma + 1.0) / 4.0;
    let mut nb = NullBalance {
        p_plus: vec![0.0; nj],
        p_minus: vec![0.0; nj],
        floor_plus: vec![0.0; nj],
        floor_minus: vec![0.0; nj],
    };
    let mut diff = vec![0.0; k];
    let mut sum = vec![0.0; k];
    for j in 0..nj {
        let r = grid.node(j);
        let a = q0.node(j);
        let b = q1.node(j);
        for i in 0..k {
            diff[i] = a[i] - b[i];
            sum[i] = a[i] + b[i];
        }
        let q = qc.node(j);
        let w1 = r.powf(1.0 - e);
        let ws = r.powf(sigma - e);
        let wq = c * r.powf(2.0 * sigma - 1.0 - e) * dot(q, q);
        // ⟨Q₀, q₁ ∓ q₀⟩ = ∓⟨Q₀, q₀ ∓ q₁⟩.
        nb.p_minus[j] = 0.5 * w1 * dot(&diff, &diff) - 0.5 * ws * dot(q, &diff) + wq;
        nb.p_plus[j] = 0.5 * w1 * dot(&sum, &sum) + 0.5 * ws * dot(q, &sum) + wq;
        nb.floor_minus[j] = 0.25 * w1 * dot(&diff, &diff);
        nb.floor_plus[j] = 0.25 * w1 * dot(&sum, &sum);
    }
    Ok(nb)
}

/// Source density G_e of the null-form balance ∂_v P₋ − ∂_u P₊ = G_e at the
/// middle slice of a window.
pub fn null_balance_source(
    states: &StateWindow<'_>,
    frames: &FrameWindow<'_>,
    e: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    frames.matches(states)?;
    let f_mid = flux_profiles(frames.mid, e, sigma)?;
    let rhs = balance_rhs(states, frames, e, sigma)?;
    Ok((0..rhs.len()).map(|j| rhs[j] - f_mid.zeroth[j]).collect())
}

/// L¹(dr) defect of the null-form balance over a window, computed through
/// the P∓ packaging: ½∂_t(P₋ − P₊) + ½∂_r(P₋ + P₊) − G_e.
pub fn null_balance_residual(
    states: &StateWindow<'_>,
    frames: &FrameWindow<'_>,
    e: f64,
    sigma: f64,
) -> Result<f64> {
    frames.matches(states)?;
    let grid = states.grid();
    let dt = states.dt();
    let nb_prev = null_balance_fields(frames.prev, e, sigma, QZeroTerms::Full)?;
    let nb_mid = null_balance_fields(frames.mid, e, sigma, QZeroTerms::Full)?;
    let nb_next = null_balance_fields(frames.next, e, sigma, QZeroTerms::Full)?;
    let source = null_balance_source(states, frames, e, sigma)?;
    let sum_mid: Vec<f64> =
        (0..grid.len()).map(|j| nb_mid.p_minus[j] + nb_mid.p_plus[j]).collect();
    let d_space = grid.derivative_profile(&sum_mid)?;
    let defect: Vec<f64> = (0..grid.len())
        .map(|j| {
            let anti_next = nb_next.p_minus[j] - nb_next.p_plus[j];
            let anti_prev = nb_prev.p_minus[j] - nb_prev.p_plus[j];
            let ddt = 0.5 * (anti_next - anti_prev) / (2.0 * dt);
            (ddt + 0.5 * d_space[j] - source[j]).abs()
        })
        .collect();
    grid.weighted_integral(&defect, 0.0)
}

/// Fields derived from a three-slice window that the second-order energy
/// and the nonlinear integrals share: the time derivative Ψ = Φ_t and the
/// radial derivative Ψ̂ = Φ_r of the map, with their own time/radial/null
/// derivatives (time by centered differences, radial by parity-respecting
/// stencils).
pub(crate) struct DerivedSlice {
    pub(crate) psi_t: VectorField,
    pub(crate) psi_r: VectorField,
    pub(crate) psi_hat: VectorField,
    pub(crate) psi_hat_t: VectorField,
    pub(crate) psi_hat_r: VectorField,
    pub(crate) phi_u: VectorField,
    pub(crate) phi_v: VectorField,
}

pub(crate) fn derived_slice(states: &StateWindow<'_>) -> Result<DerivedSlice> {
    let grid = states.grid();
    let mid = states.mid;
    let dt = states.dt();
    let nj = grid.len();
    let n = mid.phi.comps();
    let inv_2dt = 0.5 / dt;
    let mut psi_t = VectorField::zeros(nj, n);
    for j in 0..nj {
        let nx = states.next.phi_t.node(j);
        let pv = states.prev.phi_t.node(j);
        for (c, slot) in psi_t.node_mut(j).iter_mut().enumerate() {
            *slot = (nx[c] - pv[c]) * inv_2dt;
        }
    }
    let psi_r = grid.radial_derivative_even(&mid.phi_t)?;
    let psi_hat = mid.phi_r();
    let hat_prev = states.prev.phi_r();
    let hat_next = states.next.phi_r();
    let mut psi_hat_t = VectorField::zeros(nj, n);
    for j in 0..nj {
        let nx = hat_next.node(j);
        let pv = hat_prev.node(j);
        for (c, slot) in psi_hat_t.node_mut(j).iter_mut().enumerate() {
            *slot = (nx[c] - pv[c]) * inv_2dt;
        }
    }
    let psi_hat_r = grid.radial_derivative_odd(&psi_hat)?;
    let mut phi_u = VectorField::zeros(nj, n);
    let mut phi_v = VectorField::zeros(nj, n);
    for j in 0..nj {
        let vt = mid.phi_t.node(j);
        let vr = psi_hat.node(j);
        let u = phi_u.node_mut(j);
        for c in 0..n {
            u[c] = 0.5 * (vt[c] - vr[c]);
        }
        let v = phi_v.node_mut(j);
        for c in 0..n {
            v[c] = 0.5 * (vt[c] + vr[c]);
        }
    }
    Ok(DerivedSlice { psi_t, psi_r, psi_hat, psi_hat_t, psi_hat_r, phi_u, phi_v })
}

/// Second-order energy and its curvature sources at the middle slice.
#[derive(Debug, Clone, Copy)]
pub struct H2Report {
    /// E₁ = ½∫(|Ψ_t|²+|Ψ_r|²) r dr + ½∫(|Ψ̂_t|²+|Ψ̂_r|²+|Ψ̂/r|²) r dr.
    pub e1: f64,
    /// ∫ G₁ dr — the signed source of the Ψ-energy.
    pub g1: f64,
    /// ∫ G̃₁ dr — the signed source of the Ψ̂-energy.
    pub g1_tilde: f64,
}

/// Evaluate the second-order energy E₁ and the curvature source integrals.
///
/// The sources use the derivative of the second fundamental form along the
/// map: with (D·B′)(X,Y) the directional derivative of B at Φ in direction D,
///   G₁ = −4r⟨Ψ, (Ψ·B′)(Ψ_u, Φ_v)⟩ − 4r⟨Ψ, (Ψ·B′)(Φ_u, Ψ_v)⟩
///        + 4r⟨Ψ_t, (Ψ·B′)(Φ_u, Φ_v)⟩
/// and G̃₁ likewise with Ψ̂ in the outer slots and (Ψ̂·B′) in the last term.
pub fn h2_energy(states: &StateWindow<'_>) -> Result<H2Report> {
    let d = h2_densities(states)?;
    let grid = states.grid();
    Ok(H2Report {
        e1: grid.weighted_integral(&d.energy, 1.0)?,
        g1: grid.weighted_integral(&d.g1, 1.0)?,
        g1_tilde: grid.weighted_integral(&d.g1_tilde, 1.0)?,
    })
}

/// Per-node densities behind [`h2_energy`], before the r-weighted
/// integration: the pointwise source profiles are r·g1 and r·g1_tilde.
pub(crate) struct H2Densities {
    pub(crate) energy: Vec<f64>,
    pub(crate) g1: Vec<f64>,
    pub(crate) g1_tilde: Vec<f64>,
}

pub(crate) fn h2_densities(states: &StateWindow<'_>) -> Result<H2Densities> {
    let grid = states.grid();
    let mid = states.mid;
    let d = derived_slice(states)?;
    let nj = grid.len();
    let n = mid.phi.comps();
    let mut energy_density = vec![0.0; nj];
    let mut g1_density = vec![0.0; nj];
    let mut g1_tilde_density = vec![0.0; nj];
    let mut psi_u = vec![0.0; n];
    let mut psi_v = vec![0.0; n];
    let mut hat_u = vec![0.0; n];
    let mut hat_v = vec![0.0; n];
    for j in 0..nj {
        let r = grid.node(j);
        let hat = d.psi_hat.node(j);
        energy_density[j] = 0.5
            * (dot(d.psi_t.node(j), d.psi_t.node(j))
                + dot(d.psi_r.node(j), d.psi_r.node(j))
                + dot(d.psi_hat_t.node(j), d.psi_hat_t.node(j))
                + dot(d.psi_hat_r.node(j), d.psi_hat_r.node(j))
                + dot(hat, hat) / (r * r));
        let p = mid.phi.node(j);
        let psi = mid.phi_t.node(j);
        let pt = d.psi_t.node(j);
        let pr = d.psi_r.node(j);
        let ht = d.psi_hat_t.node(j);
        let hr = d.psi_hat_r.node(j);
        for c in 0..n {
            psi_u[c] = 0.5 * (pt[c] - pr[c]);
            psi_v[c] = 0.5 * (pt[c] + pr[c]);
            hat_u[c] = 0.5 * (ht[c] - hr[c]);
            hat_v[c] = 0.5 * (ht[c] + hr[c]);
        }
        let fu = d.phi_u.node(j);
        let fv = d.phi_v.node(j);
        let b1 = mid.target.b_derivative(p, psi, &psi_u, fv)?;
        let b2 = mid.target.b_derivative(p, psi, fu, &psi_v)?;
        let b3 = mid.target.b_derivative(p, psi, fu, fv)?;
        g1_density[j] = -4.0 * dot(psi, &b1) - 4.0 * dot(psi, &b2) + 4.0 * dot(pt, &b3);
        let c1 = mid.target.b_derivative(p, psi, &hat_u, fv)?;
        let c2 = mid.target.b_derivative(p, psi, fu, &hat_v)?;
        let c3 = mid.target.b_derivative(p, hat, fu, fv)?;
        g1_tilde_density[j] = -4.0 * dot(hat, &c1) - 4.0 * dot(hat, &c2) + 4.0 * dot(ht, &c3);
    }
    Ok(H2Densities { energy: energy_density, g1: g1_density, g1_tilde: g1_tilde_density })
}

/// Instantaneous spatial integrals of the nonnegative nonlinear densities;
/// a caller accumulates them in time (× dt) into space-time integrals.
#[derive(Debug, Clone, Copy, Default)]
pub struct SliceIntegrals {
    /// 4∫ |Ψ| (|(Ψ·B′)(Ψ_u,Φ_v)| + |(Ψ·B′)(Φ_u,Ψ_v)|) r dr — term-wise
    /// majorant of the first two pieces of the Ψ-energy source; vanishes
    /// identically on a flat target.
    pub g1: f64,
    /// 4∫ |Ψ_t| |(Ψ·B′)(Φ_u,Φ_v)| r dr — majorant of the remaining piece.
    pub g2: f64,
    /// ∫ r^{2−β} (|Ψ_u|²|Φ_v|² + |Φ_u|²|Ψ_v|²) dr.
    pub bilinear: f64,
    /// ∫ r^{3β} |Φ_u|²|Φ_v|² dr.
    pub quartic: f64,
}

pub fn nonlinear_integrals(
    states: &StateWindow<'_>,
    params: &EstimateParams,
) -> Result<SliceIntegrals> {
    params.validate()?;
    let grid = states.grid();
    let mid = states.mid;
    let d = derived_slice(states)?;
    let nj = grid.len();
    let n = mid.phi.comps();
    let mut g1 = vec![0.0; nj];
    let mut g2 = vec![0.0; nj];
    let mut bilinear = vec![0.0; nj];
    let mut quartic = vec![0.0; nj];
    let mut psi_u = vec![0.0; n];
    let mut psi_v = vec![0.0; n];
    for j in 0..nj {
        let p = mid.phi.node(j);
        let psi = mid.phi_t.node(j);
        let pt = d.psi_t.node(j);
        let pr = d.psi_r.node(j);
        for c in 0..n {
            psi_u[c] = 0.5 * (pt[c] - pr[c]);
            psi_v[c] = 0.5 * (pt[c] + pr[c]);
        }
        let psi_n = mid.phi_t.node_norm(j);
        let psi_t_n = dot(pt, pt).sqrt();
        let pu = dot(&psi_u, &psi_u).sqrt();
        let pv = dot(&psi_v, &psi_v).sqrt();
        let fu = d.phi_u.node(j);
        let fv = d.phi_v.node(j);
        let fu_n = dot(fu, fu).sqrt();
        let fv_n = dot(fv, fv).sqrt();
        let b1 = mid.target.b_derivative(p, psi, &psi_u, fv)?;
        let b2 = mid.target.b_derivative(p, psi, fu, &psi_v)?;
        let b3 = mid.target.b_derivative(p, psi, fu, fv)?;
        g1[j] = 4.0 * psi_n * (norm(&b1) + norm(&b2));
        g2[j] = 4.0 * psi_t_n * norm(&b3);
        bilinear[j] = pu * pu * fv_n * fv_n + fu_n * fu_n * pv * pv;
        quartic[j] = fu_n * fu_n * fv_n * fv_n;
    }
    Ok(SliceIntegrals {
        g1: grid.weighted_integral(&g1, 1.0)?,
        g2: grid.weighted_integral(&g2, 1.0)?,
        bilinear: grid.weighted_integral(&bilinear, 2.0 - params.beta)?,
        quartic: grid.weighted_integral(&quartic, 3.0 * params.beta)?,
    })
}

/// Midpoint-in-value, exact-in-weight quadrature: Σ_j f(r_j) ∫_cell r^w dr.
/// Matches plain midpoint for w ∈ {0, 1} and stays second-order accurate for
/// fractional w where the plain rule degrades near the axis.
fn moment_integral(grid: &RadialGrid, f: &[f64], w: f64) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::FieldLengthMismatch { expected: grid.len(), got: f.len() });
    }
    if !(w > -1.0) {
        return Err(Error::NonIntegrableWeight { weight: w });
    }
    let dr = grid.dr();
    let scale = dr.powf(1.0 + w) / (1.0 + w);
    let mut acc = 0.0;
    for (j, &val) in f.iter().enumerate() {
        let moment = if j == 0 {
            scale
        } else {
            let jf = j as f64;
            // (j+1)^{1+w} − j^{1+w} without cancellation.
            scale * jf.powf(1.0 + w) * ((1.0 + w) * (1.0 / jf).ln_1p()).exp_m1()
        };
        acc += val * moment;
    }
    Ok(acc)
}

/// Both sides of the weighted interpolation inequality
/// ∫r^β Ψ⁴ dr ≤ C (∫r^{−β}Ψ² dr)(∫rΨ² dr)^β (∫rΨ_r² dr)^{1−β}.
#[derive(Debug, Clone, Copy)]
pub struct SobolevHardy {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs/rhs; `None` when the profile vanishes (both sides zero).
    pub ratio: Option<f64>,
}

pub fn sobolev_hardy(grid: &RadialGrid, psi: &[f64], beta: f64) -> Result<SobolevHardy> {
    if !(0.1..=0.25).contains(&beta) {
        return Err(Error::BadParams { reason: format!("beta = {beta} outside [0.1, 0.25]") });
    }
    if psi.len() != grid.len() {
        return Err(Error::FieldLengthMismatch { expected: grid.len(), got: psi.len() });
    }
    let psi_r = grid.derivative_profile(psi)?;
    let quartic: Vec<f64> = psi.iter().map(|v| v.powi(4)).collect();
    let square: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let slope_sq: Vec<f64> = psi_r.iter().map(|v| v * v).collect();
    let lhs = moment_integral(grid, &quartic, beta)?;
    let b1 = moment_integral(grid, &square, -beta)?;
    let b2 = moment_integral(grid, &square, 1.0)?;
    let b3 = moment_integral(grid, &slope_sq, 1.0)?;
    let rhs = b1 * b2.powf(beta) * b3.powf(1.0 - beta);
    if rhs == 0.0 {
        if lhs.abs() > 0.0 {
            return Err(Error::DegenerateProfile {
                reason: "zero right-hand side with nonzero quartic integral".into(),
            });
        }
        return Ok(SobolevHardy { lhs: 0.0, rhs: 0.0, ratio: None });
    }
    Ok(SobolevHardy { lhs, rhs, ratio: Some(lhs / rhs) })
}
