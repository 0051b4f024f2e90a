//! Discrete characteristic-flux fields and the transport bounds they obey.
//!
//! A [`DivCurlField`] holds two pairs of nonnegative flux densities
//! (F¹¹, F¹²) and (F²¹, F²²) with sources (G¹, G²) on a square lattice in
//! (t, r), t = m·h, r = j·h. The pairs satisfy discrete transport identities
//! along the null directions u = t − r, v = t + r,
//!
//!   ∂_u F¹¹ + ∂_v F¹² = G¹,      ∂_u F²¹ − ∂_v F²² = G²,
//!
//! together with the axis conditions F¹¹ = F¹² and F²¹ = F²² = 0 at r = 0.
//! [`flux_bounds`] measures the largest characteristic line integral of each
//! flux against the data-slice integrals plus the absolute source integral;
//! [`bilinear_bound`] measures the space-time integral of the cross products
//! F¹¹F²² + F¹²F²¹ against the product of those two right-hand sides.
//!
//! Fields come from two constructors: [`synthesize_field`] builds random
//! band-limited fields whose sources are defined by the discrete operators
//! themselves (zero transport residual by construction), and
//! [`fields_from_solution`] extracts the flux pairs of an evolved wave map —
//! r(∂_vΨ)², r(∂_uΨ)² for the differentiated field Ψ = Φ_t, and the null
//! energy packages P± of the weighted balance law — resampled from the
//! cell-centered solver grid onto the lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimates::{
    derived_slice, h2_densities, null_balance_fields, null_balance_source, EstimateParams,
    QZeroTerms,
};
use crate::gauge::{FrameWindow, GaugeFrame};
use crate::solver::{FieldState, StateWindow};

/// Two pairs of nonnegative flux densities with their transport sources on a
/// uniform (t, r) lattice with equal steps in both directions.
///
/// Arrays are row-major over time levels: entry (m, j) lives at index
/// `m * cols + j` and represents the point (t, r) = (m·h, j·h).
#[derive(Debug, Clone, PartialEq)]
pub struct DivCurlField {
    /// Lattice step h, equal in t and r.
    pub step: f64,
    /// Number of time levels; the horizon is (rows − 1)·h.
    pub rows: usize,
    /// Number of radial nodes; the outer radius is (cols − 1)·h.
    pub cols: usize,
    /// First flux pair: transported along u (f11) and v (f12).
    pub f11: Vec<f64>,
    pub f12: Vec<f64>,
    /// Second flux pair: transported along u (f21) and backwards along v (f22).
    pub f21: Vec<f64>,
    pub f22: Vec<f64>,
    /// Source of the first transport identity.
    pub g1: Vec<f64>,
    /// Source of the second transport identity.
    pub g2: Vec<f64>,
    /// Construction accuracy; invariant residuals are checked against this.
    pub tolerance: f64,
}

impl DivCurlField {
    /// An all-zero field on a rows × cols lattice with step h.
    pub fn zeros(rows: usize, cols: usize, step: f64) -> Result<Self> {
        if rows < 3 || cols < 3 {
            return Err(Error::BadParams {
                reason: format!(
                    "lattice must be at least 3x3 for the derivative stencils, got {rows}x{cols}"
                ),
            });
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::BadParams { reason: format!("lattice step {step} must be positive") });
        }
        let n = rows * cols;
        Ok(DivCurlField {
            step,
            rows,
            cols,
            f11: vec![0.0; n],
            f12: vec![0.0; n],
            f21: vec![0.0; n],
            f22: vec![0.0; n],
            g1: vec![0.0; n],
            g2: vec![0.0; n],
            tolerance: 1e-12,
        })
    }

    /// Time extent of the lattice.
    pub fn horizon(&self) -> f64 {
        (self.rows - 1) as f64 * self.step
    }

    /// Outer radius of the lattice.
    pub fn radius(&self) -> f64 {
        (self.cols - 1) as f64 * self.step
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.rows * self.cols;
        for (name, arr) in [
            ("f11", &self.f11),
            ("f12", &self.f12),
            ("f21", &self.f21),
            ("f22", &self.f22),
            ("g1", &self.g1),
            ("g2", &self.g2),
        ] {
            if arr.len() != n {
                return Err(Error::InvariantViolation {
                    reason: format!("array {name} has {} entries, lattice needs {n}", arr.len()),
                });
            }
        }
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::InvariantViolation {
                reason: format!("lattice {}x{} too small for stencils", self.rows, self.cols),
            });
        }
        Ok(())
    }

    /// Measure every structural invariant; does not pass judgement.
    pub fn invariant_report(&self) -> Result<InvariantReport> {
        self.check_shape()?;
        let mut negativity = 0.0_f64;
        for arr in [&self.f11, &self.f12, &self.f21, &self.f22] {
            for &x in arr.iter() {
                negativity = negativity.max(-x);
            }
        }
        let mut axis_first = 0.0_f64;
        let mut axis_second = 0.0_f64;
        for m in 0..self.rows {
            let i = m * self.cols;
            axis_first = axis_first.max((self.f11[i] - self.f12[i]).abs());
            axis_second = axis_second.max((self.f21[i] + self.f22[i]).abs());
        }
        let (r1, r2) = transport_residuals(self);
        Ok(InvariantReport {
            negativity,
            axis_first,
            axis_second,
            transport_first: r1,
            transport_second: r2,
        })
    }

    /// Check every invariant against the field's construction tolerance.
    pub fn verify(&self) -> Result<()> {
        let report = self.invariant_report()?;
        let worst = report.max_residual();
        if worst > self.tolerance {
            return Err(Error::InvariantViolation {
                reason: format!(
                    "residual {worst:.3e} exceeds tolerance {:.3e} ({report:?})",
                    self.tolerance
                ),
            });
        }
        Ok(())
    }

    /// Scale all fluxes by c and both sources accordingly (the transport
    /// identities are linear). Ratios of the flux bounds are invariant.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for arr in
            [&mut out.f11, &mut out.f12, &mut out.f21, &mut out.f22, &mut out.g1, &mut out.g2]
        {
            for x in arr.iter_mut() {
                *x *= c;
            }
        }
        out.tolerance = self.tolerance * c.abs().max(1.0);
        out
    }
}

/// Worst-case residual of each structural invariant of a [`DivCurlField`].
#[derive(Debug, Clone, Copy)]
pub struct InvariantReport {
    /// Magnitude of the most negative flux entry (0 when all are ≥ 0).
    pub negativity: f64,
    /// max |F¹¹ − F¹²| along the axis column r = 0.
    pub axis_first: f64,
    /// max |F²¹ + F²²| along the axis column r = 0.
    pub axis_second: f64,
    /// max |∂_u F¹¹ + ∂_v F¹² − G¹| over the lattice.
    pub transport_first: f64,
    /// max |∂_u F²¹ − ∂_v F²² − G²| over the lattice.
    pub transport_second: f64,
}

impl InvariantReport {
    /// Largest of the five residuals; the scalar reported in CSV output.
    pub fn max_residual(&self) -> f64 {
        self.negativity
            .max(self.axis_first)
            .max(self.axis_second)
            .max(self.transport_first)
            .max(self.transport_second)
    }
}

// ───────────────────────── discrete operators ─────────────────────────

/// Centered time derivative per column, one-sided second-order at the first
/// and last time level.
fn d_time(rows: usize, cols: usize, h: f64, f: &[f64]) -> Vec<f64> {
    let inv_2h = 0.5 / h;
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        out[j] = (-3.0 * f[j] + 4.0 * f[cols + j] - f[2 * cols + j]) * inv_2h;
        for m in 1..rows - 1 {
            out[m * cols + j] = (f[(m + 1) * cols + j] - f[(m - 1) * cols + j]) * inv_2h;
        }
        let last = (rows - 1) * cols + j;
        out[last] =
            (3.0 * f[last] - 4.0 * f[last - cols] + f[last - 2 * cols]) * inv_2h;
    }
    out
}

/// Centered radial derivative per row, one-sided second-order at the axis
/// and outer columns.
fn d_radius(rows: usize, cols: usize, h: f64, f: &[f64]) -> Vec<f64> {
    let inv_2h = 0.5 / h;
    let mut out = vec![0.0; rows * cols];
    for m in 0..rows {
        let row = m * cols;
        out[row] = (-3.0 * f[row] + 4.0 * f[row + 1] - f[row + 2]) * inv_2h;
        for j in 1..cols - 1 {
            out[row + j] = (f[row + j + 1] - f[row + j - 1]) * inv_2h;
        }
        out[row + cols - 1] =
            (3.0 * f[row + cols - 1] - 4.0 * f[row + cols - 2] + f[row + cols - 3]) * inv_2h;
    }
    out
}

/// Sources defined by the discrete transport operators themselves:
/// G¹ = ∂_u F¹¹ + ∂_v F¹² and G² = ∂_u F²¹ − ∂_v F²², with
/// ∂_u = (∂_t − ∂_r)/2 and ∂_v = (∂_t + ∂_r)/2.
fn closure_sources(field: &DivCurlField) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols, h) = (field.rows, field.cols, field.step);
    let dt11 = d_time(rows, cols, h, &field.f11);
    let dr11 = d_radius(rows, cols, h, &field.f11);
    let dt12 = d_time(rows, cols, h, &field.f12);
    let dr12 = d_radius(rows, cols, h, &field.f12);
    let dt21 = d_time(rows, cols, h, &field.f21);
    let dr21 = d_radius(rows, cols, h, &field.f21);
    let dt22 = d_time(rows, cols, h, &field.f22);
    let dr22 = d_radius(rows, cols, h, &field.f22);
    let n = rows * cols;
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for i in 0..n {
        g1[i] = 0.5 * (dt11[i] - dr11[i]) + 0.5 * (dt12[i] + dr12[i]);
        g2[i] = 0.5 * (dt21[i] - dr21[i]) - 0.5 * (dt22[i] + dr22[i]);
    }
    (g1, g2)
}

/// Max-norm defects of the two discrete transport identities.
fn transport_residuals(field: &DivCurlField) -> (f64, f64) {
    let (g1, g2) = closure_sources(field);
    let mut r1 = 0.0_f64;
    let mut r2 = 0.0_f64;
    for i in 0..g1.len() {
        r1 = r1.max((g1[i] - field.g1[i]).abs());
        r2 = r2.max((g2[i] - field.g2[i]).abs());
    }
    (r1, r2)
}

// ───────────────────────── quadrature ─────────────────────────

/// Trapezoid weight for position i on a segment of n nodes (0 for a single
/// node: a degenerate segment has no extent).
fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 || i == n - 1 {
        0.5
    } else {
        1.0
    }
}

/// Largest integral of f along the constant-u diagonals, ∫ f dv with
/// dv = 2h between adjacent diagonal nodes.
fn sup_constant_u(field: &DivCurlField, f: &[f64]) -> f64 {
    let (rows, cols) = (field.rows, field.cols);
    let mut sup = 0.0_f64;
    for d in -(cols as isize - 1)..=(rows as isize - 1) {
        let j_lo = (-d).max(0) as usize;
        let j_hi = (cols - 1).min((rows as isize - 1 - d) as usize);
        if j_hi < j_lo {
            continue;
        }
        let n = j_hi - j_lo + 1;
        let mut acc = 0.0;
        for (i, j) in (j_lo..=j_hi).enumerate() {
            let m = (d + j as isize) as usize;
            acc += trapezoid_weight(i, n) * f[m * cols + j];
        }
        sup = sup.max(acc * 2.0 * field.step);
    }
    sup
}

/// Largest integral of f along the constant-v anti-diagonals, ∫ f du with
/// du = 2h between adjacent anti-diagonal nodes.
fn sup_constant_v(field: &DivCurlField, f: &[f64]) -> f64 {
    let (rows, cols) = (field.rows, field.cols);
    let mut sup = 0.0_f64;
    for s in 0..=(rows + cols - 2) {
        let m_lo = s.saturating_sub(cols - 1);
        let m_hi = (rows - 1).min(s);
        if m_hi < m_lo {
            continue;
        }
        let n = m_hi - m_lo + 1;
        let mut acc = 0.0;
        for (i, m) in (m_lo..=m_hi).enumerate() {
            let j = s - m;
            acc += trapezoid_weight(i, n) * f[m * cols + j];
        }
        sup = sup.max(acc * 2.0 * field.step);
    }
    sup
}

/// ∫ (f + g)(t_m, r) dr along one time level.
fn slice_integral(field: &DivCurlField, m: usize, f: &[f64], g: &[f64]) -> f64 {
    let cols = field.cols;
    let row = m * cols;
    let mut acc = 0.0;
    for j in 0..cols {
        acc += trapezoid_weight(j, cols) * (f[row + j] + g[row + j]);
    }
    acc * field.step
}

/// ∫∫ |f| dr dt over the whole lattice (tensor trapezoid).
fn spacetime_abs_integral(field: &DivCurlField, f: &[f64]) -> f64 {
    let (rows, cols) = (field.rows, field.cols);
    let mut acc = 0.0;
    for m in 0..rows {
        let wm = trapezoid_weight(m, rows);
        let row = m * cols;
        for j in 0..cols {
            acc += wm * trapezoid_weight(j, cols) * f[row + j].abs();
        }
    }
    acc * field.step * field.step
}

/// ∫∫ (F¹¹F²² + F¹²F²¹) dr dt over the whole lattice.
fn spacetime_cross_integral(field: &DivCurlField) -> f64 {
    let (rows, cols) = (field.rows, field.cols);
    let mut acc = 0.0;
    for m in 0..rows {
        let wm = trapezoid_weight(m, rows);
        let row = m * cols;
        for j in 0..cols {
            let i = row + j;
            acc += wm
                * trapezoid_weight(j, cols)
                * (field.f11[i] * field.f22[i] + field.f12[i] * field.f21[i]);
        }
    }
    acc * field.step * field.step
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Right-hand side of the first flux bound: initial-slice integral of
/// F¹¹ + F¹² plus the absolute source integral.
fn first_rhs(field: &DivCurlField) -> f64 {
    slice_integral(field, 0, &field.f11, &field.f12) + spacetime_abs_integral(field, &field.g1)
}

/// Right-hand side of the second flux bound: initial- and final-slice
/// integrals of F²¹ + F²² plus the absolute source integral.
fn second_rhs(field: &DivCurlField) -> f64 {
    slice_integral(field, 0, &field.f21, &field.f22)
        + slice_integral(field, field.rows - 1, &field.f21, &field.f22)
        + spacetime_abs_integral(field, &field.g2)
}

// ───────────────────────── bounds ─────────────────────────

/// Characteristic flux bounds for both pairs.
///
/// `lhs` is the largest characteristic line integral over both members of a
/// pair (fixed-u integrals of the u-transported flux and fixed-v integrals
/// of the v-transported one); `rhs` combines the data-slice integrals with
/// the absolute source integral. Ratios follow the convention 0/0 = 0 and
/// x/0 = ∞ for x > 0.
#[derive(Debug, Clone, Copy)]
pub struct FluxBounds {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub ratio1: f64,
    pub ratio2: f64,
}

/// Measure both characteristic flux bounds. Fails with `InvariantViolation`
/// if the field's structural invariants exceed its tolerance.
pub fn flux_bounds(field: &DivCurlField) -> Result<FluxBounds> {
    field.verify()?;
    let lhs1 = sup_constant_u(field, &field.f11).max(sup_constant_v(field, &field.f12));
    let rhs1 = first_rhs(field);
    let lhs2 = sup_constant_u(field, &field.f21).max(sup_constant_v(field, &field.f22));
    let rhs2 = second_rhs(field);
    Ok(FluxBounds {
        lhs1,
        rhs1,
        lhs2,
        rhs2,
        ratio1: ratio_of(lhs1, rhs1),
        ratio2: ratio_of(lhs2, rhs2),
    })
}

/// The bilinear space-time bound: cross products of the two flux pairs
/// against the product of the two flux-bound right-hand sides.
#[derive(Debug, Clone, Copy)]
pub struct BilinearBound {
    /// ∫∫ (F¹¹F²² + F¹²F²¹) dr dt.
    pub lhs: f64,
    /// Product of the two flux-bound right-hand sides.
    pub rhs: f64,
    pub ratio: f64,
}

/// Measure the bilinear bound. Fails with `InvariantViolation` if the
/// field's structural invariants exceed its tolerance.
pub fn bilinear_bound(field: &DivCurlField) -> Result<BilinearBound> {
    field.verify()?;
    let lhs = spacetime_cross_integral(field);
    let rhs = first_rhs(field) * second_rhs(field);
    Ok(BilinearBound { lhs, rhs, ratio: ratio_of(lhs, rhs) })
}

// ───────────────────────── synthetic fields ─────────────────────────

/// A random band-limited smooth function on [0, T] × [0, R]: a cosine series
/// in both directions with coefficients damped by the mode order.
struct RandomSurface {
    coefs: Vec<f64>,
    modes: usize,
    horizon: f64,
    radius: f64,
}

impl RandomSurface {
    fn draw(rng: &mut ChaCha8Rng, modes: usize, horizon: f64, radius: f64) -> Self {
        let coefs = (0..modes * modes)
            .map(|i| {
                let (k, l) = (i / modes, i % modes);
                rng.gen_range(-1.0..1.0) / (1.0 + (k * k + l * l) as f64)
            })
            .collect();
        RandomSurface { coefs, modes, horizon, radius }
    }

    fn eval(&self, t: f64, r: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.modes {
            let ct = (k as f64 * std::f64::consts::PI * t / self.horizon).cos();
            for l in 0..self.modes {
                let cr = (l as f64 * std::f64::consts::PI * r / self.radius).cos();
                acc += self.coefs[k * self.modes + l] * ct * cr;
            }
        }
        acc
    }
}

/// Build a random smooth field satisfying all structural invariants exactly:
/// fluxes are squares of band-limited functions arranged to share a trace at
/// the axis (first pair) or vanish there (second pair), and the sources are
/// defined by evaluating the discrete transport operators, so the transport
/// residual is zero by construction. Deterministic per seed; `modes = 0`
/// yields the zero field.
pub fn synthesize_field(seed: u64, cells: usize, modes: usize) -> Result<DivCurlField> {
    if cells < 4 {
        return Err(Error::BadParams {
            reason: format!("synthetic lattice needs at least 4 cells, got {cells}"),
        });
    }
    let horizon = 1.0;
    let h = horizon / cells as f64;
    let rows = cells + 1;
    let cols = cells + 1;
    let radius = (cols - 1) as f64 * h;
    let mut field = DivCurlField::zeros(rows, cols, h)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Shared axis trace of the first pair.
    let trace: Vec<f64> =
        (0..modes).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + (k * k) as f64)).collect();
    let a1 = RandomSurface::draw(&mut rng, modes, horizon, radius);
    let b1 = RandomSurface::draw(&mut rng, modes, horizon, radius);
    let c1 = RandomSurface::draw(&mut rng, modes, horizon, radius);
    let d1 = RandomSurface::draw(&mut rng, modes, horizon, radius);

    let trace_at = |t: f64| -> f64 {
        trace
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 * std::f64::consts::PI * t / horizon).cos())
            .sum()
    };
    // Envelope pinning the trace at the axis and fading it out by the outer
    // edge; the interior envelope vanishes at both radial ends.
    let axis_envelope = |r: f64| -> f64 {
        let x = 0.5 * std::f64::consts::PI * r / radius;
        x.cos() * x.cos()
    };
    let interior_envelope = |r: f64| -> f64 { (std::f64::consts::PI * r / radius).sin() };

    for m in 0..rows {
        let t = m as f64 * h;
        let s = trace_at(t);
        for j in 0..cols {
            let r = j as f64 * h;
            let env = interior_envelope(r);
            let shared = s * axis_envelope(r);
            let va = shared + env * a1.eval(t, r);
            let vb = shared + env * b1.eval(t, r);
            let vc = env * c1.eval(t, r);
            let vd = env * d1.eval(t, r);
            let i = m * cols + j;
            field.f11[i] = va * va;
            field.f12[i] = vb * vb;
            field.f21[i] = vc * vc;
            field.f22[i] = vd * vd;
        }
    }
    let (g1, g2) = closure_sources(&field);
    field.g1 = g1;
    field.g2 = g2;
    field.tolerance = 1e-12;
    Ok(field)
}

/// One fully evaluated synthetic trial: the work unit of the randomized
/// corpus. Pure and deterministic per seed.
#[derive(Debug, Clone, Copy)]
pub struct CorpusRow {
    pub seed: u64,
    pub flux: FluxBounds,
    pub bilinear: BilinearBound,
    /// Largest structural invariant residual of the generated field.
    pub invariant_residual: f64,
}

/// Synthesize one field and evaluate both bounds on it.
pub fn corpus_row(seed: u64, cells: usize, modes: usize) -> Result<CorpusRow> {
    let field = synthesize_field(seed, cells, modes)?;
    let report = field.invariant_report()?;
    let flux = flux_bounds(&field)?;
    let bilinear = bilinear_bound(&field)?;
    Ok(CorpusRow { seed, flux, bilinear, invariant_residual: report.max_residual() })
}

// ───────────────────────── solution-derived fields ─────────────────────────

/// Linear interpolation of saved states onto a uniform time ladder with step
/// h, starting at the first save. Slices that land on a save (within 1e-9·h)
/// are copied; others blend the two bracketing saves. Used to align solver
/// output with the characteristic lattice when the save cadence differs
/// from the radial step.
pub fn resample_uniform(states: &[FieldState], h: f64) -> Result<Vec<FieldState>> {
    if states.len() < 2 {
        return Err(Error::BadParams {
            reason: format!("resampling needs at least 2 saved states, got {}", states.len()),
        });
    }
    if !(h > 0.0) {
        return Err(Error::BadParams { reason: format!("resampling step {h} must be positive") });
    }
    let t0 = states[0].t;
    let t_end = states[states.len() - 1].t;
    let count = ((t_end - t0) / h + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut hi = 1usize;
    for m in 0..count {
        let t = t0 + m as f64 * h;
        while hi + 1 < states.len() && states[hi].t < t - 1e-9 * h {
            hi += 1;
        }
        let (a, b) = (&states[hi - 1], &states[hi]);
        let span = b.t - a.t;
        let w = ((t - a.t) / span).clamp(0.0, 1.0);
        if w < 1e-9 {
            out.push(a.clone());
        } else if w > 1.0 - 1e-9 {
            out.push(b.clone());
        } else {
            let mut s = a.clone();
            s.t = t;
            for i in 0..s.phi.as_slice().len() {
                s.phi.as_mut_slice()[i] =
                    (1.0 - w) * a.phi.as_slice()[i] + w * b.phi.as_slice()[i];
                s.phi_t.as_mut_slice()[i] =
                    (1.0 - w) * a.phi_t.as_slice()[i] + w * b.phi_t.as_slice()[i];
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Average the cell-centered solver profile onto the node-centered lattice
/// column: lattice node j·h sits midway between solver cells j−1 and j.
/// The axis node takes `axis` (the even/odd limit or a regularized value).
fn resample_profile(dest: &mut [f64], profile: &[f64], axis: f64) {
    dest[0] = axis;
    for j in 1..dest.len() {
        dest[j] = 0.5 * (profile[j - 1] + profile[j]);
    }
}

/// Extract the two characteristic flux pairs of an evolved wave map.
///
/// The first pair is r(∂_vΨ)², r(∂_uΨ)² for Ψ = Φ_t, with source twice the
/// curvature source of the second-order energy identity. The second pair is
/// the null energy packaging (P₊, P₋) of the weighted balance law at
/// exponent e = β, with source −G_e. With `QZeroTerms::Dropped` the second
/// pair reduces to the square floors 2r^{1−β}|Φ_v|², 2r^{1−β}|Φ_u|² and its
/// source is closed discretely (zero transport residual by construction).
///
/// `states` must be uniformly spaced in time with spacing equal to the grid
/// step (use [`resample_uniform`] first if the save cadence differs), and
/// `frames` must hold a gauge frame per state. The lattice covers the
/// interior slices (centered time differences need both neighbours).
pub fn fields_from_solution(
    states: &[FieldState],
    frames: &[GaugeFrame],
    params: &EstimateParams,
    qzero: QZeroTerms,
) -> Result<DivCurlField> {
    params.validate()?;
    if states.len() < 5 {
        return Err(Error::BadParams {
            reason: format!("need at least 5 uniformly spaced states, got {}", states.len()),
        });
    }
    if frames.len() != states.len() {
        return Err(Error::FrameMismatch {
            reason: format!("{} frames for {} states", frames.len(), states.len()),
        });
    }
    let grid = &states[0].grid;
    let h = grid.dr();
    for pair in states.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if (dt - h).abs() > 1e-9 * h {
            return Err(Error::BadParams {
                reason: format!(
                    "slice spacing {dt:.6e} must equal the radial step {h:.6e}; resample first"
                ),
            });
        }
    }
    let rows = states.len() - 2;
    let cols = grid.len();
    let mut field = DivCurlField::zeros(rows, cols, h)?;
    let nj = grid.len();
    let mut p11 = vec![0.0; nj];
    let mut p12 = vec![0.0; nj];
    for i in 1..states.len() - 1 {
        let m = i - 1;
        let sw = StateWindow::new(&states[i - 1], &states[i], &states[i + 1])?;
        let fw = FrameWindow::new(&frames[i - 1], &frames[i], &frames[i + 1])?;
        fw.matches(&sw)?;
        let d = derived_slice(&sw)?;
        let n = states[i].phi.comps();
        for j in 0..nj {
            let r = grid.node(j);
            let pt = d.psi_t.node(j);
            let pr = d.psi_r.node(j);
            let (mut uu, mut vv) = (0.0, 0.0);
            for c in 0..n {
                let du = 0.5 * (pt[c] - pr[c]);
                let dv = 0.5 * (pt[c] + pr[c]);
                uu += du * du;
                vv += dv * dv;
            }
            p11[j] = r * vv;
            p12[j] = r * uu;
        }
        let dens = h2_densities(&sw)?;
        let g1_prof: Vec<f64> =
            (0..nj).map(|j| 2.0 * grid.node(j) * dens.g1[j]).collect();
        let nb = null_balance_fields(&frames[i], params.beta, params.sigma, qzero)?;
        let g2_prof: Vec<f64> = null_balance_source(&sw, &fw, params.beta, params.sigma)?
            .iter()
            .map(|g| -g)
            .collect();

        let row = m * cols;
        resample_profile(&mut field.f11[row..row + cols], &p11, 0.0);
        resample_profile(&mut field.f12[row..row + cols], &p12, 0.0);
        resample_profile(&mut field.f21[row..row + cols], &nb.p_plus, 0.0);
        resample_profile(&mut field.f22[row..row + cols], &nb.p_minus, 0.0);
        resample_profile(&mut field.g1[row..row + cols], &g1_prof, 0.0);
        resample_profile(&mut field.g2[row..row + cols], &g2_prof, g2_prof[0]);
    }

    // The flux entries must be nonnegative: squares are, and the null
    // packages dominate their square floors for e ≥ σ up to roundoff in the
    // cumulative integrals. Anything beyond that margin is a real failure.
    let mut scale = 0.0_f64;
    for arr in [&field.f11, &field.f12, &field.f21, &field.f22] {
        for &x in arr.iter() {
            scale = scale.max(x.abs());
        }
    }
    let margin = 1e-10 * scale.max(1e-300);
    for (name, arr) in [
        ("f11", &field.f11),
        ("f12", &field.f12),
        ("f21", &field.f21),
        ("f22", &field.f22),
    ] {
        for (i, &x) in arr.iter().enumerate() {
            if x < -margin {
                return Err(Error::NegativeFlux {
                    which: name,
                    it: i / cols,
                    ir: i % cols,
                    value: x,
                });
            }
        }
    }

    if qzero == QZeroTerms::Dropped {
        let (_, g2) = closure_sources(&field);
        field.g2 = g2;
    }

    // The sources of a solution-derived field are continuum balance-law
    // densities, so the transport identities hold up to discretization
    // error; record the achieved residual as the field's own tolerance.
    let report = field.invariant_report()?;
    field.tolerance = (2.0 * report.max_residual()).max(1e-10);
    Ok(field)
}
