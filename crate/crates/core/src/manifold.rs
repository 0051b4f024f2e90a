//! Embedded target manifolds: the unit sphere, the Clifford torus, and flat
//! Euclidean space.
//!
//! Everything the solver and the gauge/estimate machinery needs from the
//! target is expressed through a handful of pointwise operations: closest
//! point projection, tangent projection, the second fundamental form B, its
//! directional derivative, and the Gauss-equation curvature contraction.
//! All formulas here are analytic; finite-difference oracles for them live
//! in the tests.

use crate::error::{Error, Result};
use crate::field::{axpy, dot, norm, normalize, scale};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Maximum constraint residual for a point to count as "on the manifold".
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

/// Maximum relative normal component for a vector to count as tangent.
pub const TANGENT_TOL: f64 = 1e-6;

/// Norm below which closest-point projection is declared singular.
const SINGULAR_TOL: f64 = 1e-9;

/// Factor radius of the Clifford torus: each circle has radius 1/√2.
const TORUS_FACTOR_RADIUS_SQ: f64 = 0.5;

/// Which target manifold the map lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Unit sphere S^{n-1} in ℝ^n.
    UnitSphere,
    /// Product of two circles of radius 1/√2 in ℝ⁴.
    CliffordTorus,
    /// All of ℝ^n; the second fundamental form vanishes.
    Flat,
}

/// An embedded target manifold N ⊂ ℝ^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetManifold {
    kind: TargetKind,
    ambient_dim: usize,
}

/// Sampled suprema of the geometric bounds (|B|, |∇B|, |∇ frame|).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// sup |B(X,Y)| / (|X||Y|) over sampled points and tangent pairs.
    pub sup_b_ratio: f64,
    /// Finite-difference proxy for sup |∇B|, normalized by |X||Y||V|.
    pub sup_db_ratio: f64,
    /// sup |∇ē| for targets with a global tangent frame; `None` otherwise.
    pub sup_dframe: Option<f64>,
}

impl TargetManifold {
    /// Unit sphere S^{n-1} ⊂ ℝ^n (n ≥ 2).
    pub fn unit_sphere(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: ambient_dim });
        }
        Ok(TargetManifold { kind: TargetKind::UnitSphere, ambient_dim })
    }

    /// Clifford torus S¹(1/√2) × S¹(1/√2) ⊂ ℝ⁴.
    pub fn clifford_torus() -> Self {
        TargetManifold { kind: TargetKind::CliffordTorus, ambient_dim: 4 }
    }

    /// Flat target ℝ^n (n ≥ 1).
    pub fn flat(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: ambient_dim });
        }
        Ok(TargetManifold { kind: TargetKind::Flat, ambient_dim })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// Dimension n of the ambient space ℝ^n.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Intrinsic dimension k of the manifold.
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            TargetKind::UnitSphere => self.ambient_dim - 1,
            TargetKind::CliffordTorus => 2,
            TargetKind::Flat => self.ambient_dim,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: v.len() });
        }
        Ok(())
    }

    /// Distance-like residual of the defining constraints at `p`
    /// (0 exactly on the manifold).
    pub fn constraint_residual(&self, p: &[f64]) -> f64 {
        match self.kind {
            TargetKind::UnitSphere => (norm(p) - 1.0).abs(),
            TargetKind::CliffordTorus => {
                let a = TORUS_FACTOR_RADIUS_SQ.sqrt();
                let r1 = (norm(&p[0..2]) - a).abs();
                let r2 = (norm(&p[2..4]) - a).abs();
                r1.max(r2)
            }
            TargetKind::Flat => 0.0,
        }
    }

    /// Closest-point projection onto the manifold.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let mut out = p.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub(crate) fn project_in_place(&self, p: &mut [f64]) -> Result<()> {
        match self.kind {
            TargetKind::UnitSphere => {
                let n = norm(p);
                if n < SINGULAR_TOL {
                    return Err(Error::SingularProjection { dist: n });
                }
                scale(1.0 / n, p);
            }
            TargetKind::CliffordTorus => {
                let a = TORUS_FACTOR_RADIUS_SQ.sqrt();
                for f in 0..2 {
                    let fp = &mut p[2 * f..2 * f + 2];
                    let n = norm(fp);
                    if n < SINGULAR_TOL {
                        return Err(Error::SingularProjection { dist: n });
                    }
                    scale(a / n, fp);
                }
            }
            TargetKind::Flat => {}
        }
        Ok(())
    }

    /// Orthogonal projection of `x` onto the tangent space at `p`.
    ///
    /// `p` must lie on the manifold within [`ON_MANIFOLD_TOL`].
    pub fn tangent_project(&self, p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        self.check_dim(x)?;
        let residual = self.constraint_residual(p);
        if residual > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { residual, tol: ON_MANIFOLD_TOL });
        }
        let mut out = x.to_vec();
        self.tangent_project_in_place(p, &mut out);
        Ok(out)
    }

    /// Unchecked tangent projection for hot loops; `p` is trusted to lie on
    /// the manifold (the normal directions are normalized defensively).
    pub(crate) fn tangent_project_in_place(&self, p: &[f64], x: &mut [f64]) {
        match self.kind {
            TargetKind::UnitSphere => {
                let n2 = dot(p, p);
                if n2 > 0.0 {
                    let c = dot(x, p) / n2;
                    axpy(-c, p, x);
                }
            }
            TargetKind::CliffordTorus => {
                for f in 0..2 {
                    let fp = &p[2 * f..2 * f + 2];
                    let n2 = dot(fp, fp);
                    if n2 > 0.0 {
                        let c = dot(&x[2 * f..2 * f + 2], fp) / n2;
                        axpy(-c, fp, &mut x[2 * f..2 * f + 2]);
                    }
                }
            }
            TargetKind::Flat => {}
        }
    }

    /// Norm of the normal component of `x` at `p` (tangency defect).
    pub fn tangency_residual(&self, p: &[f64], x: &[f64]) -> f64 {
        let mut t = x.to_vec();
        self.tangent_project_in_place(p, &mut t);
        for (ti, xi) in t.iter_mut().zip(x) {
            *ti -= xi;
        }
        norm(&t)
    }

    /// Second fundamental form B_p(X, Y), checked.
    ///
    /// `p` must lie on the manifold and `X`, `Y` must be tangent at `p`.
    /// The result is normal to the tangent space at `p`.
    pub fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        self.check_dim(x)?;
        self.check_dim(y)?;
        let residual = self.constraint_residual(p);
        if residual > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { residual, tol: ON_MANIFOLD_TOL });
        }
        for v in [x, y] {
            let res = self.tangency_residual(p, v);
            let tol = TANGENT_TOL * norm(v).max(1.0);
            if res > tol {
                return Err(Error::NonTangent { residual: res, tol });
            }
        }
        let mut out = vec![0.0; self.ambient_dim];
        self.b_form(p, x, y, &mut out);
        Ok(out)
    }

    /// Second fundamental form without validation — the analytic formulas
    /// extend smoothly to a neighborhood of the manifold, which is what the
    /// finite-difference derivative below relies on.
    pub(crate) fn b_form(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        match self.kind {
            TargetKind::UnitSphere => {
                let c = -dot(x, y);
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = c * pi;
                }
            }
            TargetKind::CliffordTorus => {
                // Per-factor circle of radius a: B(X,Y) = -(⟨X_f,Y_f⟩/a²) p_f.
                for f in 0..2 {
                    let c = -dot(&x[2 * f..2 * f + 2], &y[2 * f..2 * f + 2])
                        / TORUS_FACTOR_RADIUS_SQ;
                    out[2 * f] = c * p[2 * f];
                    out[2 * f + 1] = c * p[2 * f + 1];
                }
            }
            TargetKind::Flat => out.fill(0.0),
        }
    }

    /// Directional derivative of the second fundamental form in the point
    /// argument: (V·B')_p(X, Y), by central finite differencing of the
    /// analytic B with X, Y held fixed.
    pub fn b_derivative(&self, p: &[f64], v: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        self.check_dim(v)?;
        self.check_dim(x)?;
        self.check_dim(y)?;
        const H: f64 = 1e-6;
        let mut plus = vec![0.0; self.ambient_dim];
        let mut minus = vec![0.0; self.ambient_dim];
        let mut pp = p.to_vec();
        axpy(H, v, &mut pp);
        self.b_form(&pp, x, y, &mut plus);
        pp.copy_from_slice(p);
        axpy(-H, v, &mut pp);
        self.b_form(&pp, x, y, &mut minus);
        for (pl, mi) in plus.iter_mut().zip(&minus) {
            *pl = (*pl - mi) / (2.0 * H);
        }
        Ok(plus)
    }

    /// Curvature contraction ⟨R(X,Y)Z, W⟩ via the Gauss equation:
    /// ⟨B(X,W), B(Y,Z)⟩ − ⟨B(X,Z), B(Y,W)⟩.
    pub fn curvature(&self, p: &[f64], x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        for a in [x, y, z, w] {
            self.check_dim(a)?;
        }
        let n = self.ambient_dim;
        let (mut bxw, mut byz, mut bxz, mut byw) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.b_form(p, x, w, &mut bxw);
        self.b_form(p, y, z, &mut byz);
        self.b_form(p, x, z, &mut bxz);
        self.b_form(p, y, w, &mut byw);
        Ok(dot(&bxw, &byz) - dot(&bxz, &byw))
    }

    /// Deterministic base point used to anchor initial data.
    pub fn base_point(&self) -> Vec<f64> {
        let n = self.ambient_dim;
        match self.kind {
            TargetKind::UnitSphere => {
                let mut p = vec![0.0; n];
                p[n - 1] = 1.0;
                p
            }
            TargetKind::CliffordTorus => {
                let a = TORUS_FACTOR_RADIUS_SQ.sqrt();
                vec![a, 0.0, a, 0.0]
            }
            TargetKind::Flat => vec![0.0; n],
        }
    }

    /// Canonical unit tangent at the base point.
    pub fn canonical_direction(&self) -> Vec<f64> {
        let n = self.ambient_dim;
        let mut d = vec![0.0; n];
        match self.kind {
            TargetKind::UnitSphere | TargetKind::Flat => d[0] = 1.0,
            TargetKind::CliffordTorus => d[1] = 1.0,
        }
        d
    }

    /// Fixed unit vector that is tangent at every point of the canonical
    /// geodesic and orthogonal to its velocity — the transverse direction
    /// used by displacement data to carry a velocity component out of the
    /// geodesic's plane. Flat ℝ¹ has no transverse direction and falls back
    /// to the canonical one.
    pub fn transverse_direction(&self) -> Vec<f64> {
        let n = self.ambient_dim;
        let mut d = vec![0.0; n];
        match self.kind {
            // Geodesic lives in span{e_n, e_1}; e_2 stays tangent to S^{n-1}
            // everywhere on that circle. The circle S¹ has no transverse
            // tangent direction.
            TargetKind::UnitSphere => d[if n > 2 { 1 } else { 0 }] = 1.0,
            // Geodesic rotates the first circle factor; the second factor's
            // angular direction at its base angle is constant.
            TargetKind::CliffordTorus => d[3] = 1.0,
            TargetKind::Flat => d[if n > 1 { 1 } else { 0 }] = 1.0,
        }
        d
    }

    /// Unit-speed geodesic from the base point along the canonical
    /// direction: returns (γ(s), γ'(s)).
    pub fn geodesic_from_base(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let p0 = self.base_point();
        let d0 = self.canonical_direction();
        match self.kind {
            TargetKind::UnitSphere => {
                let (c, sn) = (s.cos(), s.sin());
                let gamma: Vec<f64> =
                    p0.iter().zip(&d0).map(|(p, d)| c * p + sn * d).collect();
                let tangent: Vec<f64> =
                    p0.iter().zip(&d0).map(|(p, d)| -sn * p + c * d).collect();
                (gamma, tangent)
            }
            TargetKind::CliffordTorus => {
                // Rotate the first factor; angular speed 1/a = √2 gives unit speed.
                let a = TORUS_FACTOR_RADIUS_SQ.sqrt();
                let ang = s / a;
                let gamma = vec![a * ang.cos(), a * ang.sin(), a, 0.0];
                let tangent = vec![-ang.sin(), ang.cos(), 0.0, 0.0];
                (gamma, tangent)
            }
            TargetKind::Flat => {
                let gamma: Vec<f64> = p0.iter().zip(&d0).map(|(p, d)| p + s * d).collect();
                (gamma, d0)
            }
        }
    }

    /// Global orthonormal tangent frame ē(p) for parallelizable targets
    /// (torus and flat space); `None` for the sphere.
    pub fn tangent_frame_global(&self, p: &[f64]) -> Option<Vec<Vec<f64>>> {
        match self.kind {
            TargetKind::UnitSphere => None,
            TargetKind::CliffordTorus => {
                let a = TORUS_FACTOR_RADIUS_SQ.sqrt();
                Some(vec![
                    vec![-p[1] / a, p[0] / a, 0.0, 0.0],
                    vec![0.0, 0.0, -p[3] / a, p[2] / a],
                ])
            }
            TargetKind::Flat => {
                let n = self.ambient_dim;
                Some(
                    (0..n)
                        .map(|i| {
                            let mut e = vec![0.0; n];
                            e[i] = 1.0;
                            e
                        })
                        .collect(),
                )
            }
        }
    }

    /// Sample random points and tangent vectors and report the suprema of
    /// |B|, the finite-difference |∇B| proxy, and |∇ē| where a global frame
    /// exists. Deterministic for a fixed seed.
    pub fn verify_bounds(&self, samples: usize, seed: u64) -> BoundsReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.ambient_dim;
        let mut sup_b = 0.0_f64;
        let mut sup_db = 0.0_f64;
        let mut sup_dframe: Option<f64> = self.tangent_frame_global(&self.base_point()).map(|_| 0.0);
        const FD_H: f64 = 1e-4;

        let mut b = vec![0.0; n];
        for _ in 0..samples {
            let p = match self.random_point(&mut rng) {
                Some(p) => p,
                None => continue,
            };
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            for _ in 0..2 {
                if let Some(t) = self.random_tangent(&p, &mut rng) {
                    dirs.push(t);
                }
            }
            // Projected coordinate axes: deterministic directions that reach
            // the extremal diagonal ratios (pure-factor directions on the
            // torus, arbitrary tangents on the sphere).
            for i in 0..n {
                let mut axis = vec![0.0; n];
                axis[i] = 1.0;
                self.tangent_project_in_place(&p, &mut axis);
                if normalize(&mut axis) > 1e-8 {
                    dirs.push(axis);
                }
            }
            if dirs.is_empty() {
                continue;
            }
            // |B| over sampled pairs, always including the diagonals.
            let mut pairs: Vec<(usize, usize)> = (0..dirs.len()).map(|i| (i, i)).collect();
            if dirs.len() >= 2 {
                pairs.push((0, 1));
            }
            for &(i, j) in &pairs {
                self.b_form(&p, &dirs[i], &dirs[j], &mut b);
                sup_b = sup_b.max(norm(&b));
            }
            // Finite-difference |∇B| and |∇ē| along a sampled tangent.
            let v = &dirs[0];
            let (x, y) = (&dirs[0], &dirs[dirs.len().min(2) - 1]);
            let mut pp = p.clone();
            axpy(FD_H, v, &mut pp);
            if self.project_in_place(&mut pp).is_err() {
                continue;
            }
            let mut pm = p.clone();
            axpy(-FD_H, v, &mut pm);
            if self.project_in_place(&mut pm).is_err() {
                continue;
            }
            let mut xp = x.clone();
            self.tangent_project_in_place(&pp, &mut xp);
            let mut yp = y.clone();
            self.tangent_project_in_place(&pp, &mut yp);
            let mut xm = x.clone();
            self.tangent_project_in_place(&pm, &mut xm);
            let mut ym = y.clone();
            self.tangent_project_in_place(&pm, &mut ym);
            let mut bp = vec![0.0; n];
            self.b_form(&pp, &xp, &yp, &mut bp);
            let mut bm = vec![0.0; n];
            self.b_form(&pm, &xm, &ym, &mut bm);
            let db = bp
                .iter()
                .zip(&bm)
                .map(|(a, b)| (a - b) / (2.0 * FD_H))
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt();
            sup_db = sup_db.max(db);
            if let (Some(sup), Some(fp), Some(fm)) = (
                sup_dframe.as_mut(),
                self.tangent_frame_global(&pp),
                self.tangent_frame_global(&pm),
            ) {
                for (ep, em) in fp.iter().zip(&fm) {
                    let de = ep
                        .iter()
                        .zip(em)
                        .map(|(a, b)| (a - b) / (2.0 * FD_H))
                        .map(|d| d * d)
                        .sum::<f64>()
                        .sqrt();
                    *sup = sup.max(de);
                }
            }
        }
        BoundsReport { sup_b_ratio: sup_b, sup_db_ratio: sup_db, sup_dframe }
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        for _ in 0..16 {
            let raw: Vec<f64> = (0..self.ambient_dim).map(|_| gaussian(rng)).collect();
            if let Ok(p) = self.project(&raw) {
                return Some(p);
            }
        }
        None
    }

    fn random_tangent(&self, p: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        for _ in 0..16 {
            let mut raw: Vec<f64> = (0..self.ambient_dim).map(|_| gaussian(rng)).collect();
            self.tangent_project_in_place(p, &mut raw);
            if normalize(&mut raw) > 1e-6 {
                return Some(raw);
            }
        }
        None
    }
}

/// Standard normal via Box-Muller (keeps the dependency surface to `rand`'s
/// uniform sampling only).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
