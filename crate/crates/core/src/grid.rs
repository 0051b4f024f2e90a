//! Uniform radial grid on (0, r_max] with cell-centered nodes, weighted
//! quadrature, and the finite-difference stencils used by the solver and the
//! diagnostic estimates.
//!
//! Nodes sit at r_j = (j + 1/2) dr so no node lies on the coordinate axis;
//! the axis is handled by even reflection through r = 0 (a ghost node at
//! -dr/2 carries the value of the node at +dr/2).

use crate::error::{Error, Result};
use crate::field::VectorField;

/// Relative tolerance for requiring that dr tiles r_max exactly.
const TILING_TOL: f64 = 1e-9;

/// Minimum number of cells for a usable grid.
const MIN_CELLS: usize = 8;

/// Uniform cell-centered radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dr: f64,
    r_max: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    /// Build a grid with spacing `dr` covering (0, r_max].
    ///
    /// `r_max / dr` must be an integer (within roundoff) of at least 8.
    pub fn new(dr: f64, r_max: f64) -> Result<Self> {
        if !(dr > 0.0) || !dr.is_finite() || !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::BadResolution {
                dr,
                r_max,
                reason: "dr and r_max must be finite and positive".into(),
            });
        }
        let cells = (r_max / dr).round();
        if (cells * dr - r_max).abs() > TILING_TOL * r_max.max(1.0) {
            return Err(Error::BadResolution {
                dr,
                r_max,
                reason: "dr must tile r_max exactly".into(),
            });
        }
        let cells = cells as usize;
        if cells < MIN_CELLS {
            return Err(Error::BadResolution {
                dr,
                r_max,
                reason: format!("need at least {MIN_CELLS} cells, got {cells}"),
            });
        }
        let nodes = (0..cells).map(|j| (j as f64 + 0.5) * dr).collect();
        Ok(RadialGrid { dr, r_max, nodes })
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of nodes (= number of cells).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Radius of node `j`.
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// All node radii.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::FieldLengthMismatch { expected: self.len(), got: len });
        }
        Ok(())
    }

    /// Midpoint quadrature of the weighted integral ∫ r^w f(r) dr over the
    /// whole grid. Requires w > -1 so the measure is integrable at the axis.
    pub fn weighted_integral(&self, f: &[f64], w: f64) -> Result<f64> {
        if w <= -1.0 {
            return Err(Error::NonIntegrableWeight { weight: w });
        }
        self.check_len(f.len())?;
        let mut acc = 0.0;
        for (r, v) in self.nodes.iter().zip(f) {
            acc += r.powf(w) * v;
        }
        Ok(acc * self.dr)
    }

    /// Cumulative integral from the axis: out[j] ≈ ∫_0^{r_j} f(ξ) dξ.
    ///
    /// Midpoint cells up to j-1 plus a half cell for node j itself, so the
    /// value is anchored at the node radius rather than the cell edge.
    pub fn cumulative_from_axis(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let mut out = Vec::with_capacity(f.len());
        let mut edge = 0.0; // integral up to the inner edge of cell j
        for &v in f {
            out.push(edge + 0.5 * self.dr * v);
            edge += self.dr * v;
        }
        Ok(out)
    }

    /// Cumulative integral from the outer boundary: out[j] ≈ ∫_{r_j}^{r_max} f dξ.
    pub fn cumulative_from_outer(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let mut out = vec![0.0; f.len()];
        let mut edge = 0.0; // integral from the outer edge of cell j to r_max
        for (j, &v) in f.iter().enumerate().rev() {
            out[j] = edge + 0.5 * self.dr * v;
            edge += self.dr * v;
        }
        Ok(out)
    }

    /// Radial laplacian f_rr + f_r / r for even-parity fields, applied
    /// per component. Even reflection supplies both ghost nodes.
    pub fn radial_laplacian(&self, f: &VectorField) -> Result<VectorField> {
        self.check_len(f.nodes())?;
        let mut out = VectorField::zeros(f.nodes(), f.comps());
        self.radial_laplacian_into(f, &mut out);
        Ok(out)
    }

    pub(crate) fn radial_laplacian_into(&self, f: &VectorField, out: &mut VectorField) {
        let nj = f.nodes();
        let c = f.comps();
        let inv_dr2 = 1.0 / (self.dr * self.dr);
        let inv_2dr = 0.5 / self.dr;
        for j in 0..nj {
            let here = f.node(j);
            let inner = f.node(j.saturating_sub(1)); // j = 0 reflects to itself
            let outer = f.node(if j + 1 < nj { j + 1 } else { nj - 1 });
            let inv_r = 1.0 / self.nodes[j];
            let o = out.node_mut(j);
            for k in 0..c {
                let second = (outer[k] - 2.0 * here[k] + inner[k]) * inv_dr2;
                let first = (outer[k] - inner[k]) * inv_2dr;
                o[k] = second + first * inv_r;
            }
        }
    }

    /// Centered radial derivative for even-parity fields (axis ghost by even
    /// reflection, one-sided second-order stencil at the outer end), applied
    /// per component.
    pub fn radial_derivative_even(&self, f: &VectorField) -> Result<VectorField> {
        self.check_len(f.nodes())?;
        let mut out = VectorField::zeros(f.nodes(), f.comps());
        self.radial_derivative_even_into(f, &mut out);
        Ok(out)
    }

    pub(crate) fn radial_derivative_even_into(&self, f: &VectorField, out: &mut VectorField) {
        let nj = f.nodes();
        let c = f.comps();
        let inv_2dr = 0.5 / self.dr;
        for j in 0..nj - 1 {
            let inner = f.node(j.saturating_sub(1)); // j = 0 reflects to itself
            let outer = f.node(j + 1);
            let o = out.node_mut(j);
            for k in 0..c {
                o[k] = (outer[k] - inner[k]) * inv_2dr;
            }
        }
        let (a, b, cc) = (f.node(nj - 1), f.node(nj - 2), f.node(nj - 3));
        let o = out.node_mut(nj - 1);
        for k in 0..c {
            o[k] = (3.0 * a[k] - 4.0 * b[k] + cc[k]) * inv_2dr;
        }
    }

    /// Centered radial derivative for odd-parity fields (axis ghost by odd
    /// reflection, one-sided second-order stencil at the outer end), applied
    /// per component.
    pub fn radial_derivative_odd(&self, f: &VectorField) -> Result<VectorField> {
        self.check_len(f.nodes())?;
        let nj = f.nodes();
        let c = f.comps();
        let mut out = VectorField::zeros(nj, c);
        let inv_2dr = 0.5 / self.dr;
        for j in 0..nj - 1 {
            let outer = f.node(j + 1);
            let here = f.node(j);
            let inner = f.node(j.saturating_sub(1));
            let o = out.node_mut(j);
            for k in 0..c {
                let inner_val = if j == 0 { -here[k] } else { inner[k] };
                o[k] = (outer[k] - inner_val) * inv_2dr;
            }
        }
        let (a, b, cc) = (f.node(nj - 1), f.node(nj - 2), f.node(nj - 3));
        let o = out.node_mut(nj - 1);
        for k in 0..c {
            o[k] = (3.0 * a[k] - 4.0 * b[k] + cc[k]) * inv_2dr;
        }
        Ok(out)
    }

    /// Centered derivative of a scalar profile with one-sided second-order
    /// stencils at both ends. Use for profiles with no parity structure
    /// (frame components, gauge quantities).
    pub fn derivative_profile(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let n = f.len();
        let mut out = vec![0.0; n];
        let inv_2dr = 0.5 / self.dr;
        if n >= 3 {
            out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv_2dr;
            out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv_2dr;
        }
        for j in 1..n - 1 {
            out[j] = (f[j + 1] - f[j - 1]) * inv_2dr;
        }
        Ok(out)
    }

    /// Same one-sided-at-ends derivative, applied per component.
    pub fn derivative_field(&self, f: &VectorField) -> Result<VectorField> {
        self.check_len(f.nodes())?;
        let nj = f.nodes();
        let c = f.comps();
        let mut out = VectorField::zeros(nj, c);
        let inv_2dr = 0.5 / self.dr;
        for k in 0..c {
            let at = |j: usize| f.node(j)[k];
            if nj >= 3 {
                out.node_mut(0)[k] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv_2dr;
                out.node_mut(nj - 1)[k] =
                    (3.0 * at(nj - 1) - 4.0 * at(nj - 2) + at(nj - 3)) * inv_2dr;
            }
            for j in 1..nj - 1 {
                out.node_mut(j)[k] = (at(j + 1) - at(j - 1)) * inv_2dr;
            }
        }
        Ok(out)
    }
}

/// Pointwise change to null-coordinate derivatives:
/// f_u = (f_t - f_r) / 2, f_v = (f_t + f_r) / 2.
pub fn null_derivatives(f_t: f64, f_r: f64) -> (f64, f64) {
    (0.5 * (f_t - f_r), 0.5 * (f_t + f_r))
}

/// Inverse map: f_t = f_u + f_v, f_r = f_v - f_u.
pub fn time_radial_from_null(f_u: f64, f_v: f64) -> (f64, f64) {
    (f_u + f_v, f_v - f_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_field(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> VectorField {
        VectorField::from_fn(grid.len(), 1, |j, out| out[0] = f(grid.node(j)))
    }

    #[test]
    fn nodes_are_half_offset() {
        let g = RadialGrid::new(0.1, 1.0).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g.node(0) - 0.05).abs() < 1e-15);
        assert!((g.node(9) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_tiling_and_coarse_grids() {
        assert!(matches!(
            RadialGrid::new(0.3, 1.0),
            Err(Error::BadResolution { .. })
        ));
        // 4 cells only
        assert!(matches!(
            RadialGrid::new(0.25, 1.0),
            Err(Error::BadResolution { .. })
        ));
        assert!(RadialGrid::new(0.125, 1.0).is_ok());
    }

    #[test]
    fn weighted_integral_matches_closed_form_singular_weight() {
        // ∫_0^1 r^{-1/2} · r dr = ∫_0^1 r^{1/2} dr = 2/3.
        // Midpoint quadrature with a singular weight converges at reduced
        // order; check the value and that refinement improves it.
        let exact = 2.0 / 3.0;
        let mut errs = Vec::new();
        for k in [7, 8, 9, 10] {
            let g = RadialGrid::new(2.0_f64.powi(-k), 1.0).unwrap();
            let f: Vec<f64> = g.nodes().to_vec();
            let got = g.weighted_integral(&f, -0.5).unwrap();
            errs.push((got - exact).abs());
        }
        assert!(errs[0] < 2e-4, "coarsest error too large: {}", errs[0]);
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "refinement did not reduce error: {:?}", errs);
        }
        // order ≥ 1 + w = 0.5 on the last pair
        let order = (errs[2] / errs[3]).log2();
        assert!(order > 0.5, "singular-weight order too low: {order}");
    }

    #[test]
    fn weighted_integral_is_second_order_for_regular_weights() {
        // ∫_0^1 r · e^{-2 r^2} dr = (1 - e^{-2}) / 4.
        let exact = (1.0 - (-2.0_f64).exp()) / 4.0;
        let mut errs = Vec::new();
        for k in [5, 6, 7] {
            let g = RadialGrid::new(2.0_f64.powi(-k), 1.0).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|&r| (-2.0 * r * r).exp()).collect();
            errs.push((g.weighted_integral(&f, 1.0).unwrap() - exact).abs());
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.9, "midpoint order degraded: {order} ({errs:?})");
    }

    #[test]
    fn weighted_integral_rejects_non_integrable_weight() {
        let g = RadialGrid::new(0.125, 1.0).unwrap();
        let f = vec![1.0; g.len()];
        assert_eq!(
            g.weighted_integral(&f, -1.0),
            Err(Error::NonIntegrableWeight { weight: -1.0 })
        );
    }

    #[test]
    fn cumulative_from_axis_matches_closed_form() {
        // ∫_0^r ξ dξ = r²/2, evaluated at the node itself.
        let g = RadialGrid::new(2.0_f64.powi(-7), 1.0).unwrap();
        let f: Vec<f64> = g.nodes().to_vec();
        let cum = g.cumulative_from_axis(&f).unwrap();
        for (j, &r) in g.nodes().iter().enumerate() {
            assert!(
                (cum[j] - 0.5 * r * r).abs() < 1e-5,
                "node {j}: {} vs {}",
                cum[j],
                0.5 * r * r
            );
        }
    }

    #[test]
    fn cumulative_from_outer_complements_axis_integral() {
        let g = RadialGrid::new(2.0_f64.powi(-5), 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&r| (-r).exp()).collect();
        let total = g.weighted_integral(&f, 0.0).unwrap();
        let from_axis = g.cumulative_from_axis(&f).unwrap();
        let from_outer = g.cumulative_from_outer(&f).unwrap();
        for j in 0..g.len() {
            assert!((from_axis[j] + from_outer[j] - total).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_exact_on_r_squared_at_axis() {
        // f = r² has f_rr + f_r/r = 4 everywhere, and the half-offset
        // reflection stencil reproduces it exactly at the axis node.
        let g = RadialGrid::new(0.125, 2.0).unwrap();
        let f = scalar_field(&g, |r| r * r);
        let lap = g.radial_laplacian(&f).unwrap();
        for j in 0..g.len() - 1 {
            assert!((lap.node(j)[0] - 4.0).abs() < 1e-12, "node {j}: {}", lap.node(j)[0]);
        }
    }

    #[test]
    fn laplacian_second_order_on_inner_half() {
        // f = r⁴: laplacian = 16 r². Measure max error over the inner half.
        let mut errs = Vec::new();
        for k in [4, 5, 6] {
            let g = RadialGrid::new(2.0_f64.powi(-k), 2.0).unwrap();
            let f = scalar_field(&g, |r| r.powi(4));
            let lap = g.radial_laplacian(&f).unwrap();
            let err = (0..g.len() / 2)
                .map(|j| (lap.node(j)[0] - 16.0 * g.node(j) * g.node(j)).abs())
                .fold(0.0_f64, f64::max);
            errs.push(err);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.9, "laplacian order degraded: {order} ({errs:?})");
    }

    #[test]
    fn derivative_profile_second_order_including_ends() {
        let mut errs = Vec::new();
        for k in [4, 5, 6] {
            let g = RadialGrid::new(2.0_f64.powi(-k), 1.0).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|&r| (3.0 * r).sin()).collect();
            let d = g.derivative_profile(&f).unwrap();
            let err = g
                .nodes()
                .iter()
                .zip(&d)
                .map(|(&r, &v)| (v - 3.0 * (3.0 * r).cos()).abs())
                .fold(0.0_f64, f64::max);
            errs.push(err);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.8, "profile derivative order degraded: {order} ({errs:?})");
    }

    #[test]
    fn odd_derivative_second_order_on_odd_field() {
        // f(r) = r e^{-r^2} is odd; its derivative is (1 - 2r^2) e^{-r^2}.
        let mut errs = Vec::new();
        for k in [4, 5, 6] {
            let g = RadialGrid::new(2.0_f64.powi(-k), 4.0).unwrap();
            let f = scalar_field(&g, |r| r * (-r * r).exp());
            let d = g.radial_derivative_odd(&f).unwrap();
            // skip the outermost node (copy ghost, negligible field there)
            let err = (0..g.len() - 1)
                .map(|j| {
                    let r = g.node(j);
                    (d.node(j)[0] - (1.0 - 2.0 * r * r) * (-r * r).exp()).abs()
                })
                .fold(0.0_f64, f64::max);
            errs.push(err);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.8, "odd derivative order degraded: {order} ({errs:?})");
    }

    proptest! {
        #[test]
        fn null_derivative_round_trip(ft in -10.0..10.0f64, fr in -10.0..10.0f64) {
            let (fu, fv) = null_derivatives(ft, fr);
            let (ft2, fr2) = time_radial_from_null(fu, fv);
            // exact in floating point: sums/halves of two values
            prop_assert!((ft2 - ft).abs() <= 1e-15 * ft.abs().max(1.0));
            prop_assert!((fr2 - fr).abs() <= 1e-15 * fr.abs().max(1.0));
        }

        #[test]
        fn quadrature_is_linear(scale in 0.1..10.0f64) {
            let g = RadialGrid::new(0.125, 1.0).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|&r| r.cos()).collect();
            let scaled: Vec<f64> = f.iter().map(|v| scale * v).collect();
            let a = g.weighted_integral(&f, 1.0).unwrap();
            let b = g.weighted_integral(&scaled, 1.0).unwrap();
            prop_assert!((b - scale * a).abs() < 1e-12 * a.abs().max(1.0) * scale.max(1.0));
        }
    }
}
