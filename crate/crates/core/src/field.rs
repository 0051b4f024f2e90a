//! Nodal vector fields: one small ℝ^c vector per radial grid node, stored
//! flat for cache-friendly sweeps.

/// A field of `comps`-dimensional vectors over the nodes of a radial grid.
///
/// Storage is row-major: the vector at node `j` occupies
/// `data[j*comps .. (j+1)*comps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: usize,
    data: Vec<f64>,
}

impl VectorField {
    /// Zero field with `nodes` nodes of `comps` components each.
    pub fn zeros(nodes: usize, comps: usize) -> Self {
        assert!(comps > 0, "component count must be positive");
        VectorField { comps, data: vec![0.0; nodes * comps] }
    }

    /// Build from a flat buffer (length must be a multiple of `comps`).
    pub fn from_flat(comps: usize, data: Vec<f64>) -> Self {
        assert!(comps > 0 && data.len() % comps == 0, "flat buffer length must divide comps");
        VectorField { comps, data }
    }

    /// Build a field by evaluating `f` at every node index.
    pub fn from_fn(nodes: usize, comps: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut field = Self::zeros(nodes, comps);
        for j in 0..nodes {
            f(j, field.node_mut(j));
        }
        field
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.comps
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.data[j * self.comps..(j + 1) * self.comps]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.comps..(j + 1) * self.comps]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Euclidean norm of the vector at node `j`.
    pub fn node_norm(&self, j: usize) -> f64 {
        norm(self.node(j))
    }

    /// Largest per-node Euclidean norm over the whole field.
    pub fn max_node_norm(&self) -> f64 {
        (0..self.nodes()).fold(0.0_f64, |acc, j| acc.max(self.node_norm(j)))
    }

    /// Per-node squared norms as a scalar profile.
    pub fn norm_sq_profile(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| dot(self.node(j), self.node(j))).collect()
    }
}

// ─── small dense-vector helpers used throughout the crate ───

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += s * x
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn scale(s: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= s;
    }
}

/// Normalize `x` in place; returns the original norm (0.0 means untouched).
pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(1.0 / n, x);
    }
    n
}
