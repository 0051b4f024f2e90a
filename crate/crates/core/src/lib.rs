//! Numerical laboratory for radially symmetric wave maps from 1+2
//! dimensional flat space-time into embedded targets (round spheres, the
//! flat torus in ℝ⁴, and flat vector spaces).
//!
//! The crate provides:
//! - geometry of the embedded targets ([`manifold`]): projections, tangent
//!   frames, second fundamental form, curvature;
//! - a cell-centered radial grid with parity-aware stencils and quadratures
//!   ([`grid`]);
//! - a constraint-projecting leapfrog evolution ([`solver`]);
//! - radially parallel orthonormal gauge frames with dual-route connection
//!   computation ([`gauge`]);
//! - every monitored functional: energies, weighted norms, balance laws,
//!   null-form packagings, second-order energies, nonlinear space-time
//!   integrals, Sobolev–Hardy ratios ([`estimates`]);
//! - discrete characteristic-flux fields with their transport and bilinear
//!   bounds, both randomly synthesized and extracted from runs ([`divcurl`]).

pub mod config;
pub mod diagnostics;
pub mod divcurl;
pub mod error;
pub mod estimates;
pub mod field;
pub mod gauge;
pub mod grid;
pub mod harness;
pub mod manifold;
pub mod solver;

pub use config::{ExperimentKind, PdeConfig, RunConfig};
pub use diagnostics::{DiagnosticsEngine, DiagnosticsRecord, DiagnosticsSettings};
pub use error::{Error, Result};
pub use field::VectorField;
pub use grid::RadialGrid;
pub use harness::{run_experiment, ExperimentReport, RunRecord, RunStatus};
pub use manifold::{TargetKind, TargetManifold};
pub use solver::{FieldState, InitialData, Stepper, Trajectory};
