//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
///
/// Variants are grouped by the subsystem that raises them; all carry enough
/// context to identify the offending input without a debugger.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    // ───────────────────────── manifold ─────────────────────────
    /// Closest-point projection is undefined (e.g. the origin for a sphere).
    #[error("singular projection: point at distance {dist:.3e} from the projectable set")]
    SingularProjection { dist: f64 },

    /// A point handed to a tangent-space operation is too far off the target.
    #[error("point is off the target manifold: constraint residual {residual:.3e} exceeds {tol:.3e}")]
    OffManifold { residual: f64, tol: f64 },

    /// A vector that must be tangent has a normal component above tolerance.
    #[error("vector is not tangent: normal component {residual:.3e} exceeds {tol:.3e}")]
    NonTangent { residual: f64, tol: f64 },

    /// Ambient dimensions of arguments disagree with the target manifold.
    #[error("dimension mismatch: expected ambient dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // ─────────────────────────── grid ───────────────────────────
    /// Grid spacing does not tile the radius or is too coarse.
    #[error("bad resolution: dr = {dr:.3e}, r_max = {r_max:.3e} ({reason})")]
    BadResolution { dr: f64, r_max: f64, reason: String },

    /// Radial weight exponent w <= -1 makes the measure r^w dr non-integrable.
    #[error("non-integrable weight exponent {weight} (must be > -1)")]
    NonIntegrableWeight { weight: f64 },

    /// Profile length does not match the grid node count.
    #[error("field length {got} does not match grid node count {expected}")]
    FieldLengthMismatch { expected: usize, got: usize },

    // ────────────────────────── solver ──────────────────────────
    /// Initial data reaches too close to the outer boundary for the planned
    /// horizon: the outgoing wave would touch r_max before t_end.
    #[error("support violation: data support radius {support:.3} exceeds r_max - t_planned - 1 = {limit:.3}")]
    SupportViolation { support: f64, limit: f64 },

    /// Time step violates the stability bound dt <= cfl * dr.
    #[error("CFL violation: dt = {dt:.3e} exceeds {cfl} * dr = {max_dt:.3e}")]
    CflViolation { dt: f64, cfl: f64, max_dt: f64 },

    /// The velocity field exceeded the blow-up cap; the run is aborted.
    #[error("numerical blow-up at t = {t:.6}: max |phi_t| = {max_vel:.3e} exceeds cap {cap:.3e}")]
    NumericalBlowup { t: f64, max_vel: f64, cap: f64 },

    // ────────────────────────── gauge ───────────────────────────
    /// Gram-Schmidt ran out of independent directions while seeding a frame.
    #[error("degenerate frame at node {node}: only {found} of {needed} independent tangent directions")]
    DegenerateFrame { node: usize, found: usize, needed: usize },

    /// Two frames that must share a grid/target/time layout do not.
    #[error("frame mismatch: {reason}")]
    FrameMismatch { reason: String },

    // ───────────────────────── estimates ────────────────────────
    /// Parameters violate their admissibility constraints.
    #[error("bad parameters: {reason}")]
    BadParams { reason: String },

    /// A profile that must be non-trivial is identically zero.
    #[error("degenerate profile: {reason}")]
    DegenerateProfile { reason: String },

    // ────────────────────────── divcurl ─────────────────────────
    /// A flux entry that must be non-negative dips below the roundoff margin.
    #[error("negative flux entry {value:.3e} at (t_index {it}, r_index {ir}) of {which}")]
    NegativeFlux { which: &'static str, it: usize, ir: usize, value: f64 },

    /// A structural invariant of a diagnostic field failed validation.
    #[error("invariant violation: {reason}")]
    InvariantViolation { reason: String },

    // ────────────────────────── harness ─────────────────────────
    /// Configuration file is malformed; the message names the offending key.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while writing run artifacts.
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Exit code for the command-line frontend: config errors are usage
    /// errors (2), everything else is a numerical/runtime failure (3).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), message: err.to_string() }
    }
}
