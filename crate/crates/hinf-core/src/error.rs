//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped by origin: structural (shape/finiteness) errors,
/// numerical failures (non-convergence, ill-conditioning), domain
/// violations (invalid graph or model data), and configuration problems.
#[derive(Debug, Error)]
pub enum Error {
    /// A square matrix was required.
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    /// A matrix contained NaN or infinite entries.
    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: String },

    /// Two operands or a field of a composite model had incompatible shapes.
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: String,
        found: String,
    },

    /// An iterative eigenvalue computation did not converge.
    #[error("{algorithm} failed to converge within {iterations} iterations")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
    },

    /// A linear system was singular or too ill-conditioned to solve.
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// A symmetric matrix was required but the input deviates too much.
    #[error("matrix is not symmetric (max deviation {deviation:.3e} exceeds {tolerance:.3e})")]
    NotSymmetric { deviation: f64, tolerance: f64 },

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation requiring Schur stability was called on an unstable system.
    #[error("state matrix is not Schur stable (spectral radius {radius:.6})")]
    UnstableSystem { radius: f64 },

    /// The H∞ level test could not be decided at any shift candidate.
    #[error("spectral level test failed: every shift produced an ill-conditioned pencil (best condition {best_condition:.3e})")]
    LevelTestBreakdown { best_condition: f64 },

    /// A frequency-response solve broke down (resolvent nearly singular).
    #[error("resolvent solve broke down at frequency {frequency:.6} rad (condition estimate {condition:.3e})")]
    ResolventBreakdown { frequency: f64, condition: f64 },

    /// A positive definite matrix was required.
    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// The feasibility search exhausted its budget without a certificate.
    ///
    /// This means "no feasible point found", not a proof of infeasibility:
    /// the underlying conditions are sufficient only.
    #[error("LMI feasibility search exhausted its budget (best objective {best_objective:.6e} after {iterations} iterations, {restarts} restarts)")]
    Infeasible {
        best_objective: f64,
        iterations: usize,
        restarts: usize,
    },

    /// A simulated state stopped being finite.
    #[error("simulation diverged: non-finite state at step {step}")]
    NonFiniteState { step: usize },

    /// A tabulated disturbance did not cover the requested step or follower.
    #[error("disturbance table out of range: {reason}")]
    DisturbanceTable { reason: String },

    /// The configuration file could not be read or parsed.
    #[error("cannot read configuration: {0}")]
    ConfigRead(#[from] std::io::Error),

    /// The configuration file was syntactically invalid.
    #[error("cannot parse configuration: {reason}")]
    ConfigParse { reason: String },

    /// A configuration field was present but semantically invalid.
    #[error("invalid configuration field `{field}`: {reason}")]
    ConfigField { field: String, reason: String },
}

impl Error {
    /// Convenience constructor for dimension mismatches.
    pub fn dims(
        field: impl Into<String>,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            field: field.into(),
            expected: expected.into(),
            found: found.into(),
        }
    }
}
