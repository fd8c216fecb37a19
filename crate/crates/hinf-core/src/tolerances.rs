//! Centralized numerical tolerances.
//!
//! Every threshold used by the numeric kernel and the analysis layer lives
//! in one record so that call sites never embed magic constants and tests
//! can reference the exact values the library uses.

/// Numerical tolerances with library-wide defaults.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Maximum allowed deviation `max |M_ij - M_ji|` before a matrix is
    /// rejected as non-symmetric; inputs within the tolerance are
    /// symmetrized by averaging before decomposition.
    pub symmetry: f64,
    /// Relative eigen-decomposition residual required of the symmetric
    /// solver: `‖MQ − QΛ‖ ≤ eig_residual·‖M‖`.
    pub eig_residual: f64,
    /// Condition-number estimate above which a linear solve is rejected.
    pub max_condition: f64,
    /// Relative singular-value threshold below which a column direction
    /// counts as rank-deficient in rank tests.
    pub rank_relative: f64,
    /// Margin used by Schur-stability checks: stable means
    /// `spectral radius < 1 − schur_margin`.
    pub schur_margin: f64,
    /// Absolute distance from the unit circle within which a pencil
    /// eigenvalue counts as a level-crossing in the H∞ level test.
    pub unit_circle: f64,
    /// Default relative tolerance for H∞ norm bisection.
    pub hinf_bisection: f64,
    /// Default number of frequency-grid points on `[0, π]` used by the
    /// lower-bound phase of the H∞ norm computation.
    pub hinf_grid_points: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-10,
            eig_residual: 1e-9,
            max_condition: 1e12,
            rank_relative: 1e-9,
            schur_margin: 1e-9,
            unit_circle: 1e-7,
            hinf_bisection: 1e-6,
            hinf_grid_points: 4096,
        }
    }
}

impl Tolerances {
    /// The library-wide default tolerance set.
    pub const fn standard() -> Self {
        Tolerances {
            symmetry: 1e-10,
            eig_residual: 1e-9,
            max_condition: 1e12,
            rank_relative: 1e-9,
            schur_margin: 1e-9,
            unit_circle: 1e-7,
            hinf_bisection: 1e-6,
            hinf_grid_points: 4096,
        }
    }
}
