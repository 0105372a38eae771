use serde::{Deserialize, Serialize};

/// Tolerances shared by the library, the test suites and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Identities that hold exactly in real arithmetic.
    pub equality: f64,
    /// Admissible `max |UᵗU - I|` for a point of O(n).
    pub orthogonality: f64,
    /// Agreement between closed forms and finite-difference oracles.
    pub fd_oracle: f64,
    /// Admissible `max |F_α(u) - c_α|` for a point on `S_c`.
    pub on_manifold: f64,
    /// Reciprocal condition number below which a Gram matrix is singular.
    pub rcond: f64,
    /// Relative magnitude `|x_j| / R` below which a sphere chart is refused.
    pub chart: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-10,
            orthogonality: 1e-8,
            fd_oracle: 1e-4,
            on_manifold: 1e-8,
            rcond: 1e-12,
            chart: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn max_condition(&self) -> f64 {
        1.0 / self.rcond
    }
}

/// Finite-difference steps used by [`crate::ScalarField::finite_difference`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub gradient: f64,
    pub hessian: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { gradient: 1e-5, hessian: 1e-4 }
    }
}

impl FdSteps {
    pub fn uniform(h: f64) -> Self {
        Self { gradient: h, hessian: h }
    }
}
