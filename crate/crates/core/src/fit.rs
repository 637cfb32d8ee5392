use serde::Serialize;

use crate::distribution::{BinnedDistribution, SimplexWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Em,
    Newton,
    GaussSeidel,
    BinaryRoot,
    ClosedForm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Em => "em",
            Method::Newton => "newton",
            Method::GaussSeidel => "gauss-seidel",
            Method::BinaryRoot => "binary-root",
            Method::ClosedForm => "closed-form",
        })
    }
}

/// Estimated mixture weights plus solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub weights: SimplexWeights,
    pub method: Method,
    pub iterations: usize,
    /// Sup-norm of the gradient at `weights` (may be infinite on the boundary).
    pub final_gradient_norm: f64,
    /// Set when no solution with all weights positive was found.
    pub boundary_alarm: bool,
    /// Components sharing the density ratios that reproduce the test
    /// distribution exactly; present only after interior convergence.
    pub exact_fit_components: Option<Vec<BinnedDistribution>>,
    pub objective_value: f64,
    pub notes: Vec<String>,
}

impl FitResult {
    /// Interior, stationary and alarm-free.
    pub fn converged(&self, gradient_tolerance: f64) -> bool {
        !self.boundary_alarm
            && self.weights.is_interior()
            && self.final_gradient_norm <= gradient_tolerance
    }
}
