//! Solvers for the stationarity system `G(p) = 0` on the open simplex.
//!
//! All solvers share [`SolverConfig`] and report a [`FitResult`]. When no
//! interior solution exists they raise the boundary alarm, which indicates
//! that fewer classes should be modelled.

mod binary;
mod em;
mod gauss_seidel;
mod newton;

pub use binary::{existence_check_binary, solve_binary, BinaryExistence};
pub use em::{em_solve, em_solve_observed};
pub use gauss_seidel::{gauss_seidel_solve, rescale_after_update};
pub use newton::newton_solve;

use serde::{Deserialize, Serialize};

use crate::distribution::{ensure_same_support, BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::kernel::{
    exact_fit_components, gradient_closed, objective_closed, sup_norm, STATIONARY_TOLERANCE,
};
use crate::ratios::DensityRatioProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Em,
    Newton,
    GaussSeidel,
    #[default]
    Auto,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Self::Em),
            "newton" => Ok(Self::Newton),
            "gauss-seidel" => Ok(Self::GaussSeidel),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub max_iterations: usize,
    /// Sup-norm of the change between successive weight vectors.
    pub weight_tolerance: f64,
    /// Sup-norm of the gradient accepted as stationary.
    pub gradient_tolerance: f64,
    /// Weights closer than this to zero trigger the boundary alarm.
    pub boundary_epsilon: f64,
    /// Starting point; uniform when absent.
    pub initial_weights: Option<SimplexWeights>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            max_iterations: 10_000,
            weight_tolerance: 1e-12,
            gradient_tolerance: STATIONARY_TOLERANCE,
            boundary_epsilon: 1e-9,
            initial_weights: None,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: SolverMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.weight_tolerance)
            || !positive(self.gradient_tolerance)
            || !positive(self.boundary_epsilon)
        {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn start(&self, k: usize) -> Result<SimplexWeights> {
        let start = match &self.initial_weights {
            Some(w) => w.clone(),
            None => SimplexWeights::uniform(k)?,
        };
        if start.len() != k {
            return Err(Error::ClassCount {
                expected: k,
                found: start.len(),
            });
        }
        if !start.is_interior() {
            return Err(Error::NotInterior);
        }
        Ok(start)
    }
}

const ALARM_NOTE: &str =
    "no solution with all weights positive; consider reducing the number of modelled classes";

fn check_problem(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<()> {
    config.validate()?;
    ensure_same_support(
        ratios.support(),
        test.support(),
        "test distribution vs ratios",
    )
}

/// Packages solver output: snaps alarmed weights to the boundary, evaluates
/// diagnostics and attaches exact-fit components after interior convergence.
pub(crate) fn finish(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
    weights: SimplexWeights,
    method: Method,
    iterations: usize,
    boundary_alarm: bool,
    mut notes: Vec<String>,
) -> Result<FitResult> {
    let weights = if boundary_alarm {
        weights.snapped(config.boundary_epsilon)?
    } else {
        weights
    };
    if boundary_alarm && !notes.iter().any(|n| n == ALARM_NOTE) {
        notes.push(ALARM_NOTE.to_string());
    }
    let final_gradient_norm = sup_norm(&gradient_closed(test, ratios, weights.values()));
    let objective_value = objective_closed(test, ratios, weights.values());
    let exact_fit = if !boundary_alarm
        && weights.is_interior()
        && final_gradient_norm <= config.gradient_tolerance
    {
        Some(exact_fit_components(
            test,
            ratios,
            &weights,
            config.gradient_tolerance,
        )?)
    } else {
        if !boundary_alarm {
            notes.push(format!(
                "gradient norm {final_gradient_norm:.3e} above tolerance {:.1e}",
                config.gradient_tolerance
            ));
        }
        None
    };
    Ok(FitResult {
        weights,
        method,
        iterations,
        final_gradient_norm,
        boundary_alarm,
        exact_fit_components: exact_fit,
        objective_value,
        notes,
    })
}

/// Driver: dispatches on `config.method`. `Auto` uses the scalar root for two
/// classes and Newton for more, falling back to Gauss-Seidel and then EM.
pub fn fit(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_problem(test, ratios, config)?;
    if ratios.is_uninformative_on(test)? {
        return Err(Error::NoInformation);
    }
    let k = ratios.class_count();
    match config.method {
        SolverMethod::Em => em_solve(test, ratios, config),
        SolverMethod::Newton => newton_solve(test, ratios, config),
        SolverMethod::GaussSeidel => gauss_seidel_solve(test, ratios, config),
        SolverMethod::Auto if k == 2 => solve_binary(test, ratios, config),
        SolverMethod::Auto => {
            let mut notes = Vec::new();
            match newton_solve(test, ratios, config) {
                Ok(r) if r.boundary_alarm || r.converged(config.gradient_tolerance) => {
                    return Ok(r)
                }
                Ok(_) => notes.push("newton did not converge; trying gauss-seidel".to_string()),
                Err(Error::SingularJacobian) => {
                    notes.push("singular jacobian; trying gauss-seidel".to_string())
                }
                Err(e) => return Err(e),
            }
            let gs = gauss_seidel_solve(test, ratios, config)?;
            if gs.boundary_alarm || gs.converged(config.gradient_tolerance) {
                return Ok(with_notes(gs, notes));
            }
            notes.push("gauss-seidel did not converge; trying em".to_string());
            Ok(with_notes(em_solve(test, ratios, config)?, notes))
        }
    }
}

fn with_notes(mut result: FitResult, mut notes: Vec<String>) -> FitResult {
    notes.append(&mut result.notes);
    result.notes = notes;
    result
}
