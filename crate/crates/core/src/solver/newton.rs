use nalgebra::DVector;

use super::{check_problem, finish, SolverConfig};
use crate::distribution::{BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::kernel::{gradient_closed, jacobian_raw, objective_closed, sup_norm};
use crate::ratios::DensityRatioProfile;

const MAX_HALVINGS: usize = 60;
const POLISH_STEPS: usize = 3;

/// Damped Newton-Raphson ascent of the concave objective over the free weights.
///
/// Steps `p ← p − λ J⁻¹ G` halve `λ` (at most 60 times) until the iterate is
/// interior and the objective has not decreased. Once the gradient is within
/// tolerance, up to three full steps are still taken while each one shrinks
/// the gradient, which takes the weights close to machine precision.
pub fn newton_solve(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_problem(test, ratios, config)?;
    if !ratios.is_independent_on(test)? {
        return Err(Error::SingularJacobian);
    }
    let k = ratios.class_count();
    let free = ratios.free_classes();
    let reference = ratios.reference_class();
    let mut current = config.start(k)?.values().to_vec();
    let mut value = objective_closed(test, ratios, &current);
    let mut iterations = 0;
    let mut notes = Vec::new();
    let mut alarm = false;

    loop {
        let grad = gradient_closed(test, ratios, &current);
        if sup_norm(&grad) <= config.gradient_tolerance {
            polish(test, ratios, &mut current, grad, &mut iterations);
            break;
        }
        if iterations >= config.max_iterations {
            notes.push(format!("iteration limit {} reached", config.max_iterations));
            break;
        }
        // −J is symmetric positive definite for independent ratios.
        let direction =
            newton_direction(test, ratios, &current, grad).ok_or(Error::SingularJacobian)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut candidate = current.clone();
            for (c, &j) in free.iter().enumerate() {
                candidate[j] += lambda * direction[c];
            }
            candidate[reference] = 1.0 - free.iter().map(|&j| candidate[j]).sum::<f64>();
            if candidate.iter().all(|v| *v > 0.0) {
                let f = objective_closed(test, ratios, &candidate);
                if f >= value - 1e-15 * value.abs().max(1.0) {
                    accepted = Some((candidate, f));
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some((candidate, f)) = accepted else {
            notes.push("line search found no admissible step".into());
            alarm = true;
            break;
        };
        let step = candidate
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = candidate;
        value = f;
        if current.iter().any(|v| *v < config.boundary_epsilon) {
            notes.push("iterates driven to the simplex boundary".into());
            alarm = true;
            break;
        }
        if step == 0.0 {
            notes.push("newton stalled".into());
            break;
        }
    }
    let weights = SimplexWeights::from_unnormalized(current)?;
    finish(
        test,
        ratios,
        config,
        weights,
        Method::Newton,
        iterations,
        alarm,
        notes,
    )
}

fn newton_direction(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    p: &[f64],
    grad: Vec<f64>,
) -> Option<DVector<f64>> {
    let neg_jac = -jacobian_raw(test, ratios, p);
    let d = neg_jac.cholesky()?.solve(&DVector::from_vec(grad));
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn polish(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    current: &mut Vec<f64>,
    mut grad: Vec<f64>,
    iterations: &mut usize,
) {
    let free = ratios.free_classes();
    let reference = ratios.reference_class();
    for _ in 0..POLISH_STEPS {
        let norm = sup_norm(&grad);
        if norm == 0.0 {
            return;
        }
        let Some(direction) = newton_direction(test, ratios, current, grad.clone()) else {
            return;
        };
        let mut candidate = current.clone();
        for (c, &j) in free.iter().enumerate() {
            candidate[j] += direction[c];
        }
        candidate[reference] = 1.0 - free.iter().map(|&j| candidate[j]).sum::<f64>();
        if candidate.iter().any(|v| *v <= 0.0) {
            return;
        }
        let next = gradient_closed(test, ratios, &candidate);
        if sup_norm(&next) >= norm {
            return;
        }
        *current = candidate;
        grad = next;
        *iterations += 1;
    }
}
