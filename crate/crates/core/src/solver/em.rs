use super::{check_problem, finish, SolverConfig};
use crate::distribution::{BinnedDistribution, SimplexWeights};
use crate::error::Result;
use crate::fit::{FitResult, Method};
use crate::kernel::denominator;
use crate::ratios::DensityRatioProfile;

/// Fixed-point iteration `p_i ← p_i · Σ g X_i / D`.
pub fn em_solve(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<FitResult> {
    em_solve_observed(test, ratios, config, |_, _| {})
}

/// As [`em_solve`], calling `observer(iteration, weights)` on the starting
/// point and after every update.
pub fn em_solve_observed(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<FitResult> {
    check_problem(test, ratios, config)?;
    let k = ratios.class_count();
    let mut current = config.start(k)?.values().to_vec();
    observer(0, &current);
    let mut next = vec![0.0; k];
    let mut iterations = 0;
    let mut notes = Vec::new();
    loop {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (b, g) in test.weights().iter().enumerate() {
            if *g > 0.0 {
                let row = ratios.row(b);
                let scale = g / denominator(row, &current);
                for ((n, p), x) in next.iter_mut().zip(&current).zip(row) {
                    *n += scale * p * x;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        iterations += 1;
        let step = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut current, &mut next);
        observer(iterations, &current);

        if step <= config.weight_tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            notes.push(format!("iteration limit {} reached", config.max_iterations));
            break;
        }
    }
    let weights = SimplexWeights::from_unnormalized(current)?;
    let alarm = weights.min() < config.boundary_epsilon;
    finish(
        test,
        ratios,
        config,
        weights,
        Method::Em,
        iterations,
        alarm,
        notes,
    )
}
