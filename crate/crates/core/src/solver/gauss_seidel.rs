use super::binary::Collapsed;
use super::{check_problem, finish, solve_binary, SolverConfig};
use crate::distribution::{BinnedDistribution, SimplexWeights};
use crate::error::Result;
use crate::fit::{FitResult, Method};
use crate::kernel::{gradient_closed, sup_norm};
use crate::ratios::DensityRatioProfile;

/// Sets `weights[index]` to `value` and rescales the other components by
/// `(1 − value) / (1 − old)`, keeping the sum at one.
pub fn rescale_after_update(weights: &mut [f64], index: usize, value: f64) {
    let old = weights[index];
    let factor = (1.0 - value) / (1.0 - old);
    for (j, w) in weights.iter_mut().enumerate() {
        if j == index {
            *w = value;
        } else {
            *w *= factor;
        }
    }
}

/// Coordinate scheme: each class in turn is fitted against the mixture of all
/// other classes (a two-component problem), then the rest are rescaled.
///
/// A sweep in which no class satisfies the two-component existence condition
/// stops with the boundary alarm. Two classes delegate to [`solve_binary`].
pub fn gauss_seidel_solve(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_problem(test, ratios, config)?;
    let k = ratios.class_count();
    if k < 3 {
        return solve_binary(test, ratios, config);
    }
    let mut q = config.start(k)?.values().to_vec();
    let n = test.len();
    let mut notes = Vec::new();
    let mut sweeps = 0;
    let mut alarm = false;
    let failed_last_sweep = loop {
        let previous = q.clone();
        let mut failed = 0;
        for i in 0..k {
            let a: Vec<f64> = (0..n).map(|b| ratios.ratio(b, i) * (1.0 - q[i])).collect();
            let rest: Vec<f64> = (0..n)
                .map(|b| {
                    let row = ratios.row(b);
                    (0..k).filter(|&j| j != i).map(|j| q[j] * row[j]).sum()
                })
                .collect();
            let problem = Collapsed {
                g: test.weights(),
                a,
                b: rest,
            };
            let root = if problem.existence().exists {
                problem.root()
            } else {
                None
            };
            match root {
                Some((value, _)) => rescale_after_update(&mut q, i, value),
                None => failed += 1,
            }
        }
        sweeps += 1;
        if failed == k {
            notes.push("no class satisfies the two-component existence condition".into());
            alarm = true;
            break failed;
        }
        let step = q
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if step <= config.weight_tolerance {
            break failed;
        }
        if sweeps >= config.max_iterations {
            notes.push(format!("sweep limit {} reached", config.max_iterations));
            break failed;
        }
    };
    let weights = SimplexWeights::from_unnormalized(q)?;
    if weights.min() < config.boundary_epsilon {
        alarm = true;
    } else if !alarm
        && failed_last_sweep > 0
        && sup_norm(&gradient_closed(test, ratios, weights.values())) > config.gradient_tolerance
    {
        notes.push(format!(
            "{failed_last_sweep} class(es) failed the existence condition at termination"
        ));
        alarm = true;
    }
    finish(
        test,
        ratios,
        config,
        weights,
        Method::GaussSeidel,
        sweeps,
        alarm,
        notes,
    )
}
