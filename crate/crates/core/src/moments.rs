//! Closed-form prevalence estimators built from averaged posteriors.
//!
//! Under covariate shift the test prevalence is the test-average of the
//! training posteriors. Under prior probability shift those averages equal
//! `M q` for the mixing matrix `M` with `m_ij = E0[P0[A_i|bin] | A_j]`, so
//! solving the linear system recovers the shifted priors `q` (Scaled
//! Probability Average).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::distribution::{ensure_same_support, BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::kernel::{gradient_closed, objective_closed, sup_norm};
use crate::model::TrainingModel;
use crate::ratios::DensityRatioProfile;

/// Relative singular-value cutoff below which the mixing matrix is singular.
const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Column-stochastic `k × k` matrix with `m_ij = E0[P0[A_i | bin] | A_j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingMatrix {
    k: usize,
    /// Row-major entries.
    entries: Vec<f64>,
}

impl MixingMatrix {
    pub fn size(&self) -> usize {
        self.k
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, &self.entries)
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let sv = self.to_matrix().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Covariate-shift prevalence estimate `v_i = Σ_bins test · P0[A_i | bin]`.
pub fn probability_average(test: &BinnedDistribution, model: &TrainingModel) -> Result<Vec<f64>> {
    ensure_same_support(
        model.support(),
        test.support(),
        "test distribution vs training model",
    )?;
    let mut v = vec![0.0; model.class_count()];
    for (g, cond) in test.weights().iter().zip(model.conditionals()) {
        for (vi, c) in v.iter_mut().zip(cond) {
            *vi += g * c;
        }
    }
    Ok(v)
}

pub fn mixing_matrix(model: &TrainingModel) -> MixingMatrix {
    let k = model.class_count();
    let priors = model.priors();
    let mut entries = vec![0.0; k * k];
    for (m, cond) in model.feature_marginal().iter().zip(model.conditionals()) {
        for j in 0..k {
            // P0[bin | A_j]
            let weight = m * cond[j] / priors[j];
            for i in 0..k {
                entries[i * k + j] += weight * cond[i];
            }
        }
    }
    MixingMatrix { k, entries }
}

/// Solves `M q = v` for the shifted priors. Solutions outside the simplex are
/// projected onto it and flagged with the boundary alarm.
pub fn scaled_probability_average(
    test: &BinnedDistribution,
    model: &TrainingModel,
) -> Result<FitResult> {
    let v = probability_average(test, model)?;
    let mixing = mixing_matrix(model);
    let m = mixing.to_matrix();
    let sv = m.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if sv.iter().any(|s| *s <= SINGULAR_TOLERANCE * largest) {
        return Err(Error::SingularMixingMatrix);
    }
    let q = m
        .lu()
        .solve(&DVector::from_vec(v))
        .ok_or(Error::SingularMixingMatrix)?;
    let notes = vec![format!(
        "mixing matrix condition number {:.3e}",
        mixing.condition_number()
    )];
    closed_form_result(test, model, q.as_slice(), notes)
}

/// Generalized `R² = var0(P0[A_1|bin]) / (P0[A_1](1 − P0[A_1]))` of a binary model.
pub fn r_squared(model: &TrainingModel) -> Result<f64> {
    require_binary(model)?;
    let prior = model.priors()[0];
    let second_moment: f64 = model
        .feature_marginal()
        .iter()
        .zip(model.conditionals())
        .map(|(m, c)| m * c[0] * c[0])
        .sum();
    let variance = second_moment - prior * prior;
    Ok((variance / (prior * (1.0 - prior))).clamp(0.0, 1.0))
}

/// Inverts `v_1 = P0[A_1](1 − R²) + q_1 R²` for `q_1`, clamping to `[0, 1]`
/// with the boundary alarm.
pub fn scaled_probability_average_binary(
    test: &BinnedDistribution,
    model: &TrainingModel,
) -> Result<FitResult> {
    let r2 = r_squared(model)?;
    if r2 <= SINGULAR_TOLERANCE {
        return Err(Error::NoDiscriminatoryPower);
    }
    let v = probability_average(test, model)?;
    let prior = model.priors()[0];
    let q1 = (v[0] - prior * (1.0 - r2)) / r2;
    closed_form_result(test, model, &[q1, 1.0 - q1], vec![format!("R² = {r2:.6}")])
}

fn closed_form_result(
    test: &BinnedDistribution,
    model: &TrainingModel,
    solution: &[f64],
    mut notes: Vec<String>,
) -> Result<FitResult> {
    // Values within rounding of the simplex are accepted as they are.
    let inside = solution.iter().all(|q| *q >= -1e-12 && *q <= 1.0 + 1e-12);
    let weights = if inside {
        SimplexWeights::from_unnormalized(solution.iter().map(|q| q.clamp(0.0, 1.0)).collect())?
    } else {
        notes.push(format!(
            "solution {solution:?} outside the simplex; projected"
        ));
        SimplexWeights::project(solution)?
    };
    let (final_gradient_norm, objective_value) =
        match DensityRatioProfile::from_conditionals(model, None) {
            Ok(ratios) => (
                sup_norm(&gradient_closed(test, &ratios, weights.values())),
                objective_closed(test, &ratios, weights.values()),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        };
    Ok(FitResult {
        weights,
        method: Method::ClosedForm,
        iterations: 0,
        final_gradient_norm,
        boundary_alarm: !inside,
        exact_fit_components: None,
        objective_value,
        notes,
    })
}

/// Per-bin posteriors `P1[A_i | bin] ∝ q_i · P0[A_i | bin] / P0[A_i]` after a
/// prior shift to `new_priors` (equivalently `q_i X_i / Σ_j q_j X_j`).
pub fn band_rates_under_prior_shift(
    model: &TrainingModel,
    new_priors: &SimplexWeights,
) -> Result<Vec<Vec<f64>>> {
    let k = model.class_count();
    if new_priors.len() != k {
        return Err(Error::ClassCount {
            expected: k,
            found: new_priors.len(),
        });
    }
    model
        .support()
        .iter()
        .zip(model.conditionals())
        .map(|(label, cond)| {
            let scaled: Vec<f64> = (0..k)
                .map(|i| new_priors[i] * cond[i] / model.priors()[i])
                .collect();
            let total: f64 = scaled.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Domain { bin: label.clone() });
            }
            Ok(scaled.into_iter().map(|s| s / total).collect())
        })
        .collect()
}

/// True iff the covariate-shift estimate lies between the training prior and
/// the maximum-likelihood estimate (inclusive).
pub fn interleaving_check(training_prior: f64, covariate_estimate: f64, ml_estimate: f64) -> bool {
    let lo = training_prior.min(ml_estimate);
    let hi = training_prior.max(ml_estimate);
    lo <= covariate_estimate && covariate_estimate <= hi
}

fn require_binary(model: &TrainingModel) -> Result<()> {
    match model.class_count() {
        2 => Ok(()),
        found => Err(Error::ClassCount { expected: 2, found }),
    }
}
