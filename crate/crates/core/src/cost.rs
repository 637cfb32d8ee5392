//! Attribution of total expected cost to classes on an unlabelled test set.

use serde::{Deserialize, Serialize};

use crate::distribution::{check_support, ensure_same_support, BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::kernel::denominator;
use crate::model::TrainingModel;
use crate::ratios::DensityRatioProfile;

/// Per-bin cost (or value) attribute, in caller-defined units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    support: Vec<String>,
    cost: Vec<f64>,
}

impl CostProfile {
    pub fn new(support: Vec<String>, cost: Vec<f64>) -> Result<Self> {
        check_support(&support).map_err(Error::SupportMismatch)?;
        if support.len() != cost.len() {
            return Err(Error::SupportMismatch(format!(
                "{} bins but {} costs",
                support.len(),
                cost.len()
            )));
        }
        if let Some((label, c)) = support.iter().zip(&cost).find(|(_, c)| !c.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "cost {c} at bin `{label}` is not finite"
            )));
        }
        Ok(Self { support, cost })
    }

    pub fn constant(support: Vec<String>, value: f64) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![value; n])
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.cost
    }

    /// Re-expresses the profile over `support`; every bin there must be present.
    pub fn aligned_to(&self, support: &[String]) -> Result<Self> {
        let cost = support
            .iter()
            .map(|label| {
                self.support
                    .iter()
                    .position(|s| s == label)
                    .map(|i| self.cost[i])
                    .ok_or_else(|| {
                        Error::SupportMismatch(format!("no cost given for bin `{label}`"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(support.to_vec(), cost)
    }
}

/// Portfolio-wide expected cost `Σ test · cost`.
pub fn expected_total_cost(test: &BinnedDistribution, costs: &CostProfile) -> Result<f64> {
    ensure_same_support(
        test.support(),
        costs.support(),
        "test distribution vs costs",
    )?;
    Ok(test
        .weights()
        .iter()
        .zip(costs.values())
        .map(|(g, c)| g * c)
        .sum())
}

/// Class totals assuming unchanged posteriors: `E_i = Σ test · cost · P0[A_i | bin]`.
pub fn cost_total_covariate(
    test: &BinnedDistribution,
    costs: &CostProfile,
    model: &TrainingModel,
) -> Result<Vec<f64>> {
    ensure_same_support(
        model.support(),
        test.support(),
        "test distribution vs training model",
    )?;
    ensure_same_support(
        test.support(),
        costs.support(),
        "test distribution vs costs",
    )?;
    let mut totals = vec![0.0; model.class_count()];
    for ((g, c), cond) in test
        .weights()
        .iter()
        .zip(costs.values())
        .zip(model.conditionals())
    {
        for (t, p) in totals.iter_mut().zip(cond) {
            *t += g * c * p;
        }
    }
    Ok(totals)
}

/// Class totals assuming unchanged density ratios, given stationary interior
/// weights: `E_i = p_i Σ test · cost · X_i / D`.
pub fn cost_total_density_ratio(
    test: &BinnedDistribution,
    costs: &CostProfile,
    ratios: &DensityRatioProfile,
    weights: &SimplexWeights,
) -> Result<Vec<f64>> {
    ensure_same_support(
        ratios.support(),
        test.support(),
        "test distribution vs ratios",
    )?;
    ensure_same_support(
        test.support(),
        costs.support(),
        "test distribution vs costs",
    )?;
    let k = ratios.class_count();
    if weights.len() != k {
        return Err(Error::ClassCount {
            expected: k,
            found: weights.len(),
        });
    }
    if !weights.is_interior() {
        return Err(Error::NotInterior);
    }
    let mut totals = vec![0.0; k];
    for (b, (g, c)) in test.weights().iter().zip(costs.values()).enumerate() {
        if *g > 0.0 {
            let row = ratios.row(b);
            let scale = g * c / denominator(row, weights.values());
            for (i, t) in totals.iter_mut().enumerate() {
                *t += weights[i] * scale * row[i];
            }
        }
    }
    Ok(totals)
}
