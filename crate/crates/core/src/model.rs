//! Labelled training data summarized per feature bin.

use serde::{Deserialize, Serialize};

use crate::distribution::{
    check_support, BinnedDistribution, IO_TOLERANCE, NORMALIZATION_TOLERANCE,
};
use crate::error::{Error, Result};

/// How strictly `Σ marginal·conditional = prior` is enforced when priors are supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsistencyCheck {
    Disabled,
    /// Emit a warning when any class deviates by more than the tolerance.
    Warn(f64),
}

impl Default for ConsistencyCheck {
    fn default() -> Self {
        ConsistencyCheck::Warn(1e-9)
    }
}

/// Everything needed to assemble a [`TrainingModel`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub class_labels: Vec<String>,
    pub support: Vec<String>,
    pub feature_marginal: Vec<f64>,
    /// Per bin, the conditional class probabilities `P0[A_i | bin]`.
    pub conditionals: Vec<Vec<f64>>,
    /// Training priors; derived from marginal and conditionals when absent.
    pub priors: Option<Vec<f64>>,
}

/// Training-period joint law of (feature bin, class), stored as feature
/// marginal, per-bin class posteriors and class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct TrainingModel {
    class_labels: Vec<String>,
    support: Vec<String>,
    priors: Vec<f64>,
    conditionals: Vec<Vec<f64>>,
    feature_marginal: Vec<f64>,
}

#[derive(Deserialize)]
struct RawModel {
    class_labels: Vec<String>,
    support: Vec<String>,
    priors: Vec<f64>,
    conditionals: Vec<Vec<f64>>,
    feature_marginal: Vec<f64>,
}

impl TryFrom<RawModel> for TrainingModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let parts = ModelParts {
            class_labels: raw.class_labels,
            support: raw.support,
            feature_marginal: raw.feature_marginal,
            conditionals: raw.conditionals,
            priors: Some(raw.priors),
        };
        Self::assemble(parts, IO_TOLERANCE, ConsistencyCheck::Disabled).map(|(m, _)| m)
    }
}

impl TrainingModel {
    /// Builds a model from per-bin posteriors. Returns the model together with
    /// any consistency warnings.
    pub fn from_parts(parts: ModelParts, check: ConsistencyCheck) -> Result<(Self, Vec<String>)> {
        Self::assemble(parts, NORMALIZATION_TOLERANCE, check)
    }

    /// Builds a model from nonnegative joint masses `joint[bin][class]`.
    pub fn from_joint(
        support: Vec<String>,
        class_labels: Vec<String>,
        joint: &[Vec<f64>],
    ) -> Result<Self> {
        if joint.len() != support.len() {
            return Err(Error::InvalidModel(format!(
                "{} bins but {} joint rows",
                support.len(),
                joint.len()
            )));
        }
        let k = class_labels.len();
        let total: f64 = joint.iter().flatten().sum();
        if !(total > 0.0) || joint.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidModel(
                "joint masses must be nonnegative with positive total".into(),
            ));
        }
        let mut feature_marginal = Vec::with_capacity(joint.len());
        let mut conditionals = Vec::with_capacity(joint.len());
        let mut priors = vec![0.0; k];
        for (label, row) in support.iter().zip(joint) {
            if row.len() != k {
                return Err(Error::InvalidModel(format!(
                    "bin `{label}` has {} classes, expected {k}",
                    row.len()
                )));
            }
            let bin_total: f64 = row.iter().sum();
            if bin_total <= 0.0 {
                return Err(Error::InvalidModel(format!("bin `{label}` has zero mass")));
            }
            feature_marginal.push(bin_total / total);
            conditionals.push(row.iter().map(|v| v / bin_total).collect::<Vec<_>>());
            for (p, v) in priors.iter_mut().zip(row) {
                *p += v / total;
            }
        }
        let parts = ModelParts {
            class_labels,
            support,
            feature_marginal,
            conditionals,
            priors: Some(priors),
        };
        Self::assemble(parts, NORMALIZATION_TOLERANCE, ConsistencyCheck::Disabled).map(|(m, _)| m)
    }

    fn assemble(
        parts: ModelParts,
        tolerance: f64,
        check: ConsistencyCheck,
    ) -> Result<(Self, Vec<String>)> {
        let ModelParts {
            class_labels,
            support,
            feature_marginal,
            conditionals,
            priors,
        } = parts;
        let k = class_labels.len();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        check_support(&class_labels)
            .map_err(|m| Error::InvalidModel(format!("class labels: {m}")))?;
        // Validates support and marginal together.
        BinnedDistribution::with_tolerance(support.clone(), feature_marginal.clone(), tolerance)
            .map_err(|e| Error::InvalidModel(format!("feature marginal: {e}")))?;
        if conditionals.len() != support.len() {
            return Err(Error::InvalidModel(format!(
                "{} bins but {} conditional rows",
                support.len(),
                conditionals.len()
            )));
        }
        for (label, row) in support.iter().zip(&conditionals) {
            if row.len() != k {
                return Err(Error::InvalidModel(format!(
                    "bin `{label}` has {} classes, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "bin `{label}` has a negative conditional probability"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > tolerance {
                return Err(Error::InvalidModel(format!(
                    "conditionals at bin `{label}` sum to {total}"
                )));
            }
        }
        let implied = implied_priors(&feature_marginal, &conditionals, k);
        let mut warnings = Vec::new();
        let priors = match priors {
            None => implied.clone(),
            Some(p) => {
                if p.len() != k {
                    return Err(Error::InvalidModel(format!(
                        "{} priors for {k} classes",
                        p.len()
                    )));
                }
                if let ConsistencyCheck::Warn(tol) = check {
                    let gap = max_gap(&p, &implied);
                    if gap > tol {
                        warnings.push(format!(
                            "priors differ from marginal-weighted conditionals by {gap:.3e} (tolerance {tol:e})"
                        ));
                    }
                }
                p
            }
        };
        if let Some((label, p)) = class_labels.iter().zip(&priors).find(|(_, p)| !(**p > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "prior of class `{label}` is {p}, must be positive"
            )));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::InvalidModel(format!("priors sum to {total}")));
        }
        Ok((
            Self {
                class_labels,
                support,
                priors,
                conditionals,
                feature_marginal,
            },
            warnings,
        ))
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn conditionals(&self) -> &[Vec<f64>] {
        &self.conditionals
    }

    pub fn feature_marginal(&self) -> &[f64] {
        &self.feature_marginal
    }

    pub fn marginal_distribution(&self) -> BinnedDistribution {
        BinnedDistribution::with_tolerance(
            self.support.clone(),
            self.feature_marginal.clone(),
            IO_TOLERANCE,
        )
        .expect("validated at construction")
    }

    /// Largest deviation between the stored priors and `Σ marginal·conditional`.
    pub fn consistency_gap(&self) -> f64 {
        max_gap(
            &self.priors,
            &implied_priors(
                &self.feature_marginal,
                &self.conditionals,
                self.class_count(),
            ),
        )
    }

    /// Class-conditional feature distribution `P0[bin | A_class]`.
    pub fn class_conditional(&self, class: usize) -> Result<BinnedDistribution> {
        let masses = self
            .feature_marginal
            .iter()
            .zip(&self.conditionals)
            .map(|(m, c)| m * c[class] / self.priors[class])
            .collect();
        BinnedDistribution::from_counts(self.support.clone(), masses)
            .map_err(|e| Error::InvalidModel(format!("class `{}`: {e}", self.class_labels[class])))
    }

    pub fn class_conditionals(&self) -> Result<Vec<BinnedDistribution>> {
        (0..self.class_count())
            .map(|i| self.class_conditional(i))
            .collect()
    }
}

fn implied_priors(marginal: &[f64], conditionals: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (m, row) in marginal.iter().zip(conditionals) {
        for (o, c) in out.iter_mut().zip(row) {
            *o += m * c;
        }
    }
    out
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
