//! Finite-support probability distributions and points of the probability simplex.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks on distributions and simplex points.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Looser tolerance applied when reading values back from files, so that
/// exact-fit components (normalized only up to the stationarity tolerance)
/// survive a round trip.
pub const IO_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a finite, ordered set of labelled bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct BinnedDistribution {
    support: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<String>,
    weights: Vec<f64>,
}

impl TryFrom<RawDistribution> for BinnedDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Self::with_tolerance(raw.support, raw.weights, IO_TOLERANCE)
    }
}

impl BinnedDistribution {
    pub fn new(support: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(support, weights, NORMALIZATION_TOLERANCE)
    }

    /// Like [`BinnedDistribution::new`] but accepts a total mass within `tolerance` of one.
    pub fn with_tolerance(support: Vec<String>, weights: Vec<f64>, tolerance: f64) -> Result<Self> {
        check_support(&support).map_err(Error::InvalidDistribution)?;
        if support.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} bins but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some((label, w)) = support
            .iter()
            .zip(&weights)
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} at bin `{label}` is not a nonnegative number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { support, weights })
    }

    /// Normalizes nonnegative counts (or unnormalized masses) into a distribution.
    pub fn from_counts(support: Vec<String>, counts: Vec<f64>) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidDistribution(
                "counts must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("total mass is zero".into()));
        }
        let weights = counts.into_iter().map(|c| c / total).collect();
        Self::new(support, weights)
    }

    pub fn uniform(support: Vec<String>) -> Result<Self> {
        let n = support.len();
        Self::from_counts(support, vec![1.0; n])
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_of(&self, label: &str) -> Option<f64> {
        self.support
            .iter()
            .position(|s| s == label)
            .map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.support
            .iter()
            .map(String::as_str)
            .zip(self.weights.iter().copied())
    }

    /// True when both distributions list the same bins in the same order.
    pub fn same_support(&self, other: &[String]) -> bool {
        self.support == other
    }

    /// Re-expresses the distribution over `support`. Bins missing here get
    /// weight zero; bins of `self` with positive mass that are absent from
    /// `support` are an error.
    pub fn aligned_to(&self, support: &[String]) -> Result<Self> {
        check_support(support).map_err(Error::SupportMismatch)?;
        for (label, w) in self.iter() {
            if w > 0.0 && !support.iter().any(|s| s == label) {
                return Err(Error::SupportMismatch(format!(
                    "bin `{label}` carries mass {w} but is unknown to the training data"
                )));
            }
        }
        let weights = support
            .iter()
            .map(|label| self.weight_of(label).unwrap_or(0.0))
            .collect();
        Self::with_tolerance(support.to_vec(), weights, IO_TOLERANCE)
    }
}

pub(crate) fn check_support(support: &[String]) -> std::result::Result<(), String> {
    if support.is_empty() {
        return Err("support is empty".into());
    }
    let mut seen = HashSet::with_capacity(support.len());
    for label in support {
        if !seen.insert(label.as_str()) {
            return Err(format!("duplicate bin `{label}`"));
        }
    }
    Ok(())
}

pub(crate) fn ensure_same_support(a: &[String], b: &[String], what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::SupportMismatch(format!(
            "{what}: supports differ ({} vs {} bins)",
            a.len(),
            b.len()
        )))
    }
}

/// A point `(p_1, ..., p_k)` of the closed probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct SimplexWeights {
    values: Vec<f64>,
    interior: bool,
}

#[derive(Deserialize)]
struct RawWeights {
    values: Vec<f64>,
}

impl TryFrom<RawWeights> for SimplexWeights {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        Self::with_tolerance(raw.values, IO_TOLERANCE)
    }
}

impl SimplexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, NORMALIZATION_TOLERANCE)
    }

    fn with_tolerance(values: Vec<f64>, tolerance: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidWeights("no components".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "{v} is not a nonnegative number"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let interior = values.iter().all(|v| *v > 0.0);
        Ok(Self { values, interior })
    }

    /// Rescales nonnegative values to unit sum.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(
                "values must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("total is zero".into()));
        }
        Self::new(values.into_iter().map(|v| v / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::from_unnormalized(vec![1.0; k])
    }

    pub fn vertex(k: usize, index: usize) -> Result<Self> {
        if index >= k {
            return Err(Error::InvalidWeights(format!(
                "vertex {index} out of range for {k} components"
            )));
        }
        let mut values = vec![0.0; k];
        values[index] = 1.0;
        Self::new(values)
    }

    /// Euclidean projection of an arbitrary real vector onto the simplex.
    pub fn project(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights(
                "cannot project non-finite or empty vector".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut theta = 0.0;
        for (i, u) in sorted.iter().enumerate() {
            cumulative += u;
            let candidate = (cumulative - 1.0) / (i + 1) as f64;
            if u - candidate > 0.0 {
                theta = candidate;
            }
        }
        Self::from_unnormalized(values.iter().map(|v| (v - theta).max(0.0)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.interior
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &SimplexWeights) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sets every component below `epsilon` to zero and renormalizes.
    pub fn snapped(&self, epsilon: f64) -> Result<Self> {
        Self::from_unnormalized(
            self.values
                .iter()
                .map(|&v| if v < epsilon { 0.0 } else { v })
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}
