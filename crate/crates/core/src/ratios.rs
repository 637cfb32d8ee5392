//! Density ratios `X_i = f_i / f_ref` of class-conditional feature densities.
//!
//! Every maximum-likelihood quantity (objective, gradient, Jacobian, exact-fit
//! components) depends on the component densities only through these ratios.
//! Ratios are stored per bin for all `k` classes, with the reference class
//! carrying the constant 1.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::distribution::{check_support, ensure_same_support, BinnedDistribution};
use crate::error::{Error, Result};
use crate::model::TrainingModel;

/// Singular values below this fraction of the largest count as zero in the
/// linear-independence test.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Ratios closer to 1 than this are treated as carrying no information.
const UNINFORMATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRatioProfile {
    support: Vec<String>,
    /// `ratios[bin][class]`, equal to 1 at the reference class.
    ratios: Vec<Vec<f64>>,
    reference: usize,
    independent: bool,
}

impl DensityRatioProfile {
    /// Ratios from posterior class probabilities:
    /// `X_i = (P0[A_i|bin] / P0[A_ref|bin]) · (P0[A_ref] / P0[A_i])`.
    ///
    /// The reference class is the last class unless `reference` overrides it.
    pub fn from_conditionals(model: &TrainingModel, reference: Option<usize>) -> Result<Self> {
        let k = model.class_count();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        let reference = resolve_reference(reference, k)?;
        let priors = model.priors();
        let mut ratios = Vec::with_capacity(model.support().len());
        for (label, cond) in model.support().iter().zip(model.conditionals()) {
            if !(cond[reference] > 0.0) {
                return Err(Error::ZeroReferenceDensity { bin: label.clone() });
            }
            let row = (0..k)
                .map(|i| {
                    if i == reference {
                        1.0
                    } else {
                        (cond[i] / cond[reference]) * (priors[reference] / priors[i])
                    }
                })
                .collect();
            ratios.push(row);
        }
        Self::build(model.support().to_vec(), ratios, reference)
    }

    /// Ratios from explicit component densities on a shared support.
    pub fn from_densities(
        components: &[BinnedDistribution],
        reference: Option<usize>,
    ) -> Result<Self> {
        let k = components.len();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        let reference = resolve_reference(reference, k)?;
        let support = components[0].support().to_vec();
        for c in &components[1..] {
            ensure_same_support(&support, c.support(), "component densities")?;
        }
        let base = components[reference].weights();
        let mut ratios = Vec::with_capacity(support.len());
        for (b, label) in support.iter().enumerate() {
            if !(base[b] > 0.0) {
                return Err(Error::ZeroReferenceDensity { bin: label.clone() });
            }
            ratios.push(
                components
                    .iter()
                    .map(|c| c.weights()[b] / base[b])
                    .collect(),
            );
        }
        Self::build(support, ratios, reference)
    }

    /// Ratios given directly: `values[bin]` lists `X_i` for every class except
    /// the reference class, which is the last one.
    pub fn from_values(support: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::SupportMismatch(format!(
                "{} bins but {} ratio rows",
                support.len(),
                values.len()
            )));
        }
        let free = values.first().map_or(0, Vec::len);
        if free == 0 {
            return Err(Error::TooFewClasses(1));
        }
        let mut ratios = Vec::with_capacity(values.len());
        for (label, row) in support.iter().zip(values) {
            if row.len() != free {
                return Err(Error::InvalidModel(format!(
                    "bin `{label}` has {} ratios, expected {free}",
                    row.len()
                )));
            }
            let mut full = row;
            full.push(1.0);
            ratios.push(full);
        }
        Self::build(support, ratios, free)
    }

    fn build(support: Vec<String>, ratios: Vec<Vec<f64>>, reference: usize) -> Result<Self> {
        check_support(&support).map_err(Error::SupportMismatch)?;
        for (label, row) in support.iter().zip(&ratios) {
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "ratio at bin `{label}` is negative or not finite"
                )));
            }
        }
        let mut profile = Self {
            support,
            ratios,
            reference,
            independent: false,
        };
        let uniform = vec![1.0; profile.support.len()];
        profile.independent = profile.rank_with(&uniform) == profile.class_count() - 1;
        Ok(profile)
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn class_count(&self) -> usize {
        self.ratios.first().map_or(0, Vec::len)
    }

    pub fn reference_class(&self) -> usize {
        self.reference
    }

    /// Indices of the non-reference classes, in class order. Gradient and
    /// Jacobian entries are indexed in this order.
    pub fn free_classes(&self) -> Vec<usize> {
        (0..self.class_count())
            .filter(|&i| i != self.reference)
            .collect()
    }

    /// Ratio row at bin `b` for all classes (1 at the reference class).
    pub fn row(&self, b: usize) -> &[f64] {
        &self.ratios[b]
    }

    pub fn ratio(&self, b: usize, class: usize) -> f64 {
        self.ratios[b][class]
    }

    /// Whether `X_i − 1` over the free classes are linearly independent with
    /// respect to a strictly positive measure on every bin.
    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// Linear independence of `X_i − 1` restricted to the bins where `test`
    /// puts positive mass, weighted by that mass.
    pub fn is_independent_on(&self, test: &BinnedDistribution) -> Result<bool> {
        ensure_same_support(&self.support, test.support(), "independence test")?;
        Ok(self.rank_with(test.weights()) == self.class_count() - 1)
    }

    /// True when every ratio equals 1 wherever `test` has mass.
    pub fn is_uninformative_on(&self, test: &BinnedDistribution) -> Result<bool> {
        ensure_same_support(&self.support, test.support(), "information test")?;
        Ok(self
            .ratios
            .iter()
            .zip(test.weights())
            .filter(|(_, g)| **g > 0.0)
            .all(|(row, _)| {
                row.iter()
                    .all(|x| (x - 1.0).abs() <= UNINFORMATIVE_TOLERANCE)
            }))
    }

    fn rank_with(&self, weights: &[f64]) -> usize {
        let free = self.free_classes();
        let rows: Vec<usize> = (0..self.support.len())
            .filter(|&b| weights[b] > 0.0)
            .collect();
        if rows.is_empty() || free.is_empty() {
            return 0;
        }
        let m = DMatrix::from_fn(rows.len(), free.len(), |r, c| {
            let b = rows[r];
            let d = self.ratios[b][free[c]] - 1.0;
            if d.abs() <= UNINFORMATIVE_TOLERANCE {
                0.0
            } else {
                weights[b].sqrt() * d
            }
        });
        numerical_rank(&m, RANK_TOLERANCE)
    }
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>, relative_tolerance: f64) -> usize {
    let sv = m.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter()
        .filter(|s| **s > relative_tolerance * largest)
        .count()
}

fn resolve_reference(reference: Option<usize>, k: usize) -> Result<usize> {
    match reference {
        None => Ok(k - 1),
        Some(r) if r < k => Ok(r),
        Some(r) => Err(Error::Config(format!(
            "reference class {r} out of range for {k} classes"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConsistencyCheck, ModelParts};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn fix_a() -> TrainingModel {
        TrainingModel::from_parts(
            ModelParts {
                class_labels: s(&["1", "2"]),
                support: s(&["a", "b"]),
                feature_marginal: vec![0.5, 0.5],
                conditionals: vec![vec![0.8, 0.2], vec![0.2, 0.8]],
                priors: Some(vec![0.5, 0.5]),
            },
            ConsistencyCheck::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn odds_ratio_with_equal_priors() {
        let r = DensityRatioProfile::from_conditionals(&fix_a(), None).unwrap();
        assert!((r.ratio(0, 0) - 4.0).abs() < 1e-15);
        assert!((r.ratio(1, 0) - 0.25).abs() < 1e-15);
        assert_eq!(r.ratio(0, 1), 1.0);
        assert!(r.is_independent());
    }

    #[test]
    fn zero_information_classifier() {
        let (m, _) = TrainingModel::from_parts(
            ModelParts {
                class_labels: s(&["1", "2"]),
                support: s(&["a", "b", "c"]),
                feature_marginal: vec![0.2, 0.3, 0.5],
                conditionals: vec![vec![0.3, 0.7]; 3],
                priors: Some(vec![0.3, 0.7]),
            },
            ConsistencyCheck::default(),
        )
        .unwrap();
        let r = DensityRatioProfile::from_conditionals(&m, None).unwrap();
        for b in 0..3 {
            assert!((r.ratio(b, 0) - 1.0).abs() < 1e-15);
        }
        assert!(!r.is_independent());
    }

    #[test]
    fn zero_reference_conditional_names_the_bin() {
        let (m, _) = TrainingModel::from_parts(
            ModelParts {
                class_labels: s(&["1", "2"]),
                support: s(&["a", "b"]),
                feature_marginal: vec![0.5, 0.5],
                conditionals: vec![vec![1.0, 0.0], vec![0.2, 0.8]],
                priors: None,
            },
            ConsistencyCheck::Disabled,
        )
        .unwrap();
        match DensityRatioProfile::from_conditionals(&m, None) {
            Err(Error::ZeroReferenceDensity { bin }) => assert_eq!(bin, "a"),
            other => panic!("unexpected {other:?}"),
        }
        // class 0 can serve as reference instead
        assert!(DensityRatioProfile::from_conditionals(&m, Some(0)).is_ok());
    }

    #[test]
    fn componentwise_division() {
        let sup = s(&["a", "b"]);
        let f1 = BinnedDistribution::new(sup.clone(), vec![0.8, 0.2]).unwrap();
        let f2 = BinnedDistribution::new(sup.clone(), vec![0.2, 0.8]).unwrap();
        let r = DensityRatioProfile::from_densities(&[f1.clone(), f2], None).unwrap();
        assert_eq!(r.row(0), &[4.0, 1.0]);
        assert_eq!(r.row(1), &[0.25, 1.0]);

        let same = DensityRatioProfile::from_densities(&[f1.clone(), f1], None).unwrap();
        assert!(same.row(0)[0] == 1.0 && same.row(1)[0] == 1.0);

        let g1 = BinnedDistribution::new(sup.clone(), vec![1.0, 0.0]).unwrap();
        let g2 = BinnedDistribution::new(sup, vec![0.5, 0.5]).unwrap();
        let r = DensityRatioProfile::from_densities(&[g1.clone(), g2.clone()], None).unwrap();
        assert_eq!((r.ratio(0, 0), r.ratio(1, 0)), (2.0, 0.0));
        assert!(matches!(
            DensityRatioProfile::from_densities(&[g2, g1], None),
            Err(Error::ZeroReferenceDensity { .. })
        ));
    }

    #[test]
    fn mismatched_supports_rejected() {
        let f1 = BinnedDistribution::new(s(&["a", "b"]), vec![0.5, 0.5]).unwrap();
        let f2 = BinnedDistribution::new(s(&["a", "c"]), vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            DensityRatioProfile::from_densities(&[f1, f2], None),
            Err(Error::SupportMismatch(_))
        ));
    }

    #[test]
    fn independence_depends_on_test_support() {
        // X1 - 1 and X2 - 1 proportional on bins a, b; independent only through c.
        let r = DensityRatioProfile::from_values(
            s(&["a", "b", "c"]),
            vec![vec![2.0, 3.0], vec![0.5, 0.0], vec![1.0, 2.0]],
        )
        .unwrap();
        assert!(r.is_independent());
        let g = BinnedDistribution::new(s(&["a", "b", "c"]), vec![0.5, 0.5, 0.0]).unwrap();
        assert!(!r.is_independent_on(&g).unwrap());
    }
}
