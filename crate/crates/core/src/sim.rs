//! Synthetic dataset-shift scenarios, a brute-force grid oracle for the
//! likelihood maximization, and a side-by-side comparison of estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::distribution::{ensure_same_support, BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::kernel::{mixture_density, objective_closed};
use crate::model::TrainingModel;
use crate::moments::{
    band_rates_under_prior_shift, interleaving_check, probability_average, r_squared,
    scaled_probability_average,
};
use crate::ratios::DensityRatioProfile;
use crate::solver::{fit, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    PriorProbability,
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub model: TrainingModel,
    pub test: BinnedDistribution,
    /// Test-period class prevalences when known by construction.
    pub truth: Option<SimplexWeights>,
    pub shift_kind: ShiftKind,
    pub seed: u64,
}

/// Test distribution `Σ q_i P0[· | A_i]`: class-conditional feature laws are
/// kept and only the priors move.
pub fn make_prior_shift(
    model: &TrainingModel,
    new_priors: &SimplexWeights,
    seed: u64,
) -> Result<ShiftScenario> {
    if new_priors.len() != model.class_count() {
        return Err(Error::ClassCount {
            expected: model.class_count(),
            found: new_priors.len(),
        });
    }
    let test = mixture_density(new_priors, &model.class_conditionals()?)?;
    Ok(ShiftScenario {
        model: model.clone(),
        test,
        truth: Some(new_priors.clone()),
        shift_kind: ShiftKind::PriorProbability,
        seed,
    })
}

/// Feature distribution moves to `new_marginal` while posteriors are kept, so
/// the true prevalences are the test-averaged training posteriors.
pub fn make_covariate_shift(
    model: &TrainingModel,
    new_marginal: &BinnedDistribution,
) -> Result<ShiftScenario> {
    let truth = SimplexWeights::from_unnormalized(probability_average(new_marginal, model)?)?;
    Ok(ShiftScenario {
        model: model.clone(),
        test: new_marginal.clone(),
        truth: Some(truth),
        shift_kind: ShiftKind::Covariate,
        seed: 0,
    })
}

/// Maximizes the objective over the simplex lattice with spacing `grid_step`,
/// then once more over a ten times finer lattice around the best point.
pub fn brute_force_oracle(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    grid_step: f64,
) -> Result<SimplexWeights> {
    let k = ratios.class_count();
    if k > 4 {
        return Err(Error::SearchTooLarge(k));
    }
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::Config(format!(
            "grid step {grid_step} outside (0, 0.1]"
        )));
    }
    ensure_same_support(ratios.support(), test.support(), "brute force oracle")?;
    let n = (1.0 / grid_step).round() as usize;
    let step = 1.0 / n as f64;

    let mut best = (f64::NEG_INFINITY, vec![0.0; k]);
    let mut point = vec![0usize; k];
    compositions(&mut point, 0, n, &mut |counts| {
        let w: Vec<f64> = counts.iter().map(|c| *c as f64 * step).collect();
        let f = objective_closed(test, ratios, &w);
        if f > best.0 {
            best = (f, w);
        }
    });

    // Refinement over free coordinates 0..k-1; the last one closes the sum.
    let fine = step / 10.0;
    let centre = best.1.clone();
    let mut offsets = vec![-10i64; k - 1];
    loop {
        let mut w = vec![0.0; k];
        let mut ok = true;
        for (c, o) in offsets.iter().enumerate() {
            w[c] = centre[c] + *o as f64 * fine;
            ok &= w[c] >= -1e-15;
        }
        let last = 1.0 - w[..k - 1].iter().sum::<f64>();
        if ok && last >= -1e-15 {
            w[k - 1] = last;
            let w: Vec<f64> = w.into_iter().map(|v| v.max(0.0)).collect();
            let f = objective_closed(test, ratios, &w);
            if f > best.0 {
                best = (f, w);
            }
        }
        // Odometer over the (k−1)-dimensional offset box.
        let mut c = 0;
        loop {
            if c == k - 1 {
                return SimplexWeights::from_unnormalized(best.1);
            }
            offsets[c] += 1;
            if offsets[c] <= 10 {
                break;
            }
            offsets[c] = -10;
            c += 1;
        }
    }
}

fn compositions(
    point: &mut Vec<usize>,
    index: usize,
    remaining: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if index == point.len() - 1 {
        point[index] = remaining;
        visit(point);
        return;
    }
    for c in 0..=remaining {
        point[index] = c;
        compositions(point, index + 1, remaining - c, visit);
    }
}

/// Estimates for one bin of the test distribution.
#[derive(Debug, Clone, Serialize)]
pub struct BandForecast {
    pub label: String,
    pub test_share: f64,
    /// Posterior class probabilities under each assumption.
    pub covariate: Vec<f64>,
    pub scaled: Vec<f64>,
    pub ml: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorErrors {
    pub covariate: f64,
    pub scaled: f64,
    pub ml: f64,
}

/// Covariate-shift, Scaled Probability Average and maximum-likelihood
/// estimates side by side.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorComparison {
    pub class_labels: Vec<String>,
    pub training_priors: Vec<f64>,
    pub covariate: Vec<f64>,
    pub scaled: FitResult,
    pub ml: FitResult,
    pub truth: Option<Vec<f64>>,
    /// Sup-norm error of each estimator against `truth`.
    pub errors: Option<EstimatorErrors>,
    pub r_squared: Option<f64>,
    /// Binary case only: covariate estimate between training prior and ML estimate.
    pub interleaving: Option<bool>,
    pub bands: Vec<BandForecast>,
}

pub fn compare_estimators(
    scenario: &ShiftScenario,
    config: &SolverConfig,
) -> Result<EstimatorComparison> {
    compare(
        &scenario.model,
        &scenario.test,
        scenario.truth.as_ref(),
        config,
    )
}

/// Comparison on an observed test distribution; `truth`, when known, adds
/// per-estimator errors.
pub fn compare(
    model: &TrainingModel,
    test: &BinnedDistribution,
    truth: Option<&SimplexWeights>,
    config: &SolverConfig,
) -> Result<EstimatorComparison> {
    let covariate = probability_average(test, model)?;
    let scaled = scaled_probability_average(test, model)?;
    let ratios = DensityRatioProfile::from_conditionals(model, None)?;
    let ml = fit(test, &ratios, config)?;

    let binary = model.class_count() == 2;
    let r_squared = if binary {
        Some(r_squared(model)?)
    } else {
        None
    };
    let interleaving = (binary && !ml.boundary_alarm)
        .then(|| interleaving_check(model.priors()[0], covariate[0], ml.weights[0]));

    let truth = truth.map(|t| t.values().to_vec());
    let errors = truth.as_ref().map(|t| {
        let err = |est: &[f64]| {
            est.iter()
                .zip(t)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        EstimatorErrors {
            covariate: err(&covariate),
            scaled: err(scaled.weights.values()),
            ml: err(ml.weights.values()),
        }
    });

    let scaled_rates = band_rates_under_prior_shift(model, &scaled.weights)?;
    let ml_rates = band_rates_under_prior_shift(model, &ml.weights)?;
    let bands = model
        .support()
        .iter()
        .enumerate()
        .map(|(b, label)| BandForecast {
            label: label.clone(),
            test_share: test.weights()[b],
            covariate: model.conditionals()[b].clone(),
            scaled: scaled_rates[b].clone(),
            ml: ml_rates[b].clone(),
        })
        .collect();

    Ok(EstimatorComparison {
        class_labels: model.class_labels().to_vec(),
        training_priors: model.priors().to_vec(),
        covariate,
        scaled,
        ml,
        truth,
        errors,
        r_squared,
        interleaving,
        bands,
    })
}

/// Seeded generator of random problem instances.
pub struct InstanceGenerator {
    rng: ChaCha8Rng,
}

impl InstanceGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn support(bins: usize) -> Vec<String> {
        (0..bins).map(|b| format!("bin{b}")).collect()
    }

    /// Draw from the symmetric Dirichlet(1) distribution over `bins` bins.
    pub fn distribution(&mut self, bins: usize) -> BinnedDistribution {
        let masses = (0..bins).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
        BinnedDistribution::from_counts(Self::support(bins), masses)
            .expect("exponential draws are positive")
    }

    /// `k` component densities whose ratios are linearly independent.
    ///
    /// Panics unless `2 <= k <= bins`; fewer bins cannot carry `k − 1`
    /// independent ratio vectors.
    pub fn components(&mut self, k: usize, bins: usize) -> Vec<BinnedDistribution> {
        assert!(
            2 <= k && k <= bins,
            "need 2 <= k <= bins, got k = {k}, bins = {bins}"
        );
        loop {
            let comps: Vec<_> = (0..k).map(|_| self.distribution(bins)).collect();
            if DensityRatioProfile::from_densities(&comps, None).is_ok_and(|r| r.is_independent()) {
                return comps;
            }
        }
    }

    /// Dirichlet(1) weights with every component at least `min_weight`.
    ///
    /// Panics unless `k · min_weight < 1`.
    pub fn interior_weights(&mut self, k: usize, min_weight: f64) -> SimplexWeights {
        assert!(
            k >= 1 && (k as f64) * min_weight < 1.0,
            "no weights of {k} classes reach {min_weight}"
        );
        loop {
            let masses = (0..k).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
            let w =
                SimplexWeights::from_unnormalized(masses).expect("exponential draws are positive");
            if w.min() >= min_weight {
                return w;
            }
        }
    }

    /// Training model with random class-conditional densities and priors.
    pub fn model(&mut self, k: usize, bins: usize) -> TrainingModel {
        let comps = self.components(k, bins);
        let priors = self.interior_weights(k, 0.05);
        let joint: Vec<Vec<f64>> = (0..bins)
            .map(|b| (0..k).map(|i| priors[i] * comps[i].weights()[b]).collect())
            .collect();
        let labels = (0..k).map(|i| format!("class{i}")).collect();
        TrainingModel::from_joint(Self::support(bins), labels, &joint)
            .expect("random joint masses are valid")
    }

    pub fn uniform_usize(&mut self, range: std::ops::RangeInclusive<usize>) -> usize {
        self.rng.random_range(range)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Random scenario of the given kind, fully determined by `seed`.
pub fn random_scenario(kind: ShiftKind, k: usize, bins: usize, seed: u64) -> Result<ShiftScenario> {
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    if bins < k {
        return Err(Error::Config(format!(
            "need at least {k} bins for {k} classes"
        )));
    }
    let mut gen = InstanceGenerator::new(seed);
    let model = gen.model(k, bins);
    match kind {
        ShiftKind::PriorProbability => {
            let q = gen.interior_weights(k, 0.05);
            make_prior_shift(&model, &q, seed)
        }
        ShiftKind::Covariate => {
            let marginal = gen.distribution(bins);
            let mut s = make_covariate_shift(&model, &marginal)?;
            s.seed = seed;
            Ok(s)
        }
    }
}
