use mixfit_core::io::{
    parse_test_csv, parse_training_csv, read_model, read_scenario, write_model, write_scenario,
    write_test_csv, write_training_csv,
};
use mixfit_core::kernel::objective;
use mixfit_core::moments::{probability_average, scaled_probability_average};
use mixfit_core::sim::{random_scenario, InstanceGenerator, ShiftKind};
use mixfit_core::{
    fit, BinnedDistribution, DensityRatioProfile, SimplexWeights, SolverConfig, TrainingModel,
};
use proptest::prelude::*;

fn posterior_of(model: &TrainingModel, bin: &str) -> Vec<f64> {
    let b = model.support().iter().position(|s| s == bin).unwrap();
    model.conditionals()[b].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitted_weights_are_on_the_simplex(seed in 0u64..10_000, k in 2usize..=4, bins in 4usize..=10) {
        let mut gen = InstanceGenerator::new(seed);
        let comps = gen.components(k, bins);
        let test = gen.distribution(bins);
        let ratios = DensityRatioProfile::from_densities(&comps, None).unwrap();
        if let Ok(r) = fit(&test, &ratios, &SolverConfig::default()) {
            let w = r.weights.values();
            prop_assert!(w.iter().all(|v| *v >= 0.0 && *v <= 1.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // No vertex beats the fit.
            for i in 0..k {
                let vertex = SimplexWeights::vertex(k, i).unwrap();
                if let Ok(f) = objective(&test, &ratios, &vertex) {
                    prop_assert!(f <= r.objective_value + 1e-12);
                }
            }
        }
    }

    #[test]
    fn splitting_a_bin_leaves_the_fit_unchanged(seed in 0u64..10_000, k in 2usize..=3, split in 0usize..6, frac in 0.05f64..0.95) {
        let mut gen = InstanceGenerator::new(seed);
        let comps = gen.components(k, 6);
        let truth = gen.interior_weights(k, 0.1);
        let ratios = DensityRatioProfile::from_densities(&comps, None).unwrap();
        let test = mixfit_core::kernel::mixture_density(&truth, &comps).unwrap();

        let mut support = ratios.support().to_vec();
        // Rows without the trailing reference entry.
        let mut rows: Vec<Vec<f64>> = (0..support.len()).map(|b| ratios.row(b)[..k - 1].to_vec()).collect();
        let mut masses = test.weights().to_vec();
        support.push(format!("{}-split", support[split]));
        rows.push(rows[split].clone());
        masses.push(masses[split] * (1.0 - frac));
        masses[split] *= frac;
        let split_ratios = DensityRatioProfile::from_values(support.clone(), rows).unwrap();
        let split_test = BinnedDistribution::from_counts(support, masses).unwrap();

        let a = fit(&test, &ratios, &SolverConfig::default()).unwrap();
        let b = fit(&split_test, &split_ratios, &SolverConfig::default()).unwrap();
        prop_assert!(a.weights.sup_distance(&b.weights) < 1e-10);
    }

    #[test]
    fn json_documents_round_trip(seed in 0u64..10_000, k in 2usize..=4, bins in 4usize..=9, prior in any::<bool>()) {
        let kind = if prior { ShiftKind::PriorProbability } else { ShiftKind::Covariate };
        let scenario = random_scenario(kind, k, bins, seed).unwrap();
        let back = read_scenario(write_scenario(&scenario, None).as_bytes()).unwrap();
        prop_assert_eq!(back.shift_kind, scenario.shift_kind);
        prop_assert_eq!(back.seed, scenario.seed);
        for (a, b) in back.test.weights().iter().zip(scenario.test.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let model = read_model(write_model(&scenario.model).as_bytes()).unwrap();
        prop_assert_eq!(model.class_labels(), scenario.model.class_labels());
        for (a, b) in model.conditionals().iter().flatten().zip(scenario.model.conditionals().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_tables_round_trip(seed in 0u64..10_000, k in 2usize..=4, bins in 4usize..=12) {
        let scenario = random_scenario(ShiftKind::PriorProbability, k, bins, seed).unwrap();
        let model = parse_training_csv(write_training_csv(&scenario.model).as_bytes()).unwrap().model;
        prop_assert_eq!(model.class_count(), k);
        for bin in scenario.model.support() {
            for (a, b) in posterior_of(&model, bin).iter().zip(posterior_of(&scenario.model, bin)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        let test = parse_test_csv(write_test_csv(&scenario.test).as_bytes()).unwrap().distribution;
        for (bin, w) in scenario.test.iter() {
            prop_assert!((test.weight_of(bin).unwrap() - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn training_marginal_is_a_fixed_point(seed in 0u64..10_000, k in 2usize..=4, bins in 4usize..=10) {
        // With no shift every estimator returns the training priors.
        let model = InstanceGenerator::new(seed).model(k, bins);
        let test = model.marginal_distribution();
        let priors = model.priors();
        let v = probability_average(&test, &model).unwrap();
        let scaled = scaled_probability_average(&test, &model).unwrap();
        for i in 0..k {
            prop_assert!((v[i] - priors[i]).abs() < 1e-12);
            prop_assert!((scaled.weights[i] - priors[i]).abs() < 1e-9);
        }
        let ratios = DensityRatioProfile::from_conditionals(&model, None).unwrap();
        if ratios.is_independent_on(&test).unwrap() {
            let r = fit(&test, &ratios, &SolverConfig::default()).unwrap();
            let truth = SimplexWeights::new(priors.to_vec()).unwrap();
            prop_assert!(r.weights.sup_distance(&truth) < 1e-8);
        }
    }
}
