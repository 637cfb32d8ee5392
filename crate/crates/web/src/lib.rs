//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain inputs and returns a JSON string; the
//! `*_json` functions hold the logic and run natively as well.

use mixfit_core::io::parse_aggregate_report;
use mixfit_core::moments::{probability_average, r_squared, scaled_probability_average};
use mixfit_core::sim::{compare, make_prior_shift};
use mixfit_core::solver::existence_check_binary;
use mixfit_core::{fit, BinnedDistribution, DensityRatioProfile, SimplexWeights, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Outcome = Result<String, String>;

fn to_json<T: Serialize>(value: &T) -> Outcome {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Band {
    label: String,
    test_share: f64,
    covariate: f64,
    scaled: f64,
    ml: f64,
}

#[derive(Serialize)]
struct Quantified {
    warnings: Vec<String>,
    training_prior: f64,
    r_squared: Option<f64>,
    bands: Vec<Band>,
    covariate: f64,
    scaled: f64,
    ml: f64,
    ml_alarm: bool,
    interleaving: Option<bool>,
    notes: Vec<String>,
}

/// Covariate-shift, Scaled Probability Average and ML forecasts for an
/// aggregated report (`band,last_share,last_rate,this_share`, percent).
pub fn quantify_json(report_csv: &str) -> Outcome {
    let inputs = parse_aggregate_report(report_csv.as_bytes()).map_err(|e| e.to_string())?;
    let test = inputs.test.ok_or("the report needs a this_share column")?;
    let c =
        compare(&inputs.model, &test, None, &SolverConfig::default()).map_err(|e| e.to_string())?;
    to_json(&Quantified {
        warnings: inputs.warnings,
        training_prior: c.training_priors[0],
        r_squared: c.r_squared,
        bands: c
            .bands
            .iter()
            .map(|b| Band {
                label: b.label.clone(),
                test_share: b.test_share,
                covariate: b.covariate[0],
                scaled: b.scaled[0],
                ml: b.ml[0],
            })
            .collect(),
        covariate: c.covariate[0],
        scaled: c.scaled.weights[0],
        ml: c.ml.weights[0],
        ml_alarm: c.ml.boundary_alarm,
        interleaving: c.interleaving,
        notes: c.ml.notes.iter().chain(&c.scaled.notes).cloned().collect(),
    })
}

#[derive(Serialize)]
struct CurvePoint {
    p: f64,
    /// `None` (JSON null) where the log-likelihood is minus infinity.
    objective: Option<f64>,
    gradient: Option<f64>,
}

#[derive(Serialize)]
struct Curve {
    mean_x: f64,
    /// `None` when infinite.
    mean_inv_x: Option<f64>,
    exists: bool,
    root: f64,
    boundary_alarm: bool,
    points: Vec<CurvePoint>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Two-class log-likelihood `F(p) = Σ g log(1 + p(X − 1))` and its
/// derivative `G(p)` on `samples` evenly spaced points of [0, 1], given
/// per-bin density ratios `x` and test masses `g` (normalized here).
pub fn likelihood_curve_json(x: &[f64], g: &[f64], samples: usize) -> Outcome {
    if x.len() != g.len() {
        return Err(format!("{} ratios but {} test masses", x.len(), g.len()));
    }
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let support: Vec<String> = (0..x.len()).map(|b| format!("bin{b}")).collect();
    let ratios =
        DensityRatioProfile::from_values(support.clone(), x.iter().map(|v| vec![*v]).collect())
            .map_err(|e| e.to_string())?;
    let test = BinnedDistribution::from_counts(support, g.to_vec()).map_err(|e| e.to_string())?;
    let existence = existence_check_binary(&test, &ratios).map_err(|e| e.to_string())?;
    let result = fit(&test, &ratios, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let points = (0..samples)
        .map(|i| {
            let p = i as f64 / (samples - 1) as f64;
            let (mut f, mut grad) = (0.0, 0.0);
            for (gb, xb) in test.weights().iter().zip(x) {
                if *gb > 0.0 {
                    let d = 1.0 + p * (xb - 1.0);
                    f += gb * d.ln();
                    grad += gb * (xb - 1.0) / d;
                }
            }
            CurvePoint {
                p,
                objective: finite(f),
                gradient: finite(grad),
            }
        })
        .collect();
    to_json(&Curve {
        mean_x: existence.mean_x,
        mean_inv_x: finite(existence.mean_inv_x),
        exists: existence.exists,
        root: result.weights[0],
        boundary_alarm: result.boundary_alarm,
        points,
    })
}

#[derive(Serialize)]
struct SweepPoint {
    truth: f64,
    covariate: f64,
    scaled: f64,
    ml: f64,
}

#[derive(Serialize)]
struct Sweep {
    training_prior: f64,
    r_squared: f64,
    points: Vec<SweepPoint>,
}

/// Takes the training model of a report, shifts its event prior to each of
/// `steps` values in `[lo, hi]` and estimates it back with the three methods.
/// The covariate-shift estimate moves only `R²` as far as the truth does.
pub fn prior_shift_sweep_json(report_csv: &str, lo: f64, hi: f64, steps: usize) -> Outcome {
    if !(0.0 < lo && lo < hi && hi < 1.0) || steps < 2 {
        return Err("need 0 < lo < hi < 1 and at least two steps".into());
    }
    let inputs = parse_aggregate_report(report_csv.as_bytes()).map_err(|e| e.to_string())?;
    let model = inputs.model;
    let config = SolverConfig::default();
    let ratios = DensityRatioProfile::from_conditionals(&model, None).map_err(|e| e.to_string())?;
    let points = (0..steps)
        .map(|i| {
            let q = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            let priors = SimplexWeights::new(vec![q, 1.0 - q]).map_err(|e| e.to_string())?;
            let scenario = make_prior_shift(&model, &priors, 0).map_err(|e| e.to_string())?;
            let covariate =
                probability_average(&scenario.test, &model).map_err(|e| e.to_string())?[0];
            let scaled =
                scaled_probability_average(&scenario.test, &model).map_err(|e| e.to_string())?;
            let ml = fit(&scenario.test, &ratios, &config).map_err(|e| e.to_string())?;
            Ok(SweepPoint {
                truth: q,
                covariate,
                scaled: scaled.weights[0],
                ml: ml.weights[0],
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&Sweep {
        training_prior: model.priors()[0],
        r_squared: r_squared(&model).map_err(|e| e.to_string())?,
        points,
    })
}

fn js(outcome: Outcome) -> Result<String, JsError> {
    outcome.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn quantify(report_csv: &str) -> Result<String, JsError> {
    js(quantify_json(report_csv))
}

#[wasm_bindgen]
pub fn likelihood_curve(x: &[f64], g: &[f64], samples: usize) -> Result<String, JsError> {
    js(likelihood_curve_json(x, g, samples))
}

#[wasm_bindgen]
pub fn prior_shift_sweep(
    report_csv: &str,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, JsError> {
    js(prior_shift_sweep_json(report_csv, lo, hi, steps))
}
