//! Result documents (text tables, CSV, JSON) and JSON/CSV files for models,
//! test distributions and scenarios.

use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::BinnedDistribution;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::model::TrainingModel;
use crate::sim::{EstimatorComparison, ShiftScenario};

pub const SCHEMA_VERSION: &str = "1";

/// Default number of decimals for percentages, as in published loss tables.
pub const DEFAULT_PRECISION: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected text, csv or json)"
            ))),
        }
    }
}

fn pct(value: f64, precision: usize) -> String {
    format!("{:.precision$}", value * 100.0)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize infallibly");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Classes to tabulate: just the first class of a two-class problem (the
/// event class), every class otherwise.
fn reported_classes(labels: &[String]) -> Vec<usize> {
    if labels.len() == 2 {
        vec![0]
    } else {
        (0..labels.len()).collect()
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: &'static str,
    kind: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

/// Table of per-band forecasts under each estimator plus an "All" row.
pub fn write_report(comparison: &EstimatorComparison, format: Format, precision: usize) -> String {
    match format {
        Format::Json => json(&Document {
            schema_version: SCHEMA_VERSION,
            kind: "comparison",
            body: comparison,
        }),
        Format::Csv => report_csv(comparison, precision),
        Format::Text => report_text(comparison, precision),
    }
}

fn report_csv(c: &EstimatorComparison, precision: usize) -> String {
    let mut out = String::from("class,band,test_share,covariate,scaled,ml\n");
    if c.bands.is_empty() {
        return out;
    }
    for i in reported_classes(&c.class_labels) {
        let label = csv_field(&c.class_labels[i]);
        for band in &c.bands {
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{}",
                csv_field(&band.label),
                pct(band.test_share, precision),
                pct(band.covariate[i], precision),
                pct(band.scaled[i], precision),
                pct(band.ml[i], precision)
            );
        }
        let _ = writeln!(
            out,
            "{label},All,{},{},{},{}",
            pct(1.0, precision),
            pct(c.covariate[i], precision),
            pct(c.scaled.weights[i], precision),
            pct(c.ml.weights[i], precision)
        );
    }
    out
}

fn report_text(c: &EstimatorComparison, precision: usize) -> String {
    let width = c
        .bands
        .iter()
        .map(|b| b.label.chars().count())
        .max()
        .unwrap_or(0)
        .max(4);
    let num = (precision + 6).max(10);
    let mut out = String::new();
    let header = format!(
        "{:<width$}  {:>num$}  {:>num$}  {:>num$}  {:>num$}\n",
        "band", "exposure", "covariate", "scaled", "ml"
    );
    if c.bands.is_empty() {
        out.push_str(&header);
        return out;
    }
    for i in reported_classes(&c.class_labels) {
        let _ = writeln!(out, "class {}: forecast rate (%)", c.class_labels[i]);
        out.push_str(&header);
        let mut row = |label: &str, share: f64, cov: f64, sc: f64, ml: f64| {
            let _ = writeln!(
                out,
                "{label:<width$}  {:>num$}  {:>num$}  {:>num$}  {:>num$}",
                pct(share, precision),
                pct(cov, precision),
                pct(sc, precision),
                pct(ml, precision)
            );
        };
        for b in &c.bands {
            row(&b.label, b.test_share, b.covariate[i], b.scaled[i], b.ml[i]);
        }
        row(
            "All",
            1.0,
            c.covariate[i],
            c.scaled.weights[i],
            c.ml.weights[i],
        );
        out.push('\n');
    }
    if let Some(r2) = c.r_squared {
        let _ = writeln!(out, "R^2 (training): {}%", pct(r2, precision));
    }
    if let Some(inter) = c.interleaving {
        let _ = writeln!(
            out,
            "covariate estimate between training prior and ML: {}",
            if inter { "yes" } else { "no" }
        );
    }
    let _ = writeln!(
        out,
        "ML: method {}, {} iterations, gradient {:.3e}, boundary alarm {}",
        c.ml.method,
        c.ml.iterations,
        c.ml.final_gradient_norm,
        if c.ml.boundary_alarm { "YES" } else { "no" }
    );
    if let (Some(truth), Some(err)) = (&c.truth, &c.errors) {
        let t: Vec<String> = truth.iter().map(|v| pct(*v, precision)).collect();
        let _ = writeln!(out, "truth (%): {}", t.join(", "));
        let _ = writeln!(
            out,
            "max error (pp): covariate {}, scaled {}, ml {}",
            pct(err.covariate, precision),
            pct(err.scaled, precision),
            pct(err.ml, precision)
        );
    }
    for note in c.ml.notes.iter().chain(&c.scaled.notes) {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

/// Fitted weights with solver diagnostics.
pub fn write_fit(
    result: &FitResult,
    class_labels: &[String],
    format: Format,
    precision: usize,
) -> String {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                class_labels: &'a [String],
                #[serde(flatten)]
                result: &'a FitResult,
            }
            json(&Document {
                schema_version: SCHEMA_VERSION,
                kind: "fit",
                body: &Body {
                    class_labels,
                    result,
                },
            })
        }
        Format::Csv => {
            let mut out = String::from("class,weight\n");
            for (label, w) in class_labels.iter().zip(result.weights.values()) {
                let _ = writeln!(out, "{},{}", csv_field(label), pct(*w, precision));
            }
            out
        }
        Format::Text => {
            let width = class_labels
                .iter()
                .map(|l| l.chars().count())
                .max()
                .unwrap_or(0)
                .max(5);
            let mut out = format!("{:<width$}  weight (%)\n", "class");
            for (label, w) in class_labels.iter().zip(result.weights.values()) {
                let _ = writeln!(out, "{label:<width$}  {:>10}", pct(*w, precision));
            }
            let _ = writeln!(out, "method: {}", result.method);
            let _ = writeln!(out, "iterations: {}", result.iterations);
            let _ = writeln!(out, "gradient norm: {:.3e}", result.final_gradient_norm);
            let _ = writeln!(out, "objective: {:.12}", result.objective_value);
            let _ = writeln!(
                out,
                "boundary alarm: {}",
                if result.boundary_alarm { "YES" } else { "no" }
            );
            let _ = writeln!(
                out,
                "exact-fit components: {}",
                if result.exact_fit_components.is_some() {
                    "available"
                } else {
                    "none"
                }
            );
            for note in &result.notes {
                let _ = writeln!(out, "note: {note}");
            }
            out
        }
    }
}

/// Class cost totals under the two shift assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub class_labels: Vec<String>,
    pub total: f64,
    pub covariate: Vec<f64>,
    /// Absent when the weight fit raised the boundary alarm.
    pub density_ratio: Option<Vec<f64>>,
    pub weights: Vec<f64>,
    pub boundary_alarm: bool,
}

/// Costs are printed in their own units with `precision` decimals.
pub fn write_costs(report: &CostReport, format: Format, precision: usize) -> String {
    let fmt = |v: f64| format!("{v:.precision$}");
    let dr = |i: usize| {
        report
            .density_ratio
            .as_ref()
            .map_or(String::new(), |d| fmt(d[i]))
    };
    match format {
        Format::Json => json(&Document {
            schema_version: SCHEMA_VERSION,
            kind: "cost",
            body: report,
        }),
        Format::Csv => {
            let mut out = String::from("class,covariate,density_ratio\n");
            for (i, label) in report.class_labels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    csv_field(label),
                    fmt(report.covariate[i]),
                    dr(i)
                );
            }
            let _ = writeln!(
                out,
                "All,{},{}",
                fmt(report.total),
                report
                    .density_ratio
                    .as_ref()
                    .map_or(String::new(), |_| fmt(report.total))
            );
            out
        }
        Format::Text => {
            let width = report
                .class_labels
                .iter()
                .map(|l| l.chars().count())
                .max()
                .unwrap_or(0)
                .max(5);
            let mut out = format!(
                "{:<width$}  {:>14}  {:>14}\n",
                "class", "covariate", "density_ratio"
            );
            for (i, label) in report.class_labels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{label:<width$}  {:>14}  {:>14}",
                    fmt(report.covariate[i]),
                    dr(i)
                );
            }
            let _ = writeln!(
                out,
                "{:<width$}  {:>14}  {:>14}",
                "All",
                fmt(report.total),
                report
                    .density_ratio
                    .as_ref()
                    .map_or(String::new(), |_| fmt(report.total))
            );
            if report.boundary_alarm {
                out.push_str(
                    "boundary alarm: no interior weights; density-ratio totals unavailable\n",
                );
            }
            out
        }
    }
}

#[derive(Deserialize)]
struct Envelope {
    schema_version: String,
    kind: String,
}

fn check_envelope(text: &str, kind: &str) -> Result<()> {
    let env: Envelope = serde_json::from_str(text)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version `{}`",
            env.schema_version
        )));
    }
    if env.kind != kind {
        return Err(Error::Config(format!(
            "expected a `{kind}` document, found `{}`",
            env.kind
        )));
    }
    Ok(())
}

fn read_to_string<R: Read>(mut input: R) -> Result<String> {
    let mut s = String::new();
    input.read_to_string(&mut s)?;
    Ok(s)
}

/// Scenario document, optionally carrying the comparison computed on it.
pub fn write_scenario(
    scenario: &ShiftScenario,
    comparison: Option<&EstimatorComparison>,
) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        scenario: &'a ShiftScenario,
        #[serde(skip_serializing_if = "Option::is_none")]
        comparison: Option<&'a EstimatorComparison>,
    }
    json(&Document {
        schema_version: SCHEMA_VERSION,
        kind: "scenario",
        body: &Body {
            scenario,
            comparison,
        },
    })
}

pub fn read_scenario<R: Read>(input: R) -> Result<ShiftScenario> {
    #[derive(Deserialize)]
    struct Body {
        scenario: ShiftScenario,
    }
    let text = read_to_string(input)?;
    check_envelope(&text, "scenario")?;
    Ok(serde_json::from_str::<Body>(&text)?.scenario)
}

pub fn write_model(model: &TrainingModel) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        model: &'a TrainingModel,
    }
    json(&Document {
        schema_version: SCHEMA_VERSION,
        kind: "model",
        body: &Body { model },
    })
}

pub fn read_model<R: Read>(input: R) -> Result<TrainingModel> {
    #[derive(Deserialize)]
    struct Body {
        model: TrainingModel,
    }
    let text = read_to_string(input)?;
    check_envelope(&text, "model")?;
    Ok(serde_json::from_str::<Body>(&text)?.model)
}

/// Row-level training CSV (`feature,class,weight`) whose weights are the
/// model's joint masses; parsing it back reproduces the model.
pub fn write_training_csv(model: &TrainingModel) -> String {
    let mut out = String::from("feature,class,weight\n");
    for ((bin, m), cond) in model
        .support()
        .iter()
        .zip(model.feature_marginal())
        .zip(model.conditionals())
    {
        for (label, p) in model.class_labels().iter().zip(cond) {
            let _ = writeln!(out, "{},{},{}", csv_field(bin), csv_field(label), m * p);
        }
    }
    out
}

/// Test CSV (`feature,weight`).
pub fn write_test_csv(test: &BinnedDistribution) -> String {
    let mut out = String::from("feature,weight\n");
    for (bin, w) in test.iter() {
        let _ = writeln!(out, "{},{}", csv_field(bin), w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{compare_estimators, random_scenario, ShiftKind};
    use crate::SolverConfig;

    #[test]
    fn empty_band_list_is_header_only() {
        let sc = random_scenario(ShiftKind::PriorProbability, 2, 6, 3).unwrap();
        let mut c = compare_estimators(&sc, &SolverConfig::default()).unwrap();
        c.bands.clear();
        assert_eq!(
            write_report(&c, Format::Csv, 1),
            "class,band,test_share,covariate,scaled,ml\n"
        );
        assert_eq!(write_report(&c, Format::Text, 1).lines().count(), 1);
    }

    #[test]
    fn csv_quotes_labels() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn scenario_and_model_round_trip() {
        let sc = random_scenario(ShiftKind::PriorProbability, 3, 8, 11).unwrap();
        let c = compare_estimators(&sc, &SolverConfig::default()).unwrap();
        let back = read_scenario(write_scenario(&sc, Some(&c)).as_bytes()).unwrap();
        assert_eq!(back, sc);
        let model = read_model(write_model(&sc.model).as_bytes()).unwrap();
        assert_eq!(model, sc.model);
        assert!(read_model(write_scenario(&sc, None).as_bytes()).is_err());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }
}
