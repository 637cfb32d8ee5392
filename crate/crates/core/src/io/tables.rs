//! Row-level CSV inputs: labelled training rows, unlabelled test rows and
//! per-bin cost tables.

use std::collections::BTreeMap;
use std::io::Read;

use crate::cost::CostProfile;
use crate::distribution::BinnedDistribution;
use crate::error::{Error, Result};
use crate::model::TrainingModel;

/// Training model plus the optional per-bin mean cost found in the file.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub model: TrainingModel,
    pub costs: Option<CostProfile>,
}

/// Test feature distribution plus the optional per-bin mean cost.
#[derive(Debug, Clone)]
pub struct TestData {
    pub distribution: BinnedDistribution,
    pub costs: Option<CostProfile>,
}

struct Columns {
    feature: usize,
    class: Option<usize>,
    weight: Option<usize>,
    cost: Option<usize>,
}

fn columns(headers: &csv::StringRecord, need_class: bool) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let feature = find("feature").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing `feature` column".into(),
    })?;
    let class = find("class");
    if need_class && class.is_none() {
        return Err(Error::Parse {
            line: 1,
            message: "missing `class` column".into(),
        });
    }
    if need_class {
        for h in headers.iter() {
            if !matches!(h.trim(), "feature" | "class" | "weight" | "cost") {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unknown column `{h}`"),
                });
            }
        }
    }
    Ok(Columns {
        feature,
        class,
        weight: find("weight"),
        cost: find("cost"),
    })
}

fn number(record: &csv::StringRecord, index: usize, line: usize, name: &str) -> Result<f64> {
    let raw = record.get(index).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing `{name}` value"),
    })?;
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{name}` value `{raw}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("`{name}` value `{raw}` is not finite"),
        });
    }
    Ok(value)
}

fn text(record: &csv::StringRecord, index: usize, line: usize, name: &str) -> Result<String> {
    match record.get(index).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v.to_string()),
        _ => Err(Error::Parse {
            line,
            message: format!("missing `{name}` value"),
        }),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input)
}

#[derive(Default)]
struct CostAccumulator {
    weighted: BTreeMap<String, (f64, f64)>,
}

impl CostAccumulator {
    fn add(&mut self, bin: &str, weight: f64, cost: f64) {
        let entry = self.weighted.entry(bin.to_string()).or_default();
        entry.0 += weight * cost;
        entry.1 += weight;
    }

    fn profile(self, support: &[String]) -> Result<CostProfile> {
        let values = support
            .iter()
            .map(|b| {
                let (wc, w) = self.weighted[b];
                if w > 0.0 {
                    wc / w
                } else {
                    0.0
                }
            })
            .collect();
        CostProfile::new(support.to_vec(), values)
    }
}

/// Parses `feature,class[,weight][,cost]` rows. Bins are the distinct feature
/// values and classes the distinct labels, both in lexicographic order; rows
/// with the same feature and class aggregate. Without a `weight` column every
/// row counts once.
pub fn parse_training_csv<R: Read>(input: R) -> Result<TrainingData> {
    let mut rdr = reader(input);
    let cols = columns(rdr.headers()?, true)?;
    let class_col = cols.class.expect("checked by columns()");
    let mut joint: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut classes: BTreeMap<String, f64> = BTreeMap::new();
    let mut costs = CostAccumulator::default();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let feature = text(&record, cols.feature, line, "feature")?;
        let class = text(&record, class_col, line, "class")?;
        let weight = match cols.weight {
            Some(c) => number(&record, c, line, "weight")?,
            None => 1.0,
        };
        if weight < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative weight {weight}"),
            });
        }
        if let Some(c) = cols.cost {
            costs.add(&feature, weight, number(&record, c, line, "cost")?);
        }
        *joint
            .entry(feature)
            .or_default()
            .entry(class.clone())
            .or_default() += weight;
        *classes.entry(class).or_default() += weight;
    }
    if classes.len() < 2 {
        return Err(Error::TooFewClasses(classes.len()));
    }
    if let Some((label, _)) = classes.iter().find(|(_, w)| **w <= 0.0) {
        return Err(Error::InvalidModel(format!(
            "class `{label}` has zero total weight"
        )));
    }
    let class_labels: Vec<String> = classes.into_keys().collect();
    joint.retain(|_, row| row.values().sum::<f64>() > 0.0);
    let support: Vec<String> = joint.keys().cloned().collect();
    let rows: Vec<Vec<f64>> = joint
        .values()
        .map(|row| {
            class_labels
                .iter()
                .map(|c| row.get(c).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    let model = TrainingModel::from_joint(support.clone(), class_labels, &rows)?;
    let costs = match cols.cost {
        Some(_) => Some(costs.profile(&support)?),
        None => None,
    };
    Ok(TrainingData { model, costs })
}

/// Parses test rows with a `feature` column and optional `weight` and `cost`
/// columns; any other column (such as `class`) is ignored.
pub fn parse_test_csv<R: Read>(input: R) -> Result<TestData> {
    let mut rdr = reader(input);
    let cols = columns(rdr.headers()?, false)?;
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    let mut costs = CostAccumulator::default();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let feature = text(&record, cols.feature, line, "feature")?;
        let weight = match cols.weight {
            Some(c) => number(&record, c, line, "weight")?,
            None => 1.0,
        };
        if weight < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative weight {weight}"),
            });
        }
        if let Some(c) = cols.cost {
            costs.add(&feature, weight, number(&record, c, line, "cost")?);
        }
        *mass.entry(feature).or_default() += weight;
    }
    let support: Vec<String> = mass.keys().cloned().collect();
    let distribution =
        BinnedDistribution::from_counts(support.clone(), mass.into_values().collect())?;
    let costs = match cols.cost {
        Some(_) => Some(costs.profile(&support)?),
        None => None,
    };
    Ok(TestData {
        distribution,
        costs,
    })
}

/// Parses a `feature,cost` table with one row per bin.
pub fn parse_costs_csv<R: Read>(input: R) -> Result<CostProfile> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let cols = columns(&headers, false)?;
    let cost_col = cols.cost.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing `cost` column".into(),
    })?;
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let feature = text(&record, cols.feature, line, "feature")?;
        let cost = number(&record, cost_col, line, "cost")?;
        if values.insert(feature.clone(), cost).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate bin `{feature}`"),
            });
        }
    }
    CostProfile::new(
        values.keys().cloned().collect(),
        values.into_values().collect(),
    )
}
