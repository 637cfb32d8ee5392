//! Aggregated exposure reports: one row per band with last period's exposure
//! share and event rate, and optionally this period's exposure share, all in
//! percent.
//!
//! ```text
//! band,last_share,last_rate,this_share
//! More than 100%,10.3,15.0,13.3
//! ...
//! All,100.0,2.2,100.0
//! ```

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::distribution::BinnedDistribution;
use crate::error::{Error, Result};
use crate::model::TrainingModel;

/// Labels of the two classes an aggregate report describes.
pub const EVENT_CLASS: &str = "event";
pub const NON_EVENT_CLASS: &str = "non_event";

/// Shares within this distance of 100% (in percent points) are treated as
/// rounded and renormalized with a warning; larger gaps are errors.
pub const SHARE_SUM_TOLERANCE_PCT: f64 = 0.5;

/// Gaps below this are not worth a warning.
const EXACT_SUM_TOLERANCE_PCT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub band: String,
    /// Fractions, converted from the file's percentages.
    pub last_share: f64,
    pub last_rate: f64,
    pub this_share: Option<f64>,
}

/// The "All" row as printed, with the number of decimals of its rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllRow {
    pub last_share: f64,
    pub last_rate: f64,
    pub this_share: Option<f64>,
    pub rate_decimals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<ReportRow>,
    pub all_row: Option<AllRow>,
}

/// Model and (when the report has this period's shares) test distribution
/// derived from a report, with any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub report: AggregateReport,
    pub model: TrainingModel,
    pub test: Option<BinnedDistribution>,
    pub warnings: Vec<String>,
}

fn percent(raw: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{column}` value `{raw}` is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("`{column}` value `{raw}` must be a nonnegative percentage"),
        });
    }
    Ok(v)
}

fn decimals(raw: &str) -> usize {
    raw.trim().split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Reads the report table without interpreting it beyond unit conversion.
pub fn read_aggregate_report<R: Read>(input: R) -> Result<AggregateReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let col = |name: &str| {
        find(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing `{name}` column"),
        })
    };
    let band_col = col("band")?;
    let share_col = col("last_share")?;
    let rate_col = col("last_rate")?;
    let this_col = find("this_share");

    let mut rows = Vec::new();
    let mut all_row = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let band = field(band_col).trim().to_string();
        if band.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing band label".into(),
            });
        }
        let last_share = percent(field(share_col), line, "last_share")? / 100.0;
        let rate_raw = field(rate_col);
        let last_rate = percent(rate_raw, line, "last_rate")? / 100.0;
        if last_rate > 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("rate {rate_raw}% exceeds 100%"),
            });
        }
        let this_share = match this_col {
            Some(c) => Some(percent(field(c), line, "this_share")? / 100.0),
            None => None,
        };
        if band.eq_ignore_ascii_case("all") {
            if all_row.is_some() {
                return Err(Error::Parse {
                    line,
                    message: "second `All` row".into(),
                });
            }
            all_row = Some(AllRow {
                last_share,
                last_rate,
                this_share,
                rate_decimals: decimals(rate_raw),
            });
        } else {
            rows.push(ReportRow {
                band,
                last_share,
                last_rate,
                this_share,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "report has no bands".into(),
        });
    }
    Ok(AggregateReport { rows, all_row })
}

fn normalized_shares(shares: &[f64], what: &str, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let total_pct = shares.iter().sum::<f64>() * 100.0;
    let gap = (total_pct - 100.0).abs();
    if gap > SHARE_SUM_TOLERANCE_PCT {
        return Err(Error::InvalidDistribution(format!(
            "{what} shares sum to {total_pct:.4}%, not 100%"
        )));
    }
    if gap > EXACT_SUM_TOLERANCE_PCT {
        warnings.push(format!(
            "{what} shares sum to {total_pct:.4}%; renormalized to 100%"
        ));
    }
    let total = total_pct / 100.0;
    Ok(shares.iter().map(|s| s / total).collect())
}

impl AggregateReport {
    /// Bands as bins, last period's rates as `P0[event | band]`, this
    /// period's shares (if present) as the test distribution.
    pub fn to_inputs(&self) -> Result<ReportInputs> {
        let mut warnings = Vec::new();
        let support: Vec<String> = self.rows.iter().map(|r| r.band.clone()).collect();
        let last: Vec<f64> = self.rows.iter().map(|r| r.last_share).collect();
        let last = normalized_shares(&last, "last period", &mut warnings)?;
        let joint: Vec<Vec<f64>> = last
            .iter()
            .zip(&self.rows)
            .map(|(s, r)| vec![s * r.last_rate, s * (1.0 - r.last_rate)])
            .collect();
        let model = TrainingModel::from_joint(
            support.clone(),
            vec![EVENT_CLASS.to_string(), NON_EVENT_CLASS.to_string()],
            &joint,
        )?;

        if let Some(all) = &self.all_row {
            let implied = model.priors()[0];
            let half_unit = 0.5 * 10f64.powi(-(all.rate_decimals as i32));
            if ((all.last_rate - implied) * 100.0).abs() > half_unit + 1e-9 {
                warnings.push(format!(
                    "reported All={} differs from the share-weighted band rate {:.4}%",
                    format_reported(all.last_rate * 100.0, all.rate_decimals),
                    implied * 100.0
                ));
            }
        }

        let test = match self
            .rows
            .iter()
            .map(|r| r.this_share)
            .collect::<Option<Vec<f64>>>()
        {
            Some(shares) => {
                let shares = normalized_shares(&shares, "this period", &mut warnings)?;
                Some(BinnedDistribution::new(support, shares)?)
            }
            None => None,
        };
        Ok(ReportInputs {
            report: self.clone(),
            model,
            test,
            warnings,
        })
    }
}

fn format_reported(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}

/// Reads a report and derives the model and test distribution from it.
pub fn parse_aggregate_report<R: Read>(input: R) -> Result<ReportInputs> {
    read_aggregate_report(input)?.to_inputs()
}
