//! File formats: row-level CSVs, aggregated reports, JSON documents and
//! result tables. Percentages appear only in files; values in memory are
//! fractions.

mod aggregate;
mod output;
mod tables;

pub use aggregate::{
    parse_aggregate_report, read_aggregate_report, AggregateReport, AllRow, ReportInputs,
    ReportRow, EVENT_CLASS, NON_EVENT_CLASS, SHARE_SUM_TOLERANCE_PCT,
};
pub use output::{
    read_model, read_scenario, write_costs, write_fit, write_model, write_report, write_scenario,
    write_test_csv, write_training_csv, CostReport, Format, DEFAULT_PRECISION, SCHEMA_VERSION,
};
pub use tables::{parse_costs_csv, parse_test_csv, parse_training_csv, TestData, TrainingData};
