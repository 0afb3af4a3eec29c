//! Plot-ready CSV from metric reports and cost sweeps.

use std::collections::BTreeMap;

use crate::cost::{parse_sweep_csv, sweep_csv, SweepRow};
use crate::io::json::format_sig9;
use crate::metrics::{MetricKind, MetricReport};
use crate::{Error, Result};

/// Parses a metric report and checks its means against its per-object scores.
pub fn parse_metric_report(text: &str) -> Result<MetricReport> {
    let report: MetricReport = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    report.check_consistency()?;
    Ok(report)
}

/// One row per sample id with a per-sample mean column for each metric kind
/// present, sorted by sample id. Missing values are empty cells.
pub fn join_metric_reports(reports: &[MetricReport]) -> Result<String> {
    let mut table: BTreeMap<&str, BTreeMap<MetricKind, Option<f64>>> = BTreeMap::new();
    let mut kinds: Vec<MetricKind> = reports.iter().map(|r| r.kind).collect();
    kinds.sort();
    kinds.dedup();
    for report in reports {
        for s in &report.samples {
            let row = table.entry(&s.sample_id).or_default();
            if row.insert(report.kind, s.mean).is_some() {
                return Err(Error::Validation(format!(
                    "sample {:?} appears twice in {} reports",
                    s.sample_id, report.kind
                )));
            }
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string()];
    header.extend(kinds.iter().map(ToString::to_string));
    w.write_record(&header)?;
    for (id, row) in &table {
        let mut rec = vec![id.to_string()];
        for k in &kinds {
            rec.push(row.get(k).copied().flatten().map(format_sig9).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Concatenates sweep CSVs under one header, in input order.
pub fn merge_sweeps(inputs: &[&str]) -> Result<String> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for text in inputs {
        rows.extend(parse_sweep_csv(text)?);
    }
    sweep_csv(&rows)
}
