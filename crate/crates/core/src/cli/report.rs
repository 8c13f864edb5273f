//! Aggregation of summary CSVs into plot-ready tables.

use std::path::Path;

use thiserror::Error;

use super::run::{SCHEMA_VERSION, SUMMARY_COLUMNS};
use crate::channel::watts_to_dbm;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: header does not match summary schema v{SCHEMA_VERSION}")]
    Schema { path: String },
    #[error("{path}: row {row}: {msg}")]
    Row { path: String, row: usize, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "scenario",
    "method",
    "p0_dbm",
    "eps",
    "seeds",
    "failed",
    "mean_time_avg_sum_power_w",
    "time_avg_sum_power_dbm",
    "reached_target",
    "mean_rounds_to_target",
    "mean_final_accuracy",
];

#[derive(Default)]
struct Group {
    key: [String; 4],
    seeds: usize,
    failed: usize,
    power_w: Vec<f64>,
    rounds_to_target: Vec<f64>,
    accuracy: Vec<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// One row per (scenario, method, P0, eps), in order of first appearance.
/// Powers are averaged in watts before conversion to dBm.
pub fn sweep_report<P: AsRef<Path>>(paths: &[P]) -> Result<String, ReportError> {
    let mut groups: Vec<Group> = Vec::new();
    for path in paths {
        let name = path.as_ref().display().to_string();
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != SUMMARY_COLUMNS {
            return Err(ReportError::Schema { path: name });
        }
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let bad = |msg: String| ReportError::Row {
                path: name.clone(),
                row: i + 2,
                msg,
            };
            let parse = |c: usize| -> Result<Option<f64>, ReportError> {
                let s = field(c);
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("{}: not a number: `{s}`", SUMMARY_COLUMNS[c])))
            };
            let key = [field(0), field(1), field(2), field(3)].map(str::to_string);
            let idx = match groups.iter().position(|g| g.key == key) {
                Some(i) => i,
                None => {
                    groups.push(Group {
                        key,
                        ..Group::default()
                    });
                    groups.len() - 1
                }
            };
            let g = &mut groups[idx];
            g.seeds += 1;
            if field(10) != "ok" {
                g.failed += 1;
            }
            if let Some(w) = parse(7)? {
                g.power_w.push(w);
            }
            if let Some(r) = parse(6)? {
                g.rounds_to_target.push(r);
            }
            if let Some(a) = parse(9)? {
                g.accuracy.push(a);
            }
        }
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(REPORT_COLUMNS)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for g in &groups {
        let w = mean(&g.power_w);
        let mut row: Vec<String> = g.key.to_vec();
        row.push(g.seeds.to_string());
        row.push(g.failed.to_string());
        row.push(opt(w));
        row.push(opt(w.map(watts_to_dbm)));
        row.push(g.rounds_to_target.len().to_string());
        row.push(opt(mean(&g.rounds_to_target)));
        row.push(opt(mean(&g.accuracy)));
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
