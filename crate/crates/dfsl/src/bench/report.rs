//! Report emission: an approach-by-dataset F1 matrix with deltas against
//! a baseline row, or machine-readable JSON that round-trips losslessly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::eval::EvalReport;

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportLayout {
    Table,
    Json,
}

impl std::str::FromStr for ReportLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportLayout::Table),
            "json" => Ok(ReportLayout::Json),
            other => Err(format!("unknown layout {other:?} (expected table or json)")),
        }
    }
}

pub fn load_reports(paths: &[impl AsRef<Path>]) -> Result<Vec<EvalReport>, BenchError> {
    let mut reports = Vec::new();
    for path in paths {
        let file = std::fs::File::open(path.as_ref())?;
        let value: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(file))?;
        // accept both a single report and a list of reports
        if value.is_array() {
            let batch: Vec<EvalReport> = serde_json::from_value(value)?;
            reports.extend(batch);
        } else {
            reports.push(serde_json::from_value(value)?);
        }
    }
    Ok(reports)
}

pub fn render(
    reports: &[EvalReport],
    layout: ReportLayout,
    baseline: Option<&str>,
) -> Result<String, BenchError> {
    match layout {
        ReportLayout::Json => Ok(serde_json::to_string_pretty(reports)?),
        ReportLayout::Table => render_table(reports, baseline),
    }
}

/// One row per approach, one column per dataset, deltas against the
/// baseline approach between parentheses.
fn render_table(reports: &[EvalReport], baseline: Option<&str>) -> Result<String, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Config("no reports to render".into()));
    }
    let mut approaches: Vec<String> = Vec::new();
    for report in reports {
        if !approaches.contains(&report.approach) {
            approaches.push(report.approach.clone());
        }
    }
    let datasets: BTreeSet<String> = reports.iter().map(|r| r.dataset.clone()).collect();

    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    for report in reports {
        let key = (report.approach.clone(), report.dataset.clone());
        if cells.contains_key(&key) {
            return Err(BenchError::Config(format!(
                "duplicate report for approach {:?} on dataset {:?}",
                report.approach, report.dataset
            )));
        }
        let Some(mean) = report.mean_f1_x100 else {
            return Err(BenchError::Config(format!(
                "report for {:?} on {:?} has no evaluated records",
                report.approach, report.dataset
            )));
        };
        cells.insert(key, mean);
    }

    // every approach must cover the same dataset set
    let mut mismatches = Vec::new();
    for approach in &approaches {
        let covered: BTreeSet<String> = cells
            .keys()
            .filter(|(a, _)| a == approach)
            .map(|(_, d)| d.clone())
            .collect();
        if covered != datasets {
            let missing: Vec<String> = datasets.difference(&covered).cloned().collect();
            mismatches.push(format!("{approach}: missing {}", missing.join(", ")));
        }
    }
    if !mismatches.is_empty() {
        return Err(BenchError::DatasetMismatch {
            details: mismatches.join("; "),
        });
    }

    let baseline = match baseline {
        Some(name) => {
            if !approaches.iter().any(|a| a == name) {
                return Err(BenchError::Config(format!(
                    "baseline approach {name:?} is not among the reports"
                )));
            }
            name.to_string()
        }
        None => approaches[0].clone(),
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["approach".to_string()];
    header.extend(datasets.iter().cloned());
    rows.push(header);
    for approach in &approaches {
        let mut row = vec![approach.clone()];
        for dataset in &datasets {
            let mean = cells[&(approach.clone(), dataset.clone())];
            let base = cells[&(baseline.clone(), dataset.clone())];
            if *approach == baseline {
                row.push(format!("{mean:.2}"));
            } else {
                row.push(format!("{mean:.2} ({:+.2})", mean - base));
            }
        }
        rows.push(row);
    }

    let columns = rows[0].len();
    let widths: Vec<usize> = (0..columns)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    Ok(out)
}
