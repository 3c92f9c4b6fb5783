//! Metric reports as CSV: header `id,mode,value`, one row per measured
//! quantity. Ids name the sample (frame, joint, or `all` for pooled
//! values); modes name the metric.

use std::fs;
use std::path::Path;

use super::FormatError;
use crate::manifest::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub mode: String,
    pub value: f64,
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("id,mode,value\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.id, row.mode, row.value));
    }
    out
}

pub fn save_report(path: &Path, rows: &[ReportRow]) -> Result<(), FormatError> {
    write_atomic(path, report_to_csv(rows).as_bytes())?;
    Ok(())
}

pub fn report_from_csv(text: &str) -> Result<Vec<ReportRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: &str| FormatError::Parse {
        line: line + 1,
        message: message.into(),
    };
    match lines.next() {
        Some((_, "id,mode,value")) => {}
        _ => return Err(parse_err(0, "missing report header")),
    }
    let mut rows = Vec::new();
    for (i, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(i, "expected three fields"));
        }
        rows.push(ReportRow {
            id: fields[0].to_string(),
            mode: fields[1].to_string(),
            value: fields[2].parse().map_err(|_| parse_err(i, "bad value"))?,
        });
    }
    Ok(rows)
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>, FormatError> {
    report_from_csv(&fs::read_to_string(path)?)
}
