//! Precision-coverage curves as CSV: header `epsilon,precision,coverage`,
//! one row per clearance value, precision left blank where undefined
//! (no predicted grasp survived the filter).

use std::fs;
use std::path::Path;

use dexfit_core::grasp::CurvePoint;

use super::FormatError;
use crate::manifest::write_atomic;

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("epsilon,precision,coverage\n");
    for p in points {
        match p.precision {
            Some(precision) => {
                out.push_str(&format!("{},{},{}\n", p.epsilon, precision, p.coverage))
            }
            None => out.push_str(&format!("{},,{}\n", p.epsilon, p.coverage)),
        }
    }
    out
}

pub fn save_curve(path: &Path, points: &[CurvePoint]) -> Result<(), FormatError> {
    write_atomic(path, curve_to_csv(points).as_bytes())?;
    Ok(())
}

pub fn curve_from_csv(text: &str) -> Result<Vec<CurvePoint>, FormatError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: &str| FormatError::Parse {
        line: line + 1,
        message: message.into(),
    };
    match lines.next() {
        Some((_, "epsilon,precision,coverage")) => {}
        _ => return Err(parse_err(0, "missing curve header")),
    }
    let mut points = Vec::new();
    for (i, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(i, "expected three fields"));
        }
        let epsilon: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(i, "bad epsilon"))?;
        let precision = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse().map_err(|_| parse_err(i, "bad precision"))?)
        };
        let coverage: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(i, "bad coverage"))?;
        points.push(CurvePoint {
            epsilon,
            precision,
            coverage,
        });
    }
    Ok(points)
}

pub fn load_curve(path: &Path) -> Result<Vec<CurvePoint>, FormatError> {
    curve_from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_round_trip_with_blank_precision() {
        let points = vec![
            CurvePoint {
                epsilon: 0.0,
                precision: Some(0.75),
                coverage: 1.0,
            },
            CurvePoint {
                epsilon: 0.035,
                precision: None,
                coverage: 0.25,
            },
        ];
        let csv = curve_to_csv(&points);
        assert!(csv.starts_with("epsilon,precision,coverage\n"));
        assert!(csv.contains("0.035,,0.25"));
        assert_eq!(curve_from_csv(&csv).unwrap(), points);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(curve_from_csv("nope\n").is_err());
        assert!(curve_from_csv("epsilon,precision,coverage\n1,2\n").is_err());
        assert!(curve_from_csv("epsilon,precision,coverage\nx,,1\n").is_err());
    }
}
