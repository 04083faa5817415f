//! Minimal CSV dialect: one point per line, comma-separated decimals with `.`
//! as the decimal separator, no quoting, optional trailing integer label.
//! Blank lines are skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::Dataset;
use crate::{Error, Result, Scalar};

pub fn parse_csv<T: Scalar>(text: &str, has_labels: bool, name: &str) -> Result<Dataset<T>> {
    let perr = |line: usize, message: String| Error::Parse {
        source_name: name.to_string(),
        line,
        message,
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(perr(
                    line_no,
                    format!("ragged row: {} fields, expected {w}", fields.len()),
                ));
            }
            _ => {}
        }
        let (values, label) = if has_labels {
            if fields.len() < 2 {
                return Err(perr(
                    line_no,
                    "labeled row needs at least one value and a label".into(),
                ));
            }
            let (v, l) = fields.split_at(fields.len() - 1);
            let label: i64 = l[0]
                .parse()
                .map_err(|_| perr(line_no, format!("label '{}' is not an integer", l[0])))?;
            (v, Some(label))
        } else {
            (&fields[..], None)
        };
        let mut p = Vec::with_capacity(values.len());
        for (col, f) in values.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                perr(
                    line_no,
                    format!("column {}: '{f}' is not a number", col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(perr(
                    line_no,
                    format!("column {}: non-finite value", col + 1),
                ));
            }
            p.push(T::of(v));
        }
        points.push(p);
        if let Some(l) = label {
            labels.push(l);
        }
    }
    if points.is_empty() {
        return Err(Error::Empty("csv file has no rows"));
    }
    Dataset::new(points, has_labels.then_some(labels), format!("csv:{name}"))
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, has_labels, &path.display().to_string())
}

/// Values are written with Rust's shortest round-trip formatting, so
/// `load_csv(save_csv(data))` reproduces every value exactly.
pub fn to_csv<T: Scalar>(data: &Dataset<T>) -> String {
    let mut out = String::new();
    for (i, p) in data.points().iter().enumerate() {
        for (j, v) in p.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        if let Some(l) = data.label(i) {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(data)).map_err(|e| Error::io(path, e))
}
