use std::fmt::Write as _;
use std::path::Path;

use super::IoError;
use crate::linalg::DenseMatrix;
use crate::sensors::{SelectionMode, SensorSet};

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn parse_value(token: &str, line: usize) -> Result<f64, IoError> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| IoError::parse(line, format!("not a number: {:?}", token.trim())))?;
    if !v.is_finite() {
        return Err(IoError::parse(line, format!("non-finite value {:?}", token.trim())));
    }
    Ok(v)
}

fn parse_header_fields(header: &str, line: usize) -> Result<Vec<(&str, &str)>, IoError> {
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| IoError::parse(line, "expected a '#' header line"))?;
    body.split_whitespace()
        .map(|field| {
            field
                .split_once('=')
                .ok_or_else(|| IoError::parse(line, format!("malformed header field {field:?}")))
        })
        .collect()
}

/// Parses a matrix file: a `# rows=<n> cols=<m>` header followed by `n`
/// comma-separated rows of `m` values. Blank lines are ignored.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| IoError::parse(1, "empty matrix file"))?;
    let mut rows = None;
    let mut cols = None;
    for (key, value) in parse_header_fields(header, hline)? {
        let parsed: usize = value
            .parse()
            .map_err(|_| IoError::parse(hline, format!("{key} must be a non-negative integer")))?;
        match key {
            "rows" => rows = Some(parsed),
            "cols" => cols = Some(parsed),
            other => return Err(IoError::parse(hline, format!("unknown header field {other:?}"))),
        }
    }
    let (Some(rows), Some(cols)) = (rows, cols) else {
        return Err(IoError::parse(hline, "header must declare rows and cols"));
    };
    let total = rows
        .checked_mul(cols)
        .filter(|&t| t <= text.len())
        .ok_or_else(|| IoError::Shape { declared_rows: rows, declared_cols: cols, message: "body too short".into() })?;

    let mut data = vec![0.0; total];
    let mut seen = 0;
    for (lineno, line) in lines {
        if seen == rows {
            return Err(IoError::Shape {
                declared_rows: rows,
                declared_cols: cols,
                message: format!("extra row at line {lineno}"),
            });
        }
        let mut count = 0;
        for (j, token) in line.split(',').enumerate() {
            if j >= cols {
                count = j + 1;
                continue;
            }
            data[seen + j * rows] = parse_value(token, lineno)?;
            count = j + 1;
        }
        if count != cols {
            return Err(IoError::Shape {
                declared_rows: rows,
                declared_cols: cols,
                message: format!("line {lineno} has {count} values"),
            });
        }
        seen += 1;
    }
    if seen != rows {
        return Err(IoError::Shape {
            declared_rows: rows,
            declared_cols: cols,
            message: format!("found {seen} rows"),
        });
    }
    DenseMatrix::from_column_major(rows, cols, data).map_err(|e| IoError::parse(1, e.to_string()))
}

/// Shortest round-trip scientific notation per entry.
pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = format!("# rows={} cols={}\n", a.rows(), a.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:e}", a[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, IoError> {
    parse_matrix(&read_to_string(path)?)
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<(), IoError> {
    std::fs::write(path, format_matrix(a)).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses `index,value` lines (0-based indices). `#` lines are comments.
pub fn parse_measurements(text: &str) -> Result<(Vec<usize>, Vec<f64>), IoError> {
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in content_lines(text) {
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| IoError::parse(lineno, "expected `index,value`"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad index {:?}", idx.trim())))?;
        indices.push(idx);
        values.push(parse_value(val, lineno)?);
    }
    Ok((indices, values))
}

pub fn format_measurements(indices: &[usize], values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in indices.iter().zip(values) {
        let _ = writeln!(out, "{i},{v:e}");
    }
    out
}

/// One non-negative integer segment label per line, in location order.
pub fn parse_segment_map(text: &str) -> Result<Vec<u32>, IoError> {
    content_lines(text)
        .map(|(lineno, line)| {
            line.parse::<u32>()
                .map_err(|_| IoError::parse(lineno, format!("bad segment label {line:?}")))
        })
        .collect()
}

pub fn format_segment_map(labels: &[u32]) -> String {
    let mut out = String::new();
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

/// Sensor list: `# index_base=0 count=<p> mode=<mode>` then one index per line.
pub fn format_sensor_file(set: &SensorSet) -> String {
    let mut out = format!("# index_base=0 count={} mode={}\n", set.len(), set.mode.as_str());
    for i in &set.indices {
        let _ = writeln!(out, "{i}");
    }
    out
}

pub fn parse_sensor_file(text: &str) -> Result<SensorSet, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| IoError::parse(1, "empty sensor file"))?;
    let mut count = None;
    let mut mode = None;
    let mut base_ok = false;
    for (key, value) in parse_header_fields(header, hline)? {
        match key {
            "index_base" => {
                if value != "0" {
                    return Err(IoError::parse(hline, format!("unsupported index_base={value}")));
                }
                base_ok = true;
            }
            "count" => {
                count = Some(value.parse::<usize>().map_err(|_| IoError::parse(hline, "bad count"))?);
            }
            "mode" => {
                mode = Some(match value {
                    "exact" => SelectionMode::Exact,
                    "oversampled" => SelectionMode::Oversampled,
                    "random" => SelectionMode::Random,
                    other => return Err(IoError::parse(hline, format!("unknown mode {other:?}"))),
                });
            }
            other => return Err(IoError::parse(hline, format!("unknown header field {other:?}"))),
        }
    }
    if !base_ok {
        return Err(IoError::parse(hline, "header must state index_base=0"));
    }
    let mut indices = Vec::new();
    for (lineno, line) in lines {
        indices.push(line.parse::<usize>().map_err(|_| IoError::parse(lineno, format!("bad index {line:?}")))?);
    }
    if let Some(c) = count {
        if c != indices.len() {
            return Err(IoError::parse(hline, format!("header declares {c} sensors, body has {}", indices.len())));
        }
    }
    Ok(SensorSet { indices, mode: mode.unwrap_or(SelectionMode::Exact), objective_logdet: None })
}
