//! Report tables written by `crossval` and `sweep`.
//!
//! Column schemas (version [`REPORT_SCHEMA_VERSION`]):
//!
//! | file | columns |
//! |------|---------|
//! | `folds.csv` | `fold,held_out_unit,rank_r,p,accuracy,baseline_accuracy,underdetermined,rpca_converged` |
//! | `location_median_error.csv` | `location,median_abs_error` |
//! | `error_histogram.csv` | `bin_lower,bin_upper,count,fraction,cdf` |
//! | `sensor_ensemble.csv` | `location,count` (selected locations only) |
//! | `segment_summary.csv` | `segment,percent_accurate,optimal_sensors_avg,total_points` |
//! | `baseline_histogram.csv` | `bin_lower,bin_upper,optimal_count,random_count,optimal_fraction,random_fraction` |
//! | `sweep.csv` | `p,folds,failed_folds,underdetermined_folds,overall_accuracy,median_fold_accuracy,err_q00,err_q05,err_q25,err_q50,err_q75,err_q95,err_q100` |

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::IoError;
use crate::pipeline::{RunReport, SweepRow};
use crate::reconstruct::HistogramBins;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const FOLDS_HEADER: &str = "fold,held_out_unit,rank_r,p,accuracy,baseline_accuracy,underdetermined,rpca_converged";
pub const LOCATION_HEADER: &str = "location,median_abs_error";
pub const HISTOGRAM_HEADER: &str = "bin_lower,bin_upper,count,fraction,cdf";
pub const ENSEMBLE_HEADER: &str = "location,count";
pub const SEGMENT_HEADER: &str = "segment,percent_accurate,optimal_sensors_avg,total_points";
pub const BASELINE_HEADER: &str = "bin_lower,bin_upper,optimal_count,random_count,optimal_fraction,random_fraction";
pub const SWEEP_HEADER: &str = "p,folds,failed_folds,underdetermined_folds,overall_accuracy,median_fold_accuracy,err_q00,err_q05,err_q25,err_q50,err_q75,err_q95,err_q100";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

fn frac(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

pub fn folds_csv(report: &RunReport) -> String {
    let mut out = format!("{FOLDS_HEADER}\n");
    for f in &report.per_fold {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.fold,
            f.held_out_unit,
            f.rank_r,
            f.p,
            f.accuracy,
            opt(f.baseline_accuracy),
            f.underdetermined,
            f.rpca_converged
        );
    }
    out
}

pub fn location_median_csv(report: &RunReport) -> String {
    let mut out = format!("{LOCATION_HEADER}\n");
    for (i, e) in report.aggregate.location_median_error.iter().enumerate() {
        let _ = writeln!(out, "{i},{e:e}");
    }
    out
}

pub fn histogram_csv(edges: &[f64], counts: &[u64]) -> String {
    let bins = HistogramBins { edges: edges.to_vec() };
    let total: u64 = counts.iter().sum();
    let mut cum = 0;
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for (k, &c) in counts.iter().enumerate() {
        cum += c;
        let (lo, hi) = bins.bounds(k);
        let _ = writeln!(out, "{lo:e},{hi:e},{c},{},{}", frac(c, total), frac(cum, total));
    }
    out
}

pub fn ensemble_csv(report: &RunReport) -> String {
    let mut out = format!("{ENSEMBLE_HEADER}\n");
    for (i, &c) in report.sensor_ensemble.iter().enumerate() {
        if c > 0 {
            let _ = writeln!(out, "{i},{c}");
        }
    }
    out
}

pub fn segment_summary_csv(report: &RunReport) -> String {
    let mut out = format!("{SEGMENT_HEADER}\n");
    for row in &report.segments {
        let _ = writeln!(
            out,
            "{},{:.2},{:.2},{}",
            row.segment, row.percent_accurate, row.optimal_sensors_avg, row.total_points
        );
    }
    out
}

pub fn baseline_csv(report: &RunReport) -> Option<String> {
    let baseline = report.baseline.as_ref()?;
    let bins = HistogramBins { edges: report.histogram_edges.clone() };
    let opt_total: u64 = report.aggregate.histogram.iter().sum();
    let rnd_total: u64 = baseline.histogram.iter().sum();
    let mut out = format!("{BASELINE_HEADER}\n");
    for (k, (&o, &r)) in report.aggregate.histogram.iter().zip(&baseline.histogram).enumerate() {
        let (lo, hi) = bins.bounds(k);
        let _ = writeln!(out, "{lo:e},{hi:e},{o},{r},{},{}", frac(o, opt_total), frac(r, rnd_total));
    }
    Some(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for row in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            row.p,
            row.folds,
            row.failed_folds,
            row.underdetermined_folds,
            row.overall_accuracy,
            row.median_fold_accuracy
        );
        if row.error_quantiles.is_empty() {
            out.push_str(",,,,,,,");
        }
        for (_, q) in &row.error_quantiles {
            let _ = write!(out, ",{q:e}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a top-level `schema_version`; `body` must serialize as a
/// struct or map.
pub fn to_json<T: Serialize>(body: &T) -> String {
    serde_json::to_string_pretty(&Versioned { schema_version: REPORT_SCHEMA_VERSION, body })
        .expect("report types serialise")
}

#[derive(Serialize)]
struct SweepReport<'a> {
    rows: &'a [SweepRow],
}

pub fn sweep_json(rows: &[SweepRow]) -> String {
    to_json(&SweepReport { rows })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), IoError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// Writes `report.json` and every CSV table into `dir` (created if missing).
pub fn write_crossval_outputs(dir: &Path, report: &RunReport) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.display().to_string(), source })?;
    write(dir, "report.json", &to_json(report))?;
    write(dir, "folds.csv", &folds_csv(report))?;
    write(dir, "location_median_error.csv", &location_median_csv(report))?;
    write(dir, "error_histogram.csv", &histogram_csv(&report.histogram_edges, &report.aggregate.histogram))?;
    write(dir, "sensor_ensemble.csv", &ensemble_csv(report))?;
    write(dir, "segment_summary.csv", &segment_summary_csv(report))?;
    if let Some(b) = baseline_csv(report) {
        write(dir, "baseline_histogram.csv", &b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_pinned() {
        let golden = [
            (FOLDS_HEADER, "fold,held_out_unit,rank_r,p,accuracy,baseline_accuracy,underdetermined,rpca_converged"),
            (LOCATION_HEADER, "location,median_abs_error"),
            (HISTOGRAM_HEADER, "bin_lower,bin_upper,count,fraction,cdf"),
            (ENSEMBLE_HEADER, "location,count"),
            (SEGMENT_HEADER, "segment,percent_accurate,optimal_sensors_avg,total_points"),
            (BASELINE_HEADER, "bin_lower,bin_upper,optimal_count,random_count,optimal_fraction,random_fraction"),
            (
                SWEEP_HEADER,
                "p,folds,failed_folds,underdetermined_folds,overall_accuracy,median_fold_accuracy,\
                 err_q00,err_q05,err_q25,err_q50,err_q75,err_q95,err_q100",
            ),
        ];
        for (got, want) in golden {
            assert_eq!(got, want);
        }
        assert_eq!(REPORT_SCHEMA_VERSION, 1);
    }

    #[test]
    fn histogram_table_golden() {
        let table = histogram_csv(&[0.001, 0.01], &[1, 2, 1]);
        assert_eq!(
            table,
            "bin_lower,bin_upper,count,fraction,cdf\n\
             0e0,1e-3,1,0.25,0.25\n\
             1e-3,1e-2,2,0.5,0.75\n\
             1e-2,inf,1,0.25,1\n"
        );
    }

    #[test]
    fn sweep_table_golden() {
        let rows = vec![
            SweepRow {
                p: 3,
                folds: 4,
                failed_folds: 0,
                underdetermined_folds: 1,
                overall_accuracy: 0.5,
                median_fold_accuracy: 0.75,
                error_quantiles: vec![(0.0, 0.0), (0.05, 1e-4), (0.25, 2e-4), (0.5, 1e-3), (0.75, 2e-3), (0.95, 0.01), (1.0, 0.1)],
            },
            SweepRow {
                p: 9,
                folds: 0,
                failed_folds: 4,
                underdetermined_folds: 0,
                overall_accuracy: f64::NAN,
                median_fold_accuracy: f64::NAN,
                error_quantiles: vec![],
            },
        ];
        let table = sweep_csv(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[1], "3,4,0,1,0.5,0.75,0e0,1e-4,2e-4,1e-3,2e-3,1e-2,1e-1");
        assert_eq!(lines[2], "9,0,4,0,NaN,NaN,,,,,,,");
        assert_eq!(lines[1].split(',').count(), SWEEP_HEADER.split(',').count());
        assert_eq!(lines[2].split(',').count(), SWEEP_HEADER.split(',').count());
        let json: serde_json::Value = serde_json::from_str(&sweep_json(&rows[..1])).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["rows"][0]["p"], 3);
    }
}
