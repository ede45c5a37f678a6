//! Leave-one-out cross-validation, segmented training, random-sensor
//! baselines and sensor-count sweeps.
//!
//! Every fold trains on `m − 1` units (RPCA, rank selection and sensor
//! placement never see the held-out column), samples the held-out unit at the
//! chosen sensors, reconstructs it and scores the prediction. Folds run on the
//! rayon pool; results are reduced in fold order, so reports do not depend on
//! scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{extract_basis_lenient, median, BasisOptions, FeatureBasis, TrainingSet};
use crate::reconstruct::{
    accuracy_within_tolerance, predict_full, quantiles, HistogramBins, Measurement, DEFAULT_TOLERANCE_INCHES,
    QUANTILE_LEVELS,
};
use crate::rpca::RpcaConfig;
use crate::sensors::{select_exact, select_oversampled, select_pivots, select_random, SelectionMode, SensorError, SensorSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("cross-validation needs at least 3 units, got {0}")]
    TooFewUnits(usize),
    #[error("segment map has {labels} labels for {n} locations")]
    SegmentLength { labels: usize, n: usize },
    #[error("segment map is empty")]
    EmptySegmentMap,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// How many sensors each fold places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SensorPolicy {
    /// One sensor per basis mode.
    Exact,
    /// `min(p, n)` sensors; falls back to exact when that is not above the
    /// fold rank, and to the leading pivots when it is below.
    Oversampled { p: usize },
}

impl Default for SensorPolicy {
    fn default() -> Self {
        SensorPolicy::Oversampled { p: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    pub rpca: RpcaConfig,
    pub basis: BasisOptions,
    pub sensors: SensorPolicy,
    /// Inches.
    pub tolerance: f64,
    /// Random sensor sets evaluated per fold; zero disables the baseline.
    pub baseline_trials: usize,
    pub seed: u64,
    pub histogram: HistogramBins,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            rpca: RpcaConfig::default(),
            basis: BasisOptions::default(),
            sensors: SensorPolicy::default(),
            tolerance: DEFAULT_TOLERANCE_INCHES,
            baseline_trials: 50,
            seed: 0,
            histogram: HistogramBins::default(),
        }
    }
}

impl CrossvalConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.rpca.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(PipelineError::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let SensorPolicy::Oversampled { p: 0 } = self.sensors {
            return Err(PipelineError::InvalidConfig("sensor count p must be positive".into()));
        }
        if self.histogram.edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(PipelineError::InvalidConfig("histogram edges must increase strictly".into()));
        }
        Ok(())
    }
}

/// Segment label of every location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMap {
    labels: Vec<u32>,
}

impl SegmentMap {
    pub fn new(labels: Vec<u32>) -> Result<Self, PipelineError> {
        if labels.is_empty() {
            return Err(PipelineError::EmptySegmentMap);
        }
        Ok(Self { labels })
    }

    /// One segment covering `n` locations.
    pub fn single(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Location lists per label, labels ascending. Every list is non-empty.
    pub fn segments(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            out.entry(l).or_default().push(i);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub held_out_unit: String,
    pub rank_r: usize,
    pub p: usize,
    pub accuracy: f64,
    pub abs_errors: Vec<f64>,
    pub sensor_indices: Vec<usize>,
    pub sensor_mode: SelectionMode,
    /// Fewer sensors than basis modes.
    pub underdetermined: bool,
    pub rpca_converged: bool,
    pub rpca_iterations: usize,
    /// Mean accuracy of the random-sensor trials for this fold.
    pub baseline_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub held_out_unit: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `n × successful folds`.
    pub total_points: usize,
    pub points_within_tolerance: usize,
    pub overall_accuracy: f64,
    pub mean_fold_accuracy: f64,
    pub median_fold_accuracy: f64,
    /// `(level, abs error)` over every pooled point.
    pub error_quantiles: Vec<(f64, f64)>,
    pub histogram: Vec<u64>,
    /// Median absolute error at each location across folds.
    pub location_median_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub trials_per_fold: usize,
    pub mean_accuracy: f64,
    /// Pooled over every trial of every fold.
    pub histogram: Vec<u64>,
    pub total_points: usize,
    /// Folds where the optimized accuracy is at least the random mean.
    pub folds_optimized_not_worse: usize,
}

/// One row of the per-segment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummaryRow {
    pub segment: String,
    pub percent_accurate: f64,
    pub optimal_sensors_avg: f64,
    pub total_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub m: usize,
    pub tolerance: f64,
    pub histogram_edges: Vec<f64>,
    pub per_fold: Vec<FoldReport>,
    pub failed_folds: Vec<FoldFailure>,
    pub aggregate: Aggregate,
    /// Times each location was selected across folds.
    pub sensor_ensemble: Vec<u32>,
    pub baseline: Option<BaselineSummary>,
    pub segments: Vec<SegmentSummaryRow>,
}

/// Basis and exact pivots trained without one unit.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    pub basis: FeatureBasis,
}

/// Builds the fold model from every column except `fold`.
pub fn train_fold(data: &TrainingSet, fold: usize, config: &CrossvalConfig) -> Result<FoldModel, String> {
    let training = data.without_unit(fold);
    let basis = extract_basis_lenient(&training, &config.rpca, &config.basis).map_err(|e| e.to_string())?;
    if !basis.rpca.converged {
        log::warn!(
            "fold {fold}: RPCA stopped at residual {:.3e} after {} iterations",
            basis.rpca.final_residual,
            basis.rpca.iterations
        );
    }
    Ok(FoldModel { fold, basis })
}

/// Sensors for a basis under a policy; the flag marks an underdetermined set.
pub fn choose_sensors(basis: &FeatureBasis, policy: SensorPolicy) -> Result<(SensorSet, bool), SensorError> {
    let r = basis.rank_r;
    match policy {
        SensorPolicy::Exact => Ok((select_exact(basis)?, false)),
        SensorPolicy::Oversampled { p } => {
            let p = p.min(basis.location_count());
            if p > r {
                Ok((select_oversampled(basis, p)?, false))
            } else if p == r {
                Ok((select_exact(basis)?, false))
            } else {
                Ok((select_pivots(basis, p)?, true))
            }
        }
    }
}

fn trial_seed(seed: u64, fold: usize, trial: usize) -> u64 {
    seed ^ ((fold as u64) << 32).wrapping_add(trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct FoldEval {
    report: FoldReport,
    baseline_histogram: Vec<u64>,
}

fn evaluate_fold(
    data: &TrainingSet,
    model: &FoldModel,
    policy: SensorPolicy,
    config: &CrossvalConfig,
) -> Result<FoldEval, String> {
    let fold = model.fold;
    let basis = &model.basis;
    let x_true = data.x.column(fold);
    let n = x_true.len();
    let (sensors, underdetermined) = choose_sensors(basis, policy).map_err(|e| e.to_string())?;
    let pred = predict_full(basis, &Measurement::sample(x_true, &sensors.indices)).map_err(|e| e.to_string())?;
    let abs_errors: Vec<f64> = x_true.iter().zip(&pred.x_hat).map(|(a, b)| (a - b).abs()).collect();
    let accuracy = accuracy_within_tolerance(x_true, &pred.x_hat, config.tolerance).map_err(|e| e.to_string())?;

    let mut baseline_histogram = vec![0; config.histogram.bin_count()];
    let baseline_accuracy = if config.baseline_trials > 0 {
        let mut total = 0.0;
        for t in 0..config.baseline_trials {
            let random = select_random(n, sensors.len(), trial_seed(config.seed, fold, t)).map_err(|e| e.to_string())?;
            let rp = predict_full(basis, &Measurement::sample(x_true, &random.indices)).map_err(|e| e.to_string())?;
            total += accuracy_within_tolerance(x_true, &rp.x_hat, config.tolerance).map_err(|e| e.to_string())?;
            for (a, b) in x_true.iter().zip(&rp.x_hat) {
                baseline_histogram[config.histogram.bin_of((a - b).abs())] += 1;
            }
        }
        Some(total / config.baseline_trials as f64)
    } else {
        None
    };

    Ok(FoldEval {
        report: FoldReport {
            fold,
            held_out_unit: data.unit_ids[fold].clone(),
            rank_r: basis.rank_r,
            p: sensors.len(),
            accuracy,
            abs_errors,
            sensor_indices: sensors.indices,
            sensor_mode: sensors.mode,
            underdetermined,
            rpca_converged: basis.rpca.converged,
            rpca_iterations: basis.rpca.iterations,
            baseline_accuracy,
        },
        baseline_histogram,
    })
}

type FoldOutcome = Result<FoldEval, FoldFailure>;

fn run_folds(data: &TrainingSet, config: &CrossvalConfig) -> Vec<FoldOutcome> {
    (0..data.unit_count())
        .into_par_iter()
        .map(|fold| {
            let fail = |reason: String| FoldFailure { fold, held_out_unit: data.unit_ids[fold].clone(), reason };
            let model = train_fold(data, fold, config).map_err(fail)?;
            evaluate_fold(data, &model, config.sensors, config).map_err(fail)
        })
        .collect()
}

fn check_data(data: &TrainingSet, config: &CrossvalConfig) -> Result<(), PipelineError> {
    config.validate()?;
    if data.unit_count() < 3 {
        return Err(PipelineError::TooFewUnits(data.unit_count()));
    }
    Ok(())
}

fn assemble(n: usize, m: usize, config: &CrossvalConfig, outcomes: Vec<FoldOutcome>) -> RunReport {
    let mut per_fold = Vec::new();
    let mut failed_folds = Vec::new();
    let mut baseline_hist = vec![0u64; config.histogram.bin_count()];
    for outcome in outcomes {
        match outcome {
            Ok(eval) => {
                baseline_hist.iter_mut().zip(&eval.baseline_histogram).for_each(|(a, b)| *a += b);
                per_fold.push(eval.report);
            }
            Err(f) => failed_folds.push(f),
        }
    }

    let pooled: Vec<f64> = per_fold.iter().flat_map(|f| f.abs_errors.iter().copied()).collect();
    let within = pooled.iter().filter(|&&e| e < config.tolerance).count();
    let fold_acc: Vec<f64> = per_fold.iter().map(|f| f.accuracy).collect();
    let location_median_error = if per_fold.is_empty() {
        vec![f64::NAN; n]
    } else {
        (0..n).map(|i| median(&per_fold.iter().map(|f| f.abs_errors[i]).collect::<Vec<_>>())).collect()
    };
    let aggregate = Aggregate {
        total_points: pooled.len(),
        points_within_tolerance: within,
        overall_accuracy: if pooled.is_empty() { f64::NAN } else { within as f64 / pooled.len() as f64 },
        mean_fold_accuracy: if fold_acc.is_empty() { f64::NAN } else { fold_acc.iter().sum::<f64>() / fold_acc.len() as f64 },
        median_fold_accuracy: if fold_acc.is_empty() { f64::NAN } else { median(&fold_acc) },
        error_quantiles: if pooled.is_empty() { Vec::new() } else { quantiles(&pooled, &QUANTILE_LEVELS) },
        histogram: config.histogram.counts(&pooled),
        location_median_error,
    };

    let mut sensor_ensemble = vec![0u32; n];
    for f in &per_fold {
        for &i in &f.sensor_indices {
            sensor_ensemble[i] += 1;
        }
    }

    let baseline = (config.baseline_trials > 0 && !per_fold.is_empty()).then(|| {
        let accs: Vec<f64> = per_fold.iter().filter_map(|f| f.baseline_accuracy).collect();
        BaselineSummary {
            trials_per_fold: config.baseline_trials,
            mean_accuracy: accs.iter().sum::<f64>() / accs.len().max(1) as f64,
            total_points: baseline_hist.iter().sum::<u64>() as usize,
            histogram: baseline_hist,
            folds_optimized_not_worse: per_fold
                .iter()
                .filter(|f| f.baseline_accuracy.is_some_and(|b| f.accuracy >= b))
                .count(),
        }
    });

    let segments = vec![SegmentSummaryRow {
        segment: "all".into(),
        percent_accurate: 100.0 * aggregate.overall_accuracy,
        optimal_sensors_avg: per_fold.iter().map(|f| f.p as f64).sum::<f64>() / per_fold.len().max(1) as f64,
        total_points: n,
    }];

    RunReport {
        n,
        m,
        tolerance: config.tolerance,
        histogram_edges: config.histogram.edges.clone(),
        per_fold,
        failed_folds,
        aggregate,
        sensor_ensemble,
        baseline,
        segments,
    }
}

/// Leave-one-out cross-validation over every unit, optionally segmented.
pub fn loo_crossval(
    data: &TrainingSet,
    config: &CrossvalConfig,
    segment_map: Option<&SegmentMap>,
) -> Result<RunReport, PipelineError> {
    if let Some(map) = segment_map {
        return Ok(segment_crossval(data, map, config)?.combined);
    }
    check_data(data, config)?;
    let outcomes = run_folds(data, config);
    Ok(assemble(data.location_count(), data.unit_count(), config, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedRun {
    /// `(label, report)` per segment, labels ascending; reports use
    /// segment-local location indices.
    pub segments: Vec<(u32, RunReport)>,
    pub summary: Vec<SegmentSummaryRow>,
    /// Segments stitched back onto the full location set.
    pub combined: RunReport,
}

/// Runs the whole cross-validation independently on each segment.
pub fn segment_crossval(
    data: &TrainingSet,
    segment_map: &SegmentMap,
    config: &CrossvalConfig,
) -> Result<SegmentedRun, PipelineError> {
    check_data(data, config)?;
    let n = data.location_count();
    let m = data.unit_count();
    if segment_map.len() != n {
        return Err(PipelineError::SegmentLength { labels: segment_map.len(), n });
    }
    let groups = segment_map.segments();

    let mut per_segment_outcomes = Vec::with_capacity(groups.len());
    let mut segments = Vec::with_capacity(groups.len());
    let mut summary = Vec::with_capacity(groups.len());
    for (s, (&label, rows)) in groups.iter().enumerate() {
        let seg_config = CrossvalConfig {
            seed: config.seed ^ (s as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
            ..config.clone()
        };
        let subset = data.rows_subset(rows);
        let outcomes = run_folds(&subset, &seg_config);
        let report = assemble(rows.len(), m, &seg_config, clone_outcomes(&outcomes));
        summary.push(SegmentSummaryRow {
            segment: label.to_string(),
            ..report.segments[0].clone()
        });
        segments.push((label, report));
        per_segment_outcomes.push(outcomes);
    }

    let mut combined_outcomes = Vec::with_capacity(m);
    for fold in 0..m {
        let mut abs_errors = vec![0.0; n];
        let mut sensor_indices = Vec::new();
        let mut baseline_hist = vec![0u64; config.histogram.bin_count()];
        let mut baseline_weighted = 0.0;
        let mut combined = FoldReport {
            fold,
            held_out_unit: data.unit_ids[fold].clone(),
            rank_r: 0,
            p: 0,
            accuracy: 0.0,
            abs_errors: Vec::new(),
            sensor_indices: Vec::new(),
            sensor_mode: SelectionMode::Exact,
            underdetermined: false,
            rpca_converged: true,
            rpca_iterations: 0,
            baseline_accuracy: None,
        };
        let mut failure: Option<String> = None;
        for (outcomes, rows) in per_segment_outcomes.iter().zip(groups.values()) {
            match &outcomes[fold] {
                Ok(eval) => {
                    let r = &eval.report;
                    for (local, &global) in rows.iter().enumerate() {
                        abs_errors[global] = r.abs_errors[local];
                    }
                    sensor_indices.extend(r.sensor_indices.iter().map(|&i| rows[i]));
                    combined.rank_r += r.rank_r;
                    combined.p += r.p;
                    combined.underdetermined |= r.underdetermined;
                    combined.rpca_converged &= r.rpca_converged;
                    combined.rpca_iterations = combined.rpca_iterations.max(r.rpca_iterations);
                    if r.sensor_mode == SelectionMode::Oversampled {
                        combined.sensor_mode = SelectionMode::Oversampled;
                    }
                    baseline_weighted += r.baseline_accuracy.unwrap_or(0.0) * rows.len() as f64;
                    baseline_hist.iter_mut().zip(&eval.baseline_histogram).for_each(|(a, b)| *a += b);
                }
                Err(f) => {
                    failure.get_or_insert_with(|| f.reason.clone());
                }
            }
        }
        if let Some(reason) = failure {
            combined_outcomes.push(Err(FoldFailure { fold, held_out_unit: combined.held_out_unit, reason }));
            continue;
        }
        combined.accuracy = abs_errors.iter().filter(|&&e| e < config.tolerance).count() as f64 / n as f64;
        combined.abs_errors = abs_errors;
        combined.sensor_indices = sensor_indices;
        if config.baseline_trials > 0 {
            combined.baseline_accuracy = Some(baseline_weighted / n as f64);
        }
        combined_outcomes.push(Ok(FoldEval { report: combined, baseline_histogram: baseline_hist }));
    }

    let mut combined = assemble(n, m, config, combined_outcomes);
    combined.segments = summary.clone();
    Ok(SegmentedRun { segments, summary, combined })
}

fn clone_outcomes(outcomes: &[FoldOutcome]) -> Vec<FoldOutcome> {
    outcomes
        .iter()
        .map(|o| match o {
            Ok(e) => Ok(FoldEval { report: e.report.clone(), baseline_histogram: e.baseline_histogram.clone() }),
            Err(f) => Err(f.clone()),
        })
        .collect()
}

/// Error distribution at one sensor count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub folds: usize,
    pub failed_folds: usize,
    /// Folds whose rank exceeded `p`.
    pub underdetermined_folds: usize,
    pub overall_accuracy: f64,
    pub median_fold_accuracy: f64,
    /// `(level, abs error)` over pooled points.
    pub error_quantiles: Vec<(f64, f64)>,
}

/// Cross-validation at each sensor count, reusing one trained basis per fold.
pub fn sensor_sweep(data: &TrainingSet, p_values: &[usize], config: &CrossvalConfig) -> Result<Vec<SweepRow>, PipelineError> {
    check_data(data, config)?;
    if p_values.contains(&0) {
        return Err(PipelineError::InvalidConfig("sensor counts must be positive".into()));
    }
    let sweep_config = CrossvalConfig { baseline_trials: 0, ..config.clone() };
    let models: Vec<Result<FoldModel, String>> = (0..data.unit_count())
        .into_par_iter()
        .map(|fold| train_fold(data, fold, &sweep_config))
        .collect();

    let rows = p_values
        .iter()
        .map(|&p| {
            let policy = SensorPolicy::Oversampled { p };
            let outcomes: Vec<FoldOutcome> = models
                .par_iter()
                .enumerate()
                .map(|(fold, model)| {
                    let fail = |reason: String| FoldFailure { fold, held_out_unit: data.unit_ids[fold].clone(), reason };
                    let model = model.as_ref().map_err(|e| fail(e.clone()))?;
                    evaluate_fold(data, model, policy, &sweep_config).map_err(fail)
                })
                .collect();
            let report = assemble(data.location_count(), data.unit_count(), &sweep_config, outcomes);
            SweepRow {
                p,
                folds: report.per_fold.len(),
                failed_folds: report.failed_folds.len(),
                underdetermined_folds: report.per_fold.iter().filter(|f| f.underdetermined).count(),
                overall_accuracy: report.aggregate.overall_accuracy,
                median_fold_accuracy: report.aggregate.median_fold_accuracy,
                error_quantiles: report.aggregate.error_quantiles,
            }
        })
        .collect();
    Ok(rows)
}
