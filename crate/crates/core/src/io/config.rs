use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::basis::BasisOptions;
use crate::param::AutoOr;
use crate::pipeline::{CrossvalConfig, SensorPolicy};
use crate::reconstruct::{HistogramBins, DEFAULT_TOLERANCE_INCHES};
use crate::rpca::RpcaConfig;

/// Run configuration, read from TOML. Every section and key is optional;
/// unknown keys are rejected.
///
/// ```toml
/// [rpca]
/// lambda = "auto"        # or a positive number
/// mu = "auto"            # or a positive number
/// tolerance = 1e-7
/// max_iterations = 500
/// center = false
///
/// [sensors]
/// mode = "oversampled"   # or "exact"
/// p = 100
///
/// [prediction]
/// tolerance_inches = 0.005
///
/// [crossval]
/// baseline_trials = 50
/// seed = 0
///
/// [segmentation]
/// path = "none"          # or a segment map file, relative to the config file
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub rpca: RpcaSection,
    pub sensors: SensorsSection,
    pub prediction: PredictionSection,
    pub crossval: CrossvalSection,
    pub segmentation: SegmentationSection,
    /// Directory the config was read from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RpcaSection {
    pub lambda: AutoOr,
    pub mu: AutoOr,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub center: bool,
}

impl Default for RpcaSection {
    fn default() -> Self {
        let d = RpcaConfig::default();
        Self { lambda: d.lambda, mu: d.mu, tolerance: d.tolerance, max_iterations: d.max_iterations, center: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorMode {
    Exact,
    Oversampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorsSection {
    pub mode: SensorMode,
    /// Capped at the number of locations; ignored in exact mode.
    pub p: usize,
}

impl Default for SensorsSection {
    fn default() -> Self {
        Self { mode: SensorMode::Oversampled, p: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionSection {
    pub tolerance_inches: f64,
}

impl Default for PredictionSection {
    fn default() -> Self {
        Self { tolerance_inches: DEFAULT_TOLERANCE_INCHES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossvalSection {
    pub baseline_trials: usize,
    pub seed: u64,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        Self { baseline_trials: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationSection {
    pub path: String,
}

impl Default for SegmentationSection {
    fn default() -> Self {
        Self { path: "none".into() }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| IoError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IoError::File { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        self.rpca_config().validate().map_err(|e| IoError::Config(e.to_string()))?;
        self.crossval_config().validate().map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn rpca_config(&self) -> RpcaConfig {
        RpcaConfig {
            lambda: self.rpca.lambda,
            mu: self.rpca.mu,
            tolerance: self.rpca.tolerance,
            max_iterations: self.rpca.max_iterations,
        }
    }

    pub fn basis_options(&self) -> BasisOptions {
        BasisOptions { center: self.rpca.center }
    }

    pub fn sensor_policy(&self) -> SensorPolicy {
        match self.sensors.mode {
            SensorMode::Exact => SensorPolicy::Exact,
            SensorMode::Oversampled => SensorPolicy::Oversampled { p: self.sensors.p },
        }
    }

    pub fn crossval_config(&self) -> CrossvalConfig {
        CrossvalConfig {
            rpca: self.rpca_config(),
            basis: self.basis_options(),
            sensors: self.sensor_policy(),
            tolerance: self.prediction.tolerance_inches,
            baseline_trials: self.crossval.baseline_trials,
            seed: self.crossval.seed,
            histogram: HistogramBins::default(),
        }
    }

    /// Resolved segment map path, if segmentation is enabled.
    pub fn segmentation_path(&self) -> Option<PathBuf> {
        let raw = self.segmentation.path.trim();
        if raw.is_empty() || raw == "none" {
            return None;
        }
        let p = PathBuf::from(raw);
        Some(match (&self.base_dir, p.is_relative()) {
            (Some(base), true) => base.join(p),
            _ => p,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sensor_policy(), SensorPolicy::Oversampled { p: 100 });
        assert_eq!(cfg.prediction.tolerance_inches, 0.005);
        assert_eq!(cfg.rpca.lambda, AutoOr::Auto);
        assert!(cfg.segmentation_path().is_none());
    }

    #[test]
    fn full_config_parses() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [rpca]
            lambda = 0.01
            mu = "auto"
            tolerance = 1e-6
            max_iterations = 200
            [sensors]
            mode = "exact"
            [prediction]
            tolerance_inches = 0.01
            [crossval]
            baseline_trials = 0
            seed = 42
            [segmentation]
            path = "segments.txt"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.rpca.lambda, AutoOr::Value(0.01));
        assert_eq!(cfg.sensor_policy(), SensorPolicy::Exact);
        assert_eq!(cfg.crossval_config().seed, 42);
        assert_eq!(cfg.segmentation_path(), Some(PathBuf::from("segments.txt")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("[rpca]\nlamda = 1.0\n"), Err(IoError::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[extra]\n"), Err(IoError::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[sensors]\nmode = \"best\"\n"), Err(IoError::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[rpca]\nlambda = \"big\"\n"), Err(IoError::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[rpca]\ntolerance = 2.0\n").is_err());
        assert!(RunConfig::from_toml_str("[prediction]\ntolerance_inches = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[sensors]\np = 0\n").is_err());
    }
}
