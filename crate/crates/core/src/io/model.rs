//! Trained model directory: `model.json`, `phi.csv`, `singular_values.csv`,
//! `sensors.txt` and, for centred bases, `mean.csv`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::formats::{format_sensor_file, parse_sensor_file, read_matrix, write_matrix};
use super::IoError;
use crate::basis::{FeatureBasis, RpcaDiagnostics};
use crate::linalg::DenseMatrix;
use crate::sensors::{SelectionMode, SensorSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub schema_version: u32,
    pub locations: usize,
    pub training_units: Vec<String>,
    pub rank_r: usize,
    pub truncation_threshold: f64,
    pub degenerate: bool,
    pub centered: bool,
    pub sensor_mode: SelectionMode,
    pub sensor_count: usize,
    pub objective_logdet: Option<f64>,
    pub rpca: RpcaDiagnostics,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub manifest: ModelManifest,
    pub basis: FeatureBasis,
    pub sensors: SensorSet,
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.display().to_string(), source }
}

pub fn save_model(dir: &Path, basis: &FeatureBasis, sensors: &SensorSet, training_units: &[String]) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = ModelManifest {
        schema_version: 1,
        locations: basis.location_count(),
        training_units: training_units.to_vec(),
        rank_r: basis.rank_r,
        truncation_threshold: basis.truncation_threshold,
        degenerate: basis.degenerate,
        centered: basis.mean.is_some(),
        sensor_mode: sensors.mode,
        sensor_count: sensors.len(),
        objective_logdet: sensors.objective_logdet,
        rpca: basis.rpca,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    let path = dir.join("model.json");
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    write_matrix(&dir.join("phi.csv"), &basis.phi_r)?;
    let sv = DenseMatrix::from_column_major(basis.singular_values.len(), 1, basis.singular_values.clone())
        .expect("singular values are finite");
    write_matrix(&dir.join("singular_values.csv"), &sv)?;
    if let Some(mean) = &basis.mean {
        let m = DenseMatrix::from_column_major(mean.len(), 1, mean.clone()).expect("means are finite");
        write_matrix(&dir.join("mean.csv"), &m)?;
    }
    let path = dir.join("sensors.txt");
    std::fs::write(&path, format_sensor_file(sensors)).map_err(|e| io_err(&path, e))
}

fn shape_error(message: String) -> IoError {
    IoError::Shape { declared_rows: 0, declared_cols: 0, message }
}

pub fn load_model(dir: &Path) -> Result<Model, IoError> {
    let path = dir.join("model.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut manifest: ModelManifest =
        serde_json::from_str(&text).map_err(|e| IoError::parse(e.line(), format!("model.json: {e}")))?;
    let phi_r = read_matrix(&dir.join("phi.csv"))?;
    if phi_r.rows() != manifest.locations || phi_r.cols() != manifest.rank_r {
        return Err(shape_error(format!(
            "phi.csv is {}x{}, manifest says {}x{}",
            phi_r.rows(),
            phi_r.cols(),
            manifest.locations,
            manifest.rank_r
        )));
    }
    let singular_values = read_matrix(&dir.join("singular_values.csv"))?.into_column_major();
    let mean = if manifest.centered {
        let m = read_matrix(&dir.join("mean.csv"))?;
        if m.rows() != manifest.locations || m.cols() != 1 {
            return Err(shape_error("mean.csv must be a single column over all locations".into()));
        }
        Some(m.into_column_major())
    } else {
        None
    };
    let sensors_path = dir.join("sensors.txt");
    let sensors_text = std::fs::read_to_string(&sensors_path).map_err(|e| io_err(&sensors_path, e))?;
    let mut sensors = parse_sensor_file(&sensors_text)?;
    sensors.objective_logdet = manifest.objective_logdet;
    sensors
        .validate(manifest.locations)
        .map_err(|e| shape_error(format!("sensors.txt: {e}")))?;
    manifest.sensor_count = sensors.len();
    let basis = FeatureBasis {
        rank_r: manifest.rank_r,
        truncation_threshold: manifest.truncation_threshold,
        degenerate: manifest.degenerate,
        rpca: manifest.rpca,
        singular_values,
        mean,
        phi_r,
    };
    Ok(Model { manifest, basis, sensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::select_oversampled;

    fn basis() -> FeatureBasis {
        let phi = DenseMatrix::from_columns(&[
            vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0],
            vec![0.5, -0.5, 0.5, -0.5, 0.0, 0.0],
        ])
        .unwrap();
        let mut b = FeatureBasis::from_phi(phi);
        b.singular_values = vec![3.0, 1.5, 0.25];
        b.truncation_threshold = 0.7;
        b
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = basis();
        b.mean = Some(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let sensors = select_oversampled(&b, 4).unwrap();
        save_model(dir.path(), &b, &sensors, &["a".into(), "b".into()]).unwrap();
        let model = load_model(dir.path()).unwrap();
        assert_eq!(model.basis, b);
        assert_eq!(model.sensors, sensors);
        assert_eq!(model.manifest.training_units, vec!["a", "b"]);
        assert!(model.manifest.centered);
    }

    #[test]
    fn inconsistent_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let b = basis();
        let sensors = crate::sensors::select_exact(&b).unwrap();
        save_model(dir.path(), &b, &sensors, &[]).unwrap();
        std::fs::write(dir.path().join("phi.csv"), "# rows=5 cols=2\n1,0\n0,1\n0,0\n0,0\n0,0\n").unwrap();
        assert!(matches!(load_model(dir.path()), Err(IoError::Shape { .. })));
        std::fs::write(dir.path().join("model.json"), "{").unwrap();
        assert!(matches!(load_model(dir.path()), Err(IoError::Parse { .. })));
        assert!(matches!(load_model(&dir.path().join("nope")), Err(IoError::File { .. })));
    }
}
