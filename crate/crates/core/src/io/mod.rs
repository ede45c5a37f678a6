//! Text file formats and run configuration.
//!
//! All parsers take `&str` and never panic on malformed input; they are the
//! entry points exercised by the fuzz targets.

mod config;
mod formats;
mod model;
pub mod report;

pub use config::{
    CrossvalSection, PredictionSection, RpcaSection, RunConfig, SegmentationSection, SensorsSection, SensorMode,
};
pub use model::{load_model, save_model, Model, ModelManifest};
pub use formats::{
    format_matrix, format_measurements, format_segment_map, format_sensor_file, parse_matrix, parse_measurements,
    parse_segment_map, parse_sensor_file, read_matrix, write_matrix,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("declared shape {declared_rows}x{declared_cols} does not match body ({message})")]
    Shape { declared_rows: usize, declared_cols: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { line, message: message.into() }
    }
}
