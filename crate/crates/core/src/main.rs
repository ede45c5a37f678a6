use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gapsense::basis::{extract_basis, extract_basis_lenient, BasisError, TrainingSet};
use gapsense::datagen::{generate, SynthSpec};
use gapsense::io::report::{sweep_csv, sweep_json, write_crossval_outputs};
use gapsense::io::{
    load_model, parse_measurements, parse_segment_map, read_matrix, save_model, write_matrix, IoError, RunConfig,
};
use gapsense::linalg::{DenseMatrix, LinalgError};
use gapsense::pipeline::{choose_sensors, loo_crossval, sensor_sweep, PipelineError, SegmentMap};
use gapsense::reconstruct::{predict_full, Measurement, ReconstructError};
use gapsense::sensors::SensorError;

#[derive(Parser)]
#[command(name = "gapsense", version, about = "Sparse gap sensing and prediction for predictive shimming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic gap data with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a feature basis and sensor set from a training matrix.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep the basis even if RPCA hits its iteration cap.
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// Predict a full gap field from sensor measurements.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Leave-one-out cross-validation with report tables.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated error distribution versus sensor count.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy)]
enum Class {
    Internal = 1,
    Config = 3,
    BadInput = 4,
    Shape = 5,
    IndexOutOfRange = 6,
    NonConvergence = 7,
    Io = 8,
}

impl Class {
    fn name(self) -> &'static str {
        match self {
            Class::Internal => "internal",
            Class::Config => "config",
            Class::BadInput => "bad-input",
            Class::Shape => "shape-mismatch",
            Class::IndexOutOfRange => "index-out-of-range",
            Class::NonConvergence => "non-convergence",
            Class::Io => "io",
        }
    }
}

struct Failure {
    class: Class,
    message: String,
}

impl Failure {
    fn new(class: Class, message: impl ToString) -> Self {
        Self { class, message: message.to_string() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let class = match &e {
            IoError::Parse { .. } => Class::BadInput,
            IoError::Shape { .. } => Class::Shape,
            IoError::Config(_) => Class::Config,
            IoError::File { .. } => Class::Io,
        };
        Failure::new(class, e)
    }
}

fn linalg_class(e: &LinalgError) -> Class {
    match e {
        LinalgError::ShapeMismatch(_) | LinalgError::Empty => Class::Shape,
        LinalgError::NonFinite { .. } | LinalgError::InvalidArgument(_) => Class::BadInput,
        LinalgError::NoConvergence { .. } => Class::NonConvergence,
    }
}

fn sensor_class(e: &SensorError) -> Class {
    match e {
        SensorError::IndexOutOfRange { .. } => Class::IndexOutOfRange,
        SensorError::Duplicate(_) => Class::BadInput,
        SensorError::Linalg(l) => linalg_class(l),
        _ => Class::Shape,
    }
}

impl From<BasisError> for Failure {
    fn from(e: BasisError) -> Self {
        let class = match &e {
            BasisError::NotConverged { .. } => Class::NonConvergence,
            BasisError::Rpca(gapsense::rpca::RpcaError::InvalidConfig(_)) => Class::Config,
            BasisError::Rpca(gapsense::rpca::RpcaError::Linalg(l)) | BasisError::Linalg(l) => linalg_class(l),
            BasisError::NonFinite { .. } => Class::BadInput,
            _ => Class::Shape,
        };
        Failure::new(class, e)
    }
}

impl From<SensorError> for Failure {
    fn from(e: SensorError) -> Self {
        Failure::new(sensor_class(&e), e)
    }
}

impl From<ReconstructError> for Failure {
    fn from(e: ReconstructError) -> Self {
        let class = match &e {
            ReconstructError::Sensor(s) => sensor_class(s),
            ReconstructError::Linalg(l) => linalg_class(l),
            ReconstructError::NonFinite(_) => Class::BadInput,
            _ => Class::Shape,
        };
        Failure::new(class, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let class = match &e {
            PipelineError::InvalidConfig(_) => Class::Config,
            _ => Class::Shape,
        };
        Failure::new(class, e)
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn load_training(path: &Path) -> Result<TrainingSet, Failure> {
    Ok(TrainingSet::from_matrix(read_matrix(path)?, None)?)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|source| Failure::from(IoError::File { path: dir.display().to_string(), source }))
}

fn column(values: Vec<f64>) -> DenseMatrix {
    let n = values.len();
    DenseMatrix::from_column_major(n, 1, values).expect("finite column")
}

fn synth(spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|source| Failure::from(IoError::File { path: spec_path.display().to_string(), source }))?;
    let spec: SynthSpec = toml::from_str(&text).map_err(|e| Failure::new(Class::Config, e.message()))?;
    let data = generate(&spec).map_err(|e| Failure::new(Class::Config, e))?;
    ensure_dir(out)?;
    write_matrix(&out.join("X.csv"), &data.x)?;
    write_matrix(&out.join("L_true.csv"), &data.l_true)?;
    write_matrix(&out.join("S_true.csv"), &data.s_true)?;
    write_matrix(&out.join("phi_true.csv"), &data.phi_true)?;
    write_matrix(&out.join("coeffs_true.csv"), &data.coeffs_true)?;
    let echo = toml::to_string(&spec).map_err(|e| Failure::new(Class::Internal, e))?;
    std::fs::write(out.join("spec.toml"), echo)
        .map_err(|source| Failure::from(IoError::File { path: out.display().to_string(), source }))?;
    println!("wrote {}x{} synthetic matrix to {}", spec.n, spec.m, out.display());
    Ok(())
}

fn train(data: &Path, config: Option<&Path>, out: &Path, allow_unconverged: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let training = load_training(data)?;
    let basis = if allow_unconverged {
        extract_basis_lenient(&training, &cfg.rpca_config(), &cfg.basis_options())?
    } else {
        extract_basis(&training, &cfg.rpca_config(), &cfg.basis_options())?
    };
    let (sensors, underdetermined) = choose_sensors(&basis, cfg.sensor_policy())?;
    if underdetermined {
        log::warn!("{} sensors for rank {}: predictions are underdetermined", sensors.len(), basis.rank_r);
    }
    save_model(out, &basis, &sensors, &training.unit_ids)?;
    println!(
        "rank {} with {} {} sensors (RPCA {} iterations, converged: {}) -> {}",
        basis.rank_r,
        sensors.len(),
        sensors.mode.as_str(),
        basis.rpca.iterations,
        basis.rpca.converged,
        out.display()
    );
    Ok(())
}

fn predict(model_dir: &Path, measurements: &Path, out: &Path) -> Result<(), Failure> {
    let model = load_model(model_dir)?;
    let text = std::fs::read_to_string(measurements)
        .map_err(|source| Failure::from(IoError::File { path: measurements.display().to_string(), source }))?;
    let (indices, values) = parse_measurements(&text)?;
    let meas = Measurement::new(indices, values)?;
    let pred = predict_full(&model.basis, &meas)?;
    ensure_dir(out)?;
    write_matrix(&out.join("prediction.csv"), &column(pred.x_hat))?;
    write_matrix(&out.join("coefficients.csv"), &column(pred.a_hat))?;
    println!(
        "predicted {} locations from {} measurements -> {}",
        model.basis.location_count(),
        meas.indices.len(),
        out.display()
    );
    Ok(())
}

fn crossval(data: &Path, config: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let training = load_training(data)?;
    let segment_map = match cfg.segmentation_path() {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|source| Failure::from(IoError::File { path: path.display().to_string(), source }))?;
            Some(SegmentMap::new(parse_segment_map(&text)?)?)
        }
        None => None,
    };
    let report = loo_crossval(&training, &cfg.crossval_config(), segment_map.as_ref())?;
    write_crossval_outputs(out, &report)?;
    println!(
        "{} folds ({} failed): {:.2}% of {} points within {} in",
        report.per_fold.len(),
        report.failed_folds.len(),
        100.0 * report.aggregate.overall_accuracy,
        report.aggregate.total_points,
        report.tolerance
    );
    Ok(())
}

fn sweep(data: &Path, p: &[usize], config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let training = load_training(data)?;
    let rows = sensor_sweep(&training, p, &cfg.crossval_config())?;
    let table = sweep_csv(&rows);
    match out {
        Some(path) => {
            std::fs::write(path, &table)
                .map_err(|source| Failure::from(IoError::File { path: path.display().to_string(), source }))?;
            let json_path = path.with_extension("json");
            std::fs::write(&json_path, sweep_json(&rows))
                .map_err(|source| Failure::from(IoError::File { path: json_path.display().to_string(), source }))?;
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Train { data, config, out, allow_unconverged } => train(&data, config.as_deref(), &out, allow_unconverged),
        Command::Predict { model, measurements, out } => predict(&model, &measurements, &out),
        Command::Crossval { data, config, out } => crossval(&data, config.as_deref(), &out),
        Command::Sweep { data, p, config, out } => sweep(&data, &p, config.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let message = f.message.replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {message}", f.class.name());
            ExitCode::from(f.class as u8)
        }
    }
}
