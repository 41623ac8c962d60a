//! `mandible-cad`: generate phantoms, train the close-border classifier,
//! detect lesions in CT volumes and evaluate detections against ground truth.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or contract violation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "mandible-cad",
    version,
    about = "Close-border and open-border mandibular lesion detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Cb,
    Ob,
}

#[derive(Subcommand)]
enum Command {
    /// Render one phantom from a spec file: volume.raw, ground_truth.csv, manifest.toml.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a benchmark cohort, one phantom directory per patient.
    Cohort {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        abnormal: usize,
        #[arg(long)]
        normal: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        slices: usize,
        /// Optional base spec supplying grid, noise, arc and intensity levels.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a training pool from annotated volumes and fit the classifier.
    Train {
        /// Volume manifests (files or directories holding manifest.toml).
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Training report; defaults to the model path with `.report.toml` appended.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run both detectors on a volume, cluster, and write results and overlays.
    Detect {
        /// Volume manifest (file or directory).
        #[arg(long, conflicts_with = "volume")]
        manifest: Option<PathBuf>,
        /// Bare RAW volume; needs --width, --height and --slices.
        #[arg(long, requires_all = ["width", "height", "slices"])]
        volume: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        slices: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Lesion-score threshold for CB detections; defaults to the config value.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep operating points over detection runs and write FROC tables.
    Evaluate {
        /// Output directories of `detect`.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Ground-truth CSV files; rows of all files are pooled.
        #[arg(long = "truth", required = true)]
        truths: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration file.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantom { spec, out } => commands::phantom(&spec, &out),
        Command::Cohort {
            kind,
            abnormal,
            normal,
            seed,
            slices,
            base,
            out,
        } => {
            let kind = match kind {
                KindArg::Cb => mandible_cad::LesionKind::CloseBorder,
                KindArg::Ob => mandible_cad::LesionKind::OpenBorder,
            };
            commands::cohort(kind, abnormal, normal, seed, slices, base.as_deref(), &out)
        }
        Command::Train {
            manifests,
            config,
            model,
            report,
        } => commands::train(&manifests, config.as_deref(), &model, report.as_deref()),
        Command::Detect {
            manifest,
            volume,
            width,
            height,
            slices,
            config,
            model,
            threshold,
            out,
        } => {
            let source = match (manifest, volume, width, height, slices) {
                (Some(m), _, _, _, _) => Ok(commands::VolumeSource::Manifest(m)),
                (None, Some(path), Some(width), Some(height), Some(n_slices)) => {
                    Ok(commands::VolumeSource::Raw {
                        path,
                        width,
                        height,
                        n_slices,
                    })
                }
                _ => Err(commands::CliError::usage(
                    "detect needs --manifest or --volume with its geometry",
                )),
            };
            source.and_then(|s| commands::detect(&s, config.as_deref(), &model, threshold, &out))
        }
        Command::Evaluate {
            runs,
            truths,
            config,
            out,
        } => commands::evaluate(&runs, &truths, config.as_deref(), &out),
        Command::Config => {
            print!(
                "{}",
                mandible_cad::config::CadConfig::default().to_toml_string()
            );
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
