//! `spectraforge`: design and evaluate multi-camera spectral imaging
//! systems from the command line.
//!
//! Exit codes: 0 on success, 1 when the numerics fail on valid inputs
//! (e.g. no prior spectrum explains an observation), 2 on input or
//! configuration errors. `SPECTRAFORGE_LOG` controls log verbosity only;
//! it never affects numeric results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectraforge_core::CoreError;

#[derive(Debug)]
pub struct CliError {
    message: String,
    /// true for failures of the numerics on valid inputs
    numerical: bool,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            numerical: false,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.numerical {
            1
        } else {
            2
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        Self {
            numerical: err.is_numerical(),
            message: err.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Parser)]
#[command(
    name = "spectraforge",
    version,
    about = "Multi-camera spectral imaging: filter selection, calibration, simulation, reconstruction"
)]
struct Cli {
    /// JSON config file; individual flags override its keys
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; every stage derives its own labelled stream from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (created if missing)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a compressed radiance prior from a cube corpus
    BuildPrior {
        /// Cube sidecar JSON files forming the corpus
        #[arg(long, value_name = "FILE", num_args = 1..)]
        corpus: Option<Vec<PathBuf>>,
        /// Illuminant spectrum CSV converting reflectance to radiance
        #[arg(long, value_name = "FILE")]
        illuminant: Option<PathBuf>,
        /// Number of cluster centers
        #[arg(long)]
        k: Option<usize>,
        /// Pixel subsampling stride
        #[arg(long)]
        stride: Option<usize>,
        /// Equal center weights instead of cluster shares
        #[arg(long)]
        uniform_weights: bool,
    },
    /// Rank every ordered filter pair by expected posterior variance
    SelectFilters {
        /// Directory of filter CSVs (id = file stem)
        #[arg(long, value_name = "DIR")]
        library: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_main: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_tele: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_wide: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        noise: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        exposure: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        prior: Option<PathBuf>,
        /// Monte Carlo samples per pair
        #[arg(long)]
        samples: Option<u64>,
        /// Disable the early stop at 0.5% relative standard error
        #[arg(long)]
        no_early_stop: bool,
    },
    /// Estimate a camera SSF from LED calibration samples
    FitSsf {
        /// Table of led_id,c_r,c_g,c_b rows
        #[arg(long, value_name = "FILE")]
        samples_csv: Option<PathBuf>,
        /// Directory holding <led_id>.csv spectra (default: table's dir)
        #[arg(long, value_name = "DIR")]
        spectra_dir: Option<PathBuf>,
        /// Smoothness weight; omitted = 5-fold cross-validation
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Fit per-channel noise parameters from patch statistics
    FitNoise {
        /// Table of channel,mean_charge,std_charge rows
        #[arg(long, value_name = "FILE")]
        patch_stats: Option<PathBuf>,
    },
    /// Compute the band-wise calibration divisor between two spectrometers
    Calibrate {
        /// Device spectrum CSV (numerator)
        #[arg(long, value_name = "FILE")]
        device: Option<PathBuf>,
        /// Reference spectrum CSV (denominator, strictly positive)
        #[arg(long, value_name = "FILE")]
        reference: Option<PathBuf>,
    },
    /// Simulate a noisy multi-camera capture of a hyperspectral cube
    Simulate {
        #[arg(long, value_name = "FILE")]
        cube: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_main: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_tele: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ssf_wide: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        filter_tele: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        filter_wide: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        noise: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        exposure: Option<PathBuf>,
        /// Capture only the unfiltered Main camera (3 channels)
        #[arg(long)]
        main_only: bool,
    },
    /// Posterior-mean reconstruction of a capture against a prior
    Reconstruct {
        #[arg(long, value_name = "FILE")]
        capture: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        prior: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        noise: Option<PathBuf>,
    },
    /// Score a reconstructed cube against ground truth
    Evaluate {
        #[arg(long, value_name = "FILE")]
        pred: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        gt: Option<PathBuf>,
        /// PSNR peak (default: maximum of the ground-truth cube)
        #[arg(long)]
        peak: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SPECTRAFORGE_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = config::FileConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(file_config.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot size thread pool: {e}")))?;
    }
    let ctx = commands::Context {
        seed: config::resolve(cli.seed, file_config.seed, 0),
        out_dir: config::resolve(cli.out.clone(), file_config.out_dir.clone(), PathBuf::from("out")),
        config: file_config,
    };
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| {
        CliError::input(format!("cannot create output dir {}: {e}", ctx.out_dir.display()))
    })?;

    match cli.command {
        Command::BuildPrior {
            corpus,
            illuminant,
            k,
            stride,
            uniform_weights,
        } => commands::build_prior(&ctx, corpus, illuminant, k, stride, uniform_weights),
        Command::SelectFilters {
            library,
            ssf_main,
            ssf_tele,
            ssf_wide,
            noise,
            exposure,
            prior,
            samples,
            no_early_stop,
        } => commands::select_filters(
            &ctx,
            commands::SelectFiltersArgs {
                library,
                ssf_main,
                ssf_tele,
                ssf_wide,
                noise,
                exposure,
                prior,
                samples,
                no_early_stop,
            },
        ),
        Command::FitSsf {
            samples_csv,
            spectra_dir,
            lambda,
        } => commands::fit_ssf(&ctx, samples_csv, spectra_dir, lambda),
        Command::FitNoise { patch_stats } => commands::fit_noise(&ctx, patch_stats),
        Command::Calibrate { device, reference } => commands::calibrate(&ctx, device, reference),
        Command::Simulate {
            cube,
            ssf_main,
            ssf_tele,
            ssf_wide,
            filter_tele,
            filter_wide,
            noise,
            exposure,
            main_only,
        } => commands::simulate(
            &ctx,
            commands::SimulateArgs {
                cube,
                ssf_main,
                ssf_tele,
                ssf_wide,
                filter_tele,
                filter_wide,
                noise,
                exposure,
                main_only,
            },
        ),
        Command::Reconstruct {
            capture,
            prior,
            noise,
        } => commands::reconstruct(&ctx, capture, prior, noise),
        Command::Evaluate { pred, gt, peak } => commands::evaluate(&ctx, pred, gt, peak),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_numerical_from_input_failures() {
        assert_eq!(CliError::from(CoreError::NoExplanatorySpectrum).exit_code(), 1);
        assert_eq!(CliError::from(CoreError::EmptyInput("x")).exit_code(), 2);
        assert_eq!(
            CliError::from(CoreError::Parse {
                path: "f.csv".into(),
                line: 3,
                msg: "bad".into()
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::input("missing").exit_code(), 2);
    }
}
