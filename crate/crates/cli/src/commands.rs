//! Subcommand implementations. Every command resolves its inputs
//! (flag > config > default), folds the effective settings and the bytes
//! of each input file into a digest, runs the core pipeline, and writes
//! outputs that embed that digest. No output contains a timestamp, so
//! identical configurations produce byte-identical files.

use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use spectraforge_core::calib::{calibration_divisor, estimate_ssf, SsfSolverConfig};
use spectraforge_core::io;
use spectraforge_core::noise::fit_noise_params;
use spectraforge_core::prior::{
    kmeans_compress, subsample_corpus, KMeansOptions, PriorWeighting,
};
use spectraforge_core::metrics;
use spectraforge_core::sim::{mmse_reconstruct, simulate_capture};
use spectraforge_core::spectrum::FilterTransmittance;
use spectraforge_core::system::stack_system;
use spectraforge_core::uncertainty::{search_filters, EstimateOptions};

use crate::config::{require_path, resolve, sha256_file, DigestBuilder, FileConfig};
use crate::CliError;

pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config: FileConfig,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn build_prior(
    ctx: &Context,
    corpus: Option<Vec<PathBuf>>,
    illuminant: Option<PathBuf>,
    k: Option<usize>,
    stride: Option<usize>,
    uniform_weights: bool,
) -> Result<(), CliError> {
    let corpus = corpus
        .or_else(|| ctx.config.paths.corpus.clone())
        .filter(|c| !c.is_empty())
        .ok_or_else(|| {
            CliError::input("missing corpus: pass --corpus or set paths.corpus in the config")
        })?;
    let illuminant = illuminant.or_else(|| ctx.config.paths.illuminant.clone());
    let k = resolve(k, ctx.config.k, 1024);
    let stride = resolve(stride, ctx.config.stride, 29);
    let uniform = uniform_weights || ctx.config.uniform_weights.unwrap_or(false);

    let effective = json!({
        "seed": ctx.seed, "k": k, "stride": stride, "uniform_weights": uniform,
        "illuminant": illuminant.is_some(),
    });
    let mut digest = DigestBuilder::new("build-prior", &effective);
    for path in &corpus {
        digest.input("corpus", path)?;
    }
    if let Some(p) = &illuminant {
        digest.input("illuminant", p)?;
    }

    let cubes = corpus
        .iter()
        .map(io::read_cube)
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples = subsample_corpus(&cubes, stride)?;
    if let Some(p) = &illuminant {
        let spectrum = io::read_spectrum_csv(p)?;
        let illum = spectraforge_core::prior::IlluminantSpectrum::new(
            *spectrum.grid(),
            spectrum.values().to_vec(),
        )?;
        samples = samples.apply_illuminant(&illum)?;
    }
    info!("subsampled {} spectra from {} cubes", samples.count(), cubes.len());

    let opts = KMeansOptions {
        weighting: if uniform {
            PriorWeighting::Uniform
        } else {
            PriorWeighting::ClusterShare
        },
        ..Default::default()
    };
    let (prior, kmeans_info) = kmeans_compress(&samples, k, ctx.seed, &opts)?;

    let digest_inputs: Vec<serde_json::Value> = digest
        .inputs()
        .iter()
        .map(|(label, path)| {
            Ok(json!({
                "role": label,
                "path": path.display().to_string(),
                "sha256": sha256_file(path)?,
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let digest = digest.finish();

    io::write_prior(ctx.out("prior.json"), &prior, Some(&digest))?;
    let provenance = json!({
        "config_digest": digest,
        "seed": ctx.seed,
        "k": k,
        "stride": stride,
        "uniform_weights": uniform,
        "samples": samples.count(),
        "kmeans_iterations": kmeans_info.iterations,
        "reseeded_clusters": kmeans_info.reseeded_clusters,
        "inputs": digest_inputs,
    });
    write_json(&ctx.out("provenance.json"), &provenance)?;
    println!(
        "prior: {} centers from {} samples -> {}",
        prior.len(),
        samples.count(),
        ctx.out("prior.json").display()
    );
    Ok(())
}

pub struct SelectFiltersArgs {
    pub library: Option<PathBuf>,
    pub ssf_main: Option<PathBuf>,
    pub ssf_tele: Option<PathBuf>,
    pub ssf_wide: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub exposure: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub samples: Option<u64>,
    pub no_early_stop: bool,
}

pub fn select_filters(ctx: &Context, args: SelectFiltersArgs) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let library_dir = require_path(&args.library, &paths.library, "library")?;
    let ssf_main = require_path(&args.ssf_main, &paths.ssf_main, "ssf_main")?;
    let ssf_tele = require_path(&args.ssf_tele, &paths.ssf_tele, "ssf_tele")?;
    let ssf_wide = require_path(&args.ssf_wide, &paths.ssf_wide, "ssf_wide")?;
    let noise_path = require_path(&args.noise, &paths.noise, "noise")?;
    let exposure_path = require_path(&args.exposure, &paths.exposure, "exposure")?;
    let prior_path = require_path(&args.prior, &paths.prior, "prior")?;
    let n_samples = resolve(args.samples, ctx.config.n_samples, 1 << 20);
    let early_stop = if args.no_early_stop {
        None
    } else {
        Some(ctx.config.early_stop_rel.unwrap_or(0.005))
    };

    let effective = json!({
        "seed": ctx.seed, "n_samples": n_samples, "early_stop_rel": early_stop,
    });
    let mut digest = DigestBuilder::new("select-filters", &effective);
    digest.input("ssf_main", &ssf_main)?;
    digest.input("ssf_tele", &ssf_tele)?;
    digest.input("ssf_wide", &ssf_wide)?;
    digest.input("noise", &noise_path)?;
    digest.input("exposure", &exposure_path)?;
    digest.input("prior", &prior_path)?;
    let mut lib_files: Vec<PathBuf> = std::fs::read_dir(&library_dir)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", library_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    lib_files.sort();
    for f in &lib_files {
        digest.input("library", f)?;
    }
    let digest = digest.finish();

    let prior = io::read_prior(&prior_path)?;
    let target = *prior.grid();
    let ssfs = [
        io::read_ssf_csv(&ssf_main)?.resample(&target)?,
        io::read_ssf_csv(&ssf_tele)?.resample(&target)?,
        io::read_ssf_csv(&ssf_wide)?.resample(&target)?,
    ];
    let library = io::read_filter_library(&library_dir)?;
    let library = spectraforge_core::FilterLibrary::new(
        library
            .entries()
            .iter()
            .map(|(id, f)| Ok((id.clone(), f.resample(&target)?)))
            .collect::<Result<Vec<_>, spectraforge_core::CoreError>>()?,
    )?;
    let params = io::read_noise_json(&noise_path)?;
    let curve = io::read_exposure_json(&exposure_path)?;

    let opts = EstimateOptions {
        early_stop_rel: early_stop,
        ..Default::default()
    };
    info!(
        "searching {} ordered pairs over {} filters",
        library.len() * (library.len() - 1),
        library.len()
    );
    let reports = search_filters(
        &library, &ssfs, &prior, &params, &curve, n_samples, ctx.seed, &opts,
    )?;

    let comment = format!("config_digest={digest}");
    io::write_ranking_csv(ctx.out("ranking.csv"), &reports, Some(&comment))?;
    let ranking = json!({
        "config_digest": digest,
        "seed": ctx.seed,
        "n_samples": n_samples,
        "early_stop_rel": early_stop,
        "reports": reports,
    });
    write_json(&ctx.out("ranking.json"), &ranking)?;
    let best = &reports[0];
    println!(
        "best pair: ({}, {}) with v = {:.6e} +/- {:.1e} ({} pairs ranked)",
        best.filter_pair.0,
        best.filter_pair.1,
        best.v,
        best.std_error,
        reports.len()
    );
    Ok(())
}

pub fn fit_ssf(
    ctx: &Context,
    samples_csv: Option<PathBuf>,
    spectra_dir: Option<PathBuf>,
    lambda: Option<f64>,
) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let samples_csv = require_path(&samples_csv, &paths.samples_csv, "samples_csv")?;
    let spectra_dir = spectra_dir
        .or_else(|| paths.spectra_dir.clone())
        .unwrap_or_else(|| {
            samples_csv
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .to_path_buf()
        });
    let lambda = lambda.or(ctx.config.lambda);

    let samples = io::read_calibration_samples(&samples_csv, &spectra_dir)?;
    let effective = json!({ "lambda": lambda, "samples": samples.len() });
    let mut digest = DigestBuilder::new("fit-ssf", &effective);
    digest.input("samples_csv", &samples_csv)?;
    let digest = digest.finish();

    let fit = estimate_ssf(&samples, lambda, &SsfSolverConfig::default())?;
    io::write_ssf_csv(
        ctx.out("ssf.csv"),
        &fit.ssf,
        Some(&format!("config_digest={digest}")),
    )?;
    let report = json!({
        "config_digest": digest,
        "lambda": fit.lambda,
        "iterations": fit.iterations,
        "final_objective": fit.objective.last(),
        "samples": samples.len(),
    });
    write_json(&ctx.out("ssf_fit.json"), &report)?;
    println!(
        "ssf fitted from {} samples (lambda = {:.3e}, {} iterations) -> {}",
        samples.len(),
        fit.lambda,
        fit.iterations,
        ctx.out("ssf.csv").display()
    );
    Ok(())
}

pub fn fit_noise(ctx: &Context, patch_stats: Option<PathBuf>) -> Result<(), CliError> {
    let stats_path = require_path(&patch_stats, &ctx.config.paths.patch_stats, "patch_stats")?;
    let effective = json!({});
    let mut digest = DigestBuilder::new("fit-noise", &effective);
    digest.input("patch_stats", &stats_path)?;
    let digest = digest.finish();

    let stats = io::read_patch_stats(&stats_path)?;
    let fit = fit_noise_params(&stats)?;
    io::write_noise_json(
        ctx.out("noise.json"),
        &fit.params,
        Some(&fit.clamped_channels),
        Some(&digest),
    )?;
    println!(
        "noise parameters for {} channels ({} clamped) -> {}",
        fit.params.channels(),
        fit.clamped_channels.len(),
        ctx.out("noise.json").display()
    );
    Ok(())
}

pub fn calibrate(
    ctx: &Context,
    device: Option<PathBuf>,
    reference: Option<PathBuf>,
) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let device_path = require_path(&device, &paths.device_spectrum, "device_spectrum")?;
    let reference_path = require_path(&reference, &paths.reference_spectrum, "reference_spectrum")?;
    let effective = json!({});
    let mut digest = DigestBuilder::new("calibrate", &effective);
    digest.input("device_spectrum", &device_path)?;
    digest.input("reference_spectrum", &reference_path)?;
    let digest = digest.finish();

    let device = io::read_spectrum_csv(&device_path)?;
    let reference = io::read_spectrum_csv(&reference_path)?;
    let divisor = calibration_divisor(&device, &reference)?;
    io::write_divisor_csv(
        ctx.out("divisor.csv"),
        &divisor,
        Some(&format!("config_digest={digest}")),
    )?;
    println!("divisor over {} -> {}", divisor.grid(), ctx.out("divisor.csv").display());
    Ok(())
}

pub struct SimulateArgs {
    pub cube: Option<PathBuf>,
    pub ssf_main: Option<PathBuf>,
    pub ssf_tele: Option<PathBuf>,
    pub ssf_wide: Option<PathBuf>,
    pub filter_tele: Option<PathBuf>,
    pub filter_wide: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub exposure: Option<PathBuf>,
    pub main_only: bool,
}

pub fn simulate(ctx: &Context, args: SimulateArgs) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let cube_path = require_path(&args.cube, &paths.cube, "cube")?;
    let ssf_main = require_path(&args.ssf_main, &paths.ssf_main, "ssf_main")?;
    let noise_path = require_path(&args.noise, &paths.noise, "noise")?;
    let exposure_path = require_path(&args.exposure, &paths.exposure, "exposure")?;

    let effective = json!({ "seed": ctx.seed, "main_only": args.main_only });
    let mut digest = DigestBuilder::new("simulate", &effective);
    digest.input("cube", &cube_path)?;
    digest.input("ssf_main", &ssf_main)?;
    digest.input("noise", &noise_path)?;
    digest.input("exposure", &exposure_path)?;

    let cube = io::read_cube(&cube_path)?;
    let target = *cube.grid();
    let main = io::read_ssf_csv(&ssf_main)?.resample(&target)?;
    let unit = FilterTransmittance::all_pass(target);

    let sr = if args.main_only {
        stack_system(&[(&main, &unit)])?
    } else {
        let ssf_tele = require_path(&args.ssf_tele, &paths.ssf_tele, "ssf_tele")?;
        let ssf_wide = require_path(&args.ssf_wide, &paths.ssf_wide, "ssf_wide")?;
        let filter_tele = require_path(&args.filter_tele, &paths.filter_tele, "filter_tele")?;
        let filter_wide = require_path(&args.filter_wide, &paths.filter_wide, "filter_wide")?;
        digest.input("ssf_tele", &ssf_tele)?;
        digest.input("ssf_wide", &ssf_wide)?;
        digest.input("filter_tele", &filter_tele)?;
        digest.input("filter_wide", &filter_wide)?;
        let tele = io::read_ssf_csv(&ssf_tele)?.resample(&target)?;
        let wide = io::read_ssf_csv(&ssf_wide)?.resample(&target)?;
        let f_tele = io::read_filter_csv(&filter_tele)?.resample(&target)?;
        let f_wide = io::read_filter_csv(&filter_wide)?.resample(&target)?;
        stack_system(&[(&main, &unit), (&tele, &f_tele), (&wide, &f_wide)])?
    };
    let digest = digest.finish();

    let params = io::read_noise_json(&noise_path)?;
    let curve = io::read_exposure_json(&exposure_path)?;
    let capture = simulate_capture(&cube, &sr, &params, &curve, ctx.seed)?;
    let meta = io::FileMeta {
        config_digest: Some(digest),
        seed: Some(ctx.seed),
    };
    io::write_capture(ctx.out("capture.json"), &capture, &meta)?;
    println!(
        "simulated {}x{} capture, {} channels, exposures {:?} -> {}",
        capture.height(),
        capture.width(),
        capture.channels(),
        capture.t_per_camera(),
        ctx.out("capture.json").display()
    );
    Ok(())
}

pub fn reconstruct(
    ctx: &Context,
    capture: Option<PathBuf>,
    prior: Option<PathBuf>,
    noise: Option<PathBuf>,
) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let capture_path = require_path(&capture, &paths.capture, "capture")?;
    let prior_path = require_path(&prior, &paths.prior, "prior")?;
    let noise_path = require_path(&noise, &paths.noise, "noise")?;

    let effective = json!({ "seed": ctx.seed });
    let mut digest = DigestBuilder::new("reconstruct", &effective);
    digest.input("capture", &capture_path)?;
    digest.input("prior", &prior_path)?;
    digest.input("noise", &noise_path)?;
    let digest = digest.finish();

    let capture = io::read_capture(&capture_path)?;
    let prior = io::read_prior(&prior_path)?;
    let params = io::read_noise_json(&noise_path)?;
    let recon = mmse_reconstruct(&capture, &prior, &params)?;
    let meta = io::FileMeta {
        config_digest: Some(digest.clone()),
        seed: Some(ctx.seed),
    };
    io::write_cube(ctx.out("reconstructed.json"), &recon.cube, &meta)?;
    let report = json!({
        "config_digest": digest,
        "seed": ctx.seed,
        "failed_pixels": recon.failed_pixels,
        "pixels": recon.cube.pixel_count(),
    });
    write_json(&ctx.out("reconstruct_report.json"), &report)?;
    println!(
        "reconstructed {} pixels ({} failed) -> {}",
        recon.cube.pixel_count(),
        recon.failed_pixels,
        ctx.out("reconstructed.json").display()
    );
    Ok(())
}

pub fn evaluate(
    ctx: &Context,
    pred: Option<PathBuf>,
    gt: Option<PathBuf>,
    peak: Option<f64>,
) -> Result<(), CliError> {
    let paths = &ctx.config.paths;
    let pred_path = require_path(&pred, &paths.pred, "pred")?;
    let gt_path = require_path(&gt, &paths.gt, "gt")?;
    let peak = peak.or(ctx.config.peak);

    let effective = json!({ "seed": ctx.seed, "peak": peak });
    let mut digest = DigestBuilder::new("evaluate", &effective);
    digest.input("pred", &pred_path)?;
    digest.input("gt", &gt_path)?;
    let digest = digest.finish();

    let pred = io::read_cube(&pred_path)?;
    let gt = io::read_cube(&gt_path)?;
    let peak = match peak {
        Some(p) => p,
        None => gt.max_value(),
    };
    let mut report = metrics::evaluate(&pred, &gt, None, peak)?;
    report.seed = Some(ctx.seed);
    io::write_metrics_json(ctx.out("metrics.json"), &report, Some(&digest))?;
    println!(
        "psnr {:.2} dB | sam {:.3} deg | nse {:.3}% over {} pixels -> {}",
        report.psnr_db,
        report.sam_deg,
        report.nse_pct,
        report.valid_pixels,
        ctx.out("metrics.json").display()
    );
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(format!("cannot serialize {}: {e}", path.display())))?;
    std::fs::write(path, body + "\n")
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
