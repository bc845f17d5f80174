//! End-to-end tests of the `spectraforge` binary: workflow wiring, exit
//! codes, determinism of outputs, and the flag > config > default
//! precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectraforge_core::cube::HsiCube;
use spectraforge_core::grid::WavelengthGrid;
use spectraforge_core::io;
use spectraforge_core::noise::{ExposureCurve, NoiseParams};
use spectraforge_core::spectrum::FilterTransmittance;
use spectraforge_core::system::CameraSSF;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectraforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn grid(n: usize) -> WavelengthGrid {
    WavelengthGrid::new(400.0, 10.0, n).unwrap()
}

/// 4x4 cube with 16 distinct pixel spectra, every value exactly
/// representable in f32 so file round trips are lossless. Band 0 encodes
/// the pixel index, which keeps the spectra distinct for any n.
fn toy_cube(n: usize) -> HsiCube {
    HsiCube::from_fn(4, 4, grid(n), |r, c| {
        let p = r * 4 + c;
        (0..n)
            .map(|b| {
                if b == 0 {
                    p as f64 / 16.0 + 0.125
                } else {
                    let code = p * n + b;
                    ((code * 37 + 11) % 64) as f64 / 64.0 + 0.125
                }
            })
            .collect()
    })
    .unwrap()
}

fn smooth_ssf(n: usize, shift: f64) -> CameraSSF {
    let g = grid(n);
    let curve = |center: f64| -> Vec<f64> {
        g.wavelengths()
            .map(|wl| (-(wl - center - shift).powi(2) / 4000.0).exp())
            .collect()
    };
    CameraSSF::from_channel_values(g, &curve(610.0), &curve(540.0), &curve(460.0)).unwrap()
}

/// Standard fixture directory: cube, three SSFs, two filters, zero-noise
/// and noisy parameter files, exposure curve.
fn write_fixture(dir: &Path, n: usize) -> PathBuf {
    let cube = toy_cube(n);
    io::write_cube(dir.join("cube.json"), &cube, &io::FileMeta::default()).unwrap();
    for (name, shift) in [("main", 0.0), ("tele", 14.0), ("wide", -11.0)] {
        io::write_ssf_csv(dir.join(format!("{name}.csv")), &smooth_ssf(n, shift), None).unwrap();
    }
    let g = grid(n);
    let long_pass = FilterTransmittance::new(
        g,
        g.wavelengths()
            .map(|wl| 1.0 / (1.0 + (-(wl - 565.0) / 12.0).exp()))
            .collect(),
    )
    .unwrap();
    let short_pass = FilterTransmittance::new(
        g,
        g.wavelengths()
            .map(|wl| 1.0 / (1.0 + ((wl - 565.0) / 12.0).exp()))
            .collect(),
    )
    .unwrap();
    io::write_filter_csv(dir.join("long_pass.csv"), &long_pass, None).unwrap();
    io::write_filter_csv(dir.join("short_pass.csv"), &short_pass, None).unwrap();
    let zero = NoiseParams::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
    io::write_noise_json(dir.join("noise_zero.json"), &zero, None, None).unwrap();
    let noisy = NoiseParams::new(vec![5e-4; 3], vec![2e-4; 3]).unwrap();
    io::write_noise_json(dir.join("noise.json"), &noisy, None, None).unwrap();
    // pure read noise with a pinned exposure: the noise floor stays fixed
    // no matter what the filters transmit
    let read_only = NoiseParams::new(vec![0.0; 3], vec![0.01; 3]).unwrap();
    io::write_noise_json(dir.join("noise_read.json"), &read_only, None, None).unwrap();
    io::write_exposure_json(dir.join("exposure.json"), &ExposureCurve::default(), None).unwrap();
    let pinned = ExposureCurve::new(1.0, 0.0, 0.05, 0.05).unwrap();
    io::write_exposure_json(dir.join("exposure_fixed.json"), &pinned, None).unwrap();
    dir.to_path_buf()
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn zero_noise_pipeline_reaches_perfect_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 6);
    let out = tmp.path().join("out");

    // prior: every distinct cube pixel becomes its own center
    let o = run(&[
        "--out",
        &path_str(&out),
        "--seed",
        "5",
        "build-prior",
        "--corpus",
        &path_str(&dir.join("cube.json")),
        "--k",
        "16",
        "--stride",
        "1",
    ]);
    assert_ok(&o);

    let o = run(&[
        "--out",
        &path_str(&out),
        "--seed",
        "9",
        "simulate",
        "--cube",
        &path_str(&dir.join("cube.json")),
        "--ssf-main",
        &path_str(&dir.join("main.csv")),
        "--ssf-tele",
        &path_str(&dir.join("tele.csv")),
        "--ssf-wide",
        &path_str(&dir.join("wide.csv")),
        "--filter-tele",
        &path_str(&dir.join("long_pass.csv")),
        "--filter-wide",
        &path_str(&dir.join("short_pass.csv")),
        "--noise",
        &path_str(&dir.join("noise_zero.json")),
        "--exposure",
        &path_str(&dir.join("exposure.json")),
    ]);
    assert_ok(&o);

    let o = run(&[
        "--out",
        &path_str(&out),
        "reconstruct",
        "--capture",
        &path_str(&out.join("capture.json")),
        "--prior",
        &path_str(&out.join("prior.json")),
        "--noise",
        &path_str(&dir.join("noise_zero.json")),
    ]);
    assert_ok(&o);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("reconstruct_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["failed_pixels"], 0);

    let o = run(&[
        "--out",
        &path_str(&out),
        "evaluate",
        "--pred",
        &path_str(&out.join("reconstructed.json")),
        "--gt",
        &path_str(&dir.join("cube.json")),
    ]);
    assert_ok(&o);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["psnr_db"], 100.0);
    assert_eq!(metrics["sam_deg"], 0.0);
    assert_eq!(metrics["nse_pct"], 0.0);
    assert_eq!(metrics["valid_pixels"], 16);
    assert!(metrics["config_digest"].is_string());
}

#[test]
fn evaluate_cube_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 5);
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "evaluate",
        "--pred",
        &path_str(&dir.join("cube.json")),
        "--gt",
        &path_str(&dir.join("cube.json")),
    ]);
    assert_ok(&o);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["psnr_db"], 100.0);
    assert_eq!(metrics["sam_deg"], 0.0);
    assert_eq!(metrics["nse_pct"], 0.0);
}

#[test]
fn multi_camera_beats_main_only_on_one_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 8);
    let out = tmp.path().join("out");

    let o = run(&[
        "--out",
        &path_str(&out),
        "--seed",
        "3",
        "build-prior",
        "--corpus",
        &path_str(&dir.join("cube.json")),
        "--k",
        "16",
        "--stride",
        "1",
    ]);
    assert_ok(&o);

    let mut results = Vec::new();
    for main_only in [false, true] {
        let sub = out.join(if main_only { "single" } else { "multi" });
        let mut args = vec![
            "--out".to_string(),
            path_str(&sub),
            "--seed".to_string(),
            "11".to_string(),
            "simulate".to_string(),
            "--cube".to_string(),
            path_str(&dir.join("cube.json")),
            "--ssf-main".to_string(),
            path_str(&dir.join("main.csv")),
            "--noise".to_string(),
            path_str(&dir.join("noise.json")),
            "--exposure".to_string(),
            path_str(&dir.join("exposure.json")),
        ];
        if main_only {
            args.push("--main-only".to_string());
        } else {
            for (flag, file) in [
                ("--ssf-tele", "tele.csv"),
                ("--ssf-wide", "wide.csv"),
                ("--filter-tele", "long_pass.csv"),
                ("--filter-wide", "short_pass.csv"),
            ] {
                args.push(flag.to_string());
                args.push(path_str(&dir.join(file)));
            }
        }
        let o = bin().args(&args).output().unwrap();
        assert_ok(&o);
        let o = run(&[
            "--out",
            &path_str(&sub),
            "reconstruct",
            "--capture",
            &path_str(&sub.join("capture.json")),
            "--prior",
            &path_str(&out.join("prior.json")),
            "--noise",
            &path_str(&dir.join("noise.json")),
        ]);
        assert_ok(&o);
        let o = run(&[
            "--out",
            &path_str(&sub),
            "evaluate",
            "--pred",
            &path_str(&sub.join("reconstructed.json")),
            "--gt",
            &path_str(&dir.join("cube.json")),
        ]);
        assert_ok(&o);
        let metrics: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sub.join("metrics.json")).unwrap())
                .unwrap();
        results.push(metrics["sam_deg"].as_f64().unwrap());
    }
    let (multi_sam, single_sam) = (results[0], results[1]);
    assert!(
        multi_sam < single_sam,
        "multi SAM {multi_sam} should beat single SAM {single_sam}"
    );
}

#[test]
fn select_filters_ranks_toy_library_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 6);
    let lib = tmp.path().join("library");
    std::fs::create_dir(&lib).unwrap();
    let g = grid(6);
    io::write_filter_csv(lib.join("pass.csv"), &FilterTransmittance::all_pass(g), None).unwrap();
    io::write_filter_csv(
        lib.join("half.csv"),
        &FilterTransmittance::new(g, vec![0.5; 6]).unwrap(),
        None,
    )
    .unwrap();
    io::write_filter_csv(lib.join("block.csv"), &FilterTransmittance::all_block(g), None).unwrap();

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    // one prior for both runs
    let o = run(&[
        "--out",
        &path_str(&out_a),
        "--seed",
        "2",
        "build-prior",
        "--corpus",
        &path_str(&dir.join("cube.json")),
        "--k",
        "12",
        "--stride",
        "1",
    ]);
    assert_ok(&o);

    let select = |out: &Path| {
        let o = run(&[
            "--out",
            &path_str(out),
            "--seed",
            "7",
            "select-filters",
            "--library",
            &path_str(&lib),
            "--ssf-main",
            &path_str(&dir.join("main.csv")),
            "--ssf-tele",
            &path_str(&dir.join("tele.csv")),
            "--ssf-wide",
            &path_str(&dir.join("wide.csv")),
            "--noise",
            &path_str(&dir.join("noise_read.json")),
            "--exposure",
            &path_str(&dir.join("exposure_fixed.json")),
            "--prior",
            &path_str(&out_a.join("prior.json")),
            "--samples",
            "8192",
        ]);
        assert_ok(&o);
    };
    select(&out_a);
    select(&out_b);

    let csv_a = std::fs::read_to_string(out_a.join("ranking.csv")).unwrap();
    let csv_b = std::fs::read_to_string(out_b.join("ranking.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "rankings must be byte-identical across reruns");

    let rows: Vec<&str> = csv_a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rank,"))
        .collect();
    assert_eq!(rows.len(), 6, "3 filters -> 6 ordered pairs");
    assert!(
        !rows[0].contains("block"),
        "all-block filter must not rank first: {}",
        rows[0]
    );
}

#[test]
fn thread_count_never_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 6);
    let lib = tmp.path().join("library");
    std::fs::create_dir(&lib).unwrap();
    let g = grid(6);
    for (name, v) in [("a", 1.0), ("b", 0.6), ("c", 0.3)] {
        io::write_filter_csv(
            lib.join(format!("{name}.csv")),
            &FilterTransmittance::new(g, vec![v; 6]).unwrap(),
            None,
        )
        .unwrap();
    }
    let prior_out = tmp.path().join("prior");
    assert_ok(&run(&[
        "--out",
        &path_str(&prior_out),
        "--seed",
        "1",
        "build-prior",
        "--corpus",
        &path_str(&dir.join("cube.json")),
        "--k",
        "10",
        "--stride",
        "1",
    ]));
    let select = |out: &Path, threads: &str| {
        assert_ok(&run(&[
            "--out",
            &path_str(out),
            "--seed",
            "4",
            "--threads",
            threads,
            "select-filters",
            "--library",
            &path_str(&lib),
            "--ssf-main",
            &path_str(&dir.join("main.csv")),
            "--ssf-tele",
            &path_str(&dir.join("tele.csv")),
            "--ssf-wide",
            &path_str(&dir.join("wide.csv")),
            "--noise",
            &path_str(&dir.join("noise.json")),
            "--exposure",
            &path_str(&dir.join("exposure.json")),
            "--prior",
            &path_str(&prior_out.join("prior.json")),
            "--samples",
            "2048",
        ]));
    };
    let one = tmp.path().join("t1");
    let eight = tmp.path().join("t8");
    select(&one, "1");
    select(&eight, "8");
    assert_eq!(
        std::fs::read_to_string(one.join("ranking.csv")).unwrap(),
        std::fs::read_to_string(eight.join("ranking.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(one.join("ranking.json")).unwrap(),
        std::fs::read_to_string(eight.join("ranking.json")).unwrap()
    );
}

#[test]
fn simulate_resamples_finer_ssf_grids_onto_the_cube() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 6);
    // overwrite the SSFs with a finer, wider grid covering the cube's
    let fine = WavelengthGrid::new(395.0, 5.0, 14).unwrap(); // 395..460
    let curve = |center: f64| -> Vec<f64> {
        fine.wavelengths()
            .map(|wl| (-(wl - center).powi(2) / 1500.0).exp())
            .collect()
    };
    let ssf = CameraSSF::from_channel_values(fine, &curve(450.0), &curve(430.0), &curve(410.0))
        .unwrap();
    io::write_ssf_csv(dir.join("main.csv"), &ssf, None).unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "simulate",
        "--cube",
        &path_str(&dir.join("cube.json")),
        "--ssf-main",
        &path_str(&dir.join("main.csv")),
        "--noise",
        &path_str(&dir.join("noise_zero.json")),
        "--exposure",
        &path_str(&dir.join("exposure.json")),
        "--main-only",
    ]);
    assert_ok(&o);
    let cap = io::read_capture(out.join("capture.json")).unwrap();
    assert_eq!(cap.system().grid(), &grid(6));
    assert_eq!(cap.channels(), 3);
}

#[test]
fn build_prior_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 5);
    let args = |out: &Path| {
        vec![
            "--out".to_string(),
            path_str(out),
            "--seed".to_string(),
            "42".to_string(),
            "build-prior".to_string(),
            "--corpus".to_string(),
            path_str(&dir.join("cube.json")),
            "--k".to_string(),
            "8".to_string(),
            "--stride".to_string(),
            "1".to_string(),
        ]
    };
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert_ok(&bin().args(args(&out_a)).output().unwrap());
    assert_ok(&bin().args(args(&out_b)).output().unwrap());
    assert_eq!(
        std::fs::read(out_a.join("prior.bin")).unwrap(),
        std::fs::read(out_b.join("prior.bin")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(out_a.join("prior.json")).unwrap(),
        std::fs::read_to_string(out_b.join("prior.json")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(out_a.join("provenance.json")).unwrap(),
        std::fs::read_to_string(out_b.join("provenance.json")).unwrap()
    );
}

#[test]
fn oversized_k_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 5);
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "build-prior",
        "--corpus",
        &path_str(&dir.join("cube.json")),
        "--k",
        "1000",
        "--stride",
        "1",
    ]);
    assert_eq!(exit_code(&o), 2);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("exceeds"), "stderr: {stderr}");
}

#[test]
fn malformed_csv_reports_line_number_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let stats = tmp.path().join("stats.csv");
    std::fs::write(
        &stats,
        "channel,mean_charge,std_charge\n0,1.0,0.1\n0,not_a_number,0.2\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "fit-noise",
        "--patch-stats",
        &path_str(&stats),
    ]);
    assert_eq!(exit_code(&o), 2);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains(":3:"), "expected line number in: {stderr}");
}

#[test]
fn empty_patch_stats_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let stats = tmp.path().join("stats.csv");
    std::fs::write(&stats, "channel,mean_charge,std_charge\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "fit-noise",
        "--patch-stats",
        &path_str(&stats),
    ]);
    assert_eq!(exit_code(&o), 2);
}

#[test]
fn fit_noise_round_trips_known_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let stats = tmp.path().join("stats.csv");
    let mut body = String::from("channel,mean_charge,std_charge\n");
    let truth = [(0.5f64, 2.0f64), (0.8, 1.0), (0.2, 3.0)];
    for (ch, (a, b)) in truth.iter().enumerate() {
        for i in 1..=8 {
            let m = i as f64 * 2.0;
            body.push_str(&format!("{ch},{m},{}\n", (a * m + b).sqrt()));
        }
    }
    std::fs::write(&stats, body).unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "fit-noise",
        "--patch-stats",
        &path_str(&stats),
    ]);
    assert_ok(&o);
    let params = io::read_noise_json(out.join("noise.json")).unwrap();
    for (ch, (a, b)) in truth.iter().enumerate() {
        assert!((params.alpha()[ch] - a).abs() < 1e-9);
        assert!((params.beta()[ch] - b).abs() < 1e-9);
    }
}

#[test]
fn fit_ssf_recovers_synthetic_sensitivities() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 8;
    let g = grid(n);
    let truth = smooth_ssf(n, 0.0);
    let spectra_dir = tmp.path().join("leds");
    std::fs::create_dir(&spectra_dir).unwrap();
    let mut table = String::from("led_id,c_r,c_g,c_b\n");
    for i in 0..12 {
        // narrow LEDs, roughly one per band: keeps the data term well
        // conditioned so the unregularized fit converges tightly
        let center = 400.0 + 10.0 * (i % 8) as f64 + if i >= 8 { 5.0 } else { 0.0 };
        let vals: Vec<f64> = g
            .wavelengths()
            .map(|wl| (-(wl - center).powi(2) / 50.0).exp())
            .collect();
        let r = spectraforge_core::RadianceSpectrum::new(g, vals).unwrap();
        io::write_spectrum_csv(spectra_dir.join(format!("led{i}.csv")), &r, None).unwrap();
        let mut c = [0.0f64; 3];
        for ch in 0..3 {
            c[ch] = truth
                .rows()
                .row(ch)
                .iter()
                .zip(r.values())
                .map(|(s, v)| s * v)
                .sum();
        }
        table.push_str(&format!("led{i},{},{},{}\n", c[0], c[1], c[2]));
    }
    let table_path = spectra_dir.join("samples.csv");
    std::fs::write(&table_path, table).unwrap();

    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "fit-ssf",
        "--samples-csv",
        &path_str(&table_path),
        "--lambda",
        "0.0",
    ]);
    assert_ok(&o);
    let fitted = io::read_ssf_csv(out.join("ssf.csv")).unwrap();
    for ch in 0..3 {
        let est = fitted.channel(ch);
        let tru = truth.channel(ch);
        let dot: f64 = est.iter().zip(&tru).map(|(a, b)| a * b).sum();
        let na = est.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = tru.iter().map(|v| v * v).sum::<f64>().sqrt();
        let angle = (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 1.0, "channel {ch} angle {angle}");
    }
}

#[test]
fn calibrate_divides_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let g = grid(4);
    let device =
        spectraforge_core::RadianceSpectrum::new(g, vec![2.0, 4.0, 6.0, 8.0]).unwrap();
    let reference =
        spectraforge_core::RadianceSpectrum::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    io::write_spectrum_csv(tmp.path().join("device.csv"), &device, None).unwrap();
    io::write_spectrum_csv(tmp.path().join("reference.csv"), &reference, None).unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--out",
        &path_str(&out),
        "calibrate",
        "--device",
        &path_str(&tmp.path().join("device.csv")),
        "--reference",
        &path_str(&tmp.path().join("reference.csv")),
    ]);
    assert_ok(&o);
    let divisor = io::read_divisor_csv(out.join("divisor.csv")).unwrap();
    assert_eq!(divisor.values(), &[2.0, 2.0, 2.0, 2.0]);
    let header = std::fs::read_to_string(out.join("divisor.csv")).unwrap();
    assert!(header.lines().any(|l| l == "wavelength_nm,divisor"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 5);
    // config asks for an impossible k; the flag must win
    let config = tmp.path().join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "k": 1000,
            "stride": 1,
            "paths": { "corpus": [dir.join("cube.json")] }
        })
        .to_string(),
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&out),
        "build-prior",
        "--k",
        "8",
    ]);
    assert_ok(&o);
    let prior = io::read_prior(out.join("prior.json")).unwrap();
    assert_eq!(prior.len(), 8);

    // without the flag the config value applies and fails
    let o = run(&[
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&out),
        "build-prior",
    ]);
    assert_eq!(exit_code(&o), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(&config, r#"{"definitely_not_a_key": 1}"#).unwrap();
    let o = run(&["--config", &path_str(&config), "fit-noise"]);
    assert_eq!(exit_code(&o), 2);
}

#[test]
fn digest_changes_when_inputs_change() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_fixture(tmp.path(), 5);
    let out = tmp.path().join("out");
    let eval = |pred: &Path, tag: &str| -> String {
        let sub = out.join(tag);
        let o = run(&[
            "--out",
            &path_str(&sub),
            "evaluate",
            "--pred",
            &path_str(pred),
            "--gt",
            &path_str(&dir.join("cube.json")),
        ]);
        assert_ok(&o);
        let metrics: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sub.join("metrics.json")).unwrap())
                .unwrap();
        metrics["config_digest"].as_str().unwrap().to_string()
    };
    let d1 = eval(&dir.join("cube.json"), "same");
    let d1_again = eval(&dir.join("cube.json"), "same2");
    assert_eq!(d1, d1_again);

    // a different pred cube must change the digest
    let other = toy_cube(5);
    let mut data = other.data().to_vec();
    data[0] += 0.5;
    let changed = HsiCube::new(4, 4, grid(5), data, None).unwrap();
    io::write_cube(tmp.path().join("other.json"), &changed, &io::FileMeta::default()).unwrap();
    let d2 = eval(&tmp.path().join("other.json"), "changed");
    assert_ne!(d1, d2);
}
