//! Property tests for the structural invariants: linearity, monotonicity,
//! scale invariances, determinism and schedule independence.

use proptest::prelude::*;

use spectraforge_core::cube::HsiCube;
use spectraforge_core::grid::WavelengthGrid;
use spectraforge_core::metrics::{nse, psnr, sam};
use spectraforge_core::noise::{
    fit_noise_params, sample_noise, sigma, ExposureCurve, NoiseParams,
};
use spectraforge_core::prior::{kmeans_compress, KMeansOptions, SpectraSamples};
use spectraforge_core::rng;
use spectraforge_core::spectrum::{FilterTransmittance, RadianceSpectrum};
use spectraforge_core::system::{apply_system, effective_response, stack_system, CameraSSF, CameraSignal};
use spectraforge_core::uncertainty::{estimate_v_system, EstimateOptions};

fn grid(n: usize) -> WavelengthGrid {
    WavelengthGrid::new(400.0, 10.0, n).unwrap()
}

fn values(n: usize, max: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..max, n)
}

proptest! {
    #[test]
    fn effective_response_is_monotone_in_filter(
        ssf_vals in values(18, 5.0),
        f_lo in values(6, 1.0),
        bump in values(6, 1.0),
    ) {
        let g = grid(6);
        let ssf = CameraSSF::from_channel_values(g, &ssf_vals[0..6], &ssf_vals[6..12], &ssf_vals[12..18]).unwrap();
        let f_hi: Vec<f64> = f_lo.iter().zip(&bump).map(|(a, b)| (a + b).min(1.0)).collect();
        let lo = effective_response(&ssf, &FilterTransmittance::new(g, f_lo).unwrap()).unwrap();
        let hi = effective_response(&ssf, &FilterTransmittance::new(g, f_hi).unwrap()).unwrap();
        for (l, h) in lo.rows().iter().zip(hi.rows().iter()) {
            prop_assert!(h >= l);
        }
    }

    #[test]
    fn apply_system_is_linear(
        ssf_vals in values(18, 5.0),
        r1 in values(6, 10.0),
        r2 in values(6, 10.0),
        a in 0.0..4.0f64,
        b in 0.0..4.0f64,
    ) {
        let g = grid(6);
        let ssf = CameraSSF::from_channel_values(g, &ssf_vals[0..6], &ssf_vals[6..12], &ssf_vals[12..18]).unwrap();
        let f = FilterTransmittance::all_pass(g);
        let sr = stack_system(&[(&ssf, &f)]).unwrap();
        let combo: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let lhs = apply_system(&sr, &RadianceSpectrum::new(g, combo).unwrap()).unwrap();
        let c1 = apply_system(&sr, &RadianceSpectrum::new(g, r1).unwrap()).unwrap();
        let c2 = apply_system(&sr, &RadianceSpectrum::new(g, r2).unwrap()).unwrap();
        for ch in 0..3 {
            let rhs = a * c1.values()[ch] + b * c2.values()[ch];
            let scale = lhs.values()[ch].abs().max(rhs.abs()).max(1e-30);
            prop_assert!((lhs.values()[ch] - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn resample_is_idempotent_on_own_grid(vals in values(9, 3.0)) {
        let g = grid(9);
        let s = RadianceSpectrum::new(g, vals).unwrap();
        let resampled = s.resample(&g).unwrap();
        prop_assert_eq!(resampled.values(), s.values());
    }

    #[test]
    fn sigma_is_nondecreasing_in_signal(
        alpha in 0.0..2.0f64,
        beta in 0.0..2.0f64,
        c1 in 0.0..10.0f64,
        delta in 0.0..10.0f64,
        t in 1e-4..1.0f64,
    ) {
        let p = NoiseParams::new(vec![alpha], vec![beta]).unwrap();
        let lo = sigma(c1, 0, t, &p).unwrap();
        let hi = sigma(c1 + delta, 0, t, &p).unwrap();
        prop_assert!(hi >= lo);
    }

    #[test]
    fn noise_fit_inverts_exact_statistics(
        alpha in 0.01..2.0f64,
        beta in 0.01..2.0f64,
    ) {
        let points: Vec<(f64, f64)> = (1..=8)
            .map(|i| {
                let m = i as f64 * 0.5;
                (m, (alpha * m + beta).sqrt())
            })
            .collect();
        let fit = fit_noise_params(&[points]).unwrap();
        prop_assert!((fit.params.alpha()[0] - alpha).abs() <= 1e-9 * alpha.max(1.0));
        prop_assert!((fit.params.beta()[0] - beta).abs() <= 1e-9 * beta.max(1.0));
    }

    #[test]
    fn kmeans_probs_sum_to_one(seed in 0u64..1000, k in 1usize..6) {
        let rows: Vec<f64> = (0..120)
            .flat_map(|i| {
                let x = ((i * 37 + 11) % 97) as f64 / 10.0;
                let y = ((i * 53 + 7) % 89) as f64 / 10.0;
                [x, y]
            })
            .collect();
        let samples = SpectraSamples::new(grid(2), rows).unwrap();
        let (prior, _) = kmeans_compress(&samples, k, seed, &KMeansOptions::default()).unwrap();
        let sum: f64 = prior.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(prior.total_variance_trace() <= samples.total_variance_trace() * (1.0 + 1e-6));
    }

    #[test]
    fn sam_is_invariant_to_per_pixel_scaling(
        vals in values(8, 2.0),
        scale in 0.1..8.0f64,
    ) {
        let g = grid(2);
        let base: Vec<f64> = vals.iter().map(|v| v + 0.01).collect();
        let gt = HsiCube::new(2, 2, g, base.clone(), None).unwrap();
        let scaled: Vec<f64> = base.iter().map(|v| v * scale).collect();
        let pred = HsiCube::new(2, 2, g, scaled, None).unwrap();
        let angle = sam(&pred, &gt, None).unwrap().mean_deg;
        prop_assert!(angle.abs() < 1e-6, "angle {angle}");
    }

    #[test]
    fn nse_is_invariant_to_joint_scaling(
        p_vals in values(8, 2.0),
        g_vals in values(8, 2.0),
        scale in 0.1..8.0f64,
    ) {
        let g = grid(2);
        let gt_base: Vec<f64> = g_vals.iter().map(|v| v + 0.01).collect();
        let gt = HsiCube::new(2, 2, g, gt_base.clone(), None).unwrap();
        let pred = HsiCube::new(2, 2, g, p_vals.clone(), None).unwrap();
        let a = nse(&pred, &gt, None).unwrap().mean_pct;
        let gt_s = HsiCube::new(2, 2, g, gt_base.iter().map(|v| v * scale).collect(), None).unwrap();
        let pred_s = HsiCube::new(2, 2, g, p_vals.iter().map(|v| v * scale).collect(), None).unwrap();
        let b = nse(&pred_s, &gt_s, None).unwrap().mean_pct;
        let tol = 1e-9 * a.abs().max(1.0);
        prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn psnr_decreases_when_an_error_grows(
        vals in values(8, 2.0),
        pixel in 0usize..4,
        extra in 0.1..3.0f64,
    ) {
        let g = grid(2);
        let gt = HsiCube::new(2, 2, g, vals.clone(), None).unwrap();
        let mut worse = vals.clone();
        worse[pixel * 2] += extra;
        let mut even_worse = worse.clone();
        even_worse[pixel * 2] += extra;
        let p1 = psnr(&HsiCube::new(2, 2, g, worse, None).unwrap(), &gt, None, 1.0).unwrap();
        let p2 = psnr(&HsiCube::new(2, 2, g, even_worse, None).unwrap(), &gt, None, 1.0).unwrap();
        prop_assert!(p2 < p1);
    }
}

#[test]
fn sample_noise_mean_tracks_signal_over_many_draws() {
    // one million draws, one channel: the empirical mean of c must sit
    // within 3 standard errors of c_bar
    let t = 0.1;
    let p = NoiseParams::new(vec![0.5], vec![0.02]).unwrap();
    let c_bar = 3.0;
    let s = sigma(c_bar, 0, t, &p).unwrap();
    let n = 1_000_000u64;
    let c = CameraSignal::new(vec![c_bar]).unwrap();
    let mut sum = 0.0;
    for seed in 0..n {
        sum += sample_noise(&c, t, &p, seed).unwrap().values()[0];
    }
    let mean = sum / n as f64;
    let se = s / (n as f64).sqrt();
    assert!(
        (mean - c_bar).abs() <= 3.0 * se,
        "mean {mean} vs {c_bar} (3se = {})",
        3.0 * se
    );
}

#[test]
fn kmeans_is_byte_deterministic_across_runs() {
    let rows: Vec<f64> = (0..600)
        .map(|i| ((i * 31 + 17) % 101) as f64 / 7.0)
        .collect();
    let samples = SpectraSamples::new(grid(3), rows).unwrap();
    let (a, _) = kmeans_compress(&samples, 7, 99, &KMeansOptions::default()).unwrap();
    let (b, _) = kmeans_compress(&samples, 7, 99, &KMeansOptions::default()).unwrap();
    let bits = |v: &[f64]| -> Vec<u64> { v.iter().map(|x| x.to_bits()).collect() };
    assert_eq!(bits(a.spectra()), bits(b.spectra()));
    assert_eq!(bits(a.probs()), bits(b.probs()));
}

fn mc_fixture() -> (
    spectraforge_core::SystemResponse,
    spectraforge_core::SpectraPrior,
    NoiseParams,
) {
    let n = 8;
    let g = grid(n);
    let mk = |shift: f64| {
        let curve = |center: f64| -> Vec<f64> {
            g.wavelengths()
                .map(|wl| (-(wl - center - shift).powi(2) / 4000.0).exp())
                .collect()
        };
        CameraSSF::from_channel_values(g, &curve(610.0), &curve(540.0), &curve(460.0)).unwrap()
    };
    let ssfs = [mk(0.0), mk(14.0), mk(-11.0)];
    let f = FilterTransmittance::all_pass(g);
    let sr = stack_system(&[(&ssfs[0], &f), (&ssfs[1], &f), (&ssfs[2], &f)]).unwrap();
    let count = 12;
    let mut data = Vec::new();
    for i in 0..count {
        let center = 420.0 + 300.0 * (i as f64 / count as f64);
        for wl in g.wavelengths() {
            data.push(0.05 + (-(wl - center).powi(2) / 2500.0).exp());
        }
    }
    let prior =
        spectraforge_core::SpectraPrior::new(g, data, vec![1.0 / count as f64; count]).unwrap();
    let params = NoiseParams::new(vec![0.02; 3], vec![0.01; 3]).unwrap();
    (sr, prior, params)
}

#[test]
fn conditioning_never_exceeds_prior_variance() {
    // law of total variance: E[tr V(r|c)] <= tr V(r)
    let (sr, prior, params) = mc_fixture();
    let est = estimate_v_system(
        &sr,
        &prior,
        &params,
        &ExposureCurve::default(),
        8192,
        31,
        &EstimateOptions::default(),
    )
    .unwrap();
    let bound = prior.total_variance_trace() + 3.0 * est.std_error;
    assert!(est.v <= bound, "v = {} > bound {bound}", est.v);
}

#[test]
fn std_error_shrinks_like_inverse_sqrt_samples() {
    // sixteen-fold more samples must cut the standard error about 4x
    let (sr, prior, params) = mc_fixture();
    let run = |n: u64| {
        estimate_v_system(
            &sr,
            &prior,
            &params,
            &ExposureCurve::default(),
            n,
            77,
            &EstimateOptions::default(),
        )
        .unwrap()
    };
    let small = run(4096);
    let big = run(4096 * 16);
    let ratio = small.std_error / big.std_error;
    assert!(
        (ratio - 4.0).abs() <= 1.0,
        "se ratio {ratio} (want 4 +/- 25%)"
    );
}

#[test]
fn estimates_are_identical_across_thread_counts() {
    let (sr, prior, params) = mc_fixture();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            estimate_v_system(
                &sr,
                &prior,
                &params,
                &ExposureCurve::default(),
                4096,
                13,
                &EstimateOptions::default(),
            )
            .unwrap()
        })
    };
    let serial = run(1);
    let parallel = run(8);
    assert_eq!(serial.v.to_bits(), parallel.v.to_bits());
    assert_eq!(serial.std_error.to_bits(), parallel.std_error.to_bits());
}

#[test]
fn color_projection_residual_ignores_pixel_order() {
    use spectraforge_core::calib::fit_color_projection;
    use spectraforge_core::cube::RgbImage;

    let g = grid(4);
    let h = 3;
    let w = 4;
    let key = rng::derive_stream(8, "properties/pixels");
    let spectra: Vec<Vec<f64>> = (0..h * w)
        .map(|p| (0..4).map(|b| rng::uniform_open01(key, (p * 4 + b) as u64) * 2.0).collect())
        .collect();
    let rgbs: Vec<Vec<f64>> = (0..h * w)
        .map(|p| (0..3).map(|c| rng::uniform_open01(key, 1000 + (p * 3 + c) as u64)).collect())
        .collect();
    let build = |order: &[usize]| {
        let cube = HsiCube::new(
            h,
            w,
            g,
            order.iter().flat_map(|&p| spectra[p].clone()).collect(),
            None,
        )
        .unwrap();
        let rgb = RgbImage::new(
            h,
            w,
            order.iter().flat_map(|&p| rgbs[p].clone()).collect(),
        )
        .unwrap();
        fit_color_projection(&cube, &rgb, None).unwrap().residual
    };
    let forward: Vec<usize> = (0..h * w).collect();
    let mut shuffled = forward.clone();
    shuffled.reverse();
    shuffled.swap(1, 7);
    shuffled.swap(3, 10);
    let a = build(&forward);
    let b = build(&shuffled);
    assert!(
        (a - b).abs() <= 1e-9 * a.max(1.0),
        "residual changed with pixel order: {a} vs {b}"
    );
}

#[test]
fn counter_rng_is_order_independent() {
    let key = rng::derive_stream(5, "properties/order");
    let forward: Vec<u64> = (0..100).map(|c| rng::standard_normal(key, c).to_bits()).collect();
    let mut backward: Vec<u64> = (0..100)
        .rev()
        .map(|c| rng::standard_normal(key, c).to_bits())
        .collect();
    backward.reverse();
    assert_eq!(forward, backward);
}
