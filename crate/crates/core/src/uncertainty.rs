//! Spectral uncertainty of a filtered camera system.
//!
//! The latent spectrum is modeled as a draw from the discrete prior; the
//! observed signal is its system projection plus heteroscedastic Gaussian
//! noise. The Bayes posterior over prior spectra then yields a conditional
//! mean and a conditional variance trace per observation, and the expected
//! conditional variance
//!
//! ```text
//! v(F) = E_c[ tr V(r | c) ]
//! ```
//!
//! measures how much spectral ambiguity a filter configuration leaves.
//! `v` is estimated by Monte Carlo: draw a prior spectrum, simulate its
//! noisy signal, accumulate the posterior variance trace. Exhaustive
//! search over ordered filter pairs ranks configurations by this score.
//!
//! All sampling uses keyed counter streams, so estimates are bit-identical
//! for a given seed regardless of thread count or evaluation order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::ensure_same_grid;
use crate::noise::{exposure_time, scene_brightness, sigma_unchecked, ExposureCurve, NoiseParams};
use crate::prior::SpectraPrior;
use crate::rng;
use crate::spectrum::{FilterTransmittance, RadianceSpectrum};
use crate::system::{stack_system, apply_system, CameraSSF, CameraSignal, SystemResponse};

/// Absolute tolerance for the zero-noise (Dirac) likelihood: a channel with
/// zero noise only admits spectra reproducing the observation this closely.
pub const DIRAC_TOL: f64 = 1e-12;

/// Posterior probabilities over the prior spectra for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorWeights {
    probs: Vec<f64>,
}

impl PosteriorWeights {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::EmptyInput("posterior weights"));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::invalid(format!(
                "posterior weights must be nonnegative and sum to 1, got sum {sum}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A named collection of candidate filters sharing one grid.
#[derive(Debug, Clone)]
pub struct FilterLibrary {
    entries: Vec<(String, FilterTransmittance)>,
}

impl FilterLibrary {
    pub fn new(entries: Vec<(String, FilterTransmittance)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(CoreError::EmptyInput("filter library"));
        }
        let grid = *entries[0].1.grid();
        let mut seen = std::collections::HashSet::new();
        for (id, f) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(CoreError::invalid(format!("duplicate filter id '{id}'")));
            }
            ensure_same_grid(&grid, f.grid())?;
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&FilterTransmittance> {
        self.entries
            .iter()
            .find(|(eid, _)| eid == id)
            .map(|(_, f)| f)
    }

    pub fn entries(&self) -> &[(String, FilterTransmittance)] {
        &self.entries
    }
}

/// Monte Carlo estimate of `v` for one filter pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// Expected conditional variance trace, in squared radiance units.
    pub v: f64,
    pub std_error: f64,
    pub samples: u64,
    /// Filter ids mounted on the second and third camera.
    pub filter_pair: (String, String),
}

/// Plain estimate without filter identity, for custom system layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VEstimate {
    pub v: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Knobs for the Monte Carlo estimator.
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Samples evaluated between convergence checks.
    pub batch_size: usize,
    /// Stop early once `std_error / v` drops below this value.
    pub early_stop_rel: Option<f64>,
    /// Pin the exposure time instead of deriving it from each sample's
    /// simulated brightness.
    pub t_fixed: Option<f64>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            batch_size: 4096,
            early_stop_rel: None,
            t_fixed: None,
        }
    }
}

/// Precomputed projection of every prior spectrum through one system,
/// shared across many posterior evaluations.
pub(crate) struct PosteriorModel<'a> {
    prior: &'a SpectraPrior,
    channels: usize,
    /// N x channels, row-major: noiseless signal of each prior spectrum.
    projected: Vec<f64>,
    log_prior: Vec<f64>,
    alpha: &'a [f64],
    beta: &'a [f64],
    ln_2pi: f64,
}

impl<'a> PosteriorModel<'a> {
    pub(crate) fn new(
        prior: &'a SpectraPrior,
        sr: &SystemResponse,
        params: &'a NoiseParams,
    ) -> Result<Self> {
        ensure_same_grid(prior.grid(), sr.grid())?;
        if prior.is_empty() {
            return Err(CoreError::EmptyInput("prior"));
        }
        let channels = sr.channel_count();
        if params.channels() != channels {
            return Err(CoreError::invalid(format!(
                "noise parameters cover {} channels but the system has {channels}",
                params.channels()
            )));
        }
        let mut projected = Vec::with_capacity(prior.len() * channels);
        for i in 0..prior.len() {
            projected.extend(sr.project_values(prior.spectrum(i)));
        }
        let log_prior = prior
            .probs()
            .iter()
            .map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self {
            prior,
            channels,
            projected,
            log_prior,
            alpha: params.alpha(),
            beta: params.beta(),
            ln_2pi: (2.0 * std::f64::consts::PI).ln(),
        })
    }

    pub(crate) fn channels(&self) -> usize {
        self.channels
    }

    pub(crate) fn projection(&self, i: usize) -> &[f64] {
        &self.projected[i * self.channels..(i + 1) * self.channels]
    }

    /// Gaussian log-likelihood of `c` for prior spectrum `i`, with
    /// per-channel exposure times `ts`. Channels with zero noise act as
    /// Dirac constraints: an exact match contributes nothing, a mismatch
    /// sends the likelihood to negative infinity.
    fn log_likelihood_row(&self, i: usize, c: &[f64], ts: &[f64]) -> f64 {
        let proj = self.projection(i);
        let mut acc = 0.0;
        for ch in 0..self.channels {
            let c_bar = proj[ch];
            let t = ts[ch];
            let s = sigma_unchecked(c_bar, self.alpha[ch], self.beta[ch], t);
            if s == 0.0 {
                if (c[ch] - c_bar).abs() <= DIRAC_TOL {
                    continue;
                }
                return f64::NEG_INFINITY;
            }
            let z = (c[ch] - c_bar) / s;
            acc += -0.5 * self.ln_2pi - s.ln() - 0.5 * z * z;
        }
        acc
    }

    /// Normalized posterior into `probs` via log-sum-exp. Zero-prior
    /// entries stay exactly zero.
    pub(crate) fn posterior_into(&self, c: &[f64], ts: &[f64], probs: &mut [f64]) -> Result<()> {
        debug_assert_eq!(probs.len(), self.prior.len());
        let mut max = f64::NEG_INFINITY;
        for i in 0..self.prior.len() {
            let lw = if self.log_prior[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                self.log_prior[i] + self.log_likelihood_row(i, c, ts)
            };
            probs[i] = lw;
            if lw > max {
                max = lw;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(CoreError::NoExplanatorySpectrum);
        }
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            *p = if *p == f64::NEG_INFINITY {
                0.0
            } else {
                (*p - max).exp()
            };
            sum += *p;
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(())
    }

    /// Conditional mean into `mean`, then the conditional variance trace.
    pub(crate) fn variance_trace(&self, probs: &[f64], mean: &mut [f64]) -> f64 {
        let n = self.prior.dim();
        debug_assert_eq!(mean.len(), n);
        mean.fill(0.0);
        for i in 0..self.prior.len() {
            let p = probs[i];
            if p == 0.0 {
                continue;
            }
            for (m, v) in mean.iter_mut().zip(self.prior.spectrum(i)) {
                *m += p * v;
            }
        }
        let mut acc = 0.0;
        for i in 0..self.prior.len() {
            let p = probs[i];
            if p == 0.0 {
                continue;
            }
            let mut d2 = 0.0;
            for (m, v) in mean.iter().zip(self.prior.spectrum(i)) {
                let d = v - m;
                d2 += d * d;
            }
            acc += p * d2;
        }
        acc
    }
}

/// Log-density of an observed signal given a candidate spectrum: the sum of
/// per-channel Gaussian log-densities at the noiseless projection, with the
/// noise law evaluated at that projection. May be `-inf` when a zero-noise
/// channel contradicts the observation.
pub fn log_likelihood(
    c: &CameraSignal,
    r: &RadianceSpectrum,
    sr: &SystemResponse,
    params: &NoiseParams,
    t: f64,
) -> Result<f64> {
    ensure_same_grid(sr.grid(), r.grid())?;
    if c.len() != sr.channel_count() {
        return Err(CoreError::invalid(format!(
            "signal has {} channels but the system has {}",
            c.len(),
            sr.channel_count()
        )));
    }
    if params.channels() != sr.channel_count() {
        return Err(CoreError::invalid(format!(
            "noise parameters cover {} channels but the system has {}",
            params.channels(),
            sr.channel_count()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::invalid(format!("exposure must be positive, got {t} s")));
    }
    let c_bar = apply_system(sr, r)?;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut acc = 0.0;
    for ch in 0..c.len() {
        let cb = c_bar.values()[ch];
        let s = sigma_unchecked(cb, params.alpha()[ch], params.beta()[ch], t);
        if s == 0.0 {
            if (c.values()[ch] - cb).abs() <= DIRAC_TOL {
                continue;
            }
            return Ok(f64::NEG_INFINITY);
        }
        let z = (c.values()[ch] - cb) / s;
        acc += -0.5 * ln_2pi - s.ln() - 0.5 * z * z;
    }
    Ok(acc)
}

/// Bayes posterior over the prior spectra for one observation, one shared
/// exposure time. Builds the projection table on every call; use
/// [`mmse_reconstruct`](crate::sim::mmse_reconstruct) or [`estimate_v`] for
/// batched evaluation.
pub fn posterior(
    c: &CameraSignal,
    prior: &SpectraPrior,
    sr: &SystemResponse,
    params: &NoiseParams,
    t: f64,
) -> Result<PosteriorWeights> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::invalid(format!("exposure must be positive, got {t} s")));
    }
    if c.len() != sr.channel_count() {
        return Err(CoreError::invalid(format!(
            "signal has {} channels but the system has {}",
            c.len(),
            sr.channel_count()
        )));
    }
    let model = PosteriorModel::new(prior, sr, params)?;
    let ts = vec![t; model.channels()];
    let mut probs = vec![0.0; prior.len()];
    model.posterior_into(c.values(), &ts, &mut probs)?;
    PosteriorWeights::new(probs)
}

/// Posterior-mean spectrum: the probability-weighted sum of prior spectra.
pub fn conditional_mean(post: &PosteriorWeights, prior: &SpectraPrior) -> Result<RadianceSpectrum> {
    if post.len() != prior.len() {
        return Err(CoreError::invalid(format!(
            "posterior has {} weights but prior has {} spectra",
            post.len(),
            prior.len()
        )));
    }
    let n = prior.dim();
    let mut mean = vec![0.0; n];
    for (i, p) in post.probs().iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(prior.spectrum(i)) {
            *m += p * v;
        }
    }
    RadianceSpectrum::new(*prior.grid(), mean)
}

/// Trace of the posterior covariance: the probability-weighted squared
/// distance of each prior spectrum to the posterior mean.
pub fn conditional_variance_trace(post: &PosteriorWeights, prior: &SpectraPrior) -> Result<f64> {
    if post.len() != prior.len() {
        return Err(CoreError::invalid(format!(
            "posterior has {} weights but prior has {} spectra",
            post.len(),
            prior.len()
        )));
    }
    let mean = conditional_mean(post, prior)?;
    let mut acc = 0.0;
    for (i, p) in post.probs().iter().enumerate() {
        let mut d2 = 0.0;
        for (m, v) in mean.values().iter().zip(prior.spectrum(i)) {
            let d = v - m;
            d2 += d * d;
        }
        acc += p * d2;
    }
    Ok(acc)
}

/// Stack the three-camera system for a filter pair: camera 1 unfiltered,
/// the pair mounted on cameras 2 and 3.
pub fn build_pair_system(
    base_ssfs: &[CameraSSF; 3],
    second: &FilterTransmittance,
    third: &FilterTransmittance,
) -> Result<SystemResponse> {
    let unit = FilterTransmittance::all_pass(*base_ssfs[0].grid());
    stack_system(&[
        (&base_ssfs[0], &unit),
        (&base_ssfs[1], second),
        (&base_ssfs[2], third),
    ])
}

/// Monte Carlo estimate of `v` for an explicit system response.
///
/// Per sample: draw a prior spectrum, pick the exposure time from its own
/// simulated brightness (mean noiseless channel value) unless pinned,
/// simulate the noisy signal, and accumulate the posterior variance trace.
/// The estimate and its standard error are bit-identical for a given seed
/// across any thread count.
pub fn estimate_v_system(
    sr: &SystemResponse,
    prior: &SpectraPrior,
    params: &NoiseParams,
    curve: &ExposureCurve,
    n_samples: u64,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<VEstimate> {
    if n_samples == 0 {
        return Err(CoreError::invalid("need at least one Monte Carlo sample".to_string()));
    }
    let sys_params = params.for_cameras(sr.camera_count())?;
    let model = PosteriorModel::new(prior, sr, &sys_params)?;
    let channels = model.channels();
    let n = prior.dim();
    let count = prior.len();

    // Inverse-CDF table for drawing prior spectra.
    let mut cdf = Vec::with_capacity(count);
    let mut acc = 0.0;
    for p in prior.probs() {
        acc += p;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }

    let base = rng::derive_stream(seed, "uncertainty/estimate");
    let key_draw = rng::mix(base, 0);
    let key_noise = rng::mix(base, 1);

    let sample_one = |s: u64, c: &mut Vec<f64>, probs: &mut Vec<f64>, mean: &mut Vec<f64>| -> Result<f64> {
        let u = rng::uniform_open01(key_draw, s);
        let pick = cdf.partition_point(|&q| q < u).min(count - 1);
        let c_bar = model.projection(pick);
        let t = match opts.t_fixed {
            Some(t) => t,
            None => exposure_time(scene_brightness(c_bar)?, curve),
        };
        let noise_key = rng::mix(key_noise, s);
        c.clear();
        for ch in 0..channels {
            let sg = sigma_unchecked(c_bar[ch], sys_params.alpha()[ch], sys_params.beta()[ch], t);
            c.push(c_bar[ch] + rng::standard_normal(noise_key, ch as u64) * sg);
        }
        probs.resize(count, 0.0);
        mean.resize(n, 0.0);
        let ts = vec![t; channels];
        model.posterior_into(c, &ts, probs)?;
        Ok(model.variance_trace(probs, mean))
    };

    // Per-batch parallel evaluation, sequential in-order accumulation: the
    // Welford stream sees samples in index order for any thread count.
    let mut mean_acc = 0.0f64;
    let mut m2_acc = 0.0f64;
    let mut seen = 0u64;
    let batch = opts.batch_size.max(1) as u64;
    let mut start = 0u64;
    while start < n_samples {
        let end = (start + batch).min(n_samples);
        let values: Vec<Result<f64>> = (start..end)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(c, probs, mean), s| sample_one(s, c, probs, mean),
            )
            .collect();
        for v in values {
            let v = v?;
            seen += 1;
            let delta = v - mean_acc;
            mean_acc += delta / seen as f64;
            m2_acc += delta * (v - mean_acc);
        }
        if let Some(rel) = opts.early_stop_rel {
            if seen >= 2 && mean_acc > 0.0 {
                let se = (m2_acc / (seen - 1) as f64 / seen as f64).sqrt();
                if se / mean_acc < rel {
                    break;
                }
            }
        }
        start = end;
    }

    let std_error = if seen > 1 {
        (m2_acc / (seen - 1) as f64 / seen as f64).sqrt()
    } else {
        0.0
    };
    Ok(VEstimate {
        v: mean_acc,
        std_error,
        samples: seen,
    })
}

/// Monte Carlo estimate of `v` for a filter pair drawn from a library,
/// with camera 1 unfiltered.
#[allow(clippy::too_many_arguments)]
pub fn estimate_v(
    pair: (&str, &str),
    library: &FilterLibrary,
    base_ssfs: &[CameraSSF; 3],
    prior: &SpectraPrior,
    params: &NoiseParams,
    curve: &ExposureCurve,
    n_samples: u64,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<UncertaintyReport> {
    if pair.0 == pair.1 {
        return Err(CoreError::invalid(format!(
            "filter pair must be distinct, got ('{}', '{}')",
            pair.0, pair.1
        )));
    }
    let second = library
        .get(pair.0)
        .ok_or_else(|| CoreError::invalid(format!("unknown filter id '{}'", pair.0)))?;
    let third = library
        .get(pair.1)
        .ok_or_else(|| CoreError::invalid(format!("unknown filter id '{}'", pair.1)))?;
    let sr = build_pair_system(base_ssfs, second, third)?;
    let est = estimate_v_system(&sr, prior, params, curve, n_samples, seed, opts)?;
    Ok(UncertaintyReport {
        v: est.v,
        std_error: est.std_error,
        samples: est.samples,
        filter_pair: (pair.0.to_string(), pair.1.to_string()),
    })
}

/// Evaluate every ordered filter pair and rank ascending by `v` (ties by
/// standard error, then ids). Each pair runs on its own seed substream, so
/// the ranking is independent of evaluation schedule.
#[allow(clippy::too_many_arguments)]
pub fn search_filters(
    library: &FilterLibrary,
    base_ssfs: &[CameraSSF; 3],
    prior: &SpectraPrior,
    params: &NoiseParams,
    curve: &ExposureCurve,
    n_samples: u64,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<Vec<UncertaintyReport>> {
    if library.len() < 2 {
        return Err(CoreError::invalid(format!(
            "filter search needs at least 2 library entries, got {}",
            library.len()
        )));
    }
    let ids: Vec<&str> = library.ids().collect();
    let mut pairs = Vec::new();
    for i in 0..ids.len() {
        for j in 0..ids.len() {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    let search_key = rng::derive_stream(seed, "uncertainty/search");
    let mut reports: Vec<UncertaintyReport> = pairs
        .par_iter()
        .enumerate()
        .map(|(pair_index, &(i, j))| {
            let pair_seed = rng::mix(search_key, pair_index as u64);
            estimate_v(
                (ids[i], ids[j]),
                library,
                base_ssfs,
                prior,
                params,
                curve,
                n_samples,
                pair_seed,
                opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| {
        a.v.total_cmp(&b.v)
            .then(a.std_error.total_cmp(&b.std_error))
            .then_with(|| a.filter_pair.cmp(&b.filter_pair))
    });
    Ok(reports)
}
