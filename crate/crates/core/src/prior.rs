//! Discrete radiance prior built from a hyperspectral corpus.
//!
//! Pipeline: subsample pixels from a cube corpus on a regular stride,
//! optionally convert reflectance to radiance by an illuminant spectrum,
//! compress with k-means, and weight each cluster center by the share of
//! samples it absorbed. The resulting weighted spectrum set is the prior
//! every posterior computation conditions on.

use std::collections::HashSet;

use crate::cube::HsiCube;
use crate::error::{CoreError, Result};
use crate::grid::{ensure_same_grid, WavelengthGrid};
use crate::rng;
use crate::spectrum::{elementwise_product, RadianceSpectrum};

/// Illuminant power spectrum used to turn reflectances into radiances.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminantSpectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl IlluminantSpectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(CoreError::invalid(format!(
                "illuminant has {} values but grid has {} bands",
                values.len(),
                grid.count()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(
                "illuminant values must be finite and nonnegative".to_string(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A flat M x n block of spectra sharing one grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraSamples {
    grid: WavelengthGrid,
    count: usize,
    data: Vec<f64>,
}

impl SpectraSamples {
    pub fn new(grid: WavelengthGrid, data: Vec<f64>) -> Result<Self> {
        let n = grid.count();
        if data.is_empty() || data.len() % n != 0 {
            return Err(CoreError::invalid(format!(
                "sample block of {} values is not a multiple of {n} bands",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(
                "sample spectra must be finite and nonnegative".to_string(),
            ));
        }
        let count = data.len() / n;
        Ok(Self { grid, count, data })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.grid.count()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.data[i * n..(i + 1) * n]
    }

    /// Convert every reflectance row to radiance by the illuminant.
    pub fn apply_illuminant(&self, illum: &IlluminantSpectrum) -> Result<SpectraSamples> {
        ensure_same_grid(&self.grid, illum.grid())?;
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.count {
            data.extend(elementwise_product(self.row(i), illum.values()));
        }
        SpectraSamples::new(self.grid, data)
    }

    /// Total spread around the unweighted mean: `mean_i ||x_i - mean||^2`.
    pub fn total_variance_trace(&self) -> f64 {
        let n = self.dim();
        let mut mean = vec![0.0; n];
        for i in 0..self.count {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= self.count as f64;
        }
        let mut acc = 0.0;
        for i in 0..self.count {
            acc += squared_distance(self.row(i), &mean);
        }
        acc / self.count as f64
    }

    fn distinct_rows(&self) -> usize {
        let n = self.dim();
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(self.count);
        for i in 0..self.count {
            let bits: Vec<u64> = self.data[i * n..(i + 1) * n]
                .iter()
                .map(|v| v.to_bits())
                .collect();
            seen.insert(bits);
        }
        seen.len()
    }
}

/// Extract every `stride`-th pixel (both axes) from each cube, in cube
/// order then row-major pixel order.
pub fn subsample_corpus(cubes: &[HsiCube], stride: usize) -> Result<SpectraSamples> {
    if cubes.is_empty() {
        return Err(CoreError::EmptyInput("cube corpus"));
    }
    if stride == 0 {
        return Err(CoreError::invalid("stride must be at least 1".to_string()));
    }
    let grid = *cubes[0].grid();
    let n = grid.count();
    let mut data = Vec::new();
    for cube in cubes {
        ensure_same_grid(&grid, cube.grid())?;
        let mut r = 0;
        while r < cube.height() {
            let mut c = 0;
            while c < cube.width() {
                data.extend_from_slice(cube.pixel_rc(r, c));
                c += stride;
            }
            r += stride;
        }
    }
    debug_assert_eq!(data.len() % n, 0);
    SpectraSamples::new(grid, data)
}

/// Radiance of a reflectance spectrum under an illuminant: the elementwise
/// product. Reflectances are expected in [0, 1] but only nonnegativity is
/// enforced.
pub fn reflectance_to_radiance(
    refl: &RadianceSpectrum,
    illum: &IlluminantSpectrum,
) -> Result<RadianceSpectrum> {
    ensure_same_grid(refl.grid(), illum.grid())?;
    RadianceSpectrum::new(
        *refl.grid(),
        elementwise_product(refl.values(), illum.values()),
    )
}

/// The discrete radiance prior: N cluster-center spectra with probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraPrior {
    grid: WavelengthGrid,
    count: usize,
    spectra: Vec<f64>,
    probs: Vec<f64>,
}

impl SpectraPrior {
    pub fn new(grid: WavelengthGrid, spectra: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let prior = Self::from_parts_unchecked(grid, spectra, probs)?;
        let report = validate_prior(&prior);
        if let Some(v) = report.violations.first() {
            return Err(CoreError::invalid(format!("invalid prior: {v}")));
        }
        Ok(prior)
    }

    /// Skips invariant checks on the values; shapes are still validated.
    /// For readers that validate separately via [`validate_prior`].
    pub fn from_parts_unchecked(
        grid: WavelengthGrid,
        spectra: Vec<f64>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.count();
        if probs.is_empty() || spectra.len() != probs.len() * n {
            return Err(CoreError::invalid(format!(
                "prior shape mismatch: {} spectrum values, {} probs, {} bands",
                spectra.len(),
                probs.len(),
                n
            )));
        }
        Ok(Self {
            grid,
            count: probs.len(),
            spectra,
            probs,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    /// Number of prior spectra (N).
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.grid.count()
    }

    pub fn spectrum(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.spectra[i * n..(i + 1) * n]
    }

    pub fn spectra(&self) -> &[f64] {
        &self.spectra
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability-weighted mean spectrum.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let n = self.dim();
        let mut mean = vec![0.0; n];
        for i in 0..self.count {
            let p = self.probs[i];
            for (m, v) in mean.iter_mut().zip(self.spectrum(i)) {
                *m += p * v;
            }
        }
        mean
    }

    /// Trace of the prior covariance: `sum_i p_i ||r_i - mean||^2`.
    pub fn total_variance_trace(&self) -> f64 {
        let mean = self.mean_spectrum();
        (0..self.count)
            .map(|i| self.probs[i] * squared_distance(self.spectrum(i), &mean))
            .sum()
    }

    /// Replace the cluster-share weights by the uniform distribution.
    pub fn with_uniform_probs(mut self) -> Self {
        let p = 1.0 / self.count as f64;
        self.probs = vec![p; self.count];
        self
    }
}

/// How cluster weights are assigned after compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorWeighting {
    /// Probability proportional to the number of samples in the cluster.
    #[default]
    ClusterShare,
    /// Equal probability for every center.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Relative center-movement threshold that ends iteration.
    pub tol: f64,
    pub weighting: PriorWeighting,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            weighting: PriorWeighting::ClusterShare,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansInfo {
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment pass.
    pub objective: Vec<f64>,
    pub reseeded_clusters: usize,
}

/// Lloyd's algorithm with k-means++ seeding. Probabilities are cluster
/// population shares (or uniform). Empty clusters are re-seeded from the
/// point farthest from its assigned center. Fully deterministic for a
/// given seed.
pub fn kmeans_compress(
    samples: &SpectraSamples,
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<(SpectraPrior, KMeansInfo)> {
    let m = samples.count();
    let n = samples.dim();
    if k == 0 {
        return Err(CoreError::invalid("k must be positive".to_string()));
    }
    if k > m {
        return Err(CoreError::invalid(format!(
            "k = {k} exceeds the {m} available samples"
        )));
    }
    if k > samples.distinct_rows() {
        return Err(CoreError::invalid(format!(
            "k = {k} exceeds the number of distinct samples"
        )));
    }

    let key = rng::derive_stream(seed, "prior/kmeans");
    let mut centers = kmeans_pp_init(samples, k, key);
    let mut assignment = vec![0usize; m];
    let mut dists = vec![0.0f64; m];
    let mut objective = Vec::new();
    let mut reseeded = 0usize;
    let mut iterations = 0usize;

    assign(samples, &centers, &mut assignment, &mut dists);
    objective.push(dists.iter().sum());

    loop {
        // Mean update with sequential accumulation: byte-identical results
        // regardless of thread count elsewhere in the pipeline.
        let mut sums = vec![0.0f64; k * n];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            let row = samples.row(i);
            for (s, v) in sums[a * n..(a + 1) * n].iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut new_centers = centers.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..n {
                    new_centers[c * n + j] = sums[c * n + j] / counts[c] as f64;
                }
            }
        }
        let mut taken: HashSet<usize> = HashSet::new();
        for c in 0..k {
            if counts[c] == 0 {
                let far = farthest_point(&dists, &taken);
                taken.insert(far);
                new_centers[c * n..(c + 1) * n].copy_from_slice(samples.row(far));
                reseeded += 1;
            }
        }

        let mut movement: f64 = 0.0;
        for c in 0..k {
            let old = &centers[c * n..(c + 1) * n];
            let new = &new_centers[c * n..(c + 1) * n];
            let delta = squared_distance(old, new).sqrt();
            let norm = old.iter().map(|v| v * v).sum::<f64>().sqrt();
            movement = movement.max(delta / (norm + 1e-12));
        }
        centers = new_centers;
        assign(samples, &centers, &mut assignment, &mut dists);
        objective.push(dists.iter().sum());
        iterations += 1;

        if movement < opts.tol || iterations >= opts.max_iter {
            break;
        }
    }

    let mut counts = vec![0usize; k];
    for &a in &assignment {
        counts[a] += 1;
    }
    let probs: Vec<f64> = match opts.weighting {
        PriorWeighting::ClusterShare => counts.iter().map(|&c| c as f64 / m as f64).collect(),
        PriorWeighting::Uniform => vec![1.0 / k as f64; k],
    };
    let prior = SpectraPrior::new(*samples.grid(), centers, probs)?;
    Ok((
        prior,
        KMeansInfo {
            iterations,
            objective,
            reseeded_clusters: reseeded,
        },
    ))
}

fn kmeans_pp_init(samples: &SpectraSamples, k: usize, key: u64) -> Vec<f64> {
    let m = samples.count();
    let n = samples.dim();
    let mut centers = Vec::with_capacity(k * n);
    let first = ((rng::uniform_open01(key, 0) * m as f64) as usize).min(m - 1);
    centers.extend_from_slice(samples.row(first));
    let mut d2: Vec<f64> = (0..m)
        .map(|i| squared_distance(samples.row(i), samples.row(first)))
        .collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let mut target = rng::uniform_open01(key, j as u64) * total;
        let mut pick = m - 1;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            target -= w;
            if target <= 0.0 {
                pick = i;
                break;
            }
        }
        let row = samples.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(samples.row(i), &row));
        }
        centers.extend_from_slice(&row);
    }
    centers
}

fn assign(samples: &SpectraSamples, centers: &[f64], assignment: &mut [usize], dists: &mut [f64]) {
    let n = samples.dim();
    let k = centers.len() / n;
    for i in 0..samples.count() {
        let row = samples.row(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = squared_distance(row, &centers[c * n..(c + 1) * n]);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
        dists[i] = best_d;
    }
}

fn farthest_point(dists: &[f64], taken: &HashSet<usize>) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::NEG_INFINITY;
    for (i, &d) in dists.iter().enumerate() {
        if !taken.contains(&i) && d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Diagnostic report of [`validate_prior`].
#[derive(Debug, Clone, Default)]
pub struct PriorReport {
    pub violations: Vec<String>,
    pub duplicate_centers: usize,
    pub min_norm: f64,
    pub max_norm: f64,
    pub prob_sum: f64,
    pub min_prob: f64,
    pub max_prob: f64,
}

/// Check prior invariants and summarize its mass distribution. Never
/// fails; problems are listed in `violations`.
pub fn validate_prior(prior: &SpectraPrior) -> PriorReport {
    let mut report = PriorReport {
        min_norm: f64::INFINITY,
        max_norm: f64::NEG_INFINITY,
        min_prob: f64::INFINITY,
        max_prob: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(prior.len());
    for i in 0..prior.len() {
        let row = prior.spectrum(i);
        if row.iter().any(|v| !v.is_finite()) {
            report
                .violations
                .push(format!("non-finite radiance in spectrum {i}"));
        } else if row.iter().any(|v| *v < 0.0) {
            report
                .violations
                .push(format!("negative radiance in spectrum {i}"));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        report.min_norm = report.min_norm.min(norm);
        report.max_norm = report.max_norm.max(norm);
        if !seen.insert(row.iter().map(|v| v.to_bits()).collect()) {
            report.duplicate_centers += 1;
        }
    }
    for (i, p) in prior.probs().iter().enumerate() {
        if !p.is_finite() || *p < 0.0 {
            report.violations.push(format!("invalid probability at {i}"));
        }
        report.min_prob = report.min_prob.min(*p);
        report.max_prob = report.max_prob.max(*p);
    }
    report.prob_sum = prior.probs().iter().sum();
    if (report.prob_sum - 1.0).abs() > 1e-9 {
        report
            .violations
            .push(format!("probs sum != 1 (got {})", report.prob_sum));
    }
    report
}
