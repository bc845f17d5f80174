//! Camera calibration: SSF estimation from LED flat fields, the
//! hyperspectral-device calibration divisor, and the color projection.
//!
//! SSF estimation solves a nonnegatively constrained, smoothness-regularized
//! least-squares problem with projected gradient descent. The step size
//! comes from the Lipschitz constant of the gradient, which makes the
//! objective provably non-increasing; iteration stops on a relative-decrease
//! threshold.

use nalgebra::DMatrix;

use crate::cube::{HsiCube, RgbImage};
use crate::error::{CoreError, Result};
use crate::grid::ensure_same_grid;
use crate::spectrum::RadianceSpectrum;
use crate::system::CameraSSF;

/// One LED flat-field measurement: channel means of the photo and the
/// measured LED radiance spectrum.
#[derive(Debug, Clone)]
pub struct CalibrationSample {
    pub c: [f64; 3],
    pub r: RadianceSpectrum,
}

impl CalibrationSample {
    pub fn new(c: [f64; 3], r: RadianceSpectrum) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(
                "channel means must be finite and nonnegative".to_string(),
            ));
        }
        Ok(Self { c, r })
    }
}

/// Second-order difference operator: an (n-2) x n matrix with rows
/// (..., 1, -2, 1, ...). Each row sums to zero, so constant offsets do not
/// change the smoothness penalty.
pub fn second_diff_operator(n: usize) -> DMatrix<f64> {
    let rows = n.saturating_sub(2);
    let mut d = DMatrix::zeros(rows, n);
    for i in 0..rows {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    d
}

#[derive(Debug, Clone, Copy)]
pub struct SsfSolverConfig {
    pub max_iter: usize,
    /// Relative objective decrease that counts as converged.
    pub rel_tol: f64,
}

impl Default for SsfSolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SsfFit {
    pub ssf: CameraSSF,
    /// Smoothness weight actually used (the cross-validated one if the
    /// caller passed `None`).
    pub lambda: f64,
    pub iterations: usize,
    /// Objective value before the first step and after each accepted step.
    pub objective: Vec<f64>,
}

/// Estimate a camera's SSF from LED samples by minimizing
/// `sum_i ||c_i - S^T r_i||^2 + lambda ||D S||^2` subject to `S >= 0`.
/// `lambda = None` selects the weight by 5-fold cross-validation over a
/// log grid from 1e-6 to 1e2.
pub fn estimate_ssf(
    samples: &[CalibrationSample],
    lambda: Option<f64>,
    cfg: &SsfSolverConfig,
) -> Result<SsfFit> {
    if samples.is_empty() {
        return Err(CoreError::EmptyInput("calibration samples"));
    }
    let grid = *samples[0].r.grid();
    for s in samples {
        ensure_same_grid(&grid, s.r.grid())?;
    }
    if let Some(l) = lambda {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(CoreError::invalid(format!(
                "regularization weight must be nonnegative, got {l}"
            )));
        }
    }
    let lambda = match lambda {
        Some(l) => l,
        None => cross_validated_lambda(samples, cfg)?,
    };

    let n = grid.count();
    let (gram, cross, const_term) = normal_parts(samples, n);
    let dtd = {
        let d = second_diff_operator(n);
        d.transpose() * d
    };
    let (x, objective) = solve_nonneg(&gram, &cross, &dtd, lambda, const_term, cfg);
    let iterations = objective.len().saturating_sub(1);

    let mut rows = DMatrix::zeros(3, n);
    for ch in 0..3 {
        for j in 0..n {
            rows[(ch, j)] = x[(j, ch)].max(0.0);
        }
    }
    Ok(SsfFit {
        ssf: CameraSSF::new(grid, rows)?,
        lambda,
        iterations,
        objective,
    })
}

/// Pick the smoothness weight by k-fold cross-validation (k = 5, reduced
/// for tiny sample sets) over a log-spaced grid; ties favor the smaller
/// weight. Deterministic: folds are assigned round-robin by sample index.
pub fn cross_validated_lambda(
    samples: &[CalibrationSample],
    cfg: &SsfSolverConfig,
) -> Result<f64> {
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let folds = samples.len().min(5);
    let grid = *samples[0].r.grid();
    let n = grid.count();
    let dtd = {
        let d = second_diff_operator(n);
        d.transpose() * d
    };
    let candidates: Vec<f64> = (-6..=2).map(|e| 10f64.powi(e)).collect();
    let mut best = (f64::INFINITY, 0.0);
    for &lambda in &candidates {
        let mut cv_err = 0.0;
        for fold in 0..folds {
            let train: Vec<&CalibrationSample> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| i % folds != fold)
                .map(|(_, s)| s)
                .collect();
            let held: Vec<&CalibrationSample> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| i % folds == fold)
                .map(|(_, s)| s)
                .collect();
            let (gram, cross, const_term) = normal_parts_ref(&train, n);
            let (x, _) = solve_nonneg(&gram, &cross, &dtd, lambda, const_term, cfg);
            for s in held {
                let mut err = 0.0;
                for ch in 0..3 {
                    let pred: f64 = (0..n).map(|j| x[(j, ch)] * s.r.values()[j]).sum();
                    err += (s.c[ch] - pred) * (s.c[ch] - pred);
                }
                cv_err += err;
            }
        }
        if cv_err < best.0 {
            best = (cv_err, lambda);
        }
    }
    Ok(best.1)
}

fn normal_parts(samples: &[CalibrationSample], n: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let refs: Vec<&CalibrationSample> = samples.iter().collect();
    normal_parts_ref(&refs, n)
}

/// Gram matrix `sum r r^T`, cross term `sum r c^T`, and `sum ||c||^2`.
fn normal_parts_ref(samples: &[&CalibrationSample], n: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let mut gram = DMatrix::zeros(n, n);
    let mut cross = DMatrix::zeros(n, 3);
    let mut const_term = 0.0;
    for s in samples {
        let r = s.r.values();
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] += r[a] * r[b];
            }
            for ch in 0..3 {
                cross[(a, ch)] += r[a] * s.c[ch];
            }
        }
        const_term += s.c.iter().map(|v| v * v).sum::<f64>();
    }
    (gram, cross, const_term)
}

/// Projected gradient descent on `tr(X^T Q X) - 2 tr(X^T B) + const` over
/// `X >= 0`, with `Q = gram + lambda D^T D`. The 1/L step (L from the top
/// eigenvalue of Q) guarantees descent; iteration stops as soon as the
/// objective fails to decrease by `rel_tol` relatively, so the recorded
/// objective sequence is strictly non-increasing.
fn solve_nonneg(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    dtd: &DMatrix<f64>,
    lambda: f64,
    const_term: f64,
    cfg: &SsfSolverConfig,
) -> (DMatrix<f64>, Vec<f64>) {
    let n = gram.nrows();
    let q = gram + dtd.scale(lambda);
    let l_max = q
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let mut x = DMatrix::zeros(n, 3);
    let objective_of = |x: &DMatrix<f64>| -> f64 {
        let qx = &q * x;
        let mut f = const_term;
        for ch in 0..3 {
            for j in 0..n {
                f += x[(j, ch)] * qx[(j, ch)] - 2.0 * x[(j, ch)] * cross[(j, ch)];
            }
        }
        f
    };
    let mut objective = vec![objective_of(&x)];
    if l_max <= 0.0 {
        // Degenerate system (all spectra zero): the zero matrix already
        // minimizes the data term, and any smoothing keeps it at zero.
        return (x, objective);
    }
    let step = 1.0 / (2.0 * l_max);
    for _ in 0..cfg.max_iter {
        let grad = (&q * &x - cross).scale(2.0);
        let mut next = &x - grad.scale(step);
        next.apply(|v| *v = v.max(0.0));
        let f_next = objective_of(&next);
        let f_prev = *objective.last().unwrap();
        if f_next >= f_prev || f_prev - f_next <= cfg.rel_tol * f_prev.abs() {
            if f_next < f_prev {
                x = next;
                objective.push(f_next);
            }
            break;
        }
        x = next;
        objective.push(f_next);
    }
    (x, objective)
}

/// Band-wise ratio aligning a device's spectral readings to a trusted
/// reference: `divisor = device / reference`. The reference must be
/// strictly positive everywhere.
pub fn calibration_divisor(
    device: &RadianceSpectrum,
    reference: &RadianceSpectrum,
) -> Result<RadianceSpectrum> {
    ensure_same_grid(device.grid(), reference.grid())?;
    let mut values = Vec::with_capacity(device.values().len());
    for (i, (d, r)) in device.values().iter().zip(reference.values()).enumerate() {
        if *r <= 0.0 {
            return Err(CoreError::invalid(format!(
                "reference spectrum is not positive at band {i} ({} nm)",
                device.grid().wavelength(i)
            )));
        }
        values.push(d / r);
    }
    RadianceSpectrum::new(*device.grid(), values)
}

/// Divide every band of a cube by the divisor (device units -> reference
/// units). The divisor must be strictly positive.
pub fn apply_divisor(cube: &HsiCube, divisor: &RadianceSpectrum) -> Result<HsiCube> {
    ensure_same_grid(cube.grid(), divisor.grid())?;
    for (i, d) in divisor.values().iter().enumerate() {
        if *d <= 0.0 {
            return Err(CoreError::invalid(format!(
                "divisor is not positive at band {i} ({} nm)",
                divisor.grid().wavelength(i)
            )));
        }
    }
    scale_bands(cube, divisor.values(), |v, d| v / d)
}

/// Multiply every band of a cube by the divisor; inverse of
/// [`apply_divisor`].
pub fn invert_divisor(cube: &HsiCube, divisor: &RadianceSpectrum) -> Result<HsiCube> {
    ensure_same_grid(cube.grid(), divisor.grid())?;
    scale_bands(cube, divisor.values(), |v, d| v * d)
}

fn scale_bands(cube: &HsiCube, per_band: &[f64], op: impl Fn(f64, f64) -> f64) -> Result<HsiCube> {
    let mut data = Vec::with_capacity(cube.data().len());
    for px in 0..cube.pixel_count() {
        for (b, v) in cube.pixel(px).iter().enumerate() {
            data.push(op(*v, per_band[b]));
        }
    }
    HsiCube::new(
        cube.height(),
        cube.width(),
        *cube.grid(),
        data,
        cube.mask().map(|m| m.to_vec()),
    )
}

/// An n x 3 matrix projecting spectra to a camera's RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorProjection {
    matrix: DMatrix<f64>,
}

impl ColorProjection {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn project(&self, spectrum: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (ch, slot) in out.iter_mut().enumerate() {
            *slot = spectrum
                .iter()
                .enumerate()
                .map(|(j, v)| v * self.matrix[(j, ch)])
                .sum();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ColorProjectionFit {
    pub projection: ColorProjection,
    /// Frobenius norm of the masked residual.
    pub residual: f64,
}

/// Least-squares color projection from cube spectra to RGB pixels over the
/// masked region, via normal equations with a tiny ridge fallback when the
/// gram matrix is rank-deficient.
pub fn fit_color_projection(
    hsi: &HsiCube,
    rgb: &RgbImage,
    mask: Option<&[bool]>,
) -> Result<ColorProjectionFit> {
    if hsi.height() != rgb.height() || hsi.width() != rgb.width() {
        return Err(CoreError::invalid(format!(
            "cube is {}x{} but image is {}x{}",
            hsi.height(),
            hsi.width(),
            rgb.height(),
            rgb.width()
        )));
    }
    let pixels = hsi.pixel_count();
    if let Some(m) = mask {
        if m.len() != pixels {
            return Err(CoreError::invalid(format!(
                "mask has {} entries, expected {pixels}",
                m.len()
            )));
        }
    }
    let n = hsi.bands();
    let selected: Vec<usize> = (0..pixels)
        .filter(|&p| mask.map_or(true, |m| m[p]) && hsi.is_valid(p))
        .collect();
    if selected.len() < n {
        return Err(CoreError::invalid(format!(
            "{} masked pixels are too few to fit an n = {n} projection",
            selected.len()
        )));
    }

    let mut gram = DMatrix::zeros(n, n);
    let mut cross = DMatrix::zeros(n, 3);
    for &p in &selected {
        let spec = hsi.pixel(p);
        let pix = rgb.pixel(p);
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] += spec[a] * spec[b];
            }
            for ch in 0..3 {
                cross[(a, ch)] += spec[a] * pix[ch];
            }
        }
    }
    let solved = gram
        .clone()
        .cholesky()
        .map(|chol| chol.solve(&cross))
        .unwrap_or_else(|| {
            let mut ridged = gram;
            for i in 0..n {
                ridged[(i, i)] += 1e-10;
            }
            ridged
                .cholesky()
                .map(|chol| chol.solve(&cross))
                .unwrap_or_else(|| DMatrix::zeros(n, 3))
        });

    let mut residual_sq = 0.0;
    for &p in &selected {
        let spec = hsi.pixel(p);
        let pix = rgb.pixel(p);
        for ch in 0..3 {
            let pred: f64 = (0..n).map(|j| spec[j] * solved[(j, ch)]).sum();
            residual_sq += (pix[ch] - pred) * (pix[ch] - pred);
        }
    }
    Ok(ColorProjectionFit {
        projection: ColorProjection { matrix: solved },
        residual: residual_sq.sqrt(),
    })
}

/// Result of checking an estimated SSF against chart measurements.
#[derive(Debug, Clone)]
pub struct SsfValidation {
    /// Mean angle between predicted and measured RGB, in degrees.
    pub mean_angle_deg: f64,
    pub used_pixels: usize,
    /// Pixels skipped because a predicted or measured vector had zero norm.
    pub excluded_pixels: usize,
}

/// Project each chart spectrum through the SSF and compare the predicted
/// RGB direction against the measured one. Pure evaluation, no fitting.
pub fn validate_ssf(ssf: &CameraSSF, chart: &HsiCube, rgb: &RgbImage) -> Result<SsfValidation> {
    ensure_same_grid(ssf.grid(), chart.grid())?;
    if chart.height() != rgb.height() || chart.width() != rgb.width() {
        return Err(CoreError::invalid(
            "chart cube and RGB image sizes differ".to_string(),
        ));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for p in 0..chart.pixel_count() {
        if !chart.is_valid(p) {
            continue;
        }
        let spec = chart.pixel(p);
        let mut pred = [0.0f64; 3];
        for ch in 0..3 {
            pred[ch] = ssf
                .rows()
                .row(ch)
                .iter()
                .zip(spec)
                .map(|(s, v)| s * v)
                .sum();
        }
        match crate::metrics::spectral_angle_deg(&pred, rgb.pixel(p)) {
            Some(angle) => {
                sum += angle;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(CoreError::invalid(
            "no usable chart pixels for SSF validation".to_string(),
        ));
    }
    Ok(SsfValidation {
        mean_angle_deg: sum / used as f64,
        used_pixels: used,
        excluded_pixels: excluded,
    })
}
