//! Double-Gaussian fits of pulsed-ODMR spectra and frequency-to-field
//! conversion.
//!
//! The model is B·[1 − C·(G(f; f0 − A/2) + G(f; f0 + A/2))] with shared
//! contrast C and FWHM Δν for the two ¹⁵N hyperfine lines. Internally the
//! solver works in scaled coordinates (baseline relative to its guess, center
//! and widths in units of the guessed linewidth) so that one step tolerance is
//! meaningful for every parameter.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, LeastSquaresProblem, LmSettings};
use crate::sensor::{gaussian_line, OdmrSpectrum, ShiftSign, GYROMAGNETIC_RATIO};

pub const MIN_SPECTRUM_POINTS: usize = 8;

/// A fitted contrast below this many standard errors is treated as no dip.
pub const MIN_CONTRAST_SIGNIFICANCE: f64 = 3.5;

// Loose screen on the smoothed data before fitting; the significance test
// after the fit makes the final call.
const PREGATE_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Weights 1/max(counts, 1).
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub hyperfine_splitting: f64,
    pub splitting_fixed: bool,
    pub weighting: Weighting,
    pub lm: LmSettings,
}

impl FitOptions {
    pub fn new(hyperfine_splitting: f64) -> Self {
        FitOptions {
            hyperfine_splitting,
            splitting_fixed: true,
            weighting: Weighting::Unweighted,
            lm: LmSettings::default(),
        }
    }
}

/// One-sigma parameter uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitUncertainties {
    pub center: f64,
    pub contrast: f64,
    pub linewidth_fwhm: f64,
    pub baseline: f64,
    pub hyperfine_splitting: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub center: f64,
    pub contrast: f64,
    pub linewidth_fwhm: f64,
    pub baseline: f64,
    pub hyperfine_splitting: f64,
    pub uncertainties: FitUncertainties,
    /// Pearson χ² against Poisson variances, Σ (n − μ)²/max(μ, 1).
    pub chi_square: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn reduced_chi_square(&self) -> f64 {
        self.chi_square / self.dof.max(1) as f64
    }

    /// Model counts at `f` for the fitted parameters.
    pub fn model(&self, f: f64) -> f64 {
        double_gaussian(
            f,
            self.baseline,
            self.center,
            self.contrast,
            self.linewidth_fwhm,
            self.hyperfine_splitting,
        )
    }
}

pub fn double_gaussian(f: f64, baseline: f64, center: f64, contrast: f64, fwhm: f64, splitting: f64) -> f64 {
    let half = 0.5 * splitting;
    baseline * (1.0 - contrast * (gaussian_line(f, center - half, fwhm) + gaussian_line(f, center + half, fwhm)))
}

/// ΔB = sign·(center − reference)/γ.
pub fn shift_to_field(center: f64, reference_center: f64, shift_sign: ShiftSign) -> f64 {
    shift_sign.value() * (center - reference_center) / GYROMAGNETIC_RATIO
}

#[derive(Debug, Clone, Copy)]
struct Guess {
    baseline: f64,
    center: f64,
    contrast: f64,
    width: f64,
    splitting: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn smooth3(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| match i {
            0 => 0.5 * (y[0] + y[1]),
            _ if i == n - 1 => 0.5 * (y[n - 2] + y[n - 1]),
            _ => (y[i - 1] + y[i] + y[i + 1]) / 3.0,
        })
        .collect()
}

// Frequency where `s` first rises back to `level`, walking from `start` in
// direction `step`; linear interpolation between samples.
fn half_depth_crossing(freqs: &[f64], s: &[f64], start: usize, step: isize, level: f64) -> Option<f64> {
    let mut i = start as isize;
    loop {
        let j = i + step;
        if j < 0 || j as usize >= s.len() {
            return None;
        }
        let (a, b) = (i as usize, j as usize);
        if s[b] >= level {
            let t = (level - s[a]) / (s[b] - s[a]);
            return Some(freqs[a] + t * (freqs[b] - freqs[a]));
        }
        i = j;
    }
}

fn interpolate(freqs: &[f64], s: &[f64], f: f64) -> Option<f64> {
    if f < freqs[0] || f > freqs[freqs.len() - 1] {
        return None;
    }
    let j = freqs.partition_point(|&x| x <= f).clamp(1, freqs.len() - 1);
    let t = (f - freqs[j - 1]) / (freqs[j] - freqs[j - 1]);
    Some(s[j - 1] + t * (s[j] - s[j - 1]))
}

fn initial_guess(freqs: &[f64], counts: &[f64], splitting: f64, splitting_fixed: bool) -> Result<Guess> {
    let baseline = median(counts);
    let s = smooth3(counts);
    let diffs: Vec<f64> = counts.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let sigma = 1.4826 * median(&diffs) / std::f64::consts::SQRT_2;
    let sigma_smoothed = sigma / 3f64.sqrt();

    let (i1, &min1) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("spectrum is non-empty");
    let depth1 = baseline - min1;
    if !(depth1 > PREGATE_SIGMAS * sigma_smoothed) || depth1 <= 0.0 {
        return Err(Error::NoResonance);
    }

    let spacing = median(&freqs.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>());
    let second = (1..s.len() - 1)
        .filter(|&j| j != i1 && s[j] <= s[j - 1] && s[j] <= s[j + 1])
        .filter(|&j| baseline - s[j] >= 0.4 * depth1)
        .filter(|&j| (freqs[j] - freqs[i1]).abs() >= 0.5 * splitting.max(spacing))
        .filter(|&j| {
            let (lo, hi) = if j < i1 { (j, i1) } else { (i1, j) };
            let hump = s[lo..=hi].iter().cloned().fold(f64::MIN, f64::max);
            hump - s[j].max(min1) > 2.0 * sigma_smoothed
        })
        .min_by(|&a, &b| s[a].total_cmp(&s[b]));

    let level = baseline - 0.5 * depth1;
    let (center, mut width, split) = match second {
        Some(j) => {
            let outward = if j > i1 { -1 } else { 1 };
            let hw = half_depth_crossing(freqs, &s, i1, outward, level)
                .map(|f| (f - freqs[i1]).abs())
                .unwrap_or(spacing);
            let split = if splitting_fixed {
                splitting
            } else {
                (freqs[j] - freqs[i1]).abs()
            };
            (0.5 * (freqs[i1] + freqs[j]), 2.0 * hw, split)
        }
        None => {
            // merged lines: fold the splitting into an effective width
            let left = half_depth_crossing(freqs, &s, i1, -1, level).unwrap_or(freqs[0]);
            let right = half_depth_crossing(freqs, &s, i1, 1, level).unwrap_or(freqs[freqs.len() - 1]);
            let w_eff = right - left;
            let w = (w_eff * w_eff - splitting * splitting).max(0.25 * w_eff * w_eff).sqrt();
            (freqs[i1], w, splitting)
        }
    };
    width = width.max(2.0 * spacing);
    // the deepest point sits on one of the two lines; keep whichever
    // candidate center puts both lines deepest
    let doublet_depth = |c: f64| {
        [c - 0.5 * split, c + 0.5 * split]
            .iter()
            .map(|&f| interpolate(freqs, &s, f).map_or(0.0, |v| baseline - v))
            .sum::<f64>()
    };
    let center = [center, freqs[i1] - 0.5 * split, freqs[i1] + 0.5 * split]
        .into_iter()
        .fold((center, f64::NEG_INFINITY), |best, c| {
            let d = doublet_depth(c);
            if d > best.1 {
                (c, d)
            } else {
                best
            }
        })
        .0;
    let overlap = (-4.0 * LN_2 * split * split / (width * width)).exp();
    let contrast = (depth1 / (baseline * (1.0 + overlap))).clamp(1e-4, 0.95);
    Ok(Guess {
        baseline,
        center,
        contrast,
        width,
        splitting: split,
    })
}

struct DoubleGaussianProblem<'a> {
    offsets: Vec<f64>,
    counts: &'a [f64],
    sqrt_weights: Vec<f64>,
    origin: Guess,
    splitting_free: bool,
}

struct Physical {
    baseline: f64,
    center_offset: f64,
    contrast: f64,
    width: f64,
    splitting: f64,
}

impl DoubleGaussianProblem<'_> {
    fn physical(&self, u: &DVector<f64>) -> Physical {
        let g = &self.origin;
        Physical {
            baseline: g.baseline * u[0],
            center_offset: g.width * u[1],
            contrast: u[2],
            width: g.width * u[3],
            splitting: if self.splitting_free {
                g.splitting + g.width * u[4]
            } else {
                g.splitting
            },
        }
    }
}

impl LeastSquaresProblem for DoubleGaussianProblem<'_> {
    fn residuals(&self, u: &DVector<f64>) -> DVector<f64> {
        let p = self.physical(u);
        DVector::from_iterator(
            self.offsets.len(),
            self.offsets
                .iter()
                .zip(self.counts)
                .zip(&self.sqrt_weights)
                .map(|((&x, &y), &sw)| {
                    sw * (double_gaussian(x, p.baseline, p.center_offset, p.contrast, p.width, p.splitting) - y)
                }),
        )
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let p = self.physical(u);
        let g = &self.origin;
        let n_params = u.len();
        let k = 8.0 * LN_2 / (p.width * p.width);
        let mut jac = DMatrix::zeros(self.offsets.len(), n_params);
        for (i, (&x, &sw)) in self.offsets.iter().zip(&self.sqrt_weights).enumerate() {
            let half = 0.5 * p.splitting;
            let (d_lo, d_hi) = (x - (p.center_offset - half), x - (p.center_offset + half));
            let g_lo = gaussian_line(x, p.center_offset - half, p.width);
            let g_hi = gaussian_line(x, p.center_offset + half, p.width);
            let bc = p.baseline * p.contrast;
            // ∂G/∂μ = G·k·(x − μ); ∂G/∂w = G·k·(x − μ)²/w
            let d_center = -bc * k * (g_lo * d_lo + g_hi * d_hi);
            let d_width = -bc * k * (g_lo * d_lo * d_lo + g_hi * d_hi * d_hi) / p.width;
            jac[(i, 0)] = sw * g.baseline * (1.0 - p.contrast * (g_lo + g_hi));
            jac[(i, 1)] = sw * g.width * d_center;
            jac[(i, 2)] = sw * -p.baseline * (g_lo + g_hi);
            jac[(i, 3)] = sw * g.width * d_width;
            if self.splitting_free {
                let d_split = -bc * k * 0.5 * (g_hi * d_hi - g_lo * d_lo);
                jac[(i, 4)] = sw * g.width * d_split;
            }
        }
        jac
    }
}

/// Least-squares double-Gaussian fit of one spectrum.
pub fn fit_double_gaussian(spectrum: &OdmrSpectrum, options: &FitOptions) -> Result<FitResult> {
    spectrum.validate()?;
    let n = spectrum.len();
    if n < MIN_SPECTRUM_POINTS {
        return Err(Error::invalid(
            "spectrum",
            format!("{n} points, at least {MIN_SPECTRUM_POINTS} required"),
        ));
    }
    let counts: Vec<f64> = spectrum.counts.iter().map(|&c| c as f64).collect();
    let guess = initial_guess(
        &spectrum.frequencies,
        &counts,
        options.hyperfine_splitting,
        options.splitting_fixed,
    )?;

    let sqrt_weights = match options.weighting {
        Weighting::Unweighted => vec![1.0; n],
        Weighting::Poisson => counts.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect(),
    };
    let problem = DoubleGaussianProblem {
        offsets: spectrum.frequencies.iter().map(|f| f - guess.center).collect(),
        counts: &counts,
        sqrt_weights,
        origin: Guess { center: 0.0, ..guess },
        splitting_free: !options.splitting_fixed,
    };
    let n_params = if options.splitting_fixed { 4 } else { 5 };
    let mut start = vec![1.0, 0.0, guess.contrast, 1.0];
    if !options.splitting_fixed {
        start.push(0.0);
    }
    let report = minimize(&problem, DVector::from_vec(start), &options.lm);
    let p = problem.physical(&report.params);
    if !(p.contrast > 0.0) {
        return Err(Error::NoResonance);
    }

    let dof = n.saturating_sub(n_params);
    let scale = if dof > 0 {
        2.0 * report.cost / dof as f64
    } else {
        f64::NAN
    };
    let cov = report.normal_matrix.clone().try_inverse().map(|m| m * scale);
    let sd = |i: usize| cov.as_ref().map_or(f64::NAN, |c| c[(i, i)].max(0.0).sqrt());
    let width = p.width.abs();
    let uncertainties = FitUncertainties {
        baseline: guess.baseline * sd(0),
        center: guess.width * sd(1),
        contrast: sd(2),
        linewidth_fwhm: guess.width * sd(3),
        hyperfine_splitting: (!options.splitting_fixed).then(|| guess.width * sd(4)),
    };
    let center = guess.center + p.center_offset;
    let chi_square = spectrum
        .frequencies
        .iter()
        .zip(&counts)
        .map(|(&f, &y)| {
            let mu = double_gaussian(f, p.baseline, center, p.contrast, width, p.splitting);
            (y - mu).powi(2) / mu.max(1.0)
        })
        .sum();
    let finite = [
        uncertainties.center,
        uncertainties.contrast,
        uncertainties.linewidth_fwhm,
        uncertainties.baseline,
    ]
    .iter()
    .all(|v| v.is_finite());
    if uncertainties.contrast.is_finite() && p.contrast < MIN_CONTRAST_SIGNIFICANCE * uncertainties.contrast {
        return Err(Error::NoResonance);
    }
    let converged = report.converged && finite && p.contrast < 1.0 && width > 0.0;

    Ok(FitResult {
        center,
        contrast: p.contrast,
        linewidth_fwhm: width,
        baseline: p.baseline,
        hyperfine_splitting: p.splitting,
        uncertainties,
        chi_square,
        dof,
        converged,
        iterations: report.iterations,
        cost_history: report.cost_history,
    })
}
