//! Critical stage temperature from edge line scans, and critical current from
//! differential-resistance traces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_INCLUSION_ROUNDS: usize = 10;
pub const DEFAULT_JUMP_SIGNIFICANCE: f64 = 5.0;

/// Largest |ΔB| along a profile, sign preserved, refined by a parabola through
/// the discrete maximum and its two neighbours.
pub fn extract_peak_field(profile: &[f64]) -> Result<f64> {
    if profile.len() < 5 {
        return Err(Error::invalid("profile", "at least 5 points required"));
    }
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("profile", "contains non-finite values"));
    }
    let (i, _) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("profile is non-empty");
    let peak = profile[i];
    if i == 0 || i == profile.len() - 1 {
        return Ok(peak);
    }
    let (a, b, c) = (profile[i - 1], peak, profile[i + 1]);
    let curvature = a - 2.0 * b + c;
    if curvature == 0.0 {
        return Ok(peak);
    }
    // vertex of the parabola through (−1, a), (0, b), (1, c)
    let offset = 0.5 * (a - c) / curvature;
    let refined = b - 0.25 * (a - c) * offset;
    // keep the refinement only if it extends the extremum in its own direction
    if refined.abs() >= b.abs() && refined.signum() == b.signum() {
        Ok(refined)
    } else {
        Ok(peak)
    }
}

/// One stage temperature and the line profile measured there.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScan {
    pub temperature: f64,
    pub delta_b: Vec<f64>,
}

/// Line scans taken at one power setting.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScanDataset {
    pub label: String,
    pub scans: Vec<LineScan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScanSeries {
    pub positions: Vec<f64>,
    pub datasets: Vec<LineScanDataset>,
    /// Pixel-to-pixel noise of signal-less scans (T).
    pub noise_floor: f64,
}

impl LineScanSeries {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_floor >= 0.0) {
            return Err(Error::invalid("noise_floor", "must be non-negative"));
        }
        for d in &self.datasets {
            for s in &d.scans {
                if !(s.temperature > 0.0) {
                    return Err(Error::invalid(format!("{}.temperature", d.label), "must be positive"));
                }
                if s.delta_b.len() != self.positions.len() {
                    return Err(Error::invalid(
                        format!("{}.profile", d.label),
                        "length does not match the position list",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Peak-field points (T, ΔB_max) per dataset.
    pub fn peak_points(&self) -> Result<Vec<PeakDataset>> {
        self.validate()?;
        self.datasets
            .iter()
            .map(|d| {
                let points = d
                    .scans
                    .iter()
                    .map(|s| Ok((s.temperature, extract_peak_field(&s.delta_b)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PeakDataset {
                    label: d.label.clone(),
                    points,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakDataset {
    pub label: String,
    /// (stage temperature K, ΔB_max T)
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalTemperature {
    pub label: String,
    pub t_c: f64,
    pub t_c_err: f64,
    pub included: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcFit {
    /// Shared slope s of ΔB_max = s·(T_c − T) (T/K).
    pub slope: f64,
    pub slope_err: f64,
    pub datasets: Vec<CriticalTemperature>,
    /// One shared slope plus one intercept per dataset.
    pub n_parameters: usize,
    pub rounds: usize,
    pub residual_sum_squares: f64,
}

pub fn fit_critical_temperature(series: &LineScanSeries) -> Result<TcFit> {
    fit_shared_slope(&series.peak_points()?, series.noise_floor)
}

struct LinearSolution {
    slope: f64,
    intercepts: Vec<f64>,
    covariance: DMatrix<f64>,
    rss: f64,
}

// ΔB = a_k − s·T over the included points, solved by SVD.
fn solve_linear(datasets: &[PeakDataset], included: &[Vec<bool>]) -> Result<LinearSolution> {
    let k = datasets.len();
    let rows: Vec<(usize, f64, f64)> = datasets
        .iter()
        .zip(included)
        .enumerate()
        .flat_map(|(d, (ds, inc))| {
            ds.points
                .iter()
                .zip(inc)
                .filter(|(_, &keep)| keep)
                .map(move |(&(t, b), _)| (d, t, b))
        })
        .collect();
    let n = rows.len();
    let p = k + 1;
    let mut a = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (r, &(d, t, b)) in rows.iter().enumerate() {
        a[(r, 0)] = -t;
        a[(r, 1 + d)] = 1.0;
        y[r] = b;
    }
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > 1e-10 * s_max) {
        return Err(Error::Degenerate(
            "design matrix is rank deficient; each dataset needs two distinct temperatures".into(),
        ));
    }
    let x = svd.solve(&y, 0.0).map_err(|e| Error::Degenerate(e.to_string()))?;
    let resid = &a * &x - &y;
    let rss = resid.norm_squared();
    let dof = n.saturating_sub(p);
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let normal = a.transpose() * &a;
    let covariance = normal
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normal matrix is singular".into()))?
        * sigma2;
    Ok(LinearSolution {
        slope: x[0],
        intercepts: x.iter().skip(1).copied().collect(),
        covariance,
        rss,
    })
}

/// Joint fit of ΔB_max = s·(T_c,k − T) with one slope shared by all datasets.
///
/// Points at or below twice the noise floor never enter the fit. Starting
/// from the remaining candidates, each round refits and keeps only candidates
/// colder than their dataset's fitted crossing, until the set stops changing.
pub fn fit_shared_slope(datasets: &[PeakDataset], noise_floor: f64) -> Result<TcFit> {
    if datasets.is_empty() {
        return Err(Error::invalid("series", "no datasets"));
    }
    let candidates: Vec<Vec<bool>> = datasets
        .iter()
        .map(|d| d.points.iter().map(|&(_, b)| b > 2.0 * noise_floor).collect())
        .collect();
    let mut included = candidates.clone();

    for round in 1..=MAX_INCLUSION_ROUNDS {
        for (d, inc) in datasets.iter().zip(&included) {
            if inc.iter().filter(|&&v| v).count() < 2 {
                return Err(Error::NoSignal(d.label.clone()));
            }
        }
        let sol = solve_linear(datasets, &included)?;
        if !(sol.slope > 0.0) {
            return Err(Error::Degenerate("fitted slope is not positive".into()));
        }
        let crossings: Vec<f64> = sol.intercepts.iter().map(|a| a / sol.slope).collect();
        let next: Vec<Vec<bool>> = datasets
            .iter()
            .zip(&candidates)
            .zip(&crossings)
            .map(|((d, cand), &tc)| d.points.iter().zip(cand).map(|(&(t, _), &c)| c && t < tc).collect())
            .collect();
        if next == included {
            let s = sol.slope;
            let cov = &sol.covariance;
            let out = datasets
                .iter()
                .zip(included)
                .enumerate()
                .map(|(k, (d, inc))| {
                    let a = sol.intercepts[k];
                    let r = a / s;
                    // delta method for T_c = a/s
                    let var = (cov[(k + 1, k + 1)] - 2.0 * r * cov[(0, k + 1)] + r * r * cov[(0, 0)]) / (s * s);
                    CriticalTemperature {
                        label: d.label.clone(),
                        t_c: r,
                        t_c_err: var.max(0.0).sqrt(),
                        included: inc,
                    }
                })
                .collect();
            return Ok(TcFit {
                slope: s,
                slope_err: cov[(0, 0)].max(0.0).sqrt(),
                datasets: out,
                n_parameters: datasets.len() + 1,
                rounds: round,
                residual_sum_squares: sol.rss,
            });
        }
        included = next;
    }
    Err(Error::InclusionUnstable(MAX_INCLUSION_ROUNDS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportTrace {
    pub current: Vec<f64>,
    pub du_di: Vec<f64>,
    pub contact_resistance: f64,
}

impl TransportTrace {
    pub fn validate(&self) -> Result<()> {
        if self.current.len() != self.du_di.len() {
            return Err(Error::invalid("trace", "current and du_di differ in length"));
        }
        if self.current.len() < 10 {
            return Err(Error::invalid("trace", "at least 10 points required"));
        }
        if self.current.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trace.current", "must be strictly increasing"));
        }
        if self.du_di.iter().any(|v| !v.is_finite()) || !self.contact_resistance.is_finite() {
            return Err(Error::invalid("trace.du_di", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Current at the resistive side of the jump (A).
    pub critical_current: f64,
    /// Size of the resistance drop towards zero current (Ω).
    pub drop: f64,
    /// Index of the resistive-side sample.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCurrentResult {
    pub corrected: Vec<f64>,
    pub threshold: f64,
    pub transition: Option<Transition>,
}

/// Finds the largest drop of dU/dI seen when moving towards zero current.
///
/// A step between samples i and i+1 counts as a drop of
/// (R_{i+1} − R_i)·sign(I_i + I_{i+1}), so it is positive whenever the
/// resistance falls on the side closer to zero bias. The drop must exceed
/// `significance` times the median absolute successive difference.
pub fn detect_critical_current(trace: &TransportTrace, significance: f64) -> Result<CriticalCurrentResult> {
    trace.validate()?;
    let corrected: Vec<f64> = trace.du_di.iter().map(|r| r - trace.contact_resistance).collect();
    let diffs: Vec<f64> = corrected.windows(2).map(|w| w[1] - w[0]).collect();
    let mut abs_diffs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    abs_diffs.sort_by(f64::total_cmp);
    let m = abs_diffs.len();
    let median = if m % 2 == 1 {
        abs_diffs[m / 2]
    } else {
        0.5 * (abs_diffs[m / 2 - 1] + abs_diffs[m / 2])
    };
    let threshold = significance * median;

    let best = diffs
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mid = trace.current[i] + trace.current[i + 1];
            (i, d * mid.signum())
        })
        .filter(|&(_, drop)| drop > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1));

    let transition = best.filter(|&(_, drop)| drop > threshold).map(|(i, drop)| {
        let resistive = if trace.current[i + 1].abs() >= trace.current[i].abs() {
            i + 1
        } else {
            i
        };
        Transition {
            critical_current: trace.current[resistive],
            drop,
            index: resistive,
        }
    });
    Ok(CriticalCurrentResult {
        corrected,
        threshold,
        transition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_dataset(label: &str, slope: f64, tc: f64, temps: &[f64]) -> PeakDataset {
        PeakDataset {
            label: label.into(),
            points: temps.iter().map(|&t| (t, (slope * (tc - t)).max(0.0))).collect(),
        }
    }

    #[test]
    fn peak_extraction() {
        let tri = [0.0, 25e-6, 50e-6, 75e-6, 100e-6, 75e-6, 50e-6, 25e-6, 0.0];
        assert!((extract_peak_field(&tri).unwrap() - 100e-6).abs() < 1e-18);
        assert_eq!(extract_peak_field(&[0.0; 7]).unwrap(), 0.0);
        let neg = [0.0, -1.0, -3.0, -1.0, 0.0];
        assert_eq!(extract_peak_field(&neg).unwrap(), -3.0);
        assert!(extract_peak_field(&[1.0, 2.0, 1.0, 0.0]).is_err());
        // parabola sampled off its vertex
        let p: Vec<f64> = (0..9).map(|i| 5.0 - 0.2 * (i as f64 - 4.3).powi(2)).collect();
        assert!((extract_peak_field(&p).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn three_noiseless_datasets() {
        let temps: Vec<f64> = (0..12).map(|i| 0.35 + 0.1 * i as f64).collect();
        let data = vec![
            linear_dataset("i", 80e-6, 1.27, &temps),
            linear_dataset("ii", 80e-6, 1.05, &temps),
            linear_dataset("iii", 80e-6, 0.79, &temps),
        ];
        let fit = fit_shared_slope(&data, 1e-6).unwrap();
        assert_eq!(fit.n_parameters, 4);
        for (d, tc) in fit.datasets.iter().zip([1.27, 1.05, 0.79]) {
            assert!((d.t_c - tc).abs() < 1e-9, "{} vs {tc}", d.t_c);
        }
        assert!((fit.slope - 80e-6).abs() < 1e-15);
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let data = vec![PeakDataset {
            label: "a".into(),
            points: vec![(0.4, 90e-6), (0.7, 60e-6)],
        }];
        let fit = fit_shared_slope(&data, 1e-6).unwrap();
        assert!((fit.datasets[0].t_c - 1.3).abs() < 1e-12);
        assert!((fit.slope - 100e-6).abs() < 1e-16);
    }

    #[test]
    fn pure_noise_has_no_signal() {
        let data = vec![PeakDataset {
            label: "hot".into(),
            points: vec![(1.4, 1e-6), (1.5, -2e-6), (1.6, 1.5e-6)],
        }];
        assert!(matches!(fit_shared_slope(&data, 1e-6), Err(Error::NoSignal(l)) if l == "hot"));
    }

    #[test]
    fn single_temperature_is_degenerate() {
        let data = vec![PeakDataset {
            label: "a".into(),
            points: vec![(0.5, 90e-6), (0.5, 80e-6), (0.5, 85e-6)],
        }];
        assert!(matches!(fit_shared_slope(&data, 1e-6), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_dataset_matches_ordinary_least_squares() {
        let pts = vec![(0.4, 71e-6), (0.5, 64e-6), (0.6, 52e-6), (0.7, 47e-6), (0.9, 29e-6)];
        let data = vec![PeakDataset {
            label: "a".into(),
            points: pts.clone(),
        }];
        let fit = fit_shared_slope(&data, 1e-6).unwrap();
        let n = pts.len() as f64;
        let (mt, mb) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mb)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let beta = sxy / sxx;
        let alpha = mb - beta * mt;
        assert!((fit.slope + beta).abs() < 1e-12 * beta.abs());
        assert!((fit.datasets[0].t_c - (-alpha / beta)).abs() < 1e-10);
    }

    #[test]
    fn hot_points_are_excluded() {
        let mut d = linear_dataset("i", 80e-6, 1.05, &[0.35, 0.5, 0.65, 0.8, 0.95]);
        // hot points carry only noise, one of them above the 2σ floor
        d.points.extend([(1.1, 3e-6), (1.2, 0.5e-6), (1.3, -1e-6)]);
        let fit = fit_shared_slope(&[d], 1e-6).unwrap();
        assert!((fit.datasets[0].t_c - 1.05).abs() < 1e-9);
        assert_eq!(
            fit.datasets[0].included,
            vec![true, true, true, true, true, false, false, false]
        );
    }

    fn step_trace() -> TransportTrace {
        let current: Vec<f64> = (0..30).map(|i| i as f64 * 0.1e-3).collect();
        let du_di = current
            .iter()
            .map(|&i| if i < 1e-3 - 1e-12 { 18.4 } else { 30.0 })
            .collect();
        TransportTrace {
            current,
            du_di,
            contact_resistance: 18.4,
        }
    }

    #[test]
    fn step_gives_critical_current() {
        let r = detect_critical_current(&step_trace(), DEFAULT_JUMP_SIGNIFICANCE).unwrap();
        let t = r.transition.unwrap();
        assert!((t.critical_current - 1e-3).abs() < 1e-15);
        assert!(r.corrected[..10].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn smooth_curve_has_no_transition() {
        let current: Vec<f64> = (0..40).map(|i| i as f64 * 0.1e-3).collect();
        let du_di = current.iter().map(|&i| 18.4 + 2e6 * i * i).collect();
        let trace = TransportTrace {
            current,
            du_di,
            contact_resistance: 18.4,
        };
        assert!(detect_critical_current(&trace, DEFAULT_JUMP_SIGNIFICANCE)
            .unwrap()
            .transition
            .is_none());
    }

    #[test]
    fn larger_of_two_steps_wins() {
        let current: Vec<f64> = (0..40).map(|i| i as f64 * 0.1e-3).collect();
        let du_di = current
            .iter()
            .map(|&i| 18.4 + if i > 0.95e-3 { 4.0 } else { 0.0 } + if i > 2.45e-3 { 9.0 } else { 0.0 })
            .collect();
        let trace = TransportTrace {
            current,
            du_di,
            contact_resistance: 18.4,
        };
        let t = detect_critical_current(&trace, DEFAULT_JUMP_SIGNIFICANCE)
            .unwrap()
            .transition
            .unwrap();
        assert!((t.critical_current - 2.5e-3).abs() < 1e-15);
    }

    #[test]
    fn negative_branch_is_mirrored() {
        let current: Vec<f64> = (0..41).map(|i| (i as f64 - 20.0) * 0.1e-3).collect();
        let du_di = current
            .iter()
            .map(|&i| if i.abs() < 1.2e-3 - 1e-12 { 18.4 } else { 25.0 })
            .collect();
        let trace = TransportTrace {
            current,
            du_di,
            contact_resistance: 18.4,
        };
        let t = detect_critical_current(&trace, DEFAULT_JUMP_SIGNIFICANCE)
            .unwrap()
            .transition
            .unwrap();
        assert!((t.critical_current.abs() - 1.2e-3).abs() < 1e-15);
    }

    #[test]
    fn offset_does_not_move_the_transition() {
        let base = step_trace();
        let a = detect_critical_current(&base, DEFAULT_JUMP_SIGNIFICANCE).unwrap();
        let shifted = TransportTrace {
            du_di: base.du_di.iter().map(|r| r + 7.5).collect(),
            ..base
        };
        let b = detect_critical_current(&shifted, DEFAULT_JUMP_SIGNIFICANCE).unwrap();
        assert_eq!(a.transition.map(|t| t.index), b.transition.map(|t| t.index));
    }
}
