//! Simulated edge line scans at a list of stage temperatures and power
//! settings, run through the same spectrum → fit → ΔB pipeline as maps.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::VortexConfiguration;
use crate::fitting::{fit_double_gaussian, shift_to_field, FitOptions};
use crate::rng::{derive_seed, REFERENCE_STREAM};
use crate::scan::{FrequencyPlan, SensorModel};
use crate::sensor::synth_spectrum;
use crate::thermal::{LineScan, LineScanDataset, LineScanSeries};

/// A power setting heats the sample by a fixed offset above the stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSetting {
    pub label: String,
    pub heating_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScanPlan {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub n_points: usize,
    pub standoff: f64,
    pub dwell_time: f64,
    pub stage_temperatures: Vec<f64>,
    pub settings: Vec<PowerSetting>,
    /// Fallback when no scan in the series is above T_c.
    pub noise_floor: Option<f64>,
}

impl LineScanPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 5 {
            return Err(Error::invalid("linescan.n_points", "at least 5 points required"));
        }
        if self.start == self.end {
            return Err(Error::invalid("linescan.end", "must differ from the start point"));
        }
        if !(self.standoff > 0.0) || !(self.dwell_time > 0.0) {
            return Err(Error::invalid("linescan", "standoff and dwell time must be positive"));
        }
        if self.stage_temperatures.is_empty() || self.stage_temperatures.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid(
                "linescan.stage_temperatures",
                "need positive temperatures",
            ));
        }
        if self.settings.is_empty() {
            return Err(Error::invalid("linescan.settings", "need at least one power setting"));
        }
        Ok(())
    }

    fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    /// Distance along the line from the start point.
    pub fn positions(&self) -> Vec<f64> {
        let step = self.length() / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| i as f64 * step).collect()
    }

    fn point(&self, i: usize) -> Vector3<f64> {
        let t = i as f64 / (self.n_points - 1) as f64;
        Vector3::new(
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
            self.standoff,
        )
    }
}

/// Pooled pixel-to-pixel standard deviation of the given profiles, each taken
/// about its own mean.
pub fn pooled_noise(profiles: &[&[f64]]) -> Option<f64> {
    let mut ss = 0.0;
    let mut dof = 0usize;
    for p in profiles {
        if p.len() < 2 {
            continue;
        }
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        ss += p.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        dof += p.len() - 1;
    }
    (dof > 0).then(|| (ss / dof as f64).sqrt())
}

/// Runs every (setting, stage temperature) scan. Scan `j` of setting `k`
/// draws from stream `k·2³² + j`; the recorded temperature is the stage
/// temperature. The noise floor is the pooled noise of scans whose sample
/// temperature is at or above T_c, or the plan's fallback if there are none.
pub fn run_line_scans(
    scene: &VortexConfiguration,
    sensor: &SensorModel,
    freq_plan: &FrequencyPlan,
    plan: &LineScanPlan,
    reference_position: Vector3<f64>,
    options: &FitOptions,
    seed: u64,
) -> Result<LineScanSeries> {
    plan.validate()?;
    sensor.validate()?;
    let reps_f = (plan.dwell_time / sensor.sequence.cycle_time() / freq_plan.n_points as f64).floor();
    if !(reps_f >= 1.0) {
        return Err(Error::invalid(
            "grid.dwell_time",
            "too short for a single repetition per frequency point",
        ));
    }
    let reps = reps_f as u64;
    let params = &sensor.spectrum;

    let jobs: Vec<(usize, usize)> = (0..plan.settings.len())
        .flat_map(|k| (0..plan.stage_temperatures.len()).map(move |j| (k, j)))
        .collect();

    let scans = jobs
        .par_iter()
        .map(|&(k, j)| {
            let mut local = scene.clone();
            local.temperature = plan.stage_temperatures[j] + plan.settings[k].heating_offset;
            local.validate()?;
            let scan_seed = derive_seed(seed, ((k as u64) << 32) | j as u64);

            let ref_center = sensor.resonance_at(&reference_position, &local)?;
            let freqs = freq_plan.frequencies(ref_center, params)?;
            let reference = synth_spectrum(
                &freqs,
                params,
                &sensor.sequence,
                ref_center,
                reps,
                derive_seed(scan_seed, REFERENCE_STREAM),
            )?;
            let ref_fit = fit_double_gaussian(&reference, options).map_err(|e| Error::ReferenceFit(e.to_string()))?;

            let delta_b = (0..plan.n_points)
                .map(|i| {
                    let center = sensor.resonance_at(&plan.point(i), &local)?;
                    let s = synth_spectrum(
                        &freqs,
                        params,
                        &sensor.sequence,
                        center,
                        reps,
                        derive_seed(scan_seed, i as u64),
                    )?;
                    let fit = fit_double_gaussian(&s, options)?;
                    Ok(shift_to_field(fit.center, ref_fit.center, params.shift_sign))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((
                k,
                local.is_normal_state(),
                LineScan {
                    temperature: plan.stage_temperatures[j],
                    delta_b,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let normal: Vec<&[f64]> = scans
        .iter()
        .filter(|(_, n, _)| *n)
        .map(|(_, _, s)| s.delta_b.as_slice())
        .collect();
    let noise_floor = match pooled_noise(&normal).or(plan.noise_floor) {
        Some(v) => v,
        None => {
            return Err(Error::invalid(
                "linescan.noise_floor_t",
                "no scan is above T_c, so a noise floor must be given",
            ))
        }
    };

    let mut datasets: Vec<LineScanDataset> = plan
        .settings
        .iter()
        .map(|s| LineScanDataset {
            label: s.label.clone(),
            scans: Vec::new(),
        })
        .collect();
    for (k, _, scan) in scans {
        datasets[k].scans.push(scan);
    }
    Ok(LineScanSeries {
        positions: plan.positions(),
        datasets,
        noise_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_noise_ignores_offsets() {
        let a = [1.0, 3.0, 1.0, 3.0];
        let b = [11.0, 13.0, 11.0, 13.0];
        let s = pooled_noise(&[&a, &b]).unwrap();
        assert!((s - (8.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert_eq!(pooled_noise(&[]), None);
    }

    #[test]
    fn positions_are_arc_length() {
        let plan = LineScanPlan {
            start: [0.0, 0.0],
            end: [3e-6, 4e-6],
            n_points: 6,
            standoff: 1e-7,
            dwell_time: 1.0,
            stage_temperatures: vec![0.35],
            settings: vec![PowerSetting {
                label: "i".into(),
                heating_offset: 0.0,
            }],
            noise_floor: None,
        };
        let p = plan.positions();
        assert!((p[5] - 5e-6).abs() < 1e-18);
        assert!((plan.point(5) - Vector3::new(3e-6, 4e-6, 1e-7)).norm() < 1e-18);
    }
}
