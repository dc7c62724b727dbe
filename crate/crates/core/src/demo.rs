//! Desk-scale reproductions of the measurement figures.
//!
//! Each demo builds an [`ExperimentConfig`], runs the full pipeline and writes
//! its outputs (config, maps, spectra, reports) into a directory. The returned
//! [`DemoReport`] carries the headline numbers for programmatic checks.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LineScanConfig, PowerSettingConfig, VortexConfig};
use crate::error::{Error, Result};
use crate::field::FluxSign;
use crate::fitting::{fit_double_gaussian, FitResult};
use crate::formats::{self, Provenance};
use crate::linescan::{pooled_noise, run_line_scans};
use crate::rng::{derive_seed, rng_for};
use crate::scan::{
    count_vortices, estimate_sensitivity, reconstruct_field_map, repetitions_per_point, run_scan, Blob, FieldMap,
};
use crate::sensor::synth_spectrum;
use crate::thermal::{
    detect_critical_current, fit_critical_temperature, LineScanSeries, TcFit, TransportTrace, DEFAULT_JUMP_SIGNIFICANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoFigure {
    Fig2b,
    Fig3c,
    Fig3d,
    Fig3e,
    Fig3f,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl DemoFigure {
    pub const ALL: [DemoFigure; 8] = [
        DemoFigure::Fig2b,
        DemoFigure::Fig3c,
        DemoFigure::Fig3d,
        DemoFigure::Fig3e,
        DemoFigure::Fig3f,
        DemoFigure::Fig4a,
        DemoFigure::Fig4b,
        DemoFigure::Fig4c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemoFigure::Fig2b => "2b",
            DemoFigure::Fig3c => "3c",
            DemoFigure::Fig3d => "3d",
            DemoFigure::Fig3e => "3e",
            DemoFigure::Fig3f => "3f",
            DemoFigure::Fig4a => "4a",
            DemoFigure::Fig4b => "4b",
            DemoFigure::Fig4c => "4c",
        }
    }

    /// Vortex count the map demos are configured with.
    pub fn configured_vortices(self) -> Option<usize> {
        match self {
            DemoFigure::Fig3c | DemoFigure::Fig3f => Some(0),
            DemoFigure::Fig3d => Some(2),
            DemoFigure::Fig3e => Some(8),
            _ => None,
        }
    }
}

impl fmt::Display for DemoFigure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DemoFigure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DemoFigure::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| {
            Error::invalid(
                "figure",
                format!("unknown figure '{s}' (expected 2b, 3c, 3d, 3e, 3f, 4a, 4b or 4c)"),
            )
        })
    }
}

/// Sample heating offsets of the three power settings in the line-scan demos.
pub const DEMO_HEATING_OFFSETS: [(&str, f64); 3] = [("i", 0.0), ("ii", 0.22), ("iii", 0.48)];
pub const DEMO_LINESCAN_TC: f64 = 1.27;
pub const DEMO_EDGE_SLOPE: f64 = 100e-6;

/// Transport demo: strip T_c, zero-temperature critical current, normal
/// resistance and contact resistance.
const STRIP_TC: f64 = 1.30;
const STRIP_IC0: f64 = 2e-3;
const STRIP_RN: f64 = 11.6;
pub const CONTACT_RESISTANCE: f64 = 18.4;

fn vortex(x: f64, y: f64) -> VortexConfig {
    VortexConfig {
        x_m: x,
        y_m: y,
        sign: FluxSign::Positive,
    }
}

fn map_grid(cfg: &mut ExperimentConfig, pixel: f64, dwell: f64) {
    let n = 32;
    cfg.grid.n_x = n;
    cfg.grid.n_y = n;
    cfg.grid.pixel_size_m = pixel;
    cfg.grid.origin_x_m = -0.5 * pixel * (n - 1) as f64;
    cfg.grid.origin_y_m = -0.5 * pixel * (n - 1) as f64;
    cfg.grid.dwell_time_s = dwell;
}

/// Pixel size for the vortex maps: the 32×32 grid spans 5.4 µm, just
/// covering the 5 µm disc.
const VORTEX_MAP_PIXEL: f64 = 5.4e-6 / 31.0;

pub fn demo_config(figure: DemoFigure) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    match figure {
        DemoFigure::Fig2b => {}
        DemoFigure::Fig3c => {
            cfg.scene.temperature_k = 3.0;
            cfg.scene.bias_bz_t = 1e-3;
            map_grid(&mut cfg, 208e-9, 30.0);
        }
        DemoFigure::Fig3d => {
            cfg.scene.temperature_k = 0.35;
            cfg.scene.bias_bz_t = 0.4e-3;
            cfg.scene.vortices = vec![vortex(-0.9e-6, 0.5e-6), vortex(1.0e-6, -0.6e-6)];
            cfg.analysis.vortex_threshold_t = 100e-6;
            map_grid(&mut cfg, VORTEX_MAP_PIXEL, 30.0);
        }
        DemoFigure::Fig3e => {
            cfg.scene.temperature_k = 0.35;
            cfg.scene.bias_bz_t = 1e-3;
            let mut v: Vec<VortexConfig> = (0..7)
                .map(|k| {
                    let a = k as f64 * TAU / 7.0 + 0.2;
                    vortex(1.95e-6 * a.cos(), 1.95e-6 * a.sin())
                })
                .collect();
            v.push(vortex(0.1e-6, 0.05e-6));
            cfg.scene.vortices = v;
            cfg.analysis.vortex_threshold_t = 150e-6;
            // vortex cores reach ≈250 µT, beyond the default ±7 MHz plan
            cfg.frequency_plan.n_points = 61;
            cfg.frequency_plan.half_span_hz = Some(11e6);
            map_grid(&mut cfg, VORTEX_MAP_PIXEL, 30.0);
        }
        DemoFigure::Fig3f => {
            cfg.scene.temperature_k = 0.69;
            cfg.scene.bias_bz_t = 6e-3;
            map_grid(&mut cfg, 185e-9, 60.0);
        }
        DemoFigure::Fig4a | DemoFigure::Fig4b => {
            cfg.scene.bias_bz_t = 1e-3;
            cfg.scene.material.t_c_k = DEMO_LINESCAN_TC;
            cfg.scene.material.edge_slope_t_per_k = DEMO_EDGE_SLOPE;
            cfg.linescan = Some(LineScanConfig {
                settings: DEMO_HEATING_OFFSETS
                    .iter()
                    .map(|&(label, off)| PowerSettingConfig {
                        label: label.into(),
                        heating_offset_k: off,
                    })
                    .collect(),
                ..LineScanConfig::default()
            });
        }
        DemoFigure::Fig4c => {}
    }
    cfg
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub figure: DemoFigure,
    /// Headline numbers, in output order.
    pub summary: Vec<(String, String)>,
    pub field_map: Option<FieldMap>,
    pub blobs: Option<Vec<Blob>>,
    /// Pixel-to-pixel standard deviation of the map (T).
    pub map_noise: Option<f64>,
    /// Largest |ΔB − mean ΔB| over the map (T).
    pub map_max_deviation: Option<f64>,
    pub line_scans: Option<LineScanSeries>,
    pub tc_fit: Option<TcFit>,
    /// (stage temperature, true I_c, detected I_c)
    pub critical_currents: Vec<(f64, Option<f64>, Option<f64>)>,
    pub spectrum_fits: Vec<(f64, FitResult)>,
}

impl DemoReport {
    fn new(figure: DemoFigure) -> Self {
        DemoReport {
            figure,
            summary: Vec::new(),
            field_map: None,
            blobs: None,
            map_noise: None,
            map_max_deviation: None,
            line_scans: None,
            tc_fit: None,
            critical_currents: Vec::new(),
            spectrum_fits: Vec::new(),
        }
    }

    fn add(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn summary_text(&self, prov: &Provenance) -> String {
        let mut s = format!(
            "# nvscan demo-{}\n# config_sha256: {}\n# seed: {}\n",
            self.figure, prov.config_sha256, prov.seed
        );
        for (k, v) in &self.summary {
            s.push_str(&format!("{k}: {v}\n"));
        }
        s
    }
}

/// Runs a demo with the given seed, writing its outputs into `out_dir`.
pub fn run_demo(figure: DemoFigure, seed: u64, out_dir: &Path) -> Result<DemoReport> {
    let mut cfg = demo_config(figure);
    cfg.seed = seed;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let prov = Provenance {
        config_sha256: cfg.hash(),
        seed,
    };
    formats::write_report(&out_dir.join("config.toml"), &cfg.to_toml())?;
    let report = match figure {
        DemoFigure::Fig2b => spectra_demo(&cfg, out_dir, &prov)?,
        DemoFigure::Fig3c | DemoFigure::Fig3d | DemoFigure::Fig3e | DemoFigure::Fig3f => {
            map_demo(figure, &cfg, out_dir, &prov)?
        }
        DemoFigure::Fig4a | DemoFigure::Fig4b => linescan_demo(figure, &cfg, out_dir, &prov)?,
        DemoFigure::Fig4c => transport_demo(seed, out_dir, &prov)?,
    };
    formats::write_report(&out_dir.join("summary.txt"), &report.summary_text(&prov))?;
    Ok(report)
}

/// Spectra far from the disc at several stage temperatures, fitted with the
/// hyperfine splitting free.
fn spectra_demo(cfg: &ExperimentConfig, out_dir: &Path, prov: &Provenance) -> Result<DemoReport> {
    let mut report = DemoReport::new(DemoFigure::Fig2b);
    let sensor = cfg.sensor();
    let plan = cfg.frequency_plan();
    let grid = cfg.grid();
    let reps = repetitions_per_point(&grid, &sensor.sequence, plan.n_points)?;
    let (laser, mw) = sensor.sequence.average_powers();
    report.add("repetitions_per_point", reps);
    report.add("average_laser_power_w", laser);
    report.add("average_mw_power_w", mw);

    let mut options = cfg.fit_options();
    options.splitting_fixed = false;
    let temperatures = [0.35, 0.6, 0.9, 1.1, 1.4];
    let mut fits_rows = Vec::new();
    for (j, &t) in temperatures.iter().enumerate() {
        let mut scene = cfg.scene();
        scene.temperature = t;
        let center = sensor.resonance_at(&cfg.reference_position(), &scene)?;
        let freqs = plan.frequencies(center, &sensor.spectrum)?;
        let spectrum = synth_spectrum(
            &freqs,
            &sensor.spectrum,
            &sensor.sequence,
            center,
            reps,
            derive_seed(prov.seed, j as u64),
        )?;
        let fit = fit_double_gaussian(&spectrum, &options)?;
        let name = format!("spectrum_T{t:.2}K.csv");
        let text = formats::spectrum_text(
            &spectrum,
            prov,
            &[
                ("stage_temperature_k", t.to_string()),
                ("fit_center_hz", fit.center.to_string()),
                ("fit_contrast", fit.contrast.to_string()),
                ("fit_linewidth_hz", fit.linewidth_fwhm.to_string()),
                ("fit_splitting_hz", fit.hyperfine_splitting.to_string()),
            ],
        );
        formats::write_report(&out_dir.join(name), &text)?;
        report.add(
            &format!("T{t:.2}K"),
            format!(
                "contrast {:.4} ± {:.4}, linewidth {:.3} MHz, splitting {:.3} ± {:.3} MHz, reduced chi2 {:.2}",
                fit.contrast,
                fit.uncertainties.contrast,
                fit.linewidth_fwhm * 1e-6,
                fit.hyperfine_splitting * 1e-6,
                fit.uncertainties.hyperfine_splitting.unwrap_or(f64::NAN) * 1e-6,
                fit.reduced_chi_square()
            ),
        );
        fits_rows.push((format!("T{t:.2}K"), Some(fit.clone())));
        report.spectrum_fits.push((t, fit));
    }
    formats::write_report(&out_dir.join("fits.csv"), &formats::fits_text(&fits_rows, prov))?;
    Ok(report)
}

fn map_demo(figure: DemoFigure, cfg: &ExperimentConfig, out_dir: &Path, prov: &Provenance) -> Result<DemoReport> {
    let mut report = DemoReport::new(figure);
    let scene = cfg.scene();
    let sensor = cfg.sensor();
    let grid = cfg.grid();
    let data = run_scan(
        &scene,
        &sensor,
        &grid,
        &cfg.frequency_plan(),
        cfg.reference_position(),
        prov.seed,
    )?;
    let map = reconstruct_field_map(&data, &cfg.fit_options(), sensor.spectrum.shift_sign)?;
    formats::write_field_map(&out_dir.join("fieldmap.csv"), &map, prov)?;

    let values: Vec<f64> = map.delta_b.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    formats::write_pgm(&out_dir.join("fieldmap.pgm"), &map, lo, hi, prov)?;

    let noise = pooled_noise(&[&values]).unwrap_or(f64::NAN);
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // the reference fit's own noise offsets the whole map, so uniformity is
    // judged about the map mean
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let max_dev = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    let blobs = count_vortices(&map, cfg.analysis.vortex_threshold_t);
    let mut blob_text = format!(
        "# nvscan vortices\n# config_sha256: {}\n# seed: {}\n# threshold_t: {}\nblob_id,x_m,y_m,peak_t,pixels\n",
        prov.config_sha256, prov.seed, cfg.analysis.vortex_threshold_t
    );
    for (i, b) in blobs.iter().enumerate() {
        blob_text.push_str(&format!(
            "{i},{},{},{},{}\n",
            b.centroid[0], b.centroid[1], b.peak, b.pixels
        ));
    }
    formats::write_report(&out_dir.join("vortices.csv"), &blob_text)?;

    report.add("temperature_k", scene.temperature);
    report.add("bias_bz_t", scene.bias_bz);
    report.add("normal_state", scene.is_normal_state());
    report.add("pixel_size_m", grid.pixel_size);
    report.add("dwell_time_s", grid.dwell_time);
    report.add("configured_vortices", scene.vortices.len());
    report.add("masked_pixels", grid.len() - map.unmasked_count());
    report.add("max_abs_delta_b_t", max_abs);
    report.add("map_mean_t", mean);
    report.add("max_abs_deviation_from_mean_t", max_dev);
    report.add("map_std_t", noise);
    report.add("vortex_threshold_t", cfg.analysis.vortex_threshold_t);
    report.add("vortex_count", blobs.len());
    if scene.is_normal_state() {
        let region: Vec<usize> = (0..grid.len()).collect();
        let eta = estimate_sensitivity(&map, &region)?;
        report.add("sensitivity_t_per_sqrt_hz", eta);
        report.add("uniform_within_5_sigma", max_dev < 5.0 * noise);
    }
    report.map_noise = Some(noise);
    report.map_max_deviation = Some(max_dev);
    report.field_map = Some(map);
    report.blobs = Some(blobs);
    Ok(report)
}

fn linescan_demo(figure: DemoFigure, cfg: &ExperimentConfig, out_dir: &Path, prov: &Provenance) -> Result<DemoReport> {
    let mut report = DemoReport::new(figure);
    let plan = cfg.linescan_plan().expect("line-scan demos configure [linescan]");
    let series = run_line_scans(
        &cfg.scene(),
        &cfg.sensor(),
        &cfg.frequency_plan(),
        &plan,
        cfg.reference_position(),
        &cfg.fit_options(),
        prov.seed,
    )?;
    formats::write_line_scans(&out_dir.join("linescans"), &series, prov)?;
    report.add("noise_floor_t", series.noise_floor);
    report.add(
        "linescan_sensitivity_t_per_sqrt_hz",
        series.noise_floor * plan.dwell_time.sqrt(),
    );
    for d in series.peak_points()? {
        let peaks: Vec<String> = d.points.iter().map(|(t, b)| format!("{t}K:{:.2}uT", b * 1e6)).collect();
        report.add(&format!("peaks_{}", d.label), peaks.join(" "));
    }
    if figure == DemoFigure::Fig4b {
        let fit = fit_critical_temperature(&series)?;
        formats::write_report(&out_dir.join("tc_report.csv"), &formats::tc_report_text(&fit, prov))?;
        report.add("slope_t_per_k", fit.slope);
        report.add("n_parameters", fit.n_parameters);
        for (d, &(_, offset)) in fit.datasets.iter().zip(DEMO_HEATING_OFFSETS.iter()) {
            report.add(
                &format!("tc_{}", d.label),
                format!(
                    "{:.4} ± {:.4} K (sample T_c reached at stage {:.4} K)",
                    d.t_c,
                    d.t_c_err,
                    DEMO_LINESCAN_TC - offset
                ),
            );
        }
        report.tc_fit = Some(fit);
    }
    report.line_scans = Some(series);
    Ok(report)
}

/// Critical current of the transport demo strip at temperature `t`.
pub fn strip_critical_current(t: f64) -> Option<f64> {
    (t < STRIP_TC).then(|| STRIP_IC0 * (1.0 - (t / STRIP_TC).powi(2)).powf(1.5))
}

/// Synthetic dU/dI sweep from 0 to 3 mA in 10 µA steps: contact resistance
/// plus the normal resistance above I_c, with 5 mΩ Gaussian noise.
pub fn synth_transport_trace(t: f64, seed: u64) -> TransportTrace {
    let n = 301;
    let step = 10e-6;
    let ic = strip_critical_current(t);
    let mut rng = rng_for(seed, 0);
    let noise = Normal::new(0.0, 5e-3).expect("valid normal");
    let current: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let du_di = current
        .iter()
        .map(|&i| {
            let r = match ic {
                Some(ic) if i < ic => 0.0,
                _ => STRIP_RN,
            };
            CONTACT_RESISTANCE + r + noise.sample(&mut rng)
        })
        .collect();
    TransportTrace {
        current,
        du_di,
        contact_resistance: CONTACT_RESISTANCE,
    }
}

fn transport_demo(seed: u64, out_dir: &Path, prov: &Provenance) -> Result<DemoReport> {
    let mut report = DemoReport::new(DemoFigure::Fig4c);
    let temperatures = [1.07, 1.12, 1.17, 1.22, 1.27];
    let results = temperatures
        .par_iter()
        .enumerate()
        .map(|(j, &t)| {
            let trace = synth_transport_trace(t, derive_seed(seed, j as u64));
            let result = detect_critical_current(&trace, DEFAULT_JUMP_SIGNIFICANCE)?;
            Ok((t, trace, result))
        })
        .collect::<Result<Vec<_>>>()?;
    for (t, trace, result) in results {
        let stem = format!("transport_T{t:.2}K");
        formats::write_report(
            &out_dir.join(format!("{stem}.csv")),
            &formats::transport_text(&trace, prov),
        )?;
        formats::write_report(
            &out_dir.join(format!("{stem}_report.csv")),
            &formats::transport_report_text(&trace, &result, prov),
        )?;
        let truth = strip_critical_current(t);
        let found = result.transition.map(|tr| tr.critical_current);
        report.add(
            &format!("T{t:.2}K"),
            format!(
                "true I_c {}, detected I_c {}",
                truth.map_or("none".into(), |v| format!("{:.4} mA", v * 1e3)),
                found.map_or("none".into(), |v| format!("{:.4} mA", v * 1e3)),
            ),
        );
        report.critical_currents.push((t, truth, found));
    }
    Ok(report)
}
