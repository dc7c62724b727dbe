//! Experiment configuration: a strict TOML schema with SI units encoded in
//! every key name.
//!
//! Unknown keys are rejected with the line they appear on, and range checks
//! report the dotted key path plus its line when the key is present in the
//! source text.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{DiscGeometry, FluxSign, MaterialParams, Vortex, VortexConfiguration, VortexKernel};
use crate::fitting::{FitOptions, Weighting};
use crate::linescan::{LineScanPlan, PowerSetting};
use crate::scan::{default_reference_position, FrequencyPlan, ScanGrid, SensorModel};
use crate::sensor::{
    NvOrientation, PulseSequence, ShiftSign, SpectrumModelParams, DEFAULT_HYPERFINE_SPLITTING, ZERO_FIELD_SPLITTING,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub sensor: SensorConfig,
    pub grid: GridConfig,
    pub frequency_plan: FrequencyPlanConfig,
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linescan: Option<LineScanConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            scene: SceneConfig::default(),
            sensor: SensorConfig::default(),
            grid: GridConfig::default(),
            frequency_plan: FrequencyPlanConfig::default(),
            analysis: AnalysisConfig::default(),
            linescan: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub temperature_k: f64,
    pub bias_bz_t: f64,
    pub b_c2_t: f64,
    pub kernel: VortexKernel,
    pub disc: DiscConfig,
    pub material: MaterialConfig,
    pub vortices: Vec<VortexConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            temperature_k: 0.35,
            bias_bz_t: 0.4e-3,
            b_c2_t: 4e-3,
            kernel: VortexKernel::Pearl,
            disc: DiscConfig::default(),
            material: MaterialConfig::default(),
            vortices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscConfig {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub radius_m: f64,
    pub thickness_m: f64,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig {
            center_x_m: 0.0,
            center_y_m: 0.0,
            radius_m: 2.5e-6,
            thickness_m: 50e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub t_c_k: f64,
    pub lambda0_m: f64,
    pub edge_slope_t_per_k: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            t_c_k: 1.25,
            lambda0_m: 0.5e-6,
            edge_slope_t_per_k: 30e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "positive")]
    pub sign: FluxSign,
}

fn positive() -> FluxSign {
    FluxSign::Positive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub polar_angle_rad: f64,
    pub azimuth_rad: f64,
    pub f_ref_hz: f64,
    pub hyperfine_splitting_hz: f64,
    pub contrast: f64,
    pub linewidth_fwhm_hz: f64,
    pub count_rate_per_s: f64,
    pub shift_sign: ShiftSign,
    pub pulse: PulseConfig,
}

impl Default for SensorConfig {
    fn default() -> Self {
        let o = NvOrientation::default();
        SensorConfig {
            polar_angle_rad: o.polar_angle,
            azimuth_rad: o.azimuth,
            f_ref_hz: ZERO_FIELD_SPLITTING,
            hyperfine_splitting_hz: DEFAULT_HYPERFINE_SPLITTING,
            contrast: 0.073,
            linewidth_fwhm_hz: 1e6,
            count_rate_per_s: 2e5,
            shift_sign: ShiftSign::Negative,
            pulse: PulseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub t_pi_s: f64,
    pub t_laser_s: f64,
    pub t_set_s: f64,
    pub t_int_s: f64,
    pub p_laser_peak_w: f64,
    pub p_mw_peak_w: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        // peak powers giving 50 µW laser and 70 µW microwave time averages
        PulseConfig {
            t_pi_s: 500e-9,
            t_laser_s: 1.5e-6,
            t_set_s: 1.5e-6,
            t_int_s: 1e-6,
            p_laser_peak_w: 50e-6 * 7.0 / 3.0,
            p_mw_peak_w: 70e-6 * 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    pub pixel_size_m: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub standoff_m: f64,
    pub dwell_time_s: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let n = 32;
        let pixel = 170e-9;
        let half = 0.5 * pixel * (n - 1) as f64;
        GridConfig {
            origin_x_m: -half,
            origin_y_m: -half,
            pixel_size_m: pixel,
            n_x: n,
            n_y: n,
            standoff_m: 110e-9,
            dwell_time_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyPlanConfig {
    pub n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_span_hz: Option<f64>,
}

impl Default for FrequencyPlanConfig {
    fn default() -> Self {
        FrequencyPlanConfig {
            n_points: 41,
            half_span_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub splitting_fixed: bool,
    pub weighting: Weighting,
    pub vortex_threshold_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_x_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_y_m: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            splitting_fixed: true,
            weighting: Weighting::Unweighted,
            vortex_threshold_t: 100e-6,
            reference_x_m: None,
            reference_y_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineScanConfig {
    pub start_x_m: f64,
    pub start_y_m: f64,
    pub end_x_m: f64,
    pub end_y_m: f64,
    pub n_points: usize,
    pub stage_temperatures_k: Vec<f64>,
    /// Used only when no scan in the series is signal-less.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor_t: Option<f64>,
    pub settings: Vec<PowerSettingConfig>,
}

impl Default for LineScanConfig {
    fn default() -> Self {
        LineScanConfig {
            start_x_m: 1.5e-6,
            start_y_m: 0.0,
            end_x_m: 3.5e-6,
            end_y_m: 0.0,
            n_points: 41,
            stage_temperatures_k: vec![0.35, 0.5, 0.65, 0.8, 0.95, 1.1, 1.4, 1.6],
            noise_floor_t: None,
            settings: vec![PowerSettingConfig::default()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSettingConfig {
    pub label: String,
    /// Sample temperature minus stage temperature under this setting.
    pub heating_offset_k: f64,
}

impl Default for PowerSettingConfig {
    fn default() -> Self {
        PowerSettingConfig {
            label: "i".into(),
            heating_offset_k: 0.0,
        }
    }
}

// Inline documentation for the generated reference config, keyed by
// (table, key).
const KEY_DOCS: &[(&str, &str, &str)] = &[
    ("", "seed", "base seed for all photon-noise streams"),
    ("scene", "temperature_k", "sample temperature (K)"),
    ("scene", "bias_bz_t", "uniform out-of-plane bias field (T)"),
    (
        "scene",
        "b_c2_t",
        "upper critical field; |bias| above it gives the normal state (T)",
    ),
    (
        "scene",
        "kernel",
        "vortex field kernel: \"pearl\" (exact) or \"monopole\" (depth Λ)",
    ),
    (
        "scene",
        "vortices",
        "list of [[scene.vortices]] tables with x_m, y_m, sign = \"positive\"|\"negative\"",
    ),
    ("scene.disc", "center_x_m", "disc center x (m)"),
    ("scene.disc", "center_y_m", "disc center y (m)"),
    ("scene.disc", "radius_m", "disc radius (m)"),
    ("scene.disc", "thickness_m", "film thickness (m)"),
    ("scene.material", "t_c_k", "critical temperature (K)"),
    (
        "scene.material",
        "lambda0_m",
        "zero-temperature penetration depth λ0 (m); Λ(T) = 2λ(T)²/thickness",
    ),
    (
        "scene.material",
        "edge_slope_t_per_k",
        "edge screening peak per kelvin below t_c (T/K)",
    ),
    (
        "sensor",
        "polar_angle_rad",
        "NV axis angle from the surface normal (rad)",
    ),
    ("sensor", "azimuth_rad", "NV axis in-plane angle from +x (rad)"),
    (
        "sensor",
        "f_ref_hz",
        "zero-field resonance of the tracked transition (Hz)",
    ),
    ("sensor", "hyperfine_splitting_hz", "15N hyperfine splitting A (Hz)"),
    ("sensor", "contrast", "per-line dip depth C"),
    ("sensor", "linewidth_fwhm_hz", "Gaussian line FWHM (Hz)"),
    (
        "sensor",
        "count_rate_per_s",
        "photon rate during the integration window (1/s)",
    ),
    (
        "sensor",
        "shift_sign",
        "\"negative\" tracks m_s = 0 → −1, \"positive\" tracks 0 → +1",
    ),
    ("sensor.pulse", "t_pi_s", "microwave π-pulse duration (s)"),
    ("sensor.pulse", "t_laser_s", "laser pulse duration (s)"),
    ("sensor.pulse", "t_set_s", "settling time (s)"),
    (
        "sensor.pulse",
        "t_int_s",
        "photon integration window, at most t_laser_s (s)",
    ),
    ("sensor.pulse", "p_laser_peak_w", "laser peak power (W)"),
    ("sensor.pulse", "p_mw_peak_w", "microwave peak power (W)"),
    ("grid", "origin_x_m", "x of pixel (0, 0) (m)"),
    ("grid", "origin_y_m", "y of pixel (0, 0) (m)"),
    ("grid", "pixel_size_m", "pixel pitch (m)"),
    ("grid", "n_x", "pixels along x"),
    ("grid", "n_y", "pixels along y"),
    ("grid", "standoff_m", "NV height above the film (m)"),
    ("grid", "dwell_time_s", "acquisition time per pixel (s)"),
    ("frequency_plan", "n_points", "microwave frequencies per spectrum"),
    (
        "frequency_plan",
        "half_span_hz",
        "half sweep width (Hz); omitted means A + 4·FWHM",
    ),
    (
        "analysis",
        "splitting_fixed",
        "hold the hyperfine splitting at its configured value while fitting",
    ),
    (
        "analysis",
        "weighting",
        "\"unweighted\" or \"poisson\" (weights 1/max(counts, 1))",
    ),
    ("analysis", "vortex_threshold_t", "|ΔB| threshold for vortex blobs (T)"),
    (
        "analysis",
        "reference_x_m",
        "reference spectrum x (m); omitted means 100 radii from the disc",
    ),
    ("analysis", "reference_y_m", "reference spectrum y (m)"),
];

impl ExperimentConfig {
    pub fn scene(&self) -> VortexConfiguration {
        let s = &self.scene;
        VortexConfiguration {
            geometry: DiscGeometry {
                center: [s.disc.center_x_m, s.disc.center_y_m],
                radius: s.disc.radius_m,
                thickness: s.disc.thickness_m,
            },
            material: MaterialParams {
                t_c: s.material.t_c_k,
                lambda0: s.material.lambda0_m,
                edge_slope: s.material.edge_slope_t_per_k,
            },
            temperature: s.temperature_k,
            bias_bz: s.bias_bz_t,
            b_c2: s.b_c2_t,
            vortices: s
                .vortices
                .iter()
                .map(|v| Vortex {
                    x: v.x_m,
                    y: v.y_m,
                    sign: v.sign,
                })
                .collect(),
            kernel: s.kernel,
        }
    }

    pub fn sensor(&self) -> SensorModel {
        let s = &self.sensor;
        SensorModel {
            orientation: NvOrientation {
                polar_angle: s.polar_angle_rad,
                azimuth: s.azimuth_rad,
            },
            sequence: PulseSequence {
                t_pi: s.pulse.t_pi_s,
                t_laser: s.pulse.t_laser_s,
                t_set: s.pulse.t_set_s,
                t_int: s.pulse.t_int_s,
                p_laser_peak: s.pulse.p_laser_peak_w,
                p_mw_peak: s.pulse.p_mw_peak_w,
            },
            spectrum: SpectrumModelParams {
                f_ref: s.f_ref_hz,
                hyperfine_splitting: s.hyperfine_splitting_hz,
                contrast: s.contrast,
                linewidth_fwhm: s.linewidth_fwhm_hz,
                count_rate: s.count_rate_per_s,
                shift_sign: s.shift_sign,
            },
        }
    }

    pub fn grid(&self) -> ScanGrid {
        let g = &self.grid;
        ScanGrid {
            origin: [g.origin_x_m, g.origin_y_m],
            pixel_size: g.pixel_size_m,
            n_x: g.n_x,
            n_y: g.n_y,
            standoff: g.standoff_m,
            dwell_time: g.dwell_time_s,
        }
    }

    pub fn frequency_plan(&self) -> FrequencyPlan {
        FrequencyPlan {
            n_points: self.frequency_plan.n_points,
            half_span: self.frequency_plan.half_span_hz,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            hyperfine_splitting: self.sensor.hyperfine_splitting_hz,
            splitting_fixed: self.analysis.splitting_fixed,
            weighting: self.analysis.weighting,
            ..FitOptions::new(self.sensor.hyperfine_splitting_hz)
        }
    }

    /// Line-scan plan, if the config has a `[linescan]` table. Standoff and
    /// dwell time come from the grid.
    pub fn linescan_plan(&self) -> Option<LineScanPlan> {
        let l = self.linescan.as_ref()?;
        Some(LineScanPlan {
            start: [l.start_x_m, l.start_y_m],
            end: [l.end_x_m, l.end_y_m],
            n_points: l.n_points,
            standoff: self.grid.standoff_m,
            dwell_time: self.grid.dwell_time_s,
            stage_temperatures: l.stage_temperatures_k.clone(),
            settings: l
                .settings
                .iter()
                .map(|s| PowerSetting {
                    label: s.label.clone(),
                    heating_offset: s.heating_offset_k,
                })
                .collect(),
            noise_floor: l.noise_floor_t,
        })
    }

    pub fn reference_position(&self) -> Vector3<f64> {
        let default = default_reference_position(&self.scene(), &self.grid());
        Vector3::new(
            self.analysis.reference_x_m.unwrap_or(default.x),
            self.analysis.reference_y_m.unwrap_or(default.y),
            default.z,
        )
    }

    /// Range checks, reported against config key paths.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        fn check(ok: bool, path: &str, reason: &str) -> std::result::Result<(), (String, String)> {
            if ok {
                Ok(())
            } else {
                Err((path.to_string(), reason.to_string()))
            }
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let fin = |v: f64| v.is_finite();
        let s = &self.scene;
        check(pos(s.temperature_k), "scene.temperature_k", "must be positive")?;
        check(fin(s.bias_bz_t), "scene.bias_bz_t", "must be finite")?;
        check(pos(s.b_c2_t), "scene.b_c2_t", "must be positive")?;
        check(fin(s.disc.center_x_m), "scene.disc.center_x_m", "must be finite")?;
        check(fin(s.disc.center_y_m), "scene.disc.center_y_m", "must be finite")?;
        check(pos(s.disc.radius_m), "scene.disc.radius_m", "must be positive")?;
        check(pos(s.disc.thickness_m), "scene.disc.thickness_m", "must be positive")?;
        check(pos(s.material.t_c_k), "scene.material.t_c_k", "must be positive")?;
        check(
            pos(s.material.lambda0_m),
            "scene.material.lambda0_m",
            "must be positive",
        )?;
        check(
            s.material.edge_slope_t_per_k >= 0.0 && fin(s.material.edge_slope_t_per_k),
            "scene.material.edge_slope_t_per_k",
            "must be non-negative",
        )?;
        let scene = self.scene();
        for (i, v) in s.vortices.iter().enumerate() {
            check(
                scene.geometry.contains(v.x_m, v.y_m),
                &format!("scene.vortices[{i}].x_m"),
                "vortex lies outside the disc",
            )?;
        }

        let n = &self.sensor;
        check(
            (0.0..=std::f64::consts::FRAC_PI_2).contains(&n.polar_angle_rad),
            "sensor.polar_angle_rad",
            "must lie in [0, π/2]",
        )?;
        check(fin(n.azimuth_rad), "sensor.azimuth_rad", "must be finite")?;
        check(pos(n.f_ref_hz), "sensor.f_ref_hz", "must be positive")?;
        check(
            n.hyperfine_splitting_hz >= 0.0 && fin(n.hyperfine_splitting_hz),
            "sensor.hyperfine_splitting_hz",
            "must be non-negative",
        )?;
        check(
            n.contrast > 0.0 && n.contrast < 1.0,
            "sensor.contrast",
            "must lie in (0, 1)",
        )?;
        check(pos(n.linewidth_fwhm_hz), "sensor.linewidth_fwhm_hz", "must be positive")?;
        check(pos(n.count_rate_per_s), "sensor.count_rate_per_s", "must be positive")?;
        let p = &n.pulse;
        check(pos(p.t_pi_s), "sensor.pulse.t_pi_s", "must be positive")?;
        check(pos(p.t_laser_s), "sensor.pulse.t_laser_s", "must be positive")?;
        check(pos(p.t_set_s), "sensor.pulse.t_set_s", "must be positive")?;
        check(pos(p.t_int_s), "sensor.pulse.t_int_s", "must be positive")?;
        check(
            p.t_int_s <= p.t_laser_s,
            "sensor.pulse.t_int_s",
            "must not exceed t_laser_s",
        )?;
        check(
            p.p_laser_peak_w >= 0.0 && fin(p.p_laser_peak_w),
            "sensor.pulse.p_laser_peak_w",
            "must be non-negative",
        )?;
        check(
            p.p_mw_peak_w >= 0.0 && fin(p.p_mw_peak_w),
            "sensor.pulse.p_mw_peak_w",
            "must be non-negative",
        )?;

        let g = &self.grid;
        check(fin(g.origin_x_m), "grid.origin_x_m", "must be finite")?;
        check(fin(g.origin_y_m), "grid.origin_y_m", "must be finite")?;
        check(pos(g.pixel_size_m), "grid.pixel_size_m", "must be positive")?;
        check(g.n_x > 0, "grid.n_x", "must be positive")?;
        check(g.n_y > 0, "grid.n_y", "must be positive")?;
        check(pos(g.standoff_m), "grid.standoff_m", "must be positive")?;
        check(pos(g.dwell_time_s), "grid.dwell_time_s", "must be positive")?;

        check(
            self.frequency_plan.n_points >= 8,
            "frequency_plan.n_points",
            "at least 8 points required",
        )?;
        if let Some(h) = self.frequency_plan.half_span_hz {
            check(pos(h), "frequency_plan.half_span_hz", "must be positive")?;
        }
        check(
            self.analysis.vortex_threshold_t >= 0.0 && fin(self.analysis.vortex_threshold_t),
            "analysis.vortex_threshold_t",
            "must be non-negative",
        )?;
        if let Some(x) = self.analysis.reference_x_m {
            check(fin(x), "analysis.reference_x_m", "must be finite")?;
        }
        if let Some(y) = self.analysis.reference_y_m {
            check(fin(y), "analysis.reference_y_m", "must be finite")?;
        }
        if let Some(l) = &self.linescan {
            check(l.n_points >= 5, "linescan.n_points", "at least 5 points required")?;
            check(
                !l.stage_temperatures_k.is_empty() && l.stage_temperatures_k.iter().all(|&t| pos(t)),
                "linescan.stage_temperatures_k",
                "needs positive temperatures",
            )?;
            check(
                !l.settings.is_empty(),
                "linescan.settings",
                "needs at least one power setting",
            )?;
            for (i, s) in l.settings.iter().enumerate() {
                check(
                    fin(s.heating_offset_k),
                    &format!("linescan.settings[{i}].heating_offset_k"),
                    "must be finite",
                )?;
            }
            if let Some(f) = l.noise_floor_t {
                check(f >= 0.0 && fin(f), "linescan.noise_floor_t", "must be non-negative")?;
            }
        }
        Ok(())
    }

    /// Canonical TOML serialization.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which the dotted `path` (e.g. `grid.pixel_size_m` or
/// `scene.vortices[2].x_m`) is assigned, if it appears literally.
pub fn find_key_line(text: &str, path: &str) -> Option<usize> {
    let (table_path, key) = match path.rsplit_once('.') {
        Some((t, k)) => (t.to_string(), k.to_string()),
        None => (String::new(), path.to_string()),
    };
    // split an array index off the table path
    let (table, index) = match table_path.rsplit_once('[') {
        Some((t, rest)) => (t.to_string(), rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (table_path.clone(), None),
    };
    let mut current = String::new();
    let mut occurrence: isize = -1;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            current = h.trim().to_string();
            if current == table {
                occurrence += 1;
            }
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let in_table = current == table && index.is_none_or(|i| occurrence == i as isize);
        if in_table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a config. `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Malformed {
        path: origin.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    config.validate().map_err(|(field, reason)| Error::InvalidConfig {
        line: find_key_line(text, &field),
        field,
        reason,
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Default config with every key documented inline.
pub fn reference_config() -> String {
    let body = toml::to_string(&ExperimentConfig::default()).expect("config serializes");
    let mut out = String::from(
        "# nvscan experiment configuration (SI units; the unit is part of each key name)\n\
         # Optional keys not shown: frequency_plan.half_span_hz, analysis.reference_x_m,\n\
         # analysis.reference_y_m, and a [linescan] table for the linescan command.\n",
    );
    let mut table = String::new();
    for line in body.lines() {
        let trimmed = line.trim();
        if let Some(h) = trimmed.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim_matches(|c| c == '[' || c == ']').to_string();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            if let Some((_, _, doc)) = KEY_DOCS.iter().find(|(t, key, _)| *t == table && *key == k.trim()) {
                out.push_str("# ");
                out.push_str(doc);
                out.push('\n');
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}
