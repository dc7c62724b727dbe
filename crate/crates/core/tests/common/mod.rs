#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};
use nvscan_core::field::{
    pearl_vortex_field, DiscGeometry, FluxSign, MaterialParams, Vortex, VortexConfiguration, VortexKernel,
};
use nvscan_core::scan::{ScanGrid, SensorModel};
use nvscan_core::sensor::{NvOrientation, PulseSequence, ShiftSign, SpectrumModelParams};

pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;
pub const GAMMA: f64 = 28e9;

pub fn sequence() -> PulseSequence {
    PulseSequence {
        t_pi: 500e-9,
        t_laser: 1.5e-6,
        t_set: 1.5e-6,
        t_int: 1e-6,
        p_laser_peak: 50e-6 * 7.0 / 3.0,
        p_mw_peak: 70e-6 * 7.0,
    }
}

pub fn spectrum_params() -> SpectrumModelParams {
    SpectrumModelParams {
        f_ref: 2.87e9,
        hyperfine_splitting: 3.05e6,
        contrast: 0.073,
        linewidth_fwhm: 1e6,
        count_rate: 2e5,
        shift_sign: ShiftSign::Negative,
    }
}

pub fn sensor() -> SensorModel {
    SensorModel {
        orientation: NvOrientation::default(),
        sequence: sequence(),
        spectrum: spectrum_params(),
    }
}

pub fn scene(temperature: f64, vortices: &[(f64, f64)]) -> VortexConfiguration {
    VortexConfiguration {
        geometry: DiscGeometry {
            center: [0.0, 0.0],
            radius: 2.5e-6,
            thickness: 50e-9,
        },
        material: MaterialParams {
            t_c: 1.25,
            lambda0: 0.5e-6,
            edge_slope: 30e-6,
        },
        temperature,
        bias_bz: 0.4e-3,
        b_c2: 4e-3,
        vortices: vortices
            .iter()
            .map(|&(x, y)| Vortex {
                x,
                y,
                sign: FluxSign::Positive,
            })
            .collect(),
        kernel: VortexKernel::Pearl,
    }
}

pub fn grid(n: usize, pixel: f64, dwell: f64) -> ScanGrid {
    let half = 0.5 * pixel * (n - 1) as f64;
    ScanGrid {
        origin: [-half, -half],
        pixel_size: pixel,
        n_x: n,
        n_y: n,
        standoff: 110e-9,
        dwell_time: dwell,
    }
}

pub fn far_reference() -> Vector3<f64> {
    Vector3::new(250e-6, 0.0, 110e-9)
}

/// Expected counts of the double-Gaussian dip model, written out here
/// independently of the library.
pub fn model(f: f64, p: &[f64; 4], splitting: f64) -> f64 {
    let [baseline, center, contrast, fwhm] = *p;
    let g = |mu: f64| (-4.0 * std::f64::consts::LN_2 * (f - mu).powi(2) / (fwhm * fwhm)).exp();
    baseline * (1.0 - contrast * (g(center - 0.5 * splitting) + g(center + 0.5 * splitting)))
}

/// Cramér–Rao bound on the center (Hz) for Poisson counts, from the full
/// 4-parameter Fisher matrix built with central differences.
pub fn center_crlb(freqs: &[f64], p: [f64; 4], splitting: f64) -> f64 {
    let steps = [p[0] * 1e-6, p[3] * 1e-6, 1e-6, p[3] * 1e-6];
    let mut fisher = DMatrix::<f64>::zeros(4, 4);
    for &f in freqs {
        let lambda = model(f, &p, splitting);
        let grad: Vec<f64> = (0..4)
            .map(|k| {
                let mut hi = p;
                let mut lo = p;
                hi[k] += steps[k];
                lo[k] -= steps[k];
                (model(f, &hi, splitting) - model(f, &lo, splitting)) / (2.0 * steps[k])
            })
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                fisher[(a, b)] += grad[a] * grad[b] / lambda;
            }
        }
    }
    let cov = fisher.try_inverse().expect("Fisher matrix invertible");
    cov[(1, 1)].sqrt()
}

/// Flux of a single Pearl vortex through a disc of radius `r_max`, by
/// composite Simpson in ln ρ (ρ from 1e-4·z upwards) plus the analytic core.
pub fn pearl_flux(z: f64, pearl_length: f64, r_max: f64, n: usize) -> f64 {
    let r0 = 1e-4 * z;
    let (a, b) = (r0.ln(), r_max.ln());
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let integrand = |u: f64| {
        let rho = u.exp();
        let (_, bz) = pearl_vortex_field(rho, z, pearl_length).unwrap();
        2.0 * std::f64::consts::PI * rho * rho * bz
    };
    let mut s = integrand(a) + integrand(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * integrand(a + i as f64 * h);
    }
    let (_, bz0) = pearl_vortex_field(0.0, z, pearl_length).unwrap();
    s * h / 3.0 + bz0 * std::f64::consts::PI * r0 * r0
}
