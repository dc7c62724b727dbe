//! Stray field above a thin superconducting disc: Pearl vortices, an
//! edge-localised Meissner screening response and the uniform bias.
//!
//! Coordinates are SI; the film lies in the plane z = 0 and every evaluation
//! point must sit above it.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bessel_weighted_integral, Tolerance};
use crate::special::BesselOrder;

/// Magnetic flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Height of the film plane (m).
pub const FILM_PLANE_Z: f64 = 0.0;

/// Relative tolerance for the Hankel integrals.
pub const PEARL_REL_TOL: f64 = 1e-6;

// k_max = K_MAX_DECAYS / z, so the neglected tail is below e^{-40}
const K_MAX_DECAYS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscGeometry {
    pub center: [f64; 2],
    pub radius: f64,
    pub thickness: f64,
}

impl DiscGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("disc.radius", "must be positive"));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::invalid("disc.thickness", "must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).hypot(y - self.center[1]) <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Critical temperature (K).
    pub t_c: f64,
    /// Zero-temperature penetration depth (m).
    pub lambda0: f64,
    /// Peak Meissner edge field per kelvin below t_c (T/K), signed.
    pub edge_slope: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0 && self.t_c.is_finite()) {
            return Err(Error::invalid("material.t_c", "must be positive"));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::invalid("material.lambda0", "must be positive"));
        }
        if !self.edge_slope.is_finite() {
            return Err(Error::invalid("material.edge_slope", "must be finite"));
        }
        Ok(())
    }

    /// Two-fluid penetration depth λ(T) = λ0/√(1 − (T/t_c)⁴); infinite at and
    /// above t_c.
    pub fn penetration_depth(&self, temperature: f64) -> f64 {
        let r = 1.0 - (temperature / self.t_c).powi(4);
        if r <= 0.0 {
            f64::INFINITY
        } else {
            self.lambda0 / r.sqrt()
        }
    }

    /// Pearl length Λ(T) = 2λ(T)²/d.
    pub fn pearl_length(&self, temperature: f64, thickness: f64) -> f64 {
        let lambda = self.penetration_depth(temperature);
        2.0 * lambda * lambda / thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxSign {
    Positive,
    Negative,
}

impl FluxSign {
    pub fn value(self) -> f64 {
        match self {
            FluxSign::Positive => 1.0,
            FluxSign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub sign: FluxSign,
}

/// Which single-vortex field to superpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VortexKernel {
    /// Exact Hankel integral of the Pearl kernel.
    #[default]
    Pearl,
    /// Monopole of one flux quantum at depth Λ below the film.
    Monopole,
}

/// The magnetic scene: disc, material, temperature, bias and vortices.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfiguration {
    pub geometry: DiscGeometry,
    pub material: MaterialParams,
    /// Sample temperature (K).
    pub temperature: f64,
    /// Uniform out-of-plane bias (T).
    pub bias_bz: f64,
    /// Upper critical field (T); |bias| above it suppresses superconductivity.
    pub b_c2: f64,
    pub vortices: Vec<Vortex>,
    pub kernel: VortexKernel,
}

impl VortexConfiguration {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.material.validate()?;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("scene.temperature", "must be positive"));
        }
        if !self.bias_bz.is_finite() {
            return Err(Error::invalid("scene.bias_bz", "must be finite"));
        }
        if !(self.b_c2 > 0.0) {
            return Err(Error::invalid("scene.b_c2", "must be positive"));
        }
        for (i, v) in self.vortices.iter().enumerate() {
            if !self.geometry.contains(v.x, v.y) {
                return Err(Error::invalid(
                    format!("scene.vortices[{i}]"),
                    "position lies outside the disc",
                ));
            }
        }
        Ok(())
    }

    /// True when superconductivity is suppressed, either thermally or by the
    /// bias exceeding the upper critical field.
    pub fn is_normal_state(&self) -> bool {
        self.temperature >= self.material.t_c || self.bias_bz.abs() > self.b_c2
    }

    pub fn pearl_length(&self) -> f64 {
        self.material.pearl_length(self.temperature, self.geometry.thickness)
    }

    fn bias(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.bias_bz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub position: Vector3<f64>,
    pub b: Vector3<f64>,
}

/// Field (b_ρ, b_z) of a single Pearl vortex carrying +Φ0, at in-plane
/// distance `rho` and height `z` above the film.
///
/// b_z = (Φ0/2π) ∫ k e^{-kz} J0(kρ)/(1 + kΛ) dk, b_ρ likewise with J1.
pub fn pearl_vortex_field(rho: f64, z: f64, pearl_length: f64) -> Result<(f64, f64)> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("z", "evaluation height must be positive"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "radial distance must be non-negative"));
    }
    if !(pearl_length >= 0.0) {
        return Err(Error::invalid("pearl_length", "must be non-negative"));
    }
    if pearl_length.is_infinite() {
        return Ok((0.0, 0.0));
    }

    let k_max = K_MAX_DECAYS / z;
    let kernel = |k: f64| k * (-k * z).exp() / (1.0 + k * pearl_length);
    // ∫_{k_max}^∞ k e^{-kz} dk bounds the tail since |J_n| ≤ 1
    let tail = (-k_max * z).exp() * (k_max / z + 1.0 / (z * z));
    let tol = Tolerance::relative(PEARL_REL_TOL).with_abs(1e-12 / (z * z));

    let prefactor = FLUX_QUANTUM / (2.0 * PI);
    let bz = bessel_weighted_integral(kernel, BesselOrder::Zero, rho, k_max, tail, tol)?;
    let br = bessel_weighted_integral(kernel, BesselOrder::One, rho, k_max, tail, tol)?;
    Ok((prefactor * br.value, prefactor * bz.value))
}

/// Field (b_ρ, b_z) of a monopole carrying +Φ0 placed `depth` below the film.
pub fn monopole_vortex_field(rho: f64, z: f64, depth: f64) -> (f64, f64) {
    let h = z + depth;
    let r2 = rho * rho + h * h;
    let scale = FLUX_QUANTUM / (2.0 * PI) / (r2 * r2.sqrt());
    (scale * rho, scale * h)
}

/// Phenomenological screening response peaked on the disc rim.
///
/// At height w and signed distance d outside the rim the field is
/// A·w²·(d f(ρ) r̂ + w ẑ)/(d² + w²)^{3/2}, with f(ρ) = ρ/√(ρ² + w²) and
/// A = s·(t_c − T). Its magnitude is bounded by the Lorentzian A·w²/(d² + w²),
/// so it peaks on the rim at exactly A and falls off over a distance of order w.
pub fn meissner_edge_field(position: &Vector3<f64>, config: &VortexConfiguration) -> Vector3<f64> {
    let t_c = config.material.t_c;
    if config.temperature >= t_c {
        return Vector3::zeros();
    }
    let amplitude = config.material.edge_slope * (t_c - config.temperature);
    let w = position.z - FILM_PLANE_Z;
    let dx = position.x - config.geometry.center[0];
    let dy = position.y - config.geometry.center[1];
    let rho = dx.hypot(dy);
    let d = rho - config.geometry.radius;
    let r2 = d * d + w * w;
    let scale = amplitude * w * w / (r2 * r2.sqrt());
    let bz = scale * w;
    if rho == 0.0 {
        return Vector3::new(0.0, 0.0, bz);
    }
    let taper = rho / (rho * rho + w * w).sqrt();
    let br = scale * d * taper;
    Vector3::new(br * dx / rho, br * dy / rho, bz)
}

/// Vector field of one vortex at `position` using the configured kernel.
pub fn vortex_field(
    position: &Vector3<f64>,
    vortex: &Vortex,
    kernel: VortexKernel,
    pearl_length: f64,
) -> Result<Vector3<f64>> {
    let dx = position.x - vortex.x;
    let dy = position.y - vortex.y;
    let rho = dx.hypot(dy);
    let z = position.z - FILM_PLANE_Z;
    let (br, bz) = match kernel {
        VortexKernel::Pearl => pearl_vortex_field(rho, z, pearl_length)?,
        VortexKernel::Monopole if pearl_length.is_infinite() => (0.0, 0.0),
        VortexKernel::Monopole => monopole_vortex_field(rho, z, pearl_length),
    };
    let s = vortex.sign.value();
    if rho == 0.0 {
        return Ok(Vector3::new(0.0, 0.0, s * bz));
    }
    Ok(Vector3::new(s * br * dx / rho, s * br * dy / rho, s * bz))
}

/// Bias plus vortex and edge-screening contributions; exactly the bias in the
/// normal state.
pub fn total_field(position: &Vector3<f64>, config: &VortexConfiguration) -> Result<FieldSample> {
    if !(position.z > FILM_PLANE_Z) {
        return Err(Error::invalid("position.z", "must lie above the film plane"));
    }
    let mut b = config.bias();
    if !config.is_normal_state() {
        let pearl_length = config.pearl_length();
        for v in &config.vortices {
            b += vortex_field(position, v, config.kernel, pearl_length)?;
        }
        b += meissner_edge_field(position, config);
    }
    Ok(FieldSample { position: *position, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: f64 = 110e-9;

    fn scene() -> VortexConfiguration {
        VortexConfiguration {
            geometry: DiscGeometry {
                center: [0.0, 0.0],
                radius: 2.5e-6,
                thickness: 50e-9,
            },
            material: MaterialParams {
                t_c: 1.25,
                lambda0: 0.5e-6,
                edge_slope: 200e-6,
            },
            temperature: 0.35,
            bias_bz: 1e-3,
            b_c2: 4e-3,
            vortices: vec![],
            kernel: VortexKernel::Pearl,
        }
    }

    #[test]
    fn monopole_limit_on_axis() {
        let (br, bz) = pearl_vortex_field(0.0, Z, 0.0).unwrap();
        let exact = FLUX_QUANTUM / (2.0 * PI * Z * Z);
        assert_eq!(br, 0.0);
        assert!((bz - exact).abs() < 1e-4 * exact);
        assert!((exact - 27.2e-3).abs() < 0.05e-3);
        let (_, mz) = monopole_vortex_field(0.0, Z, 0.0);
        assert!((mz - exact).abs() < 1e-15 * exact);
    }

    #[test]
    fn pearl_field_matches_high_precision_values() {
        // mpmath quadosc, 30 digits
        let cases = [
            (0.0, 1.5e-6, 0.0, 1.662_858_154_617_715_3e-3),
            (50e-9, 1.5e-6, 3.671_083_019_613_416e-4, 1.490_656_912_190_157e-3),
            (300e-9, 1.5e-6, 4.049_495_590_823_106e-4, 4.425_014_874_780_589e-4),
            (2e-6, 1.5e-6, 4.893_564_279_105_355e-5, 2.189_307_834_263_516e-5),
            (50e-9, 10e-6, 5.831_758_784_161_205e-5, 2.594_042_343_648_804e-4),
            (300e-9, 10e-6, 6.981_417_024_334_24e-5, 9.203_434_424_194_405e-5),
            (2e-6, 10e-6, 1.318_096_742_617_755e-5, 1.029_916_113_472_645e-5),
        ];
        for (rho, lambda, br_ref, bz_ref) in cases {
            let (br, bz) = pearl_vortex_field(rho, Z, lambda).unwrap();
            assert!(
                (bz - bz_ref).abs() < 2e-6 * bz_ref,
                "bz rho={rho} L={lambda}: {bz} vs {bz_ref}"
            );
            if br_ref > 0.0 {
                assert!(
                    (br - br_ref).abs() < 2e-6 * br_ref,
                    "br rho={rho} L={lambda}: {br} vs {br_ref}"
                );
            }
        }
    }

    // Exact alternative route: 1/(1+kΛ) = ∫_0^∞ e^{-s(1+kΛ)} ds turns the
    // Pearl vortex into an e^{-s}-weighted stack of monopoles at depth sΛ.
    fn monopole_stack(rho: f64, z: f64, lambda: f64) -> (f64, f64) {
        let integrand = |comp: usize| {
            move |u: f64| {
                // s = u/(1-u) maps [0,1) onto [0,∞)
                let s = u / (1.0 - u);
                let jac = 1.0 / ((1.0 - u) * (1.0 - u));
                let (br, bz) = monopole_vortex_field(rho, z, s * lambda);
                (-s).exp() * jac * if comp == 0 { br } else { bz }
            }
        };
        let tol = Tolerance::relative(1e-10).with_abs(1e-20);
        let br = crate::quadrature::integrate(integrand(0), 0.0, 1.0, tol).unwrap().value;
        let bz = crate::quadrature::integrate(integrand(1), 0.0, 1.0, tol).unwrap().value;
        (br, bz)
    }

    #[test]
    fn hankel_route_agrees_with_monopole_stack() {
        for &lambda in &[0.2e-6, 1.5e-6, 10e-6] {
            for &rho in &[0.0, 80e-9, 400e-9, 1.3e-6, 6e-6] {
                let (br, bz) = pearl_vortex_field(rho, Z, lambda).unwrap();
                let (sr, sz) = monopole_stack(rho, Z, lambda);
                assert!((bz - sz).abs() < 3e-6 * sz, "bz rho={rho} L={lambda}");
                assert!((br - sr).abs() < 3e-6 * sr.abs() + 1e-15, "br rho={rho} L={lambda}");
            }
        }
    }

    #[test]
    fn infinite_pearl_length_gives_no_field() {
        assert_eq!(pearl_vortex_field(1e-7, Z, f64::INFINITY).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rejects_points_on_or_below_the_film() {
        assert!(matches!(pearl_vortex_field(0.0, 0.0, 1e-6), Err(Error::Invalid { .. })));
        assert!(matches!(pearl_vortex_field(-1.0, Z, 1e-6), Err(Error::Invalid { .. })));
        let p = Vector3::new(0.0, 0.0, -1e-9);
        assert!(total_field(&p, &scene()).is_err());
    }

    #[test]
    fn monopole_decays_beyond_peak() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let rho = i as f64 * 50e-9;
            let (_, bz) = monopole_vortex_field(rho, Z, 1e-6);
            assert!(bz <= prev && bz > 0.0);
            prev = bz;
        }
    }

    #[test]
    fn pearl_length_diverges_at_t_c() {
        let m = scene().material;
        let d = 50e-9;
        assert!((m.pearl_length(0.0, d) - 2.0 * 0.25e-12 / d).abs() < 1e-18);
        assert!(m.pearl_length(1.2499, d) > 100.0 * m.pearl_length(0.35, d));
        assert!(m.pearl_length(1.25, d).is_infinite());
        let mut prev = 0.0;
        for i in 0..125 {
            let l = m.pearl_length(i as f64 * 0.01, d);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn meissner_edge_field_vanishes_at_t_c() {
        let mut c = scene();
        c.temperature = c.material.t_c;
        for i in 0..50 {
            let p = Vector3::new(i as f64 * 1e-7, 0.0, Z);
            assert_eq!(meissner_edge_field(&p, &c), Vector3::zeros());
        }
    }

    fn peak_along_x(c: &VortexConfiguration) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for i in 0..=4000 {
            let x = i as f64 * 1e-9;
            let m = meissner_edge_field(&Vector3::new(x, 0.0, Z), c).norm();
            if m > best.0 {
                best = (m, x);
            }
        }
        best
    }

    #[test]
    fn meissner_peak_is_linear_in_temperature() {
        let mut c = scene();
        c.temperature = c.material.t_c - 0.5;
        let (peak, at) = peak_along_x(&c);
        assert!((peak - 100e-6).abs() < 1e-15);
        assert!((at - c.geometry.radius).abs() < 1.5e-9);

        c.temperature = 0.4;
        let (p1, _) = peak_along_x(&c);
        c.temperature = 0.9;
        let (p2, _) = peak_along_x(&c);
        assert!((p1 / p2 - (1.25 - 0.4) / (1.25 - 0.9)).abs() < 1e-12);

        // decays both inwards and outwards on the standoff scale
        c.temperature = 0.35;
        let edge = meissner_edge_field(&Vector3::new(2.5e-6, 0.0, Z), &c).norm();
        let inside = meissner_edge_field(&Vector3::new(2.5e-6 - 5.0 * Z, 0.0, Z), &c).norm();
        let outside = meissner_edge_field(&Vector3::new(2.5e-6 + 5.0 * Z, 0.0, Z), &c).norm();
        assert!(inside < 0.25 * edge && outside < 0.25 * edge);
    }

    #[test]
    fn normal_state_returns_bias_bit_exactly() {
        let mut c = scene();
        c.vortices = vec![Vortex {
            x: 0.0,
            y: 0.0,
            sign: FluxSign::Positive,
        }];
        c.temperature = 3.0;
        let p = Vector3::new(1e-7, 2e-7, Z);
        assert_eq!(total_field(&p, &c).unwrap().b, Vector3::new(0.0, 0.0, 1e-3));

        let mut c = scene();
        c.vortices = vec![Vortex {
            x: 0.0,
            y: 0.0,
            sign: FluxSign::Positive,
        }];
        c.temperature = 0.69;
        c.bias_bz = 6e-3;
        assert_eq!(total_field(&p, &c).unwrap().b, Vector3::new(0.0, 0.0, 6e-3));
    }

    #[test]
    fn far_from_disc_field_returns_to_bias() {
        let c = scene();
        let p = Vector3::new(200e-6, 0.0, Z);
        let b = total_field(&p, &c).unwrap().b;
        assert!((b - Vector3::new(0.0, 0.0, 1e-3)).norm() < 1e-9);
    }

    #[test]
    fn validation_rejects_vortex_outside_disc() {
        let mut c = scene();
        c.vortices = vec![Vortex {
            x: 3e-6,
            y: 0.0,
            sign: FluxSign::Positive,
        }];
        assert!(matches!(c.validate(), Err(Error::Invalid { .. })));
    }

    #[test]
    fn flux_sign_flips_field() {
        let p = Vector3::new(1e-7, -5e-8, Z);
        let up = Vortex {
            x: 0.0,
            y: 0.0,
            sign: FluxSign::Positive,
        };
        let down = Vortex {
            sign: FluxSign::Negative,
            ..up
        };
        let a = vortex_field(&p, &up, VortexKernel::Pearl, 1e-6).unwrap();
        let b = vortex_field(&p, &down, VortexKernel::Pearl, 1e-6).unwrap();
        assert_eq!(a, -b);
    }
}
