//! NV sensor: projection onto the NV axis, the linear Zeeman map to a
//! resonance frequency, and pulsed-ODMR photon-count synthesis.

use std::f64::consts::LN_2;

use nalgebra::Vector3;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// NV gyromagnetic ratio γ/2π (Hz/T).
pub const GYROMAGNETIC_RATIO: f64 = 28e9;

/// Largest |B·n̂| for which the linear Zeeman map is trusted (T).
pub const MAX_LINEAR_FIELD: f64 = 10e-3;

/// Zero-field splitting of the NV ground state (Hz).
pub const ZERO_FIELD_SPLITTING: f64 = 2.87e9;

/// ¹⁵N hyperfine splitting used when none is configured (Hz).
pub const DEFAULT_HYPERFINE_SPLITTING: f64 = 3.05e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NvOrientation {
    /// Angle from the out-of-plane direction (rad).
    pub polar_angle: f64,
    /// In-plane angle from +x (rad).
    pub azimuth: f64,
}

impl Default for NvOrientation {
    fn default() -> Self {
        NvOrientation {
            polar_angle: 55f64.to_radians(),
            azimuth: 0.0,
        }
    }
}

impl NvOrientation {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.polar_angle) {
            return Err(Error::invalid("orientation.polar_angle", "must lie in [0, π/2]"));
        }
        if !self.azimuth.is_finite() {
            return Err(Error::invalid("orientation.azimuth", "must be finite"));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vector3<f64> {
        let (st, ct) = self.polar_angle.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}

/// Pulsed-ODMR timing (s) and peak powers (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence {
    pub t_pi: f64,
    pub t_laser: f64,
    pub t_set: f64,
    pub t_int: f64,
    pub p_laser_peak: f64,
    pub p_mw_peak: f64,
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pulse.t_pi", self.t_pi),
            ("pulse.t_laser", self.t_laser),
            ("pulse.t_set", self.t_set),
            ("pulse.t_int", self.t_int),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "duration must be positive"));
            }
        }
        if self.t_int > self.t_laser {
            return Err(Error::invalid(
                "pulse.t_int",
                "integration window exceeds the laser pulse",
            ));
        }
        for (name, v) in [
            ("pulse.p_laser_peak", self.p_laser_peak),
            ("pulse.p_mw_peak", self.p_mw_peak),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "power must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn cycle_time(&self) -> f64 {
        self.t_pi + self.t_laser + self.t_set
    }

    /// Time-averaged (laser, microwave) powers over one cycle.
    pub fn average_powers(&self) -> (f64, f64) {
        let cycle = self.cycle_time();
        (
            self.p_laser_peak * self.t_laser / cycle,
            self.p_mw_peak * self.t_pi / cycle,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftSign {
    Positive,
    /// Tracks the m_s = 0 → −1 transition, which moves down with field.
    #[default]
    Negative,
}

impl ShiftSign {
    pub fn value(self) -> f64 {
        match self {
            ShiftSign::Positive => 1.0,
            ShiftSign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumModelParams {
    /// Zero-field resonance of the tracked transition (Hz).
    pub f_ref: f64,
    pub hyperfine_splitting: f64,
    /// Per-line dip depth C.
    pub contrast: f64,
    pub linewidth_fwhm: f64,
    /// Photons per second during the integration window, off resonance.
    pub count_rate: f64,
    pub shift_sign: ShiftSign,
}

impl SpectrumModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_ref > 0.0 && self.f_ref.is_finite()) {
            return Err(Error::invalid("spectrum.f_ref", "must be positive"));
        }
        if !(self.hyperfine_splitting >= 0.0 && self.hyperfine_splitting.is_finite()) {
            return Err(Error::invalid("spectrum.hyperfine_splitting", "must be non-negative"));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::invalid("spectrum.contrast", "must lie in (0, 1)"));
        }
        if !(self.linewidth_fwhm > 0.0 && self.linewidth_fwhm.is_finite()) {
            return Err(Error::invalid("spectrum.linewidth_fwhm", "must be positive"));
        }
        if !(self.count_rate > 0.0 && self.count_rate.is_finite()) {
            return Err(Error::invalid("spectrum.count_rate", "must be positive"));
        }
        Ok(())
    }
}

/// A pulsed-ODMR spectrum: photon counts summed over `repetitions_per_point`
/// sequence cycles at each microwave frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum {
    pub frequencies: Vec<f64>,
    pub counts: Vec<u64>,
    pub repetitions_per_point: u64,
    pub sequence: PulseSequence,
}

impl OdmrSpectrum {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.counts.len() {
            return Err(Error::invalid(
                "spectrum",
                "frequency and count columns differ in length",
            ));
        }
        if self.frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spectrum.frequencies", "must be strictly increasing"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

pub fn project_field(b: &Vector3<f64>, orientation: &NvOrientation) -> f64 {
    b.dot(&orientation.axis())
}

pub fn resonance_frequency(b_nv: f64, params: &SpectrumModelParams) -> Result<f64> {
    if !(b_nv.abs() < MAX_LINEAR_FIELD) {
        return Err(Error::FieldOutOfRange(b_nv));
    }
    Ok(params.f_ref + params.shift_sign.value() * GYROMAGNETIC_RATIO * b_nv)
}

/// Peak-normalised Gaussian with the given full width at half maximum.
pub fn gaussian_line(f: f64, mu: f64, fwhm: f64) -> f64 {
    let d = (f - mu) / fwhm;
    (-4.0 * LN_2 * d * d).exp()
}

/// Expected photons per repetition at microwave frequency `f` for a resonance
/// centred at `center`: two hyperfine dips of equal depth and width.
pub fn expected_pl(f: f64, params: &SpectrumModelParams, t_int: f64, center: f64) -> f64 {
    let half = 0.5 * params.hyperfine_splitting;
    let w = params.linewidth_fwhm;
    let dips = gaussian_line(f, center - half, w) + gaussian_line(f, center + half, w);
    params.count_rate * t_int * (1.0 - params.contrast * dips)
}

/// Poisson-sampled spectrum; deterministic for a given `seed`.
pub fn synth_spectrum(
    freqs: &[f64],
    params: &SpectrumModelParams,
    sequence: &PulseSequence,
    center: f64,
    repetitions: u64,
    seed: u64,
) -> Result<OdmrSpectrum> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions", "must be positive"));
    }
    let mut rng = rng_for(seed, 0);
    let counts = freqs
        .iter()
        .map(|&f| {
            let mean = repetitions as f64 * expected_pl(f, params, sequence.t_int, center);
            if mean > 0.0 {
                let poisson = Poisson::new(mean).map_err(|e| Error::invalid("expected counts", e.to_string()))?;
                Ok(poisson.sample(&mut rng) as u64)
            } else {
                Ok(0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let spectrum = OdmrSpectrum {
        frequencies: freqs.to_vec(),
        counts,
        repetitions_per_point: repetitions,
        sequence: *sequence,
    };
    spectrum.validate()?;
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SpectrumModelParams {
        SpectrumModelParams {
            f_ref: ZERO_FIELD_SPLITTING,
            hyperfine_splitting: DEFAULT_HYPERFINE_SPLITTING,
            contrast: 0.073,
            linewidth_fwhm: 1e6,
            count_rate: 2e5,
            shift_sign: ShiftSign::Positive,
        }
    }

    fn sequence() -> PulseSequence {
        PulseSequence {
            t_pi: 500e-9,
            t_laser: 1.5e-6,
            t_set: 1.5e-6,
            t_int: 1e-6,
            p_laser_peak: 1e-4,
            p_mw_peak: 1e-3,
        }
    }

    #[test]
    fn projection_examples() {
        let o = NvOrientation::default();
        let p = project_field(&Vector3::new(0.0, 0.0, 1e-3), &o);
        assert!((p - 5.736e-4).abs() < 1e-7);
        let n = o.axis();
        assert!((project_field(&(n * 2.5e-4), &o) - 2.5e-4).abs() < 1e-18);
        let perp = Vector3::new(n.z, 0.0, -n.x);
        assert!(project_field(&perp, &o).abs() < 1e-18);
    }

    #[test]
    fn resonance_examples() {
        let p = params();
        assert_eq!(resonance_frequency(0.0, &p).unwrap(), p.f_ref);
        assert!((resonance_frequency(1e-6, &p).unwrap() - p.f_ref - 28e3).abs() < 1e-6);
        assert!((resonance_frequency(140e-6, &p).unwrap() - p.f_ref - 3.92e6).abs() < 1e-6);
        assert!(matches!(resonance_frequency(0.02, &p), Err(Error::FieldOutOfRange(_))));
    }

    #[test]
    fn expected_pl_baseline_and_dip() {
        let p = params();
        let base = p.count_rate * 1e-6;
        let far = expected_pl(2.87e9 + 10.0 * p.linewidth_fwhm + 3.05e6, &p, 1e-6, 2.87e9);
        assert!((far - base).abs() < 1e-6 * base);

        let mut resolved = p;
        resolved.hyperfine_splitting = 50e6;
        let dip = expected_pl(2.87e9 - 25e6, &resolved, 1e-6, 2.87e9);
        assert!((dip - base * (1.0 - p.contrast)).abs() < 1e-9 * base);

        let f = 2.8712e9;
        assert_eq!(expected_pl(f, &p, 2e-6, 2.87e9), 2.0 * expected_pl(f, &p, 1e-6, 2.87e9));
    }

    #[test]
    fn average_powers_examples() {
        let eq = PulseSequence {
            t_pi: 1e-6,
            t_laser: 1e-6,
            t_set: 1e-6,
            t_int: 0.5e-6,
            p_laser_peak: 3e-3,
            p_mw_peak: 3e-3,
        };
        let (l, m) = eq.average_powers();
        assert!((m - 1e-3).abs() < 1e-18 && (l - 1e-3).abs() < 1e-18);

        let s = PulseSequence {
            p_laser_peak: 7.0,
            p_mw_peak: 7.0,
            ..sequence()
        };
        let (l, m) = s.average_powers();
        assert!((m - 1.0).abs() < 1e-12, "mw duty {m}");
        assert!((l - 3.0).abs() < 1e-12, "laser duty {l}");

        let off = PulseSequence {
            p_mw_peak: 0.0,
            ..sequence()
        };
        assert_eq!(off.average_powers().1, 0.0);
    }

    #[test]
    fn sequence_validation() {
        let bad = PulseSequence {
            t_int: 2e-6,
            ..sequence()
        };
        assert!(bad.validate().is_err());
        let bad = PulseSequence {
            t_pi: 0.0,
            ..sequence()
        };
        assert!(bad.validate().is_err());
        assert!(sequence().validate().is_ok());
    }

    #[test]
    fn synthesis_is_deterministic_and_unbiased() {
        let p = params();
        let freqs: Vec<f64> = (0..41).map(|i| 2.863e9 + i as f64 * 350e3).collect();
        let a = synth_spectrum(&freqs, &p, &sequence(), 2.87e9, 50_000, 11).unwrap();
        let b = synth_spectrum(&freqs, &p, &sequence(), 2.87e9, 50_000, 11).unwrap();
        assert_eq!(a, b);
        let c = synth_spectrum(&freqs, &p, &sequence(), 2.87e9, 50_000, 12).unwrap();
        assert_ne!(a.counts, c.counts);

        for (f, &n) in freqs.iter().zip(&a.counts) {
            let mean = 50_000.0 * expected_pl(*f, &p, 1e-6, 2.87e9);
            assert!((n as f64 - mean).abs() < 5.0 * mean.sqrt(), "{n} vs {mean}");
        }
        assert!(matches!(
            synth_spectrum(&freqs, &p, &sequence(), 2.87e9, 0, 1),
            Err(Error::Invalid { .. })
        ));
    }

    #[test]
    fn flat_spectrum_has_poisson_dispersion() {
        let mut p = params();
        p.contrast = 0.0;
        let freqs: Vec<f64> = (0..4000).map(|i| 2.8e9 + i as f64 * 1e4).collect();
        let s = synth_spectrum(&freqs, &p, &sequence(), 2.87e9, 1000, 3).unwrap();
        let n = s.counts.len() as f64;
        let mean = s.counts.iter().sum::<u64>() as f64 / n;
        let var = s.counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // var/mean of a Poisson sample has standard error √(2/n) ≈ 0.022
        assert!((var / mean - 1.0).abs() < 0.1, "dispersion {}", var / mean);
        assert!((mean - 200.0).abs() < 5.0 * (200.0 / n).sqrt());
    }

    proptest! {
        #[test]
        fn expected_pl_is_symmetric_about_center(d in 0.0..2e7f64, c in 0.01..0.49f64, w in 1e5..5e6f64) {
            let p = SpectrumModelParams { contrast: c, linewidth_fwhm: w, ..params() };
            let lo = expected_pl(2.87e9 - d, &p, 1e-6, 2.87e9);
            let hi = expected_pl(2.87e9 + d, &p, 1e-6, 2.87e9);
            prop_assert!((lo - hi).abs() <= 1e-12 * lo);
            prop_assert!(lo >= p.count_rate * 1e-6 * (1.0 - 2.0 * c) - 1e-15);
            prop_assert!(lo > 0.0);
        }

        #[test]
        fn projection_is_linear(a in -5.0..5.0f64,
                                x1 in -1e-3..1e-3f64, y1 in -1e-3..1e-3f64, z1 in -1e-3..1e-3f64,
                                x2 in -1e-3..1e-3f64, y2 in -1e-3..1e-3f64, z2 in -1e-3..1e-3f64,
                                theta in 0.0..std::f64::consts::FRAC_PI_2, phi in 0.0..std::f64::consts::TAU) {
            let o = NvOrientation { polar_angle: theta, azimuth: phi };
            let b1 = Vector3::new(x1, y1, z1);
            let b2 = Vector3::new(x2, y2, z2);
            let lhs = project_field(&(b1 * a + b2), &o);
            let rhs = a * project_field(&b1, &o) + project_field(&b2, &o);
            prop_assert!((lhs - rhs).abs() <= 1e-17 + 1e-14 * lhs.abs());
        }
    }
}
