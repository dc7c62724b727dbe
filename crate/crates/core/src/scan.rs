//! Pixel-by-pixel scan simulation, field-map reconstruction, vortex counting
//! and sensitivity estimation.
//!
//! Pixels are stored row-major: index = iy·n_x + ix. Every pixel draws its
//! photon noise from its own derived seed, so synthesis and fitting can run
//! on any number of threads with identical results.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{total_field, VortexConfiguration};
use crate::fitting::{fit_double_gaussian, shift_to_field, FitOptions, FitResult};
use crate::rng::{derive_seed, REFERENCE_STREAM};
use crate::sensor::{
    project_field, resonance_frequency, synth_spectrum, NvOrientation, OdmrSpectrum, PulseSequence, ShiftSign,
    SpectrumModelParams,
};

pub const MIN_SENSITIVITY_PIXELS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    /// Position of pixel (0, 0) (m).
    pub origin: [f64; 2],
    pub pixel_size: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// NV height above the film (m).
    pub standoff: f64,
    /// Acquisition time per pixel (s).
    pub dwell_time: f64,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::invalid("grid.pixel_size", "must be positive"));
        }
        if !(self.dwell_time > 0.0 && self.dwell_time.is_finite()) {
            return Err(Error::invalid("grid.dwell_time", "must be positive"));
        }
        if !(self.standoff > 0.0 && self.standoff.is_finite()) {
            return Err(Error::invalid("grid.standoff", "must be positive"));
        }
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::invalid("grid", "needs at least one pixel"));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("grid.origin", "must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n_x + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.n_x, index / self.n_x)
    }

    pub fn xy(&self, index: usize) -> (f64, f64) {
        let (ix, iy) = self.coords(index);
        (
            self.origin[0] + ix as f64 * self.pixel_size,
            self.origin[1] + iy as f64 * self.pixel_size,
        )
    }

    pub fn position(&self, index: usize) -> Vector3<f64> {
        let (x, y) = self.xy(index);
        Vector3::new(x, y, self.standoff)
    }

    /// Grid covering the `nx × ny` block whose first pixel is (x0, y0).
    pub fn subgrid(&self, x0: usize, y0: usize, nx: usize, ny: usize) -> Result<ScanGrid> {
        if nx == 0 || ny == 0 || x0 + nx > self.n_x || y0 + ny > self.n_y {
            return Err(Error::invalid("subgrid", "block exceeds the grid"));
        }
        Ok(ScanGrid {
            origin: [
                self.origin[0] + x0 as f64 * self.pixel_size,
                self.origin[1] + y0 as f64 * self.pixel_size,
            ],
            n_x: nx,
            n_y: ny,
            ..*self
        })
    }

    fn block_indices(&self, x0: usize, y0: usize, nx: usize, ny: usize) -> Vec<usize> {
        (y0..y0 + ny)
            .flat_map(|iy| (x0..x0 + nx).map(move |ix| self.index(ix, iy)))
            .collect()
    }
}

/// Everything about the probe that shapes a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub orientation: NvOrientation,
    pub sequence: PulseSequence,
    pub spectrum: SpectrumModelParams,
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        self.orientation.validate()?;
        self.sequence.validate()?;
        self.spectrum.validate()
    }

    /// Resonance center seen by the NV at `position`.
    pub fn resonance_at(&self, position: &Vector3<f64>, scene: &VortexConfiguration) -> Result<f64> {
        let sample = total_field(position, scene)?;
        resonance_frequency(project_field(&sample.b, &self.orientation), &self.spectrum)
    }
}

/// Evenly spaced microwave frequencies centred on the reference resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPlan {
    pub n_points: usize,
    /// Half width of the sweep; `None` means A + 4Δν.
    pub half_span: Option<f64>,
}

impl Default for FrequencyPlan {
    fn default() -> Self {
        FrequencyPlan {
            n_points: 41,
            half_span: None,
        }
    }
}

impl FrequencyPlan {
    pub fn half_span_for(&self, params: &SpectrumModelParams) -> f64 {
        self.half_span
            .unwrap_or(params.hyperfine_splitting + 4.0 * params.linewidth_fwhm)
    }

    pub fn frequencies(&self, center: f64, params: &SpectrumModelParams) -> Result<Vec<f64>> {
        if self.n_points < 2 {
            return Err(Error::invalid("frequency_plan.n_points", "needs at least two points"));
        }
        let half = self.half_span_for(params);
        if !(half > 0.0 && half.is_finite()) {
            return Err(Error::invalid("frequency_plan.half_span", "must be positive"));
        }
        let step = 2.0 * half / (self.n_points - 1) as f64;
        Ok((0..self.n_points).map(|i| center - half + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    pub grid: ScanGrid,
    pub spectra: Vec<OdmrSpectrum>,
    pub reference: OdmrSpectrum,
    pub reference_position: Vector3<f64>,
    /// Pixels whose resonance fell outside the frequency sweep.
    pub flagged: Vec<bool>,
}

impl ScanDataset {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.spectra.len() != self.grid.len() || self.flagged.len() != self.grid.len() {
            return Err(Error::invalid("dataset", "spectrum count does not match the grid"));
        }
        Ok(())
    }

    pub fn subgrid(&self, x0: usize, y0: usize, nx: usize, ny: usize) -> Result<ScanDataset> {
        let grid = self.grid.subgrid(x0, y0, nx, ny)?;
        let idx = self.grid.block_indices(x0, y0, nx, ny);
        Ok(ScanDataset {
            grid,
            spectra: idx.iter().map(|&i| self.spectra[i].clone()).collect(),
            reference: self.reference.clone(),
            reference_position: self.reference_position,
            flagged: idx.iter().map(|&i| self.flagged[i]).collect(),
        })
    }
}

/// Repetitions per frequency point that fit in one dwell time.
pub fn repetitions_per_point(grid: &ScanGrid, sequence: &PulseSequence, n_points: usize) -> Result<u64> {
    let reps = (grid.dwell_time / sequence.cycle_time() / n_points as f64).floor();
    if !(reps >= 1.0) {
        return Err(Error::invalid(
            "grid.dwell_time",
            "too short for a single repetition per frequency point",
        ));
    }
    Ok(reps as u64)
}

/// Default far-away reference: one hundred disc radii along +x from the
/// disc center, at the scan height.
pub fn default_reference_position(scene: &VortexConfiguration, grid: &ScanGrid) -> Vector3<f64> {
    let g = &scene.geometry;
    Vector3::new(g.center[0] + 100.0 * g.radius, g.center[1], grid.standoff)
}

pub fn run_scan(
    scene: &VortexConfiguration,
    sensor: &SensorModel,
    grid: &ScanGrid,
    plan: &FrequencyPlan,
    reference_position: Vector3<f64>,
    seed: u64,
) -> Result<ScanDataset> {
    scene.validate()?;
    sensor.validate()?;
    grid.validate()?;
    let reps = repetitions_per_point(grid, &sensor.sequence, plan.n_points)?;

    let reference_center = sensor.resonance_at(&reference_position, scene)?;
    let freqs = plan.frequencies(reference_center, &sensor.spectrum)?;
    let (f_lo, f_hi) = (freqs[0], freqs[freqs.len() - 1]);
    let half_split = 0.5 * sensor.spectrum.hyperfine_splitting;
    let params = &sensor.spectrum;

    let reference = synth_spectrum(
        &freqs,
        params,
        &sensor.sequence,
        reference_center,
        reps,
        derive_seed(seed, REFERENCE_STREAM),
    )?;

    let pixels = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let center = sensor.resonance_at(&grid.position(i), scene)?;
            let flagged = center - half_split < f_lo || center + half_split > f_hi;
            let spectrum = synth_spectrum(
                &freqs,
                params,
                &sensor.sequence,
                center,
                reps,
                derive_seed(seed, i as u64),
            )?;
            Ok((spectrum, flagged))
        })
        .collect::<Result<Vec<_>>>()?;
    let (spectra, flagged) = pixels.into_iter().unzip();

    Ok(ScanDataset {
        grid: *grid,
        spectra,
        reference,
        reference_position,
        flagged,
    })
}

/// Noise-free ΔB map: projected field at each pixel minus the projected field
/// at the reference position.
pub fn projected_field_map(
    scene: &VortexConfiguration,
    orientation: &NvOrientation,
    grid: &ScanGrid,
    reference_position: Vector3<f64>,
) -> Result<Vec<f64>> {
    let reference = project_field(&total_field(&reference_position, scene)?.b, orientation);
    (0..grid.len())
        .into_par_iter()
        .map(|i| Ok(project_field(&total_field(&grid.position(i), scene)?.b, orientation) - reference))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelStatus {
    Ok,
    NotConverged,
    NoResonance,
    OutOfSpan,
    FitError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelFit {
    pub status: PixelStatus,
    /// Present whenever the fit produced parameters.
    pub fit: Option<FitResult>,
}

impl PixelFit {
    pub fn is_masked(&self) -> bool {
        self.status != PixelStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: ScanGrid,
    /// ΔB per pixel (T); NaN where masked.
    pub delta_b: Vec<f64>,
    pub pixels: Vec<PixelFit>,
    pub reference_center: f64,
}

impl FieldMap {
    pub fn mask(&self) -> Vec<bool> {
        self.pixels.iter().map(PixelFit::is_masked).collect()
    }

    pub fn unmasked_count(&self) -> usize {
        self.pixels.iter().filter(|p| !p.is_masked()).count()
    }

    pub fn subgrid(&self, x0: usize, y0: usize, nx: usize, ny: usize) -> Result<FieldMap> {
        let grid = self.grid.subgrid(x0, y0, nx, ny)?;
        let idx = self.grid.block_indices(x0, y0, nx, ny);
        Ok(FieldMap {
            grid,
            delta_b: idx.iter().map(|&i| self.delta_b[i]).collect(),
            pixels: idx.iter().map(|&i| self.pixels[i].clone()).collect(),
            reference_center: self.reference_center,
        })
    }

    /// Builds a map directly from ΔB values; NaN entries are masked.
    pub fn from_values(grid: ScanGrid, delta_b: Vec<f64>) -> Result<FieldMap> {
        if delta_b.len() != grid.len() {
            return Err(Error::invalid("delta_b", "length does not match the grid"));
        }
        let pixels = delta_b
            .iter()
            .map(|v| PixelFit {
                status: if v.is_finite() {
                    PixelStatus::Ok
                } else {
                    PixelStatus::FitError
                },
                fit: None,
            })
            .collect();
        Ok(FieldMap {
            grid,
            delta_b,
            pixels,
            reference_center: f64::NAN,
        })
    }
}

pub fn reconstruct_field_map(data: &ScanDataset, options: &FitOptions, shift_sign: ShiftSign) -> Result<FieldMap> {
    data.validate()?;
    let reference = fit_double_gaussian(&data.reference, options).map_err(|e| Error::ReferenceFit(e.to_string()))?;
    if !reference.converged {
        return Err(Error::ReferenceFit("fit did not converge".into()));
    }
    let reference_center = reference.center;

    let pixels: Vec<PixelFit> = data
        .spectra
        .par_iter()
        .zip(data.flagged.par_iter())
        .map(|(spectrum, &flagged)| match fit_double_gaussian(spectrum, options) {
            Ok(fit) => {
                let status = if flagged {
                    PixelStatus::OutOfSpan
                } else if fit.converged {
                    PixelStatus::Ok
                } else {
                    PixelStatus::NotConverged
                };
                PixelFit { status, fit: Some(fit) }
            }
            Err(Error::NoResonance) => PixelFit {
                status: if flagged {
                    PixelStatus::OutOfSpan
                } else {
                    PixelStatus::NoResonance
                },
                fit: None,
            },
            Err(_) => PixelFit {
                status: PixelStatus::FitError,
                fit: None,
            },
        })
        .collect();

    let delta_b = pixels
        .iter()
        .map(|p| match (&p.fit, p.is_masked()) {
            (Some(fit), false) => shift_to_field(fit.center, reference_center, shift_sign),
            _ => f64::NAN,
        })
        .collect();

    Ok(FieldMap {
        grid: data.grid,
        delta_b,
        pixels,
        reference_center,
    })
}

/// η = sample standard deviation of ΔB over `region` × √t_px (T/√Hz).
pub fn estimate_sensitivity(map: &FieldMap, region: &[usize]) -> Result<f64> {
    let values: Vec<f64> = region
        .iter()
        .filter(|&&i| i < map.delta_b.len() && !map.pixels[i].is_masked())
        .map(|&i| map.delta_b[i])
        .collect();
    if values.len() < MIN_SENSITIVITY_PIXELS {
        return Err(Error::invalid(
            "region",
            format!(
                "{} unmasked pixels, at least {MIN_SENSITIVITY_PIXELS} required",
                values.len()
            ),
        ));
    }
    // shifted by the first value so a constant map gives exactly zero
    let shift = values[0];
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - shift - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() * map.grid.dwell_time.sqrt())
}

/// Pixel indices of the rectangular block [x0, x0+nx) × [y0, y0+ny).
pub fn rectangle_region(grid: &ScanGrid, x0: usize, y0: usize, nx: usize, ny: usize) -> Vec<usize> {
    let x1 = (x0 + nx).min(grid.n_x);
    let y1 = (y0 + ny).min(grid.n_y);
    (y0..y1)
        .flat_map(|iy| (x0..x1).map(move |ix| grid.index(ix, iy)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// |ΔB|-weighted centroid (m).
    pub centroid: [f64; 2],
    pub pixels: usize,
    /// Signed ΔB of the strongest pixel.
    pub peak: f64,
}

/// Connected regions (4-neighbour) of unmasked pixels with |ΔB| > threshold.
pub fn count_vortices(map: &FieldMap, threshold: f64) -> Vec<Blob> {
    let grid = &map.grid;
    let above: Vec<bool> = (0..grid.len())
        .map(|i| !map.pixels[i].is_masked() && map.delta_b[i].abs() > threshold)
        .collect();
    let mut seen = vec![false; grid.len()];
    let mut blobs = Vec::new();
    for start in 0..grid.len() {
        if !above[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut wx, mut wy, mut wsum, mut count) = (0.0, 0.0, 0.0, 0);
        let mut peak = 0.0f64;
        while let Some(i) = stack.pop() {
            let v = map.delta_b[i];
            let w = v.abs();
            let (x, y) = grid.xy(i);
            wx += w * x;
            wy += w * y;
            wsum += w;
            count += 1;
            if w > peak.abs() {
                peak = v;
            }
            let (ix, iy) = grid.coords(i);
            let mut neighbours = Vec::with_capacity(4);
            if ix > 0 {
                neighbours.push(i - 1);
            }
            if ix + 1 < grid.n_x {
                neighbours.push(i + 1);
            }
            if iy > 0 {
                neighbours.push(i - grid.n_x);
            }
            if iy + 1 < grid.n_y {
                neighbours.push(i + grid.n_x);
            }
            for j in neighbours {
                if above[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        blobs.push(Blob {
            centroid: [wx / wsum, wy / wsum],
            pixels: count,
            peak,
        });
    }
    blobs
}
