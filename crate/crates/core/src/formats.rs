//! Text file formats.
//!
//! Every file starts with a block of `# key: value` lines, the first of which
//! names the file kind, followed by `config_sha256` and `seed`. CSV bodies
//! have a header row. Floats are written in Rust's shortest round-trip form,
//! so reading a file back reproduces the values bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FitResult;
use crate::scan::{FieldMap, PixelFit, PixelStatus, ScanDataset, ScanGrid};
use crate::sensor::{OdmrSpectrum, PulseSequence};
use crate::thermal::{CriticalCurrentResult, LineScan, LineScanDataset, LineScanSeries, TcFit, TransportTrace};

pub const SPECTRA_FILE: &str = "spectra.csv";
pub const REFERENCE_FILE: &str = "reference.csv";

/// Provenance stamped into every output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

/// Parsed `# key: value` block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub kind: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| malformed(path, None, format!("missing header key '{key}'")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key, path)?;
        raw.parse()
            .map_err(|e| malformed(path, None, format!("header key '{key}': {e}")))
    }

    pub fn provenance(&self) -> Option<Provenance> {
        Some(Provenance {
            config_sha256: self.get("config_sha256")?.to_string(),
            seed: self.get("seed")?.parse().ok()?,
        })
    }
}

fn malformed(path: &Path, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn header_text(kind: &str, prov: &Provenance, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "# nvscan {kind}\n# config_sha256: {}\n# seed: {}\n",
        prov.config_sha256, prov.seed
    );
    for (k, v) in extra {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Splits the leading comment block from the CSV body.
fn split_header(text: &str, path: &Path) -> Result<(Header, String, usize)> {
    let mut header = Header::default();
    let mut body_start = 0;
    let mut n_header = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end();
        let Some(content) = trimmed.strip_prefix('#') else {
            break;
        };
        body_start += line.len();
        n_header += 1;
        let content = content.trim();
        if n_header == 1 {
            header.kind = content.strip_prefix("nvscan ").unwrap_or(content).to_string();
            continue;
        }
        if let Some((k, v)) = content.split_once(':') {
            header.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    if n_header == 0 && text.trim().is_empty() {
        return Err(malformed(path, None, "file is empty"));
    }
    Ok((header, text[body_start..].to_string(), n_header))
}

/// Reads CSV rows after the header block, checking the column names.
fn read_rows(text: &str, path: &Path, columns: &[&str]) -> Result<(Header, Vec<(usize, csv::StringRecord)>)> {
    let (header, body, n_header) = split_header(text, path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let names = reader
        .headers()
        .map_err(|e| malformed(path, Some(n_header + 1), e.to_string()))?
        .clone();
    let got: Vec<&str> = names.iter().collect();
    if got.len() < columns.len() || got[..columns.len()] != *columns {
        return Err(malformed(
            path,
            Some(n_header + 1),
            format!("expected columns {}, found {}", columns.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize + n_header);
            malformed(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + n_header;
        if record.len() != got.len() {
            return Err(malformed(path, Some(line), "wrong number of fields"));
        }
        rows.push((line, record));
    }
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, path: &Path, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(i).unwrap_or("");
    raw.parse()
        .map_err(|e| malformed(path, Some(line), format!("column {}: '{raw}': {e}", i + 1)))
}

fn sequence_entries(s: &PulseSequence) -> Vec<(&'static str, String)> {
    vec![
        ("t_pi_s", s.t_pi.to_string()),
        ("t_laser_s", s.t_laser.to_string()),
        ("t_set_s", s.t_set.to_string()),
        ("t_int_s", s.t_int.to_string()),
        ("p_laser_peak_w", s.p_laser_peak.to_string()),
        ("p_mw_peak_w", s.p_mw_peak.to_string()),
    ]
}

fn sequence_from(h: &Header, path: &Path) -> Result<PulseSequence> {
    Ok(PulseSequence {
        t_pi: h.parse("t_pi_s", path)?,
        t_laser: h.parse("t_laser_s", path)?,
        t_set: h.parse("t_set_s", path)?,
        t_int: h.parse("t_int_s", path)?,
        p_laser_peak: h.parse("p_laser_peak_w", path)?,
        p_mw_peak: h.parse("p_mw_peak_w", path)?,
    })
}

fn grid_entries(g: &ScanGrid) -> Vec<(&'static str, String)> {
    vec![
        ("origin_x_m", g.origin[0].to_string()),
        ("origin_y_m", g.origin[1].to_string()),
        ("pixel_size_m", g.pixel_size.to_string()),
        ("n_x", g.n_x.to_string()),
        ("n_y", g.n_y.to_string()),
        ("standoff_m", g.standoff.to_string()),
        ("dwell_time_s", g.dwell_time.to_string()),
    ]
}

fn grid_from(h: &Header, path: &Path) -> Result<ScanGrid> {
    let grid = ScanGrid {
        origin: [h.parse("origin_x_m", path)?, h.parse("origin_y_m", path)?],
        pixel_size: h.parse("pixel_size_m", path)?,
        n_x: h.parse("n_x", path)?,
        n_y: h.parse("n_y", path)?,
        standoff: h.parse("standoff_m", path)?,
        dwell_time: h.parse("dwell_time_s", path)?,
    };
    grid.validate().map_err(|e| malformed(path, None, e.to_string()))?;
    Ok(grid)
}

/// Single spectrum: header with the pulse sequence, then frequency_hz,counts.
pub fn spectrum_text(spectrum: &OdmrSpectrum, prov: &Provenance, extra: &[(&str, String)]) -> String {
    let mut entries = vec![("repetitions_per_point", spectrum.repetitions_per_point.to_string())];
    entries.extend(sequence_entries(&spectrum.sequence));
    entries.extend(extra.iter().cloned());
    let mut s = header_text("spectrum", prov, &entries);
    s.push_str("frequency_hz,counts\n");
    for (f, c) in spectrum.frequencies.iter().zip(&spectrum.counts) {
        s.push_str(&format!("{f},{c}\n"));
    }
    s
}

pub fn write_spectrum(path: &Path, spectrum: &OdmrSpectrum, prov: &Provenance) -> Result<()> {
    write_text(path, &spectrum_text(spectrum, prov, &[]))
}

pub fn read_spectrum(path: &Path) -> Result<(OdmrSpectrum, Header)> {
    let text = read_text(path)?;
    let (header, rows) = read_rows(&text, path, &["frequency_hz", "counts"])?;
    let mut frequencies = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        frequencies.push(field(r, 0, path, *line)?);
        counts.push(field(r, 1, path, *line)?);
    }
    let spectrum = OdmrSpectrum {
        frequencies,
        counts,
        repetitions_per_point: header.parse("repetitions_per_point", path)?,
        sequence: sequence_from(&header, path)?,
    };
    spectrum.validate().map_err(|e| malformed(path, None, e.to_string()))?;
    Ok((spectrum, header))
}

/// Writes `spectra.csv` (all pixels, long format) and `reference.csv`.
pub fn write_dataset(dir: &Path, data: &ScanDataset, prov: &Provenance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = data.reference_position;
    let reference_extra = [
        ("position_x_m", p.x.to_string()),
        ("position_y_m", p.y.to_string()),
        ("position_z_m", p.z.to_string()),
    ];
    write_text(
        &dir.join(REFERENCE_FILE),
        &spectrum_text(&data.reference, prov, &reference_extra),
    )?;

    let mut entries = grid_entries(&data.grid);
    let reps = data.spectra.first().map_or(0, |s| s.repetitions_per_point);
    entries.push(("repetitions_per_point", reps.to_string()));
    if let Some(s) = data.spectra.first() {
        entries.extend(sequence_entries(&s.sequence));
    }
    let flagged: Vec<String> = data
        .flagged
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i.to_string())
        .collect();
    entries.push(("flagged_pixels", flagged.join(" ")));
    let mut s = header_text("scan-dataset", prov, &entries);
    s.push_str("pixel_id,frequency_hz,counts\n");
    for (i, spectrum) in data.spectra.iter().enumerate() {
        for (f, c) in spectrum.frequencies.iter().zip(&spectrum.counts) {
            s.push_str(&format!("{i},{f},{c}\n"));
        }
    }
    write_text(&dir.join(SPECTRA_FILE), &s)
}

pub fn read_dataset(dir: &Path) -> Result<(ScanDataset, Header)> {
    let (reference, ref_header) = read_spectrum(&dir.join(REFERENCE_FILE))?;
    let ref_path = dir.join(REFERENCE_FILE);
    let reference_position = Vector3::new(
        ref_header.parse("position_x_m", &ref_path)?,
        ref_header.parse("position_y_m", &ref_path)?,
        ref_header.parse("position_z_m", &ref_path)?,
    );

    let path = dir.join(SPECTRA_FILE);
    let text = read_text(&path)?;
    let (header, rows) = read_rows(&text, &path, &["pixel_id", "frequency_hz", "counts"])?;
    let grid = grid_from(&header, &path)?;
    let reps: u64 = header.parse("repetitions_per_point", &path)?;
    let sequence = sequence_from(&header, &path)?;
    let mut spectra: Vec<OdmrSpectrum> = (0..grid.len())
        .map(|_| OdmrSpectrum {
            frequencies: Vec::new(),
            counts: Vec::new(),
            repetitions_per_point: reps,
            sequence,
        })
        .collect();
    for (line, r) in &rows {
        let id: usize = field(r, 0, &path, *line)?;
        let s = spectra
            .get_mut(id)
            .ok_or_else(|| malformed(&path, Some(*line), format!("pixel_id {id} outside the grid")))?;
        s.frequencies.push(field(r, 1, &path, *line)?);
        s.counts.push(field(r, 2, &path, *line)?);
    }
    for (i, s) in spectra.iter().enumerate() {
        s.validate()
            .map_err(|e| malformed(&path, None, format!("pixel {i}: {e}")))?;
    }
    let mut flagged = vec![false; grid.len()];
    for tok in header.require("flagged_pixels", &path)?.split_whitespace() {
        let i: usize = tok
            .parse()
            .map_err(|_| malformed(&path, None, format!("bad flagged pixel '{tok}'")))?;
        *flagged
            .get_mut(i)
            .ok_or_else(|| malformed(&path, None, format!("flagged pixel {i} outside the grid")))? = true;
    }
    Ok((
        ScanDataset {
            grid,
            spectra,
            reference,
            reference_position,
            flagged,
        },
        header,
    ))
}

pub const FIT_COLUMNS: &str = "pixel_id,center_hz,center_err_hz,contrast,linewidth_hz,baseline,chi2,converged";

/// One CSV row per fit; failed fits are written with NaN parameters.
pub fn fits_text(fits: &[(String, Option<FitResult>)], prov: &Provenance) -> String {
    let mut s = header_text("fits", prov, &[]);
    s.push_str(FIT_COLUMNS);
    s.push('\n');
    for (id, fit) in fits {
        match fit {
            Some(f) => s.push_str(&format!(
                "{id},{},{},{},{},{},{},{}\n",
                f.center, f.uncertainties.center, f.contrast, f.linewidth_fwhm, f.baseline, f.chi_square, f.converged
            )),
            None => s.push_str(&format!("{id},NaN,NaN,NaN,NaN,NaN,NaN,false\n")),
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapMeta {
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
    pub grid_sha256: String,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    pub pixel_size_m: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub standoff_m: f64,
    pub dwell_time_s: f64,
    pub reference_center_hz: f64,
    pub masked_pixels: usize,
}

pub fn sidecar_path(map_path: &Path) -> PathBuf {
    let mut name = map_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    map_path.with_file_name(name)
}

fn grid_hash(g: &ScanGrid) -> String {
    let text: String = grid_entries(g).iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    crate::config::sha256_hex(text.as_bytes())
}

/// Field map CSV (x_m, y_m, delta_b_t, center_hz, converged) plus a
/// `<name>.meta.toml` sidecar holding the grid.
pub fn write_field_map(path: &Path, map: &FieldMap, prov: &Provenance) -> Result<()> {
    let g = &map.grid;
    let mut s = header_text(
        "fieldmap",
        prov,
        &[("reference_center_hz", map.reference_center.to_string())],
    );
    s.push_str("x_m,y_m,delta_b_t,center_hz,converged\n");
    for (i, (b, p)) in map.delta_b.iter().zip(&map.pixels).enumerate() {
        let (x, y) = g.xy(i);
        let center = p.fit.as_ref().map_or(f64::NAN, |f| f.center);
        s.push_str(&format!("{x},{y},{b},{center},{}\n", !p.is_masked()));
    }
    write_text(path, &s)?;

    let meta = FieldMapMeta {
        kind: "fieldmap-meta".into(),
        config_sha256: prov.config_sha256.clone(),
        seed: prov.seed,
        grid_sha256: grid_hash(g),
        origin_x_m: g.origin[0],
        origin_y_m: g.origin[1],
        pixel_size_m: g.pixel_size,
        n_x: g.n_x,
        n_y: g.n_y,
        standoff_m: g.standoff,
        dwell_time_s: g.dwell_time,
        reference_center_hz: map.reference_center,
        masked_pixels: map.pixels.iter().filter(|p| p.is_masked()).count(),
    };
    let body = toml::to_string(&meta).expect("metadata serializes");
    let sidecar = format!(
        "# nvscan fieldmap-meta\n# config_sha256: {}\n# seed: {}\n{body}",
        prov.config_sha256, prov.seed
    );
    write_text(&sidecar_path(path), &sidecar)
}

/// Reads a field map. Pixels marked unconverged are masked; fit details other
/// than the center are not stored and come back empty.
pub fn read_field_map(path: &Path) -> Result<(FieldMap, Provenance)> {
    let side = sidecar_path(path);
    let meta_text = read_text(&side)?;
    let meta: FieldMapMeta = toml::from_str(&meta_text).map_err(|e| {
        malformed(
            &side,
            e.span().map(|s| meta_text[..s.start].matches('\n').count() + 1),
            e.message().trim(),
        )
    })?;
    let grid = ScanGrid {
        origin: [meta.origin_x_m, meta.origin_y_m],
        pixel_size: meta.pixel_size_m,
        n_x: meta.n_x,
        n_y: meta.n_y,
        standoff: meta.standoff_m,
        dwell_time: meta.dwell_time_s,
    };
    grid.validate().map_err(|e| malformed(&side, None, e.to_string()))?;

    let text = read_text(path)?;
    let (header, rows) = read_rows(&text, path, &["x_m", "y_m", "delta_b_t", "center_hz", "converged"])?;
    if rows.len() != grid.len() {
        return Err(malformed(
            path,
            None,
            format!("{} rows for a {}×{} grid", rows.len(), grid.n_x, grid.n_y),
        ));
    }
    let mut delta_b = Vec::with_capacity(rows.len());
    let mut pixels = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        let b: f64 = field(r, 2, path, *line)?;
        let ok: bool = field(r, 4, path, *line)?;
        delta_b.push(if ok { b } else { f64::NAN });
        pixels.push(PixelFit {
            status: if ok { PixelStatus::Ok } else { PixelStatus::NotConverged },
            fit: None,
        });
    }
    let prov = header.provenance().unwrap_or(Provenance {
        config_sha256: meta.config_sha256.clone(),
        seed: meta.seed,
    });
    Ok((
        FieldMap {
            grid,
            delta_b,
            pixels,
            reference_center: meta.reference_center_hz,
        },
        prov,
    ))
}

/// 8-bit ASCII PGM, linearly scaled from `min` (black) to `max` (white);
/// masked pixels are black. Row 0 of the image is the top (largest y).
pub fn pgm_text(map: &FieldMap, min: f64, max: f64, prov: &Provenance) -> String {
    let g = &map.grid;
    let mut s = format!(
        "P2\n# nvscan fieldmap-image\n# config_sha256: {}\n# seed: {}\n# scale_min_t: {min}\n# scale_max_t: {max}\n{} {}\n255\n",
        prov.config_sha256, prov.seed, g.n_x, g.n_y
    );
    let span = if max > min { max - min } else { 1.0 };
    for iy in (0..g.n_y).rev() {
        let row: Vec<String> = (0..g.n_x)
            .map(|ix| {
                let v = map.delta_b[g.index(ix, iy)];
                if v.is_finite() {
                    (((v - min) / span).clamp(0.0, 1.0) * 255.0).round().to_string()
                } else {
                    "0".into()
                }
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_pgm(path: &Path, map: &FieldMap, min: f64, max: f64, prov: &Provenance) -> Result<()> {
    write_text(path, &pgm_text(map, min, max, prov))
}

/// Line-scan series: `manifest.csv` (label, temperature_k, file) and one
/// `x_m,delta_b_t` profile per scan.
pub fn write_line_scans(dir: &Path, series: &LineScanSeries, prov: &Provenance) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = header_text(
        "linescan-manifest",
        prov,
        &[("noise_floor_t", series.noise_floor.to_string())],
    );
    manifest.push_str("label,temperature_k,file\n");
    for d in &series.datasets {
        for (k, scan) in d.scans.iter().enumerate() {
            let file = format!("scan_{}_{k:02}.csv", d.label);
            let mut s = header_text(
                "linescan",
                prov,
                &[
                    ("label", d.label.clone()),
                    ("temperature_k", scan.temperature.to_string()),
                ],
            );
            s.push_str("x_m,delta_b_t\n");
            for (x, b) in series.positions.iter().zip(&scan.delta_b) {
                s.push_str(&format!("{x},{b}\n"));
            }
            write_text(&dir.join(&file), &s)?;
            manifest.push_str(&format!("{},{},{file}\n", d.label, scan.temperature));
        }
    }
    let path = dir.join("manifest.csv");
    write_text(&path, &manifest)?;
    Ok(path)
}

pub fn read_line_scans(manifest: &Path) -> Result<(LineScanSeries, Header)> {
    let text = read_text(manifest)?;
    let (header, rows) = read_rows(&text, manifest, &["label", "temperature_k", "file"])?;
    let noise_floor: f64 = header.parse("noise_floor_t", manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut positions: Option<Vec<f64>> = None;
    let mut datasets: Vec<LineScanDataset> = Vec::new();
    for (line, r) in &rows {
        let label = r.get(0).unwrap_or("").to_string();
        let temperature: f64 = field(r, 1, manifest, *line)?;
        let file = base.join(r.get(2).unwrap_or(""));
        let profile_text = read_text(&file)?;
        let (_, prows) = read_rows(&profile_text, &file, &["x_m", "delta_b_t"])?;
        let mut xs = Vec::with_capacity(prows.len());
        let mut bs = Vec::with_capacity(prows.len());
        for (pl, pr) in &prows {
            xs.push(field::<f64>(pr, 0, &file, *pl)?);
            bs.push(field::<f64>(pr, 1, &file, *pl)?);
        }
        match &positions {
            None => positions = Some(xs),
            Some(p) if *p != xs => {
                return Err(malformed(&file, None, "positions differ from the first profile"));
            }
            _ => {}
        }
        let scan = LineScan {
            temperature,
            delta_b: bs,
        };
        match datasets.iter_mut().find(|d| d.label == label) {
            Some(d) => d.scans.push(scan),
            None => datasets.push(LineScanDataset {
                label,
                scans: vec![scan],
            }),
        }
    }
    let series = LineScanSeries {
        positions: positions.unwrap_or_default(),
        datasets,
        noise_floor,
    };
    series
        .validate()
        .map_err(|e| malformed(manifest, None, e.to_string()))?;
    Ok((series, header))
}

pub fn tc_report_text(fit: &TcFit, prov: &Provenance) -> String {
    let mut s = header_text(
        "tc-fit",
        prov,
        &[
            ("slope_t_per_k", fit.slope.to_string()),
            ("slope_err_t_per_k", fit.slope_err.to_string()),
            ("n_parameters", fit.n_parameters.to_string()),
            ("rounds", fit.rounds.to_string()),
        ],
    );
    s.push_str("label,t_c_k,t_c_err_k,n_included\n");
    for d in &fit.datasets {
        let n = d.included.iter().filter(|&&v| v).count();
        s.push_str(&format!("{},{},{},{n}\n", d.label, d.t_c, d.t_c_err));
    }
    s
}

/// Transport trace (current_a, du_di_ohm). The contact resistance comes from
/// the `contact_resistance_ohm` header key unless given explicitly.
pub fn read_transport(path: &Path, contact_resistance: Option<f64>) -> Result<TransportTrace> {
    let text = read_text(path)?;
    let (header, rows) = read_rows(&text, path, &["current_a", "du_di_ohm"])?;
    let contact = match contact_resistance {
        Some(r) => r,
        None => header.parse("contact_resistance_ohm", path)?,
    };
    let mut current = Vec::with_capacity(rows.len());
    let mut du_di = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        current.push(field(r, 0, path, *line)?);
        du_di.push(field(r, 1, path, *line)?);
    }
    let trace = TransportTrace {
        current,
        du_di,
        contact_resistance: contact,
    };
    trace.validate().map_err(|e| malformed(path, None, e.to_string()))?;
    Ok(trace)
}

pub fn transport_text(trace: &TransportTrace, prov: &Provenance) -> String {
    let mut s = header_text(
        "transport",
        prov,
        &[("contact_resistance_ohm", trace.contact_resistance.to_string())],
    );
    s.push_str("current_a,du_di_ohm\n");
    for (i, r) in trace.current.iter().zip(&trace.du_di) {
        s.push_str(&format!("{i},{r}\n"));
    }
    s
}

pub fn transport_report_text(trace: &TransportTrace, result: &CriticalCurrentResult, prov: &Provenance) -> String {
    let (ic, drop) = match &result.transition {
        Some(t) => (t.critical_current.to_string(), t.drop.to_string()),
        None => ("none".to_string(), "none".to_string()),
    };
    let mut s = header_text(
        "transport-fit",
        prov,
        &[
            ("contact_resistance_ohm", trace.contact_resistance.to_string()),
            ("critical_current_a", ic),
            ("drop_ohm", drop),
            ("threshold_ohm", result.threshold.to_string()),
        ],
    );
    s.push_str("current_a,corrected_du_di_ohm\n");
    for (i, r) in trace.current.iter().zip(&result.corrected) {
        s.push_str(&format!("{i},{r}\n"));
    }
    s
}

pub fn write_report(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}

pub fn read_header(path: &Path) -> Result<Header> {
    let text = read_text(path)?;
    Ok(split_header(&text, path)?.0)
}
