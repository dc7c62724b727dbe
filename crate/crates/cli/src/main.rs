use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nvscan_core::config::{load_config, reference_config, ExperimentConfig};
use nvscan_core::demo::{run_demo, DemoFigure};
use nvscan_core::fitting::{fit_double_gaussian, FitOptions};
use nvscan_core::formats::{self, Provenance};
use nvscan_core::linescan::run_line_scans;
use nvscan_core::scan::{count_vortices, estimate_sensitivity, reconstruct_field_map, rectangle_region, run_scan};
use nvscan_core::sensor::{ShiftSign, DEFAULT_HYPERFINE_SPLITTING};
use nvscan_core::thermal::{detect_critical_current, fit_critical_temperature, DEFAULT_JUMP_SIGNIFICANCE};
use nvscan_core::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "nvscan", version, about = "Scanning NV magnetometry simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Random seed; overrides the config's `seed`. Analysis commands keep
    /// the provenance of their input files and ignore it.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a raster scan and write the spectra dataset.
    SimulateScan {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit every spectrum of a dataset and write fits.csv.
    FitSpectra {
        #[arg(long)]
        dataset: PathBuf,
        /// Config supplying fit options (splitting, weighting).
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the ΔB map of a dataset.
    ReconstructMap {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write an 8-bit PGM image.
        #[arg(long)]
        pgm: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sensitivity η from a featureless region of a field map.
    Sensitivity {
        #[arg(long)]
        map: PathBuf,
        /// Region as x0,y0,nx,ny in pixels (default: whole map).
        #[arg(long, value_delimiter = ',')]
        region: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate edge line scans for every stage temperature and power setting.
    Linescan {
        #[arg(long)]
        config: PathBuf,
        /// Stage temperatures in K; overrides the config.
        #[arg(long, value_delimiter = ',')]
        temperatures: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Shared-slope fit of critical stage temperatures from a line-scan manifest.
    TcFit {
        #[arg(long)]
        manifest: PathBuf,
        /// Noise floor in T; overrides the manifest header.
        #[arg(long)]
        noise_floor: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Critical current from a dU/dI trace.
    TransportFit {
        #[arg(long)]
        trace: PathBuf,
        /// Contact resistance in Ω; overrides the trace header.
        #[arg(long)]
        contact_resistance: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_JUMP_SIGNIFICANCE)]
        significance: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Desk-scale reproduction of one figure (2b, 3c, 3d, 3e, 3f, 4a, 4b, 4c).
    DemoFigure {
        figure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the reference configuration with every key documented.
    ConfigReference {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SimulateScan { common, .. }
            | Command::FitSpectra { common, .. }
            | Command::ReconstructMap { common, .. }
            | Command::Sensitivity { common, .. }
            | Command::Linescan { common, .. }
            | Command::TcFit { common, .. }
            | Command::TransportFit { common, .. }
            | Command::DemoFigure { common, .. }
            | Command::ConfigReference { common } => common,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()).map(Error::kind) {
        Some(ErrorKind::Validation) => 2,
        Some(ErrorKind::Numerical) => 3,
        Some(ErrorKind::Io) | None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = cli.command.common().clone();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            bail!(Error::invalid("--threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| dispatch(cli.command, &common))
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_sha256: cfg.hash(),
        seed: cfg.seed,
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn dispatch(command: Command, common: &Common) -> anyhow::Result<()> {
    let out = &common.out_dir;
    match command {
        Command::SimulateScan { config, .. } => {
            let cfg = load(&config, common.seed)?;
            let data = run_scan(
                &cfg.scene(),
                &cfg.sensor(),
                &cfg.grid(),
                &cfg.frequency_plan(),
                cfg.reference_position(),
                cfg.seed,
            )?;
            create_dir(out)?;
            formats::write_dataset(out, &data, &provenance(&cfg))?;
            formats::write_report(&out.join("config.toml"), &cfg.to_toml())?;
            let flagged = data.flagged.iter().filter(|&&f| f).count();
            println!(
                "wrote {} spectra ({}×{}) to {}; {flagged} pixels flagged out of span",
                data.spectra.len(),
                data.grid.n_x,
                data.grid.n_y,
                out.display()
            );
        }
        Command::FitSpectra { dataset, config, .. } => {
            let (data, header) = formats::read_dataset(&dataset)?;
            let (options, _) = fit_settings(config.as_deref(), common.seed)?;
            let prov = input_provenance(&header);
            let mut rows: Vec<(String, _)> =
                vec![("reference".into(), fit_double_gaussian(&data.reference, &options).ok())];
            let fits: Vec<_> = data
                .spectra
                .par_iter()
                .map(|s| fit_double_gaussian(s, &options).ok())
                .collect();
            rows.extend(fits.into_iter().enumerate().map(|(i, f)| (i.to_string(), f)));
            let failed = rows.iter().filter(|(_, f)| f.is_none()).count();
            create_dir(out)?;
            let path = out.join("fits.csv");
            formats::write_report(&path, &formats::fits_text(&rows, &prov))?;
            println!("wrote {} fits to {}; {failed} failed", rows.len(), path.display());
        }
        Command::ReconstructMap {
            dataset, config, pgm, ..
        } => {
            let (data, header) = formats::read_dataset(&dataset)?;
            let (options, cfg) = fit_settings(config.as_deref(), common.seed)?;
            let shift_sign = cfg.as_ref().map_or(ShiftSign::default(), |c| c.sensor.shift_sign);
            let prov = input_provenance(&header);
            let map = reconstruct_field_map(&data, &options, shift_sign)?;
            create_dir(out)?;
            let path = out.join("fieldmap.csv");
            formats::write_field_map(&path, &map, &prov)?;
            if pgm {
                let (lo, hi) = map
                    .delta_b
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                formats::write_pgm(&out.join("fieldmap.pgm"), &map, lo, hi, &prov)?;
            }
            let masked = map.grid.len() - map.unmasked_count();
            println!("wrote {}; {masked} pixels masked", path.display());
            if let Some(cfg) = &cfg {
                let blobs = count_vortices(&map, cfg.analysis.vortex_threshold_t);
                println!(
                    "vortices above {:.1} µT: {}",
                    cfg.analysis.vortex_threshold_t * 1e6,
                    blobs.len()
                );
            }
        }
        Command::Sensitivity { map, region, .. } => {
            let (field_map, prov) = formats::read_field_map(&map)?;
            let g = field_map.grid;
            let idx = match region.as_deref() {
                Some([x0, y0, nx, ny]) => {
                    if x0 + nx > g.n_x || y0 + ny > g.n_y {
                        bail!(Error::invalid("--region", "extends beyond the map"));
                    }
                    rectangle_region(&g, *x0, *y0, *nx, *ny)
                }
                Some(_) => bail!(Error::invalid("--region", "expected x0,y0,nx,ny")),
                None => (0..g.len()).collect(),
            };
            let eta = estimate_sensitivity(&field_map, &idx)?;
            create_dir(out)?;
            let text = format!(
                "# nvscan sensitivity\n# config_sha256: {}\n# seed: {}\nregion_pixels: {}\ndwell_time_s: {}\nsensitivity_t_per_sqrt_hz: {eta}\n",
                prov.config_sha256,
                prov.seed,
                idx.len(),
                g.dwell_time
            );
            formats::write_report(&out.join("sensitivity.txt"), &text)?;
            println!("sensitivity: {:.3} µT/√Hz over {} pixels", eta * 1e6, idx.len());
        }
        Command::Linescan {
            config, temperatures, ..
        } => {
            let cfg = load(&config, common.seed)?;
            let mut plan = cfg
                .linescan_plan()
                .ok_or_else(|| Error::invalid("linescan", "config has no [linescan] table"))?;
            if let Some(t) = temperatures {
                plan.stage_temperatures = t;
            }
            let series = run_line_scans(
                &cfg.scene(),
                &cfg.sensor(),
                &cfg.frequency_plan(),
                &plan,
                cfg.reference_position(),
                &cfg.fit_options(),
                cfg.seed,
            )?;
            let manifest = formats::write_line_scans(out, &series, &provenance(&cfg))?;
            println!(
                "wrote {} scans to {}; noise floor {:.3} µT",
                series.datasets.iter().map(|d| d.scans.len()).sum::<usize>(),
                manifest.display(),
                series.noise_floor * 1e6
            );
        }
        Command::TcFit {
            manifest, noise_floor, ..
        } => {
            let (mut series, header) = formats::read_line_scans(&manifest)?;
            if let Some(f) = noise_floor {
                series.noise_floor = f;
            }
            let prov = input_provenance(&header);
            let fit = fit_critical_temperature(&series)?;
            create_dir(out)?;
            let path = out.join("tc_report.csv");
            formats::write_report(&path, &formats::tc_report_text(&fit, &prov))?;
            println!(
                "shared slope {:.3} ± {:.3} µT/K ({} parameters, {} rounds)",
                fit.slope * 1e6,
                fit.slope_err * 1e6,
                fit.n_parameters,
                fit.rounds
            );
            for d in &fit.datasets {
                println!("  {}: T_c = {:.4} ± {:.4} K", d.label, d.t_c, d.t_c_err);
            }
        }
        Command::TransportFit {
            trace,
            contact_resistance,
            significance,
            ..
        } => {
            let header = formats::read_header(&trace)?;
            let tr = formats::read_transport(&trace, contact_resistance)?;
            let prov = input_provenance(&header);
            let result = detect_critical_current(&tr, significance)?;
            create_dir(out)?;
            let path = out.join("transport_report.csv");
            formats::write_report(&path, &formats::transport_report_text(&tr, &result, &prov))?;
            match result.transition {
                Some(t) => println!(
                    "I_c = {:.4} mA (drop {:.3} Ω, threshold {:.3} Ω)",
                    t.critical_current * 1e3,
                    t.drop,
                    result.threshold
                ),
                None => println!("no transition (threshold {:.3} Ω)", result.threshold),
            }
        }
        Command::DemoFigure { figure, .. } => {
            let fig: DemoFigure = figure.parse()?;
            let seed = common.seed.unwrap_or(ExperimentConfig::default().seed);
            let dir = out.join(format!("fig{fig}"));
            let report = run_demo(fig, seed, &dir)?;
            println!("figure {fig} → {}", dir.display());
            for (k, v) in &report.summary {
                println!("  {k}: {v}");
            }
        }
        Command::ConfigReference { .. } => {
            print!("{}", reference_config());
        }
    }
    Ok(())
}

fn fit_settings(config: Option<&Path>, seed: Option<u64>) -> anyhow::Result<(FitOptions, Option<ExperimentConfig>)> {
    match config {
        Some(p) => {
            let cfg = load(p, seed)?;
            Ok((cfg.fit_options(), Some(cfg)))
        }
        None => Ok((FitOptions::new(DEFAULT_HYPERFINE_SPLITTING), None)),
    }
}

/// Provenance carried over from an input file.
fn input_provenance(header: &formats::Header) -> Provenance {
    header.provenance().unwrap_or(Provenance {
        config_sha256: "unknown".into(),
        seed: 0,
    })
}
