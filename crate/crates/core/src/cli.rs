//! Command-line front end. Subcommands share one configuration and one
//! output directory; `solve-field` writes the volume and unit fields that the
//! other commands read back.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::cable::calibrate_input;
use crate::conductor::{solve_unit_field, FieldSolution};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{efield_norm, static_vta, tract_overlap};
use crate::format::{read_field, read_volume, write_field, write_volume};
use crate::output::{self, Kind, Provenance, SolveRow, VtaRow};
use crate::scenario::{fiber_series, grid_rasters, pick_field, polarity_study, FiringRaster, ScoreTable, SweepAxis};
use crate::stimulus::ContactProgram;

#[derive(Debug, Parser)]
#[command(name = "dbsim", version, about = "Field, VTA and fiber-traffic simulation for DBS leads")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory, overriding the configuration (default `out`).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the volume and solve unit fields for every configured program.
    SolveField,
    /// Static VTA and tract overlap over an amplitude range.
    Vta {
        /// Field-norm threshold, V/m.
        #[arg(long)]
        threshold: Option<f64>,
        /// Comma-separated amplitudes, mA.
        #[arg(long, value_delimiter = ',')]
        amplitudes: Option<Vec<f64>>,
    },
    /// Phase-sweep score grids and the fiber series.
    Sweep,
    /// Rasters for every program, tract and traffic direction.
    Polarity,
    /// Calibrate the axonal input amplitude.
    Calibrate,
    /// Re-render images from result CSVs.
    Render {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveField => "solve-field",
            Command::Vta { .. } => "vta",
            Command::Sweep => "sweep",
            Command::Polarity => "polarity",
            Command::Calibrate => "calibrate",
            Command::Render { .. } => "render",
        }
    }
}

pub const SOLVE_REPORT: &str = "solve.csv";
pub const VOLUME_FILE: &str = "volume.dbv";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Run a parsed command line and map the outcome to an exit code: 0 on
/// success, 1 for numerical failures, 2 for bad input.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.output_dir {
        cfg.output_dir = Some(d);
    }
    cfg.check_files()?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;

    let ctx = Context { hash: cfg.hash(), cfg, out };
    let started = Instant::now();
    let mut extra = serde_json::Value::Null;
    match &cli.command {
        Command::SolveField => extra = ctx.solve_field()?,
        Command::Vta { threshold, amplitudes } => ctx.vta(*threshold, amplitudes.clone())?,
        Command::Sweep => ctx.sweep()?,
        Command::Polarity => ctx.polarity()?,
        Command::Calibrate => {
            ctx.calibrate()?;
        }
        Command::Render { csv } => {
            for p in csv {
                match output::render_file(p)? {
                    Some(img) => println!("{}", img.display()),
                    None => log::warn!("{}: nothing to render for this kind of file", p.display()),
                }
            }
            return Ok(());
        }
    }
    ctx.write_provenance(cli.command.name(), started.elapsed().as_secs_f64(), extra)
}

struct Context {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
}

/// Programs to solve: the stimulus program plus the polarity programs, one
/// per reversal pair.
pub fn programs_to_solve(cfg: &RunConfig) -> Result<Vec<ContactProgram>> {
    let mut out: Vec<ContactProgram> = Vec::new();
    for p in std::iter::once(cfg.program()?).chain(cfg.polarity_programs()?) {
        if !out.iter().any(|q| *q == p || q.reversed() == p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn grid_label(axis: &SweepAxis, r: &FiringRaster) -> String {
    match axis {
        SweepAxis::PulseWidthUs(_) => format!("{} us, {} mA", r.pulse_width_us, r.amplitude_ma),
        SweepAxis::FrequencyHz(_) => format!("{} Hz, {} mA", r.frequency_hz, r.amplitude_ma),
    }
}

fn missing_solve(path: &Path) -> Error {
    Error::io(
        format!("file not found: {} (run `dbsim solve-field` first)", path.display()),
        std::io::Error::from(std::io::ErrorKind::NotFound),
    )
}

impl Context {
    fn prov(&self, kind: Kind) -> Provenance {
        Provenance::new(kind, &self.hash, self.cfg.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn emit(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        if let Some(img) = output::write_csv_and_image(&p, text)? {
            log::info!("wrote {} and {}", p.display(), img.display());
        } else {
            log::info!("wrote {}", p.display());
        }
        println!("{}", p.display());
        Ok(())
    }

    /// Returns the per-program solver report for the provenance file.
    fn solve_field(&self) -> Result<serde_json::Value> {
        let volume = self.cfg.build_volume()?;
        write_volume(&self.path(VOLUME_FILE), &volume)?;
        let options = self.cfg.solver_options();
        let mut rows = Vec::new();
        for program in programs_to_solve(&self.cfg)? {
            let sol = solve_unit_field(&volume, &program, &options)?;
            let file = format!("field-{}.dbf", program.slug());
            write_field(&self.path(&file), &sol)?;
            log::info!("`{program}`: {} iterations, relative residual {:.2e}", sol.iterations, sol.residual);
            rows.push(SolveRow {
                program: program.to_string(),
                iterations: sol.iterations,
                relative_residual: format!("{:e}", sol.residual),
                file,
            });
        }
        self.emit(SOLVE_REPORT, &output::solve_csv(&self.prov(Kind::Solve), &rows)?)?;
        Ok(serde_json::json!({ "solves": rows }))
    }

    fn fields(&self) -> Result<Vec<FieldSolution>> {
        let report = self.path(SOLVE_REPORT);
        let text = std::fs::read_to_string(&report).map_err(|_| missing_solve(&report))?;
        let prov = Provenance::parse(&text)?;
        if prov.config_hash != self.hash {
            log::warn!("fields in {} were solved with a different configuration", self.out.display());
        }
        output::read_solve_report(&text)?
            .iter()
            .map(|row| {
                let p = self.path(&row.file);
                if !p.exists() {
                    return Err(missing_solve(&p));
                }
                read_field(&p)
            })
            .collect()
    }

    /// Configured amplitude, else a previous calibration, else calibrate now.
    fn input_amplitude(&self) -> Result<f64> {
        if let Some(a) = self.cfg.input.amplitude_na {
            return Ok(a);
        }
        let p = self.path(CALIBRATION_FILE);
        if let Ok(text) = std::fs::read_to_string(&p) {
            if Provenance::parse(&text)?.config_hash == self.hash {
                return Ok(output::read_calibration(&text)?.amplitude_na);
            }
        }
        self.calibrate()
    }

    fn calibrate(&self) -> Result<f64> {
        let input = &self.cfg.input;
        let cal = calibrate_input(
            &self.cfg.cable,
            &input.template(0.0),
            input.calibration_window_ms,
            input.target_fraction,
            self.cfg.seed,
        )?;
        log::info!("input threshold {:.4} nA, using {:.4} nA", cal.threshold_na, cal.input.amplitude_na);
        self.emit(
            CALIBRATION_FILE,
            &output::calibration_csv(&self.prov(Kind::Calibration), &cal, input.target_fraction)?,
        )?;
        Ok(cal.input.amplitude_na)
    }

    fn vta(&self, threshold: Option<f64>, amplitudes: Option<Vec<f64>>) -> Result<()> {
        let threshold = threshold.unwrap_or(self.cfg.vta.threshold_v_per_m);
        let amplitudes = amplitudes.unwrap_or_else(|| self.cfg.vta.amplitudes_ma.clone());
        if amplitudes.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("amplitudes must be non-negative".into()));
        }
        let vol_path = self.path(VOLUME_FILE);
        if !vol_path.exists() {
            return Err(missing_solve(&vol_path));
        }
        let volume = read_volume(&vol_path, self.cfg.sigma_table())?;
        let fields = self.fields()?;
        let field = pick_field(&fields, &self.cfg.program()?)?;
        let tracts = self.cfg.tracts()?;
        let mut rows = Vec::new();
        for &a in &amplitudes {
            let vta = static_vta(&efield_norm(&field, a), &volume, threshold)?;
            if tracts.is_empty() {
                rows.push(VtaRow::new(a, threshold, vta.volume_mm3, "", None));
            } else {
                let overlap = tract_overlap(&vta, volume.grid(), &tracts);
                for (t, o) in tracts.iter().zip(overlap.per_fiber) {
                    rows.push(VtaRow::new(a, threshold, vta.volume_mm3, &t.id, Some(o)));
                }
            }
        }
        self.emit("vta.csv", &output::vta_csv(&self.prov(Kind::Vta), &rows)?)
    }

    fn sweep(&self) -> Result<()> {
        let fields = self.fields()?;
        let waveform = self.cfg.waveform()?;
        let field = pick_field(&fields, &waveform.program)?;
        let tracts = self.cfg.tracts()?;
        let setup = self.cfg.sweep_setup(self.input_amplitude()?);
        let s = &self.cfg.sweep;
        let seed = self.cfg.seed;
        let fiber = self.cfg.tract(&tracts, s.fiber)?;
        for (axis, name) in [
            (SweepAxis::PulseWidthUs(s.pulse_widths_us.clone()), "pulse-width"),
            (SweepAxis::FrequencyHz(s.frequencies_hz.clone()), "frequency"),
        ] {
            if axis.values().is_empty() {
                continue;
            }
            let rasters = grid_rasters(&fiber, &field, &waveform, &s.amplitudes_ma, &axis, &setup, seed)?;
            let table = ScoreTable::from_rasters(&axis, &s.amplitudes_ma, &rasters);
            self.emit(&format!("scores-{name}.csv"), &output::scores_csv(&self.prov(Kind::Scores), &table)?)?;
            let labelled: Vec<(String, _)> = rasters.iter().map(|r| (grid_label(&axis, r), r)).collect();
            self.emit(
                &format!("rasters-{name}.csv"),
                &output::rasters_csv(&self.prov(Kind::Rasters), &labelled, waveform.n_pulses)?,
            )?;
        }
        if !s.series.is_empty() {
            let fibers = s.series.iter().map(|&i| self.cfg.tract(&tracts, i)).collect::<Result<Vec<_>>>()?;
            let rasters = fiber_series(&fibers, &field, &waveform, &setup, seed)?;
            self.emit("series.csv", &output::series_csv(&self.prov(Kind::Series), &rasters)?)?;
            let labelled: Vec<(String, _)> = rasters.iter().map(|r| (r.fiber_id.clone(), r)).collect();
            self.emit(
                "rasters-series.csv",
                &output::rasters_csv(&self.prov(Kind::Rasters), &labelled, waveform.n_pulses)?,
            )?;
        }
        Ok(())
    }

    fn polarity(&self) -> Result<()> {
        let fields = self.fields()?;
        let tracts = self.cfg.tracts()?;
        let chosen = self
            .cfg
            .polarity
            .tracts
            .iter()
            .map(|&i| self.cfg.tract(&tracts, i).map(|t| (t.id.clone(), t)))
            .collect::<Result<Vec<_>>>()?;
        let programs = self.cfg.polarity_programs()?;
        let setup = self.cfg.sweep_setup(self.input_amplitude()?);
        let waveform = self.cfg.waveform()?;
        let panel = polarity_study(&chosen, &fields, &programs, &waveform, &setup, self.cfg.seed)?;
        let labelled: Vec<(String, _)> = panel
            .entries
            .iter()
            .map(|e| (format!("{} {} {:?}", e.tract, e.program, e.direction).to_lowercase(), &e.raster))
            .collect();
        self.emit("polarity.csv", &output::rasters_csv(&self.prov(Kind::Rasters), &labelled, waveform.n_pulses)?)
    }

    /// Timings and run metadata, kept apart from the reproducible artifacts.
    fn write_provenance(&self, command: &str, elapsed_s: f64, extra: serde_json::Value) -> Result<()> {
        let mut doc = serde_json::json!({
            "command": command,
            "config_hash": self.hash,
            "seed": self.cfg.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "elapsed_s": elapsed_s,
            "threads": rayon::current_num_threads(),
        });
        if let serde_json::Value::Object(m) = extra {
            doc.as_object_mut().expect("object").extend(m);
        }
        let p = self.path(&format!("provenance-{command}.json"));
        let text = serde_json::to_string_pretty(&doc).expect("json serializes") + "\n";
        output::write_text(&p, &text)
    }
}
