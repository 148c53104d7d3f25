//! Command-line front end: single runs, parameter sweeps and the spectral
//! gap check. Exit codes: 0 success, 1 runtime failure, 2 usage or config
//! error, 3 spectral gap not verified.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

pub use config::{parse_config_text, ExperimentConfig, Overrides};

use crate::error::{Error, Result};
use crate::field::{align_phase, AlignMode, FieldKind, SpatialImage};
use crate::io::{
    fmt_decimal, make_phantom, save_reconstruction, save_sweep_csv, save_trace_csv, write_file,
    SweepRow,
};
use crate::noise::{poissonize, NoiseSpec};
use crate::operator::{ForwardOperator, MaskSpec};
use crate::projections::MagnitudeData;
use crate::solver::{run, SolverConfig, SolverTrace};
use crate::spectral::spectral_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "raar",
    version,
    about = "Phase retrieval with phase-shift masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One reconstruction: trace, image and summary
    Run(Overrides),
    /// Final error over beta values and seeds
    SweepBeta(Overrides),
    /// Final error over SNR levels and seeds
    SweepSnr(Overrides),
    /// Final error over mask phase shifts and seeds
    SweepShift(Overrides),
    /// Singular values of the linearization and the gap check
    Spectral(Overrides),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Beta,
    Snr,
    Shift,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Beta => "beta",
            Axis::Snr => "snr",
            Axis::Shift => "dshift",
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let (flags, action): (&Overrides, fn(&ExperimentConfig) -> Result<i32>) = match &cli.command {
        Command::Run(f) => (f, cmd_run),
        Command::SweepBeta(f) => (f, |c| cmd_sweep(c, Axis::Beta)),
        Command::SweepSnr(f) => (f, |c| cmd_sweep(c, Axis::Snr)),
        Command::SweepShift(f) => (f, |c| cmd_sweep(c, Axis::Shift)),
        Command::Spectral(f) => (f, cmd_spectral),
    };
    let config = match ExperimentConfig::resolve(flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("raar: {e}");
            return EXIT_USAGE;
        }
    };
    match action(&config) {
        Ok(code) => code,
        Err(e @ (Error::InvalidConfig(_) | Error::Capacity(_))) => {
            eprintln!("raar: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("raar: {e}");
            EXIT_RUNTIME
        }
    }
}

fn prepare_out(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    config::write_effective(config, &config.out)
}

/// Everything a single reconstruction needs.
struct Cell {
    shifts: Vec<f64>,
    beta: f64,
    snr: Option<f64>,
    seed: u64,
}

fn solve_cell(config: &ExperimentConfig, x0: &SpatialImage, cell: &Cell) -> Result<SolverTrace> {
    let op = ForwardOperator::for_case(config.size, MaskSpec::new(cell.shifts.clone())?);
    let mut b = MagnitudeData::from_field(&op.apply(x0)?);
    if let Some(snr) = cell.snr {
        b = poissonize(&b, &NoiseSpec::new(snr, cell.seed)?)?;
    }
    let solver = SolverConfig::new(cell.beta, config.max_iter)
        .with_tol(config.tol)
        .with_reference(x0.clone());
    run(&op, &b, &solver)
}

/// Undo the global phase (a sign for real images) so the saved picture is
/// comparable with the phantom.
fn aligned(x: &SpatialImage, x0: &SpatialImage) -> SpatialImage {
    match align_phase(x, x0, AlignMode::Unit) {
        Ok(r) if x.kind() == FieldKind::Real => {
            if r.c.re < 0.0 {
                x.scaled(Complex64::new(-1.0, 0.0))
            } else {
                x.clone()
            }
        }
        Ok(r) => x.scaled(r.c),
        Err(_) => x.clone(),
    }
}

fn cmd_run(config: &ExperimentConfig) -> Result<i32> {
    let x0 = make_phantom(&config.phantom_spec())?;
    prepare_out(config)?;
    let cell = Cell {
        shifts: config.shifts.clone(),
        beta: config.betas[0],
        snr: config.snrs.first().copied(),
        seed: config.seeds.first().copied().unwrap_or(0),
    };
    let start = Instant::now();
    let trace = solve_cell(config, &x0, &cell)?;
    let wall = start.elapsed().as_secs_f64();

    save_trace_csv(&trace, config.out.join("trace.csv"))?;
    save_reconstruction(
        &aligned(&trace.final_image, &x0),
        config.out.join("reconstruction.pgm"),
    )?;
    let final_err = trace.final_rel_err().unwrap_or(f64::NAN);
    let summary = format!(
        "final_rel_err={}\niters={}\ntermination={}\nwall_time_s={}\n",
        fmt_decimal(final_err),
        trace.records.len(),
        trace.termination,
        fmt_decimal(wall),
    );
    write_file(config.out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(EXIT_OK)
}

fn thread_count() -> usize {
    std::env::var("PR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_sweep(config: &ExperimentConfig, axis: Axis) -> Result<i32> {
    let x0 = make_phantom(&config.phantom_spec())?;
    let two = config.shifts.len() == 2;
    let values: &[f64] = match axis {
        Axis::Beta => &config.betas,
        Axis::Snr => {
            if config.snrs.is_empty() {
                return Err(Error::InvalidConfig("sweep-snr needs --snr levels".into()));
            }
            &config.snrs
        }
        Axis::Shift => &config.dshifts,
    };
    prepare_out(config)?;
    let trace_dir = config.out.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;

    let cells: Vec<Cell> = values
        .iter()
        .flat_map(|&v| {
            config.seeds.iter().map(move |&seed| {
                let mut cell = Cell {
                    shifts: config.shifts.clone(),
                    beta: config.betas[0],
                    snr: config.snrs.first().copied(),
                    seed,
                };
                match axis {
                    Axis::Beta => cell.beta = v,
                    Axis::Snr => cell.snr = Some(v),
                    Axis::Shift if two => cell.shifts = vec![v, -v],
                    Axis::Shift => cell.shifts = vec![v],
                }
                cell
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let image = config.phantom.label();
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, cell)| {
                let value = match axis {
                    Axis::Beta => cell.beta,
                    Axis::Snr => cell.snr.unwrap_or(f64::NAN),
                    Axis::Shift => cell.shifts[0],
                };
                let path = trace_dir.join(format!(
                    "{idx:04}_{}-{}_seed-{}.csv",
                    axis.name(),
                    value,
                    cell.seed
                ));
                let outcome = solve_cell(config, &x0, cell)
                    .and_then(|t| {
                        save_trace_csv(&t, &path)?;
                        Ok((t.final_rel_err().unwrap_or(f64::NAN), t.records.len()))
                    })
                    .map_err(|e| error_tag(&e));
                SweepRow {
                    image: image.clone(),
                    beta: cell.beta,
                    d1: cell.shifts[0],
                    d2: cell.shifts.get(1).copied(),
                    snr_db: cell.snr,
                    seed: cell.seed,
                    iters: outcome.as_ref().map_or(0, |o| o.1),
                    outcome: outcome.map(|o| o.0),
                }
            })
            .collect()
    });

    save_sweep_csv(&rows, config.out.join("sweep.csv"))?;
    let means = mean_csv(&rows, config.seeds.len());
    write_file(config.out.join("sweep_mean.csv"), means.as_bytes())?;
    print!("{means}");

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("raar: {failed} of {} cells failed", rows.len());
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn error_tag(e: &Error) -> String {
    let tag = match e {
        Error::Dimension { .. } => "dimension",
        Error::DegenerateAlignment => "degenerate_alignment",
        Error::InvalidReference => "invalid_reference",
        Error::DegenerateSolution { .. } => "degenerate_solution",
        Error::ToleranceNotReached { .. } => "tolerance_not_reached",
        Error::Capacity(_) => "capacity",
        Error::InvalidData(_) => "invalid_data",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Format { .. } | Error::UnsupportedFormat(_) => "format",
        Error::Io { .. } => "io",
    };
    tag.to_string()
}

pub const SWEEP_MEAN_HEADER: &str = "image,beta,d1,d2,snr_db,runs,failed,mean_final_rel_err";

/// Rows come in blocks of `per_cell` seeds sharing the swept parameters.
fn mean_csv(rows: &[SweepRow], per_cell: usize) -> String {
    let mut s = format!("{SWEEP_MEAN_HEADER}\n");
    for block in rows.chunks(per_cell.max(1)) {
        let r = &block[0];
        let ok: Vec<f64> = block
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().copied())
            .collect();
        let mean = if ok.is_empty() {
            String::new()
        } else {
            fmt_decimal(ok.iter().sum::<f64>() / ok.len() as f64)
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.image,
            r.beta,
            r.d1,
            r.d2.map(|v| v.to_string()).unwrap_or_default(),
            r.snr_db.map(|v| v.to_string()).unwrap_or_default(),
            block.len(),
            block.len() - ok.len(),
            mean
        ));
    }
    s
}

fn cmd_spectral(config: &ExperimentConfig) -> Result<i32> {
    let x0 = make_phantom(&config.phantom_spec())?;
    let op = ForwardOperator::for_case(config.size, MaskSpec::new(config.shifts.clone())?);
    prepare_out(config)?;
    let report = spectral_report(&op, &x0, config.spectral)?;
    let kv = report.to_key_value();
    write_file(config.out.join("spectral.txt"), kv.as_bytes())?;
    let csv = format!(
        "{}\n{}\n",
        crate::spectral::SpectralReport::CSV_HEADER,
        report.csv_row()
    );
    write_file(config.out.join("spectral.csv"), csv.as_bytes())?;
    print!("{kv}");
    Ok(if report.gap_ok { EXIT_OK } else { EXIT_GAP })
}

/// Reads a `key=value` file as written by the CLI.
pub fn read_key_value(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path: PathBuf = path.as_ref().into();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}
