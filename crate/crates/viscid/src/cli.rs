//! Command line: `simulate`, `gen-dataset`, `eval`, `bench`, `init-weights`.
//!
//! Exit codes: 0 on success, 2 on a usage error, 1 on a runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use viscid_core::nn::{Unet, UnetConfig, WeightManifest};

use crate::dataset::{load_dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::runner::{run, Outputs, RunReport, SolverKind};
use crate::scene_io::load_scene;
use crate::weights::{load_weights, save_weights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "viscid", version, about = "Hybrid particle/grid viscous fluid simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Classic,
    Neural,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scene and write one particle snapshot per frame.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        frames: u64,
        #[arg(long, value_enum)]
        solver: SolverArg,
        /// Weight file, required with `--solver neural`.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scene with the classic solver and record training frames.
    GenDataset {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a network on a dataset; prints key=value lines.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        weights: PathBuf,
    },
    /// Time each stage of a run; prints key=value lines.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverArg,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Write a seeded (or all-zero) weight file.
    InitWeights {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        in_channels: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Width of the first level; later levels double it.
        #[arg(long)]
        base: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        zero: bool,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct Usage(String);

fn solver_kind(solver: SolverArg, weights: Option<PathBuf>) -> std::result::Result<SolverKind, Usage> {
    match (solver, weights) {
        (SolverArg::Classic, _) => Ok(SolverKind::Classic),
        (SolverArg::Neural, Some(w)) => Ok(SolverKind::Neural(w)),
        (SolverArg::Neural, None) => Err(Usage("--solver neural requires --weights".into())),
    }
}

fn report_lines(report: &RunReport) -> Vec<String> {
    let mut out = vec![format!("frames={} particles={}", report.frames, report.particles)];
    out.extend(report.timings.stats().iter().map(|s| s.line()));
    out
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

enum Failure {
    Usage(Usage),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<Usage> for Failure {
    fn from(e: Usage) -> Self {
        Failure::Usage(e)
    }
}

fn execute(command: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let mut emit = |lines: &[String]| -> Result<()> {
        for l in lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    };
    match command {
        Command::Simulate { scene, frames, solver, weights, out: dir } => {
            let kind = solver_kind(solver, weights)?;
            let scene_data = load_scene(&scene)?;
            let solver = kind.load()?;
            let outputs = Outputs { snapshots: Some(dir.clone()), metrics: true, ..Default::default() };
            let (_, report) = run(&scene_data, frames, &solver, &outputs)?;
            let lines = report_lines(&report);
            write_lines(&dir.join("timings.txt"), &lines)?;
            let metrics: Vec<String> = report
                .metrics
                .iter()
                .map(|m| {
                    format!(
                        "frame={} delta_max={:e} energy_before={:e} energy_after={:e}",
                        m.frame, m.delta_max, m.energy_before, m.energy_after
                    )
                })
                .collect();
            write_lines(&dir.join("metrics.txt"), &metrics)?;
            emit(&lines)?;
        }
        Command::GenDataset { scene, frames, out: file } => {
            let scene_data = load_scene(&scene)?;
            let provenance = DatasetManifest {
                scene: scene_data.name.clone(),
                source: scene.display().to_string(),
                seed: scene_data.seed,
                ..Default::default()
            };
            let outputs = Outputs { dataset: Some((file, provenance)), ..Default::default() };
            let (_, report) = run(&scene_data, frames, &SolverKind::Classic.load()?, &outputs)?;
            let manifest = report.dataset.as_ref().expect("dataset requested");
            emit(&[format!(
                "frames={} grid={}x{} channels={}",
                manifest.frames, manifest.nx, manifest.ny, manifest.channels
            )])?;
        }
        Command::Eval { dataset, weights } => {
            let net = Unet::new(&load_weights(&weights)?).map_err(Error::from)?;
            let (_, records) = load_dataset(&dataset)?;
            emit(&evaluate(&records, &net)?.lines())?;
        }
        Command::Bench { scene, solver, frames, weights } => {
            let kind = solver_kind(solver, weights)?;
            let scene_data = load_scene(&scene)?;
            let (_, report) = run(&scene_data, frames, &kind.load()?, &Outputs::default())?;
            emit(&report_lines(&report))?;
        }
        Command::InitWeights { out: file, in_channels, depth, base, seed, zero } => {
            let config = match base {
                Some(b) => UnetConfig::new(in_channels, depth, b),
                None => UnetConfig::default_for(in_channels, depth),
            };
            config.validate().map_err(|e| Usage(e.to_string()))?;
            let manifest = if zero { WeightManifest::zeros(config) } else { WeightManifest::seeded(config, seed) }
                .map_err(Error::from)?;
            save_weights(&file, &manifest)?;
            emit(&[format!("parameters={} widths={:?}", manifest.parameter_count(), manifest.config.widths)])?;
        }
    }
    Ok(())
}

/// Cap rayon's worker count from `VISCID_THREADS` (unset or 0: automatic).
pub fn configure_threads() -> std::result::Result<(), String> {
    let n = match std::env::var("VISCID_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("VISCID_THREADS must be a non-negative integer, got {v:?}"))?,
        Err(_) => 0,
    };
    // A pool that already exists (e.g. a second call in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (program name first), run the command and return the exit
/// code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(Usage(msg))) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
