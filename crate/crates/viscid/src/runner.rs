//! Multi-frame runs with optional snapshot, dataset and metrics sinks.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use viscid_core::loss::kinetic_energy;
use viscid_core::nn::Unet;
use viscid_core::scene::Scene;
use viscid_core::sim::{Simulation, Solver, Stage, StepObserver, ViscosityFrame};
use viscid_core::symgrid::encode;
use viscid_core::viscosity::ViscosityWeights;

use crate::dataset::{DatasetManifest, DatasetWriter, FrameRecord};
use crate::error::{Error, Result};
use crate::snapshot::{snapshot_name, write_snapshot, Snapshot};
use crate::weights::load_weights;

/// Solver choice as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Classic,
    Neural(PathBuf),
}

impl SolverKind {
    pub fn load(&self) -> Result<Solver> {
        Ok(match self {
            SolverKind::Classic => Solver::Classic,
            SolverKind::Neural(path) => Solver::Neural(Box::new(Unet::new(&load_weights(path)?)?)),
        })
    }
}

/// What a run writes besides its report.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    /// Directory receiving one snapshot per frame, frame 0 being the
    /// initial state.
    pub snapshots: Option<PathBuf>,
    /// Dataset file plus the provenance fields of its manifest.
    pub dataset: Option<(PathBuf, DatasetManifest)>,
    /// Collect [`FrameMetrics`].
    pub metrics: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub frame: u64,
    /// Largest |Δu| of the viscosity stage.
    pub delta_max: f64,
    /// Mass-weighted kinetic energy before and after the viscosity stage.
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Wall-clock samples per stage and per whole frame.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    stages: [Vec<Duration>; Stage::ALL.len()],
    pub frames: Vec<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStats {
    pub name: &'static str,
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    fn of(name: &'static str, samples: &[Duration]) -> Self {
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let pick = |q: f64| if ms.is_empty() { 0.0 } else { ms[((ms.len() - 1) as f64 * q).round() as usize] };
        let mean = if ms.is_empty() { 0.0 } else { ms.iter().sum::<f64>() / ms.len() as f64 };
        Self { name, count: ms.len(), mean_ms: mean, p50_ms: pick(0.5), p95_ms: pick(0.95), max_ms: pick(1.0) }
    }

    /// One `key=value` line.
    pub fn line(&self) -> String {
        format!(
            "stage={} count={} mean_ms={:.4} p50_ms={:.4} p95_ms={:.4} max_ms={:.4}",
            self.name, self.count, self.mean_ms, self.p50_ms, self.p95_ms, self.max_ms
        )
    }
}

impl Timings {
    pub fn stage(&self, stage: Stage) -> &[Duration] {
        &self.stages[stage as usize]
    }

    /// Per-stage statistics in step order, then the whole frame.
    pub fn stats(&self) -> Vec<TimingStats> {
        let mut out: Vec<_> = Stage::ALL.iter().map(|&s| TimingStats::of(s.name(), self.stage(s))).collect();
        out.push(TimingStats::of("frame", &self.frames));
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub frames: u64,
    pub particles: usize,
    pub timings: Timings,
    pub metrics: Vec<FrameMetrics>,
    pub dataset: Option<DatasetManifest>,
}

struct RunObserver {
    timings: Timings,
    started: Option<Instant>,
    dataset: Option<DatasetWriter>,
    metrics: Option<Vec<FrameMetrics>>,
    error: Option<Error>,
}

impl RunObserver {
    fn record(&mut self, f: &ViscosityFrame<'_>) -> Result<()> {
        if let Some(writer) = &mut self.dataset {
            let mu = f.params.mu_cells(f.dims);
            let input = encode(f.vel_old, f.vols, f.solid, Some(&mu), f.dims)?;
            writer.append(&FrameRecord {
                frame: f.frame,
                dims: *f.dims,
                dt: f.params.dt,
                rho: f.params.rho,
                mu,
                input,
                vel_old: f.vel_old.clone(),
                label: f.vel_new.add_scaled(f.vel_old, -1.0),
            })?;
        }
        if let Some(metrics) = &mut self.metrics {
            let weights = ViscosityWeights::new(f.vols, f.solid, f.params, f.dims)?;
            metrics.push(FrameMetrics {
                frame: f.frame,
                delta_max: f.vel_new.add_scaled(f.vel_old, -1.0).max_abs(),
                energy_before: kinetic_energy(f.vel_old, &weights, f.params.rho),
                energy_after: kinetic_energy(f.vel_new, &weights, f.params.rho),
            });
        }
        Ok(())
    }
}

impl StepObserver for RunObserver {
    fn stage_begin(&mut self, _stage: Stage) {
        self.started = Some(Instant::now());
    }

    fn stage_end(&mut self, stage: Stage) {
        if let Some(t) = self.started.take() {
            self.timings.stages[stage as usize].push(t.elapsed());
        }
    }

    fn viscosity(&mut self, frame: &ViscosityFrame<'_>) {
        if self.error.is_none() {
            if let Err(e) = self.record(frame) {
                self.error = Some(e);
            }
        }
    }
}

fn snapshot(sim: &Simulation, dir: &Path) -> Result<()> {
    let snap = Snapshot::of(&sim.particles, sim.frame, sim.frame as f64 * sim.params.dt);
    write_snapshot(dir.join(snapshot_name(sim.frame)), &snap)
}

/// Advance `sim` by `frames` steps, feeding the requested sinks.
pub fn run_simulation(sim: &mut Simulation, frames: u64, solver: &Solver, outputs: &Outputs) -> Result<RunReport> {
    if frames == 0 {
        return Err(Error::Invalid("frame count must be at least 1".into()));
    }
    if let Some(dir) = &outputs.snapshots {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        snapshot(sim, dir)?;
    }
    let dataset = match &outputs.dataset {
        Some((path, manifest)) => Some(DatasetWriter::create(path, manifest.clone())?),
        None => None,
    };
    let mut obs = RunObserver {
        timings: Timings::default(),
        started: None,
        dataset,
        metrics: outputs.metrics.then(Vec::new),
        error: None,
    };
    for _ in 0..frames {
        let t = Instant::now();
        sim.step(solver, &mut obs)?;
        obs.timings.frames.push(t.elapsed());
        if let Some(e) = obs.error.take() {
            return Err(e);
        }
        if let Some(dir) = &outputs.snapshots {
            snapshot(sim, dir)?;
        }
    }
    let dataset = obs.dataset.map(DatasetWriter::finish).transpose()?;
    Ok(RunReport {
        frames,
        particles: sim.particles.len(),
        timings: obs.timings,
        metrics: obs.metrics.unwrap_or_default(),
        dataset,
    })
}

/// Seed a scene and run it.
pub fn run(scene: &Scene, frames: u64, solver: &Solver, outputs: &Outputs) -> Result<(Simulation, RunReport)> {
    let mut sim = Simulation::new(scene)?;
    let report = run_simulation(&mut sim, frames, solver, outputs)?;
    Ok((sim, report))
}
