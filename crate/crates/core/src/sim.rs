//! The per-frame time loop: transfers, external force, viscosity, pressure.
//!
//! One [`Simulation::step`] runs
//! p2g → extrapolate → gravity → volumes → viscosity → projection → g2p →
//! advect. Viscosity is either the classic implicit solve or a U-Net
//! forward pass on the symmetric grid encoding. Timing and data capture are
//! left to a [`StepObserver`], so the loop itself needs no clock.

use alloc::boxed::Box;
use core::fmt;

use crate::apic::{advect, extrapolate, g2p, p2g, ParticleSet};
use crate::error::{CoreError, Result};
use crate::grid::{fluid_volumes, GridDims, LevelSet2, MacVelocity2, SolidSdf2, VolumeFractions2};
use crate::nn::{Tensor, Unet};
use crate::pressure::{project, CellLabels};
use crate::scene::{union_solids, Scene};
use crate::symgrid::{decode, encode, pad, unpad, ChannelStack, PaddingSpec, COEFF_CHANNELS};
use crate::viscosity::{viscosity_step, FluidParams, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    P2g,
    Extrapolate,
    Gravity,
    Volumes,
    Viscosity,
    Projection,
    G2p,
    Advect,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::P2g,
        Stage::Extrapolate,
        Stage::Gravity,
        Stage::Volumes,
        Stage::Viscosity,
        Stage::Projection,
        Stage::G2p,
        Stage::Advect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::P2g => "p2g",
            Stage::Extrapolate => "extrapolate",
            Stage::Gravity => "gravity",
            Stage::Volumes => "volumes",
            Stage::Viscosity => "viscosity",
            Stage::Projection => "projection",
            Stage::G2p => "g2p",
            Stage::Advect => "advect",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which viscosity solver a step uses.
pub enum Solver {
    Classic,
    Neural(Box<Unet>),
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::Classic => f.write_str("Classic"),
            Solver::Neural(net) => write!(f, "Neural({:?})", net.config()),
        }
    }
}

/// Everything the viscosity stage saw and produced on one frame.
#[derive(Debug, Clone, Copy)]
pub struct ViscosityFrame<'a> {
    pub frame: u64,
    pub dims: &'a GridDims,
    pub params: &'a FluidParams,
    pub vel_old: &'a MacVelocity2,
    pub vel_new: &'a MacVelocity2,
    pub vols: &'a VolumeFractions2,
    pub solid: &'a SolidSdf2,
    /// Network input, on the neural path.
    pub input: Option<&'a ChannelStack>,
}

/// Hooks called during a step. All methods default to doing nothing.
pub trait StepObserver {
    fn stage_begin(&mut self, _stage: Stage) {}
    fn stage_end(&mut self, _stage: Stage) {}
    fn viscosity(&mut self, _frame: &ViscosityFrame<'_>) {}
}

impl StepObserver for () {}

/// A failed step: the frame and stage it failed in.
#[derive(Debug, Clone, PartialEq)]
pub struct SimError {
    pub frame: u64,
    pub stage: Stage,
    pub source: CoreError,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {} ({} stage): {}", self.frame, self.stage, self.source)
    }
}

impl core::error::Error for SimError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub viscosity: SolveOptions,
    /// Divergence tolerance for the projection, 1/s.
    pub pressure_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { viscosity: SolveOptions::default(), pressure_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub dims: GridDims,
    pub params: FluidParams,
    pub gravity: [f64; 2],
    pub particles: ParticleSet,
    /// Walls and static bodies.
    pub scene_solid: SolidSdf2,
    /// Extra moving solid, e.g. an interactive pointer.
    pub pointer: Option<SolidSdf2>,
    pub options: SimOptions,
    /// Number of completed steps.
    pub frame: u64,
    /// Grid velocity after the last projection.
    pub grid_velocity: MacVelocity2,
}

impl Simulation {
    pub fn new(scene: &Scene) -> Result<Self> {
        let dims = scene.validate()?;
        let params = scene.params(&dims)?;
        let particles = scene.seed_particles(&dims);
        let solid = scene.solid_sdf(&dims);
        Ok(Self::from_parts(dims, params, scene.gravity, particles, solid))
    }

    pub fn from_parts(
        dims: GridDims,
        params: FluidParams,
        gravity: [f64; 2],
        particles: ParticleSet,
        scene_solid: SolidSdf2,
    ) -> Self {
        let grid_velocity = MacVelocity2::zeros(&dims);
        Self {
            dims,
            params,
            gravity,
            particles,
            scene_solid,
            pointer: None,
            options: SimOptions::default(),
            frame: 0,
            grid_velocity,
        }
    }

    /// Scene solid combined with the pointer, if any.
    pub fn solid(&self) -> Result<SolidSdf2> {
        match &self.pointer {
            Some(p) => union_solids(&self.scene_solid, p),
            None => Ok(self.scene_solid.clone()),
        }
    }

    /// Level set radius around each particle.
    pub fn particle_radius(&self) -> f64 {
        1.01 * 0.5 * self.dims.dx
    }

    pub fn step(&mut self, solver: &Solver, observer: &mut dyn StepObserver) -> core::result::Result<(), SimError> {
        let frame = self.frame;
        let fail = |stage| move |source| SimError { frame, stage, source };
        let dims = self.dims;
        let solid = self.solid().map_err(fail(Stage::Viscosity))?;

        observer.stage_begin(Stage::P2g);
        let (mut vel, mass) = p2g(&self.particles, &dims);
        observer.stage_end(Stage::P2g);

        observer.stage_begin(Stage::Extrapolate);
        extrapolate(&mut vel, &mass);
        observer.stage_end(Stage::Extrapolate);

        observer.stage_begin(Stage::Gravity);
        let [gx, gy] = self.gravity;
        let dt = self.params.dt;
        vel.u.as_mut_slice().iter_mut().for_each(|u| *u += dt * gx);
        vel.v.as_mut_slice().iter_mut().for_each(|v| *v += dt * gy);
        observer.stage_end(Stage::Gravity);

        observer.stage_begin(Stage::Volumes);
        let phi = LevelSet2::from_particles(&dims, &self.particles.positions, self.particle_radius());
        let vols = fluid_volumes(&phi, &dims).map_err(fail(Stage::Volumes))?;
        observer.stage_end(Stage::Volumes);

        observer.stage_begin(Stage::Viscosity);
        let (vel_new, input) = match solver {
            Solver::Classic => {
                let step = viscosity_step(&vel, &vols, &solid, &self.params, &dims, &self.options.viscosity)
                    .map_err(fail(Stage::Viscosity))?;
                (step.velocity, None)
            }
            Solver::Neural(net) => {
                let (delta, input) =
                    neural_delta(net, &vel, &vols, &solid, &self.params, &dims).map_err(fail(Stage::Viscosity))?;
                (vel.add_scaled(&delta, 1.0), Some(input))
            }
        };
        observer.stage_end(Stage::Viscosity);
        observer.viscosity(&ViscosityFrame {
            frame,
            dims: &dims,
            params: &self.params,
            vel_old: &vel,
            vel_new: &vel_new,
            vols: &vols,
            solid: &solid,
            input: input.as_ref(),
        });

        observer.stage_begin(Stage::Projection);
        let labels = CellLabels::classify(&dims, &solid, &self.particles);
        let projected = project(&vel_new, &labels, &solid, &self.params, &dims, self.options.pressure_tol)
            .map_err(fail(Stage::Projection))?;
        observer.stage_end(Stage::Projection);

        observer.stage_begin(Stage::G2p);
        let gathered = g2p(&projected.velocity, &self.particles, &dims);
        observer.stage_end(Stage::G2p);

        observer.stage_begin(Stage::Advect);
        self.particles = advect(&gathered, dt, &dims, &solid);
        observer.stage_end(Stage::Advect);

        self.grid_velocity = projected.velocity;
        self.frame += 1;
        Ok(())
    }
}

/// Network prediction of the viscosity velocity change, plus the unpadded
/// input stack it was computed from.
pub fn neural_delta(
    net: &Unet,
    vel: &MacVelocity2,
    vols: &VolumeFractions2,
    solid: &SolidSdf2,
    params: &FluidParams,
    dims: &GridDims,
) -> Result<(MacVelocity2, ChannelStack)> {
    let config = net.config();
    let mu = (config.in_channels == COEFF_CHANNELS).then(|| params.mu_cells(dims));
    let input = encode(vel, vols, solid, mu.as_ref(), dims)?;
    Ok((predict_from_stack(net, &input, dims)?, input))
}

/// Centered padding, forward pass, crop and decode.
pub fn predict_from_stack(net: &Unet, input: &ChannelStack, dims: &GridDims) -> Result<MacVelocity2> {
    let (sx, sy) = dims.sym_shape();
    let spec = PaddingSpec::centered(sx, sy, net.config().depth as u32);
    let padded = pad(input, &spec)?;
    let out = net.forward(&Tensor::from(padded))?;
    let cropped = unpad(&ChannelStack::from(out), &spec, sx, sy)?;
    decode(&cropped, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{UnetConfig, WeightManifest};
    use crate::scene::{FluidRegion, Shape};

    fn scene(mu: f64, gravity: [f64; 2]) -> Scene {
        let mut s = Scene::new([1.0, 1.0], [16, 16], 1000.0, mu);
        s.gravity = gravity;
        s.fluids.push(FluidRegion {
            shape: Shape::Disc { center: [0.5, 0.5], radius: 0.2 },
            velocity: [0.0, 0.0],
            color: 0,
        });
        s
    }

    #[test]
    fn resting_fluid_stays_at_rest() {
        let mut sim = Simulation::new(&scene(1.0, [0.0, 0.0])).unwrap();
        for _ in 0..10 {
            sim.step(&Solver::Classic, &mut ()).unwrap();
        }
        let vmax = sim.particles.velocities.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(vmax < 1e-8, "{vmax}");
        assert_eq!(sim.frame, 10);
    }

    #[test]
    fn free_fall_speed() {
        let mut sim = Simulation::new(&scene(2.0, [0.0, -9.8])).unwrap();
        let dt = sim.params.dt;
        for k in 1..=5 {
            sim.step(&Solver::Classic, &mut ()).unwrap();
            for v in &sim.particles.velocities {
                assert!((v[1] + 9.8 * dt * k as f64).abs() < 1e-6 && v[0].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_network_matches_inviscid_classic() {
        let s = scene(0.0, [0.0, -9.8]);
        let mut classic = Simulation::new(&s).unwrap();
        let mut neural = classic.clone();
        let config = UnetConfig::default_for(6, 2);
        let net = Unet::new(&WeightManifest::zeros(config).unwrap()).unwrap();
        classic.step(&Solver::Classic, &mut ()).unwrap();
        neural.step(&Solver::Neural(Box::new(net)), &mut ()).unwrap();
        assert_eq!(classic.particles, neural.particles);
        assert_eq!(classic.grid_velocity, neural.grid_velocity);
    }

    #[test]
    fn stages_reported_in_order() {
        struct Log(alloc::vec::Vec<(Stage, bool)>, usize);
        impl StepObserver for Log {
            fn stage_begin(&mut self, s: Stage) {
                self.0.push((s, true));
            }
            fn stage_end(&mut self, s: Stage) {
                self.0.push((s, false));
            }
            fn viscosity(&mut self, _: &ViscosityFrame<'_>) {
                self.1 += 1;
            }
        }
        let mut sim = Simulation::new(&scene(1.0, [0.0, -9.8])).unwrap();
        let mut log = Log(alloc::vec::Vec::new(), 0);
        sim.step(&Solver::Classic, &mut log).unwrap();
        let expected: alloc::vec::Vec<_> = Stage::ALL.iter().flat_map(|&s| [(s, true), (s, false)]).collect();
        assert_eq!(log.0, expected);
        assert_eq!(log.1, 1);
    }
}
