//! Declarative scenes: domain, material, fluid and solid shapes.
//!
//! With the `serde` feature a scene deserializes from JSON such as
//!
//! ```json
//! {
//!   "name": "drop",
//!   "domain": [2.0, 2.0],
//!   "grid": [50, 50],
//!   "rho": 1000.0,
//!   "mu": 1.0,
//!   "fluids": [{ "shape": { "disc": { "center": [1.0, 1.3], "radius": 0.3 } } }],
//!   "solids": [{ "shape": { "box": { "min": [0.0, 0.0], "max": [2.0, 0.2] } } }],
//!   "seed": 7
//! }
//! ```
//!
//! `dt` defaults to 1/300 s and `gravity` to (0, −9.8) m/s². Unknown keys are
//! rejected.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apic::{boundary_margin, ParticleSet};
use crate::error::{CoreError, Result};
use crate::grid::{Array2, GridDims, SolidSdf2};
use crate::viscosity::{FluidParams, MuField};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const DEFAULT_DT: f64 = 1.0 / 300.0;
pub const DEFAULT_GRAVITY: [f64; 2] = [0.0, -9.8];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase", deny_unknown_fields))]
pub enum Shape {
    Box { min: [f64; 2], max: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

impl Shape {
    /// Signed distance, negative inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Box { min, max } => {
                let c = [0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])];
                let half = [0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1])];
                let q = [libm::fabs(p[0] - c[0]) - half[0], libm::fabs(p[1] - c[1]) - half[1]];
                let outside = libm::hypot(q[0].max(0.0), q[1].max(0.0));
                outside + q[0].max(q[1]).min(0.0)
            }
            Shape::Disc { center, radius } => libm::hypot(p[0] - center[0], p[1] - center[1]) - radius,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.distance(p) <= 0.0
    }

    fn validate(&self, domain: [f64; 2]) -> Result<()> {
        let (lo, hi) = match *self {
            Shape::Box { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return Err(CoreError::InvalidInput(alloc::format!("box min {min:?} is not below max {max:?}")));
                }
                (min, max)
            }
            Shape::Disc { center, radius } => {
                if radius.is_nan() || radius <= 0.0 {
                    return Err(CoreError::InvalidInput(alloc::format!("disc radius must be positive, got {radius}")));
                }
                ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
            }
        };
        let slack = 1e-9 * domain[0].max(domain[1]);
        let inside = lo.iter().chain(&hi).all(|v| v.is_finite())
            && lo[0] >= -slack
            && lo[1] >= -slack
            && hi[0] <= domain[0] + slack
            && hi[1] <= domain[1] + slack;
        if !inside {
            return Err(CoreError::InvalidInput(alloc::format!("shape {self:?} extends outside the domain")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct FluidRegion {
    pub shape: Shape,
    #[cfg_attr(feature = "serde", serde(default))]
    pub velocity: [f64; 2],
    #[cfg_attr(feature = "serde", serde(default))]
    pub color: u8,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct SolidBody {
    pub shape: Shape,
    #[cfg_attr(feature = "serde", serde(default))]
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct MuRegion {
    pub shape: Shape,
    pub mu: f64,
}

/// Either one viscosity or a default overridden inside regions (later
/// regions win).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(untagged))]
pub enum MuSpec {
    Uniform(f64),
    Regions { default: f64, regions: Vec<MuRegion> },
}

#[cfg(feature = "serde")]
fn default_dt() -> f64 {
    DEFAULT_DT
}

#[cfg(feature = "serde")]
fn default_gravity() -> [f64; 2] {
    DEFAULT_GRAVITY
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct Scene {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    /// Width and height, m.
    pub domain: [f64; 2],
    /// Cell counts along x and y.
    pub grid: [usize; 2],
    #[cfg_attr(feature = "serde", serde(default = "default_dt"))]
    pub dt: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_gravity"))]
    pub gravity: [f64; 2],
    pub rho: f64,
    pub mu: MuSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub fluids: Vec<FluidRegion>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub solids: Vec<SolidBody>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    /// Seed only the left half and reflect it, so the particle set is
    /// exactly symmetric about `x = width / 2`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub mirror_x: bool,
}

impl Scene {
    /// Scene with defaults for everything but the domain, grid and material.
    pub fn new(domain: [f64; 2], grid: [usize; 2], rho: f64, mu: f64) -> Self {
        Self {
            name: String::new(),
            domain,
            grid,
            dt: DEFAULT_DT,
            gravity: DEFAULT_GRAVITY,
            rho,
            mu: MuSpec::Uniform(mu),
            fluids: Vec::new(),
            solids: Vec::new(),
            seed: 0,
            mirror_x: false,
        }
    }

    pub fn dims(&self) -> Result<GridDims> {
        let [w, h] = self.domain;
        let [nx, ny] = self.grid;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(CoreError::InvalidInput(alloc::format!("domain must be positive, got {:?}", self.domain)));
        }
        if nx == 0 || ny == 0 {
            return Err(CoreError::InvalidInput(alloc::format!("grid must be non-empty, got {:?}", self.grid)));
        }
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        if libm::fabs(dx - dy) > 1e-9 * dx {
            return Err(CoreError::InvalidInput(alloc::format!(
                "cells must be square: domain {:?} over grid {:?} gives {dx} x {dy}",
                self.domain,
                self.grid
            )));
        }
        GridDims::new(nx, ny, dx)
    }

    pub fn validate(&self) -> Result<GridDims> {
        let dims = self.dims()?;
        self.params(&dims)?.validate(&dims)?;
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(CoreError::InvalidInput("gravity must be finite".into()));
        }
        for f in &self.fluids {
            f.shape.validate(self.domain)?;
        }
        for s in &self.solids {
            s.shape.validate(self.domain)?;
        }
        if let MuSpec::Regions { regions, .. } = &self.mu {
            for r in regions {
                r.shape.validate(self.domain)?;
            }
        }
        Ok(dims)
    }

    pub fn params(&self, dims: &GridDims) -> Result<FluidParams> {
        let mu = match &self.mu {
            MuSpec::Uniform(mu) => MuField::Uniform(*mu),
            MuSpec::Regions { default, regions } => MuField::PerCell(Array2::from_fn(dims.nx, dims.ny, |i, j| {
                let c = dims.cell_center(i, j);
                regions.iter().rev().find(|r| r.shape.contains(c)).map_or(*default, |r| r.mu)
            })),
        };
        let params = FluidParams { rho: self.rho, mu, dt: self.dt };
        params.validate(dims)?;
        Ok(params)
    }

    /// Distance to the nearest solid, counting the domain walls. Solid
    /// velocity at each position is that of the nearest body.
    pub fn solid_sdf(&self, dims: &GridDims) -> SolidSdf2 {
        let (sx, sy) = dims.sym_shape();
        let (w, h) = (dims.width(), dims.height());
        let mut d = Array2::zeros(sx, sy);
        let mut velocity = Array2::filled(sx, sy, [0.0, 0.0]);
        for a in 0..sx {
            for b in 0..sy {
                let p = dims.sym_pos(a, b);
                let mut best = p[0].min(w - p[0]).min(p[1]).min(h - p[1]);
                let mut vel = [0.0, 0.0];
                for s in &self.solids {
                    let ds = s.shape.distance(p);
                    if ds < best {
                        best = ds;
                        vel = s.velocity;
                    }
                }
                d.set(a, b, best);
                velocity.set(a, b, vel);
            }
        }
        SolidSdf2 { d, velocity }
    }

    /// Four jittered particles per cell wherever a fluid shape covers the
    /// sample and no solid does. Deterministic in `seed`.
    pub fn seed_particles(&self, dims: &GridDims) -> ParticleSet {
        let solid = self.solid_sdf(dims);
        let margin = boundary_margin(dims);
        let dx = dims.dx;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut particles = ParticleSet::new(self.rho * dx * dx / 4.0);
        let half_w = 0.5 * dims.width();
        for i in 0..dims.nx {
            for j in 0..dims.ny {
                for s in 0..4 {
                    let jitter = [unit(&mut rng) - 0.5, unit(&mut rng) - 0.5];
                    let p = [
                        (i as f64 + 0.25 + 0.5 * (s % 2) as f64 + 0.25 * jitter[0]) * dx,
                        (j as f64 + 0.25 + 0.5 * (s / 2) as f64 + 0.25 * jitter[1]) * dx,
                    ];
                    if self.mirror_x && p[0] >= half_w {
                        continue;
                    }
                    let Some(region) = self.fluids.iter().rev().find(|f| f.shape.contains(p)) else {
                        continue;
                    };
                    if solid.sample(dims, p) < margin {
                        continue;
                    }
                    particles.push(p, region.velocity, region.color);
                    if self.mirror_x {
                        let q = [dims.width() - p[0], p[1]];
                        let v = [-region.velocity[0], region.velocity[1]];
                        particles.push(q, v, region.color);
                    }
                }
            }
        }
        particles
    }
}

/// Uniform sample in `[0, 1)`.
fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A disc-shaped rigid pointer moving at `velocity`.
pub fn pointer_to_solid(dims: &GridDims, center: [f64; 2], radius: f64, velocity: [f64; 2]) -> SolidSdf2 {
    let mut s = SolidSdf2::from_fn(dims, |x, y| libm::hypot(x - center[0], y - center[1]) - radius);
    s.velocity = Array2::filled(s.d.nx(), s.d.ny(), velocity);
    s
}

/// Pointwise union of two solids: the smaller distance and its velocity.
pub fn union_solids(a: &SolidSdf2, b: &SolidSdf2) -> Result<SolidSdf2> {
    if a.d.shape() != b.d.shape() {
        return Err(CoreError::Shape("solid fields differ in shape".into()));
    }
    let mut out = a.clone();
    for k in 0..out.d.as_slice().len() {
        if b.d.as_slice()[k] < out.d.as_slice()[k] {
            out.d.as_mut_slice()[k] = b.d.as_slice()[k];
            out.velocity.as_mut_slice()[k] = b.velocity.as_slice()[k];
        }
    }
    Ok(out)
}
