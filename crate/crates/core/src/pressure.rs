//! Pressure projection onto discretely divergence-free velocity.
//!
//! Five-point Poisson stencil over FLUID cells with `p = 0` in AIR cells and
//! no flux change across SOLID cells or the domain boundary.

use alloc::vec;
use alloc::vec::Vec;

use crate::apic::ParticleSet;
use crate::error::{CoreError, Result};
use crate::grid::{Array2, GridDims, MacVelocity2, SolidSdf2};
use crate::sparse::{pcg, CsrBuilder, PcgStats};
use crate::viscosity::FluidParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellKind {
    Fluid,
    #[default]
    Air,
    Solid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellLabels {
    pub kinds: Array2<CellKind>,
}

impl CellLabels {
    pub fn all(dims: &GridDims, kind: CellKind) -> Self {
        Self { kinds: Array2::filled(dims.nx, dims.ny, kind) }
    }

    /// SOLID where the solid distance at the cell center is non-positive,
    /// FLUID where a particle lies in the cell, AIR otherwise.
    pub fn classify(dims: &GridDims, solid: &SolidSdf2, particles: &ParticleSet) -> Self {
        let mut kinds = Array2::from_fn(dims.nx, dims.ny, |i, j| {
            if solid.d.get(2 * i + 1, 2 * j + 1) <= 0.0 {
                CellKind::Solid
            } else {
                CellKind::Air
            }
        });
        for p in &particles.positions {
            let i = (libm::floor(p[0] / dims.dx) as isize).clamp(0, dims.nx as isize - 1) as usize;
            let j = (libm::floor(p[1] / dims.dx) as isize).clamp(0, dims.ny as isize - 1) as usize;
            if kinds.get(i, j) == CellKind::Air {
                kinds.set(i, j, CellKind::Fluid);
            }
        }
        Self { kinds }
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.kinds.as_slice().iter().filter(|&&k| k == kind).count()
    }

    fn kind(&self, i: isize, j: isize) -> CellKind {
        let (nx, ny) = self.kinds.shape();
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            CellKind::Solid
        } else {
            self.kinds.get(i as usize, j as usize)
        }
    }
}

/// Discrete divergence per cell.
pub fn divergence(vel: &MacVelocity2, dims: &GridDims) -> Array2 {
    Array2::from_fn(dims.nx, dims.ny, |i, j| {
        (vel.u.get(i + 1, j) - vel.u.get(i, j) + vel.v.get(i, j + 1) - vel.v.get(i, j)) / dims.dx
    })
}

/// Set faces touching a SOLID cell or the domain boundary to the solid
/// velocity.
pub fn enforce_solid_faces(vel: &mut MacVelocity2, labels: &CellLabels, solid: &SolidSdf2, dims: &GridDims) {
    for i in 0..=dims.nx {
        for j in 0..dims.ny {
            if labels.kind(i as isize - 1, j as isize) == CellKind::Solid
                || labels.kind(i as isize, j as isize) == CellKind::Solid
            {
                vel.u.set(i, j, solid.velocity.get(2 * i, 2 * j + 1)[0]);
            }
        }
    }
    for i in 0..dims.nx {
        for j in 0..=dims.ny {
            if labels.kind(i as isize, j as isize - 1) == CellKind::Solid
                || labels.kind(i as isize, j as isize) == CellKind::Solid
            {
                vel.v.set(i, j, solid.velocity.get(2 * i + 1, 2 * j)[1]);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub velocity: MacVelocity2,
    pub pressure: Array2,
    pub stats: PcgStats,
}

/// Make `vel` divergence-free on FLUID cells to within `tol` (in 1/s).
///
/// Solid faces take the solid velocity first; with no FLUID cell the input
/// is returned unchanged.
pub fn project(
    vel: &MacVelocity2,
    labels: &CellLabels,
    solid: &SolidSdf2,
    params: &FluidParams,
    dims: &GridDims,
    tol: f64,
) -> Result<Projection> {
    vel.check(dims)?;
    solid.check(dims)?;
    params.validate(dims)?;
    if labels.kinds.shape() != (dims.nx, dims.ny) {
        return Err(CoreError::Shape("cell labels do not match grid".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(CoreError::InvalidInput(alloc::format!("divergence tolerance must be positive, got {tol}")));
    }
    let zero_stats = PcgStats { iterations: 0, relative_residual: 0.0 };
    let fluid_count = labels.count(CellKind::Fluid);
    if fluid_count == 0 {
        return Ok(Projection { velocity: vel.clone(), pressure: Array2::zeros(dims.nx, dims.ny), stats: zero_stats });
    }
    let mut out = vel.clone();
    enforce_solid_faces(&mut out, labels, solid, dims);

    let mut index = Array2::filled(dims.nx, dims.ny, usize::MAX);
    let mut cells = Vec::with_capacity(fluid_count);
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            if labels.kinds.get(i, j) == CellKind::Fluid {
                index.set(i, j, cells.len());
                cells.push((i, j));
            }
        }
    }
    let scale = params.dt / (params.rho * dims.dx * dims.dx);
    let div = divergence(&out, dims);
    let mut builder = CsrBuilder::with_capacity(cells.len(), 5 * cells.len());
    let mut rhs = Vec::with_capacity(cells.len());
    for &(i, j) in &cells {
        let mut diag = 0.0;
        for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (a, b) = (i as isize + di, j as isize + dj);
            match labels.kind(a, b) {
                CellKind::Solid => {}
                CellKind::Air => diag += scale,
                CellKind::Fluid => {
                    diag += scale;
                    builder.add(index.get(a as usize, b as usize), -scale);
                }
            }
        }
        builder.add(index.get(i, j), diag);
        builder.finish_row();
        rhs.push(-div.get(i, j));
    }
    let matrix = builder.build();
    let rhs_norm = libm::sqrt(rhs.iter().map(|r| r * r).sum::<f64>());
    let mut p = vec![0.0; cells.len()];
    let stats = if rhs_norm <= tol {
        zero_stats
    } else {
        pcg(&matrix, &rhs, &mut p, (tol / rhs_norm).min(0.5), 20 * cells.len().max(10))?
    };

    let mut pressure = Array2::zeros(dims.nx, dims.ny);
    for (&(i, j), &value) in cells.iter().zip(&p) {
        pressure.set(i, j, value);
    }
    let grad_scale = params.dt / (params.rho * dims.dx);
    for i in 0..=dims.nx {
        for j in 0..dims.ny {
            let (l, r) = (labels.kind(i as isize - 1, j as isize), labels.kind(i as isize, j as isize));
            if l == CellKind::Solid || r == CellKind::Solid || (l != CellKind::Fluid && r != CellKind::Fluid) {
                continue;
            }
            let pl = if l == CellKind::Fluid { pressure.get(i - 1, j) } else { 0.0 };
            let pr = if r == CellKind::Fluid { pressure.get(i, j) } else { 0.0 };
            out.u[(i, j)] -= grad_scale * (pr - pl);
        }
    }
    for i in 0..dims.nx {
        for j in 0..=dims.ny {
            let (b, t) = (labels.kind(i as isize, j as isize - 1), labels.kind(i as isize, j as isize));
            if b == CellKind::Solid || t == CellKind::Solid || (b != CellKind::Fluid && t != CellKind::Fluid) {
                continue;
            }
            let pb = if b == CellKind::Fluid { pressure.get(i, j - 1) } else { 0.0 };
            let pt = if t == CellKind::Fluid { pressure.get(i, j) } else { 0.0 };
            out.v[(i, j)] -= grad_scale * (pt - pb);
        }
    }
    Ok(Projection { velocity: out, pressure, stats })
}
