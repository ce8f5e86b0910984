//! Particles and affine particle-in-cell transfers on the MAC grid.
//!
//! Transfers use the quadratic B-spline kernel, for which the APIC inertia
//! matrix is the constant `(Δx²/4) I`.

use alloc::vec::Vec;

use crate::grid::{Array2, GridDims, MacVelocity2, SolidSdf2};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    /// Per-particle affine velocity matrix `C`, row-major: `C[r][c]`.
    pub affine: Vec<[[f64; 2]; 2]>,
    pub color: Vec<u8>,
    /// Mass of every particle, kg.
    pub mass: f64,
}

impl ParticleSet {
    pub fn new(mass: f64) -> Self {
        Self { mass, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: [f64; 2], velocity: [f64; 2], color: u8) {
        self.positions.push(position);
        self.velocities.push(velocity);
        self.affine.push([[0.0; 2]; 2]);
        self.color.push(color);
    }

    pub fn momentum(&self) -> [f64; 2] {
        self.velocities.iter().fold([0.0, 0.0], |acc, v| [acc[0] + self.mass * v[0], acc[1] + self.mass * v[1]])
    }
}

/// Quadratic B-spline.
#[inline]
fn kernel(r: f64) -> f64 {
    let r = libm::fabs(r);
    if r < 0.5 {
        0.75 - r * r
    } else if r < 1.5 {
        let t = 1.5 - r;
        0.5 * t * t
    } else {
        0.0
    }
}

/// The 3×3 block of samples of one face family that a particle touches.
///
/// `offset` is the position of sample `(0, 0)` in cell units; `shape` is the
/// family's array shape. Calls `f(i, j, weight, [dx, dy])` for in-range
/// samples, where `[dx, dy]` is the sample position minus the particle.
fn for_each_stencil(
    dims: &GridDims,
    p: [f64; 2],
    offset: [f64; 2],
    shape: (usize, usize),
    mut f: impl FnMut(usize, usize, f64, [f64; 2]),
) {
    let gx = p[0] / dims.dx - offset[0];
    let gy = p[1] / dims.dx - offset[1];
    let bx = libm::floor(gx - 0.5) as isize;
    let by = libm::floor(gy - 0.5) as isize;
    for a in 0..3 {
        let i = bx + a;
        if i < 0 || i >= shape.0 as isize {
            continue;
        }
        let rx = i as f64 - gx;
        let wx = kernel(rx);
        for b in 0..3 {
            let j = by + b;
            if j < 0 || j >= shape.1 as isize {
                continue;
            }
            let ry = j as f64 - gy;
            let w = wx * kernel(ry);
            f(i as usize, j as usize, w, [rx * dims.dx, ry * dims.dx]);
        }
    }
}

const U_OFFSET: [f64; 2] = [0.0, 0.5];
const V_OFFSET: [f64; 2] = [0.5, 0.0];

/// Mass transferred to each face family.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMass {
    pub u: Array2,
    pub v: Array2,
}

/// Particle-to-grid: each face gets the mass-weighted average of
/// `v_p + C_p (x_face − x_p)`. Faces that receive no mass get velocity 0 and
/// mass 0.
///
/// Averages are accumulated as running means, so particles that all carry
/// the same velocity reproduce it bit for bit.
pub fn p2g(particles: &ParticleSet, dims: &GridDims) -> (MacVelocity2, FaceMass) {
    let mut vel = MacVelocity2::zeros(dims);
    let (ux, uy) = dims.u_shape();
    let (vx, vy) = dims.v_shape();
    let mut mass_u = Array2::zeros(ux, uy);
    let mut mass_v = Array2::zeros(vx, vy);
    let m = particles.mass;
    for (k, &p) in particles.positions.iter().enumerate() {
        let vp = particles.velocities[k];
        let c = particles.affine[k];
        for_each_stencil(dims, p, U_OFFSET, (ux, uy), |i, j, w, d| {
            let value = vp[0] + (c[0][0] * d[0] + c[0][1] * d[1]);
            running_mean(&mut vel.u[(i, j)], &mut mass_u[(i, j)], w * m, value);
        });
        for_each_stencil(dims, p, V_OFFSET, (vx, vy), |i, j, w, d| {
            let value = vp[1] + (c[1][0] * d[0] + c[1][1] * d[1]);
            running_mean(&mut vel.v[(i, j)], &mut mass_v[(i, j)], w * m, value);
        });
    }
    (vel, FaceMass { u: mass_u, v: mass_v })
}

#[inline]
fn running_mean(mean: &mut f64, total: &mut f64, weight: f64, value: f64) {
    if weight <= 0.0 {
        return;
    }
    *total += weight;
    *mean += (weight / *total) * (value - *mean);
}

/// Fill faces that received no mass with the mean of their already-valid
/// 4-neighbors, one layer at a time, until every face is filled or no
/// progress can be made. Faces left unreached keep 0.
pub fn extrapolate(vel: &mut MacVelocity2, mass: &FaceMass) {
    extrapolate_family(&mut vel.u, &mass.u);
    extrapolate_family(&mut vel.v, &mass.v);
}

fn extrapolate_family(field: &mut Array2, mass: &Array2) {
    let (nx, ny) = field.shape();
    let mut valid: Array2<bool> = mass.map(|m| m > 0.0);
    let mut frontier = Vec::new();
    loop {
        frontier.clear();
        for i in 0..nx {
            for j in 0..ny {
                if valid.get(i, j) {
                    continue;
                }
                let mut mean = 0.0;
                let mut count = 0.0;
                let mut visit = |a: usize, b: usize| {
                    if valid.get(a, b) {
                        running_mean(&mut mean, &mut count, 1.0, field.get(a, b));
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < nx {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < ny {
                    visit(i, j + 1);
                }
                if count > 0.0 {
                    frontier.push((i, j, mean));
                }
            }
        }
        if frontier.is_empty() {
            break;
        }
        for &(i, j, value) in &frontier {
            field.set(i, j, value);
            valid.set(i, j, true);
        }
    }
}

/// Grid-to-particle: velocities and affine matrices gathered from the faces.
/// Weights are renormalized over the in-range part of the stencil.
///
/// `C` is accumulated from `q − v_p` rather than `q`; the two agree for a
/// full stencil, and the former is exactly zero on a uniform field.
pub fn g2p(grid: &MacVelocity2, particles: &ParticleSet, dims: &GridDims) -> ParticleSet {
    let mut out = particles.clone();
    let scale = 4.0 / (dims.dx * dims.dx);
    for (k, &p) in particles.positions.iter().enumerate() {
        let mut vel = [0.0; 2];
        let (mut wsum_u, mut wsum_v) = (0.0, 0.0);
        for_each_stencil(dims, p, U_OFFSET, grid.u.shape(), |i, j, w, _| {
            running_mean(&mut vel[0], &mut wsum_u, w, grid.u.get(i, j));
        });
        for_each_stencil(dims, p, V_OFFSET, grid.v.shape(), |i, j, w, _| {
            running_mean(&mut vel[1], &mut wsum_v, w, grid.v.get(i, j));
        });
        let mut c = [[0.0; 2]; 2];
        for_each_stencil(dims, p, U_OFFSET, grid.u.shape(), |i, j, w, d| {
            let q = grid.u.get(i, j) - vel[0];
            c[0][0] += w * q * d[0];
            c[0][1] += w * q * d[1];
        });
        for_each_stencil(dims, p, V_OFFSET, grid.v.shape(), |i, j, w, d| {
            let q = grid.v.get(i, j) - vel[1];
            c[1][0] += w * q * d[0];
            c[1][1] += w * q * d[1];
        });
        for (row, wsum) in c.iter_mut().zip([wsum_u, wsum_v]) {
            if wsum > 0.0 {
                row[0] *= scale / wsum;
                row[1] *= scale / wsum;
            }
        }
        out.velocities[k] = vel;
        out.affine[k] = c;
    }
    out
}

/// Distance kept between particles and solid or domain boundaries.
pub fn boundary_margin(dims: &GridDims) -> f64 {
    1e-3 * dims.dx
}

/// Forward-Euler advection, then projection out of solids along the solid
/// distance gradient and clamping into the domain. Velocity components
/// pointing into a boundary a particle was pushed off are removed.
pub fn advect(particles: &ParticleSet, dt: f64, dims: &GridDims, solid: &SolidSdf2) -> ParticleSet {
    let mut out = particles.clone();
    let margin = boundary_margin(dims);
    let (w, h) = (dims.width(), dims.height());
    for k in 0..out.len() {
        let v = out.velocities[k];
        let mut x = [out.positions[k][0] + dt * v[0], out.positions[k][1] + dt * v[1]];
        let mut vel = v;
        for _ in 0..8 {
            if x[0] < margin || x[0] > w - margin {
                x[0] = x[0].clamp(margin, w - margin);
                vel[0] = 0.0;
            }
            if x[1] < margin || x[1] > h - margin {
                x[1] = x[1].clamp(margin, h - margin);
                vel[1] = 0.0;
            }
            let d = solid.sample(dims, x);
            if d >= 0.0 {
                break;
            }
            let g = solid.gradient(dims, x);
            let norm = libm::hypot(g[0], g[1]);
            if norm == 0.0 {
                break;
            }
            let n = [g[0] / norm, g[1] / norm];
            let push = (margin - d) / norm;
            x = [x[0] + push * n[0], x[1] + push * n[1]];
            let vn = vel[0] * n[0] + vel[1] * n[1];
            if vn < 0.0 {
                vel = [vel[0] - vn * n[0], vel[1] - vn * n[1]];
            }
        }
        out.positions[k] = x;
        out.velocities[k] = vel;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims::new(10, 8, 0.1).unwrap()
    }

    #[test]
    fn kernel_partition_of_unity() {
        for k in 0..20 {
            let x = 0.37 + k as f64 * 0.031;
            let base = libm::floor(x - 0.5);
            let s: f64 = (0..3).map(|a| kernel(base + a as f64 - x)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_particle_reproduces_velocity() {
        let d = dims();
        let mut ps = ParticleSet::new(0.01);
        ps.push([0.43, 0.37], [1.0, 0.0], 0);
        let (vel, mass) = p2g(&ps, &d);
        let mut covered = 0;
        for (v, m) in vel.u.as_slice().iter().zip(mass.u.as_slice()) {
            if *m > 0.0 {
                covered += 1;
                assert_eq!(*v, 1.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(covered, 9);
    }

    #[test]
    fn constant_grid_gathers_exactly() {
        let d = dims();
        let grid = MacVelocity2::from_fn(&d, |_, _| [0.7, -1.1]);
        let mut ps = ParticleSet::new(1.0);
        ps.push([0.31, 0.42], [0.0, 0.0], 0);
        ps.push([0.02, 0.77], [0.0, 0.0], 0);
        let out = g2p(&grid, &ps, &d);
        for k in 0..2 {
            assert!((out.velocities[k][0] - 0.7).abs() < 1e-14);
            assert!((out.velocities[k][1] + 1.1).abs() < 1e-14);
        }
        for row in out.affine[0] {
            for c in row {
                assert!(c.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extrapolation_fills_everything() {
        let d = dims();
        let mut ps = ParticleSet::new(1.0);
        ps.push([0.5, 0.4], [2.0, -3.0], 0);
        let (mut vel, mass) = p2g(&ps, &d);
        extrapolate(&mut vel, &mass);
        assert!(vel.u.as_slice().iter().all(|&x| x == 2.0));
        assert!(vel.v.as_slice().iter().all(|&x| x == -3.0));
    }

    #[test]
    fn advect_examples() {
        let d = dims();
        let solid = SolidSdf2::empty(&d);
        let mut ps = ParticleSet::new(1.0);
        ps.push([0.3, 0.3], [0.0, 0.0], 0);
        ps.push([0.5, 0.5], [1.0, 0.0], 0);
        let out = advect(&ps, 0.1, &d, &solid);
        assert_eq!(out.positions[0], [0.3, 0.3]);
        assert!((out.positions[1][0] - 0.6).abs() < 1e-15);
        let same = advect(&ps, 0.0, &d, &solid);
        assert_eq!(same.positions, ps.positions);
    }

    #[test]
    fn advect_clamps_to_domain() {
        let d = dims();
        let mut ps = ParticleSet::new(1.0);
        ps.push([0.95, 0.4], [5.0, 1.0], 0);
        let out = advect(&ps, 0.1, &d, &SolidSdf2::empty(&d));
        let p = out.positions[0];
        assert!(p[0] <= d.width() && p[0] >= d.width() - 2.0 * boundary_margin(&d));
        assert_eq!(out.velocities[0][0], 0.0);
        assert_eq!(out.velocities[0][1], 1.0);
    }
}
