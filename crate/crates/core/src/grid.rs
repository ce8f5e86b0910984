//! Staggered (MAC) grid fields and the fluid/solid volume constructions.
//!
//! Index conventions used throughout the crate, for a grid of `nx × ny`
//! square cells of width `dx`:
//!
//! * cell `(i, j)` is centered at `((i + ½)dx, (j + ½)dx)`,
//! * node `(i, j)` sits at `(i dx, j dx)`, shape `(nx + 1, ny + 1)`,
//! * u-face `(i, j)` sits at `(i dx, (j + ½)dx)`, shape `(nx + 1, ny)`,
//! * v-face `(i, j)` sits at `((i + ½)dx, j dx)`, shape `(nx, ny + 1)`,
//! * symmetric-grid position `(a, b)` sits at `(a dx/2, b dx/2)`, shape
//!   `(2nx + 1, 2ny + 1)`.
//!
//! All 2D arrays are x-major: element `(i, j)` lives at `i * ny + j`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{CoreError, Result};

/// Dense x-major 2D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array2<T = f64> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Array2<T> {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self::filled(nx, ny, T::default())
    }
}

impl<T: Copy> Array2<T> {
    pub fn filled(nx: usize, ny: usize, value: T) -> Self {
        Self { nx, ny, data: vec![value; nx * ny] }
    }

    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                data.push(f(i, j));
            }
        }
        Self { nx, ny, data }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(CoreError::Shape(alloc::format!(
                "array of {} elements cannot have shape ({nx}, {ny})",
                data.len()
            )));
        }
        Ok(Self { nx, ny, data })
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.ny + j]
    }

    /// Element at `(i, j)` with both indices clamped into range.
    #[inline]
    pub fn get_clamped(&self, i: isize, j: isize) -> T {
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        self.get(i, j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.ny + j] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Array2<U> {
        Array2 { nx: self.nx, ny: self.ny, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Swap the two axes.
    pub fn transposed(&self) -> Self {
        Array2::from_fn(self.ny, self.nx, |i, j| self.get(j, i))
    }

    /// Reverse the x axis.
    pub fn flipped_x(&self) -> Self {
        Array2::from_fn(self.nx, self.ny, |i, j| self.get(self.nx - 1 - i, j))
    }
}

impl<T> Index<(usize, usize)> for Array2<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ny + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Array2<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ny + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    /// Cell width in meters; cells are square.
    pub dx: f64,
}

impl GridDims {
    pub fn new(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        let dims = Self { nx, ny, dx };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(CoreError::InvalidInput(alloc::format!(
                "grid needs at least 2x2 cells, got {}x{}",
                self.nx,
                self.ny
            )));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(CoreError::InvalidInput(alloc::format!("cell width must be positive, got {}", self.dx)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dx
    }

    pub fn u_shape(&self) -> (usize, usize) {
        (self.nx + 1, self.ny)
    }

    pub fn v_shape(&self) -> (usize, usize) {
        (self.nx, self.ny + 1)
    }

    pub fn node_shape(&self) -> (usize, usize) {
        (self.nx + 1, self.ny + 1)
    }

    pub fn sym_shape(&self) -> (usize, usize) {
        (2 * self.nx + 1, 2 * self.ny + 1)
    }

    /// Total number of velocity samples, u-faces first.
    pub fn face_count(&self) -> usize {
        (self.nx + 1) * self.ny + self.nx * (self.ny + 1)
    }

    pub fn u_pos(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.dx, (j as f64 + 0.5) * self.dx]
    }

    pub fn v_pos(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.dx, j as f64 * self.dx]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dx]
    }

    pub fn node_pos(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.dx, j as f64 * self.dx]
    }

    pub fn sym_pos(&self, a: usize, b: usize) -> [f64; 2] {
        [a as f64 * 0.5 * self.dx, b as f64 * 0.5 * self.dx]
    }

    pub fn transposed(&self) -> Self {
        Self { nx: self.ny, ny: self.nx, dx: self.dx }
    }
}

/// Staggered velocity: `u` on x-faces `(nx+1, ny)`, `v` on y-faces `(nx, ny+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacVelocity2 {
    pub u: Array2,
    pub v: Array2,
}

impl MacVelocity2 {
    pub fn zeros(dims: &GridDims) -> Self {
        let (ux, uy) = dims.u_shape();
        let (vx, vy) = dims.v_shape();
        Self { u: Array2::zeros(ux, uy), v: Array2::zeros(vx, vy) }
    }

    /// Sample `f(x, y) -> [u, v]` at the face centers.
    pub fn from_fn(dims: &GridDims, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let (ux, uy) = dims.u_shape();
        let (vx, vy) = dims.v_shape();
        let u = Array2::from_fn(ux, uy, |i, j| {
            let p = dims.u_pos(i, j);
            f(p[0], p[1])[0]
        });
        let v = Array2::from_fn(vx, vy, |i, j| {
            let p = dims.v_pos(i, j);
            f(p[0], p[1])[1]
        });
        Self { u, v }
    }

    pub fn check(&self, dims: &GridDims) -> Result<()> {
        if self.u.shape() != dims.u_shape() || self.v.shape() != dims.v_shape() {
            return Err(CoreError::Shape(alloc::format!(
                "velocity shapes u {:?} v {:?} do not match grid {}x{}",
                self.u.shape(),
                self.v.shape(),
                dims.nx,
                dims.ny
            )));
        }
        Ok(())
    }

    /// Flattened view in dof order: all u-faces, then all v-faces.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.u.as_slice().len() + self.v.as_slice().len());
        out.extend_from_slice(self.u.as_slice());
        out.extend_from_slice(self.v.as_slice());
        out
    }

    pub fn from_slice(dims: &GridDims, values: &[f64]) -> Result<Self> {
        let nu = (dims.nx + 1) * dims.ny;
        if values.len() != dims.face_count() {
            return Err(CoreError::Shape(alloc::format!(
                "expected {} face values, got {}",
                dims.face_count(),
                values.len()
            )));
        }
        let (ux, uy) = dims.u_shape();
        let (vx, vy) = dims.v_shape();
        Ok(Self {
            u: Array2::from_vec(ux, uy, values[..nu].to_vec())?,
            v: Array2::from_vec(vx, vy, values[nu..].to_vec())?,
        })
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &MacVelocity2, scale: f64) -> MacVelocity2 {
        let mut out = self.clone();
        for (a, b) in out.u.as_mut_slice().iter_mut().zip(other.u.as_slice()) {
            *a += scale * b;
        }
        for (a, b) in out.v.as_mut_slice().iter_mut().zip(other.v.as_slice()) {
            *a += scale * b;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.u.as_slice().iter().chain(self.v.as_slice()).fold(0.0f64, |m, &x| m.max(libm::fabs(x)))
    }

    pub fn is_finite(&self) -> bool {
        self.u.as_slice().iter().chain(self.v.as_slice()).all(|x| x.is_finite())
    }

    /// Reflection `x -> width - x`: the u-component changes sign.
    pub fn mirrored_x(&self) -> MacVelocity2 {
        MacVelocity2 { u: self.u.flipped_x().map(|x| -x), v: self.v.flipped_x() }
    }

    /// Swap the axes: the new u is the old v transposed and vice versa.
    pub fn transposed(&self) -> MacVelocity2 {
        MacVelocity2 { u: self.v.transposed(), v: self.u.transposed() }
    }
}

/// Fluid level set sampled at cell corners; negative inside the fluid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet2 {
    pub phi: Array2,
}

impl LevelSet2 {
    pub fn from_fn(dims: &GridDims, f: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = dims.node_shape();
        Self {
            phi: Array2::from_fn(nx, ny, |i, j| {
                let p = dims.node_pos(i, j);
                f(p[0], p[1])
            }),
        }
    }

    /// Union of discs of the given radius around each particle, sampled at
    /// the nodes. Nodes with no particle within two cells get a capped
    /// positive distance; no redistancing is done.
    pub fn from_particles(dims: &GridDims, positions: &[[f64; 2]], radius: f64) -> Self {
        let (nnx, nny) = dims.node_shape();
        let cap = 2.0 * dims.dx;
        let mut phi = Array2::filled(nnx, nny, cap);
        let reach = libm::ceil(2.0 + radius / dims.dx) as isize;
        for p in positions {
            let ci = libm::floor(p[0] / dims.dx) as isize;
            let cj = libm::floor(p[1] / dims.dx) as isize;
            for i in (ci - reach + 1).max(0)..=(ci + reach).min(dims.nx as isize) {
                for j in (cj - reach + 1).max(0)..=(cj + reach).min(dims.ny as isize) {
                    let q = dims.node_pos(i as usize, j as usize);
                    let d = libm::hypot(q[0] - p[0], q[1] - p[1]) - radius;
                    let cur = &mut phi[(i as usize, j as usize)];
                    if d < *cur {
                        *cur = d;
                    }
                }
            }
        }
        Self { phi }
    }

    /// Level set values at every symmetric-grid position: nodes directly,
    /// edge midpoints by linear and cell centers by bilinear interpolation.
    pub fn sample_sym(&self) -> Array2 {
        let (nnx, nny) = self.phi.shape();
        let phi = &self.phi;
        Array2::from_fn(2 * nnx - 1, 2 * nny - 1, |a, b| {
            let (i, j) = (a / 2, b / 2);
            match (a % 2, b % 2) {
                (0, 0) => phi.get(i, j),
                (1, 0) => 0.5 * (phi.get(i, j) + phi.get(i + 1, j)),
                (0, 1) => 0.5 * (phi.get(i, j) + phi.get(i, j + 1)),
                _ => 0.25 * (phi.get(i, j) + phi.get(i + 1, j) + phi.get(i, j + 1) + phi.get(i + 1, j + 1)),
            }
        })
    }
}

/// Solid signed distance (non-positive inside solid) and solid velocity,
/// both sampled at every symmetric-grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidSdf2 {
    pub d: Array2,
    pub velocity: Array2<[f64; 2]>,
}

impl SolidSdf2 {
    /// Static solid described by `f(x, y)`.
    pub fn from_fn(dims: &GridDims, f: impl Fn(f64, f64) -> f64) -> Self {
        let (sx, sy) = dims.sym_shape();
        Self {
            d: Array2::from_fn(sx, sy, |a, b| {
                let p = dims.sym_pos(a, b);
                f(p[0], p[1])
            }),
            velocity: Array2::filled(sx, sy, [0.0, 0.0]),
        }
    }

    /// No solid anywhere: distance equal to the domain diagonal.
    pub fn empty(dims: &GridDims) -> Self {
        let far = libm::hypot(dims.width(), dims.height());
        Self::from_fn(dims, |_, _| far)
    }

    pub fn check(&self, dims: &GridDims) -> Result<()> {
        if self.d.shape() != dims.sym_shape() || self.velocity.shape() != dims.sym_shape() {
            return Err(CoreError::Shape(alloc::format!(
                "solid field shape {:?} does not match symmetric grid {:?}",
                self.d.shape(),
                dims.sym_shape()
            )));
        }
        Ok(())
    }

    /// Bilinear interpolation of the distance at a physical position, with
    /// the position clamped into the domain.
    pub fn sample(&self, dims: &GridDims, x: [f64; 2]) -> f64 {
        let (a, b, fa, fb) = self.cell_of(dims, x);
        let d = &self.d;
        let d00 = d.get(a, b);
        let d10 = d.get(a + 1, b);
        let d01 = d.get(a, b + 1);
        let d11 = d.get(a + 1, b + 1);
        (1.0 - fa) * ((1.0 - fb) * d00 + fb * d01) + fa * ((1.0 - fb) * d10 + fb * d11)
    }

    /// Gradient of the bilinear interpolant.
    pub fn gradient(&self, dims: &GridDims, x: [f64; 2]) -> [f64; 2] {
        let (a, b, fa, fb) = self.cell_of(dims, x);
        let h = 0.5 * dims.dx;
        let d = &self.d;
        let d00 = d.get(a, b);
        let d10 = d.get(a + 1, b);
        let d01 = d.get(a, b + 1);
        let d11 = d.get(a + 1, b + 1);
        let gx = ((1.0 - fb) * (d10 - d00) + fb * (d11 - d01)) / h;
        let gy = ((1.0 - fa) * (d01 - d00) + fa * (d11 - d10)) / h;
        [gx, gy]
    }

    fn cell_of(&self, dims: &GridDims, x: [f64; 2]) -> (usize, usize, f64, f64) {
        let h = 0.5 * dims.dx;
        let (sx, sy) = self.d.shape();
        let gx = (x[0] / h).clamp(0.0, (sx - 1) as f64);
        let gy = (x[1] / h).clamp(0.0, (sy - 1) as f64);
        let a = (libm::floor(gx) as usize).min(sx - 2);
        let b = (libm::floor(gy) as usize).min(sy - 2);
        (a, b, gx - a as f64, gy - b as f64)
    }
}

/// Fluid volume fractions at every staggered location, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFractions2 {
    pub cell: Array2,
    pub u_face: Array2,
    pub v_face: Array2,
    pub node: Array2,
}

impl VolumeFractions2 {
    /// Every location completely full.
    pub fn full(dims: &GridDims) -> Self {
        let (ux, uy) = dims.u_shape();
        let (vx, vy) = dims.v_shape();
        let (nx, ny) = dims.node_shape();
        Self {
            cell: Array2::filled(dims.nx, dims.ny, 1.0),
            u_face: Array2::filled(ux, uy, 1.0),
            v_face: Array2::filled(vx, vy, 1.0),
            node: Array2::filled(nx, ny, 1.0),
        }
    }

    pub fn check(&self, dims: &GridDims) -> Result<()> {
        let ok = self.cell.shape() == (dims.nx, dims.ny)
            && self.u_face.shape() == dims.u_shape()
            && self.v_face.shape() == dims.v_shape()
            && self.node.shape() == dims.node_shape();
        if !ok {
            return Err(CoreError::Shape("volume fraction shapes do not match grid".into()));
        }
        Ok(())
    }
}

/// Fraction of an edge that lies inside (non-positive distance), given the
/// distances at its two endpoints.
///
/// With a sign change the crossing is located by linear interpolation:
/// `-d⁻ / (d⁺ - d⁻)` where `d⁻` is the non-positive sample.
#[inline]
pub fn edge_occupancy(d_plus: f64, d_minus: f64) -> f64 {
    let a_in = d_plus <= 0.0;
    let b_in = d_minus <= 0.0;
    match (a_in, b_in) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        _ => {
            let (pos, neg) = if a_in { (d_minus, d_plus) } else { (d_plus, d_minus) };
            (-neg / (pos - neg)).clamp(0.0, 1.0)
        }
    }
}

/// Occupancy of the dual cell of half-width one symmetric-grid step centered
/// at `(a, b)`: the mean of its four edges, each edge split at its midpoint
/// sample. Samples outside the array are clamped to the border.
pub(crate) fn dual_cell_occupancy(field: &Array2, a: usize, b: usize) -> f64 {
    let (a, b) = (a as isize, b as isize);
    let f = |p: isize, q: isize| field.get_clamped(p, q);
    let half_edges = |p0: (isize, isize), mid: (isize, isize), p1: (isize, isize)| {
        let m = f(mid.0, mid.1);
        0.5 * (edge_occupancy(f(p0.0, p0.1), m) + edge_occupancy(m, f(p1.0, p1.1)))
    };
    let bottom = half_edges((a - 1, b - 1), (a, b - 1), (a + 1, b - 1));
    let top = half_edges((a - 1, b + 1), (a, b + 1), (a + 1, b + 1));
    let left = half_edges((a - 1, b - 1), (a - 1, b), (a - 1, b + 1));
    let right = half_edges((a + 1, b - 1), (a + 1, b), (a + 1, b + 1));
    0.25 * (bottom + top + left + right)
}

/// Volume fractions from a corner level set.
///
/// Cells average the occupancy of their four edges. Faces and nodes apply
/// the same rule to the dual cell centered on the sample, using the level
/// set interpolated onto the symmetric grid.
pub fn fluid_volumes(phi: &LevelSet2, dims: &GridDims) -> Result<VolumeFractions2> {
    if phi.phi.shape() != dims.node_shape() {
        return Err(CoreError::Shape(alloc::format!(
            "level set shape {:?} does not match nodes {:?}",
            phi.phi.shape(),
            dims.node_shape()
        )));
    }
    let p = &phi.phi;
    let cell = Array2::from_fn(dims.nx, dims.ny, |i, j| {
        let (d00, d10, d01, d11) = (p.get(i, j), p.get(i + 1, j), p.get(i, j + 1), p.get(i + 1, j + 1));
        0.25 * (edge_occupancy(d00, d10)
            + edge_occupancy(d01, d11)
            + edge_occupancy(d00, d01)
            + edge_occupancy(d10, d11))
    });
    let sym = phi.sample_sym();
    let (ux, uy) = dims.u_shape();
    let (vx, vy) = dims.v_shape();
    let (nnx, nny) = dims.node_shape();
    Ok(VolumeFractions2 {
        cell,
        u_face: Array2::from_fn(ux, uy, |i, j| dual_cell_occupancy(&sym, 2 * i, 2 * j + 1)),
        v_face: Array2::from_fn(vx, vy, |i, j| dual_cell_occupancy(&sym, 2 * i + 1, 2 * j)),
        node: Array2::from_fn(nnx, nny, |i, j| dual_cell_occupancy(&sym, 2 * i, 2 * j)),
    })
}

/// 1 where the solid distance is non-positive, 0 elsewhere.
pub fn solid_indicator(solid: &SolidSdf2) -> Array2<u8> {
    solid.d.map(|d| u8::from(d <= 0.0))
}

/// First derivatives of a MAC velocity field.
///
/// `du_dx`, `dv_dy` are cell-centered `(nx, ny)`; `du_dy`, `dv_dx` are
/// node-centered `(nx+1, ny+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients2 {
    pub du_dx: Array2,
    pub dv_dy: Array2,
    pub du_dy: Array2,
    pub dv_dx: Array2,
}

/// Differences of adjacent staggered samples. Nodes on the domain boundary
/// reuse the nearest interior difference (one-sided), so every node gets a
/// value without ghost samples.
pub fn velocity_gradients(vel: &MacVelocity2, dims: &GridDims) -> Result<Gradients2> {
    vel.check(dims)?;
    let inv = 1.0 / dims.dx;
    let (nx, ny) = (dims.nx, dims.ny);
    let (u, v) = (&vel.u, &vel.v);
    let du_dx = Array2::from_fn(nx, ny, |i, j| (u.get(i + 1, j) - u.get(i, j)) * inv);
    let dv_dy = Array2::from_fn(nx, ny, |i, j| (v.get(i, j + 1) - v.get(i, j)) * inv);
    let du_dy = Array2::from_fn(nx + 1, ny + 1, |i, j| {
        let lo = j.clamp(1, ny - 1);
        (u.get(i, lo) - u.get(i, lo - 1)) * inv
    });
    let dv_dx = Array2::from_fn(nx + 1, ny + 1, |i, j| {
        let lo = i.clamp(1, nx - 1);
        (v.get(lo, j) - v.get(lo - 1, j)) * inv
    });
    Ok(Gradients2 { du_dx, dv_dy, du_dy, dv_dx })
}
