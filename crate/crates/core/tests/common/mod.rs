//! Independent reference implementations used by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use viscid_core::grid::{fluid_volumes, Array2, GridDims, LevelSet2, MacVelocity2, SolidSdf2, VolumeFractions2};
use viscid_core::nn::{Layer, LayerKind, Tensor, WeightManifest};
use viscid_core::viscosity::{FaceRole, FluidParams, MuField, ViscosityWeights};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Random scenes

#[derive(Debug, Clone)]
pub struct RandomScene {
    pub dims: GridDims,
    pub vel_old: MacVelocity2,
    pub vols: VolumeFractions2,
    pub solid: SolidSdf2,
    pub params: FluidParams,
}

#[derive(Debug, Clone, Copy)]
pub struct SceneOptions {
    /// Add a solid disc.
    pub solid: bool,
    /// Let the solid move.
    pub moving_solid: bool,
    /// Per-cell viscosity instead of a single value.
    pub per_cell_mu: bool,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self { solid: true, moving_solid: true, per_cell_mu: true }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// A few fluid discs plus a pool, an optional solid disc, random velocity
/// and material. The viscous term is made comparable to the inertia term.
pub fn random_scene(rng: &mut ChaCha8Rng, nx: usize, ny: usize, opts: SceneOptions) -> RandomScene {
    let dx = rng.gen_range(0.05..0.2);
    let dims = GridDims::new(nx, ny, dx).unwrap();
    let (w, h) = (dims.width(), dims.height());
    let blobs: Vec<([f64; 2], f64)> = (0..rng.gen_range(1..4))
        .map(|_| ([rng.gen_range(0.0..w), rng.gen_range(0.0..h)], rng.gen_range(0.15..0.5) * w.min(h)))
        .collect();
    let pool = rng.gen_range(-0.2..0.4) * h;
    let phi = LevelSet2::from_fn(&dims, |x, y| {
        blobs.iter().map(|(c, r)| ((x - c[0]).hypot(y - c[1])) - r).fold(y - pool, f64::min)
    });
    let vols = fluid_volumes(&phi, &dims).unwrap();

    let mut solid = SolidSdf2::empty(&dims);
    if opts.solid {
        let c = [rng.gen_range(0.0..w), rng.gen_range(0.0..h)];
        let r = rng.gen_range(0.1..0.35) * w.min(h);
        solid = SolidSdf2::from_fn(&dims, |x, y| (x - c[0]).hypot(y - c[1]) - r);
        if opts.moving_solid {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            solid.velocity = Array2::filled(solid.d.nx(), solid.d.ny(), v);
        }
    }

    let vel_old = random_velocity(rng, &dims);
    let rho = rng.gen_range(500.0..2000.0);
    let dt = rng.gen_range(1.0 / 300.0..1.0 / 30.0);
    // 2Δtμ/(ρΔx²) between 0.01 and 10.
    let base = rho * dx * dx / (2.0 * dt);
    let mu = if opts.per_cell_mu {
        MuField::PerCell(Array2::from_fn(nx, ny, |_, _| base * log_uniform(rng, 0.01, 10.0)))
    } else {
        MuField::Uniform(base * log_uniform(rng, 0.01, 10.0))
    };
    RandomScene { dims, vel_old, vols, solid, params: FluidParams { rho, mu, dt } }
}

pub fn random_velocity(rng: &mut ChaCha8Rng, dims: &GridDims) -> MacVelocity2 {
    let mut v = MacVelocity2::zeros(dims);
    v.u.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    v.v.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    v
}

// ---------------------------------------------------------------------------
// Viscosity objective and dense solve

/// The viscosity functional written out term by term:
/// `Δx² [ρ Σ m_f (u_f − u_old_f)² + 2Δt Σ μ V ‖S‖²_F]` where cells carry
/// the normal strains and nodes the shear strain.
pub fn objective(vel: &[f64], old: &[f64], w: &ViscosityWeights, params: &FluidParams) -> f64 {
    let d = &w.dims;
    let (nx, ny, h) = (d.nx, d.ny, d.dx);
    let u = |i: usize, j: usize| vel[i * ny + j];
    let v = |i: usize, j: usize| vel[(nx + 1) * ny + i * (ny + 1) + j];
    let mut inertia = 0.0;
    for i in 0..=nx {
        for j in 0..ny {
            let k = i * ny + j;
            inertia += w.mass_u.get(i, j) * (vel[k] - old[k]).powi(2);
        }
    }
    for i in 0..nx {
        for j in 0..=ny {
            let k = (nx + 1) * ny + i * (ny + 1) + j;
            inertia += w.mass_v.get(i, j) * (vel[k] - old[k]).powi(2);
        }
    }
    let mut diss = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let exx = (u(i + 1, j) - u(i, j)) / h;
            let eyy = (v(i, j + 1) - v(i, j)) / h;
            diss += w.mu_cell.get(i, j) * w.cell.get(i, j) * (exx * exx + eyy * eyy);
        }
    }
    for i in 0..=nx {
        for j in 0..=ny {
            // One-sided at the boundary rows/columns.
            let ju = if j == 0 {
                1
            } else if j == ny {
                ny - 1
            } else {
                j
            };
            let iv = if i == 0 {
                1
            } else if i == nx {
                nx - 1
            } else {
                i
            };
            let exy = 0.5 * ((u(i, ju) - u(i, ju - 1)) / h + (v(iv, j) - v(iv - 1, j)) / h);
            diss += w.mu_node.get(i, j) * w.node.get(i, j) * 2.0 * exy * exy;
        }
    }
    h * h * (params.rho * inertia + 2.0 * params.dt * diss)
}

pub struct DenseOracle {
    /// Free face indices (u-faces first, x-major).
    pub free: Vec<usize>,
    /// `J(x) = xᵀ A x − 2 bᵀ x + c` over the free faces.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Minimizer, with fixed faces at their held values.
    pub solution: Vec<f64>,
}

/// Differentiate [`objective`] numerically with step `step` and solve the
/// normal equations by Cholesky.
pub fn dense_oracle(vel_old: &MacVelocity2, w: &ViscosityWeights, params: &FluidParams, step: f64) -> DenseOracle {
    let old = vel_old.to_vec();
    let roles: Vec<FaceRole> = w.role_u.as_slice().iter().chain(w.role_v.as_slice()).copied().collect();
    let free: Vec<usize> = (0..roles.len()).filter(|&k| roles[k] == FaceRole::Free).collect();
    let mut base = old.clone();
    for (k, r) in roles.iter().enumerate() {
        match r {
            FaceRole::Solid(s) => base[k] = *s,
            FaceRole::Inactive => base[k] = old[k],
            FaceRole::Free => base[k] = 0.0,
        }
    }
    let n = free.len();
    let zero = vec![0.0; old.len()];
    // Quadratic part: everything held at zero.
    let quad = |pairs: &[(usize, f64)]| {
        let mut x = zero.clone();
        for &(k, s) in pairs {
            x[free[k]] += s;
        }
        objective(&x, &zero, w, params)
    };
    let full = |k: usize, s: f64| {
        let mut x = base.clone();
        x[free[k]] += s;
        objective(&x, &old, w, params)
    };
    let h = step;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                quad(&[(i, h)]) / (h * h)
            } else {
                (quad(&[(i, h), (j, h)]) - quad(&[(i, h), (j, -h)])) / (4.0 * h * h)
            };
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let b = DVector::from_fn(n, |i, _| -(full(i, h) - full(i, -h)) / (4.0 * h));
    let x = a.clone().cholesky().expect("oracle system is positive definite").solve(&b);
    let mut solution = base;
    for (k, &f) in free.iter().enumerate() {
        solution[f] = x[k];
    }
    DenseOracle { free, a, b, solution }
}

// ---------------------------------------------------------------------------
// Finite differences and losses

/// `(du_dx, dv_dy)` at cells and `(du_dy, dv_dx)` at nodes.
pub fn gradients_oracle(vel: &MacVelocity2, dims: &GridDims) -> [Vec<Vec<f64>>; 4] {
    let (nx, ny, h) = (dims.nx, dims.ny, dims.dx);
    let u = &vel.u;
    let v = &vel.v;
    let mut out: [Vec<Vec<f64>>; 4] = Default::default();
    out[0] = (0..nx).map(|i| (0..ny).map(|j| (u[(i + 1, j)] - u[(i, j)]) / h).collect()).collect();
    out[1] = (0..nx).map(|i| (0..ny).map(|j| (v[(i, j + 1)] - v[(i, j)]) / h).collect()).collect();
    out[2] = (0..=nx)
        .map(|i| {
            (0..=ny)
                .map(|j| {
                    let (a, b) = match j {
                        0 => (1, 0),
                        j if j == ny => (ny - 1, ny - 2),
                        j => (j, j - 1),
                    };
                    (u[(i, a)] - u[(i, b)]) / h
                })
                .collect()
        })
        .collect();
    out[3] = (0..=nx)
        .map(|i| {
            (0..=ny)
                .map(|j| {
                    let (a, b) = match i {
                        0 => (1, 0),
                        i if i == nx => (nx - 1, nx - 2),
                        i => (i, i - 1),
                    };
                    (v[(a, j)] - v[(b, j)]) / h
                })
                .collect()
        })
        .collect();
    out
}

/// `(inertia, dissipation)` of the grid-normalized variational loss by
/// plain loops.
pub fn variational_loss_oracle(
    vel: &MacVelocity2,
    old: &MacVelocity2,
    params: &FluidParams,
    dims: &GridDims,
) -> (f64, f64) {
    let (nx, ny) = (dims.nx, dims.ny);
    let mut su = 0.0;
    for i in 0..=nx {
        for j in 0..ny {
            su += (vel.u[(i, j)] - old.u[(i, j)]).powi(2);
        }
    }
    let mut sv = 0.0;
    for i in 0..nx {
        for j in 0..=ny {
            sv += (vel.v[(i, j)] - old.v[(i, j)]).powi(2);
        }
    }
    let inertia = params.rho * (su / ((nx + 1) * ny) as f64 + sv / (nx * (ny + 1)) as f64);
    let g = gradients_oracle(vel, dims);
    let mu = params.mu_cells(dims);
    let mut s = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let mut uy = 0.0;
            let mut vx = 0.0;
            for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                uy += g[2][a][b] / 4.0;
                vx += g[3][a][b] / 4.0;
            }
            let (ux, vy) = (g[0][i][j], g[1][i][j]);
            let sxy = (uy + vx) / 2.0;
            s += mu[(i, j)] * (ux * ux + vy * vy + sxy * sxy + sxy * sxy);
        }
    }
    (inertia, 2.0 * params.dt * s / (nx * ny) as f64)
}

// ---------------------------------------------------------------------------
// Naive network

/// f64 tensor, `(c, h, w)` row-major.
#[derive(Debug, Clone)]
pub struct T64 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl T64 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }
    pub fn from_f32(t: &Tensor) -> Self {
        Self { c: t.c, h: t.h, w: t.w, data: t.data.iter().map(|&x| x as f64).collect() }
    }
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.h + y) * self.w + x]
    }
    pub fn max_abs_diff(&self, t: &Tensor) -> f64 {
        assert_eq!((self.c, self.h, self.w), (t.c, t.h, t.w));
        self.data.iter().zip(&t.data).map(|(a, &b)| (a - b as f64).abs()).fold(0.0, f64::max)
    }
}

/// Direct six-loop convolution with zero padding.
pub fn naive_conv(x: &T64, layer: &Layer) -> T64 {
    let [oc, ic, kh, kw] = layer.shape;
    assert_eq!(ic, x.c);
    let mut out = T64::zeros(oc, x.h, x.w);
    for o in 0..oc {
        for y in 0..x.h {
            for xx in 0..x.w {
                let mut s = layer.bias[o] as f64;
                for i in 0..ic {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let sy = y as isize + dy as isize - (kh / 2) as isize;
                            let sx = xx as isize + dx as isize - (kw / 2) as isize;
                            if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w {
                                let wv = layer.weights[((o * ic + i) * kh + dy) * kw + dx] as f64;
                                s += wv * x.at(i, sy as usize, sx as usize);
                            }
                        }
                    }
                }
                *out.at_mut(o, y, xx) = s;
            }
        }
    }
    out
}

pub fn naive_pool(x: &T64) -> T64 {
    let mut out = T64::zeros(x.c, x.h / 2, x.w / 2);
    for c in 0..x.c {
        for y in 0..x.h / 2 {
            for xx in 0..x.w / 2 {
                *out.at_mut(c, y, xx) = (x.at(c, 2 * y, 2 * xx)
                    + x.at(c, 2 * y + 1, 2 * xx)
                    + x.at(c, 2 * y, 2 * xx + 1)
                    + x.at(c, 2 * y + 1, 2 * xx + 1))
                    / 4.0;
            }
        }
    }
    out
}

/// Stride-2 transposed convolution by scattering each input sample.
pub fn naive_tconv(x: &T64, layer: &Layer) -> T64 {
    let [ic, oc, _, _] = layer.shape;
    let mut out = T64::zeros(oc, 2 * x.h, 2 * x.w);
    for o in 0..oc {
        for y in 0..2 * x.h {
            for xx in 0..2 * x.w {
                *out.at_mut(o, y, xx) = layer.bias[o] as f64;
            }
        }
    }
    for i in 0..ic {
        for y in 0..x.h {
            for xx in 0..x.w {
                for o in 0..oc {
                    for a in 0..2 {
                        for b in 0..2 {
                            let wv = layer.weights[((i * oc + o) * 2 + a) * 2 + b] as f64;
                            *out.at_mut(o, 2 * y + a, 2 * xx + b) += wv * x.at(i, y, xx);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Stride-2 2×2 convolution sharing a transposed-conv layer's weights
/// (no bias); the adjoint of [`naive_tconv`] minus its bias.
pub fn naive_conv_s2(z: &T64, layer: &Layer) -> T64 {
    let [ic, oc, _, _] = layer.shape;
    assert_eq!(z.c, oc);
    let mut out = T64::zeros(ic, z.h / 2, z.w / 2);
    for i in 0..ic {
        for y in 0..z.h / 2 {
            for xx in 0..z.w / 2 {
                let mut s = 0.0;
                for o in 0..oc {
                    for a in 0..2 {
                        for b in 0..2 {
                            s += layer.weights[((i * oc + o) * 2 + a) * 2 + b] as f64 * z.at(o, 2 * y + a, 2 * xx + b);
                        }
                    }
                }
                *out.at_mut(i, y, xx) = s;
            }
        }
    }
    out
}

fn cat(a: &T64, b: &T64) -> T64 {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    T64 { c: a.c + b.c, h: a.h, w: a.w, data }
}

/// The U-Net evaluated layer by layer from the manifest with the naive
/// operators above, in f64 with exact tanh.
pub fn naive_forward(input: &Tensor, m: &WeightManifest) -> T64 {
    let cfg = &m.config;
    let get = |name: String| m.layer(&name).unwrap_or_else(|| panic!("missing layer {name}"));
    let block = |mut x: T64, prefix: &str| {
        for k in 0..cfg.convs_per_level {
            x = naive_conv(&x, get(format!("{prefix}.conv{k}")));
            x.data.iter_mut().for_each(|v| *v = v.tanh());
        }
        x
    };
    let mut x = T64::from_f32(input);
    let mut skips = Vec::new();
    for l in 0..cfg.depth {
        x = block(x, &format!("enc{l}"));
        skips.push(x.clone());
        x = naive_pool(&x);
    }
    x = block(x, "mid");
    for l in (0..cfg.depth).rev() {
        let up = naive_tconv(&x, get(format!("dec{l}.up")));
        let skip = skips.pop().unwrap();
        x = block(cat(&skip, &up), &format!("dec{l}"));
    }
    let head = get("head".to_string());
    assert_eq!(head.kind, LayerKind::Conv);
    naive_conv(&x, head)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}
