//! Implicit variational viscosity.
//!
//! The update minimizes, over the free faces,
//!
//! ```text
//! J(u) = Σ_f ρ m_f (u_f − u_old_f)²
//!      + 2Δt [ Σ_cells μ_c w_c (u_x² + v_y²) + Σ_nodes μ_n w_n ½ (u_y + v_x)² ]
//! ```
//!
//! (times the cell area), where `m_f`, `w_c`, `w_n` are fluid volume
//! fractions of the face, cell and node control volumes. The bracket is the
//! squared Frobenius norm of the strain rate `(∇u + ∇uᵀ)/2`, with the normal
//! strains living at cell centers and the shear strain at nodes, using the
//! same difference stencils as [`velocity_gradients`](crate::grid::velocity_gradients).
//! Setting the gradient to zero gives the SPD system `(M + 2Δt G) u = M u_old`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::grid::{dual_cell_occupancy, Array2, GridDims, MacVelocity2, SolidSdf2, VolumeFractions2};
use crate::sparse::{pcg, CsrBuilder, CsrMatrix, PcgStats};

/// Faces whose control volume is more than this fraction solid take the
/// solid velocity.
pub const SOLID_CONSTRAINT_FRACTION: f64 = 0.9;

/// Lower bound on the mass fraction of a free face. Keeps faces that only
/// touch the fluid through a stress stencil from making the system singular.
pub const MIN_FREE_MASS_FRACTION: f64 = 0.01;

/// Dynamic viscosity in Pa·s, either one value or one per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum MuField {
    Uniform(f64),
    PerCell(Array2),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidParams {
    /// Density, kg/m³.
    pub rho: f64,
    pub mu: MuField,
    /// Time step, s.
    pub dt: f64,
}

impl FluidParams {
    pub fn new(rho: f64, mu: f64, dt: f64) -> Self {
        Self { rho, mu: MuField::Uniform(mu), dt }
    }

    pub fn validate(&self, dims: &GridDims) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(CoreError::InvalidInput(alloc::format!("density must be positive, got {}", self.rho)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CoreError::InvalidInput(alloc::format!("time step must be positive, got {}", self.dt)));
        }
        match &self.mu {
            MuField::Uniform(mu) if !(*mu >= 0.0 && mu.is_finite()) => {
                Err(CoreError::InvalidInput(alloc::format!("viscosity must be non-negative, got {mu}")))
            }
            MuField::PerCell(field) => {
                if field.shape() != (dims.nx, dims.ny) {
                    return Err(CoreError::Shape("per-cell viscosity does not match grid".into()));
                }
                if field.as_slice().iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
                    return Err(CoreError::InvalidInput("viscosity must be non-negative".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mu_cells(&self, dims: &GridDims) -> Array2 {
        match &self.mu {
            MuField::Uniform(mu) => Array2::filled(dims.nx, dims.ny, *mu),
            MuField::PerCell(field) => field.clone(),
        }
    }

    /// Same parameters with every viscosity multiplied by `factor`.
    pub fn with_mu_scaled(&self, factor: f64) -> Self {
        let mu = match &self.mu {
            MuField::Uniform(mu) => MuField::Uniform(mu * factor),
            MuField::PerCell(field) => MuField::PerCell(field.map(|m| m * factor)),
        };
        Self { mu, ..self.clone() }
    }
}

/// How a face enters the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceRole {
    /// Unknown of the minimization.
    Free,
    /// Held at the solid velocity.
    Solid(f64),
    /// Outside the fluid and every weighted stress stencil; keeps its old value.
    Inactive,
}

/// Control-volume weights, viscosities and face roles for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityWeights {
    pub dims: GridDims,
    /// Mass fraction per u-face (floored on free faces).
    pub mass_u: Array2,
    pub mass_v: Array2,
    pub cell: Array2,
    pub node: Array2,
    pub mu_cell: Array2,
    pub mu_node: Array2,
    pub role_u: Array2<FaceRole>,
    pub role_v: Array2<FaceRole>,
}

/// Flat index of u-face `(i, j)` in the solver's unknown vector.
#[inline]
pub fn dof_u(dims: &GridDims, i: usize, j: usize) -> usize {
    i * dims.ny + j
}

/// Flat index of v-face `(i, j)`; v-faces follow all u-faces.
#[inline]
pub fn dof_v(dims: &GridDims, i: usize, j: usize) -> usize {
    (dims.nx + 1) * dims.ny + i * (dims.ny + 1) + j
}

/// Calls `f(weight, stencil)` for every strain quadrature term with positive
/// weight. Each term contributes `weight · (Σ c_k u_k)²` to the dissipation
/// bracket.
fn for_each_term(
    dims: &GridDims,
    cell: &Array2,
    node: &Array2,
    mu_cell: &Array2,
    mu_node: &Array2,
    mut f: impl FnMut(f64, &[(usize, f64)]),
) {
    let (nx, ny) = (dims.nx, dims.ny);
    let h = 1.0 / dims.dx;
    for i in 0..nx {
        for j in 0..ny {
            let w = mu_cell.get(i, j) * cell.get(i, j);
            if w > 0.0 {
                f(w, &[(dof_u(dims, i + 1, j), h), (dof_u(dims, i, j), -h)]);
                f(w, &[(dof_v(dims, i, j + 1), h), (dof_v(dims, i, j), -h)]);
            }
        }
    }
    for i in 0..=nx {
        for j in 0..=ny {
            let w = 0.5 * mu_node.get(i, j) * node.get(i, j);
            if w > 0.0 {
                let uj = j.clamp(1, ny - 1);
                let vi = i.clamp(1, nx - 1);
                f(
                    w,
                    &[
                        (dof_u(dims, i, uj), h),
                        (dof_u(dims, i, uj - 1), -h),
                        (dof_v(dims, vi, j), h),
                        (dof_v(dims, vi - 1, j), -h),
                    ],
                );
            }
        }
    }
}

impl ViscosityWeights {
    pub fn new(vols: &VolumeFractions2, solid: &SolidSdf2, params: &FluidParams, dims: &GridDims) -> Result<Self> {
        dims.validate()?;
        vols.check(dims)?;
        solid.check(dims)?;
        params.validate(dims)?;
        let (nx, ny) = (dims.nx, dims.ny);
        let mu_cell = params.mu_cells(dims);
        let mu_node = Array2::from_fn(nx + 1, ny + 1, |i, j| {
            let mut sum = 0.0;
            let mut count = 0.0;
            for ci in i.saturating_sub(1)..(i + 1).min(nx) {
                for cj in j.saturating_sub(1)..(j + 1).min(ny) {
                    sum += mu_cell.get(ci, cj);
                    count += 1.0;
                }
            }
            sum / count
        });

        let mut stressed = vec![false; dims.face_count()];
        for_each_term(dims, &vols.cell, &vols.node, &mu_cell, &mu_node, |_, stencil| {
            for &(k, _) in stencil {
                stressed[k] = true;
            }
        });

        let role = |frac: f64, stressed: bool, a: usize, b: usize, axis: usize| {
            if dual_cell_occupancy(&solid.d, a, b) > SOLID_CONSTRAINT_FRACTION {
                FaceRole::Solid(solid.velocity.get(a, b)[axis])
            } else if frac > 0.0 || stressed {
                FaceRole::Free
            } else {
                FaceRole::Inactive
            }
        };
        let (ux, uy) = dims.u_shape();
        let (vx, vy) = dims.v_shape();
        let role_u = Array2::from_fn(ux, uy, |i, j| {
            role(vols.u_face.get(i, j), stressed[dof_u(dims, i, j)], 2 * i, 2 * j + 1, 0)
        });
        let role_v = Array2::from_fn(vx, vy, |i, j| {
            role(vols.v_face.get(i, j), stressed[dof_v(dims, i, j)], 2 * i + 1, 2 * j, 1)
        });
        let floor = |frac: f64, role: FaceRole| match role {
            FaceRole::Free => frac.max(MIN_FREE_MASS_FRACTION),
            _ => frac,
        };
        let mass_u = Array2::from_fn(ux, uy, |i, j| floor(vols.u_face.get(i, j), role_u.get(i, j)));
        let mass_v = Array2::from_fn(vx, vy, |i, j| floor(vols.v_face.get(i, j), role_v.get(i, j)));
        Ok(Self {
            dims: *dims,
            mass_u,
            mass_v,
            cell: vols.cell.clone(),
            node: vols.node.clone(),
            mu_cell,
            mu_node,
            role_u,
            role_v,
        })
    }

    /// Roles in dof order.
    pub fn roles(&self) -> Vec<FaceRole> {
        self.role_u.as_slice().iter().chain(self.role_v.as_slice()).copied().collect()
    }

    /// Mass fractions in dof order.
    pub fn masses(&self) -> Vec<f64> {
        self.mass_u.as_slice().iter().chain(self.mass_v.as_slice()).copied().collect()
    }

    pub fn free_count(&self) -> usize {
        self.roles().iter().filter(|r| matches!(r, FaceRole::Free)).count()
    }

    /// The velocity field a solve starts from: old values on free and
    /// inactive faces, solid velocity on constrained ones.
    pub fn constrained(&self, vel_old: &MacVelocity2) -> MacVelocity2 {
        let mut out = vel_old.clone();
        for (v, r) in out.u.as_mut_slice().iter_mut().zip(self.role_u.as_slice()) {
            if let FaceRole::Solid(s) = r {
                *v = *s;
            }
        }
        for (v, r) in out.v.as_mut_slice().iter_mut().zip(self.role_v.as_slice()) {
            if let FaceRole::Solid(s) = r {
                *v = *s;
            }
        }
        out
    }
}

/// Assembled linear system over all faces (u-faces first). Non-free faces
/// have identity rows.
#[derive(Debug, Clone)]
pub struct SparseSpdSystem {
    pub dims: GridDims,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Starting iterate for the solve.
    pub guess: Vec<f64>,
    pub roles: Vec<FaceRole>,
}

pub fn assemble(
    vel_old: &MacVelocity2,
    vols: &VolumeFractions2,
    solid: &SolidSdf2,
    params: &FluidParams,
    dims: &GridDims,
) -> Result<SparseSpdSystem> {
    let weights = ViscosityWeights::new(vols, solid, params, dims)?;
    assemble_weighted(vel_old, &weights, params)
}

pub fn assemble_weighted(
    vel_old: &MacVelocity2,
    weights: &ViscosityWeights,
    params: &FluidParams,
) -> Result<SparseSpdSystem> {
    let dims = &weights.dims;
    vel_old.check(dims)?;
    if !vel_old.is_finite() {
        return Err(CoreError::InvalidInput("old velocity has non-finite entries".into()));
    }
    let n = dims.face_count();
    let roles = weights.roles();
    let masses = weights.masses();
    let old = vel_old.to_vec();
    let fixed_value = |k: usize| match roles[k] {
        FaceRole::Solid(s) => s,
        _ => old[k],
    };

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        match roles[k] {
            FaceRole::Free => {
                let m = params.rho * masses[k];
                rows[k].push((k, m));
                rhs[k] = m * old[k];
            }
            _ => {
                rows[k].push((k, 1.0));
                rhs[k] = fixed_value(k);
            }
        }
    }
    let two_dt = 2.0 * params.dt;
    for_each_term(dims, &weights.cell, &weights.node, &weights.mu_cell, &weights.mu_node, |w, stencil| {
        let s = two_dt * w;
        for &(p, cp) in stencil {
            if roles[p] != FaceRole::Free {
                continue;
            }
            for &(q, cq) in stencil {
                let a = s * cp * cq;
                if roles[q] == FaceRole::Free {
                    let row = &mut rows[p];
                    match row.iter_mut().find(|(c, _)| *c == q) {
                        Some(entry) => entry.1 += a,
                        None => row.push((q, a)),
                    }
                } else {
                    rhs[p] -= a * fixed_value(q);
                }
            }
        }
    });

    let nnz = rows.iter().map(Vec::len).sum();
    let mut builder = CsrBuilder::with_capacity(n, nnz);
    for row in rows {
        for (c, v) in row {
            builder.add(c, v);
        }
        builder.finish_row();
    }
    let matrix = builder.build();
    let (max_asymmetry, max_entry) = matrix.asymmetry();
    if max_asymmetry > 1e-9 * max_entry {
        return Err(CoreError::AsymmetricAssembly { max_asymmetry, max_entry });
    }
    let guess = weights.constrained(vel_old).to_vec();
    Ok(SparseSpdSystem { dims: *dims, matrix, rhs, guess, roles })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the system size.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: None }
    }
}

/// Solve the system from its stored starting iterate.
pub fn solve(system: &SparseSpdSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgStats)> {
    let mut x = system.guess.clone();
    let stats = pcg(&system.matrix, &system.rhs, &mut x, tol, max_iter)?;
    Ok((x, stats))
}

#[derive(Debug, Clone)]
pub struct ViscosityStep {
    pub velocity: MacVelocity2,
    /// `velocity − vel_old`.
    pub delta: MacVelocity2,
    pub stats: PcgStats,
}

pub fn viscosity_step(
    vel_old: &MacVelocity2,
    vols: &VolumeFractions2,
    solid: &SolidSdf2,
    params: &FluidParams,
    dims: &GridDims,
    opts: &SolveOptions,
) -> Result<ViscosityStep> {
    let weights = ViscosityWeights::new(vols, solid, params, dims)?;
    viscosity_step_weighted(vel_old, &weights, params, opts)
}

pub fn viscosity_step_weighted(
    vel_old: &MacVelocity2,
    weights: &ViscosityWeights,
    params: &FluidParams,
    opts: &SolveOptions,
) -> Result<ViscosityStep> {
    let system = assemble_weighted(vel_old, weights, params)?;
    let max_iter = opts.max_iter.unwrap_or(10 * system.matrix.n());
    let (x, stats) = solve(&system, opts.tol, max_iter)?;
    let velocity = MacVelocity2::from_slice(&weights.dims, &x)?;
    let delta = velocity.add_scaled(vel_old, -1.0);
    Ok(ViscosityStep { velocity, delta, stats })
}
