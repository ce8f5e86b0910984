//! Objective and loss evaluations.
//!
//! [`viscosity_objective`] evaluates the exact discrete functional the
//! viscosity solver minimizes, written as a direct loop rather than through
//! the assembled matrix, so it can serve as an independent check of the
//! solver. [`variational_loss`] is the grid-normalized training loss and
//! [`l2_error`] the plain mean squared error.

use crate::error::{CoreError, Result};
use crate::grid::{velocity_gradients, GridDims, MacVelocity2};
use crate::viscosity::{FluidParams, ViscosityWeights};

/// Discrete viscosity objective, in physical units per unit depth.
pub fn viscosity_objective(
    vel: &MacVelocity2,
    vel_old: &MacVelocity2,
    weights: &ViscosityWeights,
    params: &FluidParams,
) -> Result<f64> {
    let dims = &weights.dims;
    vel.check(dims)?;
    vel_old.check(dims)?;
    let (nx, ny) = (dims.nx, dims.ny);
    let h = dims.dx;
    let (u, v) = (&vel.u, &vel.v);

    let mut inertia = 0.0;
    for i in 0..=nx {
        for j in 0..ny {
            let d = u.get(i, j) - vel_old.u.get(i, j);
            inertia += weights.mass_u.get(i, j) * d * d;
        }
    }
    for i in 0..nx {
        for j in 0..=ny {
            let d = v.get(i, j) - vel_old.v.get(i, j);
            inertia += weights.mass_v.get(i, j) * d * d;
        }
    }

    let mut dissipation = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let ux = (u.get(i + 1, j) - u.get(i, j)) / h;
            let vy = (v.get(i, j + 1) - v.get(i, j)) / h;
            dissipation += weights.mu_cell.get(i, j) * weights.cell.get(i, j) * (ux * ux + vy * vy);
        }
    }
    for i in 0..=nx {
        for j in 0..=ny {
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
            let uy = (u.get(i, ju) - u.get(i, ju - 1)) / h;
            let vx = (v.get(iv, j) - v.get(iv - 1, j)) / h;
            let shear = uy + vx;
            dissipation += weights.mu_node.get(i, j) * weights.node.get(i, j) * 0.5 * shear * shear;
        }
    }
    Ok(h * h * (params.rho * inertia + 2.0 * params.dt * dissipation))
}

/// `½ Σ ρ m_f u_f²` over all faces, using the solver's mass fractions.
pub fn kinetic_energy(vel: &MacVelocity2, weights: &ViscosityWeights, rho: f64) -> f64 {
    let area = weights.dims.dx * weights.dims.dx;
    let sum: f64 = vel
        .u
        .as_slice()
        .iter()
        .zip(weights.mass_u.as_slice())
        .chain(vel.v.as_slice().iter().zip(weights.mass_v.as_slice()))
        .map(|(x, m)| m * x * x)
        .sum();
    0.5 * rho * area * sum
}

/// The two parts of the variational training loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VariationalLoss {
    pub inertia_term: f64,
    pub dissipation_term: f64,
    /// `inertia_term + dissipation_term`.
    pub l_v: f64,
}

/// Variational loss of `vel` against the pre-viscosity field `vel_old`.
///
/// Inertia terms are ρ times the mean squared change over each face family;
/// the dissipation term is `2Δt` times the mean over cells of
/// `μ ‖(∇u + ∇uᵀ)/2‖²_F`, with the node-centered shear derivatives averaged
/// from the four nodes of each cell.
pub fn variational_loss(
    vel: &MacVelocity2,
    vel_old: &MacVelocity2,
    params: &FluidParams,
    dims: &GridDims,
) -> Result<VariationalLoss> {
    vel.check(dims)?;
    vel_old.check(dims)?;
    params.validate(dims)?;
    let mean_sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    let inertia = params.rho
        * (mean_sq(vel.u.as_slice(), vel_old.u.as_slice()) + mean_sq(vel.v.as_slice(), vel_old.v.as_slice()));

    let g = velocity_gradients(vel, dims)?;
    let mu = params.mu_cells(dims);
    let mut sum = 0.0;
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            let avg = |a: &crate::grid::Array2| {
                0.25 * (a.get(i, j) + a.get(i + 1, j) + a.get(i, j + 1) + a.get(i + 1, j + 1))
            };
            let uy = avg(&g.du_dy);
            let vx = avg(&g.dv_dx);
            let ux = g.du_dx.get(i, j);
            let vy = g.dv_dy.get(i, j);
            let off = 0.5 * (uy + vx);
            sum += mu.get(i, j) * (ux * ux + vy * vy + 2.0 * off * off);
        }
    }
    let dissipation = 2.0 * params.dt * sum / (dims.nx * dims.ny) as f64;
    Ok(VariationalLoss { inertia_term: inertia, dissipation_term: dissipation, l_v: inertia + dissipation })
}

/// Mean over all u and v samples of the squared difference.
pub fn l2_error(pred: &MacVelocity2, truth: &MacVelocity2) -> Result<f64> {
    if pred.u.shape() != truth.u.shape() || pred.v.shape() != truth.v.shape() {
        return Err(CoreError::Shape("prediction and truth differ in shape".into()));
    }
    let count = pred.u.as_slice().len() + pred.v.as_slice().len();
    let sum: f64 = pred
        .u
        .as_slice()
        .iter()
        .zip(truth.u.as_slice())
        .chain(pred.v.as_slice().iter().zip(truth.v.as_slice()))
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / count as f64)
}

/// Metrics for one predicted velocity change against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// Mean squared error of the predicted change.
    pub l2: f64,
    pub l_v: f64,
    pub inertia_term: f64,
    pub dissipation_term: f64,
}

impl LossReport {
    /// Score `pred_delta` against `truth_delta`; the variational part is
    /// evaluated on `vel_old + pred_delta`.
    pub fn evaluate(
        pred_delta: &MacVelocity2,
        truth_delta: &MacVelocity2,
        vel_old: &MacVelocity2,
        params: &FluidParams,
        dims: &GridDims,
    ) -> Result<Self> {
        let l2 = l2_error(pred_delta, truth_delta)?;
        let vel = vel_old.add_scaled(pred_delta, 1.0);
        let lv = variational_loss(&vel, vel_old, params, dims)?;
        Ok(Self { l2, l_v: lv.l_v, inertia_term: lv.inertia_term, dissipation_term: lv.dissipation_term })
    }
}
