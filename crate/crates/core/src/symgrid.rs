//! Symmetric MAC grid: every staggered quantity of an `nx × ny` grid packed
//! into co-registered `(2nx+1) × (2ny+1)` channels.
//!
//! Cell centers sit at odd/odd positions, nodes at even/even, u-faces at
//! even/odd and v-faces at odd/even. Swapping the axes swaps the face
//! families, so the layout treats x and y identically.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{CoreError, Result};
use crate::grid::{velocity_gradients, Array2, GridDims, MacVelocity2, SolidSdf2, VolumeFractions2};

pub const CH_DU_DX: usize = 0;
pub const CH_DV_DY: usize = 1;
pub const CH_DU_DY: usize = 2;
pub const CH_DV_DX: usize = 3;
pub const CH_VOLUME: usize = 4;
pub const CH_SOLID: usize = 5;
pub const CH_COEFF: usize = 6;

/// Channel count without and with the viscosity coefficient channel.
pub const BASE_CHANNELS: usize = 6;
pub const COEFF_CHANNELS: usize = 7;

/// What lives at a symmetric-grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymSite {
    Cell(usize, usize),
    Node(usize, usize),
    UFace(usize, usize),
    VFace(usize, usize),
}

/// Index mapping between MAC samples and symmetric-grid positions.
pub struct SymIndexMap;

impl SymIndexMap {
    #[inline]
    pub fn cell(i: usize, j: usize) -> (usize, usize) {
        (2 * i + 1, 2 * j + 1)
    }

    #[inline]
    pub fn node(i: usize, j: usize) -> (usize, usize) {
        (2 * i, 2 * j)
    }

    #[inline]
    pub fn u_face(i: usize, j: usize) -> (usize, usize) {
        (2 * i, 2 * j + 1)
    }

    #[inline]
    pub fn v_face(i: usize, j: usize) -> (usize, usize) {
        (2 * i + 1, 2 * j)
    }

    #[inline]
    pub fn site(a: usize, b: usize) -> SymSite {
        match (a % 2, b % 2) {
            (1, 1) => SymSite::Cell(a / 2, b / 2),
            (0, 0) => SymSite::Node(a / 2, b / 2),
            (0, _) => SymSite::UFace(a / 2, b / 2),
            _ => SymSite::VFace(a / 2, b / 2),
        }
    }
}

/// `channels × sx × sy` single-precision tensor, x-major within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub channels: usize,
    pub sx: usize,
    pub sy: usize,
    pub data: Vec<f32>,
}

impl ChannelStack {
    pub fn zeros(channels: usize, sx: usize, sy: usize) -> Self {
        Self { channels, sx, sy, data: vec![0.0; channels * sx * sy] }
    }

    pub fn from_vec(channels: usize, sx: usize, sy: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * sx * sy {
            return Err(CoreError::Shape(alloc::format!(
                "{} values cannot fill a {channels}x{sx}x{sy} stack",
                data.len()
            )));
        }
        Ok(Self { channels, sx, sy, data })
    }

    #[inline]
    fn idx(&self, c: usize, a: usize, b: usize) -> usize {
        (c * self.sx + a) * self.sy + b
    }

    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> f32 {
        self.data[self.idx(c, a, b)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, a: usize, b: usize, value: f32) {
        let k = self.idx(c, a, b);
        self.data[k] = value;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.sx * self.sy;
        &self.data[c * n..(c + 1) * n]
    }

    /// Reflect `x -> width - x`. Channels whose quantity is odd under the
    /// reflection (∂u/∂y, ∂v/∂x) change sign.
    pub fn mirrored_x(&self) -> Self {
        let mut out = Self::zeros(self.channels, self.sx, self.sy);
        for c in 0..self.channels {
            let sign = if c == CH_DU_DY || c == CH_DV_DX { -1.0 } else { 1.0 };
            for a in 0..self.sx {
                for b in 0..self.sy {
                    out.set(c, a, b, sign * self.get(c, self.sx - 1 - a, b));
                }
            }
        }
        out
    }

    /// Swap the spatial axes and the x/y channel pairs.
    pub fn transposed(&self) -> Self {
        let mut out = Self::zeros(self.channels, self.sy, self.sx);
        for c in 0..self.channels {
            let src = match c {
                CH_DU_DX => CH_DV_DY,
                CH_DV_DY => CH_DU_DX,
                CH_DU_DY => CH_DV_DX,
                CH_DV_DX => CH_DU_DY,
                other => other,
            };
            for a in 0..self.sy {
                for b in 0..self.sx {
                    out.set(c, a, b, self.get(src, b, a));
                }
            }
        }
        out
    }
}

/// Build the network input for one frame.
///
/// Derivative channels hold values only at their own family positions (cell
/// centers for ∂u/∂x, ∂v/∂y; nodes for ∂u/∂y, ∂v/∂x). The volume channel is
/// filled everywhere from the cell, face or node fraction of that position,
/// the solid channel everywhere from the solid distance. With `coeff`, a
/// seventh channel carries μ at cell positions whose fluid volume is
/// positive.
pub fn encode(
    vel: &MacVelocity2,
    vols: &VolumeFractions2,
    solid: &SolidSdf2,
    coeff: Option<&Array2>,
    dims: &GridDims,
) -> Result<ChannelStack> {
    vols.check(dims)?;
    solid.check(dims)?;
    if let Some(mu) = coeff {
        if mu.shape() != (dims.nx, dims.ny) {
            return Err(CoreError::Shape("viscosity coefficient field does not match grid".into()));
        }
    }
    let g = velocity_gradients(vel, dims)?;
    let (sx, sy) = dims.sym_shape();
    let channels = if coeff.is_some() { COEFF_CHANNELS } else { BASE_CHANNELS };
    let mut out = ChannelStack::zeros(channels, sx, sy);
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            let (a, b) = SymIndexMap::cell(i, j);
            out.set(CH_DU_DX, a, b, g.du_dx.get(i, j) as f32);
            out.set(CH_DV_DY, a, b, g.dv_dy.get(i, j) as f32);
            if let Some(mu) = coeff {
                if vols.cell.get(i, j) > 0.0 {
                    out.set(CH_COEFF, a, b, mu.get(i, j) as f32);
                }
            }
        }
    }
    for i in 0..=dims.nx {
        for j in 0..=dims.ny {
            let (a, b) = SymIndexMap::node(i, j);
            out.set(CH_DU_DY, a, b, g.du_dy.get(i, j) as f32);
            out.set(CH_DV_DX, a, b, g.dv_dx.get(i, j) as f32);
        }
    }
    for a in 0..sx {
        for b in 0..sy {
            let vol = match SymIndexMap::site(a, b) {
                SymSite::Cell(i, j) => vols.cell.get(i, j),
                SymSite::Node(i, j) => vols.node.get(i, j),
                SymSite::UFace(i, j) => vols.u_face.get(i, j),
                SymSite::VFace(i, j) => vols.v_face.get(i, j),
            };
            out.set(CH_VOLUME, a, b, vol as f32);
            out.set(CH_SOLID, a, b, if solid.d.get(a, b) <= 0.0 { 1.0 } else { 0.0 });
        }
    }
    Ok(out)
}

/// Read a velocity change from a two-channel output: Δu from channel 0 at
/// u-face positions, Δv from channel 1 at v-face positions.
pub fn decode(output: &ChannelStack, dims: &GridDims) -> Result<MacVelocity2> {
    if output.channels != 2 || (output.sx, output.sy) != dims.sym_shape() {
        return Err(CoreError::Shape(alloc::format!(
            "decode expects 2x{:?}, got {}x{}x{}",
            dims.sym_shape(),
            output.channels,
            output.sx,
            output.sy
        )));
    }
    let (ux, uy) = dims.u_shape();
    let (vx, vy) = dims.v_shape();
    Ok(MacVelocity2 {
        u: Array2::from_fn(ux, uy, |i, j| {
            let (a, b) = SymIndexMap::u_face(i, j);
            output.get(0, a, b) as f64
        }),
        v: Array2::from_fn(vx, vy, |i, j| {
            let (a, b) = SymIndexMap::v_face(i, j);
            output.get(1, a, b) as f64
        }),
    })
}

/// Place a velocity change on the symmetric grid (the inverse of [`decode`]).
pub fn place_delta(delta: &MacVelocity2, dims: &GridDims) -> Result<ChannelStack> {
    delta.check(dims)?;
    let (sx, sy) = dims.sym_shape();
    let mut out = ChannelStack::zeros(2, sx, sy);
    for i in 0..=dims.nx {
        for j in 0..dims.ny {
            let (a, b) = SymIndexMap::u_face(i, j);
            out.set(0, a, b, delta.u.get(i, j) as f32);
        }
    }
    for i in 0..dims.nx {
        for j in 0..=dims.ny {
            let (a, b) = SymIndexMap::v_face(i, j);
            out.set(1, a, b, delta.v.get(i, j) as f32);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    /// Split the padding evenly, extra element after (deterministic; inference).
    Centered,
    /// Split uniformly at random (training augmentation).
    Random,
}

/// How a stack is grown so both spatial sizes are multiples of `multiple`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddingSpec {
    pub multiple: usize,
    /// Elements added before the content along x and y.
    pub before: (usize, usize),
    /// Padded spatial size.
    pub padded: (usize, usize),
    pub mode: PadMode,
}

fn round_up(n: usize, multiple: usize) -> usize {
    n.div_ceil(multiple) * multiple
}

impl PaddingSpec {
    /// Padding for a network with `depth` pooling layers.
    pub fn centered(sx: usize, sy: usize, depth: u32) -> Self {
        let multiple = 1usize << depth;
        let padded = (round_up(sx, multiple), round_up(sy, multiple));
        Self { multiple, before: ((padded.0 - sx) / 2, (padded.1 - sy) / 2), padded, mode: PadMode::Centered }
    }

    pub fn random(sx: usize, sy: usize, depth: u32, rng: &mut impl RngCore) -> Self {
        let multiple = 1usize << depth;
        let padded = (round_up(sx, multiple), round_up(sy, multiple));
        let pick = |total: usize, rng: &mut dyn RngCore| (rng.next_u64() % (total as u64 + 1)) as usize;
        let before = (pick(padded.0 - sx, rng), pick(padded.1 - sy, rng));
        Self { multiple, before, padded, mode: PadMode::Random }
    }

    /// Content placed at the origin, all padding after it.
    pub fn trailing(sx: usize, sy: usize, depth: u32) -> Self {
        let multiple = 1usize << depth;
        Self {
            multiple,
            before: (0, 0),
            padded: (round_up(sx, multiple), round_up(sy, multiple)),
            mode: PadMode::Centered,
        }
    }
}

/// Grow a stack: zeros everywhere except the solid channel, which is padded
/// with ones.
pub fn pad(stack: &ChannelStack, spec: &PaddingSpec) -> Result<ChannelStack> {
    let (px, py) = spec.padded;
    if px < stack.sx + spec.before.0 || py < stack.sy + spec.before.1 {
        return Err(CoreError::Shape("padding spec is smaller than the stack".into()));
    }
    let mut out = ChannelStack::zeros(stack.channels, px, py);
    if stack.channels > CH_SOLID {
        let n = px * py;
        out.data[CH_SOLID * n..(CH_SOLID + 1) * n].fill(1.0);
    }
    for c in 0..stack.channels {
        for a in 0..stack.sx {
            let src = stack.idx(c, a, 0);
            let dst = out.idx(c, a + spec.before.0, spec.before.1);
            out.data[dst..dst + stack.sy].copy_from_slice(&stack.data[src..src + stack.sy]);
        }
    }
    Ok(out)
}

/// Crop the content region of a padded stack back out.
pub fn unpad(stack: &ChannelStack, spec: &PaddingSpec, sx: usize, sy: usize) -> Result<ChannelStack> {
    if (stack.sx, stack.sy) != spec.padded || sx + spec.before.0 > stack.sx || sy + spec.before.1 > stack.sy {
        return Err(CoreError::Shape("stack does not match padding spec".into()));
    }
    let mut out = ChannelStack::zeros(stack.channels, sx, sy);
    for c in 0..stack.channels {
        for a in 0..sx {
            let src = stack.idx(c, a + spec.before.0, spec.before.1);
            let dst = out.idx(c, a, 0);
            out.data[dst..dst + sy].copy_from_slice(&stack.data[src..src + sy]);
        }
    }
    Ok(out)
}

/// Baseline layout without the symmetric grid: u `(nx+1, ny)` and v
/// `(nx, ny+1)` each zero-padded at the end to `(nx+1, ny+1)`, stacked as
/// two channels. Reflecting the scene does not reflect this layout.
pub fn naive_mac_stack(vel: &MacVelocity2, dims: &GridDims) -> Result<ChannelStack> {
    vel.check(dims)?;
    let (sx, sy) = (dims.nx + 1, dims.ny + 1);
    let mut out = ChannelStack::zeros(2, sx, sy);
    for i in 0..=dims.nx {
        for j in 0..dims.ny {
            out.set(0, i, j, vel.u.get(i, j) as f32);
        }
    }
    for i in 0..dims.nx {
        for j in 0..=dims.ny {
            out.set(1, i, j, vel.v.get(i, j) as f32);
        }
    }
    Ok(out)
}
