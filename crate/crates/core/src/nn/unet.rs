use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

use super::manifest::{Layer, LayerKind, UnetConfig, WeightManifest};
use super::tensor::{avg_pool2, concat, conv2d, tanh_in_place, tconv2_up, Tensor};
use super::winograd::WinogradKernel;

enum Op {
    Winograd(WinogradKernel),
    Direct(Layer),
}

impl Op {
    fn new(layer: &Layer) -> Self {
        let [oc, ic, kh, kw] = layer.shape;
        if layer.kind == LayerKind::Conv && kh == 3 && kw == 3 {
            Op::Winograd(WinogradKernel::new(oc, ic, &layer.weights, &layer.bias))
        } else {
            Op::Direct(layer.clone())
        }
    }

    fn conv(&self, x: &Tensor, tanh: bool) -> Result<Tensor> {
        match self {
            Op::Winograd(k) => {
                if k.ic != x.c {
                    return Err(CoreError::Shape(format!("conv expects {} channels, got {}", k.ic, x.c)));
                }
                Ok(k.apply(x, tanh))
            }
            Op::Direct(l) => {
                let mut y = conv2d(x, l)?;
                if tanh {
                    tanh_in_place(&mut y.data);
                }
                Ok(y)
            }
        }
    }

    fn up(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Op::Direct(l) => tconv2_up(x, l),
            Op::Winograd(_) => Err(CoreError::Shape("upsampling layer is not a transposed conv".into())),
        }
    }
}

/// A validated network ready for repeated inference. Building one
/// precomputes per-layer kernel transforms.
pub struct Unet {
    config: UnetConfig,
    /// Encoder convs per level, then the bottleneck convs.
    down: Vec<Vec<Op>>,
    /// Per decoder level, deepest first: upsampling op, then convs.
    up: Vec<(Op, Vec<Op>)>,
    head: Op,
}

impl Unet {
    pub fn new(weights: &WeightManifest) -> Result<Self> {
        weights.validate()?;
        let cfg = weights.config.clone();
        let mut layers = weights.layers.iter();
        let mut take = |n: usize| layers.by_ref().take(n).map(Op::new).collect::<Vec<_>>();
        let down = (0..=cfg.depth).map(|_| take(cfg.convs_per_level)).collect();
        let up = (0..cfg.depth)
            .map(|_| {
                let mut ops = take(1 + cfg.convs_per_level);
                let first = ops.remove(0);
                (first, ops)
            })
            .collect();
        let head = take(1).pop().expect("validated manifest has a head");
        Ok(Self { config: cfg, down, up, head })
    }

    pub fn config(&self) -> &UnetConfig {
        &self.config
    }

    /// Run the network on an already padded input.
    ///
    /// Each encoder level applies its convs (each followed by tanh), keeps
    /// the result as a skip, and average-pools. The decoder upsamples with a
    /// transposed conv, concatenates `[skip, up]`, and applies its convs.
    /// The 1×1 head is linear so the output is unbounded.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let cfg = &self.config;
        if input.c != cfg.in_channels {
            return Err(CoreError::Shape(format!(
                "network expects {} input channels, got {}",
                cfg.in_channels, input.c
            )));
        }
        let m = cfg.multiple();
        if !input.h.is_multiple_of(m) || !input.w.is_multiple_of(m) || input.h == 0 || input.w == 0 {
            return Err(CoreError::Shape(format!(
                "input {}x{} is not a positive multiple of {m}; pad it first",
                input.h, input.w
            )));
        }
        let block = |x: &Tensor, ops: &[Op]| -> Result<Tensor> {
            let mut y = ops[0].conv(x, true)?;
            for op in &ops[1..] {
                y = op.conv(&y, true)?;
            }
            Ok(y)
        };
        let mut skips = Vec::with_capacity(cfg.depth);
        let mut x = block(input, &self.down[0])?;
        for ops in &self.down[1..] {
            let pooled = avg_pool2(&x)?;
            skips.push(x);
            x = block(&pooled, ops)?;
        }
        for (up, ops) in &self.up {
            let upsampled = up.up(&x)?;
            let skip = skips.pop().expect("one skip per level");
            x = block(&concat(&skip, &upsampled)?, ops)?;
        }
        self.head.conv(&x, false)
    }
}

/// One-off inference; prefer [`Unet`] when running many frames.
pub fn forward(input: &Tensor, weights: &WeightManifest) -> Result<Tensor> {
    Unet::new(weights)?.forward(input)
}
