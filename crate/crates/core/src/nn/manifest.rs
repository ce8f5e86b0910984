//! U-Net topology description and the `VWNET1` weight file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VWNET1"            6 bytes
//! version             u32 (= 1)
//! header_len          u32
//! header              header_len bytes:
//!     in_channels, out_channels, depth, convs_per_level, kernel   u32 each
//!     n_widths u32, widths u32 × n_widths
//!     seed u64
//!     n_layers u32, then per layer:
//!         name_len u32, name (UTF-8), kind u8 (0 conv, 1 tconv), shape u32 × 4
//! tensors             per layer in header order: weights f32 × prod(shape),
//!                     then bias f32 × out channels
//! crc32               u32 over every preceding byte
//! ```
//!
//! Conv weights are `(out, in, kh, kw)`; transposed-conv weights are
//! `(in, out, 2, 2)`. Layer order and names are fixed by [`UnetConfig`]:
//! `enc{l}.conv{m}` for each encoder level, `mid.conv{m}`, then per decoder
//! level from the deepest up `dec{l}.up` and `dec{l}.conv{m}`, and finally
//! `head`, a 1×1 conv to the output channels. Decoder convs see the skip
//! activations concatenated before the upsampled ones.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, FormatError, Result};

pub const MAGIC: &[u8; 6] = b"VWNET1";
pub const FORMAT_VERSION: u32 = 1;
pub const OUT_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    TConv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub shape: [usize; 4],
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Layer {
    pub fn out_channels(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.shape[0],
            LayerKind::TConv => self.shape[1],
        }
    }

    /// Initialization fan-in: `dim1 · kh · kw` for both kinds, the same
    /// convention common training frameworks use.
    pub fn fan_in(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Number of pooling levels.
    pub depth: usize,
    pub convs_per_level: usize,
    pub kernel: usize,
    /// Channel width per level, `depth + 1` entries (the last is the
    /// bottleneck).
    pub widths: Vec<usize>,
}

impl UnetConfig {
    /// Widths doubling from `base` at each level, two 3×3 convs per level.
    pub fn new(in_channels: usize, depth: usize, base: usize) -> Self {
        Self {
            in_channels,
            out_channels: OUT_CHANNELS,
            depth,
            convs_per_level: 2,
            kernel: 3,
            widths: (0..=depth).map(|l| base << l).collect(),
        }
    }

    /// Default topology: base width 32 at depth 4, 16 at depth 2.
    pub fn default_for(in_channels: usize, depth: usize) -> Self {
        Self::new(in_channels, depth, if depth >= 4 { 32 } else { 16 })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Format(FormatError::ShapeChain(m)));
        if self.in_channels != 6 && self.in_channels != 7 {
            return bad(format!("in_channels must be 6 or 7, got {}", self.in_channels));
        }
        if self.out_channels != OUT_CHANNELS {
            return bad(format!("network must output {OUT_CHANNELS} channels, got {}", self.out_channels));
        }
        if self.depth != 2 && self.depth != 4 {
            return bad(format!("pooling depth must be 2 or 4, got {}", self.depth));
        }
        if self.widths.len() != self.depth + 1 || self.widths.contains(&0) {
            return bad(format!("need {} positive widths, got {:?}", self.depth + 1, self.widths));
        }
        if self.convs_per_level == 0 || self.kernel.is_multiple_of(2) {
            return bad(format!("convs_per_level {} / kernel {} invalid", self.convs_per_level, self.kernel));
        }
        Ok(())
    }

    /// Spatial sizes must be multiples of this.
    pub fn multiple(&self) -> usize {
        1 << self.depth
    }

    /// The expected `(name, kind, shape)` sequence.
    pub fn layer_specs(&self) -> Vec<(String, LayerKind, [usize; 4])> {
        let k = self.kernel;
        let mut out = Vec::new();
        let convs = |out: &mut Vec<_>, prefix: &str, mut cin: usize, width: usize| {
            for m in 0..self.convs_per_level {
                out.push((format!("{prefix}.conv{m}"), LayerKind::Conv, [width, cin, k, k]));
                cin = width;
            }
        };
        let mut cin = self.in_channels;
        for l in 0..self.depth {
            convs(&mut out, &format!("enc{l}"), cin, self.widths[l]);
            cin = self.widths[l];
        }
        convs(&mut out, "mid", cin, self.widths[self.depth]);
        for l in (0..self.depth).rev() {
            out.push((format!("dec{l}.up"), LayerKind::TConv, [self.widths[l + 1], self.widths[l], 2, 2]));
            convs(&mut out, &format!("dec{l}"), 2 * self.widths[l], self.widths[l]);
        }
        out.push((String::from("head"), LayerKind::Conv, [self.out_channels, self.widths[0], 1, 1]));
        out
    }
}

/// A complete set of network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightManifest {
    pub version: u32,
    pub config: UnetConfig,
    /// Seed used for initialization; informational once trained.
    pub seed: u64,
    pub layers: Vec<Layer>,
}

fn uniform(rng: &mut ChaCha8Rng, bound: f32) -> f32 {
    let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
    (2.0 * unit - 1.0) * bound
}

impl WeightManifest {
    /// Weights and biases uniform in `±1/√fan_in`, drawn in layer order from
    /// ChaCha8 seeded with `seed`.
    pub fn seeded(config: UnetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_specs()
            .into_iter()
            .map(|(name, kind, shape)| {
                let mut layer = Layer { name, kind, shape, weights: Vec::new(), bias: Vec::new() };
                let bound = 1.0 / libm::sqrtf(layer.fan_in() as f32);
                layer.weights = (0..shape.iter().product::<usize>()).map(|_| uniform(&mut rng, bound)).collect();
                layer.bias = (0..layer.out_channels()).map(|_| uniform(&mut rng, bound)).collect();
                layer
            })
            .collect();
        Ok(Self { version: FORMAT_VERSION, config, seed, layers })
    }

    /// All parameters zero: the network predicts no velocity change.
    pub fn zeros(config: UnetConfig) -> Result<Self> {
        let mut m = Self::seeded(config, 0)?;
        for l in &mut m.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
        Ok(m)
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Check that the layers form the chain described by the config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let specs = self.config.layer_specs();
        let bad = |m: String| Err(CoreError::Format(FormatError::ShapeChain(m)));
        if specs.len() != self.layers.len() {
            return bad(format!("expected {} layers, found {}", specs.len(), self.layers.len()));
        }
        for ((name, kind, shape), layer) in specs.iter().zip(&self.layers) {
            if &layer.name != name || layer.kind != *kind || layer.shape != *shape {
                return bad(format!(
                    "layer {} ({:?} {:?}) does not chain; expected {name} ({kind:?} {shape:?})",
                    layer.name, layer.kind, layer.shape
                ));
            }
            if layer.weights.len() != shape.iter().product::<usize>() || layer.bias.len() != layer.out_channels() {
                return bad(format!("layer {name} carries the wrong number of parameters"));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Vec::new();
        let put = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
        let c = &self.config;
        for v in [c.in_channels, c.out_channels, c.depth, c.convs_per_level, c.kernel, c.widths.len()] {
            put(&mut header, v);
        }
        for &w in &c.widths {
            put(&mut header, w);
        }
        header.extend_from_slice(&self.seed.to_le_bytes());
        put(&mut header, self.layers.len());
        for l in &self.layers {
            put(&mut header, l.name.len());
            header.extend_from_slice(l.name.as_bytes());
            header.push(match l.kind {
                LayerKind::Conv => 0,
                LayerKind::TConv => 1,
            });
            for &s in &l.shape {
                put(&mut header, s);
            }
        }
        let mut out = Vec::with_capacity(header.len() + 4 * self.parameter_count() + 20);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        put(&mut out, header.len());
        out.extend_from_slice(&header);
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Decode and validate. Magic, version, truncation, checksum and shape
    /// chain failures are reported as distinct [`FormatError`]s; no partial
    /// manifest is ever returned.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(FormatError::BadMagic.into());
        }
        let mut r = Reader { bytes, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::VersionMismatch { found: version, expected: FORMAT_VERSION }.into());
        }
        let header_len = r.u32()? as usize;
        let header_end =
            r.pos.checked_add(header_len).ok_or(FormatError::Malformed("header length overflow".into()))?;
        r.need(header_len)?;
        let mut fields = [0usize; 6];
        for f in &mut fields {
            *f = r.u32()? as usize;
        }
        let [in_channels, out_channels, depth, convs_per_level, kernel, n_widths] = fields;
        if n_widths > 64 {
            return Err(FormatError::Malformed(format!("{n_widths} widths")).into());
        }
        let mut widths = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            widths.push(r.u32()? as usize);
        }
        let seed = r.u64()?;
        let n_layers = r.u32()? as usize;
        if n_layers > 4096 {
            return Err(FormatError::Malformed(format!("{n_layers} layers")).into());
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let name_len = r.u32()? as usize;
            let name = core::str::from_utf8(r.take(name_len)?)
                .map_err(|_| FormatError::Malformed("layer name is not UTF-8".into()))?
                .into();
            let kind = match r.take(1)?[0] {
                0 => LayerKind::Conv,
                1 => LayerKind::TConv,
                k => return Err(FormatError::Malformed(format!("unknown layer kind {k}")).into()),
            };
            let mut shape = [0usize; 4];
            for s in &mut shape {
                *s = r.u32()? as usize;
            }
            layers.push(Layer { name, kind, shape, weights: Vec::new(), bias: Vec::new() });
        }
        if r.pos != header_end {
            return Err(FormatError::Malformed("header length disagrees with contents".into()).into());
        }
        let mut payload = 0usize;
        for l in &layers {
            let count = l
                .shape
                .iter()
                .try_fold(1usize, |acc, &s| acc.checked_mul(s))
                .and_then(|n| n.checked_add(l.out_channels()))
                .ok_or(FormatError::Malformed(format!("layer {} is too large", l.name)))?;
            payload = payload.checked_add(count).ok_or(FormatError::Malformed("payload overflow".into()))?;
        }
        let total = payload
            .checked_mul(4)
            .and_then(|p| p.checked_add(r.pos + 4))
            .ok_or(FormatError::Malformed("payload overflow".into()))?;
        if bytes.len() < total {
            return Err(FormatError::Truncated { needed: total, available: bytes.len() }.into());
        }
        if bytes.len() > total {
            return Err(FormatError::Malformed(format!("{} trailing bytes", bytes.len() - total)).into());
        }
        let stored = u32::from_le_bytes(bytes[total - 4..].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..total - 4]);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed }.into());
        }
        for l in &mut layers {
            l.weights = r.f32s(l.shape.iter().product())?;
            l.bias = r.f32s(l.out_channels())?;
        }
        let manifest = Self {
            version,
            config: UnetConfig { in_channels, out_channels, depth, convs_per_level, kernel, widths },
            seed,
            layers,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&self, n: usize) -> core::result::Result<(), FormatError> {
        let needed = self.pos.saturating_add(n);
        if needed > self.bytes.len() {
            return Err(FormatError::Truncated { needed, available: self.bytes.len() });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> core::result::Result<&'a [u8], FormatError> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> core::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> core::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> core::result::Result<Vec<f32>, FormatError> {
        let raw = self.take(4 * n)?;
        let mut out = vec![0.0; n];
        for (o, c) in out.iter_mut().zip(raw.chunks_exact(4)) {
            *o = f32::from_le_bytes(c.try_into().unwrap());
        }
        Ok(out)
    }
}
