use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::symgrid::ChannelStack;

use super::manifest::{Layer, LayerKind};

/// Dense `(channels, height, width)` f32 tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(CoreError::Shape(alloc::format!("{} values for a {c}x{h}x{w} tensor", data.len())));
        }
        Ok(Self { c, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max)
    }
}

impl From<ChannelStack> for Tensor {
    fn from(s: ChannelStack) -> Self {
        Self { c: s.channels, h: s.sx, w: s.sy, data: s.data }
    }
}

impl From<Tensor> for ChannelStack {
    fn from(t: Tensor) -> Self {
        ChannelStack { channels: t.c, sx: t.h, sy: t.w, data: t.data }
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`, all row-major and contiguous.
fn gemm_acc(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    gemm_beta(m, k, n, a, b, c, 1.0)
}

pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    gemm_beta(m, k, n, a, b, c, 0.0)
}

fn gemm_beta(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32], beta: f32) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths checked above; strides describe dense row-major
    // matrices inside those slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_kind(layer: &Layer, kind: LayerKind) -> Result<()> {
    if layer.kind != kind {
        return Err(CoreError::Shape(alloc::format!(
            "layer {} has kind {:?}, expected {kind:?}",
            layer.name,
            layer.kind
        )));
    }
    Ok(())
}

/// Stride-1 convolution with zero "same" padding. Weights are
/// `(out, in, kh, kw)` with odd kernel sizes.
pub fn conv2d(x: &Tensor, layer: &Layer) -> Result<Tensor> {
    check_kind(layer, LayerKind::Conv)?;
    let [oc, ic, kh, kw] = layer.shape;
    if ic != x.c {
        return Err(CoreError::Shape(alloc::format!("layer {} expects {ic} input channels, got {}", layer.name, x.c)));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(CoreError::Shape(alloc::format!("layer {} has even kernel {kh}x{kw}", layer.name)));
    }
    let (h, w) = (x.h, x.w);
    let hw = h * w;
    let mut out = Tensor::zeros(oc, h, w);
    for (o, b) in layer.bias.iter().enumerate() {
        out.data[o * hw..(o + 1) * hw].fill(*b);
    }
    if kh == 1 && kw == 1 {
        gemm_acc(oc, ic, hw, &layer.weights, &x.data, &mut out.data);
        return Ok(out);
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let k = ic * kh * kw;
    let mut cols = vec![0.0f32; k * hw];
    for c in 0..ic {
        let plane = x.plane(c);
        for dy in 0..kh {
            for dx in 0..kw {
                let row = &mut cols[((c * kh + dy) * kw + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    let x0 = pw.saturating_sub(dx);
                    let x1 = (w + pw).saturating_sub(dx).min(w);
                    if x0 < x1 {
                        let s0 = x0 + dx - pw;
                        dst[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                    }
                }
            }
        }
    }
    gemm_acc(oc, k, hw, &layer.weights, &cols, &mut out.data);
    Ok(out)
}

/// 2×2 average pooling with stride 2.
pub fn avg_pool2(x: &Tensor) -> Result<Tensor> {
    if !x.h.is_multiple_of(2) || !x.w.is_multiple_of(2) {
        return Err(CoreError::Shape(alloc::format!("cannot pool odd spatial size {}x{}", x.h, x.w)));
    }
    let (h2, w2) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.c, h2, w2);
    for c in 0..x.c {
        for y in 0..h2 {
            for xx in 0..w2 {
                let s = x.get(c, 2 * y, 2 * xx)
                    + x.get(c, 2 * y, 2 * xx + 1)
                    + x.get(c, 2 * y + 1, 2 * xx)
                    + x.get(c, 2 * y + 1, 2 * xx + 1);
                out.set(c, y, xx, 0.25 * s);
            }
        }
    }
    Ok(out)
}

/// Transposed 2×2 convolution with stride 2, doubling both spatial sizes.
/// Weights are `(in, out, 2, 2)`.
pub fn tconv2_up(x: &Tensor, layer: &Layer) -> Result<Tensor> {
    check_kind(layer, LayerKind::TConv)?;
    let [ic, oc, kh, kw] = layer.shape;
    if ic != x.c || kh != 2 || kw != 2 {
        return Err(CoreError::Shape(alloc::format!(
            "layer {} with shape {:?} cannot upsample {} channels",
            layer.name,
            layer.shape,
            x.c
        )));
    }
    let hw = x.h * x.w;
    // (out·4 × in) = transpose of the (in × out·4) weight matrix.
    let mut wt = vec![0.0f32; oc * 4 * ic];
    for i in 0..ic {
        for r in 0..oc * 4 {
            wt[r * ic + i] = layer.weights[i * oc * 4 + r];
        }
    }
    let mut taps = vec![0.0f32; oc * 4 * hw];
    gemm(oc * 4, ic, hw, &wt, &x.data, &mut taps);
    let (h2, w2) = (2 * x.h, 2 * x.w);
    let mut out = Tensor::zeros(oc, h2, w2);
    for o in 0..oc {
        let b = layer.bias[o];
        for a in 0..2 {
            for bb in 0..2 {
                let tap = &taps[((o * 2 + a) * 2 + bb) * hw..][..hw];
                for y in 0..x.h {
                    let row = &mut out.data[(o * h2 + 2 * y + a) * w2..][..w2];
                    for xx in 0..x.w {
                        row[2 * xx + bb] = tap[y * x.w + xx] + b;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Channel concatenation, `a` first.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if (a.h, a.w) != (b.h, b.w) {
        return Err(CoreError::Shape(alloc::format!("cannot concatenate {}x{} with {}x{}", a.h, a.w, b.h, b.w)));
    }
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Ok(Tensor { c: a.c + b.c, h: a.h, w: a.w, data })
}

/// Elementwise tanh, absolute error below 5e-7.
///
/// Branch-free over `exp(2x)` so the loop vectorizes.
pub fn tanh_in_place(xs: &mut [f32]) {
    for v in xs.iter_mut() {
        *v = tanh_fast(*v);
    }
}

#[inline(always)]
fn tanh_fast(x: f32) -> f32 {
    let x = x.clamp(-9.0, 9.0);
    let e = exp_fast(2.0 * x);
    (e - 1.0) / (e + 1.0)
}

/// `exp` for |x| ≤ 18 via 2^n · p(f), all in float/bit arithmetic.
#[inline(always)]
fn exp_fast(x: f32) -> f32 {
    const SHIFTER: f32 = 12582912.0; // 1.5 · 2^23
    let t = x * core::f32::consts::LOG2_E;
    let shifted = t + SHIFTER;
    let n = shifted - SHIFTER;
    let g = (t - n) * core::f32::consts::LN_2;
    let p = 1.0 + g * (1.0 + g * (0.5 + g * (1.0 / 6.0 + g * (1.0 / 24.0 + g * (1.0 / 120.0 + g * (1.0 / 720.0))))));
    let n_bits = shifted.to_bits().wrapping_sub(SHIFTER.to_bits());
    f32::from_bits(p.to_bits().wrapping_add(n_bits << 23))
}
