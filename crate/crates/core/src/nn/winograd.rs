//! 3×3 stride-1 "same" convolution via Winograd F(2×2, 3×3).
//!
//! Each 2×2 output tile is `Aᵀ [(G g Gᵀ) ⊙ (Bᵀ d B)] A` for the 4×4 input
//! patch `d`; summing over input channels turns the elementwise product into
//! 16 independent GEMMs. Kernel transforms are computed once per layer.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{gemm, tanh_in_place, Tensor};

/// Target tile count per block.
const CHUNK_TILES: usize = 256;

/// Transformed weights: 16 matrices of `out × in`.
#[derive(Debug, Clone)]
pub struct WinogradKernel {
    pub oc: usize,
    pub ic: usize,
    u: Vec<f32>,
    bias: Vec<f32>,
}

impl WinogradKernel {
    /// `weights` is `(out, in, 3, 3)`.
    pub fn new(oc: usize, ic: usize, weights: &[f32], bias: &[f32]) -> Self {
        assert_eq!(weights.len(), oc * ic * 9);
        let mut u = vec![0.0f32; 16 * oc * ic];
        for o in 0..oc {
            for i in 0..ic {
                let g = &weights[(o * ic + i) * 9..][..9];
                // G g: 4×3
                let mut t = [[0.0f32; 3]; 4];
                for c in 0..3 {
                    let (g0, g1, g2) = (g[c], g[3 + c], g[6 + c]);
                    t[0][c] = g0;
                    t[1][c] = 0.5 * (g0 + g1 + g2);
                    t[2][c] = 0.5 * (g0 - g1 + g2);
                    t[3][c] = g2;
                }
                for (r, row) in t.iter().enumerate() {
                    let (g0, g1, g2) = (row[0], row[1], row[2]);
                    let vals = [g0, 0.5 * (g0 + g1 + g2), 0.5 * (g0 - g1 + g2), g2];
                    for (c, v) in vals.iter().enumerate() {
                        u[((r * 4 + c) * oc + o) * ic + i] = *v;
                    }
                }
            }
        }
        Self { oc, ic, u, bias: bias.to_vec() }
    }

    /// Convolve `x`, optionally applying tanh to the result.
    pub fn apply(&self, x: &Tensor, tanh: bool) -> Tensor {
        assert_eq!(x.c, self.ic);
        let (h, w) = (x.h, x.w);
        let (th, tw) = (h.div_ceil(2), w.div_ceil(2));
        let (ph, pw) = (2 * th + 2, 2 * tw + 2);

        let mut padded = vec![0.0f32; self.ic * ph * pw];
        for i in 0..self.ic {
            let plane = x.plane(i);
            let dst = &mut padded[i * ph * pw..][..ph * pw];
            for y in 0..h {
                dst[(y + 1) * pw + 1..][..w].copy_from_slice(&plane[y * w..][..w]);
            }
        }

        // Tiles are processed a few tile rows at a time so the transformed
        // input and product blocks stay in cache.
        let rows_per_chunk = (CHUNK_TILES / tw).clamp(1, th);
        let max_tiles = rows_per_chunk * tw;
        let mut v = vec![0.0f32; 16 * self.ic * max_tiles];
        let mut m = vec![0.0f32; 16 * self.oc * max_tiles];
        let mut cols = vec![0.0f32; 16 * tw];
        let mut t = vec![0.0f32; 8 * tw];
        let mut full = vec![0.0f32; 4 * tw];
        let mut out = Tensor::zeros(self.oc, h, w);

        let mut ty0 = 0;
        while ty0 < th {
            let rows = rows_per_chunk.min(th - ty0);
            let n = rows * tw;
            for i in 0..self.ic {
                let src = &padded[i * ph * pw..][..ph * pw];
                for dty in 0..rows {
                    let ty = ty0 + dty;
                    // d B along each of the four patch rows.
                    for r in 0..4 {
                        let p = &src[(2 * ty + r) * pw..][..pw];
                        let (c0, rest) = cols[r * 4 * tw..][..4 * tw].split_at_mut(tw);
                        let (c1, rest) = rest.split_at_mut(tw);
                        let (c2, c3) = rest.split_at_mut(tw);
                        for tx in 0..tw {
                            let (a, b, c, d) = (p[2 * tx], p[2 * tx + 1], p[2 * tx + 2], p[2 * tx + 3]);
                            c0[tx] = a - c;
                            c1[tx] = b + c;
                            c2[tx] = c - b;
                            c3[tx] = b - d;
                        }
                    }
                    // Bᵀ (d B) across rows.
                    for c in 0..4 {
                        let row = |r: usize| &cols[(r * 4 + c) * tw..][..tw];
                        let (x0, x1, x2, x3) = (row(0), row(1), row(2), row(3));
                        let at = |xi: usize| {
                            let s = (xi * self.ic + i) * n + dty * tw;
                            s..s + tw
                        };
                        for (k, val) in v[at(c)].iter_mut().enumerate() {
                            *val = x0[k] - x2[k];
                        }
                        for (k, val) in v[at(4 + c)].iter_mut().enumerate() {
                            *val = x1[k] + x2[k];
                        }
                        for (k, val) in v[at(8 + c)].iter_mut().enumerate() {
                            *val = x2[k] - x1[k];
                        }
                        for (k, val) in v[at(12 + c)].iter_mut().enumerate() {
                            *val = x1[k] - x3[k];
                        }
                    }
                }
            }

            for xi in 0..16 {
                gemm(
                    self.oc,
                    self.ic,
                    n,
                    &self.u[xi * self.oc * self.ic..][..self.oc * self.ic],
                    &v[xi * self.ic * n..][..self.ic * n],
                    &mut m[xi * self.oc * n..][..self.oc * n],
                );
            }

            let stride = self.oc * n;
            for o in 0..self.oc {
                let b = self.bias[o];
                for dty in 0..rows {
                    let base = o * n + dty * tw;
                    let mrow = |xi: usize| &m[xi * stride + base..][..tw];
                    // Aᵀ m across rows.
                    for c in 0..4 {
                        let (m0, m1, m2, m3) = (mrow(c), mrow(4 + c), mrow(8 + c), mrow(12 + c));
                        let (t0, t1) = t[c * 2 * tw..][..2 * tw].split_at_mut(tw);
                        for k in 0..tw {
                            t0[k] = m0[k] + m1[k] + m2[k];
                            t1[k] = m1[k] - m2[k] - m3[k];
                        }
                    }
                    // (Aᵀ m) A along columns, interleaving the two output columns.
                    for r in 0..2 {
                        let tr = |c: usize| &t[(c * 2 + r) * tw..][..tw];
                        let (a0, a1, a2, a3) = (tr(0), tr(1), tr(2), tr(3));
                        let dst = &mut full[r * 2 * tw..][..2 * tw];
                        for k in 0..tw {
                            dst[2 * k] = a0[k] + a1[k] + a2[k] + b;
                            dst[2 * k + 1] = a1[k] - a2[k] - a3[k] + b;
                        }
                    }
                    if tanh {
                        tanh_in_place(&mut full);
                    }
                    for r in 0..2 {
                        let y = 2 * (ty0 + dty) + r;
                        if y < h {
                            out.data[(o * h + y) * w..][..w].copy_from_slice(&full[r * 2 * tw..][..w]);
                        }
                    }
                }
            }
            ty0 += rows;
        }
        out
    }
}
