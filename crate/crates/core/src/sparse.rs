//! Compressed sparse rows and Jacobi-preconditioned conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Square matrix in compressed sparse row form. Column indices are sorted
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-at-a-time builder. Rows must be pushed in order.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self { row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz), scratch: Vec::new() }
    }

    /// Add `value` at `col` in the row currently being built; duplicates are summed.
    pub fn add(&mut self, col: usize, value: f64) {
        if let Some(entry) = self.scratch.iter_mut().find(|(c, _)| *c == col) {
            entry.1 += value;
        } else {
            self.scratch.push((col, value));
        }
    }

    pub fn finish_row(&mut self) {
        self.scratch.sort_unstable_by_key(|&(c, _)| c);
        for &(c, v) in &self.scratch {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.scratch.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        let mut row_ptr = self.row_ptr;
        if row_ptr.is_empty() {
            row_ptr.push(0);
        }
        CsrMatrix { n: row_ptr.len() - 1, row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), vals: vec![1.0; n] }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `out = A x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// Largest `|A_ij - A_ji|` and largest `|A_ij|`.
    pub fn asymmetry(&self) -> (f64, f64) {
        let mut max_asym = 0.0f64;
        let mut max_entry = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                max_entry = max_entry.max(libm::fabs(v));
                max_asym = max_asym.max(libm::fabs(v - self.get(c, r)));
            }
        }
        (max_asym, max_entry)
    }

    /// Dense copy, row-major. Intended for small systems and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[r * self.n + c] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    /// Final `‖b − A x‖₂ / ‖b‖₂`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for symmetric positive (semi-)definite `A`, starting from
/// the contents of `x`, until `‖b − A x‖₂ ≤ tol ‖b‖₂`.
///
/// Uses the diagonal as preconditioner; rows with a zero diagonal are left
/// unpreconditioned. All reductions run in index order, so results are
/// bitwise reproducible.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<PcgStats> {
    let n = a.n();
    if b.len() != n || x.len() != n {
        return Err(CoreError::Shape(alloc::format!("system of size {n} with rhs {} and guess {}", b.len(), x.len())));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CoreError::InvalidInput(alloc::format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let b_norm = libm::sqrt(dot(b, b));
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(PcgStats { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = libm::sqrt(dot(&r, &r)) / b_norm;
    if res <= tol {
        return Ok(PcgStats { iterations: 0, relative_residual: res });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(CoreError::NotConverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = libm::sqrt(dot(&r, &r)) / b_norm;
        if res <= tol {
            return Ok(PcgStats { iterations: it, relative_residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(CoreError::NotConverged { iterations: max_iter, residual: res })
}
