//! Dense rank-`d` kernels.

use super::opcount;
use super::{check_len, DENSE_GUARD};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A rank-`d` tensor of side `n` stored row-major (`n^d` values; the last
/// axis is contiguous). For `d = 2`, index `[i][j]` sits at `i * n + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseKernel {
    d: usize,
    n: usize,
    values: Vec<f64>,
}

impl DenseKernel {
    pub fn zeros(d: usize, n: usize) -> Result<Self> {
        let len = dense_len(d, n)?;
        Ok(Self { d, n, values: vec![0.0; len] })
    }

    pub fn from_values(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let len = dense_len(d, n)?;
        check_len(len, values.len())?;
        Ok(Self { d, n, values })
    }

    /// Square matrix constructor (`d = 2`) from row-major values.
    pub fn from_matrix(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_values(2, n, values)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry at a full multi-index (length `d`).
    pub fn entry(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.d);
        let mut flat = 0;
        for &i in index {
            debug_assert!(i < self.n);
            flat = flat * self.n + i;
        }
        self.values[flat]
    }

    /// Matrix entry (`d = 2`).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.d, 2);
        self.values[i * self.n + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert_eq!(self.d, 2);
        &mut self.values[i * self.n + j]
    }

    /// Full contraction with `d` copies of `w`, performed axis by axis.
    pub fn multilinear_form(&self, w: &[f64]) -> Result<f64> {
        check_len(self.n, w.len())?;
        let n = self.n;
        if self.d == 1 {
            opcount::charge(n as u64);
            return Ok(dot(&self.values, w));
        }
        // Contract the contiguous last axis first, then repeat on the result.
        let mut buf: Vec<f64> = self
            .values
            .chunks_exact(n)
            .map(|row| dot(row, w))
            .collect();
        opcount::charge(self.values.len() as u64);
        for _ in 2..self.d {
            let next: Vec<f64> = buf.chunks_exact(n).map(|row| dot(row, w)).collect();
            opcount::charge(buf.len() as u64);
            buf = next;
        }
        opcount::charge(n as u64);
        Ok(dot(&buf, w))
    }

    /// Linear-map application `y = K x` (`d = 2`).
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_matrix()?;
        check_len(self.n, x.len())?;
        opcount::charge(self.values.len() as u64);
        Ok(self.values.chunks_exact(self.n).map(|row| dot(row, x)).collect())
    }

    /// d(upstream * form)/d(entry[i1..id]) = upstream * w[i1] * ... * w[id].
    pub fn accumulate_grad_form(&self, w: &[f64], upstream: f64, out: &mut [f64]) -> Result<()> {
        check_len(self.n, w.len())?;
        grad_outer(out, w, self.d, upstream);
        Ok(())
    }

    /// d(dot(upstream, K x))/dK[i][j] = upstream[i] * x[j].
    pub fn accumulate_grad_matvec(
        &self,
        x: &[f64],
        upstream: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.require_matrix()?;
        check_len(self.n, x.len())?;
        check_len(self.n, upstream.len())?;
        for (row, &u) in out.chunks_exact_mut(self.n).zip(upstream) {
            axpy(row, u, x);
        }
        Ok(())
    }

    pub(super) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.values);
    }

    pub(super) fn read_params(&mut self, values: &[f64]) {
        self.values.copy_from_slice(values);
    }

    fn require_matrix(&self) -> Result<()> {
        if self.d != 2 {
            return Err(Error::InvalidShape(format!(
                "matvec requires a d = 2 kernel, got d = {}",
                self.d
            )));
        }
        Ok(())
    }
}

fn dense_len(d: usize, n: usize) -> Result<usize> {
    if d < 1 {
        return Err(Error::InvalidShape("tensor rank d must be >= 1".into()));
    }
    if !n.is_power_of_two() {
        return Err(Error::InvalidShape(format!("side n = {n} is not a power of two")));
    }
    let len = (n as u128).pow(d as u32);
    if len > DENSE_GUARD {
        return Err(Error::SizeGuard { requested: len, guard: DENSE_GUARD });
    }
    Ok(len as usize)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `dst += c * src`, elementwise.
#[inline]
pub(crate) fn axpy(dst: &mut [f64], c: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Adds `coeff * w ⊗ w ⊗ ... ⊗ w` (`d` factors) into `out`, row-major.
fn grad_outer(out: &mut [f64], w: &[f64], d: usize, coeff: f64) {
    if d == 1 {
        axpy(out, coeff, w);
        return;
    }
    let stride = out.len() / w.len();
    for (chunk, &wi) in out.chunks_exact_mut(stride).zip(w) {
        grad_outer(chunk, w, d - 1, coeff * wi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_form_is_wi_wj() {
        let mut k = DenseKernel::zeros(2, 4).unwrap();
        *k.at_mut(1, 2) = 1.0;
        let w = [0.5, 2.0, 3.0, -1.0];
        assert_eq!(k.multilinear_form(&w).unwrap(), 2.0 * 3.0);
    }

    #[test]
    fn zero_window_gives_zero() {
        let k = DenseKernel::from_values(3, 2, (0..8).map(|v| v as f64).collect()).unwrap();
        assert_eq!(k.multilinear_form(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn form_matches_brute_force_d3() {
        let values: Vec<f64> = (0..64).map(|v| (v as f64) * 0.1 - 3.0).collect();
        let k = DenseKernel::from_values(3, 4, values.clone()).unwrap();
        let w = [0.3, -1.2, 0.7, 2.0];
        let mut expect = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for l in 0..4 {
                    expect += values[(i * 4 + j) * 4 + l] * w[i] * w[j] * w[l];
                }
            }
        }
        let got = k.multilinear_form(&w).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn grad_form_entry_is_upstream_wi_wj() {
        let k = DenseKernel::zeros(2, 4).unwrap();
        let w = [2.0, -1.0, 0.5, -0.25];
        let g = k.grad_multilinear_form_ref(&w, 3.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[i * 4 + j], 3.0 * w[i] * w[j]);
            }
        }
    }

    impl DenseKernel {
        fn grad_multilinear_form_ref(&self, w: &[f64], upstream: f64) -> Vec<f64> {
            let mut out = vec![0.0; self.param_count()];
            self.accumulate_grad_form(w, upstream, &mut out).unwrap();
            out
        }
    }

    #[test]
    fn grad_matvec_is_outer_product() {
        let k = DenseKernel::zeros(2, 4).unwrap();
        let x = [1.0, 2.0, 3.0, -1.5];
        let up = [0.5, -1.0, 2.0, 0.25];
        let mut g = vec![0.0; 16];
        k.accumulate_grad_matvec(&x, &up, &mut g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[i * 4 + j], up[i] * x[j]);
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let k = DenseKernel::zeros(2, 4).unwrap();
        assert!(k.multilinear_form(&[1.0; 3]).is_err());
        assert!(k.matvec(&[1.0; 5]).is_err());
    }

    #[test]
    fn size_guard_rejects_huge_tensors() {
        assert!(matches!(DenseKernel::zeros(4, 256), Err(Error::SizeGuard { .. })));
    }
}
