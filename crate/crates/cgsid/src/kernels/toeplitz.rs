//! Symmetric Toeplitz kernels (`d = 2`).

use super::dense::{axpy, dot};
use super::opcount;
use super::{check_len, DenseKernel};
use crate::error::Result;
use serde::{Deserialize, Serialize};

/// A symmetric Toeplitz matrix stored as its first row: `M[i][j] = row[|i-j|]`.
/// `n` parameters describe the full `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymToeplitz {
    row: Vec<f64>,
}

impl SymToeplitz {
    pub fn new(row: Vec<f64>) -> Self {
        Self { row }
    }

    pub fn zeros(n: usize) -> Self {
        Self { row: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.row.len()
    }

    pub fn param_count(&self) -> usize {
        self.row.len()
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn to_dense(&self) -> Result<DenseKernel> {
        let n = self.n();
        let mut dense = DenseKernel::zeros(2, n)?;
        for i in 0..n {
            for j in 0..n {
                *dense.at_mut(i, j) = self.row[i.abs_diff(j)];
            }
        }
        Ok(dense)
    }

    /// `sum_{i,j} row[|i-j|] w[i] w[j]`, grouped by lag.
    pub fn multilinear_form(&self, w: &[f64]) -> Result<f64> {
        let lags = self.lag_sums(w)?;
        opcount::charge(self.n() as u64);
        Ok(dot(&lags, &self.row))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, x.len())?;
        opcount::charge((n * n) as u64);
        let mut y = vec![0.0; n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                acc += self.row[i.abs_diff(j)] * xj;
            }
            *yi = acc;
        }
        Ok(y)
    }

    /// d(upstream * form)/d(row[m]) = upstream * sum_{|i-j|=m} w[i] w[j].
    pub fn accumulate_grad_form(&self, w: &[f64], upstream: f64, out: &mut [f64]) -> Result<()> {
        let lags = self.lag_sums(w)?;
        axpy(out, upstream, &lags);
        Ok(())
    }

    /// d(dot(upstream, M x))/d(row[m]) = sum_{|i-j|=m} upstream[i] x[j].
    pub fn accumulate_grad_matvec(
        &self,
        x: &[f64],
        upstream: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.n();
        check_len(n, x.len())?;
        check_len(n, upstream.len())?;
        for (i, &u) in upstream.iter().enumerate() {
            out[0] += u * x[i];
            for m in 1..n {
                let mut s = 0.0;
                if i >= m {
                    s += x[i - m];
                }
                if i + m < n {
                    s += x[i + m];
                }
                out[m] += u * s;
            }
        }
        Ok(())
    }

    /// Window autocorrelation by lag: `lag[m] = sum_{|i-j|=m} w[i] w[j]`.
    fn lag_sums(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, w.len())?;
        opcount::charge((n * (n + 1) / 2) as u64);
        let mut lags = vec![0.0; n];
        lags[0] = dot(w, w);
        for m in 1..n {
            lags[m] = 2.0 * dot(&w[..n - m], &w[m..]);
        }
        Ok(lags)
    }

    pub(super) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.row);
    }

    pub(super) fn read_params(&mut self, values: &[f64]) {
        self.row.copy_from_slice(values);
    }
}
