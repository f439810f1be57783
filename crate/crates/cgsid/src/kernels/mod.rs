//! Kernel representations and their calculus.
//!
//! A Volterra kernel of order `d` over a memory of `n` samples is a rank-`d`
//! tensor with `n` indices per axis. Three storage formats are supported:
//!
//! - [`DenseKernel`]: all `n^d` entries, row-major;
//! - [`SymToeplitz`]: a symmetric Toeplitz matrix (`d = 2` only), `n` entries;
//! - [`HKernel`]: a hierarchical tensor that stores the `2^d - 2` off-diagonal
//!   orthants of each level as sums of `k` outer products and recurses on the
//!   two diagonal orthants until dense leaves of side `leaf_size`.
//!
//! Every format supports conversion to dense (the test oracle), evaluation as
//! a multilinear form against an input window, evaluation as a linear map
//! (`d = 2`), and analytic gradients with respect to every stored parameter.
//! Parameters flatten into a [`ParamVector`] with a deterministic layout so
//! the same structure always maps scalars to the same positions.

mod dense;
mod hier;
pub mod opcount;
mod params;
mod project;
mod toeplitz;

pub use dense::DenseKernel;
pub(crate) use dense::{axpy, dot};
pub use hier::{HKernel, LowRankBlock};
pub use params::ParamVector;
pub use project::project_to_hierarchical;
pub use toeplitz::SymToeplitz;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Guard on `n^d` when materializing a dense tensor.
pub const DENSE_GUARD: u128 = 1 << 24;

/// Storage format of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repr {
    Dense,
    Hierarchical,
    ToeplitzSym,
}

impl std::fmt::Display for Repr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Repr::Dense => write!(f, "dense"),
            Repr::Hierarchical => write!(f, "hierarchical"),
            Repr::ToeplitzSym => write!(f, "toeplitz_sym"),
        }
    }
}

/// Shape descriptor for one kernel: enough to count parameters and to
/// reconstruct the storage layout from a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelStructure {
    pub repr: Repr,
    /// Tensor rank (number of axes).
    pub d: usize,
    /// Side length (memory in samples); a power of two.
    pub n: usize,
    /// Rank budget of the off-diagonal low-rank blocks (hierarchical only).
    pub k: usize,
    /// Side at which the diagonal recursion stops in a dense leaf
    /// (hierarchical only); a power of two.
    pub leaf_size: usize,
}

impl KernelStructure {
    pub fn dense(d: usize, n: usize) -> Self {
        Self { repr: Repr::Dense, d, n, k: 0, leaf_size: 0 }
    }

    pub fn hierarchical(d: usize, n: usize, k: usize, leaf_size: usize) -> Self {
        Self { repr: Repr::Hierarchical, d, n, k, leaf_size }
    }

    pub fn toeplitz_sym(n: usize) -> Self {
        Self { repr: Repr::ToeplitzSym, d: 2, n, k: 0, leaf_size: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidShape("tensor rank d must be >= 1".into()));
        }
        if !self.n.is_power_of_two() {
            return Err(Error::InvalidShape(format!(
                "side n = {} is not a power of two",
                self.n
            )));
        }
        match self.repr {
            Repr::Dense => Ok(()),
            Repr::ToeplitzSym => {
                if self.d != 2 {
                    Err(Error::InvalidShape(format!(
                        "toeplitz_sym requires d = 2, got d = {}",
                        self.d
                    )))
                } else {
                    Ok(())
                }
            }
            Repr::Hierarchical => {
                if self.d < 2 {
                    return Err(Error::InvalidShape(
                        "hierarchical kernels require d >= 2".into(),
                    ));
                }
                if self.k == 0 {
                    return Err(Error::InvalidShape("rank budget k must be >= 1".into()));
                }
                if !self.leaf_size.is_power_of_two() {
                    return Err(Error::InvalidShape(format!(
                        "leaf_size = {} is not a power of two",
                        self.leaf_size
                    )));
                }
                if self.n < self.leaf_size {
                    return Err(Error::InvalidShape(format!(
                        "side n = {} is smaller than leaf_size = {}",
                        self.n, self.leaf_size
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Exact number of stored scalars for a kernel of the given structure.
///
/// For the hierarchical format the recursion halves the side until it
/// reaches `leaf_size`, where a dense block of `leaf_size^d` entries is
/// stored. Each split level stores `2^d - 2` off-diagonal blocks of `k`
/// groups of `d` factor vectors with `side/2` entries each.
pub fn param_count(structure: &KernelStructure) -> Result<usize> {
    structure.validate()?;
    let &KernelStructure { repr, d, n, k, leaf_size } = structure;
    Ok(match repr {
        Repr::Dense => n.pow(d as u32),
        Repr::ToeplitzSym => n,
        Repr::Hierarchical => hier_count(d, n, k, leaf_size),
    })
}

fn hier_count(d: usize, side: usize, k: usize, leaf_size: usize) -> usize {
    if side <= leaf_size {
        side.pow(d as u32)
    } else {
        let half = side / 2;
        let offdiag = ((1usize << d) - 2) * k * d * half;
        offdiag + 2 * hier_count(d, half, k, leaf_size)
    }
}

/// Closed-form upper bound `2^p (2^{d-1} d k p - d k p + 1)` on the number of
/// parameters of a rank-`d` hierarchical tensor of side `2^p`.
///
/// This solves the recurrence `N(p) = k d (2^d - 2) 2^{p-1} + 2 N(p-1)`,
/// `N(0) = 1`, whose off-diagonal term uses the block side `2^{p-1}`. For
/// `d = 2` it reduces to `2^p (2 k p + 1)`.
pub fn param_bound_closed_form(p: u32, d: u32, k: u64) -> u64 {
    assert!(d >= 2, "tensor rank d must be >= 2");
    assert!(k >= 1, "rank budget k must be >= 1");
    let p64 = p as u64;
    let d64 = d as u64;
    (1u64 << p) * ((1u64 << (d - 1)) * d64 * k * p64 - d64 * k * p64 + 1)
}

/// A kernel in any of the supported storage formats.
///
/// Dispatches the shared operations (dense conversion, evaluation, gradients,
/// flattening) to the underlying representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Dense(DenseKernel),
    Hierarchical(HKernel),
    ToeplitzSym(SymToeplitz),
}

impl Kernel {
    pub fn structure(&self) -> KernelStructure {
        match self {
            Kernel::Dense(k) => KernelStructure::dense(k.d(), k.n()),
            Kernel::Hierarchical(h) => {
                KernelStructure::hierarchical(h.d(), h.n(), h.k(), h.leaf_size())
            }
            Kernel::ToeplitzSym(t) => KernelStructure::toeplitz_sym(t.n()),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Kernel::Dense(k) => k.d(),
            Kernel::Hierarchical(h) => h.d(),
            Kernel::ToeplitzSym(_) => 2,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Kernel::Dense(k) => k.n(),
            Kernel::Hierarchical(h) => h.n(),
            Kernel::ToeplitzSym(t) => t.n(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Kernel::Dense(k) => k.param_count(),
            Kernel::Hierarchical(h) => h.param_count(),
            Kernel::ToeplitzSym(t) => t.param_count(),
        }
    }

    /// Materialize the represented tensor as a dense kernel.
    pub fn to_dense(&self) -> Result<DenseKernel> {
        match self {
            Kernel::Dense(k) => Ok(k.clone()),
            Kernel::Hierarchical(h) => h.to_dense(),
            Kernel::ToeplitzSym(t) => t.to_dense(),
        }
    }

    /// Contract the kernel with `d` copies of the window `w`.
    pub fn multilinear_form(&self, w: &[f64]) -> Result<f64> {
        match self {
            Kernel::Dense(k) => k.multilinear_form(w),
            Kernel::Hierarchical(h) => h.multilinear_form(w),
            Kernel::ToeplitzSym(t) => t.multilinear_form(w),
        }
    }

    /// Apply the kernel as a linear map (`d = 2` only).
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Kernel::Dense(k) => k.matvec(x),
            Kernel::Hierarchical(h) => h.matvec(x),
            Kernel::ToeplitzSym(t) => t.matvec(x),
        }
    }

    /// Gradient of `upstream * multilinear_form(self, w)` with respect to
    /// every stored parameter, in flatten order.
    pub fn grad_multilinear_form(&self, w: &[f64], upstream: f64) -> Result<ParamVector> {
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_grad_form(w, upstream, &mut grad)?;
        Ok(ParamVector::new(grad))
    }

    /// Gradient of `dot(upstream, self * x)` with respect to every stored
    /// parameter, in flatten order (`d = 2` only).
    pub fn grad_matvec(&self, x: &[f64], upstream: &[f64]) -> Result<ParamVector> {
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_grad_matvec(x, upstream, &mut grad)?;
        Ok(ParamVector::new(grad))
    }

    /// Add the gradient of `upstream * multilinear_form(self, w)` into `out`.
    /// Used by the training loop to avoid one allocation per sample.
    pub fn accumulate_grad_form(&self, w: &[f64], upstream: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), got: out.len() });
        }
        match self {
            Kernel::Dense(k) => k.accumulate_grad_form(w, upstream, out),
            Kernel::Hierarchical(h) => h.accumulate_grad_form(w, upstream, out),
            Kernel::ToeplitzSym(t) => t.accumulate_grad_form(w, upstream, out),
        }
    }

    /// Add the gradient of `dot(upstream, self * x)` into `out`.
    pub fn accumulate_grad_matvec(
        &self,
        x: &[f64],
        upstream: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        if out.len() != self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), got: out.len() });
        }
        match self {
            Kernel::Dense(k) => k.accumulate_grad_matvec(x, upstream, out),
            Kernel::Hierarchical(h) => h.accumulate_grad_matvec(x, upstream, out),
            Kernel::ToeplitzSym(t) => t.accumulate_grad_matvec(x, upstream, out),
        }
    }

    /// All stored parameters in deterministic flatten order.
    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        match self {
            Kernel::Dense(k) => k.write_params(&mut out),
            Kernel::Hierarchical(h) => h.write_params(&mut out),
            Kernel::ToeplitzSym(t) => t.write_params(&mut out),
        }
        ParamVector::new(out)
    }

    /// Rebuild a kernel of the given structure from a flat parameter vector.
    pub fn unflatten(params: &ParamVector, structure: &KernelStructure) -> Result<Kernel> {
        let expected = param_count(structure)?;
        if params.len() != expected {
            return Err(Error::LengthMismatch { expected, got: params.len() });
        }
        let values = params.as_slice();
        Ok(match structure.repr {
            Repr::Dense => {
                Kernel::Dense(DenseKernel::from_values(structure.d, structure.n, values.to_vec())?)
            }
            Repr::ToeplitzSym => Kernel::ToeplitzSym(SymToeplitz::new(values.to_vec())),
            Repr::Hierarchical => {
                let mut h = HKernel::zeros(structure.d, structure.n, structure.k, structure.leaf_size)?;
                h.read_params(values);
                Kernel::Hierarchical(h)
            }
        })
    }

    /// Overwrite the stored parameters from a flat slice in flatten order.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), got: values.len() });
        }
        match self {
            Kernel::Dense(k) => k.read_params(values),
            Kernel::Hierarchical(h) => h.read_params(values),
            Kernel::ToeplitzSym(t) => t.read_params(values),
        }
        Ok(())
    }

    /// A kernel of the given structure with all parameters zero.
    pub fn zeros(structure: &KernelStructure) -> Result<Kernel> {
        Ok(match structure.repr {
            Repr::Dense => Kernel::Dense(DenseKernel::zeros(structure.d, structure.n)?),
            Repr::ToeplitzSym => Kernel::ToeplitzSym(SymToeplitz::new(vec![0.0; structure.n])),
            Repr::Hierarchical => Kernel::Hierarchical(HKernel::zeros(
                structure.d,
                structure.n,
                structure.k,
                structure.leaf_size,
            )?),
        })
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::LengthMismatch { expected, got })
    } else {
        Ok(())
    }
}
