//! Projection of a dense matrix kernel onto the hierarchical format.
//!
//! Each off-diagonal orthant block is replaced by its best rank-`k`
//! approximation in the Frobenius norm (truncated singular value
//! decomposition), and the diagonal recursion copies the leaves verbatim.
//! Because the blocks partition the off-diagonal entries, the block-wise
//! optimum is the global Frobenius optimum over the format.

use super::{param_count, DenseKernel, HKernel, Kernel, KernelStructure, ParamVector};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Best Frobenius-norm approximation of a dense `d = 2` kernel within the
/// hierarchical format of rank budget `k` and leaf side `leaf_size`.
pub fn project_to_hierarchical(
    dense: &DenseKernel,
    k: usize,
    leaf_size: usize,
) -> Result<HKernel> {
    if dense.d() != 2 {
        return Err(Error::InvalidShape(format!(
            "projection requires a d = 2 kernel, got d = {}",
            dense.d()
        )));
    }
    let n = dense.n();
    let structure = KernelStructure::hierarchical(2, n, k, leaf_size);
    let expected = param_count(&structure)?;
    let mut params = Vec::with_capacity(expected);
    project_node(dense, n, 0, 0, k, leaf_size, &mut params);
    debug_assert_eq!(params.len(), expected);
    match Kernel::unflatten(&ParamVector::new(params), &structure)? {
        Kernel::Hierarchical(h) => Ok(h),
        _ => unreachable!("hierarchical structure unflattens to a hierarchical kernel"),
    }
}

/// Emit the projected parameters of the block at `(r0, c0)` with the given
/// side, in flatten order: diagonal children first, then the off-diagonal
/// blocks for masks `1` (rows in the second half) and `2` (columns in the
/// second half).
fn project_node(
    dense: &DenseKernel,
    side: usize,
    r0: usize,
    c0: usize,
    k: usize,
    leaf_size: usize,
    out: &mut Vec<f64>,
) {
    if side <= leaf_size {
        for i in 0..side {
            for j in 0..side {
                out.push(dense.at(r0 + i, c0 + j));
            }
        }
    } else {
        let half = side / 2;
        project_node(dense, half, r0, c0, k, leaf_size, out);
        project_node(dense, half, r0 + half, c0 + half, k, leaf_size, out);
        push_truncated_svd(dense, half, r0 + half, c0, k, out);
        push_truncated_svd(dense, half, r0, c0 + half, k, out);
    }
}

/// Append the top-`k` singular triplets of the `side x side` submatrix at
/// `(r0, c0)` as factor pairs `(sqrt(s) u_g, sqrt(s) v_g)`; groups beyond the
/// matrix rank are zero.
fn push_truncated_svd(
    dense: &DenseKernel,
    side: usize,
    r0: usize,
    c0: usize,
    k: usize,
    out: &mut Vec<f64>,
) {
    let m = DMatrix::from_fn(side, side, |i, j| dense.at(r0 + i, c0 + j));
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors were requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors were requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("singular values are finite"));
    for g in 0..k {
        match order.get(g) {
            Some(&idx) => {
                let scale = sv[idx].max(0.0).sqrt();
                out.extend((0..side).map(|i| scale * u[(i, idx)]));
                out.extend((0..side).map(|j| scale * v_t[(idx, j)]));
            }
            None => out.extend(std::iter::repeat(0.0).take(2 * side)),
        }
    }
}
