//! Hierarchical low-rank kernels.
//!
//! A rank-`d` hierarchical tensor of side `n` splits each axis in half,
//! giving `2^d` orthants addressed by a `d`-bit mask (bit `a` set means the
//! indices along axis `a` fall in the second half). The two diagonal orthants
//! (masks `0` and `2^d - 1`) recurse; the remaining `2^d - 2` orthants are
//! each stored as a sum of `k` outer products of `d` factor vectors. The
//! recursion bottoms out in dense leaves of side `leaf_size`.

use super::dense::{axpy, dot};
use super::opcount;
use super::{check_len, hier_count, DenseKernel, KernelStructure};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Maximum supported tensor rank for hierarchical kernels.
pub const MAX_RANK: usize = 8;

/// One off-diagonal orthant: the sum over `k` groups of the `d`-way outer
/// product of that group's factor vectors, each of length `side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankBlock {
    side: usize,
    d: usize,
    k: usize,
    /// Contiguous `[group][axis][entry]` layout, `k * d * side` scalars.
    factors: Vec<f64>,
}

impl LowRankBlock {
    pub fn zeros(d: usize, side: usize, k: usize) -> Self {
        Self { side, d, k, factors: vec![0.0; k * d * side] }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn param_count(&self) -> usize {
        self.factors.len()
    }

    /// Factor vector of group `g` along axis `a`.
    pub fn factor(&self, g: usize, a: usize) -> &[f64] {
        let start = (g * self.d + a) * self.side;
        &self.factors[start..start + self.side]
    }

    pub fn factor_mut(&mut self, g: usize, a: usize) -> &mut [f64] {
        let start = (g * self.d + a) * self.side;
        &mut self.factors[start..start + self.side]
    }

    /// Materialize the represented dense block, row-major over `side^d`.
    pub fn to_dense(&self) -> Vec<f64> {
        let len = self.side.pow(self.d as u32);
        let mut out = vec![0.0; len];
        for g in 0..self.k {
            for (flat, slot) in out.iter_mut().enumerate() {
                let mut rem = flat;
                let mut prod = 1.0;
                for a in (0..self.d).rev() {
                    prod *= self.factor(g, a)[rem % self.side];
                    rem /= self.side;
                }
                *slot += prod;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum HNode {
    Leaf {
        side: usize,
        /// `side^d` values, row-major.
        values: Vec<f64>,
    },
    Split {
        side: usize,
        /// Orthants `00..0` and `11..1`, in that order.
        diag: Vec<HNode>,
        /// Orthant masks `1..=2^d - 2`, ascending; `offdiag[m - 1]` is mask `m`.
        offdiag: Vec<LowRankBlock>,
    },
}

/// A hierarchical kernel: dense diagonal leaves plus rank-`k` off-diagonal
/// orthant blocks at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HKernel {
    d: usize,
    n: usize,
    k: usize,
    leaf_size: usize,
    root: HNode,
}

impl HKernel {
    /// All-zero kernel with the given structure.
    pub fn zeros(d: usize, n: usize, k: usize, leaf_size: usize) -> Result<Self> {
        let structure = KernelStructure::hierarchical(d, n, k, leaf_size);
        super::param_count(&structure)?;
        if d > MAX_RANK {
            return Err(Error::InvalidShape(format!(
                "tensor rank d = {d} exceeds the supported maximum {MAX_RANK}"
            )));
        }
        Ok(Self { d, n, k, leaf_size, root: build_zero_node(d, n, k, leaf_size) })
    }

    /// Kernel with every stored scalar drawn i.i.d. uniform in
    /// `[-scale, scale]` from a generator seeded with `seed`.
    pub fn random(
        d: usize,
        n: usize,
        k: usize,
        leaf_size: usize,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale = {scale} must be finite and >= 0")));
        }
        let mut kernel = Self::zeros(d, n, k, leaf_size)?;
        let mut rng = crate::signals::seeded_rng(seed);
        let values: Vec<f64> =
            (0..kernel.param_count()).map(|_| rng.random_range(-scale..=scale)).collect();
        kernel.read_params(&values);
        Ok(kernel)
    }

    /// Leave the dense leaves untouched and redraw only the low-rank factor
    /// vectors, i.i.d. uniform in `[-scale, scale]`.
    ///
    /// An all-zero kernel is a stationary point of any loss that reaches the
    /// factors through their outer products, so training starts from tiny
    /// random factors instead.
    pub fn randomize_factors<R: Rng>(&mut self, scale: f64, rng: &mut R) {
        fn walk<R: Rng>(node: &mut HNode, scale: f64, rng: &mut R) {
            match node {
                HNode::Leaf { .. } => {}
                HNode::Split { diag, offdiag, .. } => {
                    for child in diag.iter_mut() {
                        walk(child, scale, rng);
                    }
                    for block in offdiag.iter_mut() {
                        for v in block.factors.iter_mut() {
                            *v = rng.random_range(-scale..=scale);
                        }
                    }
                }
            }
        }
        walk(&mut self.root, scale, rng);
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn param_count(&self) -> usize {
        hier_count(self.d, self.n, self.k, self.leaf_size)
    }

    pub fn to_dense(&self) -> Result<DenseKernel> {
        let mut dense = DenseKernel::zeros(self.d, self.n)?;
        let n = self.n;
        let d = self.d;
        let offs = [0usize; MAX_RANK];
        fill_node(&self.root, d, n, &offs, dense.values_mut());
        Ok(dense)
    }

    pub fn multilinear_form(&self, w: &[f64]) -> Result<f64> {
        check_len(self.n, w.len())?;
        let offs = [0usize; MAX_RANK];
        let mut ops = 0u64;
        let total = node_form(&self.root, self.d, self.k, w, &offs, &mut ops);
        opcount::charge(ops);
        Ok(total)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.d != 2 {
            return Err(Error::InvalidShape(format!(
                "matvec requires a d = 2 kernel, got d = {}",
                self.d
            )));
        }
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        let mut ops = 0u64;
        node_matvec(&self.root, self.k, x, &mut y, &mut ops);
        opcount::charge(ops);
        Ok(y)
    }

    pub fn accumulate_grad_form(&self, w: &[f64], upstream: f64, out: &mut [f64]) -> Result<()> {
        check_len(self.n, w.len())?;
        check_len(self.param_count(), out.len())?;
        let offs = [0usize; MAX_RANK];
        node_grad_form(&self.root, self.d, self.k, w, &offs, upstream, out);
        Ok(())
    }

    pub fn accumulate_grad_matvec(
        &self,
        x: &[f64],
        upstream: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        if self.d != 2 {
            return Err(Error::InvalidShape(format!(
                "grad_matvec requires a d = 2 kernel, got d = {}",
                self.d
            )));
        }
        check_len(self.n, x.len())?;
        check_len(self.n, upstream.len())?;
        check_len(self.param_count(), out.len())?;
        node_grad_matvec(&self.root, self.k, x, upstream, out);
        Ok(())
    }

    pub(super) fn write_params(&self, out: &mut Vec<f64>) {
        fn walk(node: &HNode, out: &mut Vec<f64>) {
            match node {
                HNode::Leaf { values, .. } => out.extend_from_slice(values),
                HNode::Split { diag, offdiag, .. } => {
                    for child in diag {
                        walk(child, out);
                    }
                    for block in offdiag {
                        out.extend_from_slice(&block.factors);
                    }
                }
            }
        }
        walk(&self.root, out);
    }

    pub(super) fn read_params(&mut self, values: &[f64]) {
        fn walk(node: &mut HNode, values: &[f64], cursor: &mut usize) {
            match node {
                HNode::Leaf { values: leaf, .. } => {
                    let len = leaf.len();
                    leaf.copy_from_slice(&values[*cursor..*cursor + len]);
                    *cursor += len;
                }
                HNode::Split { diag, offdiag, .. } => {
                    for child in diag.iter_mut() {
                        walk(child, values, cursor);
                    }
                    for block in offdiag.iter_mut() {
                        let len = block.factors.len();
                        block.factors.copy_from_slice(&values[*cursor..*cursor + len]);
                        *cursor += len;
                    }
                }
            }
        }
        debug_assert_eq!(values.len(), self.param_count());
        let mut cursor = 0;
        walk(&mut self.root, values, &mut cursor);
        debug_assert_eq!(cursor, values.len());
    }

    /// Visit every off-diagonal block, outermost level first.
    pub fn for_each_block<F: FnMut(&LowRankBlock)>(&self, mut f: F) {
        fn walk<F: FnMut(&LowRankBlock)>(node: &HNode, f: &mut F) {
            if let HNode::Split { diag, offdiag, .. } = node {
                for block in offdiag {
                    f(block);
                }
                for child in diag {
                    walk(child, f);
                }
            }
        }
        walk(&self.root, &mut f);
    }
}

fn build_zero_node(d: usize, side: usize, k: usize, leaf_size: usize) -> HNode {
    if side <= leaf_size {
        HNode::Leaf { side, values: vec![0.0; side.pow(d as u32)] }
    } else {
        let half = side / 2;
        let diag = vec![
            build_zero_node(d, half, k, leaf_size),
            build_zero_node(d, half, k, leaf_size),
        ];
        let offdiag =
            (1..(1usize << d) - 1).map(|_| LowRankBlock::zeros(d, half, k)).collect();
        HNode::Split { side, diag, offdiag }
    }
}

fn node_param_count(node: &HNode, d: usize, k: usize) -> usize {
    match node {
        HNode::Leaf { values, .. } => values.len(),
        HNode::Split { side, diag, .. } => {
            let offdiag = ((1usize << d) - 2) * k * d * (side / 2);
            offdiag + diag.iter().map(|c| node_param_count(c, d, k)).sum::<usize>()
        }
    }
}

/// Contract a node with per-axis window slices `w[offs[a]..offs[a] + side]`.
fn node_form(
    node: &HNode,
    d: usize,
    k: usize,
    w: &[f64],
    offs: &[usize; MAX_RANK],
    ops: &mut u64,
) -> f64 {
    match node {
        HNode::Leaf { side, values } => {
            let side = *side;
            let mut total = 0.0;
            for (flat, &v) in values.iter().enumerate() {
                let mut rem = flat;
                let mut prod = v;
                for a in (0..d).rev() {
                    prod *= w[offs[a] + rem % side];
                    rem /= side;
                }
                total += prod;
            }
            *ops += (values.len() * d) as u64;
            total
        }
        HNode::Split { side, diag, offdiag } => {
            let half = side / 2;
            let mut total = node_form(&diag[0], d, k, w, offs, ops);
            let mut upper = *offs;
            for o in upper.iter_mut().take(d) {
                *o += half;
            }
            total += node_form(&diag[1], d, k, w, &upper, ops);
            for (idx, block) in offdiag.iter().enumerate() {
                let mask = idx + 1;
                for g in 0..k {
                    let mut prod = 1.0;
                    for a in 0..d {
                        let start = offs[a] + ((mask >> a) & 1) * half;
                        prod *= dot(block.factor(g, a), &w[start..start + half]);
                    }
                    total += prod;
                }
                *ops += (k * (d * half + d)) as u64;
            }
            total
        }
    }
}

/// `y += node * x` over the node's local index range (`d = 2`).
fn node_matvec(node: &HNode, k: usize, x: &[f64], y: &mut [f64], ops: &mut u64) {
    match node {
        HNode::Leaf { side, values } => {
            for (yi, row) in y.iter_mut().zip(values.chunks_exact(*side)) {
                *yi += dot(row, x);
            }
            *ops += values.len() as u64;
        }
        HNode::Split { side, diag, offdiag } => {
            let half = side / 2;
            let (x_lo, x_hi) = x.split_at(half);
            let (y_lo, y_hi) = y.split_at_mut(half);
            node_matvec(&diag[0], k, x_lo, y_lo, ops);
            node_matvec(&diag[1], k, x_hi, y_hi, ops);
            // Mask 1: rows in the second half, columns in the first.
            // Mask 2: rows in the first half, columns in the second.
            for g in 0..k {
                let b = &offdiag[0];
                axpy(y_hi, dot(b.factor(g, 1), x_lo), b.factor(g, 0));
                let b = &offdiag[1];
                axpy(y_lo, dot(b.factor(g, 1), x_hi), b.factor(g, 0));
            }
            *ops += (4 * k * half) as u64;
        }
    }
}

fn fill_node(node: &HNode, d: usize, n: usize, offs: &[usize; MAX_RANK], out: &mut [f64]) {
    match node {
        HNode::Leaf { side, values } => {
            for (flat, &v) in values.iter().enumerate() {
                out[global_index(flat, *side, d, n, offs)] = v;
            }
        }
        HNode::Split { side, diag, offdiag } => {
            let half = side / 2;
            fill_node(&diag[0], d, n, offs, out);
            let mut upper = *offs;
            for o in upper.iter_mut().take(d) {
                *o += half;
            }
            fill_node(&diag[1], d, n, &upper, out);
            for (idx, block) in offdiag.iter().enumerate() {
                let mask = idx + 1;
                let mut block_offs = *offs;
                for (a, o) in block_offs.iter_mut().enumerate().take(d) {
                    *o += ((mask >> a) & 1) * half;
                }
                for (flat, v) in block.to_dense().into_iter().enumerate() {
                    out[global_index(flat, half, d, n, &block_offs)] = v;
                }
            }
        }
    }
}

/// Map a local row-major index within a sub-block to the global row-major
/// index given per-axis offsets.
fn global_index(flat: usize, side: usize, d: usize, n: usize, offs: &[usize; MAX_RANK]) -> usize {
    let mut rem = flat;
    let mut local = [0usize; MAX_RANK];
    for a in (0..d).rev() {
        local[a] = rem % side;
        rem /= side;
    }
    let mut global = 0;
    for a in 0..d {
        global = global * n + offs[a] + local[a];
    }
    global
}

fn node_grad_form(
    node: &HNode,
    d: usize,
    k: usize,
    w: &[f64],
    offs: &[usize; MAX_RANK],
    upstream: f64,
    out: &mut [f64],
) {
    match node {
        HNode::Leaf { side, .. } => {
            let side = *side;
            for (flat, slot) in out.iter_mut().enumerate() {
                let mut rem = flat;
                let mut prod = upstream;
                for a in (0..d).rev() {
                    prod *= w[offs[a] + rem % side];
                    rem /= side;
                }
                *slot += prod;
            }
        }
        HNode::Split { side, diag, offdiag } => {
            let half = side / 2;
            let lo_len = node_param_count(&diag[0], d, k);
            let hi_len = node_param_count(&diag[1], d, k);
            let (lo, rest) = out.split_at_mut(lo_len);
            let (hi, mut rest) = rest.split_at_mut(hi_len);
            node_grad_form(&diag[0], d, k, w, offs, upstream, lo);
            let mut upper = *offs;
            for o in upper.iter_mut().take(d) {
                *o += half;
            }
            node_grad_form(&diag[1], d, k, w, &upper, upstream, hi);
            for (idx, block) in offdiag.iter().enumerate() {
                let mask = idx + 1;
                let (slot, tail) = rest.split_at_mut(block.param_count());
                rest = tail;
                grad_block_form(block, d, k, half, mask, w, offs, upstream, slot);
            }
        }
    }
}

/// Gradient of `upstream * sum_g prod_a <factor(g,a), w_a>` with respect to
/// each factor vector: the window slice for that axis, scaled by the product
/// of the other axes' inner products.
#[allow(clippy::too_many_arguments)]
fn grad_block_form(
    block: &LowRankBlock,
    d: usize,
    k: usize,
    half: usize,
    mask: usize,
    w: &[f64],
    offs: &[usize; MAX_RANK],
    upstream: f64,
    out: &mut [f64],
) {
    let mut dots = [0.0f64; MAX_RANK];
    let mut prefix = [0.0f64; MAX_RANK + 1];
    let mut suffix = [0.0f64; MAX_RANK + 1];
    for g in 0..k {
        for (a, slot) in dots.iter_mut().enumerate().take(d) {
            let start = offs[a] + ((mask >> a) & 1) * half;
            *slot = dot(block.factor(g, a), &w[start..start + half]);
        }
        prefix[0] = 1.0;
        for a in 0..d {
            prefix[a + 1] = prefix[a] * dots[a];
        }
        suffix[d] = 1.0;
        for a in (0..d).rev() {
            suffix[a] = suffix[a + 1] * dots[a];
        }
        for a in 0..d {
            let coeff = upstream * prefix[a] * suffix[a + 1];
            let start = offs[a] + ((mask >> a) & 1) * half;
            let slot = &mut out[(g * d + a) * half..(g * d + a + 1) * half];
            axpy(slot, coeff, &w[start..start + half]);
        }
    }
}

fn node_grad_matvec(node: &HNode, k: usize, x: &[f64], upstream: &[f64], out: &mut [f64]) {
    match node {
        HNode::Leaf { side, .. } => {
            for (row, &u) in out.chunks_exact_mut(*side).zip(upstream) {
                axpy(row, u, x);
            }
        }
        HNode::Split { side, diag, offdiag } => {
            let half = side / 2;
            let (x_lo, x_hi) = x.split_at(half);
            let (u_lo, u_hi) = upstream.split_at(half);
            let lo_len = node_param_count(&diag[0], 2, k);
            let hi_len = node_param_count(&diag[1], 2, k);
            let (lo, rest) = out.split_at_mut(lo_len);
            let (hi, rest) = rest.split_at_mut(hi_len);
            node_grad_matvec(&diag[0], k, x_lo, u_lo, lo);
            node_grad_matvec(&diag[1], k, x_hi, u_hi, hi);
            let (b1, b2) = rest.split_at_mut(offdiag[0].param_count());
            // Mask 1: block maps x_lo into the second half of the output.
            grad_block_matvec(&offdiag[0], k, half, x_lo, u_hi, b1);
            // Mask 2: block maps x_hi into the first half of the output.
            grad_block_matvec(&offdiag[1], k, half, x_hi, u_lo, b2);
        }
    }
}

fn grad_block_matvec(
    block: &LowRankBlock,
    k: usize,
    half: usize,
    x: &[f64],
    upstream: &[f64],
    out: &mut [f64],
) {
    for g in 0..k {
        let sv = dot(block.factor(g, 1), x);
        let su = dot(block.factor(g, 0), upstream);
        let (gu, gv) = out[2 * g * half..2 * (g + 1) * half].split_at_mut(half);
        axpy(gu, sv, upstream);
        axpy(gv, su, x);
    }
}
