//! Discrete Volterra models: prediction, loss, and the VAF metric.
//!
//! A model of memory `n` and maximum order `D` predicts
//!
//! ```text
//! y[t] = h0 + sum_i h1[i] x[t-i] + sum_{d=2..D} form(h_d, w)   w[i] = x[t-i]
//! ```
//!
//! for `t >= n - 1`; earlier samples lack a full input window and are
//! emitted as zero and excluded from loss and VAF. Kernel index `i` means a
//! lag of `i` samples.

use crate::error::{Error, Result};
use crate::kernels::{axpy, dot, Kernel, KernelStructure, ParamVector};
use std::ops::Range;

/// A uniformly sampled scalar time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl SignalSeries {
    /// Requires a positive, finite sample rate and finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate {sample_rate} Hz must be finite and positive"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { index: i });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Paired input/output series with the model warm-up already accounted for:
/// the valid range starts at `memory - 1`, the first sample with a full
/// input window behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input: SignalSeries,
    output: SignalSeries,
    valid_start: usize,
}

impl Dataset {
    pub fn new(input: SignalSeries, output: SignalSeries, memory: usize) -> Result<Self> {
        if input.len() != output.len() {
            return Err(Error::LengthMismatch { expected: input.len(), got: output.len() });
        }
        if memory == 0 {
            return Err(Error::InvalidArgument("memory must be >= 1".into()));
        }
        if input.len() < memory {
            return Err(Error::EmptyValidRange { len: input.len(), warmup: memory - 1 });
        }
        Ok(Self { input, output, valid_start: memory - 1 })
    }

    pub fn input(&self) -> &SignalSeries {
        &self.input
    }

    pub fn output(&self) -> &SignalSeries {
        &self.output
    }

    pub fn valid_start(&self) -> usize {
        self.valid_start
    }

    pub fn valid_range(&self) -> Range<usize> {
        self.valid_start..self.input.len()
    }

    pub fn valid_len(&self) -> usize {
        self.input.len() - self.valid_start
    }
}

/// A discrete Volterra model: intercept, first-order kernel, and one kernel
/// per order `2..=D`, all sharing the memory `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraModel {
    n: usize,
    sample_rate: f64,
    h0: f64,
    h1: Vec<f64>,
    /// Orders `2..=D` ascending; `kernels[j]` has tensor rank `j + 2`.
    kernels: Vec<Kernel>,
}

impl VolterraModel {
    pub fn new(
        n: usize,
        sample_rate: f64,
        h0: f64,
        h1: Vec<f64>,
        kernels: Vec<Kernel>,
    ) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::InvalidShape(format!("memory n = {n} is not a power of two")));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate {sample_rate} Hz must be finite and positive"
            )));
        }
        if h1.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: h1.len() });
        }
        for (j, kernel) in kernels.iter().enumerate() {
            let want_d = j + 2;
            if kernel.d() != want_d {
                return Err(Error::InvalidShape(format!(
                    "kernel at position {j} must have order {want_d}, got {}",
                    kernel.d()
                )));
            }
            if kernel.n() != n {
                return Err(Error::InvalidShape(format!(
                    "order-{want_d} kernel has side {}, model memory is {n}",
                    kernel.n()
                )));
            }
        }
        Ok(Self { n, sample_rate, h0, h1, kernels })
    }

    /// All-zero model with the given kernel structures for orders `2..=D`.
    pub fn zeros(n: usize, sample_rate: f64, structures: &[KernelStructure]) -> Result<Self> {
        let kernels =
            structures.iter().map(Kernel::zeros).collect::<Result<Vec<_>>>()?;
        Self::new(n, sample_rate, 0.0, vec![0.0; n], kernels)
    }

    pub fn memory(&self) -> usize {
        self.n
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn max_order(&self) -> usize {
        1 + self.kernels.len()
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn set_h0(&mut self, h0: f64) {
        self.h0 = h0;
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    pub fn h1_mut(&mut self) -> &mut [f64] {
        &mut self.h1
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// The order-`d` kernel, if the model has one (`d >= 2`).
    pub fn kernel(&self, d: usize) -> Option<&Kernel> {
        d.checked_sub(2).and_then(|j| self.kernels.get(j))
    }

    pub fn kernel_mut(&mut self, d: usize) -> Option<&mut Kernel> {
        d.checked_sub(2).and_then(move |j| self.kernels.get_mut(j))
    }

    /// Mutable access to all order-`>= 2` kernels. Callers must preserve the
    /// order and side invariants; use it to adjust parameters, not shapes.
    pub fn kernels_mut(&mut self) -> &mut [Kernel] {
        &mut self.kernels
    }

    /// Total trainable scalars: `1 + n + sum_d param_count(h_d)`.
    pub fn param_count(&self) -> usize {
        1 + self.n + self.kernels.iter().map(Kernel::param_count).sum::<usize>()
    }

    /// All parameters in flatten order: `h0`, `h1`, then kernels ascending.
    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        out.push(self.h0);
        out.extend_from_slice(&self.h1);
        for kernel in &self.kernels {
            out.extend_from_slice(kernel.flatten().as_slice());
        }
        ParamVector::new(out)
    }

    /// Overwrite all parameters from a flat slice in flatten order.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        self.h0 = values[0];
        self.h1.copy_from_slice(&values[1..1 + self.n]);
        let mut cursor = 1 + self.n;
        for kernel in &mut self.kernels {
            let len = kernel.param_count();
            kernel.set_params(&values[cursor..cursor + len])?;
            cursor += len;
        }
        Ok(())
    }

    /// Predicted series; samples before the warm-up (`t < n - 1`) are zero.
    pub fn predict(&self, input: &SignalSeries) -> Result<SignalSeries> {
        let y = self.predict_samples(input.samples())?;
        SignalSeries::new(y, input.sample_rate())
    }

    pub fn predict_samples(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if x.len() < n {
            return Err(Error::EmptyValidRange { len: x.len(), warmup: n - 1 });
        }
        let mut y = vec![0.0; x.len()];
        let mut w = vec![0.0; n];
        for t in (n - 1)..x.len() {
            fill_window(&mut w, x, t);
            let mut acc = self.h0 + dot(&self.h1, &w);
            for kernel in &self.kernels {
                acc += kernel.multilinear_form(&w)?;
            }
            y[t] = acc;
        }
        Ok(y)
    }
}

/// Lag window at time `t`: `w[i] = x[t - i]`.
fn fill_window(w: &mut [f64], x: &[f64], t: usize) {
    let n = w.len();
    for (wi, &xi) in w.iter_mut().zip(x[t + 1 - n..=t].iter().rev()) {
        *wi = xi;
    }
}

/// Variance accounted for, in percent, over the given index range:
/// `100 (1 - var(reference - prediction) / var(reference))` with
/// mean-subtracted variances. 100% means perfect prediction up to a constant
/// offset.
pub fn vaf(reference: &SignalSeries, prediction: &SignalSeries, range: Range<usize>) -> Result<f64> {
    if reference.len() != prediction.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), got: prediction.len() });
    }
    if range.end > reference.len() || range.start >= range.end {
        return Err(Error::InvalidArgument(format!(
            "range {range:?} is empty or out of bounds for length {}",
            reference.len()
        )));
    }
    vaf_slices(&reference.samples()[range.clone()], &prediction.samples()[range])
}

/// VAF over two aligned slices (the whole slices are the range).
pub fn vaf_slices(reference: &[f64], prediction: &[f64]) -> Result<f64> {
    if reference.len() != prediction.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), got: prediction.len() });
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument("VAF over an empty range".into()));
    }
    let ss_ref = centered_sum_of_squares(reference.iter().copied());
    // A reference that is constant to machine precision has no variance to
    // account for; the ratio would be meaningless.
    let magnitude: f64 = reference.iter().map(|r| r * r).sum();
    if ss_ref <= magnitude * 1e-24 {
        return Err(Error::ZeroVariance);
    }
    let ss_res =
        centered_sum_of_squares(reference.iter().zip(prediction).map(|(r, p)| r - p));
    Ok(100.0 * (1.0 - ss_res / ss_ref))
}

fn centered_sum_of_squares(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        count += 1;
        sum += v;
    }
    if count == 0 {
        return 0.0;
    }
    let mean = sum / count as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

/// Mean squared prediction error over the valid range plus `lambda ||theta||^2`
/// with every parameter penalized (`h0` and `h1` included).
pub fn loss(model: &VolterraModel, dataset: &Dataset, lambda: f64) -> Result<f64> {
    check_dataset(model, dataset)?;
    let pred = model.predict_samples(dataset.input().samples())?;
    let yref = dataset.output().samples();
    let range = dataset.valid_range();
    let m = dataset.valid_len() as f64;
    let sq: f64 =
        pred[range.clone()].iter().zip(&yref[range]).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(sq / m + lambda * model.flatten().norm_sq())
}

/// Loss and its gradient with respect to every model parameter, in flatten
/// order. Accumulation runs in ascending time order, so the result is
/// bit-reproducible across runs.
pub fn loss_grad(
    model: &VolterraModel,
    dataset: &Dataset,
    lambda: f64,
) -> Result<(f64, ParamVector)> {
    check_dataset(model, dataset)?;
    let x = dataset.input().samples();
    let yref = dataset.output().samples();
    let n = model.n;
    let m = dataset.valid_len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut w = vec![0.0; n];
    let mut sq = 0.0;
    for t in (n - 1)..x.len() {
        fill_window(&mut w, x, t);
        let mut pred = model.h0 + dot(&model.h1, &w);
        for kernel in &model.kernels {
            pred += kernel.multilinear_form(&w)?;
        }
        let e = pred - yref[t];
        sq += e * e;
        let upstream = 2.0 * e / m;
        grad[0] += upstream;
        axpy(&mut grad[1..1 + n], upstream, &w);
        let mut cursor = 1 + n;
        for kernel in &model.kernels {
            let len = kernel.param_count();
            kernel.accumulate_grad_form(&w, upstream, &mut grad[cursor..cursor + len])?;
            cursor += len;
        }
    }
    let theta = model.flatten();
    let loss = sq / m + lambda * theta.norm_sq();
    if lambda != 0.0 {
        axpy(&mut grad, 2.0 * lambda, theta.as_slice());
    }
    Ok((loss, ParamVector::new(grad)))
}

/// VAF of the model's prediction against the dataset output, over the
/// dataset's valid range.
pub fn model_vaf(model: &VolterraModel, dataset: &Dataset) -> Result<f64> {
    check_dataset(model, dataset)?;
    let pred = model.predict(dataset.input())?;
    vaf(dataset.output(), &pred, dataset.valid_range())
}

fn check_dataset(model: &VolterraModel, dataset: &Dataset) -> Result<()> {
    if dataset.valid_start() != model.n - 1 {
        return Err(Error::InvalidArgument(format!(
            "dataset warm-up {} does not match model memory {}",
            dataset.valid_start() + 1,
            model.n
        )));
    }
    Ok(())
}
