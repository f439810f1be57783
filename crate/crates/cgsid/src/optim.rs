//! Adam optimizer and the full-batch training loop.
//!
//! The loop is generic over the fitted object: it owns only a flat parameter
//! vector and calls back into a loss/gradient closure, so Volterra models and
//! plain linear maps train through the same code. Runs are deterministic for
//! a fixed seed and configuration.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, ParamVector};
use crate::signals::seeded_rng;
use crate::volterra::{loss_grad, model_vaf, Dataset, VolterraModel};

/// Adam moment estimates; one slot per trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Optimizer hyperparameters and stopping policy. Gradients are full-batch;
/// training stops at the epoch budget or when the relative loss change over
/// `patience` epochs drops below `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// L2 penalty strength applied to every parameter.
    pub l2: f64,
    pub seed: u64,
    /// Relative loss-change threshold for convergence.
    pub tolerance: f64,
    /// Number of epochs over which the loss change is measured.
    pub patience: usize,
    /// Half-width of the uniform initialization of low-rank factors.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50_000,
            l2: 0.0,
            seed: 0,
            tolerance: 1e-9,
            patience: 100,
            init_scale: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.l2 >= 0.0
            && self.tolerance >= 0.0
            && self.patience >= 1
            && self.init_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid training configuration: {self:?}")))
        }
    }
}

/// One bias-corrected Adam update, in place:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// `theta <- theta - a mhat / (sqrt(vhat) + eps)`.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    config: &TrainConfig,
) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::LengthMismatch { expected: state.m.len(), got: params.len() });
    }
    if grads.len() != params.len() {
        return Err(Error::LengthMismatch { expected: params.len(), got: grads.len() });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index: i });
    }
    state.t += 1;
    let bias1 = 1.0 - config.beta1.powi(state.t as i32);
    let bias2 = 1.0 - config.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

/// One loss/gradient evaluation at the current parameters, plus an optional
/// held-out metric computed at the same parameters.
pub struct EpochEval {
    pub loss: f64,
    pub grad: ParamVector,
    pub heldout_vaf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based evaluation count.
    pub epoch: usize,
    pub loss: f64,
    pub heldout_vaf: Option<f64>,
}

/// Outcome of a training run. `params` passed to [`fit_params`] hold the
/// best-loss snapshot on return, not the last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub history: Vec<EpochRecord>,
    /// Smallest evaluated loss; infinite when no epoch ran.
    pub best_loss: f64,
    pub converged: bool,
}

impl FitReport {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

/// Full-batch Adam on a flat parameter vector. The closure must return the
/// loss (including any regularization term) and its gradient at the given
/// parameters. With `epochs = 0` the parameters are returned unchanged and
/// the history is empty.
pub fn fit_params<F>(params: &mut ParamVector, config: &TrainConfig, mut eval: F) -> Result<FitReport>
where
    F: FnMut(&[f64]) -> Result<EpochEval>,
{
    config.validate()?;
    let mut state = AdamState::new(params.len());
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best: Option<Vec<f64>> = None;
    let mut converged = false;
    for epoch in 1..=config.epochs {
        let EpochEval { loss, grad, heldout_vaf } = eval(params.as_slice())?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        history.push(EpochRecord { epoch, loss, heldout_vaf });
        if loss < best_loss {
            best_loss = loss;
            best = Some(params.as_slice().to_vec());
        }
        if epoch > config.patience {
            let prev = history[epoch - 1 - config.patience].loss;
            let rel = (prev - loss).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.tolerance {
                converged = true;
                break;
            }
        }
        adam_step(&mut state, params.as_mut_slice(), grad.as_slice(), config)?;
    }
    if let Some(best) = best {
        params.as_mut_slice().copy_from_slice(&best);
    }
    Ok(FitReport { history, best_loss, converged })
}

/// Zero every parameter except the hierarchical low-rank factors, which are
/// drawn uniform in `[-scale, scale]`. All-zero factors sit on a gradient
/// saddle (each factor's gradient carries the other factors' inner products),
/// so training starts from a tiny asymmetric point instead.
pub fn initialize_model(model: &mut VolterraModel, seed: u64, scale: f64) {
    let zeros = vec![0.0; model.param_count()];
    model.set_params(&zeros).expect("zeros match the model's own parameter count");
    let mut rng = seeded_rng(seed);
    for kernel in model.kernels_mut() {
        if let Kernel::Hierarchical(h) = kernel {
            h.randomize_factors(scale, &mut rng);
        }
    }
}

/// Fit a Volterra model to a dataset by full-batch Adam, starting from the
/// model's current parameters. Returns the best-loss parameters in `model`.
pub fn train(model: &mut VolterraModel, dataset: &Dataset, config: &TrainConfig) -> Result<FitReport> {
    train_monitored(model, dataset, config, None)
}

/// [`train`], additionally recording the VAF on a held-out dataset at every
/// epoch (one extra prediction pass per epoch).
pub fn train_monitored(
    model: &mut VolterraModel,
    dataset: &Dataset,
    config: &TrainConfig,
    heldout: Option<&Dataset>,
) -> Result<FitReport> {
    let mut params = model.flatten();
    let l2 = config.l2;
    let report = fit_params(&mut params, config, |theta| {
        model.set_params(theta)?;
        let (loss, grad) = loss_grad(model, dataset, l2)?;
        let heldout_vaf = match heldout {
            Some(h) => Some(model_vaf(model, h)?),
            None => None,
        };
        Ok(EpochEval { loss, grad, heldout_vaf })
    })?;
    model.set_params(params.as_slice())?;
    Ok(report)
}
