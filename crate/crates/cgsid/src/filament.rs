//! Tungsten-filament plant: a single-state voltage -> luminosity simulator
//! used as ground truth for identification experiments.
//!
//! The temperature state obeys
//!
//! ```text
//! dT/dt = k1 V^2 / R(T) - k2 T^2 - k3 T^4      R(T) = R0 (1 + aR T)
//! L     = k4 T^4
//! ```
//!
//! with resistive heating, convective (`T^2`) and radiative (`T^4`) losses to
//! a zero-temperature environment, and quartic luminosity. Integration is
//! classical fixed-step RK4 with the drive held constant within each sample
//! interval (zero-order hold).

use crate::error::{Error, Result};
use crate::volterra::SignalSeries;
use serde::{Deserialize, Serialize};

/// Plant constants in nondimensionalized units. All must be strictly
/// positive so that `R(T) > 0` and both loss terms drain energy for `T > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilamentParams {
    /// Heating gain.
    pub k1: f64,
    /// Convective loss coefficient.
    pub k2: f64,
    /// Radiative loss coefficient.
    pub k3: f64,
    /// Luminosity gain.
    pub k4: f64,
    /// Base resistance.
    pub r0: f64,
    /// Resistance temperature coefficient.
    pub alpha_r: f64,
    /// Temperature state at the first sample.
    pub t_init: f64,
}

impl Default for FilamentParams {
    /// Loss-to-heating ratios are chosen so the steady-state luminosity
    /// spans about two decades over drives in [0, 1.5] (a strongly nonlinear
    /// operating range), and the common scale of `k1..k3` sets the thermal
    /// time constant to roughly 35 ms, comfortably inside a 128-sample
    /// memory window at 750 Hz. The initial state is the equilibrium at the
    /// mid-range drive 0.75.
    fn default() -> Self {
        let mut p = Self {
            k1: 30.0,
            k2: 9.0,
            k3: 3.0,
            k4: 1.0,
            r0: 1.0,
            alpha_r: 1.0,
            t_init: 0.0,
        };
        p.t_init = p.equilibrium(0.75).expect("default constants are valid");
        p
    }
}

impl FilamentParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("r0", self.r0),
            ("alpha_r", self.alpha_r),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "filament parameter {name} = {value} must be finite and positive"
                )));
            }
        }
        if !(self.t_init >= 0.0 && self.t_init.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial temperature {} must be finite and nonnegative",
                self.t_init
            )));
        }
        Ok(())
    }

    pub fn resistance(&self, temperature: f64) -> f64 {
        self.r0 * (1.0 + self.alpha_r * temperature)
    }

    pub fn luminosity(&self, temperature: f64) -> f64 {
        self.k4 * temperature.powi(4)
    }

    /// The unique nonnegative temperature where heating balances the losses
    /// for a constant drive `v`. The balance function is strictly decreasing
    /// in `T`, so bisection on a doubling bracket finds the root.
    pub fn equilibrium(&self, v: f64) -> Result<f64> {
        self.validate()?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("drive {v} must be finite")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        let mut doublings = 0;
        while rhs(hi, v, self) > 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::InvalidArgument(format!(
                    "no equilibrium bracket found for drive {v}"
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rhs(mid, v, self) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Temperature derivative `dT/dt` at state `t` under drive `v`.
pub fn d_temperature(t: f64, v: f64, params: &FilamentParams) -> Result<f64> {
    params.validate()?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("temperature {t} must be nonnegative")));
    }
    Ok(rhs(t, v, params))
}

/// Unchecked right-hand side; clamps the state at 0 so RK4 stage points that
/// undershoot slightly stay in the model's domain.
fn rhs(t: f64, v: f64, p: &FilamentParams) -> f64 {
    let t = t.max(0.0);
    let t2 = t * t;
    p.k1 * v * v / p.resistance(t) - p.k2 * t2 - p.k3 * t2 * t2
}

/// Simulation output: temperature and luminosity traces plus the number of
/// integrator substeps whose end state had to be clamped up to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FilamentTrace {
    pub temperature: SignalSeries,
    pub luminosity: SignalSeries,
    pub clamped_steps: u64,
}

/// Integrate the filament under the given drive. Sample `i` of the output
/// reports the state at the time of drive sample `i`; each sample interval
/// is covered by `substeps` RK4 steps with the drive held at its value at
/// the start of the interval.
pub fn simulate(
    drive: &SignalSeries,
    params: &FilamentParams,
    substeps: usize,
) -> Result<FilamentTrace> {
    params.validate()?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    let samples = drive.samples();
    let dt = 1.0 / drive.sample_rate();
    let h = dt / substeps as f64;
    let mut temperature = Vec::with_capacity(samples.len());
    let mut clamped = 0u64;
    let mut state = params.t_init;
    if !samples.is_empty() {
        temperature.push(state);
    }
    for i in 1..samples.len() {
        let v_held = samples[i - 1];
        for _ in 0..substeps {
            state = rk4_step(state, v_held, h, params);
            if !state.is_finite() {
                return Err(Error::NonFiniteState { index: i });
            }
            if state < 0.0 {
                state = 0.0;
                clamped += 1;
            }
        }
        temperature.push(state);
    }
    let luminosity: Vec<f64> = temperature.iter().map(|&t| params.luminosity(t)).collect();
    Ok(FilamentTrace {
        temperature: SignalSeries::new(temperature, drive.sample_rate())?,
        luminosity: SignalSeries::new(luminosity, drive.sample_rate())?,
        clamped_steps: clamped,
    })
}

fn rk4_step(t: f64, v: f64, h: f64, p: &FilamentParams) -> f64 {
    let k1 = rhs(t, v, p);
    let k2 = rhs(t + 0.5 * h * k1, v, p);
    let k3 = rhs(t + 0.5 * h * k2, v, p);
    let k4 = rhs(t + h * k3, v, p);
    t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}
