//! Coarse-grained nonlinear system identification.
//!
//! Volterra-series models of nonlinear dynamics whose order-`d` kernels are
//! stored either densely, as symmetric Toeplitz matrices, or as hierarchical
//! low-rank tensors. The hierarchical format keeps dense detail near the
//! diagonal and summarizes interactions between temporally distant input
//! samples with rank-`k` outer products, so its parameter count grows only
//! quasilinearly with the system memory. Fewer parameters act as a strong
//! statistical regularizer: models can be identified from far less data.
//!
//! The crate bundles:
//!
//! - [`kernels`]: kernel representations, parameter counting, evaluation
//!   (linear map and multilinear form) and analytic parameter gradients;
//! - [`volterra`]: discrete Volterra models, prediction, loss and the
//!   variance-accounted-for metric;
//! - [`optim`]: a full-batch Adam optimizer and training loop;
//! - [`synthetic`]: a log-kernel integral operator learned from noisy random
//!   transform samples, with a data-budget sweep across model classes;
//! - [`filament`]: a simulated voltage-to-luminosity tungsten filament used
//!   as the ground-truth nonlinear plant for end-to-end experiments;
//! - [`signals`]: seeded excitation-signal generators;
//! - [`fileio`]: CSV/JSON formats for datasets, models and reports;
//! - [`cli`]: the subcommand implementations behind the `cgsid` binary.
//!
//! See the crate examples for runnable demonstrations of each capability.

pub mod cli;
pub mod error;
pub mod fileio;
pub mod filament;
pub mod kernels;
pub mod optim;
pub mod signals;
pub mod synthetic;
pub mod volterra;

pub use error::{Error, Result};
