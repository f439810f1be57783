//! How much training data does each model class need?
//!
//! Searches for the minimum number of noisy operator samples at which a
//! fitted model of each class reaches a target held-out accuracy. Compressed
//! representations act as statistical regularizers: the symmetric Toeplitz
//! and hierarchical classes reach the target with far fewer samples than the
//! unconstrained dense matrix.
//!
//! This is a scaled-down single-noise-level run; the full sweep over a noise
//! grid is `cgsid synth-sweep` (or `cgsid::synthetic::sweep`).
//!
//! Run with: `cargo run --release --example sample_efficiency`

use cgsid::optim::TrainConfig;
use cgsid::synthetic::{build_operator, min_samples_for_accuracy, ModelClass, SweepConfig};

fn main() -> cgsid::Result<()> {
    let cfg = SweepConfig {
        repeats: 1,
        train: TrainConfig {
            learning_rate: 0.01,
            epochs: 1200,
            tolerance: 1e-8,
            patience: 50,
            ..TrainConfig::default()
        },
        ..SweepConfig::default()
    };
    let sigma = 0.1;
    let op = build_operator(cfg.n)?;

    println!(
        "minimum samples to reach {}% held-out VAF on the {}x{} operator at noise sigma = {sigma}",
        cfg.target_vaf, cfg.n, cfg.n
    );
    println!();
    println!("{:>14} {:>8} {:>8} {:>12}", "class", "params", "m*", "held-out VAF");
    let mut m_stars = Vec::new();
    for class in [ModelClass::ToeplitzSym, ModelClass::Hierarchical, ModelClass::Dense] {
        let params = cgsid::kernels::param_count(&class.structure(cfg.n, cfg.k, cfg.leaf_size))?;
        let outcome = min_samples_for_accuracy(&op, class, sigma, &cfg)?;
        println!(
            "{:>14} {:>8} {:>8} {:>11.2}%",
            class.to_string(),
            params,
            outcome.m_star,
            outcome.median_vaf
        );
        m_stars.push(outcome.m_star);
    }
    println!();
    println!(
        "dense needs {:.1}x more samples than toeplitz and {:.1}x more than hierarchical",
        m_stars[2] as f64 / m_stars[0] as f64,
        m_stars[2] as f64 / m_stars[1] as f64
    );
    Ok(())
}
