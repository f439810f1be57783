//! Fitting a second-order Volterra model to the simulated filament.
//!
//! Simulates a short voltage-to-luminosity dataset, then fits two models to
//! it: a purely linear one and a coarse-grained (hierarchical low-rank)
//! second-order one. The nonlinear model captures the T^2/T^4 loss terms the
//! linear model cannot, and the compressed kernel keeps the parameter count
//! low enough to train from only 750 samples (one second of data).
//!
//! Run with: `cargo run --release --example fit_filament`

use cgsid::filament::{simulate, FilamentParams};
use cgsid::kernels::KernelStructure;
use cgsid::optim::{initialize_model, train_monitored, TrainConfig};
use cgsid::signals::filament_excitation;
use cgsid::volterra::{model_vaf, Dataset, VolterraModel};

fn make_dataset(len: usize, seed: u64, memory: usize) -> cgsid::Result<Dataset> {
    let rate = 750.0;
    let params = FilamentParams::default();
    let drive = filament_excitation(len, rate, seed)?;
    let trace = simulate(&drive, &params, 8)?;
    Dataset::new(drive, trace.luminosity, memory)
}

fn main() -> cgsid::Result<()> {
    let memory = 128;
    let train_set = make_dataset(750, 11, memory)?;
    // Small held-out set for per-epoch monitoring (evaluated every epoch, so
    // kept short), larger one for the final score.
    let monitor = make_dataset(750, 22, memory)?;
    let heldout = make_dataset(3000, 33, memory)?;
    println!(
        "train: {} samples ({} usable after the {}-sample memory warm-up); held out: {}",
        train_set.input().len(),
        train_set.valid_len(),
        memory,
        heldout.input().len()
    );

    for (label, structures, l2) in [
        ("linear (h0 + h1)", vec![], 1e-3),
        (
            "coarse second order",
            vec![KernelStructure::hierarchical(2, memory, 1, 2)],
            1e-2,
        ),
    ] {
        let mut model = VolterraModel::zeros(memory, 750.0, &structures)?;
        initialize_model(&mut model, 3, 1e-3);
        let config = TrainConfig {
            learning_rate: 0.01,
            epochs: 2500,
            l2,
            tolerance: 1e-8,
            patience: 50,
            ..TrainConfig::default()
        };
        let report = train_monitored(&mut model, &train_set, &config, Some(&monitor))?;
        let vaf = model_vaf(&model, &heldout)?;
        println!();
        println!("{label}: {} parameters, L2 = {l2}", model.param_count());
        for record in report.history.iter().filter(|r| r.epoch % 500 == 0) {
            println!(
                "  epoch {:>5}  train loss {:.3e}  held-out VAF {:6.2}%",
                record.epoch,
                record.loss,
                record.heldout_vaf.unwrap_or(f64::NAN)
            );
        }
        println!(
            "  finished after {} epochs (converged: {}), held-out VAF {vaf:.2}%",
            report.epochs_run(),
            report.converged
        );
    }
    Ok(())
}
