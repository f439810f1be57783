//! Accuracy as a function of the training-data budget.
//!
//! Fits linear and coarse-grained second-order models to growing prefixes of
//! one filament recording and scores each on a fixed held-out recording. The
//! compressed nonlinear model dominates at every budget; the gap to the
//! linear model is the value of the second-order kernel, and the gap between
//! small and large budgets is the price of dense parameterizations (run
//! `cgsid budget-curve` with the dense class included to see that, at the
//! cost of a longer run).
//!
//! Run with: `cargo run --release --example budget_curve`

use cgsid::filament::{simulate, FilamentParams};
use cgsid::kernels::KernelStructure;
use cgsid::optim::{initialize_model, train, TrainConfig};
use cgsid::signals::filament_excitation;
use cgsid::volterra::{model_vaf, Dataset, SignalSeries, VolterraModel};

fn recording(len: usize, seed: u64) -> cgsid::Result<(SignalSeries, SignalSeries)> {
    let drive = filament_excitation(len, 750.0, seed)?;
    let trace = simulate(&drive, &FilamentParams::default(), 8)?;
    Ok((drive, trace.luminosity))
}

fn main() -> cgsid::Result<()> {
    let memory = 128;
    let (drive, lum) = recording(1500, 5)?;
    let (h_drive, h_lum) = recording(1500, 6)?;
    let heldout = Dataset::new(h_drive, h_lum, memory)?;

    let classes: [(&str, Vec<KernelStructure>, f64); 2] = [
        ("linear", vec![], 1e-3),
        ("coarse", vec![KernelStructure::hierarchical(2, memory, 1, 2)], 1e-2),
    ];
    let budgets = [375, 750, 1500];

    println!("{:>8} {:>10} {:>14}", "class", "budget", "held-out VAF");
    for (label, structures, l2) in &classes {
        for &budget in &budgets {
            let train_set = Dataset::new(
                SignalSeries::new(drive.samples()[..budget].to_vec(), 750.0)?,
                SignalSeries::new(lum.samples()[..budget].to_vec(), 750.0)?,
                memory,
            )?;
            let mut model = VolterraModel::zeros(memory, 750.0, structures)?;
            initialize_model(&mut model, 17, 1e-3);
            let config = TrainConfig {
                learning_rate: 0.01,
                epochs: 1200,
                l2: *l2,
                tolerance: 1e-8,
                patience: 50,
                ..TrainConfig::default()
            };
            train(&mut model, &train_set, &config)?;
            println!("{label:>8} {budget:>10} {:>13.2}%", model_vaf(&model, &heldout)?);
        }
    }
    Ok(())
}
