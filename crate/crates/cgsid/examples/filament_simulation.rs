//! Simulating the tungsten-filament test plant.
//!
//! The plant is a first-order thermal ODE driven by voltage: Joule heating
//! against temperature-dependent resistance, convective (T^2) and radiative
//! (T^4) losses, with luminosity read out as T^4. Integrated with fixed-step
//! RK4 holding the drive constant between samples.
//!
//! Run with: `cargo run --release --example filament_simulation`

use cgsid::filament::{simulate, FilamentParams};
use cgsid::signals::filament_excitation;
use cgsid::volterra::SignalSeries;

fn main() -> cgsid::Result<()> {
    let params = FilamentParams::default();
    let rate = 750.0;

    // Equilibrium: at constant drive the temperature settles where heating
    // balances losses; the simulator starts from the V = 0.75 equilibrium.
    for v in [0.0, 0.5, 0.75, 1.0] {
        let t_eq = params.equilibrium(v)?;
        println!(
            "equilibrium at V = {v:4.2}: T = {t_eq:.6}  (luminosity {:.6})",
            params.luminosity(t_eq)
        );
    }
    println!();

    // Step response: drive jumps from 0.75 to 1.0; temperature relaxes to the
    // new equilibrium with a time constant of a few tens of milliseconds.
    let len = 150;
    let mut step = vec![0.75; 10];
    step.extend(vec![1.0; len - 10]);
    let drive = SignalSeries::new(step, rate)?;
    let trace = simulate(&drive, &params, 8)?;
    let temps = trace.temperature.samples();
    let t_target = params.equilibrium(1.0)?;
    let t_start = temps[9];
    // First sample at which 95% of the remaining gap to the new equilibrium
    // is closed.
    let settled = temps
        .iter()
        .position(|&t| (t_target - t).abs() < 0.05 * (t_target - t_start).abs())
        .unwrap_or(len);
    println!("step 0.75 -> 1.00 at sample 10:");
    println!("  T before    = {t_start:.6}");
    println!("  T target    = {t_target:.6}");
    println!(
        "  95% settled after {} samples = {:.1} ms",
        settled - 10,
        (settled - 10) as f64 / rate * 1e3
    );
    println!();

    // A randomized drive of the kind used to build training datasets.
    let drive = filament_excitation(1500, rate, 7)?;
    let trace = simulate(&drive, &params, 8)?;
    let lum = trace.luminosity.samples();
    let (lo, hi) = lum
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    println!("randomized excitation, {} samples at {} Hz:", drive.len(), rate);
    println!("  luminosity range [{lo:.4}, {hi:.4}]");
    println!("  temperature clamped at zero in {} RK4 stages", trace.clamped_steps);
    Ok(())
}
