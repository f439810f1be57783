//! Command-line interface. Every subcommand is deterministic given its
//! arguments: all randomness flows through an explicit `--seed`, so rerunning
//! a command rewrites byte-identical output files.

use crate::error::{Error, Result};
use crate::fileio::{self, BudgetRow};
use crate::filament::{simulate, FilamentParams};
use crate::kernels::{param_bound_closed_form, param_count, KernelStructure};
use crate::optim::{initialize_model, train, train_monitored, TrainConfig};
use crate::signals::{filament_excitation, lowpass_noise, white_noise};
use crate::synthetic::{
    build_operator, derive_seed, median, min_samples_for_accuracy, ExperimentReport, ModelClass,
    SweepConfig, SweepRow,
};
use crate::volterra::{loss, model_vaf, Dataset, SignalSeries, VolterraModel};
use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(
    name = "cgsid",
    version,
    about = "Nonlinear system identification with coarse-grained Volterra kernels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the exact number of stored parameters for a kernel structure.
    ParamCount(ParamCountArgs),
    /// Measure, per kernel class and noise level, how many samples the
    /// synthetic integral operator needs for a target held-out VAF.
    SynthSweep(SynthSweepArgs),
    /// Simulate the thermal filament and write a drive/luminosity dataset.
    SimulateFilament(SimulateFilamentArgs),
    /// Generate a test signal and write it as CSV.
    GenSignal(GenSignalArgs),
    /// Fit a model (from a structure spec) to a dataset.
    Fit(FitArgs),
    /// Evaluate a stored model on a dataset.
    Eval(EvalArgs),
    /// Export a stored order-2 kernel as a dense heatmap CSV.
    ExportKernel(ExportKernelArgs),
    /// Sweep the training budget for several model classes on one dataset.
    BudgetCurve(BudgetCurveArgs),
}

/// Run a parsed command to completion.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ParamCount(args) => run_param_count(&args),
        Command::SynthSweep(args) => run_synth_sweep(&args),
        Command::SimulateFilament(args) => run_simulate_filament(&args),
        Command::GenSignal(args) => run_gen_signal(&args),
        Command::Fit(args) => run_fit(&args),
        Command::Eval(args) => run_eval(&args),
        Command::ExportKernel(args) => run_export_kernel(&args),
        Command::BudgetCurve(args) => run_budget_curve(&args),
    }
}

#[derive(Args, Debug)]
pub struct ParamCountArgs {
    /// Storage format: dense, hierarchical, or toeplitz_sym.
    #[arg(long)]
    pub repr: ModelClass,
    /// Tensor rank (number of axes).
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Memory length in samples (a power of two).
    #[arg(long)]
    pub n: usize,
    /// Rank budget of off-diagonal blocks (hierarchical only).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Dense-leaf side of the diagonal recursion (hierarchical only).
    #[arg(long, default_value_t = 2)]
    pub leaf_size: usize,
}

fn run_param_count(args: &ParamCountArgs) -> Result<()> {
    let structure = structure_for(args.repr, args.d, args.n, args.k, args.leaf_size)?;
    println!("count={}", param_count(&structure)?);
    if args.repr == ModelClass::Hierarchical {
        // The closed-form bound assumes the recursion runs down to 1x1
        // leaves, so it upper-bounds the count for any larger leaf size.
        let p = structure.n.trailing_zeros();
        println!("bound={}", param_bound_closed_form(p, args.d as u32, args.k as u64));
    }
    Ok(())
}

fn structure_for(
    repr: ModelClass,
    d: usize,
    n: usize,
    k: usize,
    leaf_size: usize,
) -> Result<KernelStructure> {
    Ok(match repr {
        ModelClass::Dense => KernelStructure::dense(d, n),
        ModelClass::Hierarchical => KernelStructure::hierarchical(d, n, k, leaf_size),
        ModelClass::ToeplitzSym => {
            if d != 2 {
                return Err(Error::InvalidArgument(format!(
                    "toeplitz_sym kernels are d = 2 only, got d = {d}"
                )));
            }
            KernelStructure::toeplitz_sym(n)
        }
    })
}

#[derive(Args, Debug)]
pub struct SynthSweepArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Operator discretization size (a power of two).
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Rank budget of the hierarchical class.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Leaf side of the hierarchical class.
    #[arg(long, default_value_t = 2)]
    pub leaf_size: usize,
    /// Held-out VAF that counts as accurate enough.
    #[arg(long, default_value_t = 95.0)]
    pub target_vaf: f64,
    /// Repetitions per cell; the median decides.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Sample-count ceiling for the search.
    #[arg(long, default_value_t = 8192)]
    pub cap: usize,
    /// Held-out samples per repetition.
    #[arg(long, default_value_t = 64)]
    pub heldout: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.03,0.1,0.3,1.0")]
    pub sigmas: Vec<f64>,
    /// Kernel classes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "toeplitz_sym,hierarchical,dense")]
    pub classes: Vec<ModelClass>,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
}

fn run_synth_sweep(args: &SynthSweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        n: args.n,
        k: args.k,
        leaf_size: args.leaf_size,
        target_vaf: args.target_vaf,
        repeats: args.repeats,
        cap: args.cap,
        heldout_count: args.heldout,
        seed: args.seed,
        sigmas: args.sigmas.clone(),
        classes: args.classes.clone(),
        train: TrainConfig {
            learning_rate: args.learning_rate,
            epochs: args.epochs,
            l2: args.l2,
            tolerance: 1e-8,
            patience: 50,
            ..TrainConfig::default()
        },
    };
    let op = build_operator(cfg.n)?;
    println!("class,sigma,m_star,median_vaf,saturated");
    let mut rows = Vec::new();
    for &class in &cfg.classes {
        for &sigma in &cfg.sigmas {
            let outcome = min_samples_for_accuracy(&op, class, sigma, &cfg)?;
            println!(
                "{class},{sigma},{},{},{}",
                outcome.m_star, outcome.median_vaf, outcome.saturated
            );
            rows.push(SweepRow {
                class,
                sigma,
                m_star: outcome.m_star,
                median_vaf: outcome.median_vaf,
                saturated: outcome.saturated,
            });
        }
    }
    fileio::write_sweep(&args.out, &ExperimentReport { rows })?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateFilamentArgs {
    /// Output dataset CSV (drive as input, luminosity as output).
    #[arg(long)]
    pub out: PathBuf,
    /// Drive signal CSV; a band-limited excitation is generated when omitted.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// Plant constants JSON; the default plant when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Samples to generate (ignored with --signal).
    #[arg(long, default_value_t = 750)]
    pub len: usize,
    /// Sample rate in Hz (ignored with --signal).
    #[arg(long, default_value_t = 750.0)]
    pub sample_rate: f64,
    /// Seed for the generated excitation (ignored with --signal).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RK4 substeps per sample interval.
    #[arg(long, default_value_t = 8)]
    pub substeps: usize,
}

fn run_simulate_filament(args: &SimulateFilamentArgs) -> Result<()> {
    let params = match &args.params {
        Some(path) => fileio::read_filament_params(path)?,
        None => FilamentParams::default(),
    };
    let drive = match &args.signal {
        Some(path) => fileio::read_signal(path)?,
        None => filament_excitation(args.len, args.sample_rate, args.seed)?,
    };
    let trace = simulate(&drive, &params, args.substeps)?;
    fileio::write_dataset(&args.out, &drive, &trace.luminosity)?;
    eprintln!(
        "wrote {} ({} samples, {} clamped substeps)",
        args.out.display(),
        drive.len(),
        trace.clamped_steps
    );
    Ok(())
}

/// Kind of generated test signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    White,
    Lowpass,
    FilamentDrive,
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(SignalKind::White),
            "lowpass" => Ok(SignalKind::Lowpass),
            "filament-drive" | "filament_drive" => Ok(SignalKind::FilamentDrive),
            other => Err(Error::InvalidArgument(format!(
                "unknown signal kind {other:?} (expected white, lowpass, or filament-drive)"
            ))),
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::White => write!(f, "white"),
            SignalKind::Lowpass => write!(f, "lowpass"),
            SignalKind::FilamentDrive => write!(f, "filament-drive"),
        }
    }
}

#[derive(Args, Debug)]
pub struct GenSignalArgs {
    /// Output signal CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// white, lowpass, or filament-drive.
    #[arg(long)]
    pub kind: SignalKind,
    #[arg(long, default_value_t = 750)]
    pub len: usize,
    #[arg(long, default_value_t = 750.0)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation (white only).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Cutoff as a fraction of the sample rate (lowpass only).
    #[arg(long, default_value_t = 0.05)]
    pub cutoff: f64,
}

fn run_gen_signal(args: &GenSignalArgs) -> Result<()> {
    let signal = match args.kind {
        SignalKind::White => white_noise(args.len, args.sigma, args.sample_rate, args.seed)?,
        SignalKind::Lowpass => lowpass_noise(args.len, args.cutoff, args.sample_rate, args.seed)?,
        SignalKind::FilamentDrive => {
            filament_excitation(args.len, args.sample_rate, args.seed)?
        }
    };
    fileio::write_signal(&args.out, &signal)?;
    eprintln!("wrote {} ({} samples)", args.out.display(), signal.len());
    Ok(())
}

/// Optimizer settings shared by the fitting subcommands.
#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50_000)]
    pub epochs: usize,
    /// L2 penalty strength on every parameter.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative loss-change convergence threshold.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Epochs over which the loss change is measured.
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    /// Half-width of the low-rank factor initialization.
    #[arg(long, default_value_t = 1e-3)]
    pub init_scale: f64,
}

impl TrainArgs {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
            seed: self.seed,
            tolerance: self.tolerance,
            patience: self.patience,
            init_scale: self.init_scale,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Model structure JSON.
    #[arg(long)]
    pub model_spec: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-epoch training history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Independently generated dataset CSV for held-out monitoring.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let (input, output) = fileio::read_dataset(&args.data)?;
    let mut model = fileio::read_model_spec(&args.model_spec)?;
    check_rate(&model, &input)?;
    let train_set = Dataset::new(input, output, model.memory())?;
    let heldout = match &args.heldout {
        Some(path) => Some(read_dataset_for(path, &model)?),
        None => None,
    };
    let config = args.train.to_config();
    initialize_model(&mut model, config.seed, config.init_scale);
    let report = train_monitored(&mut model, &train_set, &config, heldout.as_ref())?;
    println!(
        "epochs={} converged={} best_loss={}",
        report.epochs_run(),
        report.converged,
        report.best_loss
    );
    println!("train_vaf={}", model_vaf(&model, &train_set)?);
    if let Some(h) = &heldout {
        println!("heldout_vaf={}", model_vaf(&model, h)?);
    }
    fileio::write_model(&args.out, &model)?;
    if let Some(path) = &args.history {
        fileio::write_history(path, &report.history)?;
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn check_rate(model: &VolterraModel, input: &SignalSeries) -> Result<()> {
    if model.sample_rate() != input.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "model sample rate {} Hz does not match dataset rate {} Hz",
            model.sample_rate(),
            input.sample_rate()
        )));
    }
    Ok(())
}

/// Read a dataset and bind it to the model's memory and sample rate.
fn read_dataset_for(path: &PathBuf, model: &VolterraModel) -> Result<Dataset> {
    let (input, output) = fileio::read_dataset(path)?;
    check_rate(model, &input)?;
    Dataset::new(input, output, model.memory())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset CSV to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    /// Stored model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional CSV of the model's prediction on the dataset input.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let (input, output) = fileio::read_dataset(&args.data)?;
    let model = fileio::read_model(&args.model)?;
    check_rate(&model, &input)?;
    let dataset = Dataset::new(input.clone(), output, model.memory())?;
    println!("mse={}", loss(&model, &dataset, 0.0)?);
    println!("vaf={}", model_vaf(&model, &dataset)?);
    if let Some(path) = &args.predictions {
        let prediction = model.predict(&input)?;
        fileio::write_signal(path, &prediction)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExportKernelArgs {
    /// Stored model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Kernel order to export (2 only: the output is a matrix).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Output heatmap CSV.
    #[arg(long)]
    pub out: PathBuf,
}

fn run_export_kernel(args: &ExportKernelArgs) -> Result<()> {
    if args.order != 2 {
        return Err(Error::InvalidArgument(format!(
            "heatmap export supports order 2 only, got {}",
            args.order
        )));
    }
    let model = fileio::read_model(&args.model)?;
    let kernel = model.kernel(args.order).ok_or_else(|| {
        Error::InvalidArgument(format!("model has no order-{} kernel", args.order))
    })?;
    fileio::write_heatmap(&args.out, &kernel.to_dense()?)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

/// Model family for dataset fitting: `linear` has no order-2 kernel; the
/// others add one in the named storage format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitClass {
    Linear,
    Dense,
    Hierarchical,
    ToeplitzSym,
}

impl FitClass {
    fn structures(self, n: usize, k: usize, leaf_size: usize) -> Vec<KernelStructure> {
        match self {
            FitClass::Linear => vec![],
            FitClass::Dense => vec![KernelStructure::dense(2, n)],
            FitClass::Hierarchical => vec![KernelStructure::hierarchical(2, n, k, leaf_size)],
            FitClass::ToeplitzSym => vec![KernelStructure::toeplitz_sym(n)],
        }
    }
}

impl FromStr for FitClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(FitClass::Linear),
            "dense" => Ok(FitClass::Dense),
            "hierarchical" => Ok(FitClass::Hierarchical),
            "toeplitz_sym" | "toeplitz" => Ok(FitClass::ToeplitzSym),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit class {other:?} (expected linear, dense, hierarchical, or toeplitz_sym)"
            ))),
        }
    }
}

impl fmt::Display for FitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitClass::Linear => write!(f, "linear"),
            FitClass::Dense => write!(f, "dense"),
            FitClass::Hierarchical => write!(f, "hierarchical"),
            FitClass::ToeplitzSym => write!(f, "toeplitz_sym"),
        }
    }
}

#[derive(Args, Debug)]
pub struct BudgetCurveArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Independently generated dataset CSV for held-out scoring.
    #[arg(long)]
    pub heldout: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Model memory in samples (a power of two).
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Rank budget of the hierarchical class.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Leaf side of the hierarchical class.
    #[arg(long, default_value_t = 2)]
    pub leaf_size: usize,
    /// Model classes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "linear,toeplitz_sym,hierarchical,dense")]
    pub classes: Vec<FitClass>,
    /// Training budgets in samples; doublings from 64 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Vec<usize>,
    /// Fits per point; the median VAF is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    /// L2 penalty strength on every parameter.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of the low-rank factor initialization.
    #[arg(long, default_value_t = 1e-3)]
    pub init_scale: f64,
}

/// Doublings of 64 that fit within `max`.
fn doubling_budgets(max: usize) -> Vec<usize> {
    let mut budgets = Vec::new();
    let mut m = 64;
    while m <= max {
        budgets.push(m);
        m *= 2;
    }
    budgets
}

fn run_budget_curve(args: &BudgetCurveArgs) -> Result<()> {
    let (input, output) = fileio::read_dataset(&args.data)?;
    if args.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let len = input.len();
    let rate = input.sample_rate();
    let (held_in, held_out) = fileio::read_dataset(&args.heldout)?;
    if held_in.sample_rate() != rate {
        return Err(Error::InvalidArgument(format!(
            "held-out rate {} Hz does not match training rate {rate} Hz",
            held_in.sample_rate()
        )));
    }
    let heldout = Dataset::new(held_in, held_out, args.n)?;
    let budgets = if args.budgets.is_empty() {
        let b = doubling_budgets(len);
        if b.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "dataset of {len} samples is too short for the default budgets"
            )));
        }
        b
    } else {
        for &b in &args.budgets {
            if b > len {
                return Err(Error::InvalidArgument(format!(
                    "budget {b} exceeds the dataset length {len}"
                )));
            }
        }
        args.budgets.clone()
    };
    let base = TrainConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2: args.l2,
        init_scale: args.init_scale,
        tolerance: 1e-8,
        patience: 50,
        ..TrainConfig::default()
    };
    println!("class,budget,median_vaf");
    let mut rows = Vec::new();
    for (ci, &class) in args.classes.iter().enumerate() {
        for &budget in &budgets {
            let train_set = Dataset::new(
                SignalSeries::new(input.samples()[..budget].to_vec(), rate)?,
                SignalSeries::new(output.samples()[..budget].to_vec(), rate)?,
                args.n,
            )?;
            let mut scores = Vec::with_capacity(args.repeats);
            for rep in 0..args.repeats {
                let mut model =
                    VolterraModel::zeros(args.n, rate, &class.structures(args.n, args.k, args.leaf_size))?;
                let stream = ((ci as u64) << 32) | budget as u64;
                let config =
                    TrainConfig { seed: derive_seed(args.seed, stream, rep as u64), ..base.clone() };
                initialize_model(&mut model, config.seed, config.init_scale);
                train(&mut model, &train_set, &config)?;
                scores.push(model_vaf(&model, &heldout)?);
            }
            let median_vaf = median(&mut scores);
            println!("{class},{budget},{median_vaf}");
            rows.push(BudgetRow { class: class.to_string(), budget, median_vaf });
        }
    }
    fileio::write_budget(&args.out, &rows)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
