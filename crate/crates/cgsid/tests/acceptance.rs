//! The release gate: one test per acceptance criterion, each printing a
//! single `criterion N PASS/FAIL` line (visible with `--nocapture`) and
//! asserting with tolerances pinned in this file.
//!
//! Run serially (`--test-threads=1`) for meaningful wall-clock checks.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cgsid::filament::{d_temperature, simulate, FilamentParams};
use cgsid::kernels::{param_bound_closed_form, param_count, Kernel, KernelStructure, ParamVector};
use cgsid::optim::{initialize_model, train, TrainConfig};
use cgsid::signals::{filament_excitation, seeded_rng, white_noise};
use cgsid::synthetic::{build_operator, min_samples_for_accuracy, ModelClass, SweepConfig};
use cgsid::volterra::{loss_grad, model_vaf, Dataset, SignalSeries, VolterraModel};
use rand::Rng;

/// Prints the verdict line for a criterion and panics on failure.
fn verdict(number: u32, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {number} {status}: {detail}");
    assert!(ok, "criterion {number} failed: {detail}");
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

// --- criterion 1: exact parameter counts and the 1:8:16 ratio ---------------

#[test]
fn criterion_1_parameter_counts() {
    let hier = param_count(&KernelStructure::hierarchical(2, 16, 1, 2)).unwrap();
    let toep = param_count(&KernelStructure::toeplitz_sym(16)).unwrap();
    let dense = param_count(&KernelStructure::dense(2, 16)).unwrap();
    let ok = toep == 16 && hier == 128 && dense == 256 && hier == 8 * toep && dense == 16 * toep;
    verdict(
        1,
        ok,
        &format!("counts toeplitz/hier/dense = {toep}/{hier}/{dense}, ratio 1:{}:{}",
            hier / toep, dense / toep),
    );
}

// --- criterion 2: closed-form bound vs the unrolled recurrence --------------

/// Independent oracle: unroll the recursion with 1x1 leaves directly.
/// Each halving level keeps 2 diagonal orthants and stores the other
/// 2^d - 2 as k outer products of d half-side factor vectors.
fn recurrence_count(side: u64, d: u32, k: u64) -> u64 {
    if side == 1 {
        return 1;
    }
    let half = side / 2;
    let offdiag = ((1u64 << d) - 2) * k * d as u64 * half;
    2 * recurrence_count(half, d, k) + offdiag
}

#[test]
fn criterion_2_closed_form_bound() {
    let start = Instant::now();
    let mut worst: Option<String> = None;
    for p in 1..=10u32 {
        for d in 2..=4u32 {
            for k in 1..=3u64 {
                let unrolled = recurrence_count(1 << p, d, k);
                let closed = param_bound_closed_form(p, d, k);
                if unrolled != closed {
                    worst = Some(format!("p={p} d={d} k={k}: {unrolled} != {closed}"));
                }
                if d == 2 {
                    let formula = (1u64 << p) * (2 * k * p as u64 + 1);
                    if closed != formula {
                        worst = Some(format!("d=2 formula mismatch at p={p} k={k}"));
                    }
                }
            }
        }
    }
    let flagship = param_bound_closed_form(7, 2, 1);
    if flagship != 1920 {
        worst = Some(format!("bound(p=7,d=2,k=1) = {flagship}, expected 1920"));
    }
    let ok = worst.is_none() && within_budget(start.elapsed(), Duration::from_secs(60));
    verdict(
        2,
        ok,
        &worst.unwrap_or_else(|| {
            format!("recurrence = closed form for p<=10 d<=4 k<=3; bound(7,2,1)=1920 [{:.2?}]",
                start.elapsed())
        }),
    );
}

// --- criterion 3: oracle equivalence of all evaluation paths ----------------

/// Brute-force tensor contraction of row-major dense values against d
/// copies of w. Written independently of the library's evaluation code.
fn brute_force_form(values: &[f64], d: usize, n: usize, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for (flat, &value) in values.iter().enumerate() {
        let mut rem = flat;
        let mut prod = 1.0;
        for _ in 0..d {
            prod *= w[rem % n];
            rem /= n;
        }
        total += value * prod;
    }
    total
}

fn brute_force_matvec(values: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| values[i * n + j] * x[j]).sum())
        .collect()
}

fn random_kernel(index: usize) -> Kernel {
    let mut rng = seeded_rng(9_000 + index as u64);
    let sides = [4usize, 8, 16];
    let n = sides[index % sides.len()];
    let structure = match index % 3 {
        0 => KernelStructure::dense(2 + (index / 3) % 2, n),
        1 => KernelStructure::hierarchical(
            2 + (index / 3) % 2,
            n,
            1 + (index / 6) % 2,
            1 << ((index / 12) % 2),
        ),
        _ => KernelStructure::toeplitz_sym(n),
    };
    let len = param_count(&structure).unwrap();
    let values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Kernel::unflatten(&ParamVector::new(values), &structure).unwrap()
}

#[test]
fn criterion_3_oracle_equivalence() {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut max_rel: f64 = 0.0;
    for index in 0..200 {
        let kernel = random_kernel(index);
        let structure = kernel.structure();
        let (d, n) = (structure.d, structure.n);
        let dense = kernel.to_dense().unwrap();
        let mut rng = seeded_rng(10_000 + index as u64);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();

        let got = kernel.multilinear_form(&w).unwrap();
        let want = brute_force_form(dense.values(), d, n, &w);
        max_rel = max_rel.max((got - want).abs() / want.abs().max(1.0));

        if d == 2 {
            let got = kernel.matvec(&w).unwrap();
            let want = brute_force_matvec(dense.values(), n, &w);
            for (g, t) in got.iter().zip(&want) {
                max_rel = max_rel.max((g - t).abs() / t.abs().max(1.0));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = max_rel <= TOL && within_budget(elapsed, Duration::from_secs(60));
    verdict(
        3,
        ok,
        &format!("200 kernels, max relative deviation {max_rel:.3e} (tol {TOL:.0e}) [{elapsed:.2?}]"),
    );
}

// --- criterion 4: analytic gradients vs central finite differences ----------

/// Relative mismatch between an analytic gradient and central differences
/// of `f`, probed at every `stride`-th coordinate.
fn fd_mismatch(
    analytic: &[f64],
    params: &[f64],
    stride: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in (0..params.len()).step_by(stride.max(1)) {
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[i] += step;
        minus[i] -= step;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * step);
        let denom = numeric.abs().max(analytic[i].abs()).max(1.0);
        worst = worst.max((numeric - analytic[i]).abs() / denom);
    }
    worst
}

#[test]
fn criterion_4_gradient_checks() {
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let mut max_rel: f64 = 0.0;

    // 17 instances: parameter gradient of the multilinear form.
    for index in 0..17 {
        let kernel = random_kernel(31 * index + 1);
        let structure = kernel.structure();
        let mut rng = seeded_rng(20_000 + index as u64);
        let w: Vec<f64> = (0..structure.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let upstream = rng.random_range(0.2..=2.0);
        let analytic = kernel.grad_multilinear_form(&w, upstream).unwrap();
        let flat = kernel.flatten();
        let stride = flat.as_slice().len() / 16;
        let rel = fd_mismatch(analytic.as_slice(), flat.as_slice(), stride, |theta| {
            let k = Kernel::unflatten(&ParamVector::new(theta.to_vec()), &structure).unwrap();
            upstream * k.multilinear_form(&w).unwrap()
        });
        max_rel = max_rel.max(rel);
    }

    // 17 instances: parameter gradient of the matvec against a cotangent
    // (order-2 kernels of every representation).
    for index in 0..17usize {
        let n = [4usize, 8, 16][index % 3];
        let structure = match index % 3 {
            0 => KernelStructure::dense(2, n),
            1 => KernelStructure::hierarchical(2, n, 1 + index % 2, 2),
            _ => KernelStructure::toeplitz_sym(n),
        };
        let mut rng = seeded_rng(21_000 + index as u64);
        let values: Vec<f64> =
            (0..param_count(&structure).unwrap()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let kernel = Kernel::unflatten(&ParamVector::new(values), &structure).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let cot: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let analytic = kernel.grad_matvec(&x, &cot).unwrap();
        let flat = kernel.flatten();
        let stride = flat.as_slice().len() / 16;
        let rel = fd_mismatch(analytic.as_slice(), flat.as_slice(), stride, |theta| {
            let k = Kernel::unflatten(&ParamVector::new(theta.to_vec()), &structure).unwrap();
            k.matvec(&x).unwrap().iter().zip(&cot).map(|(y, c)| y * c).sum()
        });
        max_rel = max_rel.max(rel);
    }

    // 16 instances: full model loss gradient, with and without L2.
    for index in 0..16u64 {
        let n = 8;
        let structures = [
            KernelStructure::hierarchical(2, n, 1 + (index as usize) % 2, 2),
            KernelStructure::dense(3, n),
        ];
        let mut model = VolterraModel::zeros(n, 750.0, &structures).unwrap();
        let mut rng = seeded_rng(22_000 + index);
        let params: Vec<f64> =
            (0..model.param_count()).map(|_| rng.random_range(-0.5..=0.5)).collect();
        model.set_params(&params).unwrap();
        let lambda = if index % 2 == 0 { 0.0 } else { 0.01 };
        let input = white_noise(40, 1.0, 750.0, 23_000 + index).unwrap();
        let output = white_noise(40, 1.0, 750.0, 24_000 + index).unwrap();
        let dataset = Dataset::new(input, output, n).unwrap();
        let (_, analytic) = loss_grad(&model, &dataset, lambda).unwrap();
        let stride = params.len() / 16;
        let rel = fd_mismatch(analytic.as_slice(), &params, stride, |theta| {
            let mut m = VolterraModel::zeros(n, 750.0, &structures).unwrap();
            m.set_params(theta).unwrap();
            cgsid::volterra::loss(&m, &dataset, lambda).unwrap()
        });
        max_rel = max_rel.max(rel);
    }

    let elapsed = start.elapsed();
    let ok = max_rel <= TOL && within_budget(elapsed, Duration::from_secs(120));
    verdict(
        4,
        ok,
        &format!("50 instances, max relative mismatch {max_rel:.3e} (tol {TOL:.0e}) [{elapsed:.2?}]"),
    );
}

// --- criterion 5: identification of a known second-order model --------------

#[test]
fn criterion_5_dense_identification() {
    let start = Instant::now();
    let n = 16;
    let rate = 750.0;
    let structures = [KernelStructure::dense(2, n)];
    let mut truth = VolterraModel::zeros(n, rate, &structures).unwrap();
    let coeffs = white_noise(truth.param_count(), 0.3, rate, 99).unwrap();
    truth.set_params(coeffs.samples()).unwrap();

    let train_input = white_noise(4_000, 1.0, rate, 1).unwrap();
    let train_output = truth.predict(&train_input).unwrap();
    let train_set = Dataset::new(train_input, train_output, n).unwrap();
    let held_input = white_noise(2_000, 1.0, rate, 2).unwrap();
    let held_output = truth.predict(&held_input).unwrap();
    let heldout = Dataset::new(held_input, held_output, n).unwrap();

    let mut model = VolterraModel::zeros(n, rate, &structures).unwrap();
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 20_000,
        tolerance: 1e-12,
        patience: 100,
        ..TrainConfig::default()
    };
    initialize_model(&mut model, 3, config.init_scale);
    train(&mut model, &train_set, &config).unwrap();
    let vaf = model_vaf(&model, &heldout).unwrap();

    let elapsed = start.elapsed();
    let ok = vaf > 99.9 && within_budget(elapsed, Duration::from_secs(300));
    verdict(5, ok, &format!("held-out VAF {vaf:.4}% (needs > 99.9%) [{elapsed:.2?}]"));
}

// --- criterion 6: synthetic operator data-budget sweep ----------------------

#[test]
fn criterion_6_synthetic_sweep() {
    let start = Instant::now();
    let cfg = SweepConfig::default();
    let op = build_operator(cfg.n).unwrap();
    let classes = [ModelClass::ToeplitzSym, ModelClass::Hierarchical, ModelClass::Dense];
    let mut ok = true;
    let mut lines = Vec::new();
    for &sigma in &cfg.sigmas {
        let mut m_stars = Vec::new();
        for &class in &classes {
            let outcome = min_samples_for_accuracy(&op, class, sigma, &cfg).unwrap();
            ok &= !outcome.saturated;
            m_stars.push(outcome.m_star);
        }
        let (toep, hier, dense) = (m_stars[0], m_stars[1], m_stars[2]);
        let ratio = dense as f64 / toep as f64;
        let ordered = toep <= hier && hier <= dense;
        let ratio_ok = (8.0..=32.0).contains(&ratio);
        ok &= ordered && ratio_ok;
        lines.push(format!(
            "sigma {sigma}: m* toeplitz/hier/dense = {toep}/{hier}/{dense}, dense:toeplitz = {ratio:.1}"
        ));
    }
    let elapsed = start.elapsed();
    ok &= within_budget(elapsed, Duration::from_secs(900));
    verdict(6, ok, &format!("{} [{elapsed:.2?}]", lines.join("; ")));
}

// --- criterion 7: filament budgets — class ordering and convergence ---------

struct FilamentExperiment {
    rate: f64,
    memory: usize,
    substeps: usize,
}

impl FilamentExperiment {
    fn dataset(&self, len: usize, seed: u64) -> Dataset {
        let drive = filament_excitation(len, self.rate, seed).unwrap();
        let trace = simulate(&drive, &FilamentParams::default(), self.substeps).unwrap();
        Dataset::new(drive, trace.luminosity, self.memory).unwrap()
    }

    /// Fit one class at one L2 strength and score it on held-out data.
    fn fit_score(
        &self,
        structures: &[KernelStructure],
        train_set: &Dataset,
        heldout: &Dataset,
        l2: f64,
        seed: u64,
        epochs: usize,
    ) -> f64 {
        let mut model = VolterraModel::zeros(self.memory, self.rate, structures).unwrap();
        let config = TrainConfig {
            learning_rate: 0.01,
            epochs,
            l2,
            seed,
            tolerance: 1e-8,
            patience: 50,
            ..TrainConfig::default()
        };
        initialize_model(&mut model, seed, config.init_scale);
        train(&mut model, train_set, &config).unwrap();
        model_vaf(&model, heldout).unwrap()
    }
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

#[test]
fn criterion_7_filament_experiment() {
    const MARGIN: f64 = 0.3; // required VAF gap between adjacent classes
    const AGREEMENT: f64 = 0.5; // allowed dense/coarse gap at the large budget
    let start = Instant::now();
    let exp = FilamentExperiment { rate: 750.0, memory: 128, substeps: 8 };
    let n = exp.memory;

    // Small budget: 750 samples (1 s), 5 seeds, per-class L2 tuned on a
    // small grid, fresh held-out recording (4 s) per seed.
    let classes: [(&str, Vec<KernelStructure>, &[f64]); 3] = [
        ("linear", vec![], &[0.0, 1e-3]),
        ("dense+L2", vec![KernelStructure::dense(2, n)], &[0.3, 1.0, 3.0]),
        ("coarse", vec![KernelStructure::hierarchical(2, n, 1, 2)], &[1e-3, 1e-2]),
    ];
    let mut medians = Vec::new();
    for (_, structures, grid) in &classes {
        let mut scores = Vec::new();
        for seed in 0..5u64 {
            let train_set = exp.dataset(750, 100 + seed);
            let heldout = exp.dataset(3_000, 200 + seed);
            let best = grid
                .iter()
                .map(|&l2| exp.fit_score(structures, &train_set, &heldout, l2, 300 + seed, 2_500))
                .fold(f64::NEG_INFINITY, f64::max);
            scores.push(best);
        }
        medians.push(median_of(scores));
    }
    let (linear, dense, coarse) = (medians[0], medians[1], medians[2]);
    let ordering_ok = linear + MARGIN <= dense && dense + MARGIN <= coarse;

    // Large budget: 22,500 samples (30 s). With ample data the dense fit
    // catches up to the coarse one; each class runs a fixed epoch budget
    // (dense needs far more epochs per VAF point) and the two must agree.
    let train_set = exp.dataset(22_500, 400);
    let heldout = exp.dataset(3_000, 401);
    let dense_large =
        exp.fit_score(&[KernelStructure::dense(2, n)], &train_set, &heldout, 0.0, 402, 3_000);
    let coarse_large = exp.fit_score(
        &[KernelStructure::hierarchical(2, n, 1, 2)],
        &train_set,
        &heldout,
        0.0,
        403,
        600,
    );
    let agreement = (dense_large - coarse_large).abs();
    let agreement_ok = agreement <= AGREEMENT;

    let elapsed = start.elapsed();
    let ok = ordering_ok && agreement_ok && within_budget(elapsed, Duration::from_secs(1_800));
    verdict(
        7,
        ok,
        &format!(
            "750-sample medians linear/dense/coarse = {linear:.2}/{dense:.2}/{coarse:.2}% \
             (adjacent gaps >= {MARGIN}); 22500-sample dense vs coarse = \
             {dense_large:.2}/{coarse_large:.2}% (|gap| {agreement:.3} <= {AGREEMENT}) [{elapsed:.2?}]"
        ),
    );
}

// --- criterion 8: simulator integrity ----------------------------------------

#[test]
fn criterion_8_simulator_integrity() {
    let start = Instant::now();
    let params = FilamentParams::default();
    let rate = 750.0;

    // RK4 order: halving the step shrinks the error by about 2^4.
    let drive = filament_excitation(96, rate, 55).unwrap();
    let reference = simulate(&drive, &params, 512).unwrap();
    let max_err = |substeps: usize| -> f64 {
        let trace = simulate(&drive, &params, substeps).unwrap();
        trace
            .temperature
            .samples()
            .iter()
            .zip(reference.temperature.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let ratio = max_err(2) / max_err(4);
    let ratio_ok = (8.0..=32.0).contains(&ratio);

    // Constant drive at the equilibrium temperature stays put.
    let mut worst_residual: f64 = 0.0;
    for v in [0.3, 0.75, 1.2] {
        let t_star = params.equilibrium(v).unwrap();
        worst_residual = worst_residual.max(d_temperature(t_star, v, &params).unwrap().abs());
    }
    let residual_ok = worst_residual < 1e-8;

    // Temperature and luminosity never go negative, even as the drive
    // drops to zero and the filament cools.
    let mut samples = filament_excitation(64, rate, 56).unwrap().into_samples();
    samples.extend(vec![0.0; 64]);
    let cold = simulate(&SignalSeries::new(samples, rate).unwrap(), &params, 8).unwrap();
    let nonneg_ok = cold
        .temperature
        .samples()
        .iter()
        .chain(cold.luminosity.samples())
        .all(|&x| x >= 0.0);

    let elapsed = start.elapsed();
    let ok = ratio_ok && residual_ok && nonneg_ok && within_budget(elapsed, Duration::from_secs(60));
    verdict(
        8,
        ok,
        &format!(
            "step-halving ratio {ratio:.1} (in [8, 32]); max equilibrium residual \
             {worst_residual:.2e} (< 1e-8); all states nonnegative: {nonneg_ok} [{elapsed:.2?}]"
        ),
    );
}

// --- criterion 9: byte-identical CLI reruns ----------------------------------

fn cgsid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgsid"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_twice_and_compare(dir: &Path, name: &str, args: &[String]) -> bool {
    let mut files = Vec::new();
    for run in 0..2 {
        let out_path = dir.join(format!("{name}_{run}.csv"));
        let mut full: Vec<String> = args.to_vec();
        full.push("--out".into());
        full.push(out_path.to_str().unwrap().into());
        let argv: Vec<&str> = full.iter().map(String::as_str).collect();
        let out = cgsid(&argv);
        assert!(
            out.status.success(),
            "{name} run {run} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push(fs::read(&out_path).unwrap());
    }
    files[0] == files[1]
}

#[test]
fn criterion_9_reproducible_cli_runs() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let mut all = true;

    let sim: Vec<String> =
        ["simulate-filament", "--len", "200", "--seed", "11"].map(String::from).to_vec();
    all &= run_twice_and_compare(dir, "sim", &sim);

    let sig: Vec<String> =
        ["gen-signal", "--kind", "filament-drive", "--len", "200", "--seed", "12"]
            .map(String::from)
            .to_vec();
    all &= run_twice_and_compare(dir, "sig", &sig);

    let sweep: Vec<String> = [
        "synth-sweep",
        "--sigmas",
        "0.1",
        "--classes",
        "toeplitz_sym",
        "--repeats",
        "2",
        "--cap",
        "512",
        "--epochs",
        "400",
        "--seed",
        "13",
    ]
    .map(String::from)
    .to_vec();
    all &= run_twice_and_compare(dir, "sweep", &sweep);

    // budget-curve needs datasets on disk first.
    let data = dir.join("train.csv");
    let held = dir.join("held.csv");
    for (path, seed) in [(&data, "14"), (&held, "15")] {
        let out = cgsid(&[
            "simulate-filament",
            "--out",
            path.to_str().unwrap(),
            "--len",
            "300",
            "--seed",
            seed,
        ]);
        assert!(out.status.success());
    }
    let curve: Vec<String> = [
        "budget-curve",
        "--data",
        data.to_str().unwrap(),
        "--heldout",
        held.to_str().unwrap(),
        "--classes",
        "linear,toeplitz_sym",
        "--budgets",
        "128,300",
        "--repeats",
        "2",
        "--epochs",
        "200",
        "--seed",
        "16",
    ]
    .map(String::from)
    .to_vec();
    all &= run_twice_and_compare(dir, "curve", &curve);

    let elapsed = start.elapsed();
    verdict(
        9,
        all,
        &format!("simulate/gen-signal/synth-sweep/budget-curve rerun byte-identical [{elapsed:.2?}]"),
    );
}
