//! On-disk formats: CSV for signals, datasets, and experiment tables; JSON
//! for models and model specifications.
//!
//! Floats are written with Rust's shortest round-trip formatting, so writing
//! and re-reading a file reproduces the exact same values, and identical runs
//! produce byte-identical files.

use crate::error::{Error, Result};
use crate::filament::FilamentParams;
use crate::kernels::{DenseKernel, Kernel, KernelStructure, ParamVector, Repr};
use crate::optim::EpochRecord;
use crate::synthetic::ExperimentReport;
use crate::volterra::{SignalSeries, VolterraModel};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

const RATE_PREFIX: &str = "# sample_rate_hz=";

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::MalformedFile { path: path.display().to_string(), message: message.into() }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|source| Error::FileIo { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|source| Error::FileIo { path: path.display().to_string(), source })
}

fn parse_number<T: FromStr>(path: &Path, line_no: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| malformed(path, format!("line {line_no}: cannot parse number {field:?}")))
}

/// Split a CSV body into the sample-rate comment line, the expected header,
/// and the data rows (with 1-based line numbers for diagnostics).
fn csv_rows<'a>(
    path: &Path,
    contents: &'a str,
    header: &str,
) -> Result<(f64, Vec<(usize, &'a str)>)> {
    let mut lines = contents.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| malformed(path, "empty file"))?;
    let rate_str = first
        .strip_prefix(RATE_PREFIX)
        .ok_or_else(|| malformed(path, format!("first line must start with {RATE_PREFIX:?}")))?;
    let rate: f64 = parse_number(path, 1, rate_str)?;
    let (_, second) = lines
        .next()
        .ok_or_else(|| malformed(path, "missing header line"))?;
    if second.trim() != header {
        return Err(malformed(path, format!("expected header {header:?}, got {second:?}")));
    }
    let rows = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    Ok((rate, rows))
}

/// Write an input/output pair as CSV: a sample-rate comment, an
/// `input,output` header, one row per sample.
pub fn write_dataset(
    path: impl AsRef<Path>,
    input: &SignalSeries,
    output: &SignalSeries,
) -> Result<()> {
    if input.len() != output.len() {
        return Err(Error::LengthMismatch { expected: input.len(), got: output.len() });
    }
    if input.sample_rate() != output.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "input rate {} Hz differs from output rate {} Hz",
            input.sample_rate(),
            output.sample_rate()
        )));
    }
    let mut text = String::new();
    let _ = writeln!(text, "{RATE_PREFIX}{}", input.sample_rate());
    text.push_str("input,output\n");
    for (x, y) in input.samples().iter().zip(output.samples()) {
        let _ = writeln!(text, "{x},{y}");
    }
    write_file(path.as_ref(), &text)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(SignalSeries, SignalSeries)> {
    let path = path.as_ref();
    let contents = read_file(path)?;
    let (rate, rows) = csv_rows(path, &contents, "input,output")?;
    let mut input = Vec::with_capacity(rows.len());
    let mut output = Vec::with_capacity(rows.len());
    for (line_no, row) in rows {
        let mut fields = row.split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed(path, format!("line {line_no}: expected two fields")));
        };
        input.push(parse_number(path, line_no, a)?);
        output.push(parse_number(path, line_no, b)?);
    }
    let input = SignalSeries::new(input, rate).map_err(|e| malformed(path, e.to_string()))?;
    let output = SignalSeries::new(output, rate).map_err(|e| malformed(path, e.to_string()))?;
    Ok((input, output))
}

/// Write one signal as CSV: a sample-rate comment, a `value` header, one row
/// per sample.
pub fn write_signal(path: impl AsRef<Path>, signal: &SignalSeries) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{RATE_PREFIX}{}", signal.sample_rate());
    text.push_str("value\n");
    for x in signal.samples() {
        let _ = writeln!(text, "{x}");
    }
    write_file(path.as_ref(), &text)
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let path = path.as_ref();
    let contents = read_file(path)?;
    let (rate, rows) = csv_rows(path, &contents, "value")?;
    let mut samples = Vec::with_capacity(rows.len());
    for (line_no, row) in rows {
        if row.contains(',') {
            return Err(malformed(path, format!("line {line_no}: expected one field")));
        }
        samples.push(parse_number(path, line_no, row)?);
    }
    SignalSeries::new(samples, rate).map_err(|e| malformed(path, e.to_string()))
}

/// Write a d = 2 kernel as a plain `n x n` grid of comma-separated values,
/// row-major, no header. Suited for direct ingestion by plotting tools.
pub fn write_heatmap(path: impl AsRef<Path>, matrix: &DenseKernel) -> Result<()> {
    if matrix.d() != 2 {
        return Err(Error::InvalidArgument(format!(
            "heatmap export requires a d = 2 kernel, got d = {}",
            matrix.d()
        )));
    }
    let n = matrix.n();
    let mut text = String::new();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                text.push(',');
            }
            let _ = write!(text, "{}", matrix.at(i, j));
        }
        text.push('\n');
    }
    write_file(path.as_ref(), &text)
}

/// Write a training history as CSV. The held-out VAF column appears only
/// when every record carries one.
pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let with_vaf = !history.is_empty() && history.iter().all(|r| r.heldout_vaf.is_some());
    let mut text = String::new();
    if with_vaf {
        text.push_str("epoch,loss,vaf_on_heldout\n");
        for r in history {
            let _ = writeln!(text, "{},{},{}", r.epoch, r.loss, r.heldout_vaf.unwrap_or(f64::NAN));
        }
    } else {
        text.push_str("epoch,loss\n");
        for r in history {
            let _ = writeln!(text, "{},{}", r.epoch, r.loss);
        }
    }
    write_file(path.as_ref(), &text)
}

/// Write the data-requirement sweep as CSV, one row per (class, noise) cell
/// in the order the sweep produced them.
pub fn write_sweep(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let mut text = String::from("class,sigma,m_star,median_vaf,saturated\n");
    for row in &report.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            row.class, row.sigma, row.m_star, row.median_vaf, row.saturated
        );
    }
    write_file(path.as_ref(), &text)
}

/// One point of an accuracy-versus-training-budget curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub class: String,
    pub budget: usize,
    pub median_vaf: f64,
}

pub fn write_budget(path: impl AsRef<Path>, rows: &[BudgetRow]) -> Result<()> {
    let mut text = String::from("class,budget,median_vaf\n");
    for row in rows {
        let _ = writeln!(text, "{},{},{}", row.class, row.budget, row.median_vaf);
    }
    write_file(path.as_ref(), &text)
}

/// Serialized form of one kernel: structure fields plus the flat parameter
/// vector in canonical order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelFile {
    repr: Repr,
    d: usize,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf_size: Option<usize>,
    parameters: Vec<f64>,
}

impl KernelFile {
    fn structure(&self) -> KernelStructure {
        match self.repr {
            Repr::Dense => KernelStructure::dense(self.d, self.n),
            Repr::Hierarchical => KernelStructure::hierarchical(
                self.d,
                self.n,
                self.k.unwrap_or(1),
                self.leaf_size.unwrap_or(2),
            ),
            Repr::ToeplitzSym => KernelStructure::toeplitz_sym(self.n),
        }
    }
}

/// Serialized form of a full model.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    max_order: usize,
    sample_rate_hz: f64,
    h0: f64,
    h1: Vec<f64>,
    kernels: Vec<KernelFile>,
}

pub fn write_model(path: impl AsRef<Path>, model: &VolterraModel) -> Result<()> {
    let kernels = model
        .kernels()
        .iter()
        .map(|kernel| {
            let s = kernel.structure();
            KernelFile {
                repr: s.repr,
                d: s.d,
                n: s.n,
                k: (s.repr == Repr::Hierarchical).then_some(s.k),
                leaf_size: (s.repr == Repr::Hierarchical).then_some(s.leaf_size),
                parameters: kernel.flatten().into_vec(),
            }
        })
        .collect();
    let file = ModelFile {
        n: model.memory(),
        max_order: model.max_order(),
        sample_rate_hz: model.sample_rate(),
        h0: model.h0(),
        h1: model.h1().to_vec(),
        kernels,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_file(path.as_ref(), &text)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<VolterraModel> {
    let path = path.as_ref();
    let contents = read_file(path)?;
    let file: ModelFile =
        serde_json::from_str(&contents).map_err(|e| malformed(path, e.to_string()))?;
    let mut kernels = Vec::with_capacity(file.kernels.len());
    for kf in &file.kernels {
        let params = ParamVector::new(kf.parameters.clone());
        let kernel = Kernel::unflatten(&params, &kf.structure())
            .map_err(|e| malformed(path, e.to_string()))?;
        kernels.push(kernel);
    }
    let model = VolterraModel::new(file.n, file.sample_rate_hz, file.h0, file.h1, kernels)
        .map_err(|e| malformed(path, e.to_string()))?;
    if model.max_order() != file.max_order {
        return Err(malformed(
            path,
            format!(
                "declared max_order {} does not match the {} stored kernel orders",
                file.max_order,
                model.max_order()
            ),
        ));
    }
    Ok(model)
}

/// Plant-constant overrides; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FilamentParamsFile {
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
    k4: Option<f64>,
    r0: Option<f64>,
    alpha_r: Option<f64>,
    t_init: Option<f64>,
}

/// Read filament plant constants from JSON. Missing fields keep the default
/// plant's values; a missing `t_init` is replaced by the equilibrium at
/// drive 0.75 of the constants actually in effect.
pub fn read_filament_params(path: impl AsRef<Path>) -> Result<FilamentParams> {
    let path = path.as_ref();
    let contents = read_file(path)?;
    let file: FilamentParamsFile =
        serde_json::from_str(&contents).map_err(|e| malformed(path, e.to_string()))?;
    let mut p = FilamentParams::default();
    if let Some(v) = file.k1 {
        p.k1 = v;
    }
    if let Some(v) = file.k2 {
        p.k2 = v;
    }
    if let Some(v) = file.k3 {
        p.k3 = v;
    }
    if let Some(v) = file.k4 {
        p.k4 = v;
    }
    if let Some(v) = file.r0 {
        p.r0 = v;
    }
    if let Some(v) = file.alpha_r {
        p.alpha_r = v;
    }
    p.validate().map_err(|e| malformed(path, e.to_string()))?;
    p.t_init = match file.t_init {
        Some(v) => v,
        None => p.equilibrium(0.75).map_err(|e| malformed(path, e.to_string()))?,
    };
    p.validate().map_err(|e| malformed(path, e.to_string()))?;
    Ok(p)
}

/// One kernel order in a model specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OrderSpec {
    d: usize,
    repr: Repr,
    #[serde(default = "default_rank")]
    k: usize,
    #[serde(default = "default_leaf")]
    leaf_size: usize,
}

fn default_rank() -> usize {
    1
}

fn default_leaf() -> usize {
    2
}

/// A model specification: shape only, no parameter values.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecFile {
    n: usize,
    sample_rate_hz: f64,
    orders: Vec<OrderSpec>,
}

/// Read a model specification and build the corresponding all-zero model.
pub fn read_model_spec(path: impl AsRef<Path>) -> Result<VolterraModel> {
    let path = path.as_ref();
    let contents = read_file(path)?;
    let file: ModelSpecFile =
        serde_json::from_str(&contents).map_err(|e| malformed(path, e.to_string()))?;
    let structures: Vec<KernelStructure> = file
        .orders
        .iter()
        .map(|o| match o.repr {
            Repr::Dense => KernelStructure::dense(o.d, file.n),
            Repr::Hierarchical => KernelStructure::hierarchical(o.d, file.n, o.k, o.leaf_size),
            Repr::ToeplitzSym => KernelStructure::toeplitz_sym(file.n),
        })
        .collect();
    VolterraModel::zeros(file.n, file.sample_rate_hz, &structures)
        .map_err(|e| malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::HKernel;
    use crate::signals::seeded_rng;

    fn series(values: &[f64]) -> SignalSeries {
        SignalSeries::new(values.to_vec(), 750.0).unwrap()
    }

    #[test]
    fn dataset_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let input = series(&[0.1, 0.25, 1.0 / 3.0, -4.75e-3]);
        let output = series(&[1.0, -2.5, 3.125e17, 0.0]);
        write_dataset(&path, &input, &output).unwrap();
        let (rin, rout) = read_dataset(&path).unwrap();
        assert_eq!(rin, input);
        assert_eq!(rout, output);
    }

    #[test]
    fn dataset_write_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let input = series(&[0.1, 0.2]);
        let output = series(&[-1.0, 2.0]);
        write_dataset(&a, &input, &output).unwrap();
        write_dataset(&b, &input, &output).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, "# sample_rate_hz=750\ninput,output\n0.1,-1\n0.2,2\n");
    }

    #[test]
    fn signal_roundtrip_and_malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let signal = series(&[0.5, -0.5, 0.0]);
        write_signal(&path, &signal).unwrap();
        assert_eq!(read_signal(&path).unwrap(), signal);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "value\n1.0\n").unwrap();
        assert!(matches!(read_signal(&bad), Err(Error::MalformedFile { .. })));
        std::fs::write(&bad, "# sample_rate_hz=750\nvalue\nnot_a_number\n").unwrap();
        assert!(matches!(read_signal(&bad), Err(Error::MalformedFile { .. })));
        std::fs::write(&bad, "# sample_rate_hz=750\nwrong\n1.0\n").unwrap();
        assert!(matches!(read_signal(&bad), Err(Error::MalformedFile { .. })));
        assert!(matches!(
            read_signal(dir.path().join("missing.csv")),
            Err(Error::FileIo { .. })
        ));
    }

    #[test]
    fn dataset_requires_matching_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let three = series(&[1.0, 2.0, 3.0]);
        let two = series(&[1.0, 2.0]);
        assert!(write_dataset(&path, &three, &two).is_err());
        let slow = SignalSeries::new(vec![1.0, 2.0, 3.0], 10.0).unwrap();
        assert!(write_dataset(&path, &three, &slow).is_err());
    }

    #[test]
    fn heatmap_is_a_plain_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let mut m = DenseKernel::zeros(2, 2).unwrap();
        *m.at_mut(0, 0) = 1.0;
        *m.at_mut(0, 1) = -2.5;
        *m.at_mut(1, 0) = 0.125;
        write_heatmap(&path, &m).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1,-2.5\n0.125,0\n");
        let cube = DenseKernel::zeros(3, 2).unwrap();
        assert!(write_heatmap(dir.path().join("c.csv"), &cube).is_err());
    }

    #[test]
    fn history_column_layout_follows_the_records() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("h1.csv");
        write_history(
            &plain,
            &[
                EpochRecord { epoch: 0, loss: 1.5, heldout_vaf: None },
                EpochRecord { epoch: 1, loss: 0.75, heldout_vaf: None },
            ],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&plain).unwrap(),
            "epoch,loss\n0,1.5\n1,0.75\n"
        );
        let with_vaf = dir.path().join("h2.csv");
        write_history(
            &with_vaf,
            &[EpochRecord { epoch: 0, loss: 1.5, heldout_vaf: Some(42.0) }],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&with_vaf).unwrap(),
            "epoch,loss,vaf_on_heldout\n0,1.5,42\n"
        );
    }

    #[test]
    fn sweep_and_budget_tables_have_stable_headers() {
        use crate::synthetic::{ModelClass, SweepRow};
        let dir = tempfile::tempdir().unwrap();
        let sweep_path = dir.path().join("sweep.csv");
        let report = ExperimentReport {
            rows: vec![SweepRow {
                class: ModelClass::Hierarchical,
                sigma: 0.1,
                m_star: 12,
                median_vaf: 97.25,
                saturated: false,
            }],
        };
        write_sweep(&sweep_path, &report).unwrap();
        assert_eq!(
            std::fs::read_to_string(&sweep_path).unwrap(),
            "class,sigma,m_star,median_vaf,saturated\nhierarchical,0.1,12,97.25,false\n"
        );
        let budget_path = dir.path().join("budget.csv");
        write_budget(
            &budget_path,
            &[BudgetRow { class: "dense".into(), budget: 128, median_vaf: 88.5 }],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&budget_path).unwrap(),
            "class,budget,median_vaf\ndense,128,88.5\n"
        );
    }

    #[test]
    fn model_json_roundtrip_preserves_every_parameter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut h = HKernel::zeros(2, 8, 2, 2).unwrap();
        h.randomize_factors(1e-3, &mut seeded_rng(5));
        let mut model = VolterraModel::new(
            8,
            750.0,
            0.25,
            (0..8).map(|i| i as f64 / 7.0).collect(),
            vec![Kernel::Hierarchical(h)],
        )
        .unwrap();
        let flat = model.flatten();
        let mut perturbed = flat.clone().into_vec();
        perturbed[10] = 0.123456789012345678;
        model.set_params(&perturbed).unwrap();
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn model_json_rejects_inconsistent_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(read_model(&path), Err(Error::MalformedFile { .. })));
        // Wrong parameter count for the declared structure.
        std::fs::write(
            &path,
            r#"{"n":4,"max_order":2,"sample_rate_hz":750.0,"h0":0.0,
                "h1":[0,0,0,0],
                "kernels":[{"repr":"dense","d":2,"n":4,"parameters":[1,2,3]}]}"#,
        )
        .unwrap();
        assert!(matches!(read_model(&path), Err(Error::MalformedFile { .. })));
        // max_order disagrees with the kernel list.
        std::fs::write(
            &path,
            r#"{"n":4,"max_order":3,"sample_rate_hz":750.0,"h0":0.0,
                "h1":[0,0,0,0],"kernels":[]}"#,
        )
        .unwrap();
        assert!(matches!(read_model(&path), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn filament_params_overlay_defaults_and_recompute_the_start_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        std::fs::write(&path, r#"{"k1":60.0,"k2":18.0,"k3":6.0}"#).unwrap();
        let p = read_filament_params(&path).unwrap();
        assert_eq!((p.k1, p.k2, p.k3), (60.0, 18.0, 6.0));
        let default = FilamentParams::default();
        assert_eq!((p.k4, p.r0, p.alpha_r), (default.k4, default.r0, default.alpha_r));
        // Doubling k1..k3 together preserves the equilibria, so the
        // recomputed start state matches the default plant's.
        assert!((p.t_init - default.t_init).abs() < 1e-12);
        // An explicit start state is kept verbatim.
        std::fs::write(&path, r#"{"t_init":0.5}"#).unwrap();
        assert_eq!(read_filament_params(&path).unwrap().t_init, 0.5);
        // Typos in field names are rejected rather than ignored.
        std::fs::write(&path, r#"{"alpha":2.0}"#).unwrap();
        assert!(matches!(read_filament_params(&path), Err(Error::MalformedFile { .. })));
        // Invalid constants are rejected.
        std::fs::write(&path, r#"{"k2":-1.0}"#).unwrap();
        assert!(matches!(read_filament_params(&path), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn model_spec_builds_a_zero_model_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        std::fs::write(
            &path,
            r#"{"n":16,"sample_rate_hz":750.0,
                "orders":[{"d":2,"repr":"hierarchical"},{"d":3,"repr":"hierarchical","k":2,"leaf_size":4}]}"#,
        )
        .unwrap();
        let model = read_model_spec(&path).unwrap();
        assert_eq!(model.memory(), 16);
        assert_eq!(model.max_order(), 3);
        assert_eq!(model.h0(), 0.0);
        assert!(model.flatten().iter().all(|&v| v == 0.0));
        let s2 = model.kernel(2).unwrap().structure();
        assert_eq!((s2.k, s2.leaf_size), (1, 2));
        let s3 = model.kernel(3).unwrap().structure();
        assert_eq!((s3.k, s3.leaf_size), (2, 4));
    }
}
