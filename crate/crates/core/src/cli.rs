//! Batch front end: solves, series, oracle spectra, the two quartic tables and
//! identity checks, rendered as CSV, JSON lines or aligned text.
//!
//! Exit codes: 0 success, 1 input error, 2 a computed value failed its
//! comparison (table gate, oracle disagreement, identity check).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::eigensolve::{diagonalize_oracle, eval_series, nearest, solve_root, SolveOptions, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::kernel::{cut_series, Convention, DEFAULT_JET_ORDER};
use crate::model::SpectrumSplit;
use crate::reference;
use crate::verify::{
    check_derivative_identity, check_laurent, check_power_relation, default_rs_grid, rs_consistency,
    IdentityReport, DEFAULT_RS_DEGREE,
};

pub const THREADS_ENV: &str = "KERNEL_EIG_THREADS";

/// Oracle diagnostics are attached up to this basis size.
pub const ORACLE_MAX_DIM: usize = 1000;

/// Default truncations for `table2`: the published sizes plus a converged basis.
pub const TABLE2_TRUNCATIONS: [usize; 7] = [10, 20, 30, 50, 100, 200, 600];

/// Required agreement with the high-precision ground-state values.
pub fn known_tolerance(lambda: f64) -> f64 {
    if lambda >= 100.0 {
        1e-6
    } else {
        1e-8
    }
}

#[derive(Debug, Parser)]
#[command(name = "kernel-eig", version, about = "Eigenvalues from the kernel-function root equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    /// Eigenvalue of one level (root equation by default)
    Solve,
    /// Truncated eigenvalue-shift series
    Series,
    /// Cut-series contributions R_0^c(0, n) for the quartic oscillator
    Table1,
    /// Quartic ground-state energies against basis size
    Table2,
    /// Identity checks, one JSON line per report
    Verify,
    /// Full spectrum by dense diagonalization
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionArg {
    Raw,
    Coupled,
    Ordinal,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Raw => Convention::RawIndex,
            ConventionArg::Coupled => Convention::CoupledSubspace,
            ConventionArg::Ordinal => Convention::Ordinal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    #[default]
    Root,
    Series,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Pretty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IdentityArg {
    Power,
    Derivative,
    Laurent,
    Rs,
    #[default]
    All,
}

/// Every flag; the JSON config file uses the same names.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// JSON file with default values for any of these flags
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Coupling constant(s), comma separated
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub gamma: Option<usize>,
    /// Basis size K
    #[arg(long, global = true)]
    pub basis: Option<usize>,
    /// Oscillator exponent m in lambda x^(2m)
    #[arg(long, global = true)]
    pub power: Option<u32>,
    /// Largest cut level for table1
    #[arg(long = "cut-N", global = true)]
    #[serde(rename = "cut-N")]
    pub cut_n: Option<usize>,
    #[arg(long, global = true)]
    pub jet_order: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Custom Hamiltonian as {"matrix": [[...]]}
    #[arg(long, global = true)]
    pub matrix: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, or "auto"
    #[arg(long, global = true)]
    pub threads: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub identity: Option<IdentityArg>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Basis sizes for table2, comma separated
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub truncations: Option<Vec<usize>>,
}

impl Flags {
    /// Fills unset fields from `base`.
    fn or(self, base: Flags) -> Flags {
        Flags {
            config: self.config.or(base.config),
            lambda: self.lambda.or(base.lambda),
            gamma: self.gamma.or(base.gamma),
            basis: self.basis.or(base.basis),
            power: self.power.or(base.power),
            cut_n: self.cut_n.or(base.cut_n),
            jet_order: self.jet_order.or(base.jet_order),
            convention: self.convention.or(base.convention),
            tol: self.tol.or(base.tol),
            mode: self.mode.or(base.mode),
            matrix: self.matrix.or(base.matrix),
            output: self.output.or(base.output),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            identity: self.identity.or(base.identity),
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            truncations: self.truncations.or(base.truncations),
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub command: CommandKind,
    pub lambdas: Option<Vec<f64>>,
    pub gamma: usize,
    pub basis: Option<usize>,
    pub power: u32,
    pub cut_n: Option<usize>,
    pub jet_order: usize,
    pub convention: Convention,
    pub tol: f64,
    pub mode: ModeArg,
    pub matrix: Option<PathBuf>,
    pub output: OutputFormat,
    pub seed: Option<u64>,
    /// `None` lets the thread pool pick.
    pub threads: Option<usize>,
    pub identity: IdentityArg,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub truncations: Option<Vec<usize>>,
}

impl RunSpec {
    /// Merges flags over the config file (if any) and applies defaults.
    /// `env_threads` is the value of the thread environment variable.
    pub fn resolve(command: CommandKind, flags: Flags, env_threads: Option<String>) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<Flags>(&text)
                    .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?
            }
            None => Flags::default(),
        };
        let f = flags.or(file);

        let threads = match f.threads.or(env_threads).as_deref() {
            None | Some("auto") => None,
            Some(text) => match text.parse::<usize>() {
                Ok(0) | Err(_) => {
                    return Err(Error::InvalidArgument(format!(
                        "threads must be a positive integer or \"auto\", got {text:?}"
                    )))
                }
                Ok(n) => Some(n),
            },
        };
        let tol = f.tol.unwrap_or(DEFAULT_TOLERANCE);
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
        }
        if let Some(lambdas) = &f.lambda {
            if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0)) {
                return Err(Error::NegativeCoupling(*bad));
            }
        }
        for (name, value) in [("basis", f.basis), ("cut-N", f.cut_n), ("n", f.n)] {
            if value == Some(0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        let output = f.output.unwrap_or(match command {
            CommandKind::Solve | CommandKind::Series | CommandKind::Verify => OutputFormat::Json,
            _ => OutputFormat::Csv,
        });
        Ok(RunSpec {
            command,
            lambdas: f.lambda,
            gamma: f.gamma.unwrap_or(0),
            basis: f.basis,
            power: f.power.unwrap_or(2),
            cut_n: f.cut_n,
            jet_order: f.jet_order.unwrap_or(DEFAULT_JET_ORDER),
            convention: f.convention.map(Into::into).unwrap_or_default(),
            tol,
            mode: f.mode.unwrap_or_default(),
            matrix: f.matrix,
            output,
            seed: f.seed,
            threads,
            identity: f.identity.unwrap_or_default(),
            n: f.n,
            k: f.k,
            truncations: f.truncations,
        })
    }
}

/// Rows with a fixed column order.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub columns: Vec<String>,
    pub rows: Vec<Map<String, Value>>,
}

impl Document {
    fn push(&mut self, row: Map<String, Value>) {
        for key in row.keys() {
            if !self.columns.contains(key) {
                self.columns.push(key.clone());
            }
        }
        self.rows.push(row);
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self
                .rows
                .iter()
                .map(|r| serde_json::to_string(r).expect("rows are plain JSON") + "\n")
                .collect(),
            OutputFormat::Csv => {
                let mut out = self.columns.join(",") + "\n";
                for row in &self.rows {
                    let cells: Vec<String> = self
                        .columns
                        .iter()
                        .map(|c| csv_cell(row.get(c).unwrap_or(&Value::Null)))
                        .collect();
                    out += &cells.join(",");
                    out.push('\n');
                }
                out
            }
            OutputFormat::Pretty => {
                let table: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|row| {
                        self.columns
                            .iter()
                            .map(|c| text_cell(row.get(c).unwrap_or(&Value::Null)))
                            .collect()
                    })
                    .collect();
                let widths: Vec<usize> = self
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(i, c)| table.iter().map(|r| r[i].len()).fold(c.len(), usize::max))
                    .collect();
                let line = |cells: &[String]| -> String {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                        + "\n"
                };
                let mut out = line(&self.columns);
                for r in &table {
                    out += &line(r);
                }
                out
            }
        }
    }
}

fn text_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => format!("{:.14e}", n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

fn csv_cell(v: &Value) -> String {
    let text = text_cell(v);
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text
    }
}

fn object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("only objects are built as rows"),
    }
}

pub struct Outcome {
    pub document: Document,
    pub failed: bool,
}

/// Runs a resolved spec on a thread pool of the requested size.
pub fn run(spec: &RunSpec) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match spec.command {
        CommandKind::Solve => run_solve(spec),
        CommandKind::Series => run_series(spec),
        CommandKind::Oracle => run_oracle(spec),
        CommandKind::Table1 => run_table1(spec),
        CommandKind::Table2 => run_table2(spec),
        CommandKind::Verify => run_verify(spec),
    })
}

/// The Hamiltonians a solve-type command works on: the custom matrix, or the
/// oscillator at each coupling.
fn models(spec: &RunSpec, default_basis: usize) -> Result<Vec<SpectrumSplit>> {
    if let Some(path) = &spec.matrix {
        return Ok(vec![SpectrumSplit::from_json_file(path)?]);
    }
    let basis = spec.basis.unwrap_or(default_basis);
    spec.lambdas
        .clone()
        .unwrap_or_else(|| vec![1.0])
        .iter()
        .map(|&l| SpectrumSplit::anharmonic(l, spec.power, basis))
        .collect()
}

fn check_gamma(split: &SpectrumSplit, gamma: usize) -> Result<()> {
    if gamma >= split.dim() {
        return Err(Error::StateOutOfRange {
            index: gamma,
            dim: split.dim(),
        });
    }
    Ok(())
}

/// Allowed gap between the root and the oracle: the oracle is accurate to a
/// small multiple of `eps * max|H_ij|`.
fn oracle_tolerance(split: &SpectrumSplit, value: f64) -> f64 {
    let scale = split
        .energies()
        .iter()
        .map(|e| e.abs())
        .chain(split.coupling().iter().map(|g| g.abs()))
        .fold(0.0, f64::max);
    1e-9 * (1.0 + value.abs()) + 256.0 * f64::EPSILON * scale
}

pub fn run_solve(spec: &RunSpec) -> Result<Outcome> {
    if spec.mode == ModeArg::Series {
        return run_series(spec);
    }
    let splits = models(spec, 400)?;
    for split in &splits {
        check_gamma(split, spec.gamma)?;
    }
    let opts = SolveOptions {
        tol: spec.tol,
        ..SolveOptions::default()
    };
    let results: Vec<Result<(Map<String, Value>, bool)>> = splits
        .par_iter()
        .map(|split| {
            let oracle = (split.dim() <= ORACLE_MAX_DIM || spec.mode == ModeArg::Oracle)
                .then(|| diagonalize_oracle(split));
            let mut row = match spec.mode {
                ModeArg::Oracle => {
                    let ev = oracle.as_ref().expect("computed for oracle mode");
                    let mut order: Vec<usize> = (0..split.dim()).collect();
                    order.sort_by(|&a, &b| split.energies()[a].total_cmp(&split.energies()[b]));
                    let rank = order.iter().position(|&i| i == spec.gamma).unwrap_or(0);
                    let e0 = split.energies()[spec.gamma];
                    object(json!({
                        "gamma": spec.gamma,
                        "lambda": split.meta().lambda(),
                        "basis": split.dim(),
                        "method": "diagonalization",
                        "E0": e0,
                        "deltaE": ev[rank] - e0,
                        "E_total": ev[rank],
                        "iterations": 0,
                        "residual": 0.0,
                    }))
                }
                _ => object(serde_json::to_value(solve_root(split, spec.gamma, &opts)?).expect("plain data")),
            };
            let mut failed = false;
            if let (Some(ev), ModeArg::Root) = (&oracle, spec.mode) {
                let e = row["E_total"].as_f64().unwrap_or(f64::NAN);
                let closest = nearest(ev, e).unwrap_or(f64::NAN);
                failed = !((e - closest).abs() <= oracle_tolerance(split, e));
                row.insert("oracle".into(), json!(closest));
                row.insert("oracle_deviation".into(), json!(e - closest));
            }
            Ok((row, failed))
        })
        .collect();
    let mut doc = Document::default();
    let mut failed = false;
    for r in results {
        let (row, f) = r?;
        failed |= f;
        doc.push(row);
    }
    Ok(Outcome { document: doc, failed })
}

pub fn run_series(spec: &RunSpec) -> Result<Outcome> {
    let splits = models(spec, 200)?;
    for split in &splits {
        check_gamma(split, spec.gamma)?;
    }
    let rows: Vec<Result<Map<String, Value>>> = splits
        .par_iter()
        .map(|split| {
            let report = eval_series(split, spec.gamma, spec.jet_order)?;
            let mut row = object(serde_json::to_value(&report.result).expect("plain data"));
            row.insert("last_term".into(), json!(report.last_term));
            row.insert("terms_decreasing".into(), json!(report.decreasing_after(5)));
            let root = solve_root(split, spec.gamma, &SolveOptions::default())
                .ok()
                .map(|r| r.delta_e);
            row.insert("root_deltaE".into(), json!(root));
            Ok(row)
        })
        .collect();
    let mut doc = Document::default();
    for r in rows {
        doc.push(r?);
    }
    Ok(Outcome { document: doc, failed: false })
}

pub fn run_oracle(spec: &RunSpec) -> Result<Outcome> {
    let splits = models(spec, 400)?;
    let spectra: Vec<Vec<f64>> = splits.par_iter().map(diagonalize_oracle).collect();
    let mut doc = Document::default();
    for (split, ev) in splits.iter().zip(spectra) {
        for (index, e) in ev.iter().enumerate() {
            doc.push(object(json!({
                "lambda": split.meta().lambda(),
                "basis": split.dim(),
                "index": index,
                "eigenvalue": e,
            })));
        }
    }
    Ok(Outcome { document: doc, failed: false })
}

/// Smallest oscillator basis holding cut level `n` under `convention` for `gamma = 0`.
fn basis_for_cut(n: usize, convention: Convention) -> usize {
    match convention {
        Convention::Ordinal => n,
        Convention::RawIndex => n + 1,
        Convention::CoupledSubspace => 2 * n + 1,
    }
}

pub fn run_table1(spec: &RunSpec) -> Result<Outcome> {
    let tables = reference::tables();
    let levels: Vec<usize> = match spec.cut_n {
        Some(n) => (1..=n).collect(),
        None => tables.table1.n.clone(),
    };
    let max_n = *levels.iter().max().expect("at least one level");
    let needed = basis_for_cut(max_n, spec.convention).max(5);
    let basis = spec.basis.unwrap_or(needed);
    if basis < needed {
        return Err(Error::InvalidArgument(format!(
            "basis {basis} smaller than largest requested n = {max_n} ({} convention needs {needed})",
            spec.convention.label()
        )));
    }
    let lambdas = spec
        .lambdas
        .clone()
        .unwrap_or_else(|| tables.table1.rows.iter().map(|r| r.lambda).collect());
    let note = if spec.convention == Convention::Ordinal {
        ""
    } else {
        "convention differs from reference table"
    };

    let reports: Vec<Result<_>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let split = SpectrumSplit::anharmonic(lambda, spec.power, basis)?;
            cut_series(&split, 0, 0.0, max_n, spec.convention)
        })
        .collect();

    let mut doc = Document::default();
    for (&lambda, report) in lambdas.iter().zip(reports) {
        let report = report?;
        for &n in &levels {
            let reference_value = (spec.power == 2).then(|| tables.table1.value(lambda, n)).flatten();
            let value = report.values.get(&n).copied().unwrap_or(0.0);
            doc.push(object(json!({
                "lambda": lambda,
                "n": n,
                "R_c": value,
                "cumulative": report.cumulative.get(&n).copied().unwrap_or(0.0),
                "reference": reference_value,
                "ratio": reference_value.map(|p| value / p),
                "note": note,
            })));
        }
    }
    Ok(Outcome { document: doc, failed: false })
}

/// Basis for a table2 truncation of size `n`.
fn truncated_quartic(lambda: f64, n: usize, convention: Convention) -> Result<SpectrumSplit> {
    match convention {
        Convention::CoupledSubspace => {
            let full = SpectrumSplit::anharmonic(lambda, 2, 2 * n + 1)?;
            let even: Vec<usize> = (0..=n).map(|i| 2 * i).collect();
            full.restrict(&even)
        }
        _ => SpectrumSplit::anharmonic(lambda, 2, n),
    }
}

pub fn run_table2(spec: &RunSpec) -> Result<Outcome> {
    let tables = reference::tables();
    let mut lambdas = spec.lambdas.clone().unwrap_or_else(|| {
        let mut l = vec![0.0];
        l.extend(tables.lambdas());
        l
    });
    lambdas.dedup();
    let mut truncations = spec
        .truncations
        .clone()
        .unwrap_or_else(|| TABLE2_TRUNCATIONS.to_vec());
    if let Some(b) = spec.basis {
        truncations.push(b);
    }
    truncations.sort_unstable();
    truncations.dedup();
    let largest = *truncations.last().expect("at least one truncation");
    if let Some(&bad) = truncations.iter().find(|&&n| n < 5) {
        return Err(Error::BasisTooSmall { dim: bad, min: 5 });
    }

    let opts = SolveOptions {
        tol: spec.tol,
        ..SolveOptions::default()
    };
    let cells: Vec<(f64, usize)> = lambdas
        .iter()
        .flat_map(|&l| truncations.iter().map(move |&n| (l, n)))
        .collect();
    let rows: Vec<Result<(Map<String, Value>, bool)>> = cells
        .par_iter()
        .map(|&(lambda, n)| {
            let split = truncated_quartic(lambda, n, spec.convention)?;
            let reference = tables.energies(lambda);
            let known = reference.map(|r| r.known_value()).or((lambda == 0.0).then_some(1.0));
            let reference_value = reference.and_then(|r| r.at(n));
            let oracle = (split.dim() <= ORACLE_MAX_DIM).then(|| diagonalize_oracle(&split)[0]);
            let (energy, status) = match solve_root(&split, 0, &opts) {
                Ok(r) => (Some(r.e_total), "ok"),
                Err(_) => (None, "no-convergence"),
            };
            let gated = n == largest;
            let mut failed = energy.is_none();
            if let (true, Some(k), Some(e)) = (gated, known, energy) {
                let tol = if lambda == 0.0 { 1e-14 } else { known_tolerance(lambda) };
                failed |= (e - k).abs() > tol;
            }
            let row = object(json!({
                "lambda": lambda,
                "N": n,
                "E_root": energy,
                "E_oracle": oracle,
                "reference": reference_value,
                "dev_reference": reference_value.zip(energy).map(|(p, e)| e - p),
                "known": known,
                "dev_known": known.zip(energy).map(|(k, e)| e - k),
                "status": if gated && failed { "FAIL" } else { status },
            }));
            Ok((row, failed))
        })
        .collect();
    let mut doc = Document::default();
    let mut failed = false;
    for r in rows {
        let (row, f) = r?;
        failed |= f;
        doc.push(row);
    }
    Ok(Outcome { document: doc, failed })
}

fn two_state() -> SpectrumSplit {
    SpectrumSplit::from_matrix(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]))
        .expect("fixed non-degenerate matrix")
}

/// One identity check, as a closure over nothing mutable so checks can run
/// in parallel.
type Check = Box<dyn Fn() -> Result<IdentityReport> + Send + Sync>;

pub fn run_verify(spec: &RunSpec) -> Result<Outcome> {
    let seed = spec.seed.unwrap_or(0);
    let order = spec.jet_order;
    let gamma = spec.gamma;
    let lambda = spec.lambdas.as_ref().and_then(|l| l.first().copied()).unwrap_or(0.1);

    // model for single-identity runs
    let subject = || -> Result<SpectrumSplit> {
        if let Some(path) = &spec.matrix {
            SpectrumSplit::from_json_file(path)
        } else if let Some(seed) = spec.seed {
            SpectrumSplit::random(seed, 8, 0.2)
        } else {
            SpectrumSplit::anharmonic(lambda, spec.power, spec.basis.unwrap_or(40))
        }
    };

    let mut checks: Vec<Check> = Vec::new();
    let selected = |kind: IdentityArg| spec.identity == kind || spec.identity == IdentityArg::All;

    if spec.identity != IdentityArg::All {
        let split = subject()?;
        check_gamma(&split, gamma)?;
        match spec.identity {
            IdentityArg::Power => {
                let ns: Vec<usize> = spec.n.map(|n| vec![n]).unwrap_or_else(|| vec![2, 3, 4]);
                for n in ns {
                    let split = split.clone();
                    checks.push(Box::new(move || check_power_relation(&split, gamma, n, order)));
                }
            }
            IdentityArg::Derivative => {
                let pairs: Vec<(usize, usize)> = match (spec.k, spec.n) {
                    (Some(k), Some(n)) => vec![(k, n)],
                    _ => derivative_pairs(),
                };
                for (k, n) in pairs {
                    let split = split.clone();
                    checks.push(Box::new(move || check_derivative_identity(&split, gamma, k, n, order)));
                }
            }
            IdentityArg::Laurent => {
                checks.push(Box::new(move || check_laurent(&split, gamma, order)));
            }
            IdentityArg::Rs => {
                let basis = spec.basis.unwrap_or(60);
                checks.push(Box::new(move || {
                    rs_consistency(&default_rs_grid(), basis, DEFAULT_RS_DEGREE).map(|f| f.report)
                }));
            }
            IdentityArg::All => unreachable!(),
        }
    } else {
        if selected(IdentityArg::Power) {
            let quartic = SpectrumSplit::anharmonic(0.1, 2, 40)?;
            let random = SpectrumSplit::random(seed, 8, 0.2)?;
            for n in [2, 3, 4] {
                let (q, r) = (quartic.clone(), random.clone());
                checks.push(Box::new(move || check_power_relation(&q, 0, n, order)));
                checks.push(Box::new(move || check_power_relation(&r, 0, n, order)));
            }
        }
        if selected(IdentityArg::Derivative) {
            let random = SpectrumSplit::random(seed, 6, 0.2)?;
            for (k, n) in derivative_pairs() {
                let r = random.clone();
                checks.push(Box::new(move || check_derivative_identity(&two_state(), 0, k, n, order.max(k + n + 1))));
                checks.push(Box::new(move || check_derivative_identity(&r, 0, k, n, order.max(k + n + 1))));
            }
        }
        if selected(IdentityArg::Laurent) {
            let quartic = SpectrumSplit::anharmonic(0.1, 2, 200)?;
            checks.push(Box::new(move || check_laurent(&quartic, 0, 25)));
        }
        if selected(IdentityArg::Rs) {
            checks.push(Box::new(|| {
                rs_consistency(&default_rs_grid(), 60, DEFAULT_RS_DEGREE).map(|f| f.report)
            }));
        }
    }

    let reports: Vec<Result<IdentityReport>> = checks.par_iter().map(|c| c()).collect();
    let mut doc = Document::default();
    let mut failed = false;
    for r in reports {
        let r = r?;
        failed |= !r.passed;
        doc.push(object(serde_json::to_value(&r).expect("plain data")));
    }
    Ok(Outcome { document: doc, failed })
}

/// `(k, n)` with `n >= 1` and `k + n <= 8`.
fn derivative_pairs() -> Vec<(usize, usize)> {
    (0..8)
        .flat_map(|k| (1..=8 - k).map(move |n| (k, n)))
        .collect()
}

/// Parses arguments, runs, writes the document and returns the exit code.
pub fn main_with<I, T>(args: I, env_threads: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let spec = match RunSpec::resolve(cli.command, cli.flags, env_threads) {
        Ok(spec) => spec,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    match run(&spec) {
        Ok(outcome) => {
            let _ = out.write_all(outcome.document.render(spec.output).as_bytes());
            if outcome.failed {
                let _ = writeln!(err, "one or more comparisons failed");
                2
            } else {
                0
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["kernel-eig"];
        full.extend_from_slice(args);
        let code = main_with(full, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"gamma": 3, "basis": 50, "tol": 1e-12, "cut-N": 7}"#).unwrap();
        let cli = Cli::try_parse_from(["kernel-eig", "solve", "--config", path.to_str().unwrap(), "--gamma", "1"]).unwrap();
        let spec = RunSpec::resolve(cli.command, cli.flags, None).unwrap();
        assert_eq!(spec.gamma, 1);
        assert_eq!(spec.basis, Some(50));
        assert_eq!(spec.tol, 1e-12);
        assert_eq!(spec.cut_n, Some(7));
        assert_eq!(spec.convention, Convention::Ordinal);
    }

    #[test]
    fn unknown_config_key_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"gama": 3}"#).unwrap();
        let (code, _, err) = run_args(&["solve", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("gama"), "{err}");
    }

    #[test]
    fn thread_setting_precedence() {
        let cli = Cli::try_parse_from(["kernel-eig", "table2"]).unwrap();
        let spec = RunSpec::resolve(cli.command, cli.flags.clone(), Some("3".into())).unwrap();
        assert_eq!(spec.threads, Some(3));
        let cli = Cli::try_parse_from(["kernel-eig", "table2", "--threads", "auto"]).unwrap();
        let spec = RunSpec::resolve(cli.command, cli.flags, Some("3".into())).unwrap();
        assert_eq!(spec.threads, None);
        let cli = Cli::try_parse_from(["kernel-eig", "table2", "--threads", "zero"]).unwrap();
        assert!(RunSpec::resolve(cli.command, cli.flags, None).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["solve", "--lambda", "0.5", "--basis", "60"]).0, 0);
        assert_eq!(run_args(&["solve", "--bogus"]).0, 1);
        assert_eq!(run_args(&["solve", "--lambda", "-1"]).0, 1);
        assert_eq!(run_args(&["table1", "--basis", "10"]).0, 1);
        // a small basis cannot reach the high-precision value
        let (code, out, _) = run_args(&["table2", "--lambda", "1", "--truncations", "10"]);
        assert_eq!(code, 2);
        assert!(out.contains("FAIL"));
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn derivative_pair_count() {
        // k + n <= 8 with n >= 1
        assert_eq!(derivative_pairs().len(), 36);
    }

    #[test]
    fn pretty_and_csv_render() {
        let mut doc = Document::default();
        doc.push(object(json!({"a": 1, "b": 0.5, "c": "x,y"})));
        assert_eq!(doc.render(OutputFormat::Csv), "a,b,c\n1,5.00000000000000e-1,\"x,y\"\n");
        let pretty = doc.render(OutputFormat::Pretty);
        assert_eq!(pretty.lines().count(), 2);
    }
}
