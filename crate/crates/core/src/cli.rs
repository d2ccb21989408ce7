//! The `sodm` command line.
//!
//! Exit codes: 0 on success, 1 for runtime or verification failures, 2 for
//! usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::data::{normalize, parse_libsvm, write_libsvm, Dataset};
use crate::hierarchy::{train, TrainConfig};
use crate::kernel::{CacheConfig, KernelSpec};
use crate::oracle::{theorem1_trial, theorem2_trial, BoundReport};
use crate::partition::{default_stratums, diagnostics, PartitionPlan};
use crate::report::{json_line, write_lines};
use crate::solver::{HyperParams, Model};
use crate::svrg::{dsvrg_train, SvrgConfig};
use crate::synth::{random_classification, separable_2d};
use crate::util::{derive_seed, thread_pool};
use crate::Error;

/// Diagnostics are O(M²); larger inputs omit them.
const DIAGNOSTICS_LIMIT: usize = 5000;

#[derive(Debug, Parser)]
#[command(name = "sodm", version, about = "Scalable optimal margin distribution machine")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model with hierarchical merging or distributed SVRG.
    Train(TrainArgs),
    /// Predict labels for a LIBSVM file.
    Predict(PredictArgs),
    /// Time one training configuration at several worker counts.
    Bench(BenchArgs),
    /// Run randomized checks of the partition approximation bounds.
    VerifyBounds(VerifyArgs),
    /// Print the partition plan and its diagnostics as JSON.
    InspectPartition(InspectArgs),
    /// Write a synthetic LIBSVM dataset.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Args)]
struct KernelArgs {
    #[arg(long, value_enum)]
    kernel: KernelKind,
    /// RBF width; required with `--kernel rbf`.
    #[arg(long, required_if_eq("kernel", "rbf"))]
    gamma: Option<f64>,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec, CliError> {
        match self.kernel {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::Rbf => KernelSpec::rbf(self.gamma.expect("required by clap")).map_err(CliError::usage),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    nu: f64,
    /// Merge factor.
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Number of strata [default: min(32, ceil(sqrt(M)))].
    #[arg(long)]
    stratums: Option<usize>,
    /// Return the concatenated level-1 solutions without the final full solve.
    #[arg(long)]
    literal: bool,
    /// Use distributed SVRG (linear kernel only).
    #[arg(long, conflicts_with_all = ["p", "levels", "literal"])]
    svrg: bool,
    #[arg(long, default_value_t = 4, requires = "svrg")]
    nodes: usize,
    #[arg(long, default_value_t = 20, requires = "svrg")]
    epochs: usize,
    #[arg(long, requires = "svrg")]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1, requires = "svrg")]
    steps_per_visit: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Epoch budget of every local solve.
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Min-max normalize features to [0, 1] and store the transform in the model.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers_list: Vec<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Theorem::Both)]
    theorem: Theorem,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    stratums: Option<usize>,
    #[arg(long, default_value_t = 4)]
    partitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Two separated discs in the unit square.
    Separable,
    /// Uniform points labelled by a noisy random hyperplane.
    Random,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Unsupported(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::VerifyBounds(a) => cmd_verify(&a),
        Command::InspectPartition(a) => cmd_inspect(&a),
        Command::Generate(a) => cmd_generate(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Runtime(msg) => eprintln!("sodm: {msg}"),
            }
            e.code()
        }
    }
}

fn load(path: &Path) -> CliResult<Dataset> {
    parse_libsvm(path).map_err(|e| CliError::Runtime(e.to_string()))
}

fn emit(lines: &[String], report: Option<&Path>) -> CliResult {
    for line in lines {
        println!("{line}");
    }
    if let Some(path) = report {
        write_lines(path, lines).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

/// A validated training configuration.
enum Plan {
    Hierarchical(TrainConfig),
    Svrg(SvrgConfig),
}

struct Job {
    kernel: KernelSpec,
    hp: HyperParams,
    plan: Plan,
    normalize: bool,
}

impl Job {
    fn from_args(args: &ModelArgs, workers: usize) -> CliResult<Self> {
        let kernel = args.kernel.spec()?;
        let hp = HyperParams::new(args.lambda, args.theta, args.nu).map_err(CliError::usage)?;
        if workers == 0 {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        let plan = if args.svrg {
            if !matches!(kernel, KernelSpec::Linear) {
                return Err(CliError::usage("--svrg cannot be combined with --kernel rbf"));
            }
            Plan::Svrg(SvrgConfig {
                nodes: args.nodes,
                stratums: args.stratums,
                epochs: args.epochs,
                eta: args.eta,
                steps_per_visit: args.steps_per_visit,
                seed: args.seed,
                workers,
            })
        } else {
            Plan::Hierarchical(TrainConfig {
                p: args.p,
                levels: args.levels,
                stratums: args.stratums,
                tol: args.tol,
                max_epochs: args.max_epochs,
                seed: args.seed,
                workers,
                final_refine: !args.literal,
                cache: CacheConfig::from_env(),
            })
        };
        Ok(Job {
            kernel,
            hp,
            plan,
            normalize: args.normalize,
        })
    }

    fn with_workers(&mut self, workers: usize) {
        match &mut self.plan {
            Plan::Hierarchical(c) => c.workers = workers,
            Plan::Svrg(c) => c.workers = workers,
        }
    }

    /// Trains and returns the model plus report lines.
    fn run(&self, raw: &Dataset) -> CliResult<(Model, Vec<String>)> {
        let (data, table) = if self.normalize {
            let (d, t) = normalize(raw)?;
            (d, Some(t))
        } else {
            (raw.clone(), None)
        };
        let mut lines = Vec::new();
        let mut model = match &self.plan {
            Plan::Hierarchical(cfg) => {
                let out = train(&data, &self.kernel, &self.hp, cfg)?;
                for level in &out.levels {
                    lines.push(json_line("level", level)?);
                }
                lines.push(json_line(
                    "summary",
                    &json!({
                        "method": "hierarchical",
                        "instances": data.len(),
                        "early_exit": out.early_exit,
                        "support_size": out.model.support.len(),
                        "final_objective": out.final_level().partitions.last().map(|r| r.final_objective()),
                        "training_accuracy": out.model.accuracy(&data),
                    }),
                )?);
                out.model
            }
            Plan::Svrg(cfg) => {
                let out = dsvrg_train(&data, &self.kernel, &self.hp, cfg)?;
                for rec in &out.trajectory {
                    lines.push(json_line("epoch", rec)?);
                }
                lines.push(json_line(
                    "summary",
                    &json!({
                        "method": "svrg",
                        "instances": data.len(),
                        "eta": out.eta,
                        "final_primal_objective": out.trajectory.last().map(|r| r.primal_objective),
                        "training_accuracy": out.model.accuracy(&data),
                    }),
                )?);
                out.model
            }
        };
        model.normalization = table;
        Ok((model, lines))
    }
}

fn cmd_train(args: &TrainArgs) -> CliResult {
    let job = Job::from_args(&args.model, args.workers)?;
    let data = load(&args.data)?;
    let (model, lines) = job.run(&data)?;
    model.save(&args.out).map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(&lines, args.report.as_deref())
}

fn cmd_predict(args: &PredictArgs) -> CliResult {
    let model = Model::load(&args.model).map_err(|e| CliError::Runtime(e.to_string()))?;
    let raw = load(&args.data)?;
    if raw.num_features > model.num_features {
        return Err(CliError::Runtime(format!(
            "data has {} features but the model was trained on {}",
            raw.num_features, model.num_features
        )));
    }
    let data = match &model.normalization {
        Some(table) => table.apply(&raw),
        None => raw,
    };
    let mut text = String::new();
    for label in model.predict_all(&data) {
        let _ = writeln!(text, "{}", if label > 0 { "+1" } else { "-1" });
    }
    std::fs::write(&args.out, text).map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    if let Some(path) = &args.metrics {
        let metrics = json_line(
            "metrics",
            &json!({ "count": data.len(), "accuracy": model.accuracy(&data) }),
        )?;
        write_lines(path, &[metrics]).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchRecord {
    workers: usize,
    wall_time_secs: f64,
    speedup: f64,
    identical: bool,
}

fn cmd_bench(args: &BenchArgs) -> CliResult {
    if args.workers_list.is_empty() || args.workers_list.contains(&0) {
        return Err(CliError::usage("--workers-list entries must be positive"));
    }
    let mut job = Job::from_args(&args.model, 1)?;
    let data = load(&args.data)?;
    let mut lines = Vec::new();
    let mut baseline: Option<(f64, String)> = None;
    let mut mismatch = false;
    for &workers in &args.workers_list {
        job.with_workers(workers);
        let start = Instant::now();
        let (model, _) = job.run(&data)?;
        let secs = start.elapsed().as_secs_f64();
        let text = model.to_json()?;
        let (base_secs, base_text) = baseline.get_or_insert_with(|| (secs, text.clone()));
        let identical = *base_text == text;
        mismatch |= !identical;
        lines.push(json_line(
            "bench",
            &BenchRecord {
                workers,
                wall_time_secs: secs,
                speedup: *base_secs / secs,
                identical,
            },
        )?);
    }
    emit(&lines, args.report.as_deref())?;
    if mismatch {
        return Err(CliError::Runtime("models differ across worker counts".into()));
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult {
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let pool = thread_pool(args.workers)?;
    let theorems: &[u8] = match args.theorem {
        Theorem::One => &[1],
        Theorem::Two => &[2],
        Theorem::Both => &[1, 2],
    };
    let jobs: Vec<(u8, u64)> = theorems
        .iter()
        .flat_map(|&t| (0..args.trials).map(move |i| (t, derive_seed(args.seed, i))))
        .collect();
    let results: Vec<crate::Result<BoundReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, seed)| if t == 1 { theorem1_trial(seed) } else { theorem2_trial(seed) })
            .collect()
    });
    let mut lines = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (result, &(t, seed)) in results.into_iter().zip(&jobs) {
        let report = result.map_err(|e| CliError::Runtime(format!("trial seed {seed}: {e}")))?;
        if !report.satisfied() {
            failed.push(format!("theorem {t} seed {seed}"));
        }
        lines.push(json_line("bound", &report)?);
    }
    emit(&lines, args.report.as_deref())?;
    if !failed.is_empty() {
        return Err(CliError::Runtime(format!("bound violated: {}", failed.join(", "))));
    }
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> CliResult {
    let kernel = args.kernel.spec()?;
    let raw = load(&args.data)?;
    let data = if args.normalize { normalize(&raw)?.0 } else { raw };
    let s = args.stratums.unwrap_or_else(|| default_stratums(data.len()));
    let plan = PartitionPlan::build(&data, &kernel, s, args.partitions, args.seed)?;
    let diag = if data.len() <= DIAGNOSTICS_LIMIT {
        Some(diagnostics(&data, &kernel, &plan.stratum_of)?)
    } else {
        None
    };
    let line = json_line("partition_plan", &json!({ "plan": plan, "diagnostics": diag }))?;
    emit(&[line], args.out.as_deref())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let data = match args.kind {
        SynthKind::Separable => separable_2d(args.m, args.seed)?,
        SynthKind::Random => random_classification(args.m, args.dims, args.seed)?,
    };
    write_libsvm(&data, &args.out).map_err(|e| CliError::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["sodm", "verify-bounds", "--trials", "0"]), 2);
        assert_eq!(run(["sodm", "frobnicate"]), 2);
    }
}
