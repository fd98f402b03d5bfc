//! Command-line front end: fit survival models (privately or not), generate
//! synthetic datasets, evaluate fits and print mechanism constants.
//!
//! Exit codes: 0 success, 2 configuration/schema problems, 3 numeric or
//! runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dpsurv::dataset::{self, CsvSchema, RawRecord};
use dpsurv::error::Error;
use dpsurv::eval::{self, SweepConfig, SynthSpec};
use dpsurv::mechanisms::{self, PerturbationConfig};
use dpsurv::model::LinkFunction;
use dpsurv::noise::entropy_seed;
use dpsurv::optim::OptimSettings;
use dpsurv::report::{FitResult, Mechanism};
use dpsurv::sampler::{self, PsgldConfig, SanitizerConfig};
use dpsurv::spline::{build_basis, SplineBasis};

#[derive(Parser)]
#[command(name = "dpsurv", version, about = "Differentially private discrete-time survival regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset and write the result as JSON.
    Fit(FitArgs),
    /// Generate a synthetic dataset with known parameters.
    Synth(SynthArgs),
    /// Compute error metrics for stored fits, or run a privacy sweep.
    Eval(EvalArgs),
    /// Print the sensitivity constants and budget split for a configuration.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with `time`, `event` and covariate columns.
    #[arg(long)]
    input: PathBuf,
    /// Output path for the fit JSON.
    #[arg(long)]
    output: PathBuf,
    /// none, out_pert, obj_pert or sampler.
    #[arg(long, default_value = "none")]
    mechanism: String,
    /// Privacy budget (required by the private mechanisms).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Regularization weight (required by the perturbation mechanisms).
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of discrete time intervals.
    #[arg(long, default_value_t = 200)]
    q: usize,
    /// Number of spline knots.
    #[arg(long, default_value_t = 3)]
    e: usize,
    /// logit, cloglog or probit (non-logit only for the sampler).
    #[arg(long, default_value = "logit")]
    link: String,
    /// RNG seed; fresh OS entropy when omitted (the seed used is recorded in
    /// the output).
    #[arg(long)]
    seed: Option<u64>,
    /// Sanitizer cap override (sampler).
    #[arg(long)]
    v: Option<f64>,
    /// Prior precision override (sampler).
    #[arg(long)]
    sigma: Option<f64>,
    /// Chain length override (sampler); default 250 epochs.
    #[arg(long)]
    steps: Option<usize>,
    /// Minibatch size (sampler).
    #[arg(long)]
    minibatch: Option<usize>,
    /// Step-size decay exponent (sampler).
    #[arg(long)]
    tau: Option<f64>,
    /// Preconditioner floor (sampler).
    #[arg(long)]
    lambda_pc: Option<f64>,
    /// Squared-gradient decay (sampler).
    #[arg(long)]
    mu: Option<f64>,
    /// Step-size multiplier (sampler).
    #[arg(long)]
    lr_scale: Option<f64>,
    /// Write a thinned diagnostic chain trace CSV here (sampler). The trace
    /// is not part of the private release.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Keep every m-th chain state in the trace.
    #[arg(long, default_value_t = 10)]
    trace_every: usize,
    /// Gradient tolerance for the optimizer.
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    /// Iteration cap for the optimizer.
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator specification JSON (n, p, q, e, true_alpha, true_beta,
    /// censor_prob, seed).
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV dataset path.
    #[arg(long)]
    output: PathBuf,
    /// Output path for the ground-truth JSON.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Fit JSON files to score.
    #[arg(long = "fit")]
    fits: Vec<PathBuf>,
    /// Ground-truth JSON (a generator specification).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Reference coefficients JSON `{"beta": [...]}` to compare against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Metrics output JSON (metrics mode) or sweep output CSV (sweep mode).
    #[arg(long)]
    output: PathBuf,
    /// Run a privacy sweep over the input dataset instead of scoring fits.
    #[arg(long, default_value_t = false)]
    sweep: bool,
    /// Input CSV dataset (sweep mode).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Privacy budgets for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4])]
    epsilons: Vec<f64>,
    /// Repetitions per (mechanism, epsilon) cell.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Candidate regularization weights for the perturbation mechanisms.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-3, 1e-2, 1e-1])]
    lambdas: Vec<f64>,
    /// Mechanisms to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["out_pert".to_string(), "obj_pert".to_string(), "sampler".to_string()])]
    mechanisms: Vec<String>,
    #[arg(long, default_value_t = 200)]
    q: usize,
    #[arg(long, default_value_t = 3)]
    e: usize,
    /// Chain length per sampler fit in the sweep.
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    minibatch: usize,
    #[arg(long, default_value_t = 1.0)]
    lr_scale: f64,
    /// Master seed for the sweep; fresh entropy when omitted.
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Dataset size the constants are computed for.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    q: usize,
    #[arg(long, default_value_t = 3)]
    e: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    epsilon: f64,
}

struct AppError {
    code: u8,
    msg: String,
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
            e if e.is_usage() => 2,
            _ => 3,
        };
        AppError {
            code,
            msg: e.to_string(),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> AppError {
    AppError {
        code: 2,
        msg: e.to_string(),
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> AppError {
    AppError {
        code: 3,
        msg: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

/// Writes bytes atomically: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(runtime)?;
    std::fs::rename(&tmp, path).map_err(runtime)?;
    let _ = dir; // directory existence surfaced by the write above
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(runtime)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::from(Error::Io(e)))
        .map_err(|mut e| {
            e.msg = format!("{}: {}", path.display(), e.msg);
            e
        })?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path, q: usize) -> Result<dpsurv::dataset::SurvivalDataset, AppError> {
    let raw = dataset::load_csv(path, &CsvSchema::default())?;
    Ok(dataset::normalize(&raw, q)?)
}

fn cmd_fit(args: FitArgs) -> Result<(), AppError> {
    let mechanism = Mechanism::from_str(&args.mechanism)?;
    let link = LinkFunction::from_str(&args.link)?;
    let ds = load_dataset(&args.input, args.q)?;
    let basis = build_basis(args.e, args.q)?;
    let optim = OptimSettings {
        grad_tol: args.grad_tol,
        max_iters: args.max_iters,
        ..OptimSettings::default()
    };
    let need = |opt: Option<f64>, what: &str| {
        opt.ok_or_else(|| usage(format!("--{what} is required for {mechanism}")))
    };

    let result: FitResult = match mechanism {
        Mechanism::None => {
            if link != LinkFunction::Logit {
                return Err(usage("non-logit links are only available with --mechanism sampler"));
            }
            mechanisms::fit_mle(&ds, &basis, args.lambda.unwrap_or(0.0), &optim)?
        }
        Mechanism::OutPert | Mechanism::ObjPert => {
            let cfg = PerturbationConfig {
                epsilon: need(args.epsilon, "epsilon")?,
                lambda: need(args.lambda, "lambda")?,
                seed: args.seed.unwrap_or_else(entropy_seed),
                link,
                optim,
            };
            if mechanism == Mechanism::OutPert {
                mechanisms::fit_out_pert(&ds, &basis, &cfg)?
            } else {
                mechanisms::fit_obj_pert(&ds, &basis, &cfg)?
            }
        }
        Mechanism::Sampler => {
            let epsilon = need(args.epsilon, "epsilon")?;
            let mut sanitizer = SanitizerConfig::defaults(ds.n(), epsilon);
            if let Some(v) = args.v {
                sanitizer.v = v;
            }
            if let Some(sigma) = args.sigma {
                sanitizer.sigma = sigma;
            }
            let mut chain = PsgldConfig::defaults(ds.n(), args.seed.unwrap_or_else(entropy_seed));
            chain.link = link;
            if let Some(steps) = args.steps {
                chain.steps = steps;
            }
            if let Some(k) = args.minibatch {
                chain.minibatch = k;
            }
            if let Some(tau) = args.tau {
                chain.tau = tau;
            }
            if let Some(l) = args.lambda_pc {
                chain.lambda_pc = l;
            }
            if let Some(mu) = args.mu {
                chain.mu = mu;
            }
            if let Some(lr) = args.lr_scale {
                chain.lr_scale = lr;
            }
            if let Some(trace_path) = &args.trace {
                let every = args.trace_every.max(1);
                let (fit, trace) = sampler::fit_sampled_traced(
                    &ds, &basis, epsilon, &sanitizer, &chain, Some(every),
                )?;
                write_trace_csv(trace_path, &trace.unwrap_or_default(), ds.n())?;
                fit
            } else {
                sampler::fit_sampled(&ds, &basis, epsilon, &sanitizer, &chain)?
            }
        }
    };
    write_json(&args.output, &result)
}

fn write_trace_csv(path: &Path, trace: &[(usize, Vec<f64>)], n: usize) -> Result<(), AppError> {
    let mut out = String::new();
    let dim = trace.first().map_or(0, |(_, f)| f.len());
    let mut header = vec!["step".to_string(), "epoch".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (step, f) in trace {
        let epoch = step.div_ceil(n.max(1));
        let mut fields = vec![step.to_string(), epoch.to_string()];
        fields.extend(f.iter().map(|v| format!("{v}")));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn cmd_synth(args: SynthArgs) -> Result<(), AppError> {
    let spec: SynthSpec = read_json(&args.spec)?;
    spec.validate()?;
    let basis = build_basis(spec.e, spec.q)?;
    let ds = eval::generate_synthetic(&spec, &basis)?;
    // Times are written as interval midpoints so that re-normalizing the CSV
    // (as `fit` does) maps each row back onto its generating interval
    // whenever the top interval is occupied.
    let raw: Vec<RawRecord> = ds
        .records
        .iter()
        .map(|r| RawRecord {
            time: (r.t as f64 - 0.5) / spec.q as f64,
            event: r.event(),
            covariates: r.x.clone(),
        })
        .collect();
    let mut csv_bytes = Vec::new();
    dataset::write_csv(&mut csv_bytes, &raw)?;
    write_atomic(&args.output, &csv_bytes)?;
    write_json(&args.truth, &spec)
}

#[derive(Serialize)]
struct FitMetrics {
    fit: String,
    mechanism: Mechanism,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mre: Option<f64>,
    re_beta: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    if args.sweep {
        return cmd_eval_sweep(args);
    }
    if args.fits.is_empty() {
        return Err(usage("metrics mode needs at least one --fit"));
    }
    let (truth_stacked, truth_beta): (Option<Vec<f64>>, Vec<f64>) =
        match (&args.truth, &args.reference) {
            (Some(path), _) => {
                let spec: SynthSpec = read_json(path)?;
                let mut stacked = spec.true_alpha.clone();
                stacked.extend_from_slice(&spec.true_beta);
                (Some(stacked), spec.true_beta)
            }
            (None, Some(path)) => {
                #[derive(Deserialize)]
                struct Reference {
                    beta: Vec<f64>,
                }
                let r: Reference = read_json(path)?;
                (None, r.beta)
            }
            (None, None) => {
                return Err(usage("metrics mode needs --truth or --reference"));
            }
        };

    let mut metrics = Vec::new();
    for path in &args.fits {
        let fit: FitResult = read_json(path)?;
        let mre = match &truth_stacked {
            Some(truth) => Some(eval::mre(&[fit.stacked()], truth)?),
            None => None,
        };
        let re_beta = eval::relative_error(&fit.beta, &truth_beta)?;
        metrics.push(FitMetrics {
            fit: path.display().to_string(),
            mechanism: fit.mechanism,
            epsilon: fit.epsilon,
            mre,
            re_beta,
        });
    }
    write_json(&args.output, &metrics)
}

fn cmd_eval_sweep(args: EvalArgs) -> Result<(), AppError> {
    let input = args
        .input
        .as_ref()
        .ok_or_else(|| usage("sweep mode needs --input"))?;
    let ds = load_dataset(input, args.q)?;
    let basis: SplineBasis = build_basis(args.e, args.q)?;
    let mechanisms = args
        .mechanisms
        .iter()
        .map(|m| Mechanism::from_str(m))
        .collect::<Result<Vec<Mechanism>, Error>>()?;
    let cfg = SweepConfig {
        epsilons: args.epsilons.clone(),
        seeds: args.seeds,
        master_seed: args.master_seed.unwrap_or_else(entropy_seed),
        mechanisms,
        lambdas: args.lambdas.clone(),
        psgld_steps: args.steps,
        psgld_minibatch: args.minibatch,
        psgld_lr_scale: args.lr_scale,
        optim: OptimSettings::default(),
    };
    let result = eval::privacy_sweep(&ds, &basis, &cfg)?;
    let mut out = String::from("epsilon,mechanism,lambda,mre_mean,mre_std,mre_median\n");
    for row in &result.rows {
        let lambda = row.lambda.map_or(String::new(), |l| format!("{l}"));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.epsilon, row.mechanism, lambda, row.mre_mean, row.mre_std, row.mre_median
        ));
    }
    write_atomic(&args.output, out.as_bytes())
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<(), AppError> {
    if args.n < 1 {
        return Err(usage("--n must be at least 1"));
    }
    let basis = build_basis(args.e, args.q)?;
    let bound = mechanisms::gradient_diff_bound(&basis);
    let sensitivity = mechanisms::out_pert_sensitivity(&basis, args.n, args.lambda)?;
    let budget = mechanisms::obj_pert_budget(&basis, args.n, args.epsilon, args.lambda)?;
    #[derive(Serialize)]
    struct Constants {
        gradient_diff_bound: f64,
        out_pert_sensitivity: f64,
        epsilon_prime: f64,
        delta: f64,
    }
    let constants = Constants {
        gradient_diff_bound: bound,
        out_pert_sensitivity: sensitivity,
        epsilon_prime: budget.epsilon_prime,
        delta: budget.delta,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&constants).map_err(runtime)?
    );
    Ok(())
}
