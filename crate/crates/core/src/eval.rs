//! Measurement tooling: error metrics, synthetic data with known ground
//! truth, an empirical differential-privacy audit and privacy/utility
//! sweeps.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{NormalizationReport, SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::mechanisms::{
    fit_obj_pert_with, obj_pert_budget, optimize_objective, out_pert_release, PerturbationConfig,
};
use crate::model::{hazard_and_survival, LinkFunction, ModelParams};
use crate::noise::{derive_seed, sample_gamma_sphere, Rng};
use crate::optim::OptimSettings;
use crate::report::Mechanism;
use crate::sampler::{run_psgld, PsgldConfig, SanitizerConfig};
use crate::spline::SplineBasis;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean relative error of sampled or noised parameter vectors against a
/// reference optimum: `(1/t) Σ ‖f_i - f*‖ / ‖f*‖`.
pub fn mre<S: AsRef<[f64]>>(samples: &[S], f_star: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("mre needs at least one sample".into()));
    }
    let denom = norm(f_star);
    if denom <= 0.0 {
        return Err(Error::Numeric(
            "mre reference has zero norm; relative error is undefined".into(),
        ));
    }
    let mut total = 0.0;
    for s in samples {
        let s = s.as_ref();
        if s.len() != f_star.len() {
            return Err(Error::Shape(format!(
                "sample length {} does not match reference length {}",
                s.len(),
                f_star.len()
            )));
        }
        total += distance(s, f_star) / denom;
    }
    Ok(total / samples.len() as f64)
}

/// Relative error between covariate coefficient vectors,
/// `‖β - β*‖ / ‖β*‖`.
pub fn relative_error(beta: &[f64], beta_star: &[f64]) -> Result<f64> {
    if beta.len() != beta_star.len() {
        return Err(Error::Shape(format!(
            "coefficient lengths differ: {} vs {}",
            beta.len(),
            beta_star.len()
        )));
    }
    let denom = norm(beta_star);
    if denom <= 0.0 {
        return Err(Error::Numeric(
            "reference coefficients have zero norm".into(),
        ));
    }
    Ok(distance(beta, beta_star) / denom)
}

/// Ground-truth specification for synthetic data generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub e: usize,
    pub true_alpha: Vec<f64>,
    pub true_beta: Vec<f64>,
    pub censor_prob: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("synthetic size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.censor_prob) {
            return Err(Error::Config(format!(
                "censoring probability must be in [0, 1), got {}",
                self.censor_prob
            )));
        }
        if self.true_alpha.len() != self.e {
            return Err(Error::Shape(format!(
                "true_alpha has length {}, expected e = {}",
                self.true_alpha.len(),
                self.e
            )));
        }
        if self.true_beta.len() != self.p {
            return Err(Error::Shape(format!(
                "true_beta has length {}, expected p = {}",
                self.true_beta.len(),
                self.p
            )));
        }
        Ok(())
    }
}

/// Simulates the discrete hazard model forward from known parameters.
///
/// Covariates are uniform in the unit ball. Each individual walks the
/// intervals `1..=q`; failure occurs at the first interval whose hazard
/// exceeds a uniform draw. A failing individual is instead censored (with
/// probability `censor_prob`) at an interval drawn uniformly before the
/// failure, when one exists; individuals surviving all intervals are
/// censored at `q`. Fixed seeds reproduce the dataset exactly.
pub fn generate_synthetic(spec: &SynthSpec, basis: &SplineBasis) -> Result<SurvivalDataset> {
    spec.validate()?;
    if basis.q() != spec.q || basis.e() != spec.e {
        return Err(Error::Shape(format!(
            "basis is ({}, {}), spec wants (e, q) = ({}, {})",
            basis.e(),
            basis.q(),
            spec.e,
            spec.q
        )));
    }
    let params = ModelParams {
        alpha: spec.true_alpha.clone(),
        beta: spec.true_beta.clone(),
    };
    let mut rng = Rng::new(spec.seed);
    let mut records = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = sample_unit_ball(spec.p, &mut rng);
        let (hazard, _) = hazard_and_survival(&params, &x, basis, LinkFunction::Logit)?;
        let mut failure = None;
        for (idx, h) in hazard.iter().enumerate() {
            if rng.random::<f64>() < *h {
                failure = Some(idx + 1);
                break;
            }
        }
        let (event, t) = match failure {
            Some(tf) => {
                if tf > 1 && rng.random::<f64>() < spec.censor_prob {
                    (false, rng.random_range(1..tf))
                } else {
                    (true, tf)
                }
            }
            None => (false, spec.q),
        };
        records.push(SurvivalRecord::new(x, event, t));
    }
    Ok(SurvivalDataset {
        records,
        q: spec.q,
        p: spec.p,
        normalization: NormalizationReport::identity(spec.p),
    })
}

fn sample_unit_ball(p: usize, rng: &mut Rng) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    use rand_distr::StandardNormal;
    loop {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let z_norm = norm(&z);
        if z_norm > 1e-12 {
            let radius = rng.random::<f64>().powf(1.0 / p as f64);
            return z.into_iter().map(|v| v * radius / z_norm).collect();
        }
    }
}

/// Fixed histogram grid for the ratio audit.
#[derive(Debug, Clone, Copy)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Outcome of an empirical privacy-ratio audit.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub epsilon: f64,
    pub runs: usize,
    /// Largest two-sided bin-frequency ratio over bins with enough hits.
    pub max_ratio: f64,
    /// Bins whose ratio exceeded `exp(epsilon)`.
    pub violating_bins: Vec<usize>,
    /// Number of bins that met the hit threshold in both histograms.
    pub bins_compared: usize,
}

/// Bins with fewer hits than this in either histogram are too noisy to
/// compare and are skipped.
const MIN_BIN_HITS: usize = 100;

fn neighbors(d1: &SurvivalDataset, d2: &SurvivalDataset) -> bool {
    d1.n() == d2.n()
        && d1.p == d2.p
        && d1.q == d2.q
        && d1
            .records
            .iter()
            .zip(&d2.records)
            .filter(|(a, b)| a != b)
            .count()
            <= 1
}

/// Runs a mechanism many times on two neighboring datasets and compares the
/// histograms of a one-dimensional output projection. Any fixed projection
/// of an ε-DP output obeys the same `exp(ε)` density-ratio bound, so ratios
/// materially above it expose a broken mechanism.
///
/// The runner maps `(dataset, seed)` to the projected output. Runs are
/// parallelized over derived seeds; the same seed stream is used for both
/// datasets, which makes the report exactly symmetric under swapping them.
pub fn dp_ratio_test<F>(
    runner: F,
    d1: &SurvivalDataset,
    d2: &SurvivalDataset,
    epsilon: f64,
    runs: usize,
    bins: &BinSpec,
    master_seed: u64,
) -> Result<RatioReport>
where
    F: Fn(&SurvivalDataset, u64) -> Result<f64> + Sync,
{
    if !neighbors(d1, d2) {
        return Err(Error::Config(
            "ratio audit needs neighboring datasets (equal shape, at most one \
             differing record)"
                .into(),
        ));
    }
    if runs < 10_000 {
        return Err(Error::Config(format!(
            "ratio audit needs at least 10^4 runs, got {runs}"
        )));
    }
    if bins.count < 2 || !(bins.lo < bins.hi) {
        return Err(Error::Config("invalid bin specification".into()));
    }

    let histogram = |ds: &SurvivalDataset| -> Result<Vec<usize>> {
        let outputs: Vec<f64> = (0..runs)
            .into_par_iter()
            .map(|i| runner(ds, derive_seed(master_seed, i as u64)))
            .collect::<Result<Vec<f64>>>()?;
        let width = (bins.hi - bins.lo) / bins.count as f64;
        let mut hist = vec![0usize; bins.count];
        for x in outputs {
            if x >= bins.lo && x < bins.hi {
                hist[((x - bins.lo) / width) as usize] += 1;
            }
        }
        Ok(hist)
    };
    let h1 = histogram(d1)?;
    let h2 = histogram(d2)?;

    let bound = epsilon.exp();
    let mut max_ratio: f64 = 0.0;
    let mut violating = Vec::new();
    let mut compared = 0;
    for (idx, (&a, &b)) in h1.iter().zip(&h2).enumerate() {
        if a >= MIN_BIN_HITS && b >= MIN_BIN_HITS {
            compared += 1;
            let ratio = (a as f64 / b as f64).max(b as f64 / a as f64);
            if ratio > max_ratio {
                max_ratio = ratio;
            }
            if ratio > bound {
                violating.push(idx);
            }
        }
    }
    Ok(RatioReport {
        epsilon,
        runs,
        max_ratio,
        violating_bins: violating,
        bins_compared: compared,
    })
}

/// Privacy/utility sweep controls.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Independent repetitions per (mechanism, ε) cell.
    pub seeds: usize,
    pub master_seed: u64,
    pub mechanisms: Vec<Mechanism>,
    /// Candidate regularization weights for the perturbation mechanisms; the
    /// best (lowest mean error at the largest ε) is used for the full sweep.
    pub lambdas: Vec<f64>,
    pub psgld_steps: usize,
    pub psgld_minibatch: usize,
    pub psgld_lr_scale: f64,
    pub optim: OptimSettings,
}

/// One (mechanism, ε) cell of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub mechanism: Mechanism,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub mre_mean: f64,
    pub mre_std: f64,
    pub mre_median: f64,
}

/// Sweep output: per-cell error statistics against the non-private,
/// unregularized optimum.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best_lambda: Vec<(Mechanism, f64)>,
    /// The reference optimum the errors are measured against.
    pub reference: Vec<f64>,
}

fn summarize(mut errs: Vec<f64>) -> (f64, f64, f64) {
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    errs.sort_by(f64::total_cmp);
    let median = if errs.len() % 2 == 1 {
        errs[errs.len() / 2]
    } else {
        0.5 * (errs[errs.len() / 2 - 1] + errs[errs.len() / 2])
    };
    (mean, var.sqrt(), median)
}

/// Runs the configured mechanisms over the ε grid, measuring each release's
/// relative error against the unregularized non-private optimum.
pub fn privacy_sweep(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.epsilons.is_empty() || cfg.seeds == 0 {
        return Err(Error::Config("sweep needs epsilons and seeds".into()));
    }
    let needs_lambda = cfg
        .mechanisms
        .iter()
        .any(|m| matches!(m, Mechanism::OutPert | Mechanism::ObjPert));
    if needs_lambda && cfg.lambdas.is_empty() {
        return Err(Error::Config(
            "perturbation mechanisms need candidate lambdas".into(),
        ));
    }

    let reference = {
        let mut settings = cfg.optim.clone();
        settings.grad_tol = settings.grad_tol.min(1e-8);
        let opt = optimize_objective(ds, basis, 0.0, &settings)?;
        if !opt.converged {
            return Err(Error::NonConvergence(format!(
                "reference fit stalled at gradient norm {}",
                opt.grad_norm
            )));
        }
        opt.x
    };
    let ref_norm = norm(&reference);
    if ref_norm <= 0.0 {
        return Err(Error::Numeric("reference optimum is zero".into()));
    }

    let eps_max = cfg.epsilons.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rows = Vec::new();
    let mut best_lambda = Vec::new();

    for (mech_idx, &mechanism) in cfg.mechanisms.iter().enumerate() {
        let stream_base = (mech_idx as u64) << 40;
        match mechanism {
            Mechanism::OutPert => {
                // The optimum depends only on Λ; fit once per candidate and
                // reuse it for every noise draw.
                let mut opts = Vec::new();
                for &lambda in &cfg.lambdas {
                    let opt = optimize_objective(ds, basis, lambda, &cfg.optim)?;
                    if !opt.converged {
                        return Err(Error::NonConvergence(format!(
                            "out_pert fit at lambda {lambda} did not converge"
                        )));
                    }
                    opts.push(opt);
                }
                let run = |lambda: f64, opt_idx: usize, eps: f64, stream: u64| -> Result<f64> {
                    let pert = PerturbationConfig {
                        epsilon: eps,
                        lambda,
                        seed: derive_seed(cfg.master_seed, stream),
                        link: LinkFunction::Logit,
                        optim: cfg.optim.clone(),
                    };
                    let fit = out_pert_release(ds, basis, &pert, &opts[opt_idx])?;
                    Ok(distance(&fit.stacked(), &reference) / ref_norm)
                };
                let lambda_idx = pick_lambda(cfg, eps_max, stream_base, |li, eps, stream| {
                    run(cfg.lambdas[li], li, eps, stream)
                })?;
                let lambda = cfg.lambdas[lambda_idx];
                best_lambda.push((mechanism, lambda));
                for (ei, &eps) in cfg.epsilons.iter().enumerate() {
                    let errs = (0..cfg.seeds)
                        .into_par_iter()
                        .map(|si| {
                            let stream = stream_base | ((ei as u64 + 1) << 20) | si as u64;
                            run(lambda, lambda_idx, eps, stream)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let (mean, std, median) = summarize(errs);
                    rows.push(SweepRow {
                        epsilon: eps,
                        mechanism,
                        lambda: Some(lambda),
                        mre_mean: mean,
                        mre_std: std,
                        mre_median: median,
                    });
                }
            }
            Mechanism::ObjPert => {
                let run = |lambda: f64, eps: f64, stream: u64| -> Result<f64> {
                    let seed = derive_seed(cfg.master_seed, stream);
                    let pert = PerturbationConfig {
                        epsilon: eps,
                        lambda,
                        seed,
                        link: LinkFunction::Logit,
                        optim: cfg.optim.clone(),
                    };
                    let budget = obj_pert_budget(basis, ds.n(), eps, lambda)?;
                    let t = crate::mechanisms::gradient_diff_bound(basis);
                    let mut rng = Rng::new(seed);
                    let b = sample_gamma_sphere(
                        basis.e() + ds.p,
                        t / budget.epsilon_prime,
                        &mut rng,
                    )?;
                    let fit = fit_obj_pert_with(ds, basis, &pert, &budget, &b)?;
                    Ok(distance(&fit.stacked(), &reference) / ref_norm)
                };
                let lambda_idx = pick_lambda(cfg, eps_max, stream_base, |li, eps, stream| {
                    run(cfg.lambdas[li], eps, stream)
                })?;
                let lambda = cfg.lambdas[lambda_idx];
                best_lambda.push((mechanism, lambda));
                for (ei, &eps) in cfg.epsilons.iter().enumerate() {
                    let errs = (0..cfg.seeds)
                        .into_par_iter()
                        .map(|si| {
                            let stream = stream_base | ((ei as u64 + 1) << 20) | si as u64;
                            run(lambda, eps, stream)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let (mean, std, median) = summarize(errs);
                    rows.push(SweepRow {
                        epsilon: eps,
                        mechanism,
                        lambda: Some(lambda),
                        mre_mean: mean,
                        mre_std: std,
                        mre_median: median,
                    });
                }
            }
            Mechanism::Sampler => {
                for (ei, &eps) in cfg.epsilons.iter().enumerate() {
                    let sanitizer = SanitizerConfig::defaults(ds.n(), eps);
                    let errs = (0..cfg.seeds)
                        .into_par_iter()
                        .map(|si| {
                            let stream = stream_base | ((ei as u64 + 1) << 20) | si as u64;
                            let mut chain = PsgldConfig::defaults(ds.n(), 0);
                            chain.steps = cfg.psgld_steps;
                            chain.minibatch = cfg.psgld_minibatch.min(ds.n());
                            chain.lr_scale = cfg.psgld_lr_scale;
                            chain.seed = derive_seed(cfg.master_seed, stream);
                            let (state, _) =
                                run_psgld(ds, basis, eps, &sanitizer, &chain, None)?;
                            Ok(distance(&state.f, &reference) / ref_norm)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let (mean, std, median) = summarize(errs);
                    rows.push(SweepRow {
                        epsilon: eps,
                        mechanism,
                        lambda: None,
                        mre_mean: mean,
                        mre_std: std,
                        mre_median: median,
                    });
                }
            }
            Mechanism::None => {
                return Err(Error::Config(
                    "the non-private fit has no privacy sweep".into(),
                ));
            }
        }
    }

    Ok(SweepResult {
        rows,
        best_lambda,
        reference,
    })
}

/// Evaluates each candidate Λ at the largest ε and returns the index with
/// the smallest mean relative error.
fn pick_lambda<R>(cfg: &SweepConfig, eps_max: f64, stream_base: u64, run: R) -> Result<usize>
where
    R: Fn(usize, f64, u64) -> Result<f64> + Sync,
{
    let mut best = (0usize, f64::INFINITY);
    for li in 0..cfg.lambdas.len() {
        let errs = (0..cfg.seeds)
            .into_par_iter()
            .map(|si| {
                let stream = stream_base | (1u64 << 32) | ((li as u64) << 20) | si as u64;
                run(li, eps_max, stream)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        if mean < best.1 {
            best = (li, mean);
        }
    }
    Ok(best.0)
}
