//! ε-differentially private releases of the regularized optimum: output
//! perturbation and objective perturbation.
//!
//! Both mechanisms rest on the same sensitivity constant. For any two
//! records and any parameter vector, the per-record loss gradients differ by
//! at most
//!
//! ```text
//! B = Σ_{s=1..q} √(‖A_s‖² + 4)  +  max_{s=1..q} √(‖2A_s‖² + 4)
//! ```
//!
//! where `A_s` is the spline basis vector of interval `s`. Output
//! perturbation releases `f* + b` where `f*` minimizes the Λ-strongly-convex
//! objective and `‖b‖ ~ Gamma(dim, t/ε)` with `t = B / (nΛ)`. Objective
//! perturbation splits the budget: part pays for the optimum's dependence on
//! the data through the objective's curvature (adding a regularizer Δ when Λ
//! alone is too small), and the remainder `ε′` scales a random linear term
//! `(1/n)⟨b, f⟩` added to the objective before minimizing, with `t = B`
//! itself.
//!
//! Both constructions assume the logistic derivative bounds, so only the
//! logit link is accepted.

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::model::{self, LinkFunction};
use crate::noise::{sample_gamma_sphere, Rng};
use crate::optim::{minimize, OptimResult, OptimSettings};
use crate::report::{FitResult, Mechanism, OptimizerInfo};
use crate::spline::SplineBasis;

/// Settings for a perturbation-mechanism fit.
#[derive(Debug, Clone)]
pub struct PerturbationConfig {
    /// Privacy budget ε > 0.
    pub epsilon: f64,
    /// Regularization weight Λ > 0. Larger Λ lowers sensitivity but biases
    /// the fit toward zero; it must be chosen without looking at the private
    /// data.
    pub lambda: f64,
    pub seed: u64,
    pub link: LinkFunction,
    pub optim: OptimSettings,
}

impl PerturbationConfig {
    pub fn new(epsilon: f64, lambda: f64, seed: u64) -> Self {
        PerturbationConfig {
            epsilon,
            lambda,
            seed,
            link: LinkFunction::Logit,
            optim: OptimSettings::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "privacy budget must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "perturbation mechanisms need a positive regularization, got {}",
                self.lambda
            )));
        }
        if self.link != LinkFunction::Logit {
            return Err(Error::Config(format!(
                "perturbation mechanisms support only the logit link, got {}",
                self.link
            )));
        }
        Ok(())
    }
}

/// Budget split for objective perturbation: the part of ε left for the
/// noise term, and the extra regularizer Δ (zero when Λ is large enough).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjPertBudget {
    pub epsilon_prime: f64,
    pub delta: f64,
}

/// Worst-case gradient difference between two records, from the interval
/// vector norms.
pub fn gradient_diff_bound_from_norms(norms: &[f64]) -> f64 {
    let sum: f64 = norms.iter().map(|a| (a * a + 4.0).sqrt()).sum();
    let max = norms
        .iter()
        .map(|a| (4.0 * a * a + 4.0).sqrt())
        .fold(0.0, f64::max);
    sum + max
}

/// Worst-case gradient difference between two records for this basis.
pub fn gradient_diff_bound(basis: &SplineBasis) -> f64 {
    gradient_diff_bound_from_norms(&basis.basis_norms())
}

/// Sensitivity of the regularized optimum over neighboring datasets.
pub fn out_pert_sensitivity_from_norms(norms: &[f64], n: usize, lambda: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!(
            "sensitivity needs positive regularization, got {lambda}"
        )));
    }
    Ok(gradient_diff_bound_from_norms(norms) / (n as f64 * lambda))
}

/// Sensitivity of the regularized optimum for this basis.
pub fn out_pert_sensitivity(basis: &SplineBasis, n: usize, lambda: f64) -> Result<f64> {
    out_pert_sensitivity_from_norms(&basis.basis_norms(), n, lambda)
}

/// Curvature cost of releasing the perturbed optimum: the budget spent on
/// the objective's data-dependence at regularization `Λ + Δ`.
fn curvature_cost(norms: &[f64], n: usize, lambda_total: f64) -> f64 {
    norms
        .iter()
        .map(|a| {
            let c = 0.25 * (a * a + 1.0).sqrt();
            2.0 * (c / (n as f64 * lambda_total)).ln_1p()
        })
        .sum()
}

/// Splits ε for objective perturbation given the interval vector norms.
///
/// If the curvature cost at Δ = 0 already leaves `ε′ >= ε/2`, no extra
/// regularizer is needed. Otherwise Δ is found by bisection so that the
/// curvature cost is exactly ε/2 (the cost is continuous and strictly
/// decreasing in Δ), and `ε′ = ε/2`.
pub fn obj_pert_budget_from_norms(
    norms: &[f64],
    n: usize,
    epsilon: f64,
    lambda: f64,
) -> Result<ObjPertBudget> {
    if n < 1 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "privacy budget must be positive, got {epsilon}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!(
            "regularization must be positive, got {lambda}"
        )));
    }
    let target = epsilon / 2.0;
    let cost0 = curvature_cost(norms, n, lambda);
    if epsilon - cost0 >= target {
        return Ok(ObjPertBudget {
            epsilon_prime: epsilon - cost0,
            delta: 0.0,
        });
    }

    // Bracket: cost(Δ=0) > ε/2, and the cost vanishes as Δ grows.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while curvature_cost(norms, n, lambda + hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1_000_000 {
            return Err(Error::Numeric(
                "objective perturbation budget bracket did not close".into(),
            ));
        }
    }
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let cost = curvature_cost(norms, n, lambda + mid);
        if (cost - target).abs() <= 1e-12 {
            lo = mid;
            hi = mid;
            break;
        }
        if cost > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(ObjPertBudget {
        epsilon_prime: target,
        delta: 0.5 * (lo + hi),
    })
}

/// Splits ε for objective perturbation under this basis.
pub fn obj_pert_budget(
    basis: &SplineBasis,
    n: usize,
    epsilon: f64,
    lambda: f64,
) -> Result<ObjPertBudget> {
    obj_pert_budget_from_norms(&basis.basis_norms(), n, epsilon, lambda)
}

fn check_compatible(ds: &SurvivalDataset, basis: &SplineBasis) -> Result<()> {
    if ds.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ds.q != basis.q() {
        return Err(Error::Shape(format!(
            "dataset has q = {}, basis has q = {}",
            ds.q,
            basis.q()
        )));
    }
    Ok(())
}

/// Minimizes the regularized objective from zero.
pub(crate) fn optimize_objective(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    lambda: f64,
    settings: &OptimSettings,
) -> Result<OptimResult> {
    let x0 = vec![0.0; basis.e() + ds.p];
    minimize(
        |f| model::objective_value_grad(f, ds, lambda, basis, true).expect("validated dims"),
        &x0,
        settings,
    )
}

fn require_converged(opt: &OptimResult) -> Result<()> {
    if !opt.converged {
        return Err(Error::NonConvergence(format!(
            "gradient norm {} after {} iterations",
            opt.grad_norm, opt.iterations
        )));
    }
    Ok(())
}

fn base_result(
    mechanism: Mechanism,
    f: &[f64],
    basis: &SplineBasis,
    ds: &SurvivalDataset,
    opt: &OptimResult,
) -> FitResult {
    FitResult {
        mechanism,
        epsilon: None,
        epsilon_prime: None,
        lambda: None,
        delta: None,
        sensitivity_t: None,
        seed: None,
        alpha: f[..basis.e()].to_vec(),
        beta: f[basis.e()..].to_vec(),
        objective_value: opt.value,
        optimizer: OptimizerInfo {
            iterations: opt.iterations,
            grad_norm: opt.grad_norm,
        },
        q: basis.q(),
        e: basis.e(),
        link: LinkFunction::Logit,
        approximate_dp: None,
        sanitizer_v: None,
        sanitizer_sigma: None,
        normalization: Some(ds.normalization.clone()),
    }
}

/// Non-private regularized maximum likelihood fit (logit link).
pub fn fit_mle(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    lambda: f64,
    settings: &OptimSettings,
) -> Result<FitResult> {
    check_compatible(ds, basis)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!(
            "regularization must be nonnegative, got {lambda}"
        )));
    }
    let opt = optimize_objective(ds, basis, lambda, settings)?;
    require_converged(&opt)?;
    let mut result = base_result(Mechanism::None, &opt.x, basis, ds, &opt);
    result.lambda = Some(lambda);
    Ok(result)
}

/// Output perturbation: releases `f* + b` with `b` drawn from the spherical
/// Gamma-norm law at scale `t/ε`, `t` the sensitivity of `f*`.
///
/// Nothing is released if the optimizer fails to converge.
pub fn fit_out_pert(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &PerturbationConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_compatible(ds, basis)?;
    let opt = optimize_objective(ds, basis, cfg.lambda, &cfg.optim)?;
    require_converged(&opt)?;
    out_pert_release(ds, basis, cfg, &opt)
}

/// Noise-addition half of output perturbation, reusable when the optimum for
/// a given Λ is already known.
pub(crate) fn out_pert_release(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &PerturbationConfig,
    opt: &OptimResult,
) -> Result<FitResult> {
    let n = ds.records.len();
    let t = out_pert_sensitivity(basis, n, cfg.lambda)?;
    let mut rng = Rng::new(cfg.seed);
    let b = sample_gamma_sphere(opt.x.len(), t / cfg.epsilon, &mut rng)?;
    let released: Vec<f64> = opt.x.iter().zip(&b).map(|(f, bi)| f + bi).collect();
    let mut result = base_result(Mechanism::OutPert, &released, basis, ds, opt);
    result.epsilon = Some(cfg.epsilon);
    result.lambda = Some(cfg.lambda);
    result.sensitivity_t = Some(t);
    result.seed = Some(cfg.seed);
    Ok(result)
}

/// Objective perturbation: splits the budget, draws the linear noise term
/// and releases the optimum of the perturbed objective.
pub fn fit_obj_pert(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &PerturbationConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_compatible(ds, basis)?;
    let n = ds.records.len();
    let budget = obj_pert_budget(basis, n, cfg.epsilon, cfg.lambda)?;
    let t = gradient_diff_bound(basis);
    let mut rng = Rng::new(cfg.seed);
    let b = sample_gamma_sphere(
        basis.e() + ds.p,
        t / budget.epsilon_prime,
        &mut rng,
    )?;
    fit_obj_pert_with(ds, basis, cfg, &budget, &b)
}

/// Objective perturbation with an explicit budget and noise vector. Exposed
/// so audits can force specific noise (for example `b = 0` to recover the
/// non-private optimum).
pub fn fit_obj_pert_with(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &PerturbationConfig,
    budget: &ObjPertBudget,
    b: &[f64],
) -> Result<FitResult> {
    cfg.validate()?;
    check_compatible(ds, basis)?;
    let dim = basis.e() + ds.p;
    if b.len() != dim {
        return Err(Error::Shape(format!(
            "noise vector length {} does not match parameter dimension {dim}",
            b.len()
        )));
    }
    let n = ds.records.len() as f64;
    let inv_n = 1.0 / n;
    let delta = budget.delta;
    let x0 = vec![0.0; dim];
    let opt = minimize(
        |f| {
            let (mut value, mut grad) =
                model::objective_value_grad(f, ds, cfg.lambda, basis, true)
                    .expect("validated dims");
            let mut norm2 = 0.0;
            for ((g, &fi), &bi) in grad.iter_mut().zip(f).zip(b) {
                value += inv_n * bi * fi;
                norm2 += fi * fi;
                *g += inv_n * bi + delta * fi;
            }
            value += 0.5 * delta * norm2;
            (value, grad)
        },
        &x0,
        &cfg.optim,
    )?;
    require_converged(&opt)?;
    let t = gradient_diff_bound(basis);
    let mut result = base_result(Mechanism::ObjPert, &opt.x, basis, ds, &opt);
    result.epsilon = Some(cfg.epsilon);
    result.epsilon_prime = Some(budget.epsilon_prime);
    result.lambda = Some(cfg.lambda);
    result.delta = Some(budget.delta);
    result.sensitivity_t = Some(t);
    result.seed = Some(cfg.seed);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{NormalizationReport, SurvivalRecord};
    use crate::spline::build_basis;
    use approx::assert_relative_eq;

    fn toy_dataset(n: usize, q: usize, seed: u64) -> SurvivalDataset {
        let mut rng = Rng::new(seed);
        use rand::Rng as _;
        let records = (0..n)
            .map(|_| {
                let x = vec![rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
                let t = rng.random_range(1..=q);
                let event = rng.random_bool(0.6);
                SurvivalRecord::new(x, event, t)
            })
            .collect();
        SurvivalDataset {
            records,
            q,
            p: 2,
            normalization: NormalizationReport::identity(2),
        }
    }

    #[test]
    fn bound_plug_in_value() {
        // One interval with ‖A‖ = 1: √5 + √8.
        let b = gradient_diff_bound_from_norms(&[1.0]);
        assert_relative_eq!(b, 5.0f64.sqrt() + 8.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(b, 5.064_495, max_relative = 1e-6);
    }

    #[test]
    fn bound_grows_with_added_intervals() {
        let b1 = gradient_diff_bound_from_norms(&[1.0, 1.2]);
        let b2 = gradient_diff_bound_from_norms(&[1.0, 1.2, 1.2]);
        assert!(b2 > b1);
    }

    #[test]
    fn bound_matches_independent_recomputation() {
        let basis = build_basis(3, 200).unwrap();
        let norms = basis.basis_norms();
        let expected: f64 = norms.iter().map(|a| (4.0 + a * a).sqrt()).sum::<f64>()
            + norms
                .iter()
                .map(|a| (2.0 * a) * (2.0 * a) + 4.0)
                .map(f64::sqrt)
                .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(gradient_diff_bound(&basis), expected, epsilon = 1e-12);
    }

    #[test]
    fn sensitivity_scales_inversely_with_n_and_lambda() {
        let norms = [1.0];
        let base = out_pert_sensitivity_from_norms(&norms, 100, 0.1).unwrap();
        assert_relative_eq!(base, 0.506_449_5, max_relative = 1e-6);
        let double_n = out_pert_sensitivity_from_norms(&norms, 200, 0.1).unwrap();
        assert_relative_eq!(double_n, base / 2.0, epsilon = 1e-15);
        let double_lambda = out_pert_sensitivity_from_norms(&norms, 100, 0.2).unwrap();
        assert_relative_eq!(double_lambda, base / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn budget_with_huge_n_keeps_full_epsilon() {
        let norms = vec![1.5; 4];
        let budget = obj_pert_budget_from_norms(&norms, 1_000_000_000, 1.0, 0.05).unwrap();
        assert_eq!(budget.delta, 0.0);
        assert!((budget.epsilon_prime - 1.0).abs() < 1e-6);
    }

    #[test]
    fn budget_search_solves_defining_equation() {
        let norms = [1.0];
        let (n, eps, lambda) = (10usize, 1.0, 1e-6);
        let budget = obj_pert_budget_from_norms(&norms, n, eps, lambda).unwrap();
        assert!(budget.delta > 0.0);
        assert_relative_eq!(budget.epsilon_prime, 0.5, epsilon = 1e-15);
        // The curvature cost at the returned Δ hits ε/2.
        let cost = curvature_cost(&norms, n, lambda + budget.delta);
        assert!((cost - 0.5).abs() < 1e-10, "cost {cost}");
        // Single-interval closed form: Δ = c / (n (e^{ε/4} - 1)) - Λ.
        let c = 0.25 * 2.0f64.sqrt();
        let exact = c / (n as f64 * ((eps / 4.0).exp() - 1.0)) - lambda;
        assert_relative_eq!(budget.delta, exact, max_relative = 1e-9);
    }

    #[test]
    fn out_pert_noise_vanishes_at_huge_epsilon() {
        let ds = toy_dataset(30, 4, 2);
        let basis = build_basis(2, 4).unwrap();
        let mle = optimize_objective(&ds, &basis, 0.5, &OptimSettings::default()).unwrap();
        let t = out_pert_sensitivity(&basis, 30, 0.5).unwrap();
        let cfg = PerturbationConfig::new(t / 1e-13, 0.5, 9);
        let fit = fit_out_pert(&ds, &basis, &cfg).unwrap();
        let released = fit.stacked();
        for (r, f) in released.iter().zip(&mle.x) {
            assert!((r - f).abs() < 1e-10);
        }
    }

    #[test]
    fn out_pert_mean_displacement_matches_gamma_mean() {
        let ds = toy_dataset(10, 3, 3);
        let basis = build_basis(2, 3).unwrap();
        let lambda = 0.5;
        let epsilon = 1.0;
        let mle = optimize_objective(&ds, &basis, lambda, &OptimSettings::default()).unwrap();
        let t = out_pert_sensitivity(&basis, 10, lambda).unwrap();
        let dim = (basis.e() + ds.p) as f64;
        let repeats = 10_000;
        let mean: f64 = (0..repeats)
            .map(|i| {
                let cfg = PerturbationConfig::new(epsilon, lambda, 1000 + i);
                let fit = fit_out_pert(&ds, &basis, &cfg).unwrap();
                fit.stacked()
                    .iter()
                    .zip(&mle.x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / repeats as f64;
        let expect = dim * t / epsilon;
        assert!(
            (mean - expect).abs() / expect < 0.02,
            "mean displacement {mean}, expected ≈ {expect}"
        );
    }

    #[test]
    fn obj_pert_zero_noise_recovers_mle() {
        let ds = toy_dataset(25, 5, 4);
        let basis = build_basis(3, 5).unwrap();
        let lambda = 0.2;
        let cfg = PerturbationConfig::new(1.0, lambda, 1);
        let budget = ObjPertBudget {
            epsilon_prime: 1.0,
            delta: 0.0,
        };
        let zero = vec![0.0; basis.e() + ds.p];
        let fit = fit_obj_pert_with(&ds, &basis, &cfg, &budget, &zero).unwrap();
        let mle = optimize_objective(&ds, &basis, lambda, &cfg.optim).unwrap();
        for (a, b) in fit.stacked().iter().zip(&mle.x) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn obj_pert_satisfies_stationarity_and_noise_identity() {
        let ds = toy_dataset(50, 6, 5);
        let basis = build_basis(3, 6).unwrap();
        let cfg = PerturbationConfig::new(0.8, 0.05, 21);
        let n = ds.records.len();
        let budget = obj_pert_budget(&basis, n, cfg.epsilon, cfg.lambda).unwrap();
        let t = gradient_diff_bound(&basis);
        let mut rng = Rng::new(cfg.seed);
        let b = sample_gamma_sphere(basis.e() + ds.p, t / budget.epsilon_prime, &mut rng).unwrap();
        let fit = fit_obj_pert_with(&ds, &basis, &cfg, &budget, &b).unwrap();
        let f = fit.stacked();

        // Stationarity of the perturbed objective at the release.
        let base_grad = model::objective_grad(&f, &ds, cfg.lambda, &basis).unwrap();
        let residual: f64 = base_grad
            .iter()
            .zip(&f)
            .zip(&b)
            .map(|((g, fi), bi)| {
                let r = g + bi / n as f64 + budget.delta * fi;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        assert!(residual < 1e-6, "stationarity residual {residual}");

        // Invert the release map: the noise that produces f must equal b.
        let mut sum_grad = vec![0.0; f.len()];
        for rec in &ds.records {
            let g = model::record_grad(&f, rec, &basis).unwrap();
            for (s, gi) in sum_grad.iter_mut().zip(&g) {
                *s += gi;
            }
        }
        for ((bi, fi), sg) in b.iter().zip(&f).zip(&sum_grad) {
            let reconstructed = -(n as f64) * (cfg.lambda + budget.delta) * fi - sg;
            assert!(
                (reconstructed - bi).abs() < 1e-4,
                "reconstructed {reconstructed} vs drawn {bi}"
            );
        }
    }

    #[test]
    fn displacement_median_shrinks_as_epsilon_grows() {
        let ds = toy_dataset(20, 3, 6);
        let basis = build_basis(2, 3).unwrap();
        let lambda = 0.3;
        let mle = optimize_objective(&ds, &basis, lambda, &OptimSettings::default()).unwrap();
        let mut medians = Vec::new();
        for (k, eps) in [0.1, 0.4, 1.6, 6.4].into_iter().enumerate() {
            let mut dists: Vec<f64> = (0..200)
                .map(|i| {
                    let cfg =
                        PerturbationConfig::new(eps, lambda, (k * 1000 + i) as u64);
                    let fit = fit_out_pert(&ds, &basis, &cfg).unwrap();
                    fit.stacked()
                        .iter()
                        .zip(&mle.x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            dists.sort_by(f64::total_cmp);
            medians.push(dists[100]);
        }
        for w in medians.windows(2) {
            assert!(w[1] <= w[0], "medians not nonincreasing: {medians:?}");
        }
    }

    #[test]
    fn identical_seed_gives_identical_release() {
        let ds = toy_dataset(15, 4, 7);
        let basis = build_basis(2, 4).unwrap();
        for fit in [fit_out_pert, fit_obj_pert] {
            let cfg = PerturbationConfig::new(1.3, 0.2, 99);
            let a = fit(&ds, &basis, &cfg).unwrap();
            let b = fit(&ds, &basis, &cfg).unwrap();
            assert_eq!(a.stacked(), b.stacked());
        }
    }

    #[test]
    fn non_logit_links_are_refused() {
        let ds = toy_dataset(10, 3, 8);
        let basis = build_basis(2, 3).unwrap();
        let mut cfg = PerturbationConfig::new(1.0, 0.1, 0);
        cfg.link = LinkFunction::Cloglog;
        assert!(matches!(
            fit_out_pert(&ds, &basis, &cfg),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_obj_pert(&ds, &basis, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_budgets_are_refused() {
        let ds = toy_dataset(10, 3, 8);
        let basis = build_basis(2, 3).unwrap();
        assert!(fit_out_pert(&ds, &basis, &PerturbationConfig::new(0.0, 0.1, 0)).is_err());
        assert!(fit_out_pert(&ds, &basis, &PerturbationConfig::new(1.0, 0.0, 0)).is_err());
    }
}
