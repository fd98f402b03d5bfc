//! Posterior sampling of the sanitized loss: the exponential-mechanism
//! target realized approximately by a preconditioned stochastic-gradient
//! Langevin chain.
//!
//! The utility of a parameter vector is
//!
//! ```text
//! U(f; D) = -(σ/2)‖f‖² - Σ_i C_v(ℓ(f; d_i)),     C_v(x) = v·tanh(x/v),
//! ```
//!
//! whose sensitivity over neighboring datasets is at most `v` because the
//! sanitizer caps each record's contribution. The target density is
//! `pdf(f) ∝ exp((ε/2v)·U(f; D))`, which no exact sampler reaches in useful
//! time; the chain below approximates it, so releases are flagged
//! `approximate_dp` and only the final state is released.
//!
//! Each step draws a minibatch of `k` records uniformly with replacement,
//! forms the stochastic gradient estimate
//!
//! ```text
//! ḡ = (ε/2v)·(σ·f/n + (1/k) Σ C_v'(ℓ(f; d))·∇ℓ(f; d)),
//! ```
//!
//! updates the squared-gradient average `V ← μV + (1-μ)(ḡ⊙ḡ)`, forms the
//! diagonal preconditioner `G = 1/(λ + √V)` and moves
//!
//! ```text
//! f ← f - (ε_t/2)·(G ⊙ n·ḡ) + N(0, ε_t·G),      ε_t = lr_scale·t^(-τ),
//! ```
//!
//! the Langevin discretization whose stationary law is the target above
//! (drift at half the noise variance). The preconditioner's own dependence
//! on position is left uncorrected; the resulting bias shrinks with the
//! step size and is accepted.

use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::model::{self, LinkFunction};
use crate::noise::{sample_gaussian_diag, Rng};
use crate::report::{FitResult, Mechanism, OptimizerInfo};
use crate::spline::SplineBasis;

/// Loss sanitizer parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SanitizerConfig {
    /// Cap on each record's loss contribution; also the utility sensitivity.
    pub v: f64,
    /// Precision of the zero-centered Gaussian prior on the parameters.
    pub sigma: f64,
}

impl SanitizerConfig {
    /// Defaults tied to the dataset size and budget: `v = 2·log n` and
    /// `σ = 10⁻²·2v/ε`.
    pub fn defaults(n: usize, epsilon: f64) -> Self {
        let v = 2.0 * (n.max(2) as f64).ln();
        SanitizerConfig {
            v,
            sigma: 1e-2 * 2.0 * v / epsilon,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(Error::Config(format!(
                "sanitizer cap must be positive, got {}",
                self.v
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "prior precision must be nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Chain controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsgldConfig {
    /// Total steps T; the release is the state after the last step.
    pub steps: usize,
    /// Minibatch size, drawn uniformly with replacement.
    pub minibatch: usize,
    /// Step-size decay exponent; `0.5 < τ <= 1` keeps the step sums
    /// divergent/square-summable as the chain needs.
    pub tau: f64,
    /// Preconditioner floor λ.
    pub lambda_pc: f64,
    /// Decay of the squared-gradient average.
    pub mu: f64,
    /// Steps discarded by diagnostics (the release itself never averages).
    pub burn_in: usize,
    /// Multiplier on the raw `t^(-τ)` step size, for targets where the raw
    /// schedule starts too large.
    pub lr_scale: f64,
    pub seed: u64,
    pub link: LinkFunction,
}

impl PsgldConfig {
    pub fn defaults(n: usize, seed: u64) -> Self {
        PsgldConfig {
            steps: 250 * n,
            minibatch: 200.min(n.max(1)),
            tau: 0.51,
            lambda_pc: 1e-5,
            mu: 0.99,
            burn_in: 10_000,
            lr_scale: 1.0,
            seed,
            link: LinkFunction::Logit,
        }
    }

    /// Step size at chain step `t` (1-based).
    pub fn step_size(&self, step: usize) -> f64 {
        self.lr_scale * (step as f64).powf(-self.tau)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.tau > 0.5 && self.tau <= 1.0) {
            return Err(Error::Config(format!(
                "step decay exponent must satisfy 0.5 < τ <= 1, got {}",
                self.tau
            )));
        }
        if self.minibatch < 1 || self.minibatch > n {
            return Err(Error::Config(format!(
                "minibatch size {} outside 1..={n}",
                self.minibatch
            )));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::Config(format!(
                "moment decay must be in [0, 1), got {}",
                self.mu
            )));
        }
        if !(self.lambda_pc.is_finite() && self.lambda_pc > 0.0) {
            return Err(Error::Config(format!(
                "preconditioner floor must be positive, got {}",
                self.lambda_pc
            )));
        }
        if !(self.lr_scale.is_finite() && self.lr_scale >= 0.0) {
            return Err(Error::Config(format!(
                "step-size multiplier must be nonnegative, got {}",
                self.lr_scale
            )));
        }
        if self.steps < 1 {
            return Err(Error::Config("chain needs at least one step".into()));
        }
        Ok(())
    }
}

/// Mutable chain state.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// Current parameter vector.
    pub f: Vec<f64>,
    /// Squared-gradient running average.
    pub v: Vec<f64>,
    /// Next step index (1-based).
    pub step: usize,
}

impl ChainState {
    pub fn start(dim: usize) -> Self {
        ChainState {
            f: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 1,
        }
    }
}

/// The loss cap `C_v(x) = v·tanh(x/v)`.
pub fn sanitize(x: f64, v: f64) -> f64 {
    v * (x / v).tanh()
}

/// Derivative of the cap, `1 - tanh²(x/v)`; decays smoothly to zero for
/// large inputs.
pub fn sanitize_deriv(x: f64, v: f64) -> f64 {
    let u = (x / v).tanh();
    1.0 - u * u
}

/// Utility of a parameter vector: negative prior energy minus the sum of
/// sanitized per-record losses. The target log-density of the release is
/// `(ε/2v)·U`.
pub fn utility(
    f: &[f64],
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    cfg: &SanitizerConfig,
    link: LinkFunction,
) -> Result<f64> {
    cfg.validate()?;
    if ds.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for rec in &ds.records {
        total += sanitize(model::record_loss_with_link(f, rec, basis, link)?, cfg.v);
    }
    let norm2: f64 = f.iter().map(|x| x * x).sum();
    Ok(-0.5 * cfg.sigma * norm2 - total)
}

/// Minibatch estimate `ḡ` of the scaled utility gradient, written into
/// `g_out`. Returns nothing; `g_out.len()` must equal `state.f.len()`.
fn minibatch_gradient(
    f: &[f64],
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    sanitizer: &SanitizerConfig,
    cfg: &PsgldConfig,
    epsilon: f64,
    rng: &mut Rng,
    eta_scratch: &mut Vec<f64>,
    g_out: &mut [f64],
) {
    use rand::Rng as _;
    let n = ds.records.len();
    let k = cfg.minibatch;
    let temper = epsilon / (2.0 * sanitizer.v);
    g_out.fill(0.0);
    let v = sanitizer.v;
    let weight = move |loss: f64| sanitize_deriv(loss, v);
    for _ in 0..k {
        let rec = &ds.records[rng.random_range(0..n)];
        model::record_loss_grad_scaled(
            f,
            rec,
            basis,
            cfg.link,
            eta_scratch,
            Some((g_out, &weight)),
        );
    }
    let inv_k = 1.0 / k as f64;
    let prior = sanitizer.sigma / n as f64;
    for (g, &fi) in g_out.iter_mut().zip(f) {
        *g = temper * (prior * fi + *g * inv_k);
    }
}

/// Advances the chain by one step.
pub fn psgld_step(
    state: &mut ChainState,
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    sanitizer: &SanitizerConfig,
    cfg: &PsgldConfig,
    epsilon: f64,
    rng: &mut Rng,
) -> Result<()> {
    let n = ds.records.len();
    let dim = state.f.len();
    let step_size = cfg.step_size(state.step);
    let mut g = vec![0.0; dim];
    let mut eta = Vec::new();
    minibatch_gradient(
        &state.f, ds, basis, sanitizer, cfg, epsilon, rng, &mut eta, &mut g,
    );
    let mut variances = vec![0.0; dim];
    for i in 0..dim {
        state.v[i] = cfg.mu * state.v[i] + (1.0 - cfg.mu) * g[i] * g[i];
        let precond = 1.0 / (cfg.lambda_pc + state.v[i].sqrt());
        variances[i] = step_size * precond;
        // Drift at half the injected variance; the noise below completes the
        // Langevin step.
        state.f[i] -= 0.5 * step_size * precond * n as f64 * g[i];
    }
    let noise = sample_gaussian_diag(&variances, rng)?;
    for (fi, ni) in state.f.iter_mut().zip(&noise) {
        *fi += ni;
    }
    if state.f.iter().any(|x| !x.is_finite()) {
        return Err(Error::Chain {
            step: state.step,
            msg: "state became non-finite; retry with a larger preconditioner floor \
                  or smaller step multiplier"
                .into(),
        });
    }
    state.step += 1;
    Ok(())
}

/// Full chain run. When `trace_every = Some(m)`, every m-th state after the
/// update is recorded as `(step, f)`; the trace is diagnostic output, not
/// part of the private release.
pub fn run_psgld(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    epsilon: f64,
    sanitizer: &SanitizerConfig,
    cfg: &PsgldConfig,
    trace_every: Option<usize>,
) -> Result<(ChainState, Option<Vec<(usize, Vec<f64>)>>)> {
    sanitizer.validate()?;
    if ds.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate(ds.records.len())?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "privacy budget must be positive, got {epsilon}"
        )));
    }
    if ds.q != basis.q() {
        return Err(Error::Shape(format!(
            "dataset has q = {}, basis has q = {}",
            ds.q,
            basis.q()
        )));
    }
    let dim = basis.e() + ds.p;
    let mut rng = Rng::new(cfg.seed);
    let mut state = ChainState::start(dim);
    let mut trace = trace_every.map(|m| Vec::with_capacity(cfg.steps / m.max(1) + 1));
    for step in 1..=cfg.steps {
        psgld_step(&mut state, ds, basis, sanitizer, cfg, epsilon, &mut rng)?;
        if let (Some(tr), Some(m)) = (trace.as_mut(), trace_every) {
            if m > 0 && step % m == 0 {
                tr.push((step, state.f.clone()));
            }
        }
    }
    Ok((state, trace))
}

/// Runs the chain and packages the final state as the released fit.
pub fn fit_sampled(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    epsilon: f64,
    sanitizer: &SanitizerConfig,
    cfg: &PsgldConfig,
) -> Result<FitResult> {
    Ok(fit_sampled_traced(ds, basis, epsilon, sanitizer, cfg, None)?.0)
}

/// [`fit_sampled`] that also returns the thinned diagnostic trace.
pub fn fit_sampled_traced(
    ds: &SurvivalDataset,
    basis: &SplineBasis,
    epsilon: f64,
    sanitizer: &SanitizerConfig,
    cfg: &PsgldConfig,
    trace_every: Option<usize>,
) -> Result<(FitResult, Option<Vec<(usize, Vec<f64>)>>)> {
    let (state, trace) = run_psgld(ds, basis, epsilon, sanitizer, cfg, trace_every)?;
    let value = utility(&state.f, ds, basis, sanitizer, cfg.link)?;

    // Full-data scaled utility gradient at the release, as a convergence
    // diagnostic.
    let n = ds.records.len() as f64;
    let temper = epsilon / (2.0 * sanitizer.v);
    let mut grad = vec![0.0; state.f.len()];
    let mut eta = Vec::new();
    let v = sanitizer.v;
    let weight = move |loss: f64| sanitize_deriv(loss, v);
    for rec in &ds.records {
        model::record_loss_grad_scaled(
            &state.f,
            rec,
            basis,
            cfg.link,
            &mut eta,
            Some((grad.as_mut_slice(), &weight)),
        );
    }
    let grad_norm = grad
        .iter()
        .zip(&state.f)
        .map(|(g, &fi)| temper * (g + sanitizer.sigma * fi / n))
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();

    let result = FitResult {
        mechanism: Mechanism::Sampler,
        epsilon: Some(epsilon),
        epsilon_prime: None,
        lambda: None,
        delta: None,
        sensitivity_t: None,
        seed: Some(cfg.seed),
        alpha: state.f[..basis.e()].to_vec(),
        beta: state.f[basis.e()..].to_vec(),
        objective_value: value,
        optimizer: OptimizerInfo {
            iterations: cfg.steps,
            grad_norm,
        },
        q: basis.q(),
        e: basis.e(),
        link: cfg.link,
        approximate_dp: Some(true),
        sanitizer_v: Some(sanitizer.v),
        sanitizer_sigma: Some(sanitizer.sigma),
        normalization: Some(ds.normalization.clone()),
    };
    Ok((result, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{NormalizationReport, SurvivalRecord};
    use crate::spline::build_basis;
    use approx::assert_relative_eq;

    fn singleton_dataset(x: f64, event: bool, t: usize, q: usize) -> SurvivalDataset {
        SurvivalDataset {
            records: vec![SurvivalRecord::new(vec![x], event, t)],
            q,
            p: 1,
            normalization: NormalizationReport::identity(1),
        }
    }

    #[test]
    fn sanitizer_identities() {
        assert_eq!(sanitize(0.0, 3.0), 0.0);
        assert_eq!(sanitize_deriv(0.0, 3.0), 1.0);
        for x in [0.1, 1.0, 5.0, 50.0, 5000.0] {
            let c = sanitize(x, 20.0);
            // Strictly below the cap until tanh saturates in f64.
            assert!(c <= 20.0);
            assert!(x > 400.0 || c < 20.0);
            // C' = 1 - (C/v)².
            let d = sanitize_deriv(x, 20.0);
            assert_relative_eq!(d, 1.0 - (c / 20.0) * (c / 20.0), epsilon = 1e-12);
        }
        assert!(sanitize(1e6, 20.0) > 20.0 - 1e-9);
        assert_eq!(sanitize_deriv(20_000.0, 20.0), 0.0);
    }

    #[test]
    fn sanitizer_is_near_identity_for_small_losses() {
        let v = 2.0;
        let mut x = 0.0;
        while x <= v / 10.0 {
            let err = (sanitize(x, v) - x).abs();
            assert!(err < 1e-3, "|C - x| = {err} at x = {x}");
            // Cubic Taylor remainder bound.
            assert!(err <= x * x * x / (3.0 * v * v) + 1e-12);
            x += 0.005;
        }
    }

    #[test]
    fn utility_of_zero_parameters() {
        let basis = build_basis(2, 3).unwrap();
        let ds = singleton_dataset(0.4, true, 1, 3);
        let cfg = SanitizerConfig { v: 4.0, sigma: 0.0 };
        let f = vec![0.0; 3];
        let got = utility(&f, &ds, &basis, &cfg, LinkFunction::Logit).unwrap();
        assert_relative_eq!(
            got,
            -sanitize(std::f64::consts::LN_2, 4.0),
            epsilon = 1e-15
        );
        // A positive prior precision contributes nothing at f = 0.
        let with_prior = SanitizerConfig { v: 4.0, sigma: 2.5 };
        assert_relative_eq!(
            utility(&f, &ds, &basis, &with_prior, LinkFunction::Logit).unwrap(),
            got,
            epsilon = 1e-15
        );
    }

    #[test]
    fn utility_changes_at_most_v_per_swap() {
        use rand::Rng as _;
        let basis = build_basis(3, 6).unwrap();
        let mut rng = Rng::new(31);
        let cfg = SanitizerConfig { v: 1.5, sigma: 0.7 };
        let records: Vec<SurvivalRecord> = (0..20)
            .map(|_| {
                SurvivalRecord::new(
                    vec![rng.random_range(-0.9..0.9)],
                    rng.random_bool(0.5),
                    rng.random_range(1..=6),
                )
            })
            .collect();
        let ds = SurvivalDataset {
            records,
            q: 6,
            p: 1,
            normalization: NormalizationReport::identity(1),
        };
        for trial in 0..1000 {
            let f: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let idx = rng.random_range(0..ds.records.len());
            let replacement = SurvivalRecord::new(
                vec![rng.random_range(-0.9..0.9)],
                rng.random_bool(0.5),
                rng.random_range(1..=6),
            );
            let swapped = crate::dataset::swap_record(&ds, idx, replacement).unwrap();
            let u1 = utility(&f, &ds, &basis, &cfg, LinkFunction::Logit).unwrap();
            let u2 = utility(&f, &swapped, &basis, &cfg, LinkFunction::Logit).unwrap();
            assert!(
                (u1 - u2).abs() <= cfg.v + 1e-12,
                "trial {trial}: |ΔU| = {} > v",
                (u1 - u2).abs()
            );
        }
    }

    #[test]
    fn sanitized_gradient_never_exceeds_raw_gradient() {
        use rand::Rng as _;
        let basis = build_basis(3, 5).unwrap();
        let mut rng = Rng::new(6);
        for _ in 0..200 {
            let f: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
            let rec = SurvivalRecord::new(
                vec![rng.random_range(-0.9..0.9)],
                rng.random_bool(0.5),
                rng.random_range(1..=5),
            );
            let loss = model::record_loss(&f, &rec, &basis).unwrap();
            let grad = model::record_grad(&f, &rec, &basis).unwrap();
            let raw: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let scaled = sanitize_deriv(loss, 2.0) * raw;
            assert!(scaled <= raw + 1e-15, "weighted {scaled} > raw {raw}");
        }
    }

    #[test]
    fn zero_step_multiplier_freezes_the_chain() {
        let basis = build_basis(2, 2).unwrap();
        let ds = singleton_dataset(0.5, true, 1, 2);
        let sanitizer = SanitizerConfig::defaults(1, 1.0);
        let mut cfg = PsgldConfig::defaults(1, 3);
        cfg.lr_scale = 0.0;
        cfg.steps = 5;
        let mut state = ChainState::start(3);
        state.f = vec![0.7, -0.2, 0.1];
        let before = state.f.clone();
        let mut rng = Rng::new(3);
        psgld_step(&mut state, &ds, &basis, &sanitizer, &cfg, 1.0, &mut rng).unwrap();
        assert_eq!(state.f, before);
        assert_eq!(state.step, 2);
    }

    #[test]
    fn first_step_preconditioner_follows_fresh_gradient() {
        // Single-record dataset makes the minibatch deterministic.
        let basis = build_basis(2, 2).unwrap();
        let ds = singleton_dataset(0.5, true, 2, 2);
        let sanitizer = SanitizerConfig { v: 3.0, sigma: 0.4 };
        let cfg = PsgldConfig {
            steps: 1,
            minibatch: 1,
            tau: 0.51,
            lambda_pc: 1e-5,
            mu: 0.99,
            burn_in: 0,
            lr_scale: 1.0,
            seed: 5,
            link: LinkFunction::Logit,
        };
        let epsilon = 1.2;
        let f0 = vec![0.3, -0.1, 0.2];

        // Expected ḡ from the definitions.
        let rec = &ds.records[0];
        let loss = model::record_loss(&f0, rec, &basis).unwrap();
        let grad = model::record_grad(&f0, rec, &basis).unwrap();
        let temper = epsilon / (2.0 * sanitizer.v);
        let expected_g: Vec<f64> = grad
            .iter()
            .zip(&f0)
            .map(|(g, fi)| temper * (sanitizer.sigma * fi + sanitize_deriv(loss, sanitizer.v) * g))
            .collect();

        let mut state = ChainState::start(3);
        state.f = f0.clone();
        let mut rng = Rng::new(cfg.seed);
        psgld_step(&mut state, &ds, &basis, &sanitizer, &cfg, epsilon, &mut rng).unwrap();

        // V after one step from zero is (1-μ)ḡ², so G = 1/(λ + |ḡ|√(1-μ)).
        for (vi, gi) in state.v.iter().zip(&expected_g) {
            assert_relative_eq!(*vi, (1.0 - cfg.mu) * gi * gi, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_size_schedule() {
        let mut cfg = PsgldConfig::defaults(10, 0);
        cfg.tau = 0.5;
        cfg.lr_scale = 1.0;
        assert_relative_eq!(cfg.step_size(4), 0.5, epsilon = 1e-15);
        cfg.lr_scale = 0.1;
        assert_relative_eq!(cfg.step_size(4), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn fixed_seed_reproduces_release() {
        let basis = build_basis(2, 4).unwrap();
        use rand::Rng as _;
        let mut rng = Rng::new(8);
        let records: Vec<SurvivalRecord> = (0..12)
            .map(|_| {
                SurvivalRecord::new(
                    vec![rng.random_range(-0.8..0.8)],
                    rng.random_bool(0.5),
                    rng.random_range(1..=4),
                )
            })
            .collect();
        let ds = SurvivalDataset {
            records,
            q: 4,
            p: 1,
            normalization: NormalizationReport::identity(1),
        };
        let sanitizer = SanitizerConfig::defaults(12, 1.0);
        let mut cfg = PsgldConfig::defaults(12, 44);
        cfg.steps = 500;
        cfg.lr_scale = 0.05;
        let a = fit_sampled(&ds, &basis, 1.0, &sanitizer, &cfg).unwrap();
        let b = fit_sampled(&ds, &basis, 1.0, &sanitizer, &cfg).unwrap();
        assert_eq!(a.stacked(), b.stacked());
        assert_eq!(a.approximate_dp, Some(true));
    }

    #[test]
    fn rejects_invalid_chain_settings() {
        let basis = build_basis(2, 2).unwrap();
        let ds = singleton_dataset(0.1, true, 1, 2);
        let sanitizer = SanitizerConfig::defaults(1, 1.0);
        let mut cfg = PsgldConfig::defaults(1, 0);
        cfg.tau = 0.4;
        assert!(matches!(
            run_psgld(&ds, &basis, 1.0, &sanitizer, &cfg, None),
            Err(Error::Config(_))
        ));
        let mut cfg = PsgldConfig::defaults(1, 0);
        cfg.minibatch = 5;
        assert!(matches!(
            run_psgld(&ds, &basis, 1.0, &sanitizer, &cfg, None),
            Err(Error::Config(_))
        ));
    }
}
