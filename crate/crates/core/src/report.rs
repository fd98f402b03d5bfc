//! Fit output records shared by all mechanisms.

use serde::{Deserialize, Serialize};

use crate::dataset::NormalizationReport;
use crate::error::{Error, Result};
use crate::model::{LinkFunction, ModelParams};

/// Which estimation path produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Non-private regularized maximum likelihood.
    None,
    /// Noise added to the exact optimum.
    OutPert,
    /// Random linear term added to the objective before optimizing.
    ObjPert,
    /// Posterior chain sampler over the sanitized loss.
    Sampler,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Mechanism::None => "none",
            Mechanism::OutPert => "out_pert",
            Mechanism::ObjPert => "obj_pert",
            Mechanism::Sampler => "sampler",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mechanism::None),
            "out_pert" => Ok(Mechanism::OutPert),
            "obj_pert" => Ok(Mechanism::ObjPert),
            "sampler" => Ok(Mechanism::Sampler),
            other => Err(Error::Config(format!(
                "unknown mechanism `{other}` (expected none, out_pert, obj_pert or sampler)"
            ))),
        }
    }
}

/// Optimizer (or chain) diagnostics attached to a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub iterations: usize,
    pub grad_norm: f64,
}

/// A released parameter estimate with the metadata needed to audit and
/// reproduce it.
///
/// Reproduction metadata (seed, objective value, optimizer diagnostics) is
/// itself derived from the data; strip it before handing results to an
/// untrusted party, otherwise the formal privacy guarantee is void.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub mechanism: Mechanism,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective_value: f64,
    pub optimizer: OptimizerInfo,
    pub q: usize,
    pub e: usize,
    pub link: LinkFunction,
    /// Set on sampler fits: the chain approximates its target distribution,
    /// so the privacy guarantee is empirical rather than exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximate_dp: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sanitizer_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sanitizer_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationReport>,
}

impl FitResult {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
        }
    }

    /// Stacked parameter vector `[α; β]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.params().stacked()
    }
}
