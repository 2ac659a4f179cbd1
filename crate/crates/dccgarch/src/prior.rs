//! Truncated-normal priors and the joint log-posterior.
//!
//! Every parameter gets an independent normal prior truncated to its
//! support: omega and gamma on (0, inf), the GARCH and correlation weights
//! on (0, 1) with the joint stationarity constraints `alpha_i + beta_i < 1`
//! and `a + b < 1`, and the tail on (2, inf) for nu or (0, inf) for delta.
//! Truncation normalizers depend only on fixed hyper-parameters, so the
//! kernel drops them; Metropolis ratios are unaffected.

use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::model::{log_likelihood, ParamVector, ReturnsMatrix};

/// Truncated-normal hyper-parameters (location, scale) for every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu_omega: Vec<f64>,
    pub sigma_omega: Vec<f64>,
    pub mu_alpha: Vec<f64>,
    pub sigma_alpha: Vec<f64>,
    pub mu_beta: Vec<f64>,
    pub sigma_beta: Vec<f64>,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
    pub mu_gamma: Vec<f64>,
    pub sigma_gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_tail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_tail: Option<f64>,
}

/// Package defaults: all locations 0 except the tail at 8; scales 10
/// everywhere except gamma at 1.25.
pub fn default_priors(k: usize, family: Family) -> PriorSpec {
    PriorSpec {
        mu_omega: vec![0.0; k],
        sigma_omega: vec![10.0; k],
        mu_alpha: vec![0.0; k],
        sigma_alpha: vec![10.0; k],
        mu_beta: vec![0.0; k],
        sigma_beta: vec![10.0; k],
        mu_a: 0.0,
        sigma_a: 10.0,
        mu_b: 0.0,
        sigma_b: 10.0,
        mu_gamma: vec![0.0; k],
        sigma_gamma: vec![1.25; k],
        mu_tail: family.has_tail().then_some(8.0),
        sigma_tail: family.has_tail().then_some(10.0),
    }
}

impl PriorSpec {
    pub fn validate(&self, k: usize, family: Family) -> Result<()> {
        for (name, v) in [
            ("mu_omega", &self.mu_omega),
            ("mu_alpha", &self.mu_alpha),
            ("mu_beta", &self.mu_beta),
            ("mu_gamma", &self.mu_gamma),
        ] {
            if v.len() != k || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be {k} finite values")));
            }
        }
        for (name, v) in [
            ("sigma_omega", &self.sigma_omega),
            ("sigma_alpha", &self.sigma_alpha),
            ("sigma_beta", &self.sigma_beta),
            ("sigma_gamma", &self.sigma_gamma),
        ] {
            if v.len() != k || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::invalid(format!("{name} must be {k} positive scales")));
            }
        }
        if !self.mu_a.is_finite() || !self.mu_b.is_finite() {
            return Err(Error::invalid("mu_a and mu_b must be finite"));
        }
        if !(self.sigma_a > 0.0 && self.sigma_b > 0.0) {
            return Err(Error::invalid("sigma_a and sigma_b must be > 0"));
        }
        if family.has_tail() {
            match (self.mu_tail, self.sigma_tail) {
                (Some(m), Some(s)) if m.is_finite() && s > 0.0 => {}
                _ => {
                    return Err(Error::invalid(
                        "tail prior (mu_tail, sigma_tail) required for this family",
                    ))
                }
            }
        } else if self.mu_tail.is_some() || self.sigma_tail.is_some() {
            return Err(Error::invalid("the skew-normal family takes no tail prior"));
        }
        Ok(())
    }
}

#[inline]
fn kernel(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z
}

/// Whether the point lies in the prior support: strictly inside every
/// truncation interval and satisfying the joint stationarity constraints.
fn in_support(params: &ParamVector) -> bool {
    let k = params.dim();
    for i in 0..k {
        if !(params.omega[i] > 0.0 && params.omega[i].is_finite()) {
            return false;
        }
        if !(params.alpha[i] > 0.0 && params.alpha[i] < 1.0) {
            return false;
        }
        if !(params.beta[i] > 0.0 && params.beta[i] < 1.0) {
            return false;
        }
        if params.alpha[i] + params.beta[i] >= 1.0 {
            return false;
        }
        if !(params.gamma[i] > 0.0 && params.gamma[i].is_finite()) {
            return false;
        }
    }
    if !(params.a > 0.0 && params.a < 1.0 && params.b > 0.0 && params.b < 1.0) {
        return false;
    }
    if params.a + params.b >= 1.0 {
        return false;
    }
    match (params.family, params.tail) {
        (Family::SkewNormal, None) => true,
        (Family::SkewT, Some(nu)) => nu > 2.0 && nu.is_finite(),
        (Family::SkewGed, Some(delta)) => delta > 0.0 && delta.is_finite(),
        _ => false,
    }
}

/// Sum of truncated-normal log-kernels; -inf outside the support.
pub fn log_prior(params: &ParamVector, priors: &PriorSpec) -> f64 {
    if !in_support(params) {
        return f64::NEG_INFINITY;
    }
    let k = params.dim();
    let mut lp = 0.0;
    for i in 0..k {
        lp += kernel(params.omega[i], priors.mu_omega[i], priors.sigma_omega[i]);
        lp += kernel(params.alpha[i], priors.mu_alpha[i], priors.sigma_alpha[i]);
        lp += kernel(params.beta[i], priors.mu_beta[i], priors.sigma_beta[i]);
        lp += kernel(params.gamma[i], priors.mu_gamma[i], priors.sigma_gamma[i]);
    }
    lp += kernel(params.a, priors.mu_a, priors.sigma_a);
    lp += kernel(params.b, priors.mu_b, priors.sigma_b);
    if let Some(tail) = params.tail {
        lp += kernel(
            tail,
            priors.mu_tail.expect("validated"),
            priors.sigma_tail.expect("validated"),
        );
    }
    lp
}

/// Joint log-posterior. A -inf prior short-circuits the likelihood sweep.
pub fn log_posterior(params: &ParamVector, data: &ReturnsMatrix, priors: &PriorSpec) -> f64 {
    let lp = log_prior(params, priors);
    if lp == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    lp + log_likelihood(params, data)
}
