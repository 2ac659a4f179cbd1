//! Random-walk Metropolis sampling of the posterior.
//!
//! The automatic pipeline mirrors the estimation procedure of the reference
//! package: find the posterior mode numerically, build a block proposal from
//! the negative inverse Hessian at the mode, and sample all parameters in
//! one block. When the optimizer fails or the Hessian is not positive
//! definite, a per-parameter pilot chain tunes univariate proposal scales
//! into the [0.20, 0.50] acceptance band and its sample covariance seeds the
//! block proposal instead.

mod optim;

pub use optim::{fd_hessian, nelder_mead, SimplexResult};

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::model::{ParamVector, ReturnsMatrix};
use crate::prior::{log_posterior, PriorSpec};

/// Scaling constant for random-walk proposals, applied as `2.38^2 / p`.
pub const PROPOSAL_SCALE: f64 = 2.38;

/// How the sampler chooses its proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Mode/Hessian block proposal with pilot fallback.
    Auto,
    /// One-block sampler with a user-supplied Cholesky factor.
    Block,
    /// Per-parameter sampler with user-supplied scales.
    PerParameter,
}

/// Sampler configuration. `Default` carries the package defaults.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Main chain length.
    pub n_sim: usize,
    pub mode: SamplerMode,
    /// Lower-triangular block proposal factor (required for `Block`).
    pub proposal_chol: Option<DMatrix<f64>>,
    /// Per-parameter proposal standard deviations (required for
    /// `PerParameter`; also used as initial pilot scales when present).
    pub proposal_sds: Option<Vec<f64>>,
    /// Pilot sweeps before the covariance is estimated.
    pub pilot_length: usize,
    /// Sweeps between pilot scale adaptations.
    pub adapt_interval: usize,
    pub target_accept_low: f64,
    pub target_accept_high: f64,
    /// Override of the `2.38^2 / p` block-proposal scale factor.
    pub block_scale: Option<f64>,
    pub seed: u64,
    /// Emit an iteration count every this many iterations of the main chain.
    pub progress_every: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_sim: 10_000,
            mode: SamplerMode::Auto,
            proposal_chol: None,
            proposal_sds: None,
            pilot_length: 2_000,
            adapt_interval: 100,
            target_accept_low: 0.20,
            target_accept_high: 0.50,
            block_scale: None,
            seed: 12_345,
            progress_every: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim < 1 {
            return Err(Error::invalid("n_sim must be >= 1"));
        }
        if !(0.0 < self.target_accept_low
            && self.target_accept_low < self.target_accept_high
            && self.target_accept_high < 1.0)
        {
            return Err(Error::invalid(
                "need 0 < target_accept_low < target_accept_high < 1",
            ));
        }
        if self.pilot_length < 1 || self.adapt_interval < 1 {
            return Err(Error::invalid("pilot_length and adapt_interval must be >= 1"));
        }
        if let Some(s) = self.block_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("block_scale must be > 0"));
            }
        }
        Ok(())
    }
}

/// Acceptance bookkeeping: one rate for the block sampler, one per parameter
/// for the per-parameter samplers.
#[derive(Debug, Clone)]
pub enum AcceptanceRate {
    Block(f64),
    PerParameter(Vec<f64>),
}

impl AcceptanceRate {
    /// Mean acceptance over parameters (the block rate itself for `Block`).
    pub fn overall(&self) -> f64 {
        match self {
            AcceptanceRate::Block(r) => *r,
            AcceptanceRate::PerParameter(rs) => {
                rs.iter().sum::<f64>() / rs.len().max(1) as f64
            }
        }
    }
}

/// Where the main chain's proposal came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalSource {
    HessianAtMode,
    PilotCovariance,
    UserCholesky,
    UserScales,
}

/// Outcome of the mode-finding phase.
#[derive(Debug, Clone)]
pub struct ModeSearchLog {
    pub converged: bool,
    pub hessian_ok: bool,
    pub log_posterior: f64,
    pub evaluations: usize,
}

/// Outcome of the pilot phase.
#[derive(Debug, Clone)]
pub struct PilotLog {
    pub length: usize,
    pub final_scales: Vec<f64>,
    /// Acceptance rates of the last completed adaptation window.
    pub window_accept: Vec<f64>,
}

/// Pilot/tuning history of a run.
#[derive(Debug, Clone, Default)]
pub struct PhaseLog {
    pub mode_search: Option<ModeSearchLog>,
    pub pilot: Option<PilotLog>,
    pub proposal_source: Option<ProposalSource>,
}

/// Matrix of retained draws plus run metadata.
#[derive(Debug, Clone)]
pub struct McmcChain {
    /// n_sim x p draws; row t is the state after iteration t.
    pub draws: DMatrix<f64>,
    pub param_names: Vec<String>,
    pub accept: AcceptanceRate,
    pub phase_log: PhaseLog,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Model error family when the chain came from a model fit; `None` for
    /// chains over arbitrary targets.
    pub family: Option<Family>,
}

impl McmcChain {
    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.draws.ncols()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.param_names.iter().position(|n| n == name)?;
        Some(self.draws.column(idx).iter().copied().collect())
    }

    /// Rows after burn-in and thinning: indices `burn_in, burn_in + thin, ...`.
    pub fn retained(&self, burn_in: usize, thin: usize) -> Result<DMatrix<f64>> {
        if thin < 1 {
            return Err(Error::invalid("thin must be >= 1"));
        }
        if burn_in >= self.n_draws() {
            return Err(Error::invalid(format!(
                "burn-in {} leaves no draws out of {}",
                burn_in,
                self.n_draws()
            )));
        }
        let kept: Vec<usize> = (burn_in..self.n_draws()).step_by(thin).collect();
        let mut out = DMatrix::zeros(kept.len(), self.n_params());
        for (r, &src) in kept.iter().enumerate() {
            for c in 0..self.n_params() {
                out[(r, c)] = self.draws[(src, c)];
            }
        }
        Ok(out)
    }
}

/// Posterior mode, finite-difference Hessian (when every evaluation stayed
/// finite) and a convergence flag covering both.
#[derive(Debug, Clone)]
pub struct ModeSearch {
    pub mode: Vec<f64>,
    pub log_posterior: f64,
    pub hessian: Option<DMatrix<f64>>,
    pub converged: bool,
    pub evaluations: usize,
}

/// Simplex mode search plus finite-difference Hessian on an arbitrary
/// log-target. The budget is `500 p` evaluations at relative tolerance 1e-8.
pub fn find_mode_target<F: FnMut(&[f64]) -> f64>(mut f: F, init: &[f64]) -> Result<ModeSearch> {
    let p = init.len();
    if p == 0 {
        return Err(Error::invalid("empty parameter vector"));
    }
    if !f(init).is_finite() {
        return Err(Error::invalid(
            "initial point has non-finite log-target (outside the support?)",
        ));
    }
    let res = nelder_mead(&mut f, init, 500 * p, 1e-8);
    let hessian = fd_hessian(&mut f, &res.x);
    let hessian_ok = hessian.is_some();
    Ok(ModeSearch {
        mode: res.x,
        log_posterior: res.value,
        hessian,
        converged: res.converged && hessian_ok,
        evaluations: res.evaluations,
    })
}

/// Posterior-mode search for the model. The initial point must lie inside
/// the prior support.
pub fn find_mode(
    data: &ReturnsMatrix,
    priors: &PriorSpec,
    init: &ParamVector,
) -> Result<ModeSearch> {
    let target = posterior_target(data, priors, init)?;
    find_mode_target(target, &init.to_flat())
}

/// Builds the lower Cholesky factor of `(2.38^2 / p) (-H)^{-1}`.
///
/// Returns `None` when `-H` is singular or not positive definite, which is
/// the signal to fall back to the pilot sampler.
pub fn block_proposal_from_hessian(hessian: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    block_proposal_scaled(hessian, None)
}

fn block_proposal_scaled(hessian: &DMatrix<f64>, scale: Option<f64>) -> Option<DMatrix<f64>> {
    let p = hessian.nrows();
    if p == 0 || hessian.ncols() != p {
        return None;
    }
    let sym = (hessian + hessian.transpose()) * 0.5;
    let neg_inv = (-sym).try_inverse()?;
    let factor = scale.unwrap_or(PROPOSAL_SCALE * PROPOSAL_SCALE / p as f64);
    let cov = neg_inv * factor;
    nalgebra::Cholesky::new(cov).map(|c| c.l())
}

fn check_lower_triangular(l: &DMatrix<f64>, p: usize) -> Result<()> {
    if l.nrows() != p || l.ncols() != p {
        return Err(Error::invalid(format!("proposal factor must be {p} x {p}")));
    }
    for i in 0..p {
        if !(l[(i, i)].is_finite() && l[(i, i)] > 0.0) {
            return Err(Error::invalid(
                "proposal factor needs a positive diagonal",
            ));
        }
        for j in (i + 1)..p {
            if l[(i, j)] != 0.0 {
                return Err(Error::invalid("proposal factor must be lower triangular"));
            }
        }
    }
    Ok(())
}

/// One-block random-walk Metropolis on an arbitrary log-target.
pub fn run_block_sampler_target<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    names: &[String],
    proposal_chol: &DMatrix<f64>,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<McmcChain> {
    config.validate()?;
    let p = init.len();
    check_lower_triangular(proposal_chol, p)?;
    let mut lp = f(init);
    if !lp.is_finite() {
        return Err(Error::invalid("initial point has non-finite log-target"));
    }
    let start = Instant::now();
    let mut current = init.to_vec();
    let mut proposal = vec![0.0; p];
    let mut z = vec![0.0; p];
    let mut draws = DMatrix::zeros(config.n_sim, p);
    let mut accepted = 0usize;

    for t in 0..config.n_sim {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..p {
            let mut step = 0.0;
            for j in 0..=i {
                step += proposal_chol[(i, j)] * z[j];
            }
            proposal[i] = current[i] + step;
        }
        let lp_new = f(&proposal);
        let log_u: f64 = rng.random::<f64>().ln();
        if log_u < lp_new - lp {
            current.copy_from_slice(&proposal);
            lp = lp_new;
            accepted += 1;
        }
        for i in 0..p {
            draws[(t, i)] = current[i];
        }
        if let Some(every) = config.progress_every {
            if (t + 1) % every == 0 {
                eprintln!("iteration {}/{}", t + 1, config.n_sim);
            }
        }
    }

    Ok(McmcChain {
        draws,
        param_names: names.to_vec(),
        accept: AcceptanceRate::Block(accepted as f64 / config.n_sim as f64),
        phase_log: PhaseLog::default(),
        elapsed: start.elapsed().as_secs_f64(),
        family: None,
    })
}

/// One-block sampler on the model posterior.
pub fn run_block_sampler(
    data: &ReturnsMatrix,
    priors: &PriorSpec,
    init: &ParamVector,
    proposal_chol: &DMatrix<f64>,
    config: &SamplerConfig,
) -> Result<McmcChain> {
    let target = posterior_target(data, priors, init)?;
    let names = ParamVector::param_names(init.dim(), init.family);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chain =
        run_block_sampler_target(target, &init.to_flat(), &names, proposal_chol, config, &mut rng)?;
    chain.family = Some(init.family);
    Ok(chain)
}

struct PerParamRun {
    chain: McmcChain,
    last_state: Vec<f64>,
    scales: Vec<f64>,
    window_accept: Vec<f64>,
}

/// Core per-parameter random walk: cycles through the coordinates with
/// univariate normal proposals. When `adapt` is set, every
/// `config.adapt_interval` sweeps each scale is doubled if its windowed
/// acceptance rate exceeds the upper target and halved below the lower one.
fn per_parameter_sweeps<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    names: &[String],
    sweeps: usize,
    scales_init: &[f64],
    adapt: bool,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PerParamRun> {
    let p = init.len();
    if scales_init.len() != p {
        return Err(Error::invalid("one proposal scale per parameter required"));
    }
    if scales_init.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("proposal scales must be > 0"));
    }
    let mut lp = f(init);
    if !lp.is_finite() {
        return Err(Error::invalid("initial point has non-finite log-target"));
    }
    let start = Instant::now();
    let mut current = init.to_vec();
    let mut scales = scales_init.to_vec();
    let mut draws = DMatrix::zeros(sweeps, p);
    let mut total_accept = vec![0usize; p];
    let mut window_accept = vec![0usize; p];
    let mut last_window_rate = vec![f64::NAN; p];
    let mut proposal = current.clone();

    for sweep in 0..sweeps {
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            proposal[j] = current[j] + scales[j] * z;
            let lp_new = f(&proposal);
            let log_u: f64 = rng.random::<f64>().ln();
            if log_u < lp_new - lp {
                current[j] = proposal[j];
                lp = lp_new;
                total_accept[j] += 1;
                window_accept[j] += 1;
            } else {
                proposal[j] = current[j];
            }
        }
        for i in 0..p {
            draws[(sweep, i)] = current[i];
        }
        if adapt && (sweep + 1) % config.adapt_interval == 0 {
            for j in 0..p {
                let rate = window_accept[j] as f64 / config.adapt_interval as f64;
                last_window_rate[j] = rate;
                if rate > config.target_accept_high {
                    scales[j] *= 2.0;
                } else if rate < config.target_accept_low {
                    scales[j] *= 0.5;
                }
                window_accept[j] = 0;
            }
        }
        if !adapt {
            if let Some(every) = config.progress_every {
                if (sweep + 1) % every == 0 {
                    eprintln!("iteration {}/{}", sweep + 1, sweeps);
                }
            }
        }
    }

    let rates: Vec<f64> = total_accept
        .iter()
        .map(|&a| a as f64 / sweeps as f64)
        .collect();
    // If no window completed, report the overall per-parameter rates.
    let window = if last_window_rate.iter().any(|r| r.is_nan()) {
        rates.clone()
    } else {
        last_window_rate
    };
    Ok(PerParamRun {
        chain: McmcChain {
            draws,
            param_names: names.to_vec(),
            accept: AcceptanceRate::PerParameter(rates),
            phase_log: PhaseLog::default(),
            elapsed: start.elapsed().as_secs_f64(),
            family: None,
        },
        last_state: current,
        scales,
        window_accept: window,
    })
}

/// Pilot result: the tuning chain and the block-proposal factor derived from
/// its sample covariance.
pub struct PilotOutcome {
    pub chain: McmcChain,
    pub proposal_chol: DMatrix<f64>,
    pub last_state: Vec<f64>,
    pub log: PilotLog,
}

/// Per-parameter pilot with acceptance-rate tuning; returns the pilot chain
/// and the Cholesky factor of `(2.38^2 / p) S` with `S` the pilot sample
/// covariance (ridged when the factorization fails).
pub fn run_pilot_target<F: FnMut(&[f64]) -> f64>(
    f: F,
    init: &[f64],
    names: &[String],
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PilotOutcome> {
    config.validate()?;
    let p = init.len();
    let scales_init = match &config.proposal_sds {
        Some(s) => s.clone(),
        None => vec![0.1; p],
    };
    let run = per_parameter_sweeps(
        f,
        init,
        names,
        config.pilot_length,
        &scales_init,
        true,
        config,
        rng,
    )?;

    // Sample covariance of the pilot draws.
    let m = run.chain.n_draws();
    let draws = &run.chain.draws;
    let means: Vec<f64> = (0..p).map(|j| draws.column(j).sum() / m as f64).collect();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let mut s = 0.0;
            for t in 0..m {
                s += (draws[(t, i)] - means[i]) * (draws[(t, j)] - means[j]);
            }
            let v = s / (m as f64 - 1.0).max(1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let factor = config
        .block_scale
        .unwrap_or(PROPOSAL_SCALE * PROPOSAL_SCALE / p as f64);
    let scaled = cov * factor;
    let mut ridge = 1e-8 * scaled.trace() / p as f64;
    let mut attempt = scaled.clone();
    let chol = loop {
        if let Some(c) = nalgebra::Cholesky::new(attempt.clone()) {
            break c.l();
        }
        if ridge <= 0.0 || !ridge.is_finite() {
            return Err(Error::domain(
                "pilot covariance is degenerate; cannot build a block proposal",
            ));
        }
        attempt = &scaled + DMatrix::identity(p, p) * ridge;
        ridge *= 10.0;
        if ridge > 1e6 * (scaled.trace().abs() + 1.0) {
            return Err(Error::domain(
                "pilot covariance could not be regularized into a proposal",
            ));
        }
    };

    let log = PilotLog {
        length: config.pilot_length,
        final_scales: run.scales.clone(),
        window_accept: run.window_accept.clone(),
    };
    Ok(PilotOutcome {
        chain: run.chain,
        proposal_chol: chol,
        last_state: run.last_state,
        log,
    })
}

/// Pilot sampler on the model posterior.
pub fn run_pilot(
    data: &ReturnsMatrix,
    priors: &PriorSpec,
    init: &ParamVector,
    config: &SamplerConfig,
) -> Result<(McmcChain, DMatrix<f64>)> {
    let target = posterior_target(data, priors, init)?;
    let names = ParamVector::param_names(init.dim(), init.family);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut outcome = run_pilot_target(target, &init.to_flat(), &names, config, &mut rng)?;
    outcome.chain.family = Some(init.family);
    Ok((outcome.chain, outcome.proposal_chol))
}

/// Validates the (data, priors, init) triple and builds the flat-vector
/// posterior closure.
fn posterior_target<'a>(
    data: &'a ReturnsMatrix,
    priors: &'a PriorSpec,
    init: &ParamVector,
) -> Result<impl FnMut(&[f64]) -> f64 + 'a> {
    let k = data.dim();
    let family = init.family;
    if init.dim() != k {
        return Err(Error::invalid("initial values and data dimension disagree"));
    }
    priors.validate(k, family)?;
    init.validate()?;
    if log_posterior(init, data, priors) == f64::NEG_INFINITY {
        return Err(Error::invalid(
            "initial values lie outside the posterior support",
        ));
    }
    Ok(move |flat: &[f64]| {
        let params = ParamVector::from_flat(flat, k, family);
        log_posterior(&params, data, priors)
    })
}

/// Full automatic pipeline on an arbitrary log-target.
pub fn fit_target<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    names: &[String],
    config: &SamplerConfig,
) -> Result<McmcChain> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut phase = PhaseLog::default();

    let mut chain = match config.mode {
        SamplerMode::Block => {
            let chol = config.proposal_chol.as_ref().ok_or_else(|| {
                Error::invalid("block mode needs a proposal Cholesky factor (cholCov)")
            })?;
            phase.proposal_source = Some(ProposalSource::UserCholesky);
            run_block_sampler_target(&mut f, init, names, chol, config, &mut rng)?
        }
        SamplerMode::PerParameter => {
            let sds = config.proposal_sds.as_ref().ok_or_else(|| {
                Error::invalid("per-parameter mode needs proposal scales (sdSim)")
            })?;
            phase.proposal_source = Some(ProposalSource::UserScales);
            per_parameter_sweeps(
                &mut f,
                init,
                names,
                config.n_sim,
                sds,
                false,
                config,
                &mut rng,
            )?
            .chain
        }
        SamplerMode::Auto => {
            let search = find_mode_target(&mut f, init)?;
            let proposal = search
                .hessian
                .as_ref()
                .filter(|_| search.converged)
                .and_then(|h| block_proposal_scaled(h, config.block_scale));
            phase.mode_search = Some(ModeSearchLog {
                converged: search.converged,
                hessian_ok: search.hessian.is_some(),
                log_posterior: search.log_posterior,
                evaluations: search.evaluations,
            });
            match proposal {
                Some(chol) => {
                    phase.proposal_source = Some(ProposalSource::HessianAtMode);
                    run_block_sampler_target(
                        &mut f,
                        &search.mode,
                        names,
                        &chol,
                        config,
                        &mut rng,
                    )?
                }
                None => {
                    let pilot = run_pilot_target(&mut f, init, names, config, &mut rng)?;
                    phase.pilot = Some(pilot.log.clone());
                    phase.proposal_source = Some(ProposalSource::PilotCovariance);
                    run_block_sampler_target(
                        &mut f,
                        &pilot.last_state,
                        names,
                        &pilot.proposal_chol,
                        config,
                        &mut rng,
                    )?
                }
            }
        }
    };

    chain.phase_log = phase;
    chain.elapsed = start.elapsed().as_secs_f64();
    Ok(chain)
}

/// Bayesian fit of the model: validates inputs, then runs the configured
/// sampling pipeline and returns the main chain.
pub fn fit(
    data: &ReturnsMatrix,
    priors: &PriorSpec,
    init: &ParamVector,
    config: &SamplerConfig,
) -> Result<McmcChain> {
    config.validate()?;
    let target = posterior_target(data, priors, init)?;
    let names = ParamVector::param_names(init.dim(), init.family);
    let mut chain = fit_target(target, &init.to_flat(), &names, config)?;
    chain.family = Some(init.family);
    Ok(chain)
}

/// Convenience entry point with default priors and initial values.
pub fn fit_default(data: &ReturnsMatrix, family: Family, config: &SamplerConfig) -> Result<McmcChain> {
    let priors = crate::prior::default_priors(data.dim(), family);
    let init = ParamVector::default_init(data.dim(), family);
    fit(data, &priors, &init, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate_path;
    use crate::prior::default_priors;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    fn std_normal_target(p: usize) -> impl FnMut(&[f64]) -> f64 {
        move |x: &[f64]| -0.5 * x.iter().take(p).map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn default_initial_values_match_the_synopsis() {
        let init = ParamVector::default_init(3, Family::SkewT);
        assert_eq!(init.omega, vec![0.03; 3]);
        assert_eq!(init.alpha, vec![0.03; 3]);
        assert_eq!(init.beta, vec![0.8; 3]);
        assert_eq!(init.a, 0.03);
        assert_eq!(init.b, 0.8);
        assert_eq!(init.gamma, vec![1.0; 3]);
        assert_eq!(init.tail, Some(8.0));
        assert_eq!(
            ParamVector::default_init(2, Family::SkewNormal).tail,
            None
        );
    }

    #[test]
    fn hessian_proposal_scale_rule() {
        let h = DMatrix::identity(4, 4) * -1.0;
        let l = block_proposal_from_hessian(&h).unwrap();
        for i in 0..4 {
            assert!((l[(i, i)] - 2.38 / 2.0).abs() < 1e-12);
            for j in 0..4 {
                if i != j {
                    assert!(l[(i, j)].abs() < 1e-12);
                }
            }
        }
        assert!(block_proposal_from_hessian(&DMatrix::identity(4, 4)).is_none());
        assert!(block_proposal_from_hessian(&DMatrix::zeros(3, 3)).is_none());
    }

    #[test]
    fn mode_search_on_simulated_data_beats_the_truth() {
        let truth = ParamVector {
            omega: vec![0.1],
            alpha: vec![0.1],
            beta: vec![0.8],
            a: 0.05,
            b: 0.85,
            gamma: vec![1.0],
            tail: None,
            family: Family::SkewNormal,
        };
        let data = simulate_path(&truth, None, 200, 9).unwrap();
        let priors = default_priors(1, Family::SkewNormal);
        let init = ParamVector::default_init(1, Family::SkewNormal);
        let search = find_mode(&data, &priors, &init).unwrap();
        let at_truth = crate::prior::log_posterior(&truth, &data, &priors);
        assert!(
            search.log_posterior >= at_truth,
            "mode {} vs truth {}",
            search.log_posterior,
            at_truth
        );
    }

    #[test]
    fn find_mode_rejects_out_of_support_start() {
        let data = simulate_path(
            &ParamVector::default_init(1, Family::SkewNormal),
            None,
            50,
            1,
        )
        .unwrap();
        let priors = default_priors(1, Family::SkewNormal);
        let mut init = ParamVector::default_init(1, Family::SkewNormal);
        init.omega[0] = -1.0;
        assert!(find_mode(&data, &priors, &init).is_err());
    }

    #[test]
    fn pilot_tunes_acceptance_into_the_band() {
        let config = SamplerConfig {
            pilot_length: 2_000,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let outcome =
            run_pilot_target(std_normal_target(3), &[0.5, -0.5, 0.2], &names(3), &config, &mut rng)
                .unwrap();
        for (j, rate) in outcome.log.window_accept.iter().enumerate() {
            assert!(
                (0.20..=0.50).contains(rate),
                "parameter {j} landed at {rate}"
            );
        }
        // Proposal factor is lower triangular with positive diagonal.
        check_lower_triangular(&outcome.proposal_chol, 3).unwrap();
    }

    #[test]
    fn always_accepting_stub_doubles_the_scale_every_window() {
        let config = SamplerConfig {
            pilot_length: 500,
            adapt_interval: 100,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let outcome =
            run_pilot_target(|_: &[f64]| 0.0, &[0.0], &names(1), &config, &mut rng).unwrap();
        // Five windows, each doubling from the 0.1 start.
        assert!((outcome.log.final_scales[0] - 0.1 * 32.0).abs() < 1e-12);
        assert_eq!(outcome.log.window_accept[0], 1.0);
    }

    #[test]
    fn pilot_covariance_approximates_the_target_covariance() {
        let config = SamplerConfig {
            pilot_length: 5_000,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let outcome =
            run_pilot_target(std_normal_target(2), &[0.0, 0.0], &names(2), &config, &mut rng)
                .unwrap();
        // Recover S from L L' / (2.38^2 / p).
        let l = &outcome.proposal_chol;
        let cov = l * l.transpose() / (PROPOSAL_SCALE * PROPOSAL_SCALE / 2.0);
        assert!((cov[(0, 0)] - 1.0).abs() < 0.2, "var {}", cov[(0, 0)]);
        assert!((cov[(1, 1)] - 1.0).abs() < 0.2, "var {}", cov[(1, 1)]);
        assert!(cov[(0, 1)].abs() < 0.2);
    }

    #[test]
    fn block_sampler_acceptance_matches_an_independent_reference() {
        // Reference: a straight-line random-walk Metropolis on the same
        // target written directly in the test.
        let p = 2;
        let n = 100_000;
        let config = SamplerConfig {
            n_sim: n,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let chain = run_block_sampler_target(
            std_normal_target(p),
            &[0.0, 0.0],
            &names(p),
            &DMatrix::identity(p, p),
            &config,
            &mut rng,
        )
        .unwrap();
        let AcceptanceRate::Block(rate) = chain.accept else {
            panic!("expected block rate")
        };

        let mut ref_rng = ChaCha8Rng::seed_from_u64(1234);
        let mut x = [0.0f64, 0.0];
        let mut lp = 0.0f64;
        let mut accepted = 0usize;
        for _ in 0..n {
            let y = [
                x[0] + ref_rng.sample::<f64, _>(StandardNormal),
                x[1] + ref_rng.sample::<f64, _>(StandardNormal),
            ];
            let lp_new = -0.5 * (y[0] * y[0] + y[1] * y[1]);
            if ref_rng.random::<f64>().ln() < lp_new - lp {
                x = y;
                lp = lp_new;
                accepted += 1;
            }
        }
        let reference = accepted as f64 / n as f64;
        assert!(
            (rate - reference).abs() < 0.05,
            "sampler {rate} vs reference {reference}"
        );
    }

    #[test]
    fn zero_proposal_keeps_the_chain_at_its_start() {
        let config = SamplerConfig {
            n_sim: 200,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Degenerate factor: positive diagonal but vanishing scale.
        let chol = DMatrix::identity(2, 2) * 1e-300;
        let chain = run_block_sampler_target(
            std_normal_target(2),
            &[0.7, -0.3],
            &names(2),
            &chol,
            &config,
            &mut rng,
        )
        .unwrap();
        let AcceptanceRate::Block(rate) = chain.accept else {
            panic!()
        };
        assert!(rate > 0.999, "rate {rate}");
        for t in 0..chain.n_draws() {
            assert!((chain.draws[(t, 0)] - 0.7).abs() < 1e-10);
            assert!((chain.draws[(t, 1)] + 0.3).abs() < 1e-10);
        }
    }

    #[test]
    fn block_sampler_moments_match_the_stub_target() {
        let n = 100_000;
        let config = SamplerConfig {
            n_sim: n,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chain = run_block_sampler_target(
            std_normal_target(2),
            &[0.0, 0.0],
            &names(2),
            &DMatrix::identity(2, 2),
            &config,
            &mut rng,
        )
        .unwrap();
        for j in 0..2 {
            let col: Vec<f64> = chain.draws.column(j).iter().copied().collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((var - 1.0).abs() < 0.1, "var {var}");
        }
    }

    #[test]
    fn auto_pipeline_falls_back_to_the_pilot_on_a_flat_direction() {
        // The target ignores x1, so the Hessian is singular and the block
        // proposal from the mode cannot be built.
        let config = SamplerConfig {
            n_sim: 500,
            pilot_length: 400,
            ..SamplerConfig::default()
        };
        let chain = fit_target(
            |x: &[f64]| -0.5 * x[0] * x[0],
            &[0.4, 0.4],
            &names(2),
            &config,
        )
        .unwrap();
        assert_eq!(
            chain.phase_log.proposal_source,
            Some(ProposalSource::PilotCovariance)
        );
        assert!(chain.phase_log.pilot.is_some());
        assert_eq!(chain.n_draws(), 500);
    }

    #[test]
    fn block_mode_requires_a_user_factor() {
        let config = SamplerConfig {
            mode: SamplerMode::Block,
            ..SamplerConfig::default()
        };
        let err = fit_target(std_normal_target(2), &[0.0, 0.0], &names(2), &config)
            .expect_err("must fail without cholCov");
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn per_parameter_mode_requires_scales_and_reports_per_param_rates() {
        let config = SamplerConfig {
            mode: SamplerMode::PerParameter,
            n_sim: 400,
            ..SamplerConfig::default()
        };
        assert!(fit_target(std_normal_target(2), &[0.0, 0.0], &names(2), &config).is_err());

        let config = SamplerConfig {
            proposal_sds: Some(vec![2.4, 2.4]),
            ..config
        };
        let chain = fit_target(std_normal_target(2), &[0.0, 0.0], &names(2), &config).unwrap();
        let AcceptanceRate::PerParameter(rates) = &chain.accept else {
            panic!("expected per-parameter rates")
        };
        assert_eq!(rates.len(), 2);
        assert!(rates.iter().all(|r| *r > 0.0 && *r < 1.0));
    }

    #[test]
    fn identical_seeds_give_bit_identical_chains() {
        let truth = ParamVector {
            omega: vec![0.1],
            alpha: vec![0.1],
            beta: vec![0.8],
            a: 0.05,
            b: 0.85,
            gamma: vec![1.0],
            tail: None,
            family: Family::SkewNormal,
        };
        let data = simulate_path(&truth, None, 120, 13).unwrap();
        let priors = default_priors(1, Family::SkewNormal);
        let init = ParamVector::default_init(1, Family::SkewNormal);
        let config = SamplerConfig {
            n_sim: 300,
            pilot_length: 200,
            seed: 77,
            ..SamplerConfig::default()
        };
        let a = fit(&data, &priors, &init, &config).unwrap();
        let b = fit(&data, &priors, &init, &config).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = fit(
            &data,
            &priors,
            &init,
            &SamplerConfig {
                seed: 78,
                ..config
            },
        )
        .unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn every_retained_draw_satisfies_the_model_invariants() {
        let truth = ParamVector {
            omega: vec![0.08, 0.12],
            alpha: vec![0.08, 0.05],
            beta: vec![0.82, 0.85],
            a: 0.06,
            b: 0.88,
            gamma: vec![0.9, 1.1],
            tail: None,
            family: Family::SkewNormal,
        };
        let data = simulate_path(&truth, None, 300, 17).unwrap();
        let priors = default_priors(2, Family::SkewNormal);
        let init = ParamVector::default_init(2, Family::SkewNormal);
        let config = SamplerConfig {
            n_sim: 400,
            pilot_length: 300,
            seed: 5,
            ..SamplerConfig::default()
        };
        let chain = fit(&data, &priors, &init, &config).unwrap();
        for t in 0..chain.n_draws() {
            let flat: Vec<f64> = (0..chain.n_params()).map(|j| chain.draws[(t, j)]).collect();
            let params = ParamVector::from_flat(&flat, 2, Family::SkewNormal);
            assert!(params.is_valid(), "draw {t} violates invariants: {flat:?}");
        }
        // Acceptance accounting is exact.
        let AcceptanceRate::Block(rate) = chain.accept else {
            panic!()
        };
        let mut changes = 0usize;
        for t in 1..chain.n_draws() {
            if (0..chain.n_params()).any(|j| chain.draws[(t, j)] != chain.draws[(t - 1, j)]) {
                changes += 1;
            }
        }
        // Accepted moves can at most equal recorded state changes + 1
        // (the first iteration may accept away from the start).
        let n = chain.n_draws() as f64;
        assert!(rate >= changes as f64 / n);
        assert!(rate <= (changes + 1) as f64 / n + 1e-12);
    }

    #[test]
    fn retained_slicing_composes() {
        let mut draws = DMatrix::zeros(10, 1);
        for t in 0..10 {
            draws[(t, 0)] = t as f64;
        }
        let chain = McmcChain {
            draws,
            param_names: names(1),
            accept: AcceptanceRate::Block(0.5),
            phase_log: PhaseLog::default(),
            elapsed: 0.0,
            family: None,
        };
        let r = chain.retained(4, 2).unwrap();
        assert_eq!(r.nrows(), 3);
        assert_eq!(r[(0, 0)], 4.0);
        assert_eq!(r[(1, 0)], 6.0);
        assert_eq!(r[(2, 0)], 8.0);
        assert!(chain.retained(10, 1).is_err());
        assert!(chain.retained(0, 0).is_err());
    }
}
