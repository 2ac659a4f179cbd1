//! Posterior summaries and the data behind the usual chain plots: traces,
//! autocorrelations, kernel density estimates, effective sample sizes and
//! posterior volatility/correlation paths.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcmc::{AcceptanceRate, McmcChain};
use crate::model::{covariance_path, ParamVector, ReturnsMatrix};

/// Summary of one marginal posterior.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub ess: f64,
}

/// Chain-level posterior summary.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParamSummary>,
    pub n_sim: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Retained draws after burn-in and thinning.
    pub retained: usize,
    pub acceptance: Vec<f64>,
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Effective sample size by batch means with batch size floor(sqrt(m)).
/// A constant series reports m (nothing to estimate).
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let m = series.len();
    if m < 4 {
        return m as f64;
    }
    let mean = series.iter().sum::<f64>() / m as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    if var == 0.0 {
        return m as f64;
    }
    let bs = (m as f64).sqrt().floor() as usize;
    let nb = m / bs;
    let mut batch_means = Vec::with_capacity(nb);
    for b in 0..nb {
        let chunk = &series[b * bs..(b + 1) * bs];
        batch_means.push(chunk.iter().sum::<f64>() / bs as f64);
    }
    let bm_mean = batch_means.iter().sum::<f64>() / nb as f64;
    let bm_var = batch_means
        .iter()
        .map(|v| (v - bm_mean).powi(2))
        .sum::<f64>()
        / (nb - 1) as f64;
    if bm_var <= 0.0 {
        return m as f64;
    }
    let ess = m as f64 * var / (bs as f64 * bm_var);
    ess.clamp(1e-12, m as f64)
}

/// Applies burn-in and thinning, then summarizes every parameter.
pub fn summarize(chain: &McmcChain, burn_in: usize, thin: usize) -> Result<PosteriorSummary> {
    let retained = chain.retained(burn_in, thin)?;
    let m = retained.nrows();
    if m == 0 {
        return Err(Error::invalid("no draws retained after burn-in/thinning"));
    }
    let mut parameters = Vec::with_capacity(chain.n_params());
    for j in 0..chain.n_params() {
        let col: Vec<f64> = retained.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / m as f64;
        let sd = if m > 1 {
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        parameters.push(ParamSummary {
            name: chain.param_names[j].clone(),
            mean,
            median: quantile_sorted(&sorted, 0.5),
            sd,
            q025: quantile_sorted(&sorted, 0.025),
            q975: quantile_sorted(&sorted, 0.975),
            ess: effective_sample_size(&col),
        });
    }
    let acceptance = match &chain.accept {
        AcceptanceRate::Block(r) => vec![*r],
        AcceptanceRate::PerParameter(rs) => rs.clone(),
    };
    Ok(PosteriorSummary {
        parameters,
        n_sim: chain.n_draws(),
        burn_in,
        thin,
        retained: m,
        acceptance,
    })
}

/// Sample autocorrelation function, normalized to ACF(0) = 1.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::invalid("max_lag must be smaller than the series length"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|v| (v - mean).powi(2)).sum();
    if c0 <= 0.0 {
        return Err(Error::domain("zero-variance series has no autocorrelation"));
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut c = 0.0;
        for t in 0..n - lag {
            c += (series[t] - mean) * (series[t + lag] - mean);
        }
        acf.push(c / c0);
    }
    Ok(acf)
}

/// Gaussian kernel density estimate on a regular grid.
///
/// Bandwidth is Silverman's rule `0.9 min(sd, IQR/1.34) n^{-1/5}` (falling
/// back to the sd when the IQR degenerates); the grid spans
/// `[min - 3h, max + 3h]`.
pub fn density_estimate(series: &[f64], grid: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = series.len();
    if n < 10 {
        return Err(Error::invalid("density estimation needs at least 10 points"));
    }
    if grid < 2 {
        return Err(Error::invalid("grid must have at least 2 points"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 {
        sd.min(iqr / 1.34)
    } else {
        sd
    };
    if spread <= 0.0 {
        return Err(Error::domain("zero-variance series has no density estimate"));
    }
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let step = (hi - lo) / (grid - 1) as f64;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut points = Vec::with_capacity(grid);
    let mut densities = Vec::with_capacity(grid);
    for g in 0..grid {
        let x = lo + g as f64 * step;
        let mut s = 0.0;
        for v in series {
            let z = (x - v) / h;
            s += (-0.5 * z * z).exp();
        }
        points.push(x);
        densities.push(norm * s);
    }
    Ok((points, densities))
}

/// Pointwise posterior mean and 2.5%/97.5% bands of the conditional
/// variance and correlation paths.
#[derive(Debug, Clone)]
pub struct PosteriorPaths {
    /// T x k matrices.
    pub h_mean: DMatrix<f64>,
    pub h_lo: DMatrix<f64>,
    pub h_hi: DMatrix<f64>,
    /// T x k(k-1)/2 matrices, pair order as in `CovariancePath`.
    pub corr_mean: DMatrix<f64>,
    pub corr_lo: DMatrix<f64>,
    pub corr_hi: DMatrix<f64>,
    /// Number of draws actually re-run.
    pub draws_used: usize,
}

/// Re-runs the model recursions for up to `max_draws` equally spaced
/// retained draws and aggregates the variance and correlation paths.
pub fn posterior_paths(
    chain: &McmcChain,
    data: &ReturnsMatrix,
    burn_in: usize,
    thin: usize,
    max_draws: usize,
) -> Result<PosteriorPaths> {
    if max_draws < 1 {
        return Err(Error::invalid("max_draws must be >= 1"));
    }
    let retained = chain.retained(burn_in, thin)?;
    let m = retained.nrows();
    let k = data.dim();
    let family = chain
        .family
        .ok_or_else(|| Error::invalid("chain carries no model family; was it produced by fit?"))?;
    let expected = ParamVector::n_params_for(k, family);
    if chain.n_params() != expected {
        return Err(Error::invalid(format!(
            "chain has {} columns, expected {} for k = {}",
            chain.n_params(),
            expected,
            k
        )));
    }

    let n_used = max_draws.min(m);
    let t_len = data.t_len();
    let n_pairs = k * (k - 1) / 2;
    let mut h_draws: Vec<DMatrix<f64>> = Vec::with_capacity(n_used);
    let mut corr_draws: Vec<DMatrix<f64>> = Vec::with_capacity(n_used);

    for d in 0..n_used {
        // Equally spaced over the retained draws, first included.
        let idx = if n_used == 1 { 0 } else { d * (m - 1) / (n_used - 1) };
        let flat: Vec<f64> = (0..chain.n_params()).map(|j| retained[(idx, j)]).collect();
        let params = ParamVector::from_flat(&flat, k, family);
        let path = covariance_path(&params, data).map_err(|e| {
            Error::domain(format!("recursion failed for retained draw {idx}: {e}"))
        })?;
        h_draws.push(path.h_path);
        corr_draws.push(path.corr_path);
    }

    let aggregate = |mats: &[DMatrix<f64>], cols: usize| {
        let mut mean = DMatrix::zeros(t_len, cols);
        let mut lo = DMatrix::zeros(t_len, cols);
        let mut hi = DMatrix::zeros(t_len, cols);
        let mut buf = vec![0.0; mats.len()];
        for t in 0..t_len {
            for c in 0..cols {
                for (i, m) in mats.iter().enumerate() {
                    buf[i] = m[(t, c)];
                }
                let sum: f64 = buf.iter().sum();
                mean[(t, c)] = sum / buf.len() as f64;
                buf.sort_by(|a, b| a.total_cmp(b));
                lo[(t, c)] = quantile_sorted(&buf, 0.025);
                hi[(t, c)] = quantile_sorted(&buf, 0.975);
            }
        }
        (mean, lo, hi)
    };
    let (h_mean, h_lo, h_hi) = aggregate(&h_draws, k);
    let (corr_mean, corr_lo, corr_hi) = aggregate(&corr_draws, n_pairs);

    Ok(PosteriorPaths {
        h_mean,
        h_lo,
        h_hi,
        corr_mean,
        corr_lo,
        corr_hi,
        draws_used: n_used,
    })
}
