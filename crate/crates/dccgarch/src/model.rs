//! Model core: conditional-variance and correlation recursions, the
//! full-sample log-likelihood and the path simulator.
//!
//! Each series follows a GARCH(1,1) variance recursion
//! `h_t = omega + alpha * y_{t-1}^2 + beta * h_{t-1}`. Correlations evolve
//! through the pseudo-covariance recursion
//! `Q_t = (1 - a - b) R_bar + a u_{t-1} u_{t-1}' + b Q_{t-1}` on the
//! standardized returns `u_t = y_t / sqrt(h_t)`, normalized per step to a
//! correlation matrix `R_t`. The conditional covariance of `y_t` is
//! `H_t = D_t R_t D_t` with `D_t = diag(sqrt(h_t))`.
//!
//! Conventions fixed here (and relied on by the sampler and the tests):
//! - recursion initialization: `h_1` is the per-series sample variance and
//!   `Q_1 = R_bar`;
//! - `R_bar` is obtained by correlation targeting: the sample correlation of
//!   the standardized returns implied by the current parameters, held fixed
//!   within one likelihood evaluation;
//! - the covariance square root is `H_t^{1/2} = D_t L_t` with `L_t` the lower
//!   Cholesky factor of `R_t`, used identically by the likelihood and the
//!   simulator (with skewed errors the density value depends on this choice).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{skew_sample_with, Family, SkewDensity, SkewFamily};
use crate::error::{Error, Result};

/// T x k matrix of zero-mean log-returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    values: DMatrix<f64>,
    series_names: Vec<String>,
}

impl ReturnsMatrix {
    /// Validates shape (T >= 2, k >= 1) and finiteness.
    pub fn new(values: DMatrix<f64>, series_names: Vec<String>) -> Result<Self> {
        if values.nrows() < 2 || values.ncols() < 1 {
            return Err(Error::invalid(format!(
                "returns matrix must be at least 2 x 1, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        if series_names.len() != values.ncols() {
            return Err(Error::invalid("one series name per column required"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("returns matrix contains non-finite entries"));
        }
        Ok(ReturnsMatrix { values, series_names })
    }

    /// Builds from column vectors with generated names `V1..Vk`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("no columns given"));
        }
        let t_len = columns[0].len();
        if columns.iter().any(|c| c.len() != t_len) {
            return Err(Error::invalid("columns have unequal lengths"));
        }
        let values = DMatrix::from_fn(t_len, columns.len(), |i, j| columns[j][i]);
        let names = (1..=columns.len()).map(|j| format!("V{j}")).collect();
        ReturnsMatrix::new(values, names)
    }

    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    /// Per-series sample variance (demeaned, divided by T - 1).
    pub fn sample_variances(&self) -> Vec<f64> {
        let t_len = self.t_len() as f64;
        (0..self.dim())
            .map(|i| {
                let col = self.values.column(i);
                let mean = col.sum() / t_len;
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t_len - 1.0)
            })
            .collect()
    }
}

/// Full parameter set of the model plus its error-family tag.
///
/// Flat layout (used by the sampler and the chain output):
/// `omega_1..k, alpha_1..k, beta_1..k, a, b, gamma_1..k, tail?`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub gamma: Vec<f64>,
    pub tail: Option<f64>,
    pub family: Family,
}

impl ParamVector {
    /// Default initial values: omega 0.03, alpha 0.03, beta 0.8, a 0.03,
    /// b 0.8, gamma 1, tail 8 when the family has one.
    pub fn default_init(k: usize, family: Family) -> Self {
        ParamVector {
            omega: vec![0.03; k],
            alpha: vec![0.03; k],
            beta: vec![0.8; k],
            a: 0.03,
            b: 0.8,
            gamma: vec![1.0; k],
            tail: family.has_tail().then_some(8.0),
            family,
        }
    }

    /// Number of series k.
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Length of the flat parameter vector: 4k + 2, plus 1 for the tail.
    pub fn n_params(&self) -> usize {
        Self::n_params_for(self.dim(), self.family)
    }

    pub fn n_params_for(k: usize, family: Family) -> usize {
        4 * k + 2 + usize::from(family.has_tail())
    }

    /// Checks the model invariants. The correlation recursion weights may be
    /// zero (the constant-correlation special case); the prior support is
    /// stricter and enforces positivity during sampling.
    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if k == 0 {
            return Err(Error::invalid("parameter vector has no series"));
        }
        if self.alpha.len() != k || self.beta.len() != k || self.gamma.len() != k {
            return Err(Error::invalid("omega/alpha/beta/gamma lengths differ"));
        }
        for i in 0..k {
            let (w, al, be, g) = (self.omega[i], self.alpha[i], self.beta[i], self.gamma[i]);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!("omega_{} must be > 0", i + 1)));
            }
            if !(al.is_finite() && (0.0..1.0).contains(&al)) {
                return Err(Error::invalid(format!("alpha_{} must be in [0, 1)", i + 1)));
            }
            if !(be.is_finite() && (0.0..1.0).contains(&be)) {
                return Err(Error::invalid(format!("beta_{} must be in [0, 1)", i + 1)));
            }
            if al + be >= 1.0 {
                return Err(Error::invalid(format!(
                    "alpha_{i1} + beta_{i1} must be < 1",
                    i1 = i + 1
                )));
            }
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid(format!("gamma_{} must be > 0", i + 1)));
            }
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.a >= 0.0 && self.b >= 0.0) {
            return Err(Error::invalid("correlation weights a, b must be >= 0"));
        }
        if self.a + self.b >= 1.0 {
            return Err(Error::invalid("a + b must be < 1"));
        }
        self.family.check_tail(self.tail)?;
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// The error distribution of this parameter set.
    pub fn skew_family(&self) -> SkewFamily {
        SkewFamily {
            family: self.family,
            gamma: self.gamma.clone(),
            tail: self.tail,
        }
    }

    /// Column labels of the flat layout.
    pub fn param_names(k: usize, family: Family) -> Vec<String> {
        let mut names = Vec::with_capacity(Self::n_params_for(k, family));
        for i in 1..=k {
            names.push(format!("omega_{i}"));
        }
        for i in 1..=k {
            names.push(format!("alpha_{i}"));
        }
        for i in 1..=k {
            names.push(format!("beta_{i}"));
        }
        names.push("a".to_string());
        names.push("b".to_string());
        for i in 1..=k {
            names.push(format!("gamma_{i}"));
        }
        if family.has_tail() {
            names.push("tail".to_string());
        }
        names
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        flat.extend_from_slice(&self.omega);
        flat.extend_from_slice(&self.alpha);
        flat.extend_from_slice(&self.beta);
        flat.push(self.a);
        flat.push(self.b);
        flat.extend_from_slice(&self.gamma);
        if let Some(tail) = self.tail {
            flat.push(tail);
        }
        flat
    }

    /// Rebuilds from the flat layout. Panics on a length mismatch; value
    /// constraints are deliberately not checked here (the posterior maps
    /// support violations to -inf).
    pub fn from_flat(flat: &[f64], k: usize, family: Family) -> Self {
        assert_eq!(flat.len(), Self::n_params_for(k, family), "flat length mismatch");
        ParamVector {
            omega: flat[0..k].to_vec(),
            alpha: flat[k..2 * k].to_vec(),
            beta: flat[2 * k..3 * k].to_vec(),
            a: flat[3 * k],
            b: flat[3 * k + 1],
            gamma: flat[3 * k + 2..4 * k + 2].to_vec(),
            tail: family.has_tail().then(|| flat[4 * k + 2]),
            family,
        }
    }
}

/// Per-time-step recursion state.
#[derive(Debug, Clone)]
pub struct RecursionState {
    /// Conditional variances h_{ii,t}.
    pub h: Vec<f64>,
    /// Pseudo-covariance matrix Q_t.
    pub q: DMatrix<f64>,
    /// Correlation matrix R_t.
    pub r: DMatrix<f64>,
    /// Standardized returns u_t.
    pub u: Vec<f64>,
    /// Unconditional correlation target of the Q recursion.
    pub r_bar: DMatrix<f64>,
}

impl RecursionState {
    /// State at t = 1: h is the per-series sample variance, Q = R_bar.
    pub fn initial(data: &ReturnsMatrix, r_bar: DMatrix<f64>) -> Result<Self> {
        let k = data.dim();
        check_correlation_target(&r_bar, k)?;
        let h = data.sample_variances();
        for (i, hv) in h.iter().enumerate() {
            if !(hv.is_finite() && *hv > 0.0) {
                return Err(Error::domain(format!(
                    "series {} has zero sample variance; cannot initialize recursion",
                    i + 1
                )));
            }
        }
        let u: Vec<f64> = (0..k).map(|i| data.values()[(0, i)] / h[i].sqrt()).collect();
        Ok(RecursionState {
            q: r_bar.clone(),
            r: r_bar.clone(),
            h,
            u,
            r_bar,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.h.len();
        if self.u.len() != k {
            return Err(Error::invalid("state dimensions disagree"));
        }
        if self.h.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::invalid("conditional variances must be > 0"));
        }
        check_symmetric(&self.q, k, "Q")?;
        check_correlation_target(&self.r, k)?;
        check_correlation_target(&self.r_bar, k)?;
        Ok(())
    }
}

fn check_symmetric(m: &DMatrix<f64>, k: usize, name: &str) -> Result<()> {
    if m.nrows() != k || m.ncols() != k {
        return Err(Error::invalid(format!("{name} must be {k} x {k}")));
    }
    for i in 0..k {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Unit diagonal, symmetry, off-diagonals in [-1, 1], positive definiteness.
fn check_correlation_target(r: &DMatrix<f64>, k: usize) -> Result<()> {
    check_symmetric(r, k, "correlation matrix")?;
    for i in 0..k {
        if (r[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("correlation matrix diagonal must be 1"));
        }
        for j in 0..i {
            if r[(i, j)].abs() > 1.0 + 1e-12 {
                return Err(Error::invalid("correlation entries must lie in [-1, 1]"));
            }
        }
    }
    let mut buf = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            buf[i * k + j] = r[(i, j)];
        }
    }
    let mut chol = vec![0.0; k * k];
    if !cholesky_lower(&buf, k, &mut chol) {
        return Err(Error::domain("correlation matrix is not positive definite"));
    }
    Ok(())
}

/// Output of a full recursion sweep.
#[derive(Debug, Clone)]
pub struct CovariancePath {
    /// T x k conditional variances.
    pub h_path: DMatrix<f64>,
    /// T x k(k-1)/2 conditional correlations, pairs (i, j), i < j, in
    /// lexicographic order.
    pub corr_path: DMatrix<f64>,
    /// Per-observation log-density contributions.
    pub loglik_terms: Vec<f64>,
}

impl CovariancePath {
    pub fn log_likelihood(&self) -> f64 {
        self.loglik_terms.iter().sum()
    }

    /// Conditional covariance h_{ij,t} reconstructed from the stored paths.
    pub fn covariance(&self, t: usize, i: usize, j: usize) -> f64 {
        let k = self.h_path.ncols();
        if i == j {
            return self.h_path[(t, i)];
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let idx = pair_index(lo, hi, k);
        self.corr_path[(t, idx)] * (self.h_path[(t, i)] * self.h_path[(t, j)]).sqrt()
    }
}

/// Column index of the pair (i, j), i < j, in the flattened correlation path.
pub fn pair_index(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// One GARCH(1,1) variance update.
pub fn garch_variance_step(
    omega: f64,
    alpha: f64,
    beta: f64,
    y_prev: f64,
    h_prev: f64,
) -> Result<f64> {
    for (name, v) in [
        ("omega", omega),
        ("alpha", alpha),
        ("beta", beta),
        ("y_prev", y_prev),
        ("h_prev", h_prev),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{name} is not finite")));
        }
    }
    if omega <= 0.0 || alpha < 0.0 || beta < 0.0 || h_prev <= 0.0 {
        return Err(Error::invalid(
            "need omega > 0, alpha >= 0, beta >= 0, h_prev > 0",
        ));
    }
    Ok(omega + alpha * y_prev * y_prev + beta * h_prev)
}

/// One pseudo-covariance update of the correlation recursion.
pub fn dcc_q_step(
    a: f64,
    b: f64,
    r_bar: &DMatrix<f64>,
    u_prev: &[f64],
    q_prev: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let k = u_prev.len();
    if r_bar.nrows() != k || r_bar.ncols() != k || q_prev.nrows() != k || q_prev.ncols() != k {
        return Err(Error::invalid("dimension mismatch in Q update"));
    }
    if !(a >= 0.0 && b >= 0.0 && a + b < 1.0) {
        return Err(Error::invalid("need a >= 0, b >= 0, a + b < 1"));
    }
    let mut q = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            q[(i, j)] = (1.0 - a - b) * r_bar[(i, j)] + a * u_prev[i] * u_prev[j]
                + b * q_prev[(i, j)];
        }
    }
    Ok(q)
}

/// Normalizes a pseudo-covariance matrix to a correlation matrix:
/// `diag(Q)^{-1/2} Q diag(Q)^{-1/2}`.
pub fn correlation_from_q(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = q.nrows();
    check_symmetric(q, k, "Q")?;
    let mut inv_sd = vec![0.0; k];
    for i in 0..k {
        if q[(i, i)] <= 0.0 {
            return Err(Error::domain(format!(
                "Q has non-positive diagonal entry at {}",
                i + 1
            )));
        }
        inv_sd[i] = 1.0 / q[(i, i)].sqrt();
    }
    let mut r = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            r[(i, j)] = if i == j {
                1.0
            } else {
                q[(i, j)] * inv_sd[i] * inv_sd[j]
            };
        }
    }
    Ok(r)
}

/// Lower Cholesky factorization into `out` (row-major k x k). Returns false
/// when the matrix is not positive definite.
fn cholesky_lower(m: &[f64], k: usize, out: &mut [f64]) -> bool {
    out.fill(0.0);
    for i in 0..k {
        for j in 0..=i {
            let mut s = m[i * k + j];
            for l in 0..j {
                s -= out[i * k + l] * out[j * k + l];
            }
            if i == j {
                if !(s.is_finite() && s > 0.0) {
                    return false;
                }
                out[i * k + i] = s.sqrt();
            } else {
                out[i * k + j] = s / out[j * k + j];
            }
        }
    }
    true
}

/// Solves L e = u for e with L lower triangular (row-major).
fn forward_solve(l: &[f64], k: usize, u: &[f64], out: &mut [f64]) {
    for i in 0..k {
        let mut s = u[i];
        for j in 0..i {
            s -= l[i * k + j] * out[j];
        }
        out[i] = s / l[i * k + i];
    }
}

/// Runs the variance and correlation recursions over the whole sample from
/// the given initial state, recording variance and correlation paths and the
/// per-observation log-density contributions.
pub fn run_recursions(
    params: &ParamVector,
    data: &ReturnsMatrix,
    init: &RecursionState,
) -> Result<CovariancePath> {
    params.validate()?;
    init.validate()?;
    let k = data.dim();
    if params.dim() != k || init.h.len() != k {
        return Err(Error::invalid("parameter/data/state dimensions disagree"));
    }
    let t_len = data.t_len();
    let n_pairs = k * (k - 1) / 2;
    let density = SkewDensity::new(&params.skew_family());
    let y = data.values();

    let mut h_path = DMatrix::zeros(t_len, k);
    let mut corr_path = DMatrix::zeros(t_len, n_pairs);
    let mut terms = Vec::with_capacity(t_len);

    let mut h = init.h.clone();
    let mut q = vec![0.0; k * k];
    let mut r_bar = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            q[i * k + j] = init.q[(i, j)];
            r_bar[i * k + j] = init.r_bar[(i, j)];
        }
    }
    let mut u = vec![0.0; k];
    let mut u_prev = vec![0.0; k];
    let mut r = vec![0.0; k * k];
    let mut chol = vec![0.0; k * k];
    let mut eps = vec![0.0; k];
    let one_minus_ab = 1.0 - params.a - params.b;

    for t in 0..t_len {
        if t > 0 {
            for i in 0..k {
                let y_prev = y[(t - 1, i)];
                h[i] = params.omega[i] + params.alpha[i] * y_prev * y_prev + params.beta[i] * h[i];
            }
            for i in 0..k {
                for j in 0..k {
                    q[i * k + j] = one_minus_ab * r_bar[i * k + j]
                        + params.a * u_prev[i] * u_prev[j]
                        + params.b * q[i * k + j];
                }
            }
        }
        let mut logdet = 0.0;
        for i in 0..k {
            if !(h[i].is_finite() && h[i] > 0.0) {
                return Err(Error::domain(format!(
                    "conditional variance underflow at t = {}, series {}",
                    t + 1,
                    i + 1
                )));
            }
            u[i] = y[(t, i)] / h[i].sqrt();
            logdet += h[i].ln();
        }
        // R_t from Q_t.
        for i in 0..k {
            let qii = q[i * k + i];
            if !(qii.is_finite() && qii > 0.0) {
                return Err(Error::domain(format!(
                    "Q has non-positive diagonal at t = {}, series {}",
                    t + 1,
                    i + 1
                )));
            }
        }
        for i in 0..k {
            for j in 0..k {
                r[i * k + j] = if i == j {
                    1.0
                } else {
                    q[i * k + j] / (q[i * k + i] * q[j * k + j]).sqrt()
                };
            }
        }
        if !cholesky_lower(&r, k, &mut chol) {
            return Err(Error::domain(format!(
                "correlation matrix not positive definite at t = {}",
                t + 1
            )));
        }
        for i in 0..k {
            logdet += 2.0 * chol[i * k + i].ln();
        }
        forward_solve(&chol, k, &u, &mut eps);

        let term = -0.5 * logdet + density.log_density(&eps);
        terms.push(term);
        for i in 0..k {
            h_path[(t, i)] = h[i];
        }
        let mut p = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                corr_path[(t, p)] = r[i * k + j];
                p += 1;
            }
        }
        std::mem::swap(&mut u, &mut u_prev);
    }

    Ok(CovariancePath {
        h_path,
        corr_path,
        loglik_terms: terms,
    })
}

/// Correlation targeting: runs the univariate variance recursions, forms the
/// standardized returns and returns their sample (Pearson) correlation
/// matrix. This is the `R_bar` used by one likelihood evaluation.
pub fn target_correlation(params: &ParamVector, data: &ReturnsMatrix) -> Result<DMatrix<f64>> {
    let k = data.dim();
    if params.dim() != k {
        return Err(Error::invalid("parameter/data dimensions disagree"));
    }
    let t_len = data.t_len();
    let y = data.values();
    let mut h = data.sample_variances();
    let mut u = DMatrix::zeros(t_len, k);
    for t in 0..t_len {
        for i in 0..k {
            if t > 0 {
                let y_prev = y[(t - 1, i)];
                h[i] = params.omega[i] + params.alpha[i] * y_prev * y_prev + params.beta[i] * h[i];
            }
            if !(h[i].is_finite() && h[i] > 0.0) {
                return Err(Error::domain(format!(
                    "conditional variance underflow at t = {}, series {}",
                    t + 1,
                    i + 1
                )));
            }
            u[(t, i)] = y[(t, i)] / h[i].sqrt();
        }
    }
    // Demeaned Pearson correlation of u.
    let means: Vec<f64> = (0..k).map(|i| u.column(i).sum() / t_len as f64).collect();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mut s = 0.0;
            for t in 0..t_len {
                s += (u[(t, i)] - means[i]) * (u[(t, j)] - means[j]);
            }
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    for i in 0..k {
        if !(cov[(i, i)].is_finite() && cov[(i, i)] > 0.0) {
            return Err(Error::domain(format!(
                "standardized returns of series {} are degenerate",
                i + 1
            )));
        }
    }
    let mut r = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            r[(i, j)] = if i == j {
                1.0
            } else {
                cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
            };
        }
    }
    Ok(r)
}

/// Full likelihood pipeline: correlation targeting, standard initialization,
/// then the recursion sweep.
pub fn covariance_path(params: &ParamVector, data: &ReturnsMatrix) -> Result<CovariancePath> {
    let r_bar = target_correlation(params, data)?;
    let init = RecursionState::initial(data, r_bar)?;
    run_recursions(params, data, &init)
}

/// Full-sample log-likelihood. Numerical failures (variance underflow,
/// non-PD correlation, degenerate standardization) return -inf so that the
/// sampler rejects the parameter point instead of aborting.
pub fn log_likelihood(params: &ParamVector, data: &ReturnsMatrix) -> f64 {
    match covariance_path(params, data) {
        Ok(path) => {
            let ll = path.log_likelihood();
            if ll.is_finite() {
                ll
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Simulates a path of length `t_len`, along with the generating variance
/// and correlation paths.
///
/// The recursion starts from the stationary variances
/// `omega / (1 - alpha - beta)` and `Q_1 = R_bar`; `r_bar` defaults to the
/// identity. Errors are drawn from the parameter vector's skew family and
/// mapped through `y_t = D_t L_t eps_t`.
pub fn simulate_with_paths(
    params: &ParamVector,
    r_bar: Option<&DMatrix<f64>>,
    t_len: usize,
    seed: u64,
) -> Result<(ReturnsMatrix, CovariancePath)> {
    params.validate()?;
    let k = params.dim();
    if t_len < 1 {
        return Err(Error::invalid("simulation length must be >= 1"));
    }
    let owned_identity;
    let r_bar = match r_bar {
        Some(r) => {
            check_correlation_target(r, k)?;
            r
        }
        None => {
            owned_identity = DMatrix::identity(k, k);
            &owned_identity
        }
    };

    let fam = params.skew_family();
    let density = SkewDensity::new(&fam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_pairs = k * (k - 1) / 2;
    let mut y = DMatrix::zeros(t_len.max(2), k); // padded below if t_len == 1
    let mut h_path = DMatrix::zeros(t_len, k);
    let mut corr_path = DMatrix::zeros(t_len, n_pairs);
    let mut terms = Vec::with_capacity(t_len);

    let mut h: Vec<f64> = (0..k)
        .map(|i| params.omega[i] / (1.0 - params.alpha[i] - params.beta[i]))
        .collect();
    let mut q = vec![0.0; k * k];
    let mut rb = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            q[i * k + j] = r_bar[(i, j)];
            rb[i * k + j] = r_bar[(i, j)];
        }
    }
    let mut r = vec![0.0; k * k];
    let mut chol = vec![0.0; k * k];
    let mut eps = vec![0.0; k];
    let mut u = vec![0.0; k];
    let mut u_prev = vec![0.0; k];
    let one_minus_ab = 1.0 - params.a - params.b;

    for t in 0..t_len {
        if t > 0 {
            for i in 0..k {
                let y_prev = y[(t - 1, i)];
                h[i] = params.omega[i] + params.alpha[i] * y_prev * y_prev + params.beta[i] * h[i];
            }
            for i in 0..k {
                for j in 0..k {
                    q[i * k + j] = one_minus_ab * rb[i * k + j]
                        + params.a * u_prev[i] * u_prev[j]
                        + params.b * q[i * k + j];
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                r[i * k + j] = if i == j {
                    1.0
                } else {
                    q[i * k + j] / (q[i * k + i] * q[j * k + j]).sqrt()
                };
            }
        }
        if !cholesky_lower(&r, k, &mut chol) {
            return Err(Error::domain(format!(
                "simulated correlation matrix not positive definite at t = {}",
                t + 1
            )));
        }
        skew_sample_with(&fam, &mut rng, &mut eps);
        let mut logdet = 0.0;
        for i in 0..k {
            // u = L eps, y = D u.
            let mut s = 0.0;
            for j in 0..=i {
                s += chol[i * k + j] * eps[j];
            }
            u[i] = s;
            y[(t, i)] = h[i].sqrt() * s;
            logdet += h[i].ln();
            h_path[(t, i)] = h[i];
        }
        for i in 0..k {
            logdet += 2.0 * chol[i * k + i].ln();
        }
        terms.push(-0.5 * logdet + density.log_density(&eps));
        let mut p = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                corr_path[(t, p)] = r[i * k + j];
                p += 1;
            }
        }
        std::mem::swap(&mut u, &mut u_prev);
    }

    let names = (1..=k).map(|i| format!("series_{i}")).collect();
    let values = if t_len >= 2 {
        y
    } else {
        // ReturnsMatrix requires T >= 2 for estimation; a single simulated
        // row is returned as-is through a relaxed constructor path.
        y.rows(0, 1).into_owned()
    };
    let returns = if t_len >= 2 {
        ReturnsMatrix::new(values, names)?
    } else {
        ReturnsMatrix {
            values,
            series_names: names,
        }
    };
    Ok((
        returns,
        CovariancePath {
            h_path,
            corr_path,
            loglik_terms: terms,
        },
    ))
}

/// Simulates a synthetic return path; see [`simulate_with_paths`].
pub fn simulate_path(
    params: &ParamVector,
    r_bar: Option<&DMatrix<f64>>,
    t_len: usize,
    seed: u64,
) -> Result<ReturnsMatrix> {
    simulate_with_paths(params, r_bar, t_len, seed).map(|(y, _)| y)
}
