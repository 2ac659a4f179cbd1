//! Shared test support: an independent straight-line oracle for the model
//! recursions (k <= 2) and adaptive quadrature for density checks.
//!
//! The oracle deliberately repeats every formula with plain loops and
//! scalars instead of calling into the library, so that the two paths can
//! disagree when one of them is wrong.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

pub const LN_PI: f64 = 1.144_729_885_849_400_2;
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Normal,
    StudentT,
    Ged,
}

/// Straight-line log-density of the base family at squared norm q.
pub fn oracle_log_base(kind: BaseKind, tail: f64, k: usize, q: f64) -> f64 {
    let kf = k as f64;
    match kind {
        BaseKind::Normal => -0.5 * (kf * LN_2PI + q),
        BaseKind::StudentT => {
            let nu = tail;
            ln_gamma((nu + kf) / 2.0) - ln_gamma(nu / 2.0)
                - 0.5 * kf * ((nu - 2.0) * std::f64::consts::PI).ln()
                - 0.5 * (nu + kf) * (1.0 + q / (nu - 2.0)).ln()
        }
        BaseKind::Ged => {
            let d = tail;
            d.ln() + ln_gamma(0.5 * kf) - 0.5 * kf * LN_PI
                - kf / (2.0 * d) * std::f64::consts::LN_2
                - ln_gamma(kf / (2.0 * d))
                - 0.5 * q.powf(d)
        }
    }
}

/// Straight-line skewed log-density.
pub fn oracle_skew_log_density(kind: BaseKind, tail: f64, gamma: &[f64], x: &[f64]) -> f64 {
    let k = x.len();
    let mut pref = k as f64 * std::f64::consts::LN_2;
    let mut q = 0.0;
    for i in 0..k {
        pref += (gamma[i] / (1.0 + gamma[i] * gamma[i])).ln();
        let xs = if x[i] >= 0.0 {
            x[i] / gamma[i]
        } else {
            x[i] * gamma[i]
        };
        q += xs * xs;
    }
    pref + oracle_log_base(kind, tail, k, q)
}

/// Scalar parameters of a k <= 2 oracle run.
pub struct OracleParams {
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub gamma: Vec<f64>,
    pub kind: BaseKind,
    pub tail: f64,
}

pub struct OraclePath {
    pub h: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub terms: Vec<f64>,
    pub r_bar_12: f64,
}

fn sample_variance(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Full straight-line pipeline for k in {1, 2}: univariate recursions with
/// sample-variance start, Pearson correlation targeting, Q/R recursion,
/// 2 x 2 Cholesky by formula, and the per-observation density terms.
pub fn oracle_pipeline(y: &[Vec<f64>], p: &OracleParams) -> OraclePath {
    let t_len = y.len();
    let k = y[0].len();
    assert!(k == 1 || k == 2, "oracle handles k <= 2");

    // Univariate variances and standardized returns.
    let mut h0: Vec<f64> = (0..k)
        .map(|i| sample_variance(&y.iter().map(|row| row[i]).collect::<Vec<_>>()))
        .collect();
    let mut u = vec![vec![0.0; k]; t_len];
    let mut h_path = vec![vec![0.0; k]; t_len];
    for t in 0..t_len {
        for i in 0..k {
            if t > 0 {
                h0[i] = p.omega[i] + p.alpha[i] * y[t - 1][i] * y[t - 1][i] + p.beta[i] * h0[i];
            }
            h_path[t][i] = h0[i];
            u[t][i] = y[t][i] / h0[i].sqrt();
        }
    }

    // Pearson correlation of u (only the 12 entry matters for k = 2).
    let r_bar_12 = if k == 2 {
        let m1 = u.iter().map(|r| r[0]).sum::<f64>() / t_len as f64;
        let m2 = u.iter().map(|r| r[1]).sum::<f64>() / t_len as f64;
        let mut c11 = 0.0;
        let mut c22 = 0.0;
        let mut c12 = 0.0;
        for t in 0..t_len {
            c11 += (u[t][0] - m1) * (u[t][0] - m1);
            c22 += (u[t][1] - m2) * (u[t][1] - m2);
            c12 += (u[t][0] - m1) * (u[t][1] - m2);
        }
        c12 / (c11 * c22).sqrt()
    } else {
        0.0
    };

    oracle_recursion_from(y, p, &h_path, &u, r_bar_12)
}

/// The Q/R recursion and density terms given precomputed h, u and target.
pub fn oracle_recursion_from(
    y: &[Vec<f64>],
    p: &OracleParams,
    h_path: &[Vec<f64>],
    u: &[Vec<f64>],
    r_bar_12: f64,
) -> OraclePath {
    let t_len = y.len();
    let k = y[0].len();
    let mut rho_path = vec![0.0; t_len];
    let mut terms = vec![0.0; t_len];

    // Q as (q11, q12, q22); starts at R_bar.
    let mut q11 = 1.0;
    let mut q22 = 1.0;
    let mut q12 = r_bar_12;
    for t in 0..t_len {
        if t > 0 && k == 2 {
            let w = 1.0 - p.a - p.b;
            let (u1, u2) = (u[t - 1][0], u[t - 1][1]);
            let n11 = w * 1.0 + p.a * u1 * u1 + p.b * q11;
            let n12 = w * r_bar_12 + p.a * u1 * u2 + p.b * q12;
            let n22 = w * 1.0 + p.a * u2 * u2 + p.b * q22;
            q11 = n11;
            q12 = n12;
            q22 = n22;
        }
        let (logdet_r, eps): (f64, Vec<f64>) = if k == 2 {
            let rho = q12 / (q11 * q22).sqrt();
            rho_path[t] = rho;
            let l22 = (1.0 - rho * rho).sqrt();
            let e1 = u[t][0];
            let e2 = (u[t][1] - rho * u[t][0]) / l22;
            (2.0 * l22.ln(), vec![e1, e2])
        } else {
            (0.0, vec![u[t][0]])
        };
        let logdet_h: f64 = (0..k).map(|i| h_path[t][i].ln()).sum();
        terms[t] = -0.5 * (logdet_h + logdet_r)
            + oracle_skew_log_density(p.kind, p.tail, &p.gamma, &eps);
    }
    OraclePath {
        h: h_path.to_vec(),
        rho: rho_path,
        terms,
        r_bar_12,
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, m, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    recurse(f, a, b, simpson(f, a, m, b), tol, 50)
}

/// Integrates a one-dimensional density split at zero (where the skew
/// transform has its kink) with generous tail coverage.
pub fn integrate_density<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    adaptive_simpson(f, lo, 0.0, tol / 2.0) + adaptive_simpson(f, 0.0, hi, tol / 2.0)
}
