//! Mode finding: derivative-free simplex maximization and a central
//! finite-difference Hessian with boundary-aware step shrinking.
//!
//! The posterior is cheap but non-smooth at the support boundary (it drops
//! to -inf), so the simplex treats -inf vertices as ordinary worst points
//! and moves away from them.

use nalgebra::DMatrix;

/// Result of a simplex search.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Nelder-Mead maximization of `f` from `x0`.
///
/// Stops when the simplex function values agree to `rel_tol` (the classic
/// relative spread criterion) or after `max_eval` evaluations, in which case
/// `converged` is false.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    max_eval: usize,
    rel_tol: f64,
) -> SimplexResult {
    let p = x0.len();
    assert!(p >= 1, "empty starting point");
    let mut evals = 0usize;
    // Minimize g = -f.
    let mut g = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    simplex.push(x0.to_vec());
    for i in 0..p {
        let mut v = x0.to_vec();
        let step = (0.1 * v[i].abs()).max(0.01);
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| g(v, &mut evals)).collect();

    let mut order: Vec<usize> = (0..=p).collect();
    let mut converged = false;
    while evals < max_eval {
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let worst = order[p];
        let second_worst = order[p - 1];

        let spread = 2.0 * (values[worst] - values[best]).abs();
        let scale = values[worst].abs() + values[best].abs() + 1e-10;
        if spread.is_finite() && spread <= rel_tol * scale {
            converged = true;
            break;
        }

        // Centroid of all points but the worst.
        let mut centroid = vec![0.0; p];
        for &i in order.iter().take(p) {
            for d in 0..p {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= p as f64;
        }

        let reflect: Vec<f64> = (0..p)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let v_reflect = g(&reflect, &mut evals);

        if v_reflect < values[best] {
            // Try to expand further.
            let expand: Vec<f64> = (0..p)
                .map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]))
                .collect();
            let v_expand = g(&expand, &mut evals);
            if v_expand < v_reflect {
                simplex[worst] = expand;
                values[worst] = v_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = v_reflect;
            }
        } else if v_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = v_reflect;
        } else {
            // Contract, outside or inside depending on the reflection.
            let (contract, cmp): (Vec<f64>, f64) = if v_reflect < values[worst] {
                (
                    (0..p)
                        .map(|d| centroid[d] + 0.5 * (centroid[d] - simplex[worst][d]))
                        .collect(),
                    v_reflect,
                )
            } else {
                (
                    (0..p)
                        .map(|d| centroid[d] - 0.5 * (centroid[d] - simplex[worst][d]))
                        .collect(),
                    values[worst],
                )
            };
            let v_contract = g(&contract, &mut evals);
            if v_contract < cmp {
                simplex[worst] = contract;
                values[worst] = v_contract;
            } else {
                // Shrink everything toward the best vertex.
                let best_point = simplex[best].clone();
                for &i in order.iter().skip(1) {
                    for d in 0..p {
                        simplex[i][d] = best_point[d] + 0.5 * (simplex[i][d] - best_point[d]);
                    }
                    values[i] = g(&simplex[i], &mut evals);
                }
            }
        }
    }

    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let best = order[0];
    SimplexResult {
        x: simplex[best].clone(),
        value: -values[best],
        converged,
        evaluations: evals,
    }
}

/// Central finite-difference Hessian of `f` at `x`.
///
/// Per-coordinate steps start at `max(1e-4, 1e-4 |x_i|)` and are halved
/// while an evaluation lands outside the support (-inf/NaN), up to 30 times;
/// cross terms retry with jointly halved steps. Returns `None` when any
/// required evaluation stays non-finite.
pub fn fd_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Option<DMatrix<f64>> {
    let p = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let mut steps = vec![0.0; p];
    let mut f_plus = vec![0.0; p];
    let mut f_minus = vec![0.0; p];
    let mut point = x.to_vec();

    for i in 0..p {
        let mut h = (1e-4 * x[i].abs()).max(1e-4);
        let mut ok = false;
        for _ in 0..30 {
            point[i] = x[i] + h;
            let fp = f(&point);
            point[i] = x[i] - h;
            let fm = f(&point);
            point[i] = x[i];
            if fp.is_finite() && fm.is_finite() {
                steps[i] = h;
                f_plus[i] = fp;
                f_minus[i] = fm;
                ok = true;
                break;
            }
            h *= 0.5;
        }
        if !ok {
            return None;
        }
    }

    let mut hess = DMatrix::zeros(p, p);
    for i in 0..p {
        hess[(i, i)] = (f_plus[i] - 2.0 * f0 + f_minus[i]) / (steps[i] * steps[i]);
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let mut hi = steps[i];
            let mut hj = steps[j];
            let mut entry = None;
            for _ in 0..10 {
                let mut eval = |si: f64, sj: f64, f: &mut F| -> f64 {
                    point[i] = x[i] + si * hi;
                    point[j] = x[j] + sj * hj;
                    let v = f(&point);
                    point[i] = x[i];
                    point[j] = x[j];
                    v
                };
                let fpp = eval(1.0, 1.0, &mut f);
                let fpm = eval(1.0, -1.0, &mut f);
                let fmp = eval(-1.0, 1.0, &mut f);
                let fmm = eval(-1.0, -1.0, &mut f);
                if fpp.is_finite() && fpm.is_finite() && fmp.is_finite() && fmm.is_finite() {
                    entry = Some((fpp - fpm - fmp + fmm) / (4.0 * hi * hj));
                    break;
                }
                hi *= 0.5;
                hj *= 0.5;
            }
            match entry {
                Some(v) => {
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
                None => return None,
            }
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(hess)
}
