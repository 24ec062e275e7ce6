//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the code under test except for plain data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exact 1-D `W_2^2` between two equal-size samples: match sorted values.
pub fn sorted_w2_squared(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Sliced 2-Wasserstein distance with `directions` (unit rows, `dim` wide):
/// the square root of the mean over directions of the exact projected
/// `W_2^2`. Samples are row-major and of equal size.
pub fn sliced_w2(a: &[f64], b: &[f64], dim: usize, directions: &[f64]) -> f64 {
    let project = |pts: &[f64], theta: &[f64]| -> Vec<f64> {
        pts.chunks_exact(dim).map(|p| p.iter().zip(theta).map(|(x, t)| x * t).sum()).collect()
    };
    let m = directions.len() / dim;
    let total: f64 = directions
        .chunks_exact(dim)
        .map(|theta| sorted_w2_squared(&project(a, theta), &project(b, theta)))
        .sum();
    (total / m as f64).sqrt()
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Entropic OT dual potential on the reference, by damped (Levenberg) Newton ascent on
/// the semi-dual
///
/// `F(g) = sum_k w_k g_k - eps sum_i a_i log sum_k w_k exp((g_k - c_ik)/eps)`,
///
/// with `c_ik = |x_i - y_k|^2 / 2`. `g_0` is pinned to zero to remove the
/// additive gauge; the result is centered so that `sum_k w_k g_k = 0`.
pub fn semi_dual_newton(x: &[f64], a: &[f64], y: &[f64], w: &[f64], dim: usize, eps: f64) -> Vec<f64> {
    let (n, m) = (a.len(), w.len());
    let cost: Vec<f64> = (0..n * m)
        .map(|ik| {
            let (i, k) = (ik / m, ik % m);
            0.5 * (0..dim).map(|j| (x[i * dim + j] - y[k * dim + j]).powi(2)).sum::<f64>()
        })
        .collect();
    let value = |g: &[f64]| -> f64 {
        let mut f: f64 = g.iter().zip(w).map(|(g, w)| g * w).sum();
        for i in 0..n {
            let t: Vec<f64> = (0..m).map(|k| w[k].ln() + (g[k] - cost[i * m + k]) / eps).collect();
            f -= eps * a[i] * logsumexp(&t);
        }
        f
    };
    // Row-conditional plans pi_ik, normalized over k.
    let plans = |g: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; n * m];
        for i in 0..n {
            let t: Vec<f64> = (0..m).map(|k| w[k].ln() + (g[k] - cost[i * m + k]) / eps).collect();
            let z = logsumexp(&t);
            for k in 0..m {
                p[i * m + k] = (t[k] - z).exp();
            }
        }
        p
    };
    let mut g = vec![0.0; m];
    for _ in 0..10_000 {
        let p = plans(&g);
        let mut grad = DVector::from_fn(m - 1, |r, _| w[r + 1]);
        let mut hess = DMatrix::<f64>::zeros(m - 1, m - 1);
        for i in 0..n {
            for r in 0..m - 1 {
                let pr = p[i * m + r + 1];
                grad[r] -= a[i] * pr;
                hess[(r, r)] -= a[i] * pr / eps;
                for s in 0..m - 1 {
                    hess[(r, s)] += a[i] * pr * p[i * m + s + 1] / eps;
                }
            }
        }
        if grad.amax() < 1e-15 {
            break;
        }
        // Levenberg shift: keeps the system definite where some atom gets no
        // mass yet, and vanishes at the optimum.
        let shift = DMatrix::identity(m - 1, m - 1) * grad.amax();
        let step = (-hess + shift).cholesky().expect("shifted Hessian is definite").solve(&grad);
        let f0 = value(&g);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { g[k] + t * step[k - 1] }).collect();
            if value(&trial) >= f0 + 1e-4 * t * slope || t < 1e-12 {
                g = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let mean: f64 = g.iter().zip(w).map(|(g, w)| g * w).sum();
    g.iter().map(|v| v - mean).collect()
}

/// Kernel ridge coefficients `(G + n lambda I)^{-1} y` by LU on an
/// explicitly assembled Gram matrix, with `K(u,v) = exp(-|u-v|_w^2 / l^2)`.
pub struct DenseRidge {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub length_scale: f64,
    pub alpha: Vec<f64>,
}

impl DenseRidge {
    pub fn kernel(&self, u: &[f64], v: &[f64]) -> f64 {
        let d2: f64 = u.iter().zip(v).zip(&self.weights).map(|((a, b), w)| w * (a - b) * (a - b)).sum();
        (-d2 / (self.length_scale * self.length_scale)).exp()
    }

    pub fn fit(points: Vec<Vec<f64>>, weights: Vec<f64>, y: &[f64], lambda: f64, length_scale: f64) -> Self {
        let n = points.len();
        let mut model = DenseRidge { points, weights, length_scale, alpha: Vec::new() };
        let a = DMatrix::from_fn(n, n, |i, j| {
            model.kernel(&model.points[i], &model.points[j]) + if i == j { n as f64 * lambda } else { 0.0 }
        });
        let alpha = a.lu().solve(&DVector::from_column_slice(y)).expect("regularized Gram is invertible");
        model.alpha = alpha.iter().copied().collect();
        model
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        self.points.iter().zip(&self.alpha).map(|(p, a)| a * self.kernel(p, q)).sum()
    }
}
