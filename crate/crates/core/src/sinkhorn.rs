//! Entropic optimal transport dual against a discrete reference measure.
//!
//! For a discrete `mu = sum_i a_i delta_{x_i}` and reference
//! `U = sum_k w_k delta_{y_k}` the dual functional is
//!
//! ```text
//! D(h, g) = sum_i a_i h_i + sum_k w_k g_k
//!           - eps * sum_{i,k} a_i w_k exp((h_i + g_k - |x_i - y_k|^2 / 2) / eps)
//! ```
//!
//! and is maximized by alternating exact block updates (Sinkhorn). The
//! maximizer is unique up to `(h + c, g - c)`; [`center_potential`] fixes the
//! gauge by making `g` have zero `w`-mean, which is the embedding coordinate.
//!
//! Two update schemes are provided and agree to rounding:
//! [`SinkhornMethod::LogDomain`] evaluates every update with log-sum-exp, and
//! [`SinkhornMethod::Scaling`] keeps the potentials in the log domain but runs
//! multiplicative scaling iterations on a kernel that is re-centered
//! ("absorbed") whenever a scaling factor leaves `[e^-40, e^40]`. Both are
//! overflow-free; the second avoids one `exp` per cost entry per iteration.

use serde::{Deserialize, Serialize};

use crate::distributions::{check_simplex, PointSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SinkhornMethod {
    LogDomain,
    #[default]
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkhornParams {
    /// Entropic regularization `eps > 0`.
    pub reg: f64,
    /// Sup-norm tolerance on the marginal violation of the primal plan.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub method: SinkhornMethod,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            reg: 0.1,
            tol: 1e-6,
            max_iter: 2000,
            method: SinkhornMethod::Scaling,
        }
    }
}

impl SinkhornParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidConfig(format!("sinkhorn reg must be positive, got {}", self.reg)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("sinkhorn tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("sinkhorn max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dual potentials with `g` centered against the reference weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Potential on the atoms of `mu`.
    pub h: Vec<f64>,
    /// Centered potential on the reference atoms.
    pub g: Vec<f64>,
    /// Sup-norm violation of the column marginal (rows are exact after the
    /// last `h` update).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `g - (sum_k w_k g_k) 1`.
pub fn center_potential(g: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(g.len(), weights.len(), "potential and weights differ in length");
    let mean: f64 = g.iter().zip(weights).map(|(a, b)| a * b).sum();
    g.iter().map(|v| v - mean).collect()
}

/// Half squared Euclidean cost, row-major `mu.len() x reference.len()`.
pub fn cost_matrix(mu: PointSet<'_>, reference: PointSet<'_>) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * reference.len());
    for x in mu.rows() {
        for y in reference.rows() {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            cost.push(0.5 * d2);
        }
    }
    cost
}

/// Value of the discrete dual functional at `(h, g)`.
pub fn dual_objective(
    h: &[f64],
    g: &[f64],
    mu: PointSet<'_>,
    mu_weights: &[f64],
    reference: PointSet<'_>,
    ref_weights: &[f64],
    reg: f64,
) -> f64 {
    let cost = cost_matrix(mu, reference);
    let m = reference.len();
    let linear: f64 = h.iter().zip(mu_weights).map(|(a, b)| a * b).sum::<f64>()
        + g.iter().zip(ref_weights).map(|(a, b)| a * b).sum::<f64>();
    let mut penalty = 0.0;
    for (i, (&hi, &ai)) in h.iter().zip(mu_weights).enumerate() {
        for k in 0..m {
            penalty += ai * ref_weights[k] * ((hi + g[k] - cost[i * m + k]) / reg).exp();
        }
    }
    linear - reg * penalty
}

/// Row and column sums of the primal plan `a_i w_k exp((h_i + g_k - c_ik)/eps)`.
pub fn plan_marginals(
    h: &[f64],
    g: &[f64],
    mu: PointSet<'_>,
    mu_weights: &[f64],
    reference: PointSet<'_>,
    ref_weights: &[f64],
    reg: f64,
) -> (Vec<f64>, Vec<f64>) {
    let cost = cost_matrix(mu, reference);
    let m = reference.len();
    let mut rows = vec![0.0; h.len()];
    let mut cols = vec![0.0; m];
    for i in 0..h.len() {
        for k in 0..m {
            let p = mu_weights[i] * ref_weights[k] * ((h[i] + g[k] - cost[i * m + k]) / reg).exp();
            rows[i] += p;
            cols[k] += p;
        }
    }
    (rows, cols)
}

/// Solves the dual from `h = 0`. A run that exhausts `max_iter` is returned
/// with `converged == false`.
pub fn solve_dual(
    mu: PointSet<'_>,
    mu_weights: &[f64],
    reference: PointSet<'_>,
    ref_weights: &[f64],
    params: &SinkhornParams,
) -> Result<DualSolution> {
    let h0 = vec![0.0; mu.len()];
    solve_dual_from(mu, mu_weights, reference, ref_weights, params, &h0, None)
}

/// Like [`solve_dual`] with an explicit starting `h`. When `trace` is given
/// the dual objective is appended after every block update.
pub fn solve_dual_from(
    mu: PointSet<'_>,
    mu_weights: &[f64],
    reference: PointSet<'_>,
    ref_weights: &[f64],
    params: &SinkhornParams,
    h0: &[f64],
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DualSolution> {
    params.validate()?;
    if mu.dim() != reference.dim() {
        return Err(Error::Dimension {
            expected: reference.dim(),
            found: mu.dim(),
        });
    }
    if mu_weights.len() != mu.len() || ref_weights.len() != reference.len() || h0.len() != mu.len() {
        return Err(Error::InvalidInput("weight or potential length does not match atoms".into()));
    }
    check_simplex(mu_weights)?;
    check_simplex(ref_weights)?;

    let problem = Problem {
        cost: cost_matrix(mu, reference),
        a: mu_weights,
        w: ref_weights,
        log_a: mu_weights.iter().map(|v| v.ln()).collect(),
        log_w: ref_weights.iter().map(|v| v.ln()).collect(),
        reg: params.reg,
    };
    let (mut h, mut g, residual, iterations, converged) = match params.method {
        SinkhornMethod::LogDomain => problem.run_log(h0, params, &mut trace),
        SinkhornMethod::Scaling => problem.run_scaling(h0, params, &mut trace),
    };
    if h.iter().chain(&g).any(|v| !v.is_finite()) || !residual.is_finite() {
        return Err(Error::InvalidInput(
            "sinkhorn produced non-finite potentials".into(),
        ));
    }
    let shift: f64 = g.iter().zip(ref_weights).map(|(a, b)| a * b).sum();
    g.iter_mut().for_each(|v| *v -= shift);
    h.iter_mut().for_each(|v| *v += shift);
    Ok(DualSolution {
        h,
        g,
        residual,
        iterations,
        converged,
    })
}

struct Problem<'a> {
    cost: Vec<f64>,
    a: &'a [f64],
    w: &'a [f64],
    log_a: Vec<f64>,
    log_w: Vec<f64>,
    reg: f64,
}

type RunOutput = (Vec<f64>, Vec<f64>, f64, usize, bool);

const ABSORB_LOG: f64 = 40.0;

impl Problem<'_> {
    fn n(&self) -> usize {
        self.a.len()
    }

    fn m(&self) -> usize {
        self.w.len()
    }

    fn objective(&self, h: &[f64], g: &[f64]) -> f64 {
        let m = self.m();
        let mut linear = 0.0;
        let mut penalty = 0.0;
        for i in 0..self.n() {
            linear += self.a[i] * h[i];
            for k in 0..m {
                penalty += self.a[i] * self.w[k] * ((h[i] + g[k] - self.cost[i * m + k]) / self.reg).exp();
            }
        }
        linear += g.iter().zip(self.w).map(|(x, y)| x * y).sum::<f64>();
        linear - self.reg * penalty
    }

    /// `g_k = -eps log sum_i a_i exp((h_i - c_ik)/eps)`.
    fn g_update_log(&self, h: &[f64], g: &mut [f64]) {
        let (n, m, eps) = (self.n(), self.m(), self.reg);
        let mut max = vec![f64::NEG_INFINITY; m];
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            let base = self.log_a[i] + h[i] / eps;
            for k in 0..m {
                let z = base - row[k] / eps;
                if z > max[k] {
                    max[k] = z;
                }
            }
        }
        let mut acc = vec![0.0; m];
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            let base = self.log_a[i] + h[i] / eps;
            for k in 0..m {
                acc[k] += (base - row[k] / eps - max[k]).exp();
            }
        }
        for k in 0..m {
            g[k] = -eps * (max[k] + acc[k].ln());
        }
    }

    /// `h_i = -eps log sum_k w_k exp((g_k - c_ik)/eps)`.
    fn h_update_log(&self, g: &[f64], h: &mut [f64]) {
        let (m, eps) = (self.m(), self.reg);
        let shifted: Vec<f64> = (0..m).map(|k| self.log_w[k] + g[k] / eps).collect();
        for (i, hi) in h.iter_mut().enumerate() {
            let row = &self.cost[i * m..(i + 1) * m];
            let max = (0..m)
                .map(|k| shifted[k] - row[k] / eps)
                .fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = (0..m).map(|k| (shifted[k] - row[k] / eps - max).exp()).sum();
            *hi = -eps * (max + s.ln());
        }
    }

    fn column_residual(&self, g_old: &[f64], g_new: &[f64]) -> f64 {
        g_old
            .iter()
            .zip(g_new)
            .zip(self.w)
            .map(|((o, n), w)| w * (((o - n) / self.reg).exp() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn run_log(&self, h0: &[f64], params: &SinkhornParams, trace: &mut Option<&mut Vec<f64>>) -> RunOutput {
        let mut h = h0.to_vec();
        let mut g = vec![0.0; self.m()];
        let mut g_next = vec![0.0; self.m()];
        let mut iter = 0;
        loop {
            self.g_update_log(&h, &mut g_next);
            if iter > 0 {
                let residual = self.column_residual(&g, &g_next);
                if residual <= params.tol {
                    return (h, g, residual, iter, true);
                }
                if iter >= params.max_iter {
                    return (h, g, residual, iter, false);
                }
            }
            std::mem::swap(&mut g, &mut g_next);
            self.record(trace, &h, &g);
            self.h_update_log(&g, &mut h);
            self.record(trace, &h, &g);
            iter += 1;
        }
    }

    /// Scaling iterations on `K_ik = exp((h_i + g_k - c_ik)/eps)`; the effective
    /// potentials are `h + eps ln u`, `g + eps ln v`.
    fn run_scaling(&self, h0: &[f64], params: &SinkhornParams, trace: &mut Option<&mut Vec<f64>>) -> RunOutput {
        let (n, m) = (self.n(), self.m());
        let mut h = h0.to_vec();
        let mut g = vec![0.0; m];
        let mut g_next = vec![0.0; m];

        // First sweep in the log domain so that the kernel starts well scaled.
        self.g_update_log(&h, &mut g);
        self.record(trace, &h, &g);
        self.h_update_log(&g, &mut h);
        self.record(trace, &h, &g);
        let mut iter = 1;

        let mut kernel = vec![0.0; n * m];
        let mut u = vec![1.0; n];
        let mut v = vec![1.0; m];
        let mut col = vec![0.0; m];
        self.fill_kernel(&mut kernel, &h, &g);

        loop {
            // s_k = sum_i a_i u_i K_ik; the column marginal is w_k v_k s_k.
            col.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..n {
                let au = self.a[i] * u[i];
                let row = &kernel[i * m..(i + 1) * m];
                for (c, kv) in col.iter_mut().zip(row) {
                    *c += au * kv;
                }
            }
            if col.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                // The kernel under- or overflowed: absorb and take this sweep in the log domain.
                self.absorb(&mut h, &mut g, &mut u, &mut v);
                self.g_update_log(&h, &mut g_next);
                let residual = self.column_residual(&g, &g_next);
                if residual <= params.tol || iter >= params.max_iter {
                    return (h, g, residual, iter, residual <= params.tol);
                }
                std::mem::swap(&mut g, &mut g_next);
                self.record(trace, &h, &g);
                self.h_update_log(&g, &mut h);
                self.record(trace, &h, &g);
                self.fill_kernel(&mut kernel, &h, &g);
                iter += 1;
                continue;
            }
            let residual = (0..m)
                .map(|k| (self.w[k] * v[k] * col[k] - self.w[k]).abs())
                .fold(0.0, f64::max);
            if residual <= params.tol || iter >= params.max_iter {
                self.absorb(&mut h, &mut g, &mut u, &mut v);
                return (h, g, residual, iter, residual <= params.tol);
            }
            for (vk, c) in v.iter_mut().zip(&col) {
                *vk = 1.0 / c;
            }
            self.record_scaled(trace, &h, &g, &u, &v);

            let mut row_failed = false;
            for i in 0..n {
                let row = &kernel[i * m..(i + 1) * m];
                let s: f64 = row.iter().zip(self.w).zip(&v).map(|((kv, w), vk)| kv * w * vk).sum();
                if !(s > 0.0 && s.is_finite()) {
                    row_failed = true;
                    break;
                }
                u[i] = 1.0 / s;
            }
            if row_failed {
                u.iter_mut().for_each(|x| *x = 1.0);
                self.absorb(&mut h, &mut g, &mut u, &mut v);
                self.h_update_log(&g, &mut h);
                self.fill_kernel(&mut kernel, &h, &g);
            }
            self.record_scaled(trace, &h, &g, &u, &v);
            iter += 1;

            if u.iter().chain(&v).any(|x| x.ln().abs() > ABSORB_LOG) {
                self.absorb(&mut h, &mut g, &mut u, &mut v);
                self.fill_kernel(&mut kernel, &h, &g);
            }
        }
    }

    fn fill_kernel(&self, kernel: &mut [f64], h: &[f64], g: &[f64]) {
        let (m, eps) = (self.m(), self.reg);
        for (i, out) in kernel.chunks_exact_mut(m).enumerate() {
            let row = &self.cost[i * m..(i + 1) * m];
            for k in 0..m {
                out[k] = ((h[i] + g[k] - row[k]) / eps).exp();
            }
        }
    }

    /// Moves the scalings into the potentials and resets them to one.
    fn absorb(&self, h: &mut [f64], g: &mut [f64], u: &mut [f64], v: &mut [f64]) {
        for (hi, ui) in h.iter_mut().zip(u.iter_mut()) {
            *hi += self.reg * ui.ln();
            *ui = 1.0;
        }
        for (gk, vk) in g.iter_mut().zip(v.iter_mut()) {
            *gk += self.reg * vk.ln();
            *vk = 1.0;
        }
    }

    fn record(&self, trace: &mut Option<&mut Vec<f64>>, h: &[f64], g: &[f64]) {
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.objective(h, g));
        }
    }

    fn record_scaled(&self, trace: &mut Option<&mut Vec<f64>>, h: &[f64], g: &[f64], u: &[f64], v: &[f64]) {
        if trace.is_some() {
            let he: Vec<f64> = h.iter().zip(u).map(|(a, b)| a + self.reg * b.ln()).collect();
            let ge: Vec<f64> = g.iter().zip(v).map(|(a, b)| a + self.reg * b.ln()).collect();
            self.record(trace, &he, &ge);
        }
    }
}
