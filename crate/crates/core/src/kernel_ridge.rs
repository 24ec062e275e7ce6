//! Kernel ridge regression on embedding space with the squared-exponential
//! kernel `K(u, v) = exp(-|u - v|^2 / l^2)`.
//!
//! The fitted regressor is `f(x) = sum_i alpha_i K(x, x_i)` with
//! `alpha = (G + n lambda I)^{-1} Y`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::embeddings::{squared_distance, squared_distance_unchecked, EmbeddingVector, Fingerprint};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{child_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub length_scale: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { length_scale: 1.0 }
    }
}

impl KernelConfig {
    pub fn new(length_scale: f64) -> Result<Self> {
        let cfg = KernelConfig { length_scale };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "length_scale must be positive and finite, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }

    /// Kernel value from a squared embedding distance.
    #[inline]
    pub fn from_squared(&self, d2: f64) -> f64 {
        (-d2 / (self.length_scale * self.length_scale)).exp()
    }
}

pub fn kernel_value(cfg: &KernelConfig, u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    Ok(cfg.from_squared(squared_distance(u, v)?))
}

fn check_family(embeddings: &[EmbeddingVector]) -> Result<()> {
    if let Some(first) = embeddings.first() {
        for e in &embeddings[1..] {
            if e.fingerprint() != first.fingerprint() {
                return Err(Error::FingerprintMismatch {
                    expected: first.fingerprint().0.clone(),
                    found: e.fingerprint().0.clone(),
                });
            }
            if e.len() != first.len() {
                return Err(Error::Dimension {
                    expected: first.len(),
                    found: e.len(),
                });
            }
        }
    }
    Ok(())
}

/// Pairwise squared distances; the upper triangle is computed and mirrored.
pub fn squared_distance_matrix(embeddings: &[EmbeddingVector]) -> Result<DMatrix<f64>> {
    check_family(embeddings)?;
    let n = embeddings.len();
    let rows = par::map_indexed(n, |i| {
        (i + 1..n)
            .map(|j| squared_distance_unchecked(&embeddings[i], &embeddings[j]))
            .collect::<Vec<f64>>()
    });
    let mut d2 = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    Ok(d2)
}

/// Exactly symmetric Gram matrix with unit diagonal.
pub fn gram_matrix(cfg: &KernelConfig, embeddings: &[EmbeddingVector]) -> Result<DMatrix<f64>> {
    Ok(squared_distance_matrix(embeddings)?.map(|d2| cfg.from_squared(d2)))
}

/// `K(a_i, b_j)`.
pub fn cross_gram(cfg: &KernelConfig, a: &[EmbeddingVector], b: &[EmbeddingVector]) -> Result<DMatrix<f64>> {
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        squared_distance(x, y)?;
    }
    check_family(a)?;
    check_family(b)?;
    let rows = par::map_indexed(a.len(), |i| {
        b.iter()
            .map(|bj| cfg.from_squared(squared_distance_unchecked(&a[i], bj)))
            .collect::<Vec<f64>>()
    });
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

/// Solves `(gram + shift I) x = y` by Cholesky. On failure a diagonal jitter
/// of 1e-12, 1e-11, ..., 1e-6 is tried; one step of iterative refinement
/// against the unjittered system follows.
pub fn solve_shifted(gram: &DMatrix<f64>, shift: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = gram.nrows();
    let mut a = gram.clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let mut jitter = 0.0;
    loop {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            let mut x = chol.solve(y);
            let r = y - &a * &x;
            x += chol.solve(&r);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Factorization { jitter: JITTER_MAX });
        }
    }
}

/// A fitted regressor; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    embeddings: Vec<EmbeddingVector>,
    kernel: KernelConfig,
    lambda: f64,
    alpha: Vec<f64>,
}

/// Fits `alpha = (G + n lambda I)^{-1} Y`.
pub fn fit(embeddings: &[EmbeddingVector], labels: &[f64], lambda: f64, kernel: KernelConfig) -> Result<RidgeModel> {
    let gram = gram_matrix(&kernel, embeddings)?;
    fit_with_gram(embeddings, &gram, labels, lambda, kernel)
}

/// Like [`fit`] with a precomputed Gram matrix of `embeddings`.
pub fn fit_with_gram(
    embeddings: &[EmbeddingVector],
    gram: &DMatrix<f64>,
    labels: &[f64],
    lambda: f64,
    kernel: KernelConfig,
) -> Result<RidgeModel> {
    kernel.validate()?;
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot fit on zero items".into()));
    }
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, found: labels.len() });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidInput("non-finite label".into()));
    }
    check_family(embeddings)?;
    let y = DVector::from_column_slice(labels);
    let alpha = solve_shifted(gram, n as f64 * lambda, &y)?;
    Ok(RidgeModel {
        embeddings: embeddings.to_vec(),
        kernel,
        lambda,
        alpha: alpha.as_slice().to_vec(),
    })
}

impl RidgeModel {
    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        self.embeddings[0].fingerprint()
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `sum_i alpha_i K(query, x_i)`.
    pub fn predict(&self, query: &EmbeddingVector) -> Result<f64> {
        squared_distance(&self.embeddings[0], query)?;
        Ok(self
            .embeddings
            .iter()
            .zip(&self.alpha)
            .map(|(e, a)| a * self.kernel.from_squared(squared_distance_unchecked(e, query)))
            .sum())
    }

    pub fn predict_batch(&self, queries: &[EmbeddingVector]) -> Result<Vec<f64>> {
        par::try_map_indexed(queries.len(), |i| self.predict(&queries[i]))
    }

    /// `(1/n) sum_i (y_i - f(x_i))^2 + lambda alpha' G alpha`.
    pub fn regularized_risk(&self, labels: &[f64]) -> Result<f64> {
        let gram = gram_matrix(&self.kernel, &self.embeddings)?;
        Ok(regularized_risk(&gram, &self.alpha, labels, self.lambda))
    }
}

/// Ridge objective for coefficients `alpha` under Gram `gram`.
pub fn regularized_risk(gram: &DMatrix<f64>, alpha: &[f64], labels: &[f64], lambda: f64) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let fitted = gram * &a;
    let n = labels.len() as f64;
    let loss: f64 = fitted.iter().zip(labels).map(|(f, y)| (y - f) * (y - f)).sum::<f64>() / n;
    loss + lambda * a.dot(&fitted)
}

/// `|f_a - f_b|` in the RKHS of the shared kernel, clamped at zero.
pub fn rkhs_distance(a: &RidgeModel, b: &RidgeModel) -> Result<f64> {
    if a.kernel != b.kernel {
        return Err(Error::InvalidInput("models use different kernels".into()));
    }
    let cfg = a.kernel;
    let quad = |x: &[EmbeddingVector], ax: &[f64], y: &[EmbeddingVector], ay: &[f64]| -> Result<f64> {
        let k = cross_gram(&cfg, x, y)?;
        Ok(DVector::from_column_slice(ax).dot(&(k * DVector::from_column_slice(ay))))
    };
    let aa = quad(&a.embeddings, &a.alpha, &a.embeddings, &a.alpha)?;
    let ab = quad(&a.embeddings, &a.alpha, &b.embeddings, &b.alpha)?;
    let bb = quad(&b.embeddings, &b.alpha, &b.embeddings, &b.alpha)?;
    Ok((aa - 2.0 * ab + bb).max(0.0).sqrt())
}

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub kernel: KernelConfig,
    pub lambda: f64,
    pub fingerprint: Fingerprint,
    pub embeddings: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl RidgeModel {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            kernel: self.kernel,
            lambda: self.lambda,
            fingerprint: self.fingerprint().clone(),
            embeddings: self.embeddings.iter().map(|e| e.coords().to_vec()).collect(),
            weights: self.embeddings[0].weights().to_vec(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        doc.kernel.validate()?;
        if doc.embeddings.is_empty() || doc.embeddings.len() != doc.alpha.len() {
            return Err(Error::InvalidInput("model needs one alpha per embedding".into()));
        }
        if !(doc.lambda > 0.0) {
            return Err(Error::InvalidConfig("model lambda must be positive".into()));
        }
        let weights: Arc<[f64]> = doc.weights.into();
        let embeddings = doc
            .embeddings
            .into_iter()
            .map(|c| EmbeddingVector::new(c, weights.clone(), doc.fingerprint.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(RidgeModel {
            embeddings,
            kernel: doc.kernel,
            lambda: doc.lambda,
            alpha: doc.alpha,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// How training items are split during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CvScheme {
    /// Independent random splits holding out `test_fraction` of the items.
    Holdout { splits: usize, test_fraction: f64 },
    /// One random permutation cut into `folds` contiguous folds.
    KFold { folds: usize },
}

impl Default for CvScheme {
    fn default() -> Self {
        CvScheme::Holdout { splits: 10, test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub lambdas: Vec<f64>,
    pub length_scales: Vec<f64>,
    #[serde(default)]
    pub scheme: CvScheme,
    pub seed: u64,
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.length_scales.is_empty() {
            return Err(Error::InvalidConfig("cross-validation grids must be non-empty".into()));
        }
        for &l in &self.lambdas {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")));
            }
        }
        for &s in &self.length_scales {
            KernelConfig { length_scale: s }.validate()?;
        }
        match self.scheme {
            CvScheme::Holdout { splits, test_fraction } => {
                if splits == 0 || !(test_fraction > 0.0 && test_fraction < 1.0) {
                    return Err(Error::InvalidConfig(
                        "holdout needs splits >= 1 and test_fraction in (0, 1)".into(),
                    ));
                }
            }
            CvScheme::KFold { folds } => {
                if folds < 2 {
                    return Err(Error::InvalidConfig("k-fold needs folds >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// `n` points spaced evenly in log scale between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub lambda: f64,
    pub length_scale: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub length_scale: f64,
    pub table: Vec<CvEntry>,
}

fn cv_splits(n: usize, scheme: CvScheme, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    match scheme {
        CvScheme::Holdout { splits, test_fraction } => {
            if n < 2 {
                return Err(Error::TooFewItems { items: n, folds: 2 });
            }
            let test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
            Ok((0..splits)
                .map(|s| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut child_rng(seed, &[stream::CV_SPLITS, s as u64]));
                    let (te, tr) = idx.split_at(test);
                    (tr.to_vec(), te.to_vec())
                })
                .collect())
        }
        CvScheme::KFold { folds } => {
            if n < folds {
                return Err(Error::TooFewItems { items: n, folds });
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut child_rng(seed, &[stream::CV_SPLITS]));
            Ok((0..folds)
                .map(|f| {
                    let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
                    let test = idx[lo..hi].to_vec();
                    let train = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
                    (train, test)
                })
                .collect())
        }
    }
}

/// Grid search over `(lambda, length_scale)` by mean held-out squared error.
/// Ties (relative 1e-12) go to the larger lambda, then the larger length scale.
pub fn cross_validate(embeddings: &[EmbeddingVector], labels: &[f64], cfg: &CvConfig) -> Result<CvResult> {
    cfg.validate()?;
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, found: labels.len() });
    }
    let splits = cv_splits(n, cfg.scheme, cfg.seed)?;
    let d2 = squared_distance_matrix(embeddings)?;
    let (nl, ns) = (cfg.lambdas.len(), cfg.length_scales.len());

    // errors[split][s * nl + l]
    let errors = par::try_map_indexed(splits.len(), |s| -> Result<Vec<f64>> {
        let (train, test) = &splits[s];
        let y = DVector::from_iterator(train.len(), train.iter().map(|&i| labels[i]));
        let mut out = Vec::with_capacity(nl * ns);
        for &ls in &cfg.length_scales {
            let k = KernelConfig { length_scale: ls };
            let g = DMatrix::from_fn(train.len(), train.len(), |a, b| k.from_squared(d2[(train[a], train[b])]));
            let kt = DMatrix::from_fn(test.len(), train.len(), |a, b| k.from_squared(d2[(test[a], train[b])]));
            for &lambda in &cfg.lambdas {
                let alpha = solve_shifted(&g, train.len() as f64 * lambda, &y)?;
                let pred = &kt * alpha;
                let mse = test
                    .iter()
                    .zip(pred.iter())
                    .map(|(&i, p)| (labels[i] - p) * (labels[i] - p))
                    .sum::<f64>()
                    / test.len() as f64;
                out.push(mse);
            }
        }
        Ok(out)
    })?;

    let mut table = Vec::with_capacity(nl * ns);
    for (si, &ls) in cfg.length_scales.iter().enumerate() {
        for (li, &lambda) in cfg.lambdas.iter().enumerate() {
            let mse = errors.iter().map(|e| e[si * nl + li]).sum::<f64>() / errors.len() as f64;
            table.push(CvEntry { lambda, length_scale: ls, mse });
        }
    }
    let best = select_best(&table);
    Ok(CvResult {
        lambda: best.lambda,
        length_scale: best.length_scale,
        table,
    })
}

fn select_best(table: &[CvEntry]) -> &CvEntry {
    let mut best = &table[0];
    for e in &table[1..] {
        let tol = 1e-12 * best.mse.abs().max(e.mse.abs());
        let stronger = (e.lambda, e.length_scale) > (best.lambda, best.length_scale);
        if e.mse < best.mse - tol || ((e.mse - best.mse).abs() <= tol && stronger) {
            best = e;
        }
    }
    best
}
