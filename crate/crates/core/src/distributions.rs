//! Sampled distributions, labelled datasets and the synthetic task generators.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Borrowed row-major point cloud.
#[derive(Debug, Clone, Copy)]
pub struct PointSet<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> PointSet<'a> {
    /// Panics if `data.len()` is not a multiple of `dim`.
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged point buffer");
        PointSet { data, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, f64> {
        self.data.chunks_exact(self.dim)
    }
}

/// `N` samples in `R^d` standing for the empirical measure `(1/N) sum_j delta_{X_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    group_id: String,
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalDistribution {
    /// `points` is row-major with `dim` columns.
    pub fn new(group_id: impl Into<String>, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form a non-empty {}-column sample matrix",
                points.len(),
                dim
            )));
        }
        if let Some(bad) = points.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample value {bad}")));
        }
        Ok(EmpiricalDistribution {
            group_id: group_id.into(),
            dim,
            points,
        })
    }

    pub fn from_rows(group_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(group_id, dim, rows.concat())
    }

    pub fn group_id(&self) -> &str {
        &self.group_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> PointSet<'_> {
        PointSet::new(&self.points, self.dim)
    }

    /// New distribution made of the rows at `indices`, in that order.
    pub fn subset(&self, group_id: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(indices.len() * self.dim);
        for &j in indices {
            pts.extend_from_slice(self.row(j));
        }
        Self::new(group_id, self.dim, pts)
    }
}

/// Ordered `(distribution, label)` pairs sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    dim: usize,
    distributions: Vec<EmpiricalDistribution>,
    labels: Vec<f64>,
}

impl RegressionDataset {
    pub fn new(dim: usize, distributions: Vec<EmpiricalDistribution>, labels: Vec<f64>) -> Result<Self> {
        if distributions.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} distributions but {} labels",
                distributions.len(),
                labels.len()
            )));
        }
        if let Some(d) = distributions.iter().find(|d| d.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: d.dim(),
            });
        }
        if let Some(y) = labels.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite label {y}")));
        }
        Ok(RegressionDataset {
            dim,
            distributions,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn distributions(&self) -> &[EmpiricalDistribution] {
        &self.distributions
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Sub-dataset with the items at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RegressionDataset {
        RegressionDataset {
            dim: self.dim,
            distributions: indices.iter().map(|&i| self.distributions[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Discrete measure with explicit weights, used as the Sinkhorn reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl ReferenceMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput("reference points must form a non-empty matrix".into()));
        }
        if points.len() / dim != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} reference points but {} weights",
                points.len() / dim,
                weights.len()
            )));
        }
        check_simplex(&weights)?;
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite reference point".into()));
        }
        Ok(ReferenceMeasure { dim, points, weights })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let m = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, vec![1.0 / m.max(1) as f64; m])
    }

    /// `count` atoms drawn uniformly in the unit ball of `R^dim`, equal weights.
    pub fn uniform_ball(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if dim == 0 || count == 0 {
            return Err(Error::InvalidConfig("reference needs dim >= 1 and count >= 1".into()));
        }
        let mut rng = rng::child_rng(seed, &[rng::stream::REFERENCE]);
        let mut points = Vec::with_capacity(dim * count);
        for _ in 0..count {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let radius = rng.random::<f64>().powf(1.0 / dim as f64);
            points.extend(z.iter().map(|v| v / norm * radius));
        }
        Self::uniform(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> PointSet<'_> {
        PointSet::new(&self.points, self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Weights must be positive, finite, and sum to one within `1e-9`.
pub fn check_simplex(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidInput("empty weight vector".into()));
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("weights must be positive and finite".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Gaussian-mixture mode-counting task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmTaskConfig {
    pub dim: usize,
    /// Largest possible number of modes `C`.
    pub max_modes: usize,
    /// Number of mixtures `n`.
    pub n: usize,
    /// Samples per mixture `N`.
    pub samples: usize,
    pub seed: u64,
}

impl GmmTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.max_modes == 0 || self.n == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig(
                "gmm task needs dim, max_modes, n and samples all >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianComponent {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower Cholesky factor of `cov` (possibly of `cov + 1e-10 I`).
    pub chol: DMatrix<f64>,
}

/// Equal-weight Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    /// Draws `p` components: mean in `[-5,5]^d`, covariance `a A A^T + B`
    /// with `a ~ U[1,4]`, `A_ij ~ U[-1,1]` and diagonal `B_ii ~ U[0,1]`.
    pub fn random(dim: usize, modes: usize, rng: &mut Rng) -> Self {
        let components = (0..modes)
            .map(|_| {
                let mean = DVector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
                let a: f64 = rng.random_range(1.0..4.0);
                let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                let diag = DVector::from_fn(dim, |_, _| rng.random::<f64>());
                let cov = (&m * m.transpose()) * a + DMatrix::from_diagonal(&diag);
                let chol = lower_cholesky(&cov);
                GaussianComponent { mean, cov, chol }
            })
            .collect();
        GaussianMixture { components }
    }

    /// One draw; the component index is uniform.
    pub fn sample(&self, rng: &mut Rng, out: &mut Vec<f64>) {
        let c = &self.components[rng.random_range(0..self.components.len())];
        let d = c.mean.len();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let x = &c.mean + &c.chol * z;
        out.extend(x.iter());
    }
}

fn lower_cholesky(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = cov.clone().cholesky() {
        return c.l();
    }
    let jittered = cov + DMatrix::identity(cov.nrows(), cov.ncols()) * 1e-10;
    jittered
        .cholesky()
        .map(|c| c.l())
        .expect("a A A^T + B + 1e-10 I is positive definite")
}

/// Label is the number of modes `p ~ Uniform{1..C}` of each sampled mixture.
pub fn sample_gmm_task(cfg: &GmmTaskConfig) -> Result<RegressionDataset> {
    cfg.validate()?;
    let items: Vec<(EmpiricalDistribution, f64)> = crate::par::map_indexed(cfg.n, |i| {
        let mut rng = rng::child_rng(cfg.seed, &[rng::stream::GMM_ITEM, i as u64]);
        let modes = rng.random_range(1..=cfg.max_modes);
        let mixture = GaussianMixture::random(cfg.dim, modes, &mut rng);
        let mut pts = Vec::with_capacity(cfg.samples * cfg.dim);
        for _ in 0..cfg.samples {
            mixture.sample(&mut rng, &mut pts);
        }
        let dist = EmpiricalDistribution::new(format!("gmm{i}"), cfg.dim, pts)
            .expect("finite samples");
        (dist, modes as f64)
    });
    let (dists, labels) = items.into_iter().unzip();
    RegressionDataset::new(cfg.dim, dists, labels)
}

/// Synthetic ecological-inference task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcologicalTaskConfig {
    pub dim: usize,
    /// Number of groups `n`.
    pub n: usize,
    /// Individuals per group `N`.
    pub samples: usize,
    pub seed: u64,
}

impl EcologicalTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidConfig("ecological task needs dim >= 2".into()));
        }
        if self.n == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig("ecological task needs n, samples >= 1".into()));
        }
        Ok(())
    }
}

/// Groups with `X = A 1_d + B`, `A ~ U[-alpha, alpha]`,
/// `B ~ N((beta_1, beta_2, 0, ...), I/4)`, individual votes with logit
/// `10 (X_1 - X_2)`; the label is the group's vote share.
pub fn sample_ecological_task(cfg: &EcologicalTaskConfig) -> Result<RegressionDataset> {
    cfg.validate()?;
    let d = cfg.dim;
    let items: Vec<(EmpiricalDistribution, f64)> = crate::par::map_indexed(cfg.n, |i| {
        let mut rng = rng::child_rng(cfg.seed, &[rng::stream::ECO_GROUP, i as u64]);
        let alpha: f64 = rng.random_range(0.05..0.1);
        let beta1: f64 = rng.random_range(-0.7..0.7);
        let beta2: f64 = rng.random_range(-0.7..0.7);
        let mut pts = Vec::with_capacity(cfg.samples * d);
        let mut votes = 0usize;
        for _ in 0..cfg.samples {
            let a: f64 = rng.random_range(-alpha..alpha);
            let start = pts.len();
            for k in 0..d {
                let shift = match k {
                    0 => beta1,
                    1 => beta2,
                    _ => 0.0,
                };
                let z: f64 = StandardNormal.sample(&mut rng);
                pts.push(a + shift + 0.5 * z);
            }
            let logit = 10.0 * (pts[start] - pts[start + 1]);
            let p = 1.0 / (1.0 + (-logit).exp());
            if rng.random::<f64>() < p {
                votes += 1;
            }
        }
        let dist = EmpiricalDistribution::new(format!("eco{i}"), d, pts).expect("finite samples");
        (dist, votes as f64 / cfg.samples as f64)
    });
    let (dists, labels) = items.into_iter().unzip();
    RegressionDataset::new(d, dists, labels)
}
