//! Hilbertian embeddings of sampled distributions.
//!
//! Every embedding produces a finite coordinate vector together with positive
//! quadrature weights summing to one; the Hilbert norm is approximated by the
//! weighted Euclidean norm `sqrt(sum_k w_k u_k^2)`.
//!
//! * `MeanLinear`: column means, weights `1/d`.
//! * `MeanRff`: random Fourier features of a Gaussian base kernel with
//!   bandwidth `sigma`, averaged over the sample, weights `1/m`.
//! * `SlicedWasserstein`: empirical quantiles of the projections on
//!   `m_theta` directions at the midpoint levels
//!   `t_l = eps + (l - 1/2)(1 - 2 eps)/m_t`, uniform weights.
//! * `Sinkhorn`: centered entropic dual potential on the reference atoms,
//!   weights = reference weights.
//!
//! Random features and directions come from the configuration seed, so every
//! distribution embedded with one configuration shares the same grid.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::{EmpiricalDistribution, ReferenceMeasure};
use crate::error::{Error, Result};
use crate::rng;
use crate::sinkhorn::{self, SinkhornMethod, SinkhornParams};

/// How sliced-Wasserstein directions are chosen when `d >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DirectionScheme {
    /// Normalized Gaussian vectors drawn from the seed.
    #[default]
    Random,
    /// `d = 2` only: angles `(k/m - 1/2) pi`, `k = 1..m`.
    HalfCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    MeanLinear,
    MeanRff {
        num_features: usize,
        bandwidth: f64,
        seed: u64,
    },
    SlicedWasserstein {
        num_directions: usize,
        num_quantiles: usize,
        #[serde(default)]
        trim: f64,
        seed: u64,
        #[serde(default)]
        directions: DirectionScheme,
    },
    Sinkhorn {
        reference: ReferenceMeasure,
        reg: f64,
        tol: f64,
        max_iter: usize,
        #[serde(default)]
        method: SinkhornMethod,
    },
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            EmbeddingConfig::MeanLinear => Ok(()),
            EmbeddingConfig::MeanRff { num_features, bandwidth, .. } => {
                if *num_features == 0 {
                    return Err(Error::InvalidConfig("mean_rff needs num_features >= 1".into()));
                }
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(Error::InvalidConfig("mean_rff bandwidth must be positive".into()));
                }
                Ok(())
            }
            EmbeddingConfig::SlicedWasserstein { num_directions, num_quantiles, trim, .. } => {
                if *num_directions == 0 || *num_quantiles == 0 {
                    return Err(Error::InvalidConfig(
                        "sliced_wasserstein needs num_directions and num_quantiles >= 1".into(),
                    ));
                }
                if !(0.0..0.5).contains(trim) {
                    return Err(Error::InvalidConfig(format!("trim must lie in [0, 1/2), got {trim}")));
                }
                Ok(())
            }
            EmbeddingConfig::Sinkhorn { .. } => self.sinkhorn_params().expect("sinkhorn variant").validate(),
        }
    }

    pub fn sinkhorn_params(&self) -> Option<SinkhornParams> {
        match self {
            EmbeddingConfig::Sinkhorn { reg, tol, max_iter, method, .. } => Some(SinkhornParams {
                reg: *reg,
                tol: *tol,
                max_iter: *max_iter,
                method: *method,
            }),
            _ => None,
        }
    }

    /// Short name used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            EmbeddingConfig::MeanLinear => "mean_linear",
            EmbeddingConfig::MeanRff { .. } => "mean_rff",
            EmbeddingConfig::SlicedWasserstein { .. } => "sliced_wasserstein",
            EmbeddingConfig::Sinkhorn { .. } => "sinkhorn",
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let bytes = serde_json::to_vec(self).expect("embedding config serializes");
        let digest = Sha256::digest(&bytes);
        Fingerprint(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Hash identifying the configuration that produced an embedding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub String);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Coordinates of one embedded distribution plus the quadrature weights of
/// the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    coords: Vec<f64>,
    weights: Arc<[f64]>,
    fingerprint: Fingerprint,
}

impl EmbeddingVector {
    /// Fails if lengths differ, weights are not a positive simplex, or any
    /// coordinate is non-finite.
    pub fn new(coords: Vec<f64>, weights: Arc<[f64]>, fingerprint: Fingerprint) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                found: coords.len(),
            });
        }
        crate::distributions::check_simplex(&weights)?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite embedding coordinate".into()));
        }
        Ok(EmbeddingVector { coords, weights, fingerprint })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shared_weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Weighted inner product with a raw vector of the same length.
    pub fn dot(&self, other: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.coords)
            .zip(other)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }
}

fn check_comparable(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<()> {
    if u.fingerprint != v.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: u.fingerprint.0.clone(),
            found: v.fingerprint.0.clone(),
        });
    }
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `sum_k w_k (u_k - v_k)^2`.
pub fn squared_distance(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    check_comparable(u, v)?;
    Ok(squared_distance_unchecked(u, v))
}

#[inline]
pub(crate) fn squared_distance_unchecked(u: &EmbeddingVector, v: &EmbeddingVector) -> f64 {
    u.weights
        .iter()
        .zip(&u.coords)
        .zip(&v.coords)
        .map(|((w, a), b)| w * (a - b) * (a - b))
        .sum()
}

/// Weighted Euclidean distance between two embeddings of one configuration.
pub fn embedding_distance(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    squared_distance(u, v).map(f64::sqrt)
}

/// Index (0-based) of the left-continuous empirical inverse c.d.f. at `t`:
/// the smallest `k` with `k / n >= t`, minus one.
#[inline]
pub fn quantile_index(n: usize, t: f64) -> usize {
    let nf = n as f64;
    let mut k = (nf * t).ceil() as usize;
    // Undo a ceil pushed up by rounding in n * t.
    if k > 1 && (k - 1) as f64 / nf >= t {
        k -= 1;
    }
    k.clamp(1, n) - 1
}

/// `inf { x : G(x) >= t }` for the empirical c.d.f. `G` of `sorted_samples`.
pub fn empirical_quantile(sorted_samples: &[f64], t: f64) -> Result<f64> {
    if sorted_samples.is_empty() {
        return Err(Error::InvalidInput("empirical quantile of an empty sample".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level {t} outside (0, 1)")));
    }
    Ok(sorted_samples[quantile_index(sorted_samples.len(), t)])
}

/// Midpoint levels `eps + (l - 1/2)(1 - 2 eps)/m`, `l = 1..m`.
pub fn quantile_levels(count: usize, trim: f64) -> Vec<f64> {
    let width = (1.0 - 2.0 * trim) / count as f64;
    (0..count).map(|l| trim + (l as f64 + 0.5) * width).collect()
}

/// Unit directions for a sliced-Wasserstein grid, row-major `m x d`.
pub fn slicing_directions(dim: usize, count: usize, scheme: DirectionScheme, seed: u64) -> Result<Vec<f64>> {
    if dim == 1 {
        return Ok(vec![1.0]);
    }
    match scheme {
        DirectionScheme::HalfCircle => {
            if dim != 2 {
                return Err(Error::InvalidConfig("half_circle directions need d = 2".into()));
            }
            Ok((1..=count)
                .flat_map(|k| {
                    let a = (k as f64 / count as f64 - 0.5) * PI;
                    [a.cos(), a.sin()]
                })
                .collect())
        }
        DirectionScheme::Random => {
            let mut rng = rng::child_rng(seed, &[rng::stream::SW_DIRECTIONS]);
            let mut out = Vec::with_capacity(count * dim);
            while out.len() < count * dim {
                let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    out.extend(z.iter().map(|v| v / norm));
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    MeanLinear,
    Rff {
        /// `m x d`, rows `omega_k ~ N(0, sigma^-2 I)`.
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    Sliced {
        directions: Vec<f64>,
        levels: Vec<f64>,
    },
    Sinkhorn {
        reference: ReferenceMeasure,
        params: SinkhornParams,
    },
}

/// An embedding configuration bound to an ambient dimension, with its random
/// grid materialized once.
#[derive(Debug, Clone)]
pub struct Embedder {
    config: EmbeddingConfig,
    dim: usize,
    fingerprint: Fingerprint,
    weights: Arc<[f64]>,
    prepared: Prepared,
}

impl Embedder {
    pub fn new(config: &EmbeddingConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let (prepared, len) = match config {
            EmbeddingConfig::MeanLinear => (Prepared::MeanLinear, dim),
            &EmbeddingConfig::MeanRff { num_features, bandwidth, seed } => {
                let mut rng = rng::child_rng(seed, &[rng::stream::RFF_FEATURES]);
                let mut frequencies = Vec::with_capacity(num_features * dim);
                let mut phases = Vec::with_capacity(num_features);
                for _ in 0..num_features {
                    for _ in 0..dim {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        frequencies.push(z / bandwidth);
                    }
                    phases.push(rng.random_range(0.0..2.0 * PI));
                }
                (Prepared::Rff { frequencies, phases }, num_features)
            }
            &EmbeddingConfig::SlicedWasserstein { num_directions, num_quantiles, trim, seed, directions } => {
                let dirs = slicing_directions(dim, num_directions, directions, seed)?;
                let levels = quantile_levels(num_quantiles, trim);
                let len = dirs.len() / dim * levels.len();
                (Prepared::Sliced { directions: dirs, levels }, len)
            }
            EmbeddingConfig::Sinkhorn { reference, .. } => {
                if reference.dim() != dim {
                    return Err(Error::Dimension {
                        expected: reference.dim(),
                        found: dim,
                    });
                }
                let params = config.sinkhorn_params().expect("sinkhorn variant");
                (
                    Prepared::Sinkhorn {
                        reference: reference.clone(),
                        params,
                    },
                    reference.len(),
                )
            }
        };
        let weights: Arc<[f64]> = match &prepared {
            Prepared::Sinkhorn { reference, .. } => reference.weights().into(),
            _ => vec![1.0 / len as f64; len].into(),
        };
        Ok(Embedder {
            config: config.clone(),
            dim,
            fingerprint: config.fingerprint(),
            weights,
            prepared,
        })
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    /// Embedding dimension `m`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(directions m_theta x d, levels)` for the sliced-Wasserstein grid.
    pub fn slicing_grid(&self) -> Option<(&[f64], &[f64])> {
        match &self.prepared {
            Prepared::Sliced { directions, levels } => Some((directions, levels)),
            _ => None,
        }
    }

    /// `(frequencies m x d, phases)` for random Fourier features.
    pub fn fourier_features(&self) -> Option<(&[f64], &[f64])> {
        match &self.prepared {
            Prepared::Rff { frequencies, phases } => Some((frequencies, phases)),
            _ => None,
        }
    }

    /// Wraps externally computed coordinates (e.g. an analytic embedding)
    /// with this embedder's weights and fingerprint.
    pub fn vector(&self, coords: Vec<f64>) -> Result<EmbeddingVector> {
        EmbeddingVector::new(coords, self.weights.clone(), self.fingerprint.clone())
    }

    pub fn embed(&self, dist: &EmpiricalDistribution) -> Result<EmbeddingVector> {
        if dist.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: dist.dim(),
            });
        }
        let n = dist.len() as f64;
        let coords = match &self.prepared {
            Prepared::MeanLinear => {
                let mut mean = vec![0.0; self.dim];
                for row in dist.points().rows() {
                    for (m, x) in mean.iter_mut().zip(row) {
                        *m += x;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                mean
            }
            Prepared::Rff { frequencies, phases } => frequencies
                .chunks_exact(self.dim)
                .zip(phases)
                .map(|(omega, b)| {
                    let s: f64 = dist
                        .points()
                        .rows()
                        .map(|x| (omega.iter().zip(x).map(|(o, xi)| o * xi).sum::<f64>() + b).cos())
                        .sum();
                    SQRT_2 * s / n
                })
                .collect(),
            Prepared::Sliced { directions, levels } => {
                let mut coords = Vec::with_capacity(self.len());
                let mut proj = Vec::with_capacity(dist.len());
                for theta in directions.chunks_exact(self.dim) {
                    proj.clear();
                    proj.extend(
                        dist.points()
                            .rows()
                            .map(|x| theta.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()),
                    );
                    proj.sort_unstable_by(f64::total_cmp);
                    coords.extend(levels.iter().map(|&t| proj[quantile_index(proj.len(), t)]));
                }
                coords
            }
            Prepared::Sinkhorn { reference, params } => {
                let a = vec![1.0 / n; dist.len()];
                let sol = sinkhorn::solve_dual(dist.points(), &a, reference.points(), reference.weights(), params)?;
                if !sol.converged {
                    return Err(Error::NonConvergence {
                        iterations: sol.iterations,
                        residual: sol.residual,
                    });
                }
                sol.g
            }
        };
        self.vector(coords)
    }

    /// Embeds every distribution, in parallel when available; output order
    /// follows the input.
    pub fn embed_all(&self, dists: &[EmpiricalDistribution]) -> Result<Vec<EmbeddingVector>> {
        crate::par::try_map_indexed(dists.len(), |i| self.embed(&dists[i]))
    }
}

/// One-shot embedding; builds the grid for `dist.dim()`.
pub fn embed(config: &EmbeddingConfig, dist: &EmpiricalDistribution) -> Result<EmbeddingVector> {
    Embedder::new(config, dist.dim())?.embed(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sw(dirs: usize, quantiles: usize, trim: f64) -> EmbeddingConfig {
        EmbeddingConfig::SlicedWasserstein {
            num_directions: dirs,
            num_quantiles: quantiles,
            trim,
            seed: 11,
            directions: DirectionScheme::Random,
        }
    }

    fn line(id: &str, xs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(id, 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn mean_linear_is_column_mean() {
        let d = EmpiricalDistribution::from_rows("a", &[vec![0.0, 0.0], vec![2.0, 4.0]]).unwrap();
        let e = embed(&EmbeddingConfig::MeanLinear, &d).unwrap();
        assert_eq!(e.coords(), &[1.0, 2.0]);
        assert_eq!(e.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&[7.0], 0.99).unwrap(), 7.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.51).unwrap(), 3.0);
        assert!(empirical_quantile(&[1.0], 0.0).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    /// `inf {x : G(x) >= t}` by scanning every step value.
    fn quantile_by_scan(sorted: &[f64], t: f64) -> f64 {
        let n = sorted.len() as f64;
        sorted
            .iter()
            .copied()
            .find(|&x| sorted.iter().filter(|&&y| y <= x).count() as f64 / n >= t)
            .unwrap()
    }

    #[test]
    fn quantile_matches_scan_on_decimal_levels() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        for k in 1..100 {
            let t = k as f64 / 100.0;
            assert_eq!(empirical_quantile(&xs, t).unwrap(), quantile_by_scan(&xs, t), "t = {t}");
        }
        // 10 * 0.3 rounds above 3 in floating point.
        assert_eq!(empirical_quantile(&xs, 0.3).unwrap(), 2.0);
    }

    #[test]
    fn sliced_two_atoms() {
        let e = embed(&sw(5, 2, 0.0), &line("a", &[1.0, 0.0])).unwrap();
        assert_eq!(e.coords(), &[0.0, 1.0]);
    }

    #[test]
    fn sliced_dirac_gap() {
        let cfg = sw(1, 7, 0.0);
        let a = embed(&cfg, &line("a", &[0.0])).unwrap();
        let b = embed(&cfg, &line("b", &[1.0])).unwrap();
        assert!((embedding_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(embedding_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn levels_are_midpoints() {
        let l = quantile_levels(4, 0.1);
        let want = [0.2, 0.4, 0.6, 0.8];
        for (a, b) in l.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn half_circle_directions() {
        let d = slicing_directions(2, 4, DirectionScheme::HalfCircle, 0).unwrap();
        assert_eq!(d.len(), 8);
        // k = 4 gives angle pi/2.
        assert!(d[6].abs() < 1e-15 && (d[7] - 1.0).abs() < 1e-15);
        assert!(slicing_directions(3, 4, DirectionScheme::HalfCircle, 0).is_err());
        let r = slicing_directions(5, 3, DirectionScheme::Random, 2).unwrap();
        for row in r.chunks(5) {
            assert!((row.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fingerprints_guard_distances() {
        let d = line("a", &[0.0, 1.0]);
        let a = embed(&sw(1, 2, 0.0), &d).unwrap();
        let b = embed(&sw(1, 3, 0.0), &d).unwrap();
        assert!(matches!(embedding_distance(&a, &b), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let emb = Embedder::new(&EmbeddingConfig::MeanLinear, 2).unwrap();
        assert!(matches!(emb.embed(&line("a", &[1.0])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(sw(0, 2, 0.0).validate().is_err());
        assert!(sw(1, 2, 0.5).validate().is_err());
        assert!(EmbeddingConfig::MeanRff { num_features: 4, bandwidth: 0.0, seed: 0 }.validate().is_err());
    }

    #[test]
    fn sinkhorn_single_atoms_give_zero_potential() {
        let reference = ReferenceMeasure::uniform(2, vec![3.0, -1.0]).unwrap();
        let cfg = EmbeddingConfig::Sinkhorn {
            reference,
            reg: 0.05,
            tol: 1e-9,
            max_iter: 10,
            method: SinkhornMethod::Scaling,
        };
        let d = EmpiricalDistribution::from_rows("x", &[vec![0.5, 0.25]]).unwrap();
        let e = embed(&cfg, &d).unwrap();
        assert_eq!(e.coords(), &[0.0]);
    }

    #[test]
    fn rff_estimates_gaussian_kernel() {
        let a = [0.3f64, -0.2];
        let b = [1.1f64, 0.4];
        let sigma = 0.8;
        let truth = (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / (2.0 * sigma * sigma)).exp();
        for m in [256usize, 4096] {
            let cfg = EmbeddingConfig::MeanRff { num_features: m, bandwidth: sigma, seed: 3 };
            let ea = embed(&cfg, &EmpiricalDistribution::from_rows("a", &[a.to_vec()]).unwrap()).unwrap();
            let eb = embed(&cfg, &EmpiricalDistribution::from_rows("b", &[b.to_vec()]).unwrap()).unwrap();
            // sum_k w_k z_k(a) z_k(b) = mean over features.
            let est = ea.dot(eb.coords());
            assert!((est - truth).abs() < 5.0 / (m as f64).sqrt(), "m {m}: {est} vs {truth}");
        }
    }
}
