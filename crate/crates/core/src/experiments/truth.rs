//! Distributions with closed-form embeddings, used as ground truth.
//!
//! When no closed form exists for an embedding the truth is approximated by
//! embedding [`LARGE_SAMPLE`] draws.

use std::f64::consts::SQRT_2;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::distributions::EmpiricalDistribution;
use crate::embeddings::{Embedder, EmbeddingConfig, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rng::{child_rng, stream, Rng};

/// Sample size standing in for the exact embedding when none is analytic.
pub const LARGE_SAMPLE: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrueDistribution {
    /// One-dimensional `U[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Isotropic `N(mean, std^2 I)`.
    Gaussian { mean: Vec<f64>, std: f64 },
}

/// How a ground-truth embedding was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    Analytic,
    LargeSample,
}

impl TrueDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrueDistribution::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            TrueDistribution::Gaussian { mean, std }
                if !mean.is_empty() && mean.iter().all(|m| m.is_finite()) && *std > 0.0 && std.is_finite() =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!("invalid true distribution {self:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrueDistribution::Uniform { .. } => 1,
            TrueDistribution::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            TrueDistribution::Uniform { lo, hi } => vec![0.5 * (lo + hi)],
            TrueDistribution::Gaussian { mean, .. } => mean.clone(),
        }
    }

    /// Appends `count` i.i.d. draws (row-major) to `out`.
    pub fn sample_into(&self, count: usize, rng: &mut Rng, out: &mut Vec<f64>) {
        match self {
            TrueDistribution::Uniform { lo, hi } => {
                out.extend((0..count).map(|_| lo + (hi - lo) * rng.random::<f64>()));
            }
            TrueDistribution::Gaussian { mean, std } => {
                for _ in 0..count {
                    out.extend(mean.iter().map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + std * z
                    }));
                }
            }
        }
    }

    pub fn sample(&self, group_id: impl Into<String>, count: usize, rng: &mut Rng) -> Result<EmpiricalDistribution> {
        let mut pts = Vec::with_capacity(count * self.dim());
        self.sample_into(count, rng, &mut pts);
        EmpiricalDistribution::new(group_id, self.dim(), pts)
    }

    /// Law of `<theta, X>` as `(location, scale, is_uniform)`: uniform on
    /// `[location, location + scale]` or Gaussian `N(location, scale^2)`.
    fn projection(&self, theta: &[f64]) -> (f64, f64, bool) {
        match self {
            TrueDistribution::Uniform { lo, hi } => {
                let (a, b) = (theta[0] * lo, theta[0] * hi);
                (a.min(b), (b - a).abs(), true)
            }
            TrueDistribution::Gaussian { mean, std } => {
                let loc = theta.iter().zip(mean).map(|(t, m)| t * m).sum();
                let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                (loc, std * norm, false)
            }
        }
    }

    /// Quantile function of `<theta, X>` at `t` in (0, 1).
    pub fn projected_quantile(&self, theta: &[f64], t: f64) -> f64 {
        match self.projection(theta) {
            (loc, scale, true) => loc + scale * t,
            (loc, scale, false) => loc + scale * std_normal().inverse_cdf(t),
        }
    }

    /// C.d.f. of `<theta, X>`.
    pub fn projected_cdf(&self, theta: &[f64], x: f64) -> f64 {
        match self.projection(theta) {
            (loc, scale, true) => ((x - loc) / scale).clamp(0.0, 1.0),
            (loc, scale, false) => std_normal().cdf((x - loc) / scale),
        }
    }

    /// Density of `<theta, X>`.
    pub fn projected_pdf(&self, theta: &[f64], x: f64) -> f64 {
        match self.projection(theta) {
            (loc, scale, true) => {
                if x >= loc && x <= loc + scale {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            (loc, scale, false) => std_normal().pdf((x - loc) / scale) / scale,
        }
    }

    /// `E cos(<omega, X> + b)`.
    pub fn mean_cosine(&self, omega: &[f64], b: f64) -> f64 {
        match self {
            TrueDistribution::Uniform { lo, hi } => {
                let w = omega[0];
                if w == 0.0 {
                    b.cos()
                } else {
                    ((w * hi + b).sin() - (w * lo + b).sin()) / (w * (hi - lo))
                }
            }
            TrueDistribution::Gaussian { mean, std } => {
                let w2: f64 = omega.iter().map(|o| o * o).sum();
                let phase: f64 = omega.iter().zip(mean).map(|(o, m)| o * m).sum::<f64>() + b;
                (-0.5 * w2 * std * std).exp() * phase.cos()
            }
        }
    }

    /// Exact embedding coordinates, when a closed form exists.
    pub fn analytic_embedding(&self, embedder: &Embedder) -> Option<Vec<f64>> {
        match embedder.config() {
            EmbeddingConfig::MeanLinear => Some(self.mean()),
            EmbeddingConfig::MeanRff { .. } => {
                let (freq, phases) = embedder.fourier_features()?;
                Some(
                    freq.chunks_exact(self.dim())
                        .zip(phases)
                        .map(|(w, &b)| SQRT_2 * self.mean_cosine(w, b))
                        .collect(),
                )
            }
            EmbeddingConfig::SlicedWasserstein { .. } => {
                let (dirs, levels) = embedder.slicing_grid()?;
                Some(
                    dirs.chunks_exact(self.dim())
                        .flat_map(|theta| levels.iter().map(move |&t| self.projected_quantile(theta, t)))
                        .collect(),
                )
            }
            EmbeddingConfig::Sinkhorn { .. } => None,
        }
    }

    /// Analytic embedding, else the embedding of [`LARGE_SAMPLE`] draws.
    pub fn truth_embedding(&self, embedder: &Embedder, seed: u64) -> Result<(EmbeddingVector, TruthSource)> {
        if embedder.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: embedder.dim(),
                found: self.dim(),
            });
        }
        match self.analytic_embedding(embedder) {
            Some(c) => Ok((embedder.vector(c)?, TruthSource::Analytic)),
            None => {
                let mut rng = child_rng(seed, &[stream::TRUTH]);
                let d = self.sample("truth", LARGE_SAMPLE, &mut rng)?;
                Ok((embedder.embed(&d)?, TruthSource::LargeSample))
            }
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Random true distributions with scalar labels for the rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthModel {
    /// `N(m, s^2 I)` with `m_j ~ U[mean_range]`, `s ~ U[std_range]`; label is
    /// the first mean coordinate clipped to `[-1, 1]`.
    RandomGaussian {
        dim: usize,
        mean_range: [f64; 2],
        std_range: [f64; 2],
    },
}

impl Default for TruthModel {
    fn default() -> Self {
        TruthModel::RandomGaussian {
            dim: 1,
            mean_range: [-1.5, 1.5],
            std_range: [0.5, 1.5],
        }
    }
}

impl TruthModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            TruthModel::RandomGaussian { dim, mean_range, std_range } => {
                if *dim == 0 || !(mean_range[0] <= mean_range[1]) || !(std_range[0] > 0.0 && std_range[0] <= std_range[1]) {
                    return Err(Error::InvalidConfig(format!("invalid truth model {self:?}")));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TruthModel::RandomGaussian { dim, .. } => *dim,
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> (TrueDistribution, f64) {
        match self {
            TruthModel::RandomGaussian { dim, mean_range, std_range } => {
                let mean: Vec<f64> = (0..*dim).map(|_| uniform(rng, *mean_range)).collect();
                let std = uniform(rng, *std_range);
                let label = mean[0].clamp(-1.0, 1.0);
                (TrueDistribution::Gaussian { mean, std }, label)
            }
        }
    }
}

fn uniform(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::DirectionScheme;

    #[test]
    fn uniform_closed_forms() {
        let u = TrueDistribution::Uniform { lo: 0.0, hi: 1.0 };
        assert_eq!(u.projected_quantile(&[1.0], 0.25), 0.25);
        assert_eq!(u.projected_quantile(&[-1.0], 0.25), -0.75);
        assert_eq!(u.projected_cdf(&[1.0], 0.3), 0.3);
        assert_eq!(u.projected_pdf(&[1.0], 0.3), 1.0);
        // E cos(U + 0) = sin 1.
        assert!((u.mean_cosine(&[1.0], 0.0) - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_closed_forms() {
        let g = TrueDistribution::Gaussian { mean: vec![1.0, 2.0], std: 2.0 };
        let theta = [0.6, 0.8];
        assert!((g.projected_quantile(&theta, 0.5) - 2.2).abs() < 1e-12);
        assert!((g.projected_quantile(&theta, 0.975) - (2.2 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-9);
        assert!((g.projected_cdf(&theta, 2.2) - 0.5).abs() < 1e-15);
    }

    fn monte_carlo_check(cfg: EmbeddingConfig, truth: TrueDistribution) {
        let emb = Embedder::new(&cfg, truth.dim()).unwrap();
        let exact = truth.analytic_embedding(&emb).unwrap();
        let mut rng = child_rng(5, &[1]);
        let approx = emb.embed(&truth.sample("x", 200_000, &mut rng).unwrap()).unwrap();
        for (a, b) in exact.iter().zip(approx.coords()) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn analytic_embeddings_match_large_samples() {
        let u = TrueDistribution::Uniform { lo: -0.5, hi: 2.0 };
        let g = TrueDistribution::Gaussian { mean: vec![0.3, -0.4], std: 0.7 };
        let rff = EmbeddingConfig::MeanRff { num_features: 8, bandwidth: 1.0, seed: 2 };
        let sw = EmbeddingConfig::SlicedWasserstein {
            num_directions: 3,
            num_quantiles: 5,
            trim: 0.1,
            seed: 4,
            directions: DirectionScheme::Random,
        };
        for t in [u, g] {
            monte_carlo_check(EmbeddingConfig::MeanLinear, t.clone());
            monte_carlo_check(rff.clone(), t.clone());
            monte_carlo_check(sw.clone(), t);
        }
    }

    #[test]
    fn truth_model_labels_are_clipped() {
        let m = TruthModel::RandomGaussian { dim: 1, mean_range: [-3.0, 3.0], std_range: [1.0, 1.0] };
        let mut rng = child_rng(0, &[0]);
        for _ in 0..100 {
            let (d, y) = m.draw(&mut rng);
            assert_eq!(y, d.mean()[0].clamp(-1.0, 1.0));
        }
    }
}
