//! Decay of `|f_n - f_{n,N}|` in the RKHS as the per-distribution sample size
//! grows, where `f_n` is fitted on exact embeddings and `f_{n,N}` on
//! embeddings of `N` draws.

use serde::{Deserialize, Serialize};

use super::stats;
use super::truth::{TruthModel, TruthSource};
use crate::embeddings::{Embedder, EmbeddingConfig, EmbeddingVector};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kernel_ridge::{fit, rkhs_distance, KernelConfig};
use crate::par;
use crate::rng::{child_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub truth: TruthModel,
    pub n_grid: Vec<usize>,
    pub sample_grid: Vec<usize>,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub replicates: usize,
    pub seed: u64,
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.truth.validate()?;
        self.kernel.validate()?;
        if self.n_grid.is_empty() || self.sample_grid.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidConfig("rate grids must be non-empty".into()));
        }
        if self.n_grid.contains(&0) || self.sample_grid.contains(&0) {
            return Err(Error::InvalidConfig("grid sizes must be positive".into()));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("lambdas must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub n: usize,
    pub samples: usize,
    pub lambda: f64,
    pub mean_distance: f64,
    pub std_distance: f64,
}

/// Slope of log mean distance against log N at fixed `(n, lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSlope {
    pub n: usize,
    pub lambda: f64,
    pub slope: Option<f64>,
}

/// Slope against log(nN) along cells with `N / n` fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSlope {
    pub lambda: f64,
    pub ratio: f64,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub embedding: String,
    pub truth_source: TruthSource,
    pub replicates: usize,
    pub seed: u64,
    pub cells: Vec<RateCell>,
    pub slope_n: Vec<SampleSlope>,
    pub slope_joint: Vec<JointSlope>,
    /// Per replicate, indexed like `cells`.
    #[serde(skip)]
    pub distances: Vec<Vec<f64>>,
}

impl RateReport {
    /// One row per grid cell.
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("n,N,lambda,mean_distance,std_distance\n");
        for c in &self.cells {
            s += &format!(
                "{},{},{},{},{}\n",
                c.n,
                c.samples,
                fmt_f64(c.lambda),
                fmt_f64(c.mean_distance),
                fmt_f64(c.std_distance)
            );
        }
        s
    }

    /// One row per replicate and cell.
    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("replicate,n,N,lambda,distance\n");
        for (r, row) in self.distances.iter().enumerate() {
            for (c, d) in self.cells.iter().zip(row) {
                s += &format!("{r},{},{},{},{}\n", c.n, c.samples, fmt_f64(c.lambda), fmt_f64(*d));
            }
        }
        s
    }

    pub fn slope_for(&self, n: usize, lambda: f64) -> Option<f64> {
        self.slope_n.iter().find(|s| s.n == n && s.lambda == lambda).and_then(|s| s.slope)
    }
}

/// Runs the study. With `exact_samples` every `x_{N,i}` is replaced by the
/// exact embedding, which must give zero distances.
pub fn run_rate_experiment(cfg: &RateConfig) -> Result<RateReport> {
    run_with(cfg, false)
}

#[doc(hidden)]
pub fn run_rate_experiment_exact(cfg: &RateConfig) -> Result<RateReport> {
    run_with(cfg, true)
}

fn run_with(cfg: &RateConfig, exact_samples: bool) -> Result<RateReport> {
    cfg.validate()?;
    let embedder = Embedder::new(&cfg.embedding, cfg.truth.dim())?;
    let max_n = *cfg.n_grid.iter().max().expect("non-empty");
    let (nn, ns, nl) = (cfg.n_grid.len(), cfg.sample_grid.len(), cfg.lambdas.len());
    let index = |a: usize, b: usize, c: usize| (a * ns + b) * nl + c;

    let per_rep = par::try_map_indexed(cfg.replicates, |r| -> Result<(Vec<f64>, TruthSource)> {
        let r64 = r as u64;
        let mut truths = Vec::with_capacity(max_n);
        let mut exact = Vec::with_capacity(max_n);
        let mut labels = Vec::with_capacity(max_n);
        let mut source = TruthSource::Analytic;
        for i in 0..max_n {
            let mut rng = child_rng(cfg.seed, &[stream::TRUTH, r64, i as u64]);
            let (dist, y) = cfg.truth.draw(&mut rng);
            let (x, src) = dist.truth_embedding(&embedder, crate::rng::derive_seed(cfg.seed, &[stream::TRUTH, r64, i as u64]))?;
            if src == TruthSource::LargeSample {
                source = src;
            }
            truths.push(dist);
            exact.push(x);
            labels.push(y);
        }
        let mut out = vec![0.0; nn * ns * nl];
        for (b, &samples) in cfg.sample_grid.iter().enumerate() {
            let empirical: Vec<EmbeddingVector> = if exact_samples {
                exact.clone()
            } else {
                (0..max_n)
                    .map(|i| {
                        let mut rng = child_rng(cfg.seed, &[stream::REPLICATE, r64, i as u64, samples as u64]);
                        embedder.embed(&truths[i].sample(format!("{i}"), samples, &mut rng)?)
                    })
                    .collect::<Result<_>>()?
            };
            for (a, &n) in cfg.n_grid.iter().enumerate() {
                for (c, &lambda) in cfg.lambdas.iter().enumerate() {
                    let f_n = fit(&exact[..n], &labels[..n], lambda, cfg.kernel)?;
                    let f_nn = fit(&empirical[..n], &labels[..n], lambda, cfg.kernel)?;
                    out[index(a, b, c)] = rkhs_distance(&f_n, &f_nn)?;
                }
            }
        }
        Ok((out, source))
    })?;

    let truth_source = if per_rep.iter().any(|(_, s)| *s == TruthSource::LargeSample) {
        TruthSource::LargeSample
    } else {
        TruthSource::Analytic
    };
    let distances: Vec<Vec<f64>> = per_rep.into_iter().map(|(d, _)| d).collect();

    let mut cells = Vec::with_capacity(nn * ns * nl);
    for (a, &n) in cfg.n_grid.iter().enumerate() {
        for (b, &samples) in cfg.sample_grid.iter().enumerate() {
            for (c, &lambda) in cfg.lambdas.iter().enumerate() {
                let v: Vec<f64> = distances.iter().map(|d| d[index(a, b, c)]).collect();
                cells.push(RateCell {
                    n,
                    samples,
                    lambda,
                    mean_distance: stats::mean(&v),
                    std_distance: stats::std_dev(&v),
                });
            }
        }
    }

    let mut slope_n = Vec::new();
    for &n in &cfg.n_grid {
        for &lambda in &cfg.lambdas {
            let (x, y): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter(|c| c.n == n && c.lambda == lambda)
                .map(|c| (c.samples as f64, c.mean_distance))
                .unzip();
            slope_n.push(SampleSlope { n, lambda, slope: stats::log2_slope(&x, &y) });
        }
    }

    let mut ratios: Vec<f64> = Vec::new();
    for &n in &cfg.n_grid {
        for &s in &cfg.sample_grid {
            let r = s as f64 / n as f64;
            if !ratios.contains(&r) {
                ratios.push(r);
            }
        }
    }
    let mut slope_joint = Vec::new();
    for &lambda in &cfg.lambdas {
        for &ratio in &ratios {
            let (x, y): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter(|c| c.lambda == lambda && c.samples as f64 / c.n as f64 == ratio)
                .map(|c| ((c.n * c.samples) as f64, c.mean_distance))
                .unzip();
            if x.len() >= 2 {
                slope_joint.push(JointSlope { lambda, ratio, slope: stats::log2_slope(&x, &y) });
            }
        }
    }

    Ok(RateReport {
        embedding: cfg.embedding.label().into(),
        truth_source,
        replicates: cfg.replicates,
        seed: cfg.seed,
        cells,
        slope_n,
        slope_joint,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RateConfig {
        RateConfig {
            embedding: EmbeddingConfig::MeanLinear,
            truth: TruthModel::default(),
            n_grid: vec![16, 64],
            sample_grid: vec![16, 64, 256],
            lambdas: vec![0.1],
            kernel: KernelConfig::default(),
            replicates: 4,
            seed: 11,
        }
    }

    #[test]
    fn exact_samples_give_zero_distance() {
        let rep = run_rate_experiment_exact(&small()).unwrap();
        assert!(rep.cells.iter().all(|c| c.mean_distance == 0.0));
    }

    #[test]
    fn distances_shrink_and_are_reproducible() {
        let rep = run_rate_experiment(&small()).unwrap();
        assert!(rep.cells.iter().all(|c| c.mean_distance >= 0.0));
        let s = rep.slope_for(16, 0.1).unwrap();
        assert!(s < 0.0, "slope {s}");
        assert_eq!(rep.truth_source, TruthSource::Analytic);
        // N/n = 1 and 4 each appear at two n values.
        assert_eq!(rep.slope_joint.len(), 2);
        let again = run_rate_experiment(&small()).unwrap();
        assert_eq!(rep.cells_csv(), again.cells_csv());
        assert_eq!(serde_json::to_string(&rep).unwrap(), serde_json::to_string(&again).unwrap());
    }
}
