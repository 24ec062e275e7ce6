//! Ecological-inference simulation: regress group vote shares from
//! individual-level features with the sliced-Wasserstein embedding, and
//! probe which features drive the fitted predictor.
//!
//! The probe splits every training group into the halves with the largest
//! and smallest values of feature `k`, predicts both halves with the fitted
//! model, and records the difference.

use serde::{Deserialize, Serialize};

use super::scoring::{explained_variance, mean_absolute_error};
use super::stats;
use crate::distributions::{sample_ecological_task, EcologicalTaskConfig, EmpiricalDistribution};
use crate::embeddings::{DirectionScheme, Embedder, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kernel_ridge::{cross_validate, fit, log_grid, CvConfig, CvScheme, KernelConfig, RidgeModel};
use crate::par;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcoExperimentConfig {
    pub dims: Vec<usize>,
    pub n_train: usize,
    pub samples: usize,
    pub n_test: usize,
    pub steps: usize,
    pub num_directions: usize,
    /// Levels per direction; equal to `samples` it uses every ranked value.
    pub num_quantiles: usize,
    #[serde(default)]
    pub trim: f64,
    /// `cv.seed` is mixed with `(d, step)`.
    pub cv: CvConfig,
    /// Dimension on which the feature probe runs; `None` disables it.
    pub probe_dim: Option<usize>,
    pub seed: u64,
}

impl Default for EcoExperimentConfig {
    fn default() -> Self {
        EcoExperimentConfig {
            dims: vec![5, 10, 15, 20],
            n_train: 100,
            samples: 200,
            n_test: 200,
            steps: 10,
            num_directions: 100,
            num_quantiles: 200,
            trim: 0.0,
            cv: CvConfig {
                lambdas: log_grid(1e-8, 1.0, 10),
                length_scales: log_grid(1e-2, 10.0, 10),
                scheme: CvScheme::Holdout { splits: 10, test_fraction: 0.2 },
                seed: 0,
            },
            probe_dim: Some(5),
            seed: 0,
        }
    }
}

impl EcoExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.cv.validate()?;
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidConfig("ecological dims must be non-empty and >= 2".into()));
        }
        if self.n_train < 2 || self.n_test < 2 || self.samples < 2 || self.steps == 0 {
            return Err(Error::InvalidConfig("ecological sizes too small".into()));
        }
        if self.num_directions == 0 || self.num_quantiles == 0 || !(0.0..0.5).contains(&self.trim) {
            return Err(Error::InvalidConfig("invalid sliced-Wasserstein grid".into()));
        }
        Ok(())
    }

    fn embedding(&self, dim: usize, step: usize) -> EmbeddingConfig {
        EmbeddingConfig::SlicedWasserstein {
            num_directions: self.num_directions,
            num_quantiles: self.num_quantiles,
            trim: self.trim,
            seed: derive_seed(self.seed, &[stream::SW_DIRECTIONS, dim as u64, step as u64]),
            directions: DirectionScheme::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoScore {
    pub dim: usize,
    pub step: usize,
    pub lambda: f64,
    pub length_scale: f64,
    pub explained_variance: f64,
    pub mean_absolute_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoDimSummary {
    pub dim: usize,
    pub median_ev: f64,
    pub q25_ev: f64,
    pub q75_ev: f64,
    pub mean_ev: f64,
}

/// Distribution over training groups of `Y+ - Y-` for one feature and step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffect {
    pub step: usize,
    /// 1-based feature index.
    pub feature: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProbe {
    pub step: usize,
    /// 1-based features with the largest and smallest median effect.
    pub argmax_feature: usize,
    pub argmin_feature: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoReport {
    pub seed: u64,
    pub scores: Vec<EcoScore>,
    pub summary: Vec<EcoDimSummary>,
    pub effects: Vec<FeatureEffect>,
    pub probes: Vec<StepProbe>,
}

impl EcoReport {
    pub fn summary_for(&self, dim: usize) -> Option<&EcoDimSummary> {
        self.summary.iter().find(|s| s.dim == dim)
    }

    pub fn scores_csv(&self) -> String {
        let mut s = String::from("dim,step,lambda,length_scale,explained_variance,mean_absolute_error\n");
        for r in &self.scores {
            s += &format!(
                "{},{},{},{},{},{}\n",
                r.dim,
                r.step,
                fmt_f64(r.lambda),
                fmt_f64(r.length_scale),
                fmt_f64(r.explained_variance),
                fmt_f64(r.mean_absolute_error)
            );
        }
        s
    }

    pub fn effects_csv(&self) -> String {
        let mut s = String::from("step,feature,median,q25,q75\n");
        for e in &self.effects {
            s += &format!(
                "{},{},{},{},{}\n",
                e.step,
                e.feature,
                fmt_f64(e.median),
                fmt_f64(e.q25),
                fmt_f64(e.q75)
            );
        }
        s
    }
}

/// Indices of the `N/2` smallest and `N/2` largest values of feature `k`.
pub fn feature_halves(dist: &EmpiricalDistribution, k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist.row(a)[k].total_cmp(&dist.row(b)[k]).then(a.cmp(&b)));
    let half = dist.len() / 2;
    let low = idx[..half].to_vec();
    let high = idx[dist.len() - half..].to_vec();
    (low, high)
}

/// Per feature, `Y+_i - Y-_i` over the groups.
fn feature_effects(model: &RidgeModel, embedder: &Embedder, groups: &[EmpiricalDistribution]) -> Result<Vec<Vec<f64>>> {
    (0..embedder.dim())
        .map(|k| {
            par::try_map_indexed(groups.len(), |i| -> Result<f64> {
                let g = &groups[i];
                let (low, high) = feature_halves(g, k);
                let lo = model.predict(&embedder.embed(&g.subset(g.group_id(), &low)?)?)?;
                let hi = model.predict(&embedder.embed(&g.subset(g.group_id(), &high)?)?)?;
                Ok(hi - lo)
            })
        })
        .collect()
}

struct StepResult {
    score: EcoScore,
    effects: Option<Vec<Vec<f64>>>,
}

pub fn run_ecological_experiment(cfg: &EcoExperimentConfig) -> Result<EcoReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| (0..cfg.steps).map(move |s| (d, s)))
        .collect();

    let results = par::try_map_indexed(jobs.len(), |j| -> Result<StepResult> {
        let (dim, step) = jobs[j];
        let task = |part: u64, n: usize| {
            sample_ecological_task(&EcologicalTaskConfig {
                dim,
                n,
                samples: cfg.samples,
                seed: derive_seed(cfg.seed, &[stream::ECO_GROUP, dim as u64, step as u64, part]),
            })
        };
        let train = task(0, cfg.n_train)?;
        let test = task(1, cfg.n_test)?;
        let embedder = Embedder::new(&cfg.embedding(dim, step), dim)?;
        let xtr = embedder.embed_all(train.distributions())?;
        let xte = embedder.embed_all(test.distributions())?;
        let cv = CvConfig {
            seed: derive_seed(cfg.cv.seed, &[stream::CELL, dim as u64, step as u64]),
            ..cfg.cv.clone()
        };
        let sel = cross_validate(&xtr, train.labels(), &cv)?;
        let model = fit(&xtr, train.labels(), sel.lambda, KernelConfig { length_scale: sel.length_scale })?;
        let pred = model.predict_batch(&xte)?;
        let score = EcoScore {
            dim,
            step,
            lambda: sel.lambda,
            length_scale: sel.length_scale,
            explained_variance: explained_variance(test.labels(), &pred)?,
            mean_absolute_error: mean_absolute_error(test.labels(), &pred)?,
        };
        let effects = if cfg.probe_dim == Some(dim) {
            Some(feature_effects(&model, &embedder, train.distributions())?)
        } else {
            None
        };
        Ok(StepResult { score, effects })
    })?;

    let summary = cfg
        .dims
        .iter()
        .map(|&dim| {
            let ev: Vec<f64> = results
                .iter()
                .filter(|r| r.score.dim == dim)
                .map(|r| r.score.explained_variance)
                .collect();
            EcoDimSummary {
                dim,
                median_ev: stats::median(&ev),
                q25_ev: stats::quantile(&ev, 0.25),
                q75_ev: stats::quantile(&ev, 0.75),
                mean_ev: stats::mean(&ev),
            }
        })
        .collect();

    let mut effects = Vec::new();
    let mut probes = Vec::new();
    for r in &results {
        let Some(per_k) = &r.effects else { continue };
        let step = r.score.step;
        let medians: Vec<f64> = per_k.iter().map(|v| stats::median(v)).collect();
        for (k, v) in per_k.iter().enumerate() {
            effects.push(FeatureEffect {
                step,
                feature: k + 1,
                median: medians[k],
                q25: stats::quantile(v, 0.25),
                q75: stats::quantile(v, 0.75),
            });
        }
        let argmax = (0..medians.len()).max_by(|&a, &b| medians[a].total_cmp(&medians[b])).expect("dim >= 2");
        let argmin = (0..medians.len()).min_by(|&a, &b| medians[a].total_cmp(&medians[b])).expect("dim >= 2");
        probes.push(StepProbe {
            step,
            argmax_feature: argmax + 1,
            argmin_feature: argmin + 1,
        });
    }

    Ok(EcoReport {
        seed: cfg.seed,
        scores: results.into_iter().map(|r| r.score).collect(),
        summary,
        effects,
        probes,
    })
}
