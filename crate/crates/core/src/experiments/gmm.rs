//! Regressing the number of modes of random Gaussian mixtures.
//!
//! Each `(n, N)` cell first runs one selection replicate, where `(lambda, l)`
//! is cross-validated on the training half, then `replicates` evaluation
//! replicates that refit with the selected pair on fresh data and splits.
//! Task seeds depend on `(n, replicate)` only, so cells that differ in `N`
//! share mixtures and nested samples.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::scoring::{explained_variance, mean_absolute_error};
use super::stats;
use crate::distributions::{sample_gmm_task, GmmTaskConfig};
use crate::embeddings::{Embedder, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kernel_ridge::{cross_validate, fit, CvConfig, KernelConfig};
use crate::par;
use crate::rng::{child_rng, derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmExperimentConfig {
    pub dim: usize,
    pub max_modes: usize,
    pub n_grid: Vec<usize>,
    pub sample_grid: Vec<usize>,
    pub embedding: EmbeddingConfig,
    /// `cv.seed` is mixed with the cell to seed each selection.
    pub cv: CvConfig,
    /// Evaluation replicates per cell (the selection replicate is extra).
    pub replicates: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.5
}

impl GmmExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.cv.validate()?;
        if self.dim == 0 || self.max_modes == 0 {
            return Err(Error::InvalidConfig("gmm experiment needs dim, max_modes >= 1".into()));
        }
        if self.n_grid.is_empty() || self.sample_grid.is_empty() {
            return Err(Error::InvalidConfig("gmm grids must be non-empty".into()));
        }
        if self.n_grid.iter().any(|&n| n < 2) || self.sample_grid.contains(&0) {
            return Err(Error::InvalidConfig("gmm grids need n >= 2 and N >= 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Test-set scores of one `(n, N)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n: usize,
    pub samples: usize,
    pub lambda: f64,
    pub length_scale: f64,
    /// Mean over evaluation replicates; `None` when the cell is degenerate.
    pub explained_variance: Option<f64>,
    pub explained_variance_std: Option<f64>,
    pub mean_absolute_error: f64,
    pub per_replicate_ev: Vec<Option<f64>>,
    pub per_replicate_mae: Vec<f64>,
    /// Some test set had zero label variance.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmReport {
    pub embedding: String,
    pub dim: usize,
    pub max_modes: usize,
    pub replicates: usize,
    pub seed: u64,
    pub cells: Vec<ScoreReport>,
}

impl GmmReport {
    pub fn cell(&self, n: usize, samples: usize) -> Option<&ScoreReport> {
        self.cells.iter().find(|c| c.n == n && c.samples == samples)
    }

    /// Mean EV of a cell, if present and not degenerate.
    pub fn ev(&self, n: usize, samples: usize) -> Option<f64> {
        self.cell(n, samples).and_then(|c| c.explained_variance)
    }

    pub fn cells_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut s = String::from("n,N,lambda,length_scale,explained_variance,explained_variance_std,mean_absolute_error,degenerate\n");
        for c in &self.cells {
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                c.n,
                c.samples,
                fmt_f64(c.lambda),
                fmt_f64(c.length_scale),
                opt(c.explained_variance),
                opt(c.explained_variance_std),
                fmt_f64(c.mean_absolute_error),
                c.degenerate
            );
        }
        s
    }

    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("n,N,replicate,explained_variance,mean_absolute_error\n");
        for c in &self.cells {
            for (r, (ev, mae)) in c.per_replicate_ev.iter().zip(&c.per_replicate_mae).enumerate() {
                s += &format!(
                    "{},{},{},{},{}\n",
                    c.n,
                    c.samples,
                    r + 1,
                    ev.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(*mae)
                );
            }
        }
        s
    }
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn split(n: usize, train_fraction: f64, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut child_rng(seed, &[stream::CV_SPLITS]));
    let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    Split {
        train: idx[..k].to_vec(),
        test: idx[k..].to_vec(),
    }
}

/// Embedded task for one `(n, N, replicate)`.
struct Prepared {
    embeddings: Vec<crate::embeddings::EmbeddingVector>,
    labels: Vec<f64>,
    split: Split,
}

fn prepare(cfg: &GmmExperimentConfig, embedder: &Embedder, n: usize, samples: usize, rep: u64) -> Result<Prepared> {
    let task_seed = derive_seed(cfg.seed, &[stream::REPLICATE, n as u64, rep]);
    let task = sample_gmm_task(&GmmTaskConfig {
        dim: cfg.dim,
        max_modes: cfg.max_modes,
        n,
        samples,
        seed: task_seed,
    })?;
    Ok(Prepared {
        embeddings: embedder.embed_all(task.distributions())?,
        labels: task.labels().to_vec(),
        split: split(n, cfg.train_fraction, task_seed),
    })
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

pub fn run_gmm_experiment(cfg: &GmmExperimentConfig) -> Result<GmmReport> {
    cfg.validate()?;
    let embedder = Embedder::new(&cfg.embedding, cfg.dim)?;
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.sample_grid.iter().map(move |&s| (n, s)))
        .collect();

    // Selection per cell.
    let selected = par::try_map_indexed(cells.len(), |c| -> Result<(f64, f64)> {
        let (n, samples) = cells[c];
        let p = prepare(cfg, &embedder, n, samples, 0)?;
        let cv = CvConfig {
            seed: derive_seed(cfg.cv.seed, &[stream::CELL, n as u64, samples as u64]),
            ..cfg.cv.clone()
        };
        let r = cross_validate(&pick(&p.embeddings, &p.split.train), &pick(&p.labels, &p.split.train), &cv)?;
        Ok((r.lambda, r.length_scale))
    })?;

    // Evaluation, flattened over (cell, replicate).
    let jobs = cells.len() * cfg.replicates;
    let scores = par::try_map_indexed(jobs, |j| -> Result<(Option<f64>, f64)> {
        let (c, r) = (j / cfg.replicates, j % cfg.replicates);
        let (n, samples) = cells[c];
        let (lambda, length_scale) = selected[c];
        let p = prepare(cfg, &embedder, n, samples, r as u64 + 1)?;
        let model = fit(
            &pick(&p.embeddings, &p.split.train),
            &pick(&p.labels, &p.split.train),
            lambda,
            KernelConfig { length_scale },
        )?;
        let pred = model.predict_batch(&pick(&p.embeddings, &p.split.test))?;
        let truth = pick(&p.labels, &p.split.test);
        let ev = match explained_variance(&truth, &pred) {
            Ok(v) => Some(v),
            Err(Error::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        Ok((ev, mean_absolute_error(&truth, &pred)?))
    })?;

    let reports = cells
        .iter()
        .enumerate()
        .map(|(c, &(n, samples))| {
            let rows = &scores[c * cfg.replicates..(c + 1) * cfg.replicates];
            let evs: Vec<Option<f64>> = rows.iter().map(|r| r.0).collect();
            let maes: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let degenerate = evs.iter().any(Option::is_none);
            let flat: Vec<f64> = evs.iter().flatten().copied().collect();
            ScoreReport {
                n,
                samples,
                lambda: selected[c].0,
                length_scale: selected[c].1,
                explained_variance: (!degenerate).then(|| stats::mean(&flat)),
                explained_variance_std: (!degenerate).then(|| stats::std_dev(&flat)),
                mean_absolute_error: stats::mean(&maes),
                per_replicate_ev: evs,
                per_replicate_mae: maes,
                degenerate,
            }
        })
        .collect();

    Ok(GmmReport {
        embedding: cfg.embedding.label().into(),
        dim: cfg.dim,
        max_modes: cfg.max_modes,
        replicates: cfg.replicates,
        seed: cfg.seed,
        cells: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_ridge::{log_grid, CvScheme};

    fn cfg(max_modes: usize) -> GmmExperimentConfig {
        GmmExperimentConfig {
            dim: 2,
            max_modes,
            n_grid: vec![24],
            sample_grid: vec![32],
            embedding: EmbeddingConfig::MeanLinear,
            cv: CvConfig {
                lambdas: log_grid(1e-2, 1e2, 5),
                length_scales: vec![1.0, 10.0],
                scheme: CvScheme::KFold { folds: 3 },
                seed: 1,
            },
            replicates: 2,
            train_fraction: 0.5,
            seed: 5,
        }
    }

    #[test]
    fn single_mode_cells_are_degenerate() {
        let rep = run_gmm_experiment(&cfg(1)).unwrap();
        let c = &rep.cells[0];
        assert!(c.degenerate);
        assert_eq!(c.explained_variance, None);
        assert!(c.per_replicate_ev.iter().all(Option::is_none));
        assert!(rep.cells_csv().lines().nth(1).unwrap().ends_with(",true"));
    }

    #[test]
    fn reports_are_reproducible() {
        let a = run_gmm_experiment(&cfg(3)).unwrap();
        let b = run_gmm_experiment(&cfg(3)).unwrap();
        assert!(!a.cells[0].degenerate);
        assert_eq!(a.cells_csv(), b.cells_csv());
        assert_eq!(a.replicates_csv(), b.replicates_csv());
        assert!(a.cells[0].per_replicate_ev.iter().all(|e| e.unwrap() <= 1.0));
    }

    #[test]
    fn splits_are_disjoint_halves() {
        let s = split(10, 0.5, 3);
        assert_eq!(s.train.len(), 5);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
