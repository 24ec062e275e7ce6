//! Monte Carlo probe of `x_N - x`: projected bias, its standard error and
//! the rms deviation as functions of the sample size `N`.
//!
//! For sliced-Wasserstein coordinates against an analytic truth the report
//! also carries a lower-variance estimate of the same bias. A sample quantile
//! `q_N` of level `t` at true quantile `q` obeys
//! `q_N - q = -(F_N(q) - t)/f(q) + r_N`; the linear term has mean exactly zero,
//! so `E[q_N - q] = E[q_N - q + (F_N(q) - t)/f(q)]` and the right-hand side
//! averages only the remainder `r_N`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::stats;
use super::truth::{TrueDistribution, TruthSource};
use crate::embeddings::{Embedder, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::par;
use crate::rng::{child_rng, derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeVector {
    /// All ones: the weighted sum of coordinate errors.
    Ones,
    /// A single coordinate.
    Basis { index: usize },
    /// Standard normal entries drawn from `seed`.
    Random { seed: u64 },
}

impl ProbeVector {
    fn materialize(&self, len: usize) -> Result<Vec<f64>> {
        match *self {
            ProbeVector::Ones => Ok(vec![1.0; len]),
            ProbeVector::Basis { index } => {
                if index >= len {
                    return Err(Error::InvalidConfig(format!(
                        "probe coordinate {index} out of range for embedding length {len}"
                    )));
                }
                let mut v = vec![0.0; len];
                v[index] = 1.0;
                Ok(v)
            }
            ProbeVector::Random { seed } => {
                let mut rng = child_rng(seed, &[stream::TRUTH]);
                Ok((0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasProbeConfig {
    pub embedding: EmbeddingConfig,
    pub truth: TrueDistribution,
    pub sample_grid: Vec<usize>,
    pub replicates: usize,
    pub probes: Vec<ProbeVector>,
    pub seed: u64,
}

impl BiasProbeConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.truth.validate()?;
        if self.sample_grid.is_empty() || self.sample_grid.contains(&0) {
            return Err(Error::InvalidConfig("sample grid must be non-empty and positive".into()));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidConfig("bias probe needs at least 2 replicates".into()));
        }
        if self.probes.is_empty() {
            return Err(Error::InvalidConfig("at least one probe vector is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub probe: usize,
    pub samples: usize,
    pub bias: f64,
    pub std_error: f64,
    pub rms: f64,
    pub remainder_bias: Option<f64>,
    pub remainder_std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSlopes {
    pub probe: usize,
    /// Slope of `log |bias|`.
    pub bias_slope: Option<f64>,
    /// Slope of `log |remainder bias|` when available.
    pub remainder_bias_slope: Option<f64>,
    pub rms_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProbeReport {
    pub embedding: String,
    pub truth_source: TruthSource,
    pub replicates: usize,
    pub seed: u64,
    pub rows: Vec<BiasRow>,
    pub slopes: Vec<ProbeSlopes>,
}

impl BiasProbeReport {
    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut s = String::from("probe,N,bias,std_error,rms,remainder_bias,remainder_std_error\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                r.probe,
                r.samples,
                fmt_f64(r.bias),
                fmt_f64(r.std_error),
                fmt_f64(r.rms),
                opt(r.remainder_bias),
                opt(r.remainder_std_error)
            );
        }
        s
    }

    pub fn rows_for(&self, probe: usize) -> impl Iterator<Item = &BiasRow> {
        self.rows.iter().filter(move |r| r.probe == probe)
    }
}

/// Per coordinate: `(direction index, level, true quantile, density)`.
struct Linearization {
    terms: Vec<(usize, f64, f64, f64)>,
}

fn linearization(embedder: &Embedder, truth: &TrueDistribution, exact: &[f64]) -> Option<Linearization> {
    let (dirs, levels) = embedder.slicing_grid()?;
    let dim = embedder.dim();
    let mut terms = Vec::with_capacity(exact.len());
    for (j, theta) in dirs.chunks_exact(dim).enumerate() {
        for (l, &t) in levels.iter().enumerate() {
            let q = exact[j * levels.len() + l];
            let f = truth.projected_pdf(theta, q);
            if !(f > 0.0) {
                return None;
            }
            terms.push((j, t, q, f));
        }
    }
    Some(Linearization { terms })
}

pub fn run_bias_probe(cfg: &BiasProbeConfig) -> Result<BiasProbeReport> {
    cfg.validate()?;
    let embedder = Embedder::new(&cfg.embedding, cfg.truth.dim())?;
    let (truth, source) = cfg.truth.truth_embedding(&embedder, derive_seed(cfg.seed, &[stream::TRUTH]))?;
    let exact = truth.coords();
    let weights = embedder.weights().clone();
    let probes = cfg
        .probes
        .iter()
        .map(|p| p.materialize(embedder.len()))
        .collect::<Result<Vec<_>>>()?;
    let lin = if source == TruthSource::Analytic {
        linearization(&embedder, &cfg.truth, exact)
    } else {
        None
    };
    let dim = embedder.dim();
    let np = probes.len();

    // [replicate][N][probe] -> (projection, remainder projection)
    let per_rep = par::try_map_indexed(cfg.replicates, |r| -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(cfg.sample_grid.len() * np);
        for &n in &cfg.sample_grid {
            let mut rng = child_rng(cfg.seed, &[stream::REPLICATE, n as u64, r as u64]);
            let sample = cfg.truth.sample("probe", n, &mut rng)?;
            let e = embedder.embed(&sample)?;
            let diff: Vec<f64> = e.coords().iter().zip(exact).map(|(a, b)| a - b).collect();
            let corrected = lin.as_ref().map(|lin| {
                let (dirs, _) = embedder.slicing_grid().expect("sliced grid");
                let sorted: Vec<Vec<f64>> = dirs
                    .chunks_exact(dim)
                    .map(|theta| {
                        let mut p: Vec<f64> = sample
                            .points()
                            .rows()
                            .map(|x| theta.iter().zip(x).map(|(a, b)| a * b).sum())
                            .collect();
                        p.sort_unstable_by(f64::total_cmp);
                        p
                    })
                    .collect();
                diff.iter()
                    .zip(&lin.terms)
                    .map(|(d, &(j, t, q, f))| {
                        let below = sorted[j].partition_point(|&p| p <= q) as f64 / n as f64;
                        d + (below - t) / f
                    })
                    .collect::<Vec<f64>>()
            });
            for v in &probes {
                let project = |x: &[f64]| -> f64 { weights.iter().zip(v).zip(x).map(|((w, a), b)| w * a * b).sum() };
                let a = project(&diff);
                let b = corrected.as_deref().map_or(f64::NAN, project);
                out.push((a, b));
            }
        }
        Ok(out)
    })?;

    let mut rows = Vec::new();
    for (gi, &n) in cfg.sample_grid.iter().enumerate() {
        for p in 0..np {
            let a: Vec<f64> = per_rep.iter().map(|v| v[gi * np + p].0).collect();
            let b: Vec<f64> = per_rep.iter().map(|v| v[gi * np + p].1).collect();
            let has_b = lin.is_some();
            rows.push(BiasRow {
                probe: p,
                samples: n,
                bias: stats::mean(&a),
                std_error: stats::std_error(&a),
                rms: stats::rms(&a),
                remainder_bias: has_b.then(|| stats::mean(&b)),
                remainder_std_error: has_b.then(|| stats::std_error(&b)),
            });
        }
    }
    rows.sort_by_key(|r| (r.probe, r.samples));

    let slopes = (0..np)
        .map(|p| {
            let sel: Vec<&BiasRow> = rows.iter().filter(|r| r.probe == p).collect();
            let ns: Vec<f64> = sel.iter().map(|r| r.samples as f64).collect();
            let col = |f: &dyn Fn(&BiasRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            ProbeSlopes {
                probe: p,
                bias_slope: stats::log2_slope(&ns, &col(&|r| r.bias.abs())),
                remainder_bias_slope: lin
                    .as_ref()
                    .and_then(|_| stats::log2_slope(&ns, &col(&|r| r.remainder_bias.unwrap_or(0.0).abs()))),
                rms_slope: stats::log2_slope(&ns, &col(&|r| r.rms)),
            }
        })
        .collect();

    Ok(BiasProbeReport {
        embedding: cfg.embedding.label().into(),
        truth_source: source,
        replicates: cfg.replicates,
        seed: cfg.seed,
        rows,
        slopes,
    })
}
