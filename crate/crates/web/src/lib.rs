//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: sliced-Wasserstein quantile curves of two
//! Gaussian clouds, a Sinkhorn potential on a grid reference, and a small
//! mixture mode-counting regression scored on held-out data.

use distreg_core::distributions::{sample_gmm_task, EmpiricalDistribution, GmmTaskConfig, ReferenceMeasure};
use distreg_core::embeddings::{embedding_distance, DirectionScheme, Embedder, EmbeddingConfig};
use distreg_core::experiments::explained_variance;
use distreg_core::kernel_ridge::{cross_validate, fit, log_grid, CvConfig, CvScheme, KernelConfig};
use distreg_core::rng::child_rng;
use distreg_core::sinkhorn::SinkhornMethod;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

fn js(e: distreg_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Isotropic 2-D Gaussian cloud.
fn gaussian_cloud(id: &str, mx: f64, my: f64, std: f64, n: usize, seed: u64) -> Result<EmpiricalDistribution, JsError> {
    let mut rng = child_rng(seed, &[]);
    let mut pts = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        pts.push(mx + std * zx);
        pts.push(my + std * zy);
    }
    EmpiricalDistribution::new(id, 2, pts).map_err(js)
}

/// Quantile curves of two clouds along half-circle directions.
#[wasm_bindgen]
pub struct SlicedComparison {
    directions: usize,
    levels: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    first_points: Vec<f64>,
    second_points: Vec<f64>,
    distance: f64,
}

#[wasm_bindgen]
impl SlicedComparison {
    pub fn directions(&self) -> usize {
        self.directions
    }
    pub fn levels(&self) -> Vec<f64> {
        self.levels.clone()
    }
    /// Direction-major quantiles of the first cloud.
    pub fn first(&self) -> Vec<f64> {
        self.first.clone()
    }
    pub fn second(&self) -> Vec<f64> {
        self.second.clone()
    }
    /// Interleaved `x, y` samples.
    pub fn first_points(&self) -> Vec<f64> {
        self.first_points.clone()
    }
    pub fn second_points(&self) -> Vec<f64> {
        self.second_points.clone()
    }
    pub fn distance(&self) -> f64 {
        self.distance
    }
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn compare_sliced(
    ax: f64,
    ay: f64,
    a_std: f64,
    bx: f64,
    by: f64,
    b_std: f64,
    samples: usize,
    directions: usize,
    quantiles: usize,
    seed: u64,
) -> Result<SlicedComparison, JsError> {
    let a = gaussian_cloud("a", ax, ay, a_std, samples, seed)?;
    let b = gaussian_cloud("b", bx, by, b_std, samples, seed.wrapping_add(1))?;
    let cfg = EmbeddingConfig::SlicedWasserstein {
        num_directions: directions,
        num_quantiles: quantiles,
        trim: 0.0,
        seed,
        directions: DirectionScheme::HalfCircle,
    };
    let embedder = Embedder::new(&cfg, 2).map_err(js)?;
    let (ea, eb) = (embedder.embed(&a).map_err(js)?, embedder.embed(&b).map_err(js)?);
    let levels = embedder.slicing_grid().map(|(_, l)| l.to_vec()).unwrap_or_default();
    Ok(SlicedComparison {
        directions,
        levels,
        distance: embedding_distance(&ea, &eb).map_err(js)?,
        first: ea.coords().to_vec(),
        second: eb.coords().to_vec(),
        first_points: a.data().to_vec(),
        second_points: b.data().to_vec(),
    })
}

/// Centered Sinkhorn potential on a `side x side` grid over `[-2, 2]^2`.
#[wasm_bindgen]
pub struct PotentialMap {
    side: usize,
    values: Vec<f64>,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl PotentialMap {
    pub fn side(&self) -> usize {
        self.side
    }
    /// Row-major, `y` increasing with the row.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

#[wasm_bindgen]
pub fn sinkhorn_potential(mx: f64, my: f64, std: f64, samples: usize, side: usize, reg: f64, seed: u64) -> Result<PotentialMap, JsError> {
    if side < 2 {
        return Err(JsError::new("grid side must be at least 2"));
    }
    let cloud = gaussian_cloud("mu", mx, my, std, samples, seed)?;
    let step = 4.0 / (side - 1) as f64;
    let grid: Vec<f64> = (0..side * side)
        .flat_map(|k| [-2.0 + step * (k % side) as f64, -2.0 + step * (k / side) as f64])
        .collect();
    let cfg = EmbeddingConfig::Sinkhorn {
        reference: ReferenceMeasure::uniform(2, grid).map_err(js)?,
        reg,
        tol: 1e-6,
        max_iter: 5000,
        method: SinkhornMethod::default(),
    };
    let e = Embedder::new(&cfg, 2).map_err(js)?.embed(&cloud).map_err(js)?;
    Ok(PotentialMap {
        side,
        values: e.coords().to_vec(),
        points: cloud.data().to_vec(),
    })
}

/// Held-out explained variance of mode-count regression on 2-D mixtures.
#[wasm_bindgen]
pub struct ModeScore {
    explained_variance: f64,
    lambda: f64,
    length_scale: f64,
    truth: Vec<f64>,
    predicted: Vec<f64>,
}

#[wasm_bindgen]
impl ModeScore {
    pub fn explained_variance(&self) -> f64 {
        self.explained_variance
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    pub fn predicted(&self) -> Vec<f64> {
        self.predicted.clone()
    }
}

/// `embedding` is `"mean"` or `"sliced"`. Half of the `n` mixtures train,
/// half test; `lambda` and `l` are picked by 5-fold cross validation.
#[wasm_bindgen]
pub fn mode_regression(n: usize, samples: usize, max_modes: usize, embedding: &str, seed: u64) -> Result<ModeScore, JsError> {
    if n < 20 {
        return Err(JsError::new("need at least 20 mixtures"));
    }
    let data = sample_gmm_task(&GmmTaskConfig { dim: 2, max_modes, n, samples, seed }).map_err(js)?;
    let cfg = match embedding {
        "mean" => EmbeddingConfig::MeanLinear,
        "sliced" => EmbeddingConfig::SlicedWasserstein {
            num_directions: 10,
            num_quantiles: 10,
            trim: 0.0,
            seed,
            directions: DirectionScheme::Random,
        },
        other => return Err(JsError::new(&format!("unknown embedding {other:?}"))),
    };
    let x = Embedder::new(&cfg, 2).map_err(js)?.embed_all(data.distributions()).map_err(js)?;
    let half = n / 2;
    let (x_train, x_test) = x.split_at(half);
    let (y_train, y_test) = data.labels().split_at(half);
    let cv = CvConfig {
        lambdas: log_grid(1e-3, 1e1, 5),
        length_scales: log_grid(0.1, 100.0, 7),
        scheme: CvScheme::KFold { folds: 5 },
        seed,
    };
    let best = cross_validate(x_train, y_train, &cv).map_err(js)?;
    let model = fit(x_train, y_train, best.lambda, KernelConfig::new(best.length_scale).map_err(js)?).map_err(js)?;
    let predicted = model.predict_batch(x_test).map_err(js)?;
    Ok(ModeScore {
        explained_variance: explained_variance(y_test, &predicted).map_err(js)?,
        lambda: best.lambda,
        length_scale: best.length_scale,
        truth: y_test.to_vec(),
        predicted,
    })
}
