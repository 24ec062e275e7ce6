//! Regress the number of modes of random 2-D Gaussian mixtures from samples.
//!
//! `cargo run --release --example mode_counting`

use distreg_core::distributions::{sample_gmm_task, GmmTaskConfig};
use distreg_core::embeddings::{DirectionScheme, Embedder, EmbeddingConfig};
use distreg_core::experiments::explained_variance;
use distreg_core::kernel_ridge::{cross_validate, fit, log_grid, CvConfig, CvScheme, KernelConfig};

fn main() -> distreg_core::Result<()> {
    let data = sample_gmm_task(&GmmTaskConfig { dim: 2, max_modes: 3, n: 400, samples: 200, seed: 1 })?;
    let config = EmbeddingConfig::SlicedWasserstein {
        num_directions: 10,
        num_quantiles: 10,
        trim: 0.0,
        seed: 2,
        directions: DirectionScheme::Random,
    };
    let x = Embedder::new(&config, 2)?.embed_all(data.distributions())?;
    let (x_train, x_test) = x.split_at(200);
    let (y_train, y_test) = data.labels().split_at(200);

    let cv = CvConfig {
        lambdas: log_grid(1e-5, 1.0, 6),
        length_scales: log_grid(0.1, 100.0, 7),
        scheme: CvScheme::KFold { folds: 5 },
        seed: 3,
    };
    let best = cross_validate(x_train, y_train, &cv)?;
    let model = fit(x_train, y_train, best.lambda, KernelConfig::new(best.length_scale)?)?;
    let predicted = model.predict_batch(x_test)?;

    println!("lambda {:.1e}, length scale {:.3}", best.lambda, best.length_scale);
    println!("test explained variance {:.3}", explained_variance(y_test, &predicted)?);
    Ok(())
}
