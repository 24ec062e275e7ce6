//! Monte Carlo studies: convergence rates, bias probes, the Gaussian-mixture
//! mode-counting task and the ecological-inference simulation.
//!
//! Every study is a pure function of its configuration (seed included);
//! replicate and cell results are assembled in index order, so reports are
//! identical for any thread count.

pub mod bias;
pub mod eco;
pub mod gmm;
pub mod rate;
pub mod scoring;
pub mod stats;
pub mod truth;

pub use scoring::{explained_variance, mean_absolute_error};
pub use bias::{run_bias_probe, BiasProbeConfig, BiasProbeReport, ProbeVector};
pub use eco::{run_ecological_experiment, EcoExperimentConfig, EcoReport};
pub use gmm::{run_gmm_experiment, GmmExperimentConfig, GmmReport, ScoreReport};
pub use rate::{run_rate_experiment, RateConfig, RateReport};
pub use truth::{TrueDistribution, TruthModel, TruthSource};
