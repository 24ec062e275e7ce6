//! # distreg-core
//!
//! Kernel ridge regression of scalar labels on probability distributions that
//! are only observed through samples ("two-stage sampling").
//!
//! Each sampled distribution is mapped into a Hilbert space by one of three
//! embeddings, discretized onto a fixed weighted grid:
//!
//! | Embedding | Coordinates | Module |
//! |-----------|-------------|--------|
//! | mean (linear kernel) | column means | [`embeddings`] |
//! | mean (random Fourier features) | averaged cosine features | [`embeddings`] |
//! | sliced Wasserstein | projected quantiles on a direction x level grid | [`embeddings`] |
//! | Sinkhorn | centered entropic-OT dual potential on a reference measure | [`sinkhorn`] |
//!
//! A squared-exponential kernel `exp(-|u - v|^2 / l^2)` is then applied in the
//! embedding space and the ridge problem is solved in closed form
//! ([`kernel_ridge`]). The [`experiments`] module holds the Monte Carlo
//! harnesses (error decay in `N`, bias probe, mixture mode counting and the
//! synthetic ecological-inference study).
//!
//! ```
//! use distreg_core::distributions::EmpiricalDistribution;
//! use distreg_core::embeddings::{embed, EmbeddingConfig};
//!
//! let dist = EmpiricalDistribution::from_rows("a", &[vec![0.0, 0.0], vec![2.0, 4.0]]).unwrap();
//! let e = embed(&EmbeddingConfig::MeanLinear, &dist).unwrap();
//! assert_eq!(e.coords(), &[1.0, 2.0]);
//! ```

pub mod distributions;
pub mod embeddings;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernel_ridge;
pub mod par;
pub mod rng;
pub mod sinkhorn;

pub use error::{Error, Result};
