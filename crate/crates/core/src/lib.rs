//! Clustering-based manifold approximation and projection.
//!
//! The data are clustered with k-means, every point gets a Gaussian membership
//! to every cluster center, and a low-dimensional layout is optimized so that
//! memberships to the low-dimensional centers reproduce the high-dimensional
//! ones. Fitted models embed unseen points against the same centers.
//!
//! ```no_run
//! use cbmap::{datasets::make_s_curve, fit, CbmapConfig};
//!
//! let data = make_s_curve(1000, 0.0, 1);
//! let result = fit(&data.data, &CbmapConfig::new(20).with_seed(1)).unwrap();
//! assert_eq!(result.embedding.dim(), (1000, 2));
//! ```

pub mod cli;
pub mod clustering;
pub mod datasets;
pub mod embedder;
pub mod error;
pub mod linalg;
pub mod membership;
pub mod metrics;
pub mod plot;

pub use embedder::{
    fit, transform, CbmapConfig, CbmapModel, CenterInit, FitResult, TransformOptions,
};
pub use error::{CbmapError, Result};
pub use linalg::DataMatrix;
