//! Per-point normal estimation for unstructured point clouds.
//!
//! A small set of overlapping kNN patches is sampled with farthest point
//! sampling, a patch-level estimator predicts a normal for every member of
//! every patch, and the overlapping predictions are stitched back onto the
//! cloud through a CSR-style index by picking, per point, the candidate with
//! the largest combined expert/distance weight.
//!
//! Modules:
//! - [`geometry`]: clouds, kNN index, sampling, patch extraction, metrics.
//! - [`estimators`]: PCA plane and order-2 jet fits.
//! - [`patchnet`]: the neural patch estimator with its own reverse-mode
//!   gradient engine and trainer.
//! - [`stitching`]: sparse index, candidate weighting and the full pipeline.
//! - [`io`]: dataset files, reports, heatmaps, weights container.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
pub mod patchnet;
pub mod seed;
pub mod stitching;

pub use error::{Error, Result};
pub use geometry::{PointCloud, Vec3};
