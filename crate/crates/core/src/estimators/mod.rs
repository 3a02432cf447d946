//! Classical patch-level normal estimators: PCA plane fitting and the
//! order-2 osculating jet. Both serve as pipeline backends and the PCA fit
//! doubles as the fallback for uncovered points.

mod eigen;
mod jet;
mod pca;
mod pointwise;

pub use eigen::{symmetric_eigen3, Eigen3};
pub use jet::{jet_normal, JetFit};
pub use pca::{canonical_sign, pca_normal, PlaneFit};
pub use pointwise::{pointwise_normals, Method};
