//! Point clouds, exact kNN search, patch sampling and extraction, and the
//! unoriented-normal error metrics.

mod cloud;
mod fps;
mod kdtree;
mod metrics;
mod patch;

pub use cloud::{PointCloud, Vec3};
pub use fps::{farthest_point_sample, farthest_point_sample_from};
pub use kdtree::SpatialIndex;
pub use metrics::{angle_error_unoriented, evaluate, MetricReport};
pub use patch::{extract_patch, Patch, SamplingPlan};
