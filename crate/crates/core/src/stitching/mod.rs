//! Mapping overlapping patch predictions back onto the cloud.
//!
//! [`SparseIndexMatrix`] lists, for every cloud point, each `(patch, slot)`
//! where it occurs. [`stitch`] walks those rows and keeps the candidate with
//! the largest `w_pred · w_dist`; [`naive_stitch`] does the same by scanning
//! every patch for every point and exists as a reference.

mod estimator;
mod index;
mod pipeline;
mod select;

pub use estimator::{JetEstimator, NetEstimator, PatchEstimator, PcaEstimator};
pub use index::{Occurrence, SparseIndexMatrix};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineRun, StageTimings};
pub use select::{
    candidate_weight, distance_weight, naive_select_rows, naive_stitch, stitch, Candidate,
    StitchConfig, StitchResult,
};
