use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::PatchEstimator;
use super::index::SparseIndexMatrix;
use super::select::{naive_stitch, stitch, StitchConfig, StitchResult};
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, farthest_point_sample, Patch, PointCloud, SamplingPlan, SpatialIndex};
use crate::patchnet::PatchPrediction;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stitch: StitchConfig,
    /// Select with the nested-loop reference instead of the sparse index.
    pub naive_stitch: bool,
}

/// Wall time of each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub sample: Duration,
    pub extract: Duration,
    pub estimate: Duration,
    /// Zero when the naive reference ran.
    pub index: Duration,
    pub stitch: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.sample + self.extract + self.estimate + self.index + self.stitch
    }

    /// Index build plus selection.
    pub fn stitching(&self) -> Duration {
        self.index + self.stitch
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub result: StitchResult,
    pub patches: Vec<Patch>,
    pub predictions: Vec<PatchPrediction>,
    pub timings: StageTimings,
    /// `K·M / N`.
    pub overlap: f64,
    pub max_overlap: usize,
}

/// FPS centers, kNN patches, per-patch estimation, then stitching.
pub fn run_pipeline(
    cloud: &PointCloud,
    plan: &SamplingPlan,
    estimator: &dyn PatchEstimator,
    config: &PipelineConfig,
) -> Result<PipelineRun> {
    plan.validate(cloud.len())?;
    config.stitch.validate()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let centers = farthest_point_sample(cloud, plan.patch_count, plan.seed)?;
    timings.sample = t.elapsed();

    let t = Instant::now();
    let search = SpatialIndex::build(cloud)?;
    let patches = centers
        .par_iter()
        .map(|&c| extract_patch(cloud, c, plan.patch_size, &search))
        .collect::<Result<Vec<_>>>()?;
    timings.extract = t.elapsed();

    let t = Instant::now();
    let predictions = patches
        .par_iter()
        .map(|p| estimator.estimate(cloud, p))
        .collect::<Result<Vec<_>>>()?;
    timings.estimate = t.elapsed();

    let (result, max_overlap) = if config.naive_stitch {
        let t = Instant::now();
        let r = naive_stitch(cloud, &patches, &predictions, &config.stitch, Some(&search))?;
        timings.stitch = t.elapsed();
        let peak = r.candidate_count.iter().copied().max().unwrap_or(0);
        (r, peak)
    } else {
        let t = Instant::now();
        let index = SparseIndexMatrix::build(&patches, cloud.len())?;
        timings.index = t.elapsed();
        let t = Instant::now();
        let r = stitch(cloud, &patches, &predictions, &index, &config.stitch, Some(&search))?;
        timings.stitch = t.elapsed();
        (r, index.max_overlap())
    };
    if result.normals.iter().any(|n| !n.iter().all(|c| c.is_finite())) {
        return Err(Error::Numeric("stitched normals contain non-finite values".into()));
    }
    log::info!(
        "{}: {} points, {} patches of {}, {} uncovered, {:.1} ms",
        estimator.name(),
        cloud.len(),
        patches.len(),
        plan.patch_size,
        result.uncovered.len(),
        timings.total().as_secs_f64() * 1e3
    );

    Ok(PipelineRun {
        result,
        patches,
        predictions,
        timings,
        overlap: plan.overlap_rate(cloud.len()),
        max_overlap,
    })
}
