use serde::{Deserialize, Serialize};

use super::cloud::{PointCloud, Vec3};
use super::kdtree::SpatialIndex;
use crate::error::{Error, Result};

/// The `K` nearest neighbors of a center point, normalized to the unit ball
/// around their centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub center_id: usize,
    /// Cloud ids; the first entry is `center_id`.
    pub member_ids: Vec<usize>,
    /// `(position - centroid) / scale` for each member.
    pub local_coords: Vec<Vec3>,
    pub centroid: Vec3,
    pub scale: f64,
    /// Largest centroid distance among members, in cloud units.
    pub radius: f64,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    /// Cloud-frame position of member `slot`.
    pub fn to_cloud(&self, slot: usize) -> Vec3 {
        self.centroid + self.local_coords[slot] * self.scale
    }
}

pub fn extract_patch(
    cloud: &PointCloud,
    center_id: usize,
    k: usize,
    index: &SpatialIndex,
) -> Result<Patch> {
    let n = cloud.len();
    if center_id >= n {
        return Err(Error::IdOutOfRange { id: center_id, n });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "patch size {k} not in 1..={n}"
        )));
    }
    let center = cloud.position(center_id);
    let mut members = index.knn(&center, k);
    // The center sits at distance 0, but coincident duplicates with lower ids
    // can outrank it; it is always member 0.
    match members.iter().position(|&id| id == center_id) {
        Some(pos) => {
            members[..=pos].rotate_right(1);
        }
        None => {
            members.pop();
            members.insert(0, center_id);
        }
    }

    let positions: Vec<Vec3> = members.iter().map(|&id| cloud.position(id)).collect();
    let centroid = positions.iter().fold(Vec3::zeros(), |acc, p| acc + p) / k as f64;
    let radius = positions
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let local_coords = positions.iter().map(|p| (p - centroid) / scale).collect();

    Ok(Patch {
        center_id,
        member_ids: members,
        local_coords,
        centroid,
        scale,
        radius,
    })
}

/// Patch size `K`, patch count `M` and the sampling seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub patch_size: usize,
    pub patch_count: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(patch_size: usize, patch_count: usize, seed: u64) -> Self {
        Self {
            patch_size,
            patch_count,
            seed,
        }
    }

    /// Plan whose patch count gives roughly `overlap` memberships per point.
    pub fn with_overlap(n: usize, patch_size: usize, overlap: f64, seed: u64) -> Self {
        let m = (overlap * n as f64 / patch_size as f64).round().max(1.0) as usize;
        Self::new(patch_size, m.min(n), seed)
    }

    /// Average number of patches each point participates in, `K·M/N`.
    pub fn overlap_rate(&self, n: usize) -> f64 {
        (self.patch_size * self.patch_count) as f64 / n as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.patch_count < 1 {
            return Err(Error::Config("patch count must be at least 1".into()));
        }
        if self.patch_size < 3 {
            return Err(Error::Config("patch size must be at least 3".into()));
        }
        if self.patch_size > n || self.patch_count > n {
            return Err(Error::Config(format!(
                "plan K={} M={} does not fit a cloud of {n} points",
                self.patch_size, self.patch_count
            )));
        }
        Ok(())
    }
}
