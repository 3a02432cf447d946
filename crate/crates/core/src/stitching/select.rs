use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::SparseIndexMatrix;
use crate::error::{Error, Result};
use crate::estimators::pca_normal;
use crate::geometry::{Patch, PointCloud, SpatialIndex, Vec3};
use crate::patchnet::PatchPrediction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchConfig {
    /// Gaussian width of the distance weight as a fraction of patch radius.
    pub sigma_ratio: f64,
    /// Neighborhood size of the PCA fallback for uncovered points.
    pub fallback_k: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            sigma_ratio: 1.0 / 3.0,
            fallback_k: 32,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio.is_finite()) {
            return Err(Error::Config(format!(
                "sigma ratio must be positive, got {}",
                self.sigma_ratio
            )));
        }
        if self.fallback_k < 3 {
            return Err(Error::Config("fallback neighborhood needs at least 3 points".into()));
        }
        Ok(())
    }
}

/// `exp(−‖p − c‖² / 2σ²)`.
pub fn distance_weight(point: &Vec3, centroid: &Vec3, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(gaussian(point, centroid, sigma))
}

#[inline]
fn gaussian(point: &Vec3, centroid: &Vec3, sigma: f64) -> f64 {
    (-(point - centroid).norm_squared() / (2.0 * sigma * sigma)).exp()
}

/// One candidate normal for a cloud point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub normal: Vec3,
    pub w_pred: f64,
    pub w_dist: f64,
    pub w_candidate: f64,
    pub patch_id: usize,
}

/// Candidate contributed by member `slot` of patch `patch_id`.
pub fn candidate_weight(
    cloud: &PointCloud,
    patch_id: usize,
    patch: &Patch,
    pred: &PatchPrediction,
    slot: usize,
    cfg: &StitchConfig,
) -> Candidate {
    let point = cloud.position(patch.member_ids[slot]);
    let w_dist = gaussian(&point, &patch.centroid, patch.scale * cfg.sigma_ratio);
    let w_pred = pred.w_pred[slot];
    Candidate {
        normal: pred.normals[slot],
        w_pred,
        w_dist,
        w_candidate: w_pred * w_dist,
        patch_id,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StitchResult {
    pub normals: Vec<Vec3>,
    /// Winning candidate weight; 0 for uncovered points.
    pub winner_weight: Vec<f64>,
    /// Patch that supplied each normal; `None` marks the fallback.
    pub winner_patch: Vec<Option<usize>>,
    /// `m_i` per point.
    pub candidate_count: Vec<usize>,
    pub uncovered: Vec<usize>,
}

impl StitchResult {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

fn check_alignment(
    cloud: &PointCloud,
    patches: &[Patch],
    preds: &[PatchPrediction],
) -> Result<()> {
    if patches.len() != preds.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} patches but {} predictions",
            patches.len(),
            preds.len()
        )));
    }
    for (i, (p, q)) in patches.iter().zip(preds).enumerate() {
        if p.len() != q.len() || q.w_pred.len() != q.len() {
            return Err(Error::ShapeMismatch(format!(
                "patch {i} has {} members but {} predictions",
                p.len(),
                q.len()
            )));
        }
        if let Some(&id) = p.member_ids.iter().find(|&&id| id >= cloud.len()) {
            return Err(Error::IdOutOfRange { id, n: cloud.len() });
        }
    }
    Ok(())
}

/// Per-point arg-max over the candidates listed by `index`; the lowest patch
/// id wins ties. Points without candidates get a PCA normal over their
/// `fallback_k` nearest neighbors and are listed in `uncovered`.
pub fn stitch(
    cloud: &PointCloud,
    patches: &[Patch],
    preds: &[PatchPrediction],
    index: &SparseIndexMatrix,
    cfg: &StitchConfig,
    search: Option<&SpatialIndex>,
) -> Result<StitchResult> {
    cfg.validate()?;
    check_alignment(cloud, patches, preds)?;
    if index.rows() != cloud.len() {
        return Err(Error::ShapeMismatch(format!(
            "index has {} rows for {} points",
            index.rows(),
            cloud.len()
        )));
    }
    let winners: Vec<Option<Candidate>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<Candidate> = None;
            for occ in index.row(i) {
                let p = occ.patch as usize;
                let cand = candidate_weight(cloud, p, &patches[p], &preds[p], occ.slot as usize, cfg);
                if best.is_none_or(|b| cand.w_candidate > b.w_candidate) {
                    best = Some(cand);
                }
            }
            best
        })
        .collect();
    let counts = (0..cloud.len()).map(|i| index.candidate_count(i)).collect();
    finish(cloud, winners, counts, cfg, search)
}

/// Reference selection: for every point scan every member of every patch.
/// `O(N·M·K)`; only meant for checking [`stitch`].
pub fn naive_stitch(
    cloud: &PointCloud,
    patches: &[Patch],
    preds: &[PatchPrediction],
    cfg: &StitchConfig,
    search: Option<&SpatialIndex>,
) -> Result<StitchResult> {
    let rows: Vec<usize> = (0..cloud.len()).collect();
    let (winners, counts) = naive_select_rows(cloud, patches, preds, cfg, &rows)?;
    finish(cloud, winners, counts, cfg, search)
}

/// The nested-loop scan of [`naive_stitch`] restricted to `rows`. Returns the
/// winning candidate and candidate count of each listed row, without the
/// fallback. Every row costs the same full scan, so timing a sample of rows
/// predicts the cost of all of them.
pub fn naive_select_rows(
    cloud: &PointCloud,
    patches: &[Patch],
    preds: &[PatchPrediction],
    cfg: &StitchConfig,
    rows: &[usize],
) -> Result<(Vec<Option<Candidate>>, Vec<usize>)> {
    cfg.validate()?;
    check_alignment(cloud, patches, preds)?;
    if let Some(&id) = rows.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::IdOutOfRange { id, n: cloud.len() });
    }
    let mut winners = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for &i in rows {
        let mut best: Option<Candidate> = None;
        let mut count = 0;
        for (p, patch) in patches.iter().enumerate() {
            for (slot, &id) in patch.member_ids.iter().enumerate() {
                if id != i {
                    continue;
                }
                count += 1;
                let cand = candidate_weight(cloud, p, patch, &preds[p], slot, cfg);
                if best.is_none_or(|b| cand.w_candidate > b.w_candidate) {
                    best = Some(cand);
                }
            }
        }
        winners.push(best);
        counts.push(count);
    }
    Ok((winners, counts))
}

fn finish(
    cloud: &PointCloud,
    winners: Vec<Option<Candidate>>,
    candidate_count: Vec<usize>,
    cfg: &StitchConfig,
    search: Option<&SpatialIndex>,
) -> Result<StitchResult> {
    let uncovered: Vec<usize> = winners
        .iter()
        .enumerate()
        .filter_map(|(i, w)| w.is_none().then_some(i))
        .collect();
    let built;
    let search = match (search, uncovered.is_empty()) {
        (_, true) => None,
        (Some(s), false) => Some(s),
        (None, false) => {
            built = SpatialIndex::build(cloud)?;
            Some(&built)
        }
    };
    let fallback: Vec<Vec3> = uncovered
        .par_iter()
        .map(|&i| {
            let search = search.expect("index available when points are uncovered");
            let pts: Vec<Vec3> = search
                .knn(&cloud.position(i), cfg.fallback_k)
                .into_iter()
                .map(|j| cloud.position(j))
                .collect();
            match pca_normal(&pts) {
                Ok(fit) => fit.normal,
                Err(_) => {
                    log::warn!("no usable neighborhood for uncovered point {i}");
                    Vec3::z()
                }
            }
        })
        .collect();

    let mut normals = Vec::with_capacity(winners.len());
    let mut winner_weight = Vec::with_capacity(winners.len());
    let mut winner_patch = Vec::with_capacity(winners.len());
    let mut fb = fallback.into_iter();
    for w in winners {
        match w {
            Some(c) => {
                normals.push(c.normal);
                winner_weight.push(c.w_candidate);
                winner_patch.push(Some(c.patch_id));
            }
            None => {
                normals.push(fb.next().expect("one fallback per uncovered point"));
                winner_weight.push(0.0);
                winner_patch.push(None);
            }
        }
    }
    Ok(StitchResult {
        normals,
        winner_weight,
        winner_patch,
        candidate_count,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_weight_values() {
        let c = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(distance_weight(&c, &c, 0.5).unwrap(), 1.0);
        let sigma = 0.7;
        let p = c + Vec3::new(sigma * 2f64.sqrt(), 0.0, 0.0);
        assert!((distance_weight(&p, &c, sigma).unwrap() - (-1f64).exp()).abs() < 1e-12);
        let p = c + Vec3::new(0.0, 0.0, sigma);
        assert!((distance_weight(&p, &c, sigma).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-12);
        assert!(distance_weight(&p, &c, 0.0).is_err());
        assert!(distance_weight(&p, &c, -1.0).is_err());
    }

    fn toy() -> (PointCloud, Vec<Patch>) {
        let cloud = PointCloud::new((0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect()).unwrap();
        let patch = |ids: Vec<usize>| {
            let pts: Vec<Vec3> = ids.iter().map(|&i| cloud.position(i)).collect();
            let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
            Patch {
                center_id: ids[0],
                local_coords: pts.iter().map(|p| p - centroid).collect(),
                member_ids: ids,
                centroid,
                scale: 1.0,
                radius: 1.0,
            }
        };
        let patches = vec![patch(vec![1, 0, 2]), patch(vec![2, 1, 3])];
        (cloud, patches)
    }

    #[test]
    fn winner_is_max_candidate() {
        let (cloud, patches) = toy();
        let preds = vec![
            PatchPrediction::single(vec![Vec3::x(); 3], 0.3),
            PatchPrediction::single(vec![Vec3::y(); 3], 0.9),
        ];
        let cfg = StitchConfig::default();
        let index = SparseIndexMatrix::build(&patches, 4).unwrap();
        let r = stitch(&cloud, &patches, &preds, &index, &cfg, None).unwrap();
        assert_eq!(r.candidate_count, vec![1, 2, 2, 1]);
        assert_eq!(r.winner_patch[0], Some(0));
        assert_eq!(r.winner_patch[3], Some(1));
        assert!(r.uncovered.is_empty());
        for i in 0..4 {
            let best = (0..2)
                .flat_map(|p| {
                    let slots: Vec<usize> = (0..3).filter(|&s| patches[p].member_ids[s] == i).collect();
                    slots
                        .into_iter()
                        .map(|s| candidate_weight(&cloud, p, &patches[p], &preds[p], s, &cfg).w_candidate)
                        .collect::<Vec<_>>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(r.winner_weight[i], best);
        }
        let naive = naive_stitch(&cloud, &patches, &preds, &cfg, None).unwrap();
        assert_eq!(naive, r);
    }

    #[test]
    fn two_candidates_at_same_distance() {
        let (cloud, mut patches) = toy();
        patches[1] = patches[0].clone();
        let preds = vec![
            PatchPrediction::single(vec![Vec3::x(); 3], 0.3),
            PatchPrediction::single(vec![Vec3::y(); 3], 0.9),
        ];
        let index = SparseIndexMatrix::build(&patches, 4).unwrap();
        let r = stitch(&cloud, &patches, &preds, &index, &StitchConfig::default(), None).unwrap();
        assert_eq!(r.normals[1], Vec3::y());
        assert_eq!(r.winner_patch[1], Some(1));
        assert_eq!(r.uncovered, vec![3]);
        assert_eq!(r.winner_patch[3], None);
    }

    #[test]
    fn ties_go_to_lowest_patch() {
        let (cloud, mut patches) = toy();
        patches[1] = patches[0].clone();
        let preds = vec![
            PatchPrediction::single(vec![Vec3::x(); 3], 0.5),
            PatchPrediction::single(vec![Vec3::y(); 3], 0.5),
        ];
        let index = SparseIndexMatrix::build(&patches, 4).unwrap();
        let r = stitch(&cloud, &patches, &preds, &index, &StitchConfig::default(), None).unwrap();
        assert_eq!(r.winner_patch[..3], [Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn misaligned_predictions() {
        let (cloud, patches) = toy();
        let preds = vec![PatchPrediction::single(vec![Vec3::x(); 3], 0.5)];
        let index = SparseIndexMatrix::build(&patches, 4).unwrap();
        assert!(stitch(&cloud, &patches, &preds, &index, &StitchConfig::default(), None).is_err());
        let preds = vec![
            PatchPrediction::single(vec![Vec3::x(); 3], 0.5),
            PatchPrediction::single(vec![Vec3::x(); 2], 0.5),
        ];
        assert!(naive_stitch(&cloud, &patches, &preds, &StitchConfig::default(), None).is_err());
    }
}
