use crate::error::Result;
use crate::estimators::{jet_normal, pca_normal};
use crate::geometry::{Patch, PointCloud, Vec3};
use crate::patchnet::{PatchNet, PatchPrediction};

/// Patch-level normal estimator used by the pipeline.
///
/// Returned normals are cloud-frame directions, one per patch member in slot
/// order.
pub trait PatchEstimator: Sync {
    fn name(&self) -> &'static str;

    fn estimate(&self, cloud: &PointCloud, patch: &Patch) -> Result<PatchPrediction>;
}

/// One plane per patch; every member gets its normal with weight 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct PcaEstimator;

impl PatchEstimator for PcaEstimator {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn estimate(&self, _cloud: &PointCloud, patch: &Patch) -> Result<PatchPrediction> {
        let fit = pca_normal(&patch.local_coords)?;
        Ok(PatchPrediction::single(vec![fit.normal; patch.len()], 1.0))
    }
}

/// Quadratic jet around the patch center, evaluated at each member.
/// Falls back to the patch plane when the jet system is degenerate.
#[derive(Clone, Copy, Debug, Default)]
pub struct JetEstimator;

impl PatchEstimator for JetEstimator {
    fn name(&self) -> &'static str {
        "jet"
    }

    fn estimate(&self, _cloud: &PointCloud, patch: &Patch) -> Result<PatchPrediction> {
        let normals: Vec<Vec3> = match jet_normal(&patch.local_coords) {
            Ok(fit) => patch.local_coords.iter().map(|q| fit.normal_at(q)).collect(),
            Err(crate::Error::Degenerate(msg)) => {
                log::debug!("jet fit on patch at {} degenerate ({msg}); using plane", patch.center_id);
                vec![pca_normal(&patch.local_coords)?.normal; patch.len()]
            }
            Err(e) => return Err(e),
        };
        Ok(PatchPrediction::single(normals, 1.0))
    }
}

/// The trained network; weights come from the gate of the chosen expert.
#[derive(Clone, Debug)]
pub struct NetEstimator {
    pub net: PatchNet,
}

impl NetEstimator {
    pub fn new(net: PatchNet) -> Self {
        Self { net }
    }
}

impl PatchEstimator for NetEstimator {
    fn name(&self) -> &'static str {
        "net"
    }

    fn estimate(&self, _cloud: &PointCloud, patch: &Patch) -> Result<PatchPrediction> {
        let pred = self.net.predict(&patch.local_coords);
        if pred.normals.iter().any(|n| !n.iter().all(|c| c.is_finite())) {
            return Err(crate::Error::Numeric(format!(
                "network produced non-finite normals for patch at {}",
                patch.center_id
            )));
        }
        Ok(pred)
    }
}
