use rayon::prelude::*;

use super::mat::Mat;
use super::network::{forward_batch, qst, ForwardMode, Graph};
use super::params::{NetworkParams, EXPERT_COUNT};
use super::tape::Tape;
use crate::error::Result;
use crate::geometry::Vec3;

/// Per-point output of a patch estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPrediction {
    /// Unit normals in the frame of the input coordinates.
    pub normals: Vec<Vec3>,
    /// Expert weights per point; each row is on the simplex.
    pub expert_weights: Vec<[f64; EXPERT_COUNT]>,
    /// Row maximum of `expert_weights`.
    pub w_pred: Vec<f64>,
    /// Zero-based index of the branch that produced each normal.
    pub chosen_branch: Vec<usize>,
}

impl PatchPrediction {
    /// Picks, per point, the branch with the largest weight (lowest index on
    /// ties) and normalizes its output.
    pub fn from_outputs(branches: &[Mat; EXPERT_COUNT], weights: &Mat) -> Self {
        let n = weights.rows;
        let mut out = Self {
            normals: Vec::with_capacity(n),
            expert_weights: Vec::with_capacity(n),
            w_pred: Vec::with_capacity(n),
            chosen_branch: Vec::with_capacity(n),
        };
        for i in 0..n {
            let w = weights.row(i);
            let mut best = 0;
            for j in 1..EXPERT_COUNT {
                if w[j] > w[best] {
                    best = j;
                }
            }
            let r = branches[best].row(i);
            let v = Vec3::new(r[0], r[1], r[2]);
            let norm = v.norm();
            // a branch output of exactly zero has no direction
            out.normals.push(if norm > 0.0 { v / norm } else { Vec3::z() });
            out.expert_weights.push([w[0], w[1], w[2]]);
            out.w_pred.push(w[best]);
            out.chosen_branch.push(best);
        }
        out
    }

    /// Prediction from a single-output estimator: every point gets full
    /// weight on branch 0.
    pub fn single(normals: Vec<Vec3>, weight: f64) -> Self {
        let n = normals.len();
        Self {
            normals,
            expert_weights: vec![[weight, 0.0, 0.0]; n],
            w_pred: vec![weight; n],
            chosen_branch: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Training loss on plain matrices: mean over rows of the
/// weight-averaged sign-invariant branch distances.
pub fn patch_loss(branches: &[Mat; EXPERT_COUNT], weights: &Mat, gt: &Mat) -> f64 {
    let mut tape = Tape::new();
    let b: Vec<_> = branches.iter().map(|m| tape.constant(m.clone())).collect();
    let w = tape.constant(weights.clone());
    let l = tape.sign_min_loss(&b, w, gt);
    tape.value(l).data[0]
}

/// Inference wrapper around trained parameters. Immutable, so one instance
/// can serve many threads.
#[derive(Clone, Debug)]
pub struct PatchNet {
    params: NetworkParams,
}

impl PatchNet {
    pub fn new(params: NetworkParams) -> Result<Self> {
        params.config.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn into_params(self) -> NetworkParams {
        self.params
    }

    /// Inference on one patch of local coordinates; normals come back in
    /// the input frame.
    pub fn predict(&self, coords: &[Vec3]) -> PatchPrediction {
        let mut g = Graph::new(&self.params.store);
        let x = Mat::from_points(coords);
        let out = forward_batch(&mut g, &self.params, &[x], ForwardMode::INFERENCE, None);
        let branches = out.branches.map(|b| g.value(b).clone());
        PatchPrediction::from_outputs(&branches, g.value(out.gate))
    }

    pub fn predict_many(&self, patches: &[Vec<Vec3>]) -> Vec<PatchPrediction> {
        patches.par_iter().map(|p| self.predict(p)).collect()
    }

    /// Canonical-pose rotation only: `(coords · R, R)`.
    pub fn qst_forward(&self, coords: &[Vec3]) -> (Mat, Mat) {
        let mut g = Graph::new(&self.params.store);
        let x = g.tape.constant(Mat::from_points(coords));
        let (rotated, r) = qst(&mut g, &self.params.qst, x);
        (g.value(rotated).clone(), g.value(r).clone())
    }
}
