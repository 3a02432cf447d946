use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::network::{forward_batch, update_running_stats, ForwardMode, Graph};
use super::params::{NetworkParams, ParamId};
use super::tape::{rotation_from_unit_quat, ParamGrads};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::seed::stage_rng;

/// A training patch: local coordinates and the matching ground-truth normals.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub coords: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Random rotation of every sampled patch.
    pub augment: bool,
    /// Expert dropout during training steps.
    pub dropout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            batch_size: 48,
            steps: 1000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            augment: false,
            dropout: true,
        }
    }
}

/// First and second moment estimates per parameter slot. Buffer slots stay
/// empty.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        let sizes: Vec<usize> = params
            .store
            .ids()
            .map(|id| match params.store.kind(id) {
                super::params::TensorKind::Learnable => params.store.get(id).len(),
                super::params::TensorKind::Buffer => 0,
            })
            .collect();
        Self {
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn apply(&mut self, params: &mut NetworkParams, grads: &ParamGrads, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let ids: Vec<ParamId> = params.store.learnable().collect();
        for id in ids {
            let Some(g) = &grads.0[id.index()] else { continue };
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let p = params.store.get_mut(id);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.data[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub adam: AdamState,
    /// Batch loss at every step, before that step's update.
    pub losses: Vec<f64>,
}

/// Loss of a batch and the gradients of every learnable tensor.
pub fn loss_and_grads(
    params: &NetworkParams,
    batch: &[TrainingSample],
    mode: ForwardMode,
    rng: Option<&mut ChaCha8Rng>,
) -> (f64, ParamGrads, super::network::ObservedStats) {
    let mut g = Graph::new(&params.store);
    let coords: Vec<Mat> = batch.iter().map(|s| Mat::from_points(&s.coords)).collect();
    let gt: Vec<Vec3> = batch.iter().flat_map(|s| s.normals.iter().copied()).collect();
    let gt = Mat::from_points(&gt);
    let out = forward_batch(&mut g, params, &coords, mode, rng);
    let loss = g.tape.sign_min_loss(&out.branches, out.gate, &gt);
    let value = g.value(loss).data[0];
    let grads = g.tape.backward(loss, params.store.len());
    (value, grads, out.observed)
}

/// Adam over seeded mini-batches. Deterministic for a fixed seed.
pub fn train(
    mut params: NetworkParams,
    data: &[TrainingSample],
    cfg: &TrainConfig,
    resume: Option<AdamState>,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if let Some(i) = data.iter().position(|s| s.coords.len() != s.normals.len() || s.coords.is_empty()) {
        return Err(Error::ShapeMismatch(format!(
            "training sample {i} has {} points and {} normals",
            data[i].coords.len(),
            data[i].normals.len()
        )));
    }
    params.config.validate()?;
    let mut adam = resume.unwrap_or_else(|| AdamState::new(&params));
    let mut rng = stage_rng(cfg.seed, "train");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let batch: Vec<TrainingSample> = if data.len() <= cfg.batch_size {
            data.to_vec()
        } else {
            let mut picked = Vec::with_capacity(cfg.batch_size);
            while picked.len() < cfg.batch_size {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                picked.push(data[order[cursor]].clone());
                cursor += 1;
            }
            picked
        };
        let batch = if cfg.augment {
            batch.into_iter().map(|s| rotate_sample(s, &mut rng)).collect()
        } else {
            batch
        };

        let mode = if cfg.dropout {
            ForwardMode::TRAINING
        } else {
            ForwardMode::DETERMINISTIC_TRAINING
        };
        let (loss, grads, observed) = loss_and_grads(&params, &batch, mode, Some(&mut rng));
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became {loss} at step {step}"
            )));
        }
        losses.push(loss);
        adam.apply(&mut params, &grads, cfg);
        update_running_stats(&mut params, &observed);
        log::debug!("step {step}: loss {loss:.6}");
    }
    Ok(TrainOutcome {
        params,
        adam,
        losses,
    })
}

fn rotate_sample(s: TrainingSample, rng: &mut ChaCha8Rng) -> TrainingSample {
    let q: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>() * 2.0 - 1.0);
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let r = rotation_from_unit_quat(q.map(|v| v / n));
    let apply = |p: &Vec3| {
        Vec3::new(
            p.x * r.at(0, 0) + p.y * r.at(1, 0) + p.z * r.at(2, 0),
            p.x * r.at(0, 1) + p.y * r.at(1, 1) + p.z * r.at(2, 1),
            p.x * r.at(0, 2) + p.y * r.at(1, 2) + p.z * r.at(2, 2),
        )
    };
    TrainingSample {
        coords: s.coords.iter().map(apply).collect(),
        normals: s.normals.iter().map(apply).collect(),
    }
}

/// `count` patches of `patch_size` points around distinct seeded random
/// centers of `cloud`, labeled with its ground-truth normals.
pub fn sample_training_patches(
    cloud: &crate::geometry::PointCloud,
    index: &crate::geometry::SpatialIndex,
    count: usize,
    patch_size: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    let gt = cloud
        .gt_normals()
        .ok_or_else(|| Error::InvalidArgument("training cloud has no normals".into()))?;
    if count == 0 || count > cloud.len() {
        return Err(Error::Config(format!(
            "cannot sample {count} patch centers from {} points",
            cloud.len()
        )));
    }
    let mut rng = stage_rng(seed, "train.centers");
    let mut centers = rand::seq::index::sample(&mut rng, cloud.len(), count).into_vec();
    centers.sort_unstable();
    centers
        .into_iter()
        .map(|c| {
            let p = crate::geometry::extract_patch(cloud, c, patch_size, index)?;
            Ok(TrainingSample {
                normals: p.member_ids.iter().map(|&i| gt[i]).collect(),
                coords: p.local_coords,
            })
        })
        .collect()
}
