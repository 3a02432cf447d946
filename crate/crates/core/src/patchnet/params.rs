//! Learnable tensors of the patch network and their fixed layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::seed::stage_rng;

/// Width of every edge-convolution output.
pub const EDGE_WIDTH: usize = 64;
/// Width of the concatenated multi-scale feature.
pub const FEATURE_WIDTH: usize = 3 * EDGE_WIDTH;
pub const EXPERT_COUNT: usize = 3;
const QST_HIDDEN: [usize; 3] = [64, 128, 64];
const HEAD_HIDDEN: [usize; 2] = [64, 32];

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rank-1 tensors become a single row.
    pub fn to_mat(&self) -> Mat {
        match self.shape.as_slice() {
            [n] => Mat::from_vec(1, *n, self.data.clone()),
            [r, c] => Mat::from_vec(*r, *c, self.data.clone()),
            s => panic!("unsupported tensor rank {}", s.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorKind {
    Learnable,
    /// Running statistics; stored but never differentiated.
    Buffer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    kinds: Vec<TensorKind>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    fn add(&mut self, name: String, shape: &[usize], kind: TensorKind) -> ParamId {
        debug_assert!(!self.names.contains(&name), "duplicate tensor {name}");
        self.names.push(name);
        self.kinds.push(kind);
        self.tensors.push(Tensor::zeros(shape));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn kind(&self, id: ParamId) -> TensorKind {
        self.kinds[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn learnable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids()
            .filter(move |&id| self.kinds[id.0] == TensorKind::Learnable)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn learnable_count(&self) -> usize {
        self.learnable().map(|id| self.get(id).len()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

/// The pair `(θ, θ̄)` of one edge convolution: `θ` acts on neighbor
/// differences and `θ̄` on the vertex itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeConvParams {
    pub theta: ParamId,
    pub theta_bar: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QstParams {
    pub conv1: Linear,
    pub conv2: Linear,
    pub fc1: Linear,
    pub fc2: Linear,
}

/// Query, key and value projections for all heads side by side (head `h`
/// owns columns `h·d .. (h+1)·d`), plus the output projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub phi: Linear,
    pub rho: Linear,
    pub alpha: Linear,
    pub out: ParamId,
}

/// `192 → 64 → 32 → 3` per-point stack shared by the experts and the gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadParams {
    pub fc1: Linear,
    pub bn1: BatchNormParams,
    pub fc2: Linear,
    pub bn2: BatchNormParams,
    pub fc3: Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionScale {
    /// Divide scores by √K, K the patch size.
    PatchSize,
    /// Divide scores by √d, d the per-head width.
    HeadDim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub n_heads: usize,
    pub k_graph: usize,
    pub attention_scale: AttentionScale,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            n_heads: 8,
            k_graph: 20,
            attention_scale: AttentionScale::PatchSize,
        }
    }
}

impl NetConfig {
    pub fn head_dim(&self) -> usize {
        FEATURE_WIDTH / self.n_heads
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.n_heads == 0 || !FEATURE_WIDTH.is_multiple_of(self.n_heads) {
            return Err(crate::Error::Config(format!(
                "head count {} must divide {FEATURE_WIDTH}",
                self.n_heads
            )));
        }
        if self.k_graph == 0 {
            return Err(crate::Error::Config("k_graph must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub store: ParamStore,
    pub qst: QstParams,
    pub edge: [EdgeConvParams; 4],
    pub attention: AttentionParams,
    pub experts: [HeadParams; EXPERT_COUNT],
    pub gate: HeadParams,
}

impl NetworkParams {
    /// Layout with all tensors zero (batch-norm variances one).
    pub fn zeros(config: NetConfig) -> Self {
        let mut s = ParamStore::default();
        let linear = |s: &mut ParamStore, name: &str, i: usize, o: usize, bias: bool| Linear {
            weight: s.add(format!("{name}.weight"), &[i, o], TensorKind::Learnable),
            bias: bias.then(|| s.add(format!("{name}.bias"), &[o], TensorKind::Learnable)),
        };
        let bn = |s: &mut ParamStore, name: &str, c: usize| BatchNormParams {
            gamma: s.add(format!("{name}.gamma"), &[c], TensorKind::Learnable),
            beta: s.add(format!("{name}.beta"), &[c], TensorKind::Learnable),
            running_mean: s.add(format!("{name}.running_mean"), &[c], TensorKind::Buffer),
            running_var: s.add(format!("{name}.running_var"), &[c], TensorKind::Buffer),
        };
        let head = |s: &mut ParamStore, name: &str| HeadParams {
            fc1: linear(s, &format!("{name}.fc1"), FEATURE_WIDTH, HEAD_HIDDEN[0], true),
            bn1: bn(s, &format!("{name}.bn1"), HEAD_HIDDEN[0]),
            fc2: linear(s, &format!("{name}.fc2"), HEAD_HIDDEN[0], HEAD_HIDDEN[1], true),
            bn2: bn(s, &format!("{name}.bn2"), HEAD_HIDDEN[1]),
            fc3: linear(s, &format!("{name}.fc3"), HEAD_HIDDEN[1], 3, true),
        };

        let qst = QstParams {
            conv1: linear(&mut s, "qst.conv1", 3, QST_HIDDEN[0], true),
            conv2: linear(&mut s, "qst.conv2", QST_HIDDEN[0], QST_HIDDEN[1], true),
            fc1: linear(&mut s, "qst.fc1", QST_HIDDEN[1], QST_HIDDEN[2], true),
            fc2: linear(&mut s, "qst.fc2", QST_HIDDEN[2], 4, true),
        };
        let edge = std::array::from_fn(|l| {
            let input = if l == 0 { 3 } else { EDGE_WIDTH };
            EdgeConvParams {
                theta: s.add(format!("edge{l}.theta"), &[input, EDGE_WIDTH], TensorKind::Learnable),
                theta_bar: s.add(
                    format!("edge{l}.theta_bar"),
                    &[input, EDGE_WIDTH],
                    TensorKind::Learnable,
                ),
            }
        });
        let attention = AttentionParams {
            phi: linear(&mut s, "attention.phi", FEATURE_WIDTH, FEATURE_WIDTH, true),
            rho: linear(&mut s, "attention.rho", FEATURE_WIDTH, FEATURE_WIDTH, true),
            alpha: linear(&mut s, "attention.alpha", FEATURE_WIDTH, FEATURE_WIDTH, true),
            out: s.add(
                "attention.out.weight".into(),
                &[FEATURE_WIDTH, FEATURE_WIDTH],
                TensorKind::Learnable,
            ),
        };
        let experts = std::array::from_fn(|j| head(&mut s, &format!("expert{j}")));
        let gate = head(&mut s, "gate");

        let mut params = Self {
            config,
            store: s,
            qst,
            edge,
            attention,
            experts,
            gate,
        };
        for bn in params.batch_norms() {
            params.store.get_mut(bn.running_var).data.fill(1.0);
        }
        params
    }

    /// Seeded initialization: uniform `±√(6/fan_in)` weights, zero biases,
    /// unit batch-norm scales, and a QST head starting near the identity
    /// quaternion.
    pub fn init(config: NetConfig, seed: u64) -> Self {
        let mut params = Self::zeros(config);
        let mut rng = stage_rng(seed, "init");
        let ids: Vec<ParamId> = params.store.learnable().collect();
        for id in ids {
            let name = params.store.name(id).to_owned();
            let t = params.store.get_mut(id);
            if name.ends_with(".gamma") {
                t.data.fill(1.0);
            } else if name.ends_with(".weight") || name.contains(".theta") {
                let bound = (6.0 / t.shape[0] as f64).sqrt();
                let bound = if name == "qst.fc2.weight" { 0.01 * bound } else { bound };
                t.data
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(-bound..bound));
            }
        }
        if let Some(b) = params.qst.fc2.bias {
            params.store.get_mut(b).data.copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        }
        params
    }

    pub fn batch_norms(&self) -> Vec<BatchNormParams> {
        self.experts
            .iter()
            .chain(std::iter::once(&self.gate))
            .flat_map(|h| [h.bn1, h.bn2])
            .collect()
    }
}
