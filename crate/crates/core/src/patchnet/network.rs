//! Forward pass of the patch network on a [`Tape`].
//!
//! Pipeline per patch: QST rotation, one edge convolution on coordinates,
//! three residual edge convolutions on dynamic feature graphs, concatenation
//! of the last three feature maps, multi-head attention, then three expert
//! regressors and a gate over the stacked rows of the whole batch.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mat::Mat;
use super::params::{
    AttentionParams, AttentionScale, BatchNormParams, EdgeConvParams, HeadParams, Linear,
    NetworkParams, ParamId, ParamStore, QstParams, EXPERT_COUNT,
};
use super::tape::{BatchStats, Tape, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DROPOUT: f64 = 0.3;
pub const BN_EPS: f64 = 1e-5;

/// How batch norm and dropout behave during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardMode {
    /// Normalize with the batch's own statistics instead of running ones.
    pub batch_stats: bool,
    pub dropout: bool,
}

impl ForwardMode {
    pub const INFERENCE: Self = Self {
        batch_stats: false,
        dropout: false,
    };
    pub const TRAINING: Self = Self {
        batch_stats: true,
        dropout: true,
    };
    /// Training-mode batch norm without dropout; used by gradient checks.
    pub const DETERMINISTIC_TRAINING: Self = Self {
        batch_stats: true,
        dropout: false,
    };
}

/// A tape bound to a parameter store, creating one leaf per parameter.
pub struct Graph<'p> {
    pub tape: Tape,
    store: &'p ParamStore,
    leaves: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            tape: Tape::new(),
            store,
            leaves: vec![None; store.len()],
        }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.leaves[id.index()] {
            return v;
        }
        let v = self.tape.param(id.index(), self.store.get(id).to_mat());
        self.leaves[id.index()] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &Mat {
        self.tape.value(v)
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn linear(&mut self, x: Var, layer: &Linear) -> Var {
        let w = self.param(layer.weight);
        let y = self.tape.matmul(x, w);
        match layer.bias {
            Some(b) => {
                let b = self.param(b);
                self.tape.add_row(y, b)
            }
            None => y,
        }
    }
}

/// `k` nearest rows of `x` for every row, itself included, flattened
/// row-major; ties go to the lower row index.
pub fn knn_rows(x: &Mat, k: usize) -> Vec<usize> {
    let n = x.rows;
    let k = k.min(n);
    let mut out = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let xi = x.row(i);
        for j in 0..n {
            let d: f64 = xi
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            cand.push((d, j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        cand[..k].sort_unstable_by(cmp);
        out.extend(cand[..k].iter().map(|c| c.1));
    }
    out
}

/// Quaternion spatial transformer. Returns `(x · R, R)`.
pub fn qst(g: &mut Graph, p: &QstParams, x: Var) -> (Var, Var) {
    let rows = g.value(x).rows;
    let h = g.linear(x, &p.conv1);
    let h = g.tape.relu(h);
    let h = g.linear(h, &p.conv2);
    let h = g.tape.relu(h);
    let pooled = g.tape.group_max(h, rows);
    let h = g.linear(pooled, &p.fc1);
    let h = g.tape.relu(h);
    let q = g.linear(h, &p.fc2);
    let r = g.tape.quat_to_rot(q);
    (g.tape.matmul(x, r), r)
}

/// One edge convolution: per edge `ReLU(θ·(x_j − x_i) + θ̄·x_i)`, max over
/// each vertex's `k` graph neighbors, plus `x` itself when `residual`.
/// The graph is the kNN graph of `x`'s current values.
pub fn edge_conv(g: &mut Graph, p: &EdgeConvParams, x: Var, k: usize, residual: bool) -> Var {
    let n = g.value(x).rows;
    let k = k.min(n);
    let neighbors = knn_rows(g.value(x), k);
    let owners: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, k)).collect();

    let theta = g.param(p.theta);
    let theta_bar = g.param(p.theta_bar);
    let a = g.tape.matmul(x, theta);
    let b = g.tape.matmul(x, theta_bar);
    let c = g.tape.sub(b, a);
    let aj = g.tape.gather(a, neighbors);
    let ci = g.tape.gather(c, owners);
    let e = g.tape.add(aj, ci);
    let e = g.tape.relu(e);
    let f = g.tape.group_max(e, k);
    if residual {
        g.tape.add(f, x)
    } else {
        f
    }
}

/// Multi-head scaled dot-product attention over the rows of `f`. Returns the
/// aggregated features and each head's row-stochastic attention matrix.
pub fn attention(
    g: &mut Graph,
    p: &AttentionParams,
    f: Var,
    n_heads: usize,
    scale: AttentionScale,
) -> (Var, Vec<Var>) {
    let (k, width) = g.value(f).shape();
    let d = width / n_heads;
    let q = g.linear(f, &p.phi);
    let key = g.linear(f, &p.rho);
    let v = g.linear(f, &p.alpha);
    let divisor = match scale {
        AttentionScale::PatchSize => (k as f64).sqrt(),
        AttentionScale::HeadDim => (d as f64).sqrt(),
    };
    let mut heads = Vec::with_capacity(n_heads);
    let mut maps = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (lo, hi) = (h * d, (h + 1) * d);
        let qh = g.tape.slice_cols(q, lo, hi);
        let kh = g.tape.slice_cols(key, lo, hi);
        let vh = g.tape.slice_cols(v, lo, hi);
        let scores = g.tape.matmul_t(qh, kh);
        let scores = g.tape.scale(scores, 1.0 / divisor);
        let m = g.tape.softmax_rows(scores);
        maps.push(m);
        heads.push(g.tape.matmul(m, vh));
    }
    let cat = g.tape.concat_cols(&heads);
    let w = g.param(p.out);
    (g.tape.matmul(cat, w), maps)
}

/// Batch-norm statistics observed during a training forward, for updating
/// running averages.
pub type ObservedStats = Vec<(BatchNormParams, BatchStats)>;

fn batch_norm(
    g: &mut Graph,
    p: &BatchNormParams,
    x: Var,
    mode: ForwardMode,
    observed: &mut ObservedStats,
) -> Var {
    let gamma = g.param(p.gamma);
    let beta = g.param(p.beta);
    if mode.batch_stats {
        let (y, stats) = g.tape.batch_norm(x, gamma, beta, BN_EPS);
        observed.push((*p, stats));
        y
    } else {
        let mean = g.store().get(p.running_mean).data.clone();
        let var = g.store().get(p.running_var).data.clone();
        g.tape.batch_norm_frozen(x, gamma, beta, &mean, &var, BN_EPS)
    }
}

fn dropout(g: &mut Graph, x: Var, rng: &mut ChaCha8Rng) -> Var {
    let keep = 1.0 - DROPOUT;
    let mask: Vec<f64> = (0..g.value(x).data.len())
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    g.tape.mask(x, mask)
}

/// Per-point `192 → 64 → 32 → 3` stack. `use_dropout` distinguishes the
/// expert branches from the gate.
#[allow(clippy::too_many_arguments)]
pub fn head(
    g: &mut Graph,
    p: &HeadParams,
    x: Var,
    mode: ForwardMode,
    use_dropout: bool,
    rng: &mut Option<&mut ChaCha8Rng>,
    observed: &mut ObservedStats,
) -> Var {
    let mut h = x;
    for (fc, bn) in [(&p.fc1, &p.bn1), (&p.fc2, &p.bn2)] {
        h = g.linear(h, fc);
        h = batch_norm(g, bn, h, mode, observed);
        h = g.tape.leaky_relu(h, LEAKY_SLOPE);
        if use_dropout && mode.dropout {
            if let Some(rng) = rng.as_deref_mut() {
                h = dropout(g, h, rng);
            }
        }
    }
    g.linear(h, &p.fc3)
}

/// Intermediate results for one patch.
#[derive(Clone, Debug)]
pub struct PatchTrace {
    pub rotation: Var,
    pub rotated: Var,
    /// `F⁰..F³`.
    pub edge_features: [Var; 4],
    pub attention_maps: Vec<Var>,
    pub aggregated: Var,
}

/// Outputs of a batch forward, rows stacked patch after patch.
#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub patches: Vec<PatchTrace>,
    /// Raw branch outputs rotated back to the input frame.
    pub branches: [Var; EXPERT_COUNT],
    /// Row-stochastic expert weights.
    pub gate: Var,
    pub observed: ObservedStats,
}

/// Runs every stage up to the aggregated `K × 192` features of one patch.
pub fn patch_features(g: &mut Graph, net: &NetworkParams, coords: &Mat) -> PatchTrace {
    let k_graph = net.config.k_graph;
    let x = g.tape.constant(coords.clone());
    let (rotated, rotation) = qst(g, &net.qst, x);
    let f0 = edge_conv(g, &net.edge[0], rotated, k_graph, false);
    let f1 = edge_conv(g, &net.edge[1], f0, k_graph, true);
    let f2 = edge_conv(g, &net.edge[2], f1, k_graph, true);
    let f3 = edge_conv(g, &net.edge[3], f2, k_graph, true);
    let f = g.tape.concat_cols(&[f1, f2, f3]);
    let (aggregated, attention_maps) = attention(
        g,
        &net.attention,
        f,
        net.config.n_heads,
        net.config.attention_scale,
    );
    PatchTrace {
        rotation,
        rotated,
        edge_features: [f0, f1, f2, f3],
        attention_maps,
        aggregated,
    }
}

/// Full forward over a batch of patches given as `K × 3` local coordinates.
/// Batch norm in training mode pools statistics over every row of the batch.
pub fn forward_batch(
    g: &mut Graph,
    net: &NetworkParams,
    patches: &[Mat],
    mode: ForwardMode,
    mut rng: Option<&mut ChaCha8Rng>,
) -> BatchOutput {
    let traces: Vec<PatchTrace> = patches
        .iter()
        .map(|coords| patch_features(g, net, coords))
        .collect();
    let stacked: Vec<Var> = traces.iter().map(|t| t.aggregated).collect();
    let features = if stacked.len() == 1 {
        stacked[0]
    } else {
        g.tape.concat_rows(&stacked)
    };

    let mut observed = Vec::new();
    let branches = std::array::from_fn(|j| {
        let raw = head(g, &net.experts[j], features, mode, true, &mut rng, &mut observed);
        derotate(g, raw, &traces)
    });
    let logits = head(g, &net.gate, features, mode, false, &mut rng, &mut observed);
    let gate = g.tape.softmax_rows(logits);
    BatchOutput {
        patches: traces,
        branches,
        gate,
        observed,
    }
}

/// Maps stacked per-patch row vectors back through each patch's `Rᵀ`.
fn derotate(g: &mut Graph, stacked: Var, traces: &[PatchTrace]) -> Var {
    let mut parts = Vec::with_capacity(traces.len());
    let mut start = 0;
    for t in traces {
        let rows = g.value(t.rotated).rows;
        let part = if traces.len() == 1 {
            stacked
        } else {
            g.tape.slice_rows(stacked, start, start + rows)
        };
        parts.push(g.tape.matmul_t(part, t.rotation));
        start += rows;
    }
    if parts.len() == 1 {
        parts[0]
    } else {
        g.tape.concat_rows(&parts)
    }
}

/// Updates running batch-norm statistics: `running ← m·running + (1−m)·batch`
/// with `m = 0.9`, using the unbiased batch variance.
pub fn update_running_stats(net: &mut NetworkParams, observed: &ObservedStats) {
    const MOMENTUM: f64 = 0.9;
    for (bn, stats) in observed {
        let n = stats.rows as f64;
        let unbias = if stats.rows > 1 { n / (n - 1.0) } else { 1.0 };
        let mean = net.store.get_mut(bn.running_mean);
        for (r, m) in mean.data.iter_mut().zip(&stats.mean) {
            *r = MOMENTUM * *r + (1.0 - MOMENTUM) * m;
        }
        let var = net.store.get_mut(bn.running_var);
        for (r, v) in var.data.iter_mut().zip(&stats.var) {
            *r = MOMENTUM * *r + (1.0 - MOMENTUM) * v * unbias;
        }
    }
}
