//! Independent reference implementations shared by the integration tests.
//! Everything here is plain scalar code over `Vec<Vec<f64>>` so that it
//! shares nothing with the library beyond the parameter values.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stitchnorm::geometry::{extract_patch, Patch, PointCloud, SpatialIndex};
use stitchnorm::patchnet::mat::Mat;
use stitchnorm::io::synthetic::wave;
use stitchnorm::patchnet::network::ForwardMode;
use stitchnorm::patchnet::params::{AttentionScale, Linear, NetConfig, NetworkParams, ParamId, ParamStore};
use stitchnorm::patchnet::train::loss_and_grads;
use stitchnorm::patchnet::{PatchPrediction, TrainingSample};
use stitchnorm::Vec3;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Rows {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn to_mat(rows: &Rows) -> Mat {
    let (n, d) = (rows.len(), rows.first().map_or(0, Vec::len));
    Mat::from_fn(n, d, |i, j| rows[i][j])
}

pub fn from_mat(m: &Mat) -> Rows {
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

/// `(rows, cols)` weight matrix of a stored tensor.
pub fn weight(store: &ParamStore, id: ParamId) -> Rows {
    let t = store.get(id);
    let (r, c) = (t.shape[0], t.shape[1]);
    (0..r).map(|i| t.data[i * c..(i + 1) * c].to_vec()).collect()
}

pub fn vector(store: &ParamStore, id: ParamId) -> Vec<f64> {
    store.get(id).data.clone()
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn linear(store: &ParamStore, layer: &Linear, x: &Rows) -> Rows {
    let mut y = matmul(x, &weight(store, layer.weight));
    if let Some(b) = layer.bias {
        let b = vector(store, b);
        for row in &mut y {
            for (v, bj) in row.iter_mut().zip(&b) {
                *v += bj;
            }
        }
    }
    y
}

/// Exact kNN by full sort, self included, ties to the lower index.
pub fn brute_knn(rows: &Rows, i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let s: f64 = r.iter().zip(&rows[i]).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// `f_i = max_j ReLU(θ·(x_j − x_i) + θ̄·x_i)` over the `k` nearest rows,
/// plus `x_i` when `residual`.
pub fn naive_edge_conv(x: &Rows, theta: &Rows, theta_bar: &Rows, k: usize, residual: bool) -> Rows {
    let n = x.len();
    let k = k.min(n);
    let d_in = theta.len();
    let d_out = theta[0].len();
    (0..n)
        .map(|i| {
            let mut best = vec![f64::NEG_INFINITY; d_out];
            for j in brute_knn(x, i, k) {
                for o in 0..d_out {
                    let mut h = 0.0;
                    for c in 0..d_in {
                        h += theta[c][o] * (x[j][c] - x[i][c]) + theta_bar[c][o] * x[i][c];
                    }
                    best[o] = best[o].max(h.max(0.0));
                }
            }
            if residual {
                for o in 0..d_out {
                    best[o] += x[i][o];
                }
            }
            best
        })
        .collect()
}

/// Multi-head attention by explicit loops. Returns the output and the
/// attention matrices.
pub fn naive_attention(
    f: &Rows,
    q: (&Rows, &[f64]),
    k: (&Rows, &[f64]),
    v: (&Rows, &[f64]),
    w_out: &Rows,
    heads: usize,
    divisor: f64,
) -> (Rows, Vec<Rows>) {
    let n = f.len();
    let width = q.0[0].len();
    let d = width / heads;
    let proj = |(w, b): (&Rows, &[f64])| -> Rows {
        (0..n)
            .map(|i| {
                (0..width)
                    .map(|o| b[o] + (0..f[i].len()).map(|c| f[i][c] * w[c][o]).sum::<f64>())
                    .collect()
            })
            .collect()
    };
    let (qm, km, vm) = (proj(q), proj(k), proj(v));
    let mut cat = vec![vec![0.0; width]; n];
    let mut maps = Vec::new();
    for h in 0..heads {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for c in h * d..(h + 1) * d {
                    s += qm[i][c] * km[j][c];
                }
                m[i][j] = s / divisor;
            }
            let mx = m[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = m[i].iter().map(|s| (s - mx).exp()).sum();
            for j in 0..n {
                m[i][j] = (m[i][j] - mx).exp() / z;
            }
            for c in h * d..(h + 1) * d {
                cat[i][c] = (0..n).map(|j| m[i][j] * vm[j][c]).sum();
            }
        }
        maps.push(m);
    }
    (matmul(&cat, w_out), maps)
}

pub fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let pts = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    PointCloud::new(pts).unwrap()
}

/// `m` patches of size `k` around random distinct centers, each with random
/// unit normals and random prediction weights in (0, 1].
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    k: usize,
) -> (PointCloud, Vec<Patch>, Vec<PatchPrediction>) {
    let cloud = random_cloud(rng, n);
    let index = SpatialIndex::build(&cloud).unwrap();
    let centers = rand::seq::index::sample(rng, n, m).into_vec();
    let patches: Vec<Patch> = centers
        .iter()
        .map(|&c| extract_patch(&cloud, c, k, &index).unwrap())
        .collect();
    let preds = patches
        .iter()
        .map(|p| {
            let normals = (0..p.len()).map(|_| random_unit(rng)).collect();
            let mut pred = PatchPrediction::single(normals, 1.0);
            for w in &mut pred.w_pred {
                *w = rng.gen_range(1e-3..=1.0);
            }
            pred
        })
        .collect();
    (cloud, patches, preds)
}

/// `|a − n| / max(|a|, |n|, 1e-7)`: the floor keeps coordinates whose true
/// gradient is zero from being judged on roundoff alone.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

pub const GRADCHECK_MODE: ForwardMode = ForwardMode::DETERMINISTIC_TRAINING;

/// Network with `K = 16`, `k_graph = 4`, 8 heads and one wave patch with its
/// ground-truth normals.
pub fn gradcheck_instance() -> (NetworkParams, [TrainingSample; 1]) {
    let config = NetConfig {
        n_heads: 8,
        k_graph: 4,
        attention_scale: AttentionScale::PatchSize,
    };
    let params = NetworkParams::init(config, 5);
    let cloud = wave(400, 0.2, 3).unwrap();
    let index = SpatialIndex::build(&cloud).unwrap();
    let gt = cloud.gt_normals().unwrap();
    let patch = extract_patch(&cloud, 17, 16, &index).unwrap();
    let batch = [TrainingSample {
        normals: patch.member_ids.iter().map(|&i| gt[i]).collect(),
        coords: patch.local_coords,
    }];
    (params, batch)
}

pub fn central_difference(
    params: &mut NetworkParams,
    batch: &[TrainingSample],
    id: ParamId,
    e: usize,
    h: f64,
) -> f64 {
    let orig = params.store.get(id).data[e];
    params.store.get_mut(id).data[e] = orig + h;
    let (plus, _, _) = loss_and_grads(params, batch, GRADCHECK_MODE, None);
    params.store.get_mut(id).data[e] = orig - h;
    let (minus, _, _) = loss_and_grads(params, batch, GRADCHECK_MODE, None);
    params.store.get_mut(id).data[e] = orig;
    (plus - minus) / (2.0 * h)
}
