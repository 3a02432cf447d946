//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its value and enough context to
//! route gradients back to its inputs. Max-style reductions remember their
//! winners so gradients only flow to the selected entries.

use super::mat::{gemm_acc, matmul, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Per-column statistics saved by a training-mode batch norm.
#[derive(Clone, Debug)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub rows: usize,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Mask(Var, Vec<f64>),
    Gather(Var, Vec<usize>),
    /// `winners[r * cols + c]` is the input row chosen for output `(r, c)`.
    GroupMax(Var, Vec<usize>),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    /// Inference-mode batch norm with frozen statistics.
    Affine {
        x: Var,
        gamma: Var,
        beta: Var,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    QuatToRot {
        q: Var,
        unit: [f64; 4],
        norm: f64,
    },
    SignMinLoss {
        branches: Vec<Var>,
        weights: Var,
        /// Per (row, branch): difference vector picked by the min, and its norm.
        picked: Vec<([f64; 3], f64)>,
    },
}

struct Node {
    value: Mat,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients keyed by parameter slot.
#[derive(Clone, Debug)]
pub struct ParamGrads(pub Vec<Option<Mat>>);

/// Quaternion norm below which the rotation falls back to identity.
pub const QUAT_EPS: f64 = 1e-8;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, slot: usize, value: Mat) -> Var {
        self.push(value, Op::Param(slot))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), false, self.value(b), false);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), false, self.value(b), true);
        self.push(v, Op::MatMulT(a, b))
    }

    /// Adds the `1 × cols` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows, 1);
        let mut v = self.value(x).clone();
        assert_eq!(v.cols, bias.cols);
        for r in 0..v.rows {
            for (o, b) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *o += b;
            }
        }
        self.push(v, Op::AddRow(x, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape());
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape());
        for (o, b) in v.data.iter_mut().zip(&self.value(b).data) {
            *o -= b;
        }
        self.push(v, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut v = self.value(x).clone();
        v.data.iter_mut().for_each(|o| *o *= s);
        self.push(v, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        v.data.iter_mut().for_each(|o| *o = o.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let mut v = self.value(x).clone();
        v.data
            .iter_mut()
            .for_each(|o| *o = if *o > 0.0 { *o } else { *o * slope });
        self.push(v, Op::LeakyRelu(x, slope))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Var {
        let mut v = self.value(x).clone();
        assert_eq!(v.data.len(), mask.len());
        for (o, m) in v.data.iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(v, Op::Mask(x, mask))
    }

    /// Row gather: output row `r` is input row `index[r]`.
    pub fn gather(&mut self, x: Var, index: Vec<usize>) -> Var {
        let src = self.value(x);
        let mut v = Mat::zeros(index.len(), src.cols);
        for (r, &i) in index.iter().enumerate() {
            v.row_mut(r).copy_from_slice(src.row(i));
        }
        self.push(v, Op::Gather(x, index))
    }

    /// Columnwise max over consecutive groups of `group` rows. Ties go to
    /// the first row of the group.
    pub fn group_max(&mut self, x: Var, group: usize) -> Var {
        let src = self.value(x);
        assert!(group > 0 && src.rows.is_multiple_of(group), "group size");
        let out_rows = src.rows / group;
        let mut v = Mat::zeros(out_rows, src.cols);
        let mut winners = vec![0usize; out_rows * src.cols];
        for r in 0..out_rows {
            let base = r * group;
            let (out, win) = (
                &mut v.data[r * src.cols..(r + 1) * src.cols],
                &mut winners[r * src.cols..(r + 1) * src.cols],
            );
            out.copy_from_slice(src.row(base));
            win.iter_mut().for_each(|w| *w = base);
            for t in 1..group {
                for (c, &x) in src.row(base + t).iter().enumerate() {
                    if x > out[c] {
                        out[c] = x;
                        win[c] = base + t;
                    }
                }
            }
        }
        self.push(v, Op::GroupMax(x, winners))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        for r in 0..v.rows {
            softmax_in_place(v.row_mut(r));
        }
        self.push(v, Op::SoftmaxRows(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Mat::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows, rows, "concat row mismatch");
            for r in 0..rows {
                v.row_mut(r)[offset..offset + m.cols].copy_from_slice(m.row(r));
            }
            offset += m.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat column mismatch");
            data.extend_from_slice(&m.data);
        }
        let rows = data.len() / cols.max(1);
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Var {
        let v = self.value(x).rows_range(start, end);
        self.push(v, Op::SliceRows(x, start))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let v = self.value(x).cols_range(start, end);
        self.push(v, Op::SliceCols(x, start))
    }

    /// Batch norm over rows using the batch's own statistics.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> (Var, BatchStats) {
        let src = self.value(x);
        let (n, c) = src.shape();
        let mut mean = vec![0.0; c];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(src.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(src.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|s| 1.0 / (s + eps).sqrt()).collect();
        let xhat = Mat::from_fn(n, c, |r, j| (src.at(r, j) - mean[j]) * inv_std[j]);
        let (g, b) = (self.value(gamma), self.value(beta));
        let out = Mat::from_fn(n, c, |r, j| xhat.at(r, j) * g.data[j] + b.data[j]);
        let stats = BatchStats { mean, var, rows: n };
        let v = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        );
        (v, stats)
    }

    /// Batch norm with frozen statistics.
    pub fn batch_norm_frozen(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        eps: f64,
    ) -> Var {
        let src = self.value(x);
        let inv_std: Vec<f64> = var.iter().map(|s| 1.0 / (s + eps).sqrt()).collect();
        let (g, b) = (self.value(gamma), self.value(beta));
        let out = Mat::from_fn(src.rows, src.cols, |r, j| {
            (src.at(r, j) - mean[j]) * inv_std[j] * g.data[j] + b.data[j]
        });
        self.push(
            out,
            Op::Affine {
                x,
                gamma,
                beta,
                mean: mean.to_vec(),
                inv_std,
            },
        )
    }

    /// `1 × 4` quaternion `(w, x, y, z)` to a `3 × 3` rotation acting on row
    /// vectors from the right. Near-zero quaternions give the identity.
    pub fn quat_to_rot(&mut self, q: Var) -> Var {
        let src = self.value(q);
        assert_eq!(src.shape(), (1, 4));
        let norm = src.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit = if norm < QUAT_EPS {
            log::warn!("quaternion norm {norm:e} below {QUAT_EPS:e}; using identity rotation");
            [1.0, 0.0, 0.0, 0.0]
        } else {
            [
                src.data[0] / norm,
                src.data[1] / norm,
                src.data[2] / norm,
                src.data[3] / norm,
            ]
        };
        let r = rotation_from_unit_quat(unit);
        self.push(r, Op::QuatToRot { q, unit, norm })
    }

    /// `(1/n) Σ_i Σ_j w[i,j] · min(‖b_j[i] + g[i]‖, ‖b_j[i] − g[i]‖)`.
    pub fn sign_min_loss(&mut self, branches: &[Var], weights: Var, gt: &Mat) -> Var {
        let w = self.value(weights);
        let n = gt.rows;
        assert_eq!(w.shape(), (n, branches.len()));
        let mut picked = Vec::with_capacity(n * branches.len());
        let mut total = 0.0;
        for i in 0..n {
            let g = gt.row(i);
            for (j, &b) in branches.iter().enumerate() {
                let p = self.value(b).row(i);
                let plus = [p[0] + g[0], p[1] + g[1], p[2] + g[2]];
                let minus = [p[0] - g[0], p[1] - g[1], p[2] - g[2]];
                let (np, nm) = (norm3(&plus), norm3(&minus));
                let (d, len) = if np <= nm { (plus, np) } else { (minus, nm) };
                total += w.at(i, j) * len;
                picked.push((d, len));
            }
        }
        let loss = Mat::from_vec(1, 1, vec![total / n as f64]);
        self.push(
            loss,
            Op::SignMinLoss {
                branches: branches.to_vec(),
                weights,
                picked,
            },
        )
    }

    /// Reverse pass from the scalar `output`. Returns gradients of every
    /// parameter slot in `0..n_slots` that the output depends on.
    pub fn backward(&self, output: Var, n_slots: usize) -> ParamGrads {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Mat::from_vec(1, 1, vec![1.0]));
        let mut out = vec![None; n_slots];

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(slot) => accumulate_into(&mut out[*slot], g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    gemm_acc(1.0, &g, false, bv, true, &mut ga);
                    let mut gb = Mat::zeros(bv.rows, bv.cols);
                    gemm_acc(1.0, av, true, &g, false, &mut gb);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    gemm_acc(1.0, &g, false, bv, false, &mut ga);
                    let mut gb = Mat::zeros(bv.rows, bv.cols);
                    gemm_acc(1.0, &g, true, av, false, &mut gb);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(x, b) => {
                    let mut gb = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let mut neg = g.clone();
                    neg.data.iter_mut().for_each(|v| *v = -*v);
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, neg);
                }
                Op::Scale(x, s) => {
                    let mut gx = g;
                    gx.data.iter_mut().for_each(|v| *v *= s);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    for (d, v) in gx.data.iter_mut().zip(&self.value(*x).data) {
                        if *v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::LeakyRelu(x, slope) => {
                    let mut gx = g;
                    for (d, v) in gx.data.iter_mut().zip(&self.value(*x).data) {
                        if *v <= 0.0 {
                            *d *= slope;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Mask(x, mask) => {
                    let mut gx = g;
                    for (d, m) in gx.data.iter_mut().zip(mask) {
                        *d *= m;
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Gather(x, index) => {
                    let src = self.value(*x);
                    let mut gx = Mat::zeros(src.rows, src.cols);
                    for (r, &i) in index.iter().enumerate() {
                        for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::GroupMax(x, winners) => {
                    let src = self.value(*x);
                    let mut gx = Mat::zeros(src.rows, src.cols);
                    let cols = g.cols;
                    for (k, (&w, v)) in winners.iter().zip(&g.data).enumerate() {
                        *gx.at_mut(w, k % cols) += v;
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut gx = Mat::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, a), b) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = a * (b - dot);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        accumulate(&mut grads, p, g.cols_range(offset, offset + w));
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let h = self.value(p).rows;
                        accumulate(&mut grads, p, g.rows_range(offset, offset + h));
                        offset += h;
                    }
                }
                Op::SliceRows(x, start) => {
                    let src = self.value(*x);
                    let mut gx = Mat::zeros(src.rows, src.cols);
                    gx.data[start * src.cols..start * src.cols + g.data.len()]
                        .copy_from_slice(&g.data);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SliceCols(x, start) => {
                    let src = self.value(*x);
                    let mut gx = Mat::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        gx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (n, c) = xhat.shape();
                    let gv = &self.value(*gamma).data;
                    let mut ggamma = Mat::zeros(1, c);
                    let mut gbeta = Mat::zeros(1, c);
                    for r in 0..n {
                        for j in 0..c {
                            let d = g.at(r, j);
                            gbeta.data[j] += d;
                            ggamma.data[j] += d * xhat.at(r, j);
                        }
                    }
                    let nf = n as f64;
                    let gx = Mat::from_fn(n, c, |r, j| {
                        let dxhat = g.at(r, j) * gv[j];
                        inv_std[j] / nf
                            * (nf * dxhat - gbeta.data[j] * gv[j] - xhat.at(r, j) * ggamma.data[j] * gv[j])
                    });
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::Affine {
                    x,
                    gamma,
                    beta,
                    mean,
                    inv_std,
                } => {
                    let src = self.value(*x);
                    let gv = &self.value(*gamma).data;
                    let (n, c) = src.shape();
                    let mut ggamma = Mat::zeros(1, c);
                    let mut gbeta = Mat::zeros(1, c);
                    let mut gx = Mat::zeros(n, c);
                    for r in 0..n {
                        for j in 0..c {
                            let d = g.at(r, j);
                            gbeta.data[j] += d;
                            ggamma.data[j] += d * (src.at(r, j) - mean[j]) * inv_std[j];
                            *gx.at_mut(r, j) = d * gv[j] * inv_std[j];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::QuatToRot { q, unit, norm } => {
                    if *norm < QUAT_EPS {
                        continue;
                    }
                    let gu = rotation_grad(*unit, &g);
                    let dot: f64 = gu.iter().zip(unit).map(|(a, b)| a * b).sum();
                    let gq: Vec<f64> = (0..4).map(|k| (gu[k] - unit[k] * dot) / norm).collect();
                    accumulate(&mut grads, *q, Mat::from_vec(1, 4, gq));
                }
                Op::SignMinLoss {
                    branches,
                    weights,
                    picked,
                } => {
                    let scale = g.data[0];
                    let w = self.value(*weights);
                    let n = w.rows;
                    let nb = branches.len();
                    let mut gw = Mat::zeros(n, nb);
                    let mut gb: Vec<Mat> = (0..nb).map(|_| Mat::zeros(n, 3)).collect();
                    for i in 0..n {
                        for j in 0..nb {
                            let (d, len) = &picked[i * nb + j];
                            *gw.at_mut(i, j) = scale * len / n as f64;
                            if *len > 0.0 {
                                let f = scale * w.at(i, j) / (n as f64 * len);
                                for (o, v) in gb[j].row_mut(i).iter_mut().zip(d) {
                                    *o = f * v;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *weights, gw);
                    for (&b, gm) in branches.iter().zip(gb) {
                        accumulate(&mut grads, b, gm);
                    }
                }
            }
        }
        ParamGrads(out)
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    accumulate_into(&mut grads[v.0], g);
}

fn accumulate_into(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

pub(crate) fn rotation_from_unit_quat([w, x, y, z]: [f64; 4]) -> Mat {
    Mat::from_vec(
        3,
        3,
        vec![
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    )
}

/// Gradient of `Σ g ⊙ R(q)` with respect to the (unit) quaternion entries.
fn rotation_grad([w, x, y, z]: [f64; 4], g: &Mat) -> [f64; 4] {
    let g = |r: usize, c: usize| g.at(r, c);
    [
        2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1)),
        2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2)
            + z * g(2, 0)
            + w * g(2, 1)
            - 2.0 * x * g(2, 2)),
        2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2)
            - w * g(2, 0)
            + z * g(2, 1)
            - 2.0 * y * g(2, 2)),
        2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1)
            + y * g(1, 2)
            + x * g(2, 0)
            + y * g(2, 1)),
    ]
}
