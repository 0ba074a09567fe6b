//! Tensor-level reverse-mode differentiation.
//!
//! Every primitive appends a node holding its output and the ids of its
//! inputs. [`Tape::backward`] walks the nodes in reverse and accumulates
//! vector-Jacobian products. Node values are computed by the same kernels
//! that [`Tape::replay`] uses, so a replay reproduces them bit for bit.

use std::sync::Arc;

use super::mask::SparseMask;
use super::rope::RopeTable;
use super::tensor::{gemm, Mat, Tensor};

pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnfoldSpec {
    pub batch: usize,
    pub len: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl UnfoldSpec {
    pub fn out_len(&self) -> usize {
        (self.len + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadLayout {
    pub batch: usize,
    pub seq: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    AddBias { x: Var, bias: Var },
    Add { a: Var, b: Var },
    Relu { x: Var },
    /// Sliding-window gather (im2col) over a `[batch * len, channels]` input.
    Unfold { x: Var, spec: UnfoldSpec },
    LayerNorm { x: Var, gamma: Var, beta: Var },
    /// Per-column normalization; `running = None` uses batch statistics.
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<Arc<(Vec<f64>, Vec<f64>)>>,
    },
    Rope { x: Var, heads: usize, table: Arc<RopeTable> },
    AttnScores { q: Var, k: Var, layout: HeadLayout, scale: f64 },
    MaskedSoftmax { x: Var, mask: Arc<SparseMask> },
    AttnMix { p: Var, v: Var, layout: HeadLayout },
    Reshape { x: Var, shape: Vec<usize> },
    CrossEntropy { logits: Var, labels: Arc<Vec<usize>> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient of `v`, zeros if nothing flowed into it.
    pub fn get_or_zero(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map_or_else(|| vec![0.0; len], <[f64]>::to_vec)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.value)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Var {
        let nodes = &self.nodes;
        let value = eval(&op, &|v| &nodes[v.0].value);
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::MatMul { a, b })
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        self.push(Op::AddBias { x, bias })
    }

    /// `x * w + bias`.
    pub fn linear(&mut self, x: Var, w: Var, bias: Var) -> Var {
        let y = self.matmul(x, w);
        self.add_bias(y, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Add { a, b })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.push(Op::Relu { x })
    }

    pub fn unfold(&mut self, x: Var, spec: UnfoldSpec) -> Var {
        self.push(Op::Unfold { x, spec })
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        self.push(Op::LayerNorm { x, gamma, beta })
    }

    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<Arc<(Vec<f64>, Vec<f64>)>>,
    ) -> Var {
        self.push(Op::BatchNorm {
            x,
            gamma,
            beta,
            running,
        })
    }

    pub fn rope(&mut self, x: Var, heads: usize, table: Arc<RopeTable>) -> Var {
        self.push(Op::Rope { x, heads, table })
    }

    pub fn attn_scores(&mut self, q: Var, k: Var, layout: HeadLayout, scale: f64) -> Var {
        self.push(Op::AttnScores {
            q,
            k,
            layout,
            scale,
        })
    }

    pub fn masked_softmax(&mut self, x: Var, mask: Arc<SparseMask>) -> Var {
        self.push(Op::MaskedSoftmax { x, mask })
    }

    pub fn attn_mix(&mut self, p: Var, v: Var, layout: HeadLayout) -> Var {
        self.push(Op::AttnMix { p, v, layout })
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        self.push(Op::Reshape { x, shape })
    }

    /// Mean cross-entropy of `logits` (`[batch, classes]`) against `labels`.
    pub fn cross_entropy(&mut self, logits: Var, labels: Arc<Vec<usize>>) -> Var {
        self.push(Op::CrossEntropy { logits, labels })
    }

    /// Recomputes every node from the leaves.
    pub fn replay(&self) -> Vec<Tensor> {
        let mut vals: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let t = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => eval(op, &|v| &vals[v.0]),
            };
            vals.push(t);
        }
        vals
    }

    /// Backpropagates `seed` (the gradient of some scalar with respect to
    /// `root`) through the tape.
    pub fn backward(&self, root: Var, seed: Vec<f64>) -> Grads {
        assert_eq!(seed.len(), self.value(root).len(), "seed length");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.node_backward(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Grads { grads }
    }

    fn node_backward(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = &self.nodes[i].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                acc(*a, &mut |da| {
                    gemm(m, n, k, 1.0, Mat::rows(g, 0, n), Mat::transposed(&bv.data, 0, n), 1.0, da, 0, k)
                });
                acc(*b, &mut |db| {
                    gemm(k, m, n, 1.0, Mat::transposed(&av.data, 0, k), Mat::rows(g, 0, n), 1.0, db, 0, n)
                });
            }
            Op::AddBias { x, bias } => {
                let n = val(*bias).len();
                acc(*x, &mut |dx| add_into(dx, g));
                acc(*bias, &mut |db| {
                    for row in g.chunks_exact(n) {
                        add_into(db, row);
                    }
                });
            }
            Op::Add { a, b } => {
                acc(*a, &mut |da| add_into(da, g));
                acc(*b, &mut |db| add_into(db, g));
            }
            Op::Relu { x } => {
                let xv = &val(*x).data;
                acc(*x, &mut |dx| {
                    for ((d, &gi), &xi) in dx.iter_mut().zip(g).zip(xv) {
                        if xi > 0.0 {
                            *d += gi;
                        }
                    }
                });
            }
            Op::Unfold { x, spec } => acc(*x, &mut |dx| unfold_backward(spec, g, dx)),
            Op::LayerNorm { x, gamma, beta } => {
                let (xv, gv) = (val(*x), &val(*gamma).data);
                let n = xv.cols();
                let mut dgamma = vec![0.0; n];
                let mut dbeta = vec![0.0; n];
                let mut dx_all = vec![0.0; xv.len()];
                for (r, (xr, gr)) in xv.data.chunks_exact(n).zip(g.chunks_exact(n)).enumerate() {
                    let (mean, rstd) = row_stats(xr);
                    let mut sum_d = 0.0;
                    let mut sum_dx = 0.0;
                    for j in 0..n {
                        let xhat = (xr[j] - mean) * rstd;
                        dgamma[j] += gr[j] * xhat;
                        dbeta[j] += gr[j];
                        let d = gr[j] * gv[j];
                        sum_d += d;
                        sum_dx += d * xhat;
                    }
                    let (md, mdx) = (sum_d / n as f64, sum_dx / n as f64);
                    let dx = &mut dx_all[r * n..(r + 1) * n];
                    for j in 0..n {
                        let xhat = (xr[j] - mean) * rstd;
                        dx[j] = rstd * (gr[j] * gv[j] - md - xhat * mdx);
                    }
                }
                acc(*x, &mut |d| add_into(d, &dx_all));
                acc(*gamma, &mut |d| add_into(d, &dgamma));
                acc(*beta, &mut |d| add_into(d, &dbeta));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                running,
            } => {
                let (xv, gv) = (val(*x), &val(*gamma).data);
                let (rows, c) = (xv.rows(), xv.cols());
                let (mean, var) = match running {
                    Some(stats) => (stats.0.clone(), stats.1.clone()),
                    None => column_stats(xv),
                };
                let rstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                let mut sum_d = vec![0.0; c];
                let mut sum_dx = vec![0.0; c];
                for r in 0..rows {
                    for j in 0..c {
                        let idx = r * c + j;
                        let xhat = (xv.data[idx] - mean[j]) * rstd[j];
                        dgamma[j] += g[idx] * xhat;
                        dbeta[j] += g[idx];
                        let d = g[idx] * gv[j];
                        sum_d[j] += d;
                        sum_dx[j] += d * xhat;
                    }
                }
                let batch_stats = running.is_none();
                let nf = rows as f64;
                acc(*x, &mut |dx| {
                    for r in 0..rows {
                        for j in 0..c {
                            let idx = r * c + j;
                            let d = g[idx] * gv[j];
                            dx[idx] += if batch_stats {
                                let xhat = (xv.data[idx] - mean[j]) * rstd[j];
                                rstd[j] * (d - sum_d[j] / nf - xhat * sum_dx[j] / nf)
                            } else {
                                rstd[j] * d
                            };
                        }
                    }
                });
                acc(*gamma, &mut |d| add_into(d, &dgamma));
                acc(*beta, &mut |d| add_into(d, &dbeta));
            }
            Op::Rope { x, heads, table } => {
                let d = val(*x).cols();
                acc(*x, &mut |dx| rope_apply(table, *heads, d, g, dx, true));
            }
            Op::AttnScores {
                q,
                k,
                layout,
                scale,
            } => {
                let (qv, kv) = (&val(*q).data, &val(*k).data);
                let d = val(*q).cols();
                let dh = d / layout.heads;
                let t = layout.seq;
                acc(*q, &mut |dq| {
                    for_heads(layout, |b, h| {
                        let s_off = (b * layout.heads + h) * t * t;
                        let x_off = b * t * d + h * dh;
                        gemm(t, t, dh, *scale, Mat::rows(g, s_off, t), Mat::rows(kv, x_off, d), 1.0, dq, x_off, d);
                    })
                });
                acc(*k, &mut |dk| {
                    for_heads(layout, |b, h| {
                        let s_off = (b * layout.heads + h) * t * t;
                        let x_off = b * t * d + h * dh;
                        gemm(t, t, dh, *scale, Mat::transposed(g, s_off, t), Mat::rows(qv, x_off, d), 1.0, dk, x_off, d);
                    })
                });
            }
            Op::MaskedSoftmax { x, .. } => {
                let t = out.cols();
                acc(*x, &mut |dx| {
                    for ((p, gr), d) in out
                        .data
                        .chunks_exact(t)
                        .zip(g.chunks_exact(t))
                        .zip(dx.chunks_exact_mut(t))
                    {
                        let dot: f64 = p.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..t {
                            d[j] += p[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::AttnMix { p, v, layout } => {
                let (pv, vv) = (&val(*p).data, &val(*v).data);
                let d = val(*v).cols();
                let dh = d / layout.heads;
                let t = layout.seq;
                acc(*p, &mut |dp| {
                    for_heads(layout, |b, h| {
                        let s_off = (b * layout.heads + h) * t * t;
                        let x_off = b * t * d + h * dh;
                        gemm(t, dh, t, 1.0, Mat::rows(g, x_off, d), Mat::transposed(vv, x_off, d), 1.0, dp, s_off, t);
                    })
                });
                acc(*v, &mut |dv| {
                    for_heads(layout, |b, h| {
                        let s_off = (b * layout.heads + h) * t * t;
                        let x_off = b * t * d + h * dh;
                        gemm(t, t, dh, 1.0, Mat::transposed(pv, s_off, t), Mat::rows(g, x_off, d), 1.0, dv, x_off, d);
                    })
                });
            }
            Op::Reshape { x, .. } => acc(*x, &mut |dx| add_into(dx, g)),
            Op::CrossEntropy { logits, labels } => {
                let z = val(*logits);
                let k = z.cols();
                let scale = g[0] / labels.len() as f64;
                acc(*logits, &mut |dz| {
                    for (r, &y) in labels.iter().enumerate() {
                        let p = softmax(z.row(r));
                        for j in 0..k {
                            let target = if j == y { 1.0 } else { 0.0 };
                            dz[r * k + j] += scale * (p[j] - target);
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn for_heads(layout: &HeadLayout, mut f: impl FnMut(usize, usize)) {
    for b in 0..layout.batch {
        for h in 0..layout.heads {
            f(b, h);
        }
    }
}

/// Mean and `1 / sqrt(var + eps)` of one row (population variance).
fn row_stats(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + NORM_EPS).sqrt())
}

/// Per-column mean and population variance of a `[rows, cols]` tensor.
pub fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (rows, c) = (x.rows(), x.cols());
    let mut mean = vec![0.0; c];
    for row in x.data.chunks_exact(c) {
        add_into(&mut mean, row);
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; c];
    for row in x.data.chunks_exact(c) {
        for j in 0..c {
            var[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
        }
    }
    var.iter_mut().for_each(|v| *v /= rows as f64);
    (mean, var)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn unfold_backward(spec: &UnfoldSpec, g: &[f64], dx: &mut [f64]) {
    let out_len = spec.out_len();
    let c = spec.channels;
    let width = spec.kernel * c;
    for b in 0..spec.batch {
        for o in 0..out_len {
            let grow = &g[(b * out_len + o) * width..(b * out_len + o + 1) * width];
            for kk in 0..spec.kernel {
                let pos = (o * spec.stride + kk) as isize - spec.pad as isize;
                if pos < 0 || pos as usize >= spec.len {
                    continue;
                }
                let base = (b * spec.len + pos as usize) * c;
                add_into(&mut dx[base..base + c], &grow[kk * c..(kk + 1) * c]);
            }
        }
    }
}

/// Rotates (or, with `inverse`, un-rotates) dimension pairs of `src` and
/// accumulates the result into `dst`.
fn rope_apply(table: &RopeTable, heads: usize, d: usize, src: &[f64], dst: &mut [f64], inverse: bool) {
    let dh = d / heads;
    let half = dh / 2;
    let sign = if inverse { -1.0 } else { 1.0 };
    for (r, (s, o)) in src.chunks_exact(d).zip(dst.chunks_exact_mut(d)).enumerate() {
        let pos = r % table.positions();
        for h in 0..heads {
            for p in 0..half {
                let (cos, sin) = table.get(pos, p);
                let sin = sign * sin;
                let i0 = h * dh + 2 * p;
                let (x0, x1) = (s[i0], s[i0 + 1]);
                o[i0] += x0 * cos - x1 * sin;
                o[i0 + 1] += x0 * sin + x1 * cos;
            }
        }
    }
}

fn eval<'a>(op: &Op, get: &dyn Fn(Var) -> &'a Tensor) -> Tensor {
    match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::MatMul { a, b } => {
            let (av, bv) = (get(*a), get(*b));
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            assert_eq!(k, bv.rows(), "matmul inner dimensions");
            let mut out = vec![0.0; m * n];
            gemm(m, k, n, 1.0, Mat::rows(&av.data, 0, k), Mat::rows(&bv.data, 0, n), 0.0, &mut out, 0, n);
            Tensor::new(vec![m, n], out)
        }
        Op::AddBias { x, bias } => {
            let (xv, bv) = (get(*x), get(*bias));
            assert_eq!(xv.cols(), bv.len(), "bias width");
            let mut out = xv.clone();
            for row in out.data.chunks_exact_mut(bv.len()) {
                add_into(row, &bv.data);
            }
            out
        }
        Op::Add { a, b } => {
            let (av, bv) = (get(*a), get(*b));
            assert_eq!(av.shape, bv.shape, "add shapes");
            let mut out = av.clone();
            add_into(&mut out.data, &bv.data);
            out
        }
        Op::Relu { x } => {
            let mut out = get(*x).clone();
            out.data.iter_mut().for_each(|v| *v = v.max(0.0));
            out
        }
        Op::Unfold { x, spec } => {
            let xv = get(*x);
            assert_eq!(xv.len(), spec.batch * spec.len * spec.channels, "unfold input");
            let out_len = spec.out_len();
            let c = spec.channels;
            let width = spec.kernel * c;
            let mut out = vec![0.0; spec.batch * out_len * width];
            for b in 0..spec.batch {
                for o in 0..out_len {
                    let orow = &mut out[(b * out_len + o) * width..(b * out_len + o + 1) * width];
                    for kk in 0..spec.kernel {
                        let pos = (o * spec.stride + kk) as isize - spec.pad as isize;
                        if pos < 0 || pos as usize >= spec.len {
                            continue;
                        }
                        let base = (b * spec.len + pos as usize) * c;
                        orow[kk * c..(kk + 1) * c].copy_from_slice(&xv.data[base..base + c]);
                    }
                }
            }
            Tensor::new(vec![spec.batch * out_len, width], out)
        }
        Op::LayerNorm { x, gamma, beta } => {
            let (xv, gv, bv) = (get(*x), &get(*gamma).data, &get(*beta).data);
            let n = xv.cols();
            let mut out = xv.clone();
            for row in out.data.chunks_exact_mut(n) {
                let (mean, rstd) = row_stats(row);
                for j in 0..n {
                    row[j] = (row[j] - mean) * rstd * gv[j] + bv[j];
                }
            }
            out
        }
        Op::BatchNorm {
            x,
            gamma,
            beta,
            running,
        } => {
            let (xv, gv, bv) = (get(*x), &get(*gamma).data, &get(*beta).data);
            let (mean, var) = match running {
                Some(stats) => (stats.0.clone(), stats.1.clone()),
                None => column_stats(xv),
            };
            let c = xv.cols();
            let rstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
            let mut out = xv.clone();
            for row in out.data.chunks_exact_mut(c) {
                for j in 0..c {
                    row[j] = (row[j] - mean[j]) * rstd[j] * gv[j] + bv[j];
                }
            }
            out
        }
        Op::Rope { x, heads, table } => {
            let xv = get(*x);
            let mut out = Tensor::zeros(xv.shape.clone());
            rope_apply(table, *heads, xv.cols(), &xv.data, &mut out.data, false);
            out
        }
        Op::AttnScores {
            q,
            k,
            layout,
            scale,
        } => {
            let (qv, kv) = (get(*q), get(*k));
            let d = qv.cols();
            let dh = d / layout.heads;
            let t = layout.seq;
            assert_eq!(qv.rows(), layout.batch * t, "attention rows");
            let mut out = vec![0.0; layout.batch * layout.heads * t * t];
            for_heads(layout, |b, h| {
                let s_off = (b * layout.heads + h) * t * t;
                let x_off = b * t * d + h * dh;
                gemm(t, dh, t, *scale, Mat::rows(&qv.data, x_off, d), Mat::transposed(&kv.data, x_off, d), 0.0, &mut out, s_off, t);
            });
            Tensor::new(vec![layout.batch * layout.heads * t, t], out)
        }
        Op::MaskedSoftmax { x, mask } => {
            let xv = get(*x);
            let t = mask.tokens();
            assert_eq!(xv.cols(), t, "mask width");
            let mut out = vec![0.0; xv.len()];
            for (r, (src, dst)) in xv.data.chunks_exact(t).zip(out.chunks_exact_mut(t)).enumerate() {
                let allowed = mask.row(r % t);
                let max = src
                    .iter()
                    .zip(allowed)
                    .filter(|(_, &a)| a)
                    .fold(f64::NEG_INFINITY, |m, (&v, _)| m.max(v));
                let mut sum = 0.0;
                for j in 0..t {
                    if allowed[j] {
                        dst[j] = (src[j] - max).exp();
                        sum += dst[j];
                    }
                }
                for v in dst.iter_mut() {
                    *v /= sum;
                }
            }
            Tensor::new(xv.shape.clone(), out)
        }
        Op::AttnMix { p, v, layout } => {
            let (pv, vv) = (get(*p), get(*v));
            let d = vv.cols();
            let dh = d / layout.heads;
            let t = layout.seq;
            let mut out = vec![0.0; vv.len()];
            for_heads(layout, |b, h| {
                let s_off = (b * layout.heads + h) * t * t;
                let x_off = b * t * d + h * dh;
                gemm(t, t, dh, 1.0, Mat::rows(&pv.data, s_off, t), Mat::rows(&vv.data, x_off, d), 0.0, &mut out, x_off, d);
            });
            Tensor::new(vv.shape.clone(), out)
        }
        Op::Reshape { x, shape } => Tensor::new(shape.clone(), get(*x).data.clone()),
        Op::CrossEntropy { logits, labels } => {
            let z = get(*logits);
            assert_eq!(z.rows(), labels.len(), "one label per row");
            let total: f64 = labels
                .iter()
                .enumerate()
                .map(|(r, &y)| {
                    let row = z.row(r);
                    let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    lse - row[y]
                })
                .sum();
            Tensor::new(vec![1], vec![total / labels.len() as f64])
        }
    }
}
