//! Minimal reverse-mode tape over [`Tensor`] values.

use super::tensor::Tensor;
use crate::depfn::{dependency_matrix, dependency_matrix_grad, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    /// `a` (n×c) plus a broadcast row `b` (1×c)
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// `a` times a 1×1 node
    ScaleBy(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    /// Output row `i` is input row `i + offset`, zero outside the range.
    Shift(Var, isize),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Dropout(Var, Vec<f64>),
    /// Distances (n−1)×1, heights n×1, raw temperatures 1×2.
    DepMatrix {
        d: Var,
        h: Var,
        temps: Var,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<(usize, usize)>,
        denom: f64,
        probs: Tensor,
    },
    Sum(Vec<Var>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A computation recorded in evaluation order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows, 1, "add_row expects a row vector");
        assert_eq!(bias.cols, self.value(a).cols, "add_row width mismatch");
        let mut v = self.value(a).clone();
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "mul shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let v = Tensor::from_vec(x.rows, x.cols, data);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(
            self.value(s).shape(),
            (1, 1),
            "scale_by expects a 1x1 factor"
        );
        let k = self.value(s).data[0];
        let v = self.value(a).map(|x| x * k);
        self.push(v, Op::ScaleBy(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for r in 0..v.rows {
            let row = v.row_mut(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (n, c) = xv.shape();
        let mut xhat = Tensor::zeros(n, c);
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = xhat.clone();
        for r in 0..n {
            for (k, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = *o * g.data[k] + b.data[k];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut v = Tensor::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            v.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(
            v,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn shift(&mut self, a: Var, offset: isize) -> Var {
        let x = self.value(a);
        let mut v = Tensor::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let src = r as isize + offset;
            if src >= 0 && (src as usize) < x.rows {
                v.row_mut(r).copy_from_slice(x.row(src as usize));
            }
        }
        self.push(v, Op::Shift(a, offset))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut v = Tensor::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let x = self.value(*p);
            assert_eq!(x.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                v.row_mut(r)[off..off + x.cols].copy_from_slice(x.row(r));
            }
            off += x.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let x = self.value(a);
        let mut v = Tensor::zeros(x.rows, width);
        for r in 0..x.rows {
            v.row_mut(r)
                .copy_from_slice(&x.row(r)[start..start + width]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Var {
        let x = self.value(a);
        let v = Tensor::from_vec(
            count,
            x.cols,
            x.data[start * x.cols..(start + count) * x.cols].to_vec(),
        );
        self.push(v, Op::SliceRows(a, start))
    }

    /// Multiplies by a precomputed (already rescaled) keep mask.
    pub fn dropout(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let x = self.value(a);
        assert_eq!(mask.len(), x.len(), "dropout mask size");
        let data = x.data.iter().zip(&mask).map(|(p, q)| p * q).collect();
        let v = Tensor::from_vec(x.rows, x.cols, data);
        self.push(v, Op::Dropout(a, mask))
    }

    pub fn dep_matrix(&mut self, d: Var, h: Var, temps: Var) -> Var {
        let (mu1, mu2) = {
            let t = self.value(temps);
            (t.data[0].exp(), t.data[1].exp())
        };
        let hv = &self.value(h).data;
        let n = hv.len();
        let m = dependency_matrix(&self.value(d).data, hv, mu1, mu2)
            .expect("parser produces finite, consistent profiles");
        let v = Tensor::from_vec(n, n, m.into_vec());
        self.push(v, Op::DepMatrix { d, h, temps })
    }

    /// `Σ_{(r, t)} −log softmax(logits_r)_t / denom`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[(usize, usize)], denom: f64) -> Var {
        let x = self.value(logits);
        let mut probs = Tensor::zeros(x.rows, x.cols);
        let mut lse = vec![0.0; x.rows];
        for r in 0..x.rows {
            let row = x.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            lse[r] = m + z.ln();
            for (p, v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse[r]).exp();
            }
        }
        let total: f64 = targets.iter().map(|&(r, t)| lse[r] - x.get(r, t)).sum();
        self.push(
            Tensor::scalar(total / denom),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                denom,
                probs,
            },
        )
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.value(parts[0]).clone();
        for p in &parts[1..] {
            v.add_assign(self.value(*p));
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    /// Gradients of the 1×1 node `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.value(root).shape(),
            (1, 1),
            "backward needs a scalar root"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(e) => e.add_assign(&t),
            slot => *slot = Some(t),
        };
        match &node.op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_t(self.value(*b)));
                acc(*b, self.value(*a).t_matmul(g));
            }
            Op::MatMulT(a, b) => {
                acc(*a, g.matmul(self.value(*b)));
                acc(*b, g.t_matmul(self.value(*a)));
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, b) => {
                let mut gb = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (s, v) in gb.data.iter_mut().zip(g.row(r)) {
                        *s += v;
                    }
                }
                acc(*a, g.clone());
                acc(*b, gb);
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let ga = g.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
                let gb = g.data.iter().zip(&x.data).map(|(p, q)| p * q).collect();
                acc(*a, Tensor::from_vec(g.rows, g.cols, ga));
                acc(*b, Tensor::from_vec(g.rows, g.cols, gb));
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * s)),
            Op::ScaleBy(a, s) => {
                let k = self.value(*s).data[0];
                let x = self.value(*a);
                let gs: f64 = g.data.iter().zip(&x.data).map(|(p, q)| p * q).sum();
                acc(*a, g.map(|v| v * k));
                acc(*s, Tensor::scalar(gs));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let d = g
                    .data
                    .iter()
                    .zip(&y.data)
                    .map(|(p, t)| p * (1.0 - t * t))
                    .collect();
                acc(*a, Tensor::from_vec(g.rows, g.cols, d));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let d = g
                    .data
                    .iter()
                    .zip(&y.data)
                    .map(|(p, s)| p * s * (1.0 - s))
                    .collect();
                acc(*a, Tensor::from_vec(g.rows, g.cols, d));
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                let d = g
                    .data
                    .iter()
                    .zip(&x.data)
                    .map(|(p, v)| p * gelu_grad(*v))
                    .collect();
                acc(*a, Tensor::from_vec(g.rows, g.cols, d));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut d = Tensor::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (k, o) in d.row_mut(r).iter_mut().enumerate() {
                        *o = yr[k] * (gr[k] - dot);
                    }
                }
                acc(*a, d);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain);
                let (n, c) = xhat.shape();
                let mut gg = Tensor::zeros(1, c);
                let mut gbias = Tensor::zeros(1, c);
                let mut gx = Tensor::zeros(n, c);
                for r in 0..n {
                    let (gr, xr) = (g.row(r), xhat.row(r));
                    let mut dy = vec![0.0; c];
                    for k in 0..c {
                        gg.data[k] += gr[k] * xr[k];
                        gbias.data[k] += gr[k];
                        dy[k] = gr[k] * gv.data[k];
                    }
                    let mean_dy = dy.iter().sum::<f64>() / c as f64;
                    let mean_dyx = dy.iter().zip(xr).map(|(p, q)| p * q).sum::<f64>() / c as f64;
                    for (k, o) in gx.row_mut(r).iter_mut().enumerate() {
                        *o = inv_std[r] * (dy[k] - mean_dy - xr[k] * mean_dyx);
                    }
                }
                acc(*x, gx);
                acc(*gain, gg);
                acc(*bias, gbias);
            }
            Op::Gather { table, ids } => {
                let t = self.value(*table);
                let mut gt = Tensor::zeros(t.rows, t.cols);
                for (r, &id) in ids.iter().enumerate() {
                    for (o, v) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                acc(*table, gt);
            }
            Op::Shift(a, offset) => {
                let mut d = Tensor::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let src = r as isize + offset;
                    if src >= 0 && (src as usize) < g.rows {
                        d.row_mut(src as usize).copy_from_slice(g.row(r));
                    }
                }
                acc(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.value(*p).cols;
                    let mut d = Tensor::zeros(g.rows, w);
                    for r in 0..g.rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                    }
                    acc(*p, d);
                    off += w;
                }
            }
            Op::SliceCols(a, start) => {
                let x = self.value(*a);
                let mut d = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                acc(*a, d);
            }
            Op::SliceRows(a, start) => {
                let x = self.value(*a);
                let mut d = Tensor::zeros(x.rows, x.cols);
                d.data[start * x.cols..(start + g.rows) * x.cols].copy_from_slice(&g.data);
                acc(*a, d);
            }
            Op::Dropout(a, mask) => {
                let d = g.data.iter().zip(mask).map(|(p, q)| p * q).collect();
                acc(*a, Tensor::from_vec(g.rows, g.cols, d));
            }
            Op::DepMatrix { d, h, temps } => {
                let t = self.value(*temps);
                let (mu1, mu2) = (t.data[0].exp(), t.data[1].exp());
                let (dv, hv) = (self.value(*d), self.value(*h));
                let gr = dependency_matrix_grad(&dv.data, &hv.data, mu1, mu2, &g.data)
                    .expect("values were valid on the forward pass");
                acc(*d, Tensor::from_vec(dv.rows, dv.cols, gr.distances));
                acc(*h, Tensor::from_vec(hv.rows, hv.cols, gr.heights));
                // chain through mu = exp(raw)
                acc(
                    *temps,
                    Tensor::from_vec(1, 2, vec![gr.mu1 * mu1, gr.mu2 * mu2]),
                );
            }
            Op::CrossEntropy {
                logits,
                targets,
                denom,
                probs,
            } => {
                let s = g.data[0] / denom;
                let mut d = Tensor::zeros(probs.rows, probs.cols);
                let mut seen = vec![0usize; probs.rows];
                for &(r, t) in targets {
                    seen[r] += 1;
                    d.data[r * probs.cols + t] -= s;
                }
                for (r, &count) in seen.iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    let c = s * count as f64;
                    for (o, p) in d.row_mut(r).iter_mut().zip(probs.row(r)) {
                        *o += c * p;
                    }
                }
                acc(*logits, d);
            }
            Op::Sum(parts) => {
                for p in parts {
                    acc(*p, g.clone());
                }
            }
        }
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of `v`, or zeros shaped like `like` when `v` did not influence the root.
    pub fn get(&self, v: Var, like: &Tensor) -> Tensor {
        match &self.grads[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(like.rows, like.cols),
        }
    }

    pub fn try_get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Graph, Var) -> Var, x: Tensor) {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let out = build(&mut g, xv);
        let grad = g.backward(out).get(xv, &x);
        let eps = 1e-6;
        for k in 0..x.len() {
            let eval = |delta: f64| {
                let mut y = x.clone();
                y.data[k] += delta;
                let mut g = Graph::new();
                let yv = g.input(y);
                let o = build(&mut g, yv);
                g.value(o).data[0]
            };
            let num = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let err = (num - grad.data[k]).abs() / num.abs().max(grad.data[k].abs()).max(1e-6);
            assert!(err < 1e-6, "coordinate {k}: {num} vs {}", grad.data[k]);
        }
    }

    fn reduce(g: &mut Graph, v: Var) -> Var {
        // weighted sum to a scalar through a fixed matrix product
        let t = g.value(v).clone();
        let w = Tensor::from_vec(
            t.rows,
            t.cols,
            (0..t.len()).map(|k| ((k as f64) * 0.7).sin()).collect(),
        );
        let wv = g.input(w);
        let prod = g.mul(v, wv);
        let ones_r = g.input(Tensor::filled(1, t.rows, 1.0));
        let ones_c = g.input(Tensor::filled(t.cols, 1, 1.0));
        let s = g.matmul(ones_r, prod);
        g.matmul(s, ones_c)
    }

    fn sample(rows: usize, cols: usize, seed: f64) -> Tensor {
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|k| ((k as f64 + seed) * 1.3).sin())
                .collect(),
        )
    }

    #[test]
    fn elementwise_and_structural_ops() {
        let x = sample(3, 4, 0.1);
        fd_check(
            |g, v| {
                let y = g.tanh(v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.sigmoid(v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.gelu(v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.softmax_rows(v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.transpose(v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.shift(v, 1);
                let z = g.shift(v, -2);
                let s = g.add(y, z);
                reduce(g, s)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let a = g.slice_cols(v, 1, 2);
                let b = g.slice_rows(v, 1, 2);
                let c = g.concat_cols(&[v, v]);
                let ra = reduce(g, a);
                let rb = reduce(g, b);
                let rc = reduce(g, c);
                g.sum(&[ra, rb, rc])
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let y = g.mul(v, v);
                let z = g.scale(y, 0.3);
                reduce(g, z)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let w = g.matmul_t(v, v);
                let y = g.matmul(w, v);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let s = g.slice_rows(v, 0, 1);
                let s = g.slice_cols(s, 0, 1);
                let y = g.scale_by(v, s);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let b = g.slice_rows(v, 2, 1);
                let y = g.add_row(v, b);
                reduce(g, y)
            },
            x.clone(),
        );
    }

    #[test]
    fn layer_norm_and_gather() {
        let x = sample(3, 5, 0.4);
        fd_check(
            |g, v| {
                let gain = g.input(sample(1, 5, 2.0));
                let bias = g.input(sample(1, 5, 3.0));
                let y = g.layer_norm(v, gain, bias);
                reduce(g, y)
            },
            x.clone(),
        );
        fd_check(
            |g, v| {
                let xv = g.input(sample(3, 5, 0.4));
                let bias = g.input(sample(1, 5, 3.0));
                let y = g.layer_norm(xv, v, bias);
                reduce(g, y)
            },
            sample(1, 5, 2.0),
        );
        fd_check(
            |g, v| {
                let y = g.gather(v, &[2, 0, 2, 1]);
                reduce(g, y)
            },
            x,
        );
    }

    #[test]
    fn cross_entropy_gradient() {
        let x = sample(3, 6, 0.9);
        fd_check(|g, v| g.cross_entropy(v, &[(0, 2), (2, 5), (2, 1)], 3.0), x);
    }

    #[test]
    fn dep_matrix_gradient_through_temperatures() {
        let t = Tensor::from_vec(1, 2, vec![0.2, -0.3]);
        fd_check(
            |g, v| {
                let d = g.input(sample(3, 1, 1.0));
                let h = g.input(sample(4, 1, 2.0));
                let m = g.dep_matrix(d, h, v);
                reduce(g, m)
            },
            t,
        );
    }
}
