use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::{Error, Result};

/// Probabilities are floored at this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Weighted message `src -> dst` for [`Tape::weighted_neighbor_sum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Option<Var> },
    Relu(Var),
    Concat(Var, Var),
    NeighborSum { x: Var, edges: Vec<NeighborEdge> },
    Softmax(Var),
    CrossEntropy { probs: Var, labels: Vec<usize>, weights: Vec<f64>, total: f64 },
    Add(Var, Var),
    Sub(Var, Var),
    Sum(Var),
    Dot(Var, Tensor),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward pass. Nodes are appended in execution order, so
/// the record is topologically sorted by construction.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients from one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients(Vec<Option<Tensor>>);

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.0.get_mut(v.0).and_then(Option::take)
    }
}

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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// `x * w + b`, with `b` a single row broadcast over all rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let mut out = self.value(x).matmul(self.value(w)).map_err(|_| Error::Shape {
            op: "linear",
            left: self.shape(x),
            right: self.shape(w),
        })?;
        if let Some(b) = b {
            let bias = self.value(b);
            if bias.shape() != (1, out.cols()) {
                return Err(Error::Shape {
                    op: "linear bias",
                    left: out.shape(),
                    right: bias.shape(),
                });
            }
            for r in 0..out.rows() {
                for (o, bv) in out.row_mut(r).iter_mut().zip(bias.data()) {
                    *o += bv;
                }
            }
        }
        let mut inputs = vec![x, w];
        inputs.extend(b);
        let rg = self.grad_of(&inputs);
        Ok(self.push(out, Op::Linear { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let rg = self.grad_of(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    /// Column-wise `[a | b]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(Error::Shape {
                op: "concat_cols",
                left: ta.shape(),
                right: tb.shape(),
            });
        }
        let (p, q) = (ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(ta.rows() * (p + q));
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let out = Tensor::from_vec(ta.rows(), p + q, data)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Concat(a, b), rg))
    }

    /// `out[v] = sum over edges w -> v of weight * x[w]`.
    pub fn weighted_neighbor_sum(&mut self, x: Var, edges: &[NeighborEdge]) -> Result<Var> {
        let xv = self.value(x);
        let n = xv.rows();
        let mut out = Tensor::zeros(n, xv.cols());
        for e in edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Graph(format!(
                    "edge {} -> {} out of range for {n} nodes",
                    e.src, e.dst
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::Graph(format!("non-finite weight on edge {} -> {}", e.src, e.dst)));
            }
            let src = xv.row(e.src).to_vec();
            for (o, s) in out.row_mut(e.dst).iter_mut().zip(&src) {
                *o += e.weight * s;
            }
        }
        let rg = self.grad_of(&[x]);
        Ok(self.push(
            out,
            Op::NeighborSum {
                x,
                edges: edges.to_vec(),
            },
            rg,
        ))
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = xv.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        let rg = self.grad_of(&[x]);
        self.push(out, Op::Softmax(x), rg)
    }

    /// Weighted mean of `-ln p[i, label_i]`. When `probs` comes straight
    /// from [`Tape::softmax_rows`] the gradient is sent to the logits as
    /// `p - onehot`.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
        let pv = self.value(probs);
        let (n, c) = pv.shape();
        if labels.len() != n || weights.len() != n {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: (n, c),
                right: (labels.len(), weights.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Data(format!("label {bad} out of range for {c} classes")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Data("sample weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Data("sample weights sum to zero".into()));
        }
        let loss = labels
            .iter()
            .zip(weights)
            .enumerate()
            .filter(|(_, (_, &w))| w > 0.0)
            .map(|(i, (&l, &w))| -w * pv.get(i, l).max(PROB_FLOOR).ln())
            .sum::<f64>()
            / total;
        let rg = self.grad_of(&[probs]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
                total,
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.elementwise("add", a, b, |x, y| x + y)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.elementwise("sub", a, b, |x, y| x - y)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    fn elementwise(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op,
                left: ta.shape(),
                right: tb.shape(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::from_vec(ta.rows(), ta.cols(), data)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.grad_of(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    /// `sum(x .* coeffs)`, a fixed linear functional of `x`.
    pub fn dot(&mut self, x: Var, coeffs: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != coeffs.shape() {
            return Err(Error::Shape {
                op: "dot",
                left: xv.shape(),
                right: coeffs.shape(),
            });
        }
        let v = xv.data().iter().zip(coeffs.data()).map(|(a, b)| a * b).sum();
        let rg = self.grad_of(&[x]);
        Ok(self.push(Tensor::scalar(v), Op::Dot(x, coeffs.clone()), rg))
    }

    /// Gradients of the scalar `output` with respect to every recorded
    /// value that requires one. A tape supports a single backward pass.
    pub fn backward(&mut self, output: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let shape = self.shape(output);
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: shape,
                right: (1, 1),
            });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = Some(g);
                continue;
            }
            let send = |grads: &mut Vec<Option<Tensor>>, to: Var, delta: Tensor| {
                if !self.nodes[to.0].requires_grad {
                    return;
                }
                match &mut grads[to.0] {
                    Some(acc) => acc.add_assign(&delta),
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    if self.nodes[w.0].requires_grad {
                        send(&mut grads, *w, xv.t_matmul(&g));
                    }
                    if self.nodes[x.0].requires_grad {
                        send(&mut grads, *x, g.matmul_t(wv));
                    }
                    if let Some(b) = b {
                        let mut db = Tensor::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                        send(&mut grads, *b, db);
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let mut dx = g.clone();
                    for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if *v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    send(&mut grads, *x, dx);
                }
                Op::Concat(a, b) => {
                    let p = self.value(*a).cols();
                    let q = g.cols() - p;
                    let mut da = Tensor::zeros(g.rows(), p);
                    let mut db = Tensor::zeros(g.rows(), q);
                    for r in 0..g.rows() {
                        da.row_mut(r).copy_from_slice(&g.row(r)[..p]);
                        db.row_mut(r).copy_from_slice(&g.row(r)[p..]);
                    }
                    send(&mut grads, *a, da);
                    send(&mut grads, *b, db);
                }
                Op::NeighborSum { x, edges } => {
                    let mut dx = Tensor::zeros(g.rows(), g.cols());
                    for e in edges {
                        let src = g.row(e.dst).to_vec();
                        for (d, s) in dx.row_mut(e.src).iter_mut().zip(&src) {
                            *d += e.weight * s;
                        }
                    }
                    send(&mut grads, *x, dx);
                }
                Op::Softmax(x) => {
                    let p = &node.value;
                    let mut dx = Tensor::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let (pr, gr) = (p.row(r), g.row(r));
                        let inner: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, pv), gv) in dx.row_mut(r).iter_mut().zip(pr).zip(gr) {
                            *d = pv * (gv - inner);
                        }
                    }
                    send(&mut grads, *x, dx);
                }
                Op::CrossEntropy {
                    probs,
                    labels,
                    weights,
                    total,
                } => {
                    let upstream = g.item();
                    let pv = self.value(*probs);
                    match self.nodes[probs.0].op {
                        Op::Softmax(logits) => {
                            let mut dl = Tensor::zeros(pv.rows(), pv.cols());
                            for (i, (&l, &w)) in labels.iter().zip(weights).enumerate() {
                                if w == 0.0 {
                                    continue;
                                }
                                let scale = upstream * w / total;
                                for (c, d) in dl.row_mut(i).iter_mut().enumerate() {
                                    let onehot = if c == l { 1.0 } else { 0.0 };
                                    *d = scale * (pv.get(i, c) - onehot);
                                }
                            }
                            send(&mut grads, logits, dl);
                        }
                        _ => {
                            let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                            for (i, (&l, &w)) in labels.iter().zip(weights).enumerate() {
                                let p = pv.get(i, l);
                                if w > 0.0 && p > PROB_FLOOR {
                                    dp.set(i, l, -upstream * w / (total * p));
                                }
                            }
                            send(&mut grads, *probs, dp);
                        }
                    }
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    send(&mut grads, *b, g.map(|v| -v));
                    send(&mut grads, *a, g.clone());
                }
                Op::Sum(x) => {
                    let (r, c) = self.shape(*x);
                    let v = g.item();
                    send(&mut grads, *x, Tensor::from_vec(r, c, vec![v; r * c]).expect("shape"));
                }
                Op::Dot(x, coeffs) => {
                    let v = g.item();
                    send(&mut grads, *x, coeffs.map(|c| c * v));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients(grads))
    }
}
