//! Reverse-mode differentiation over batched matrix nodes.
//!
//! Nodes are appended in evaluation order, so walking the node list
//! backwards is a reverse topological order and every node is visited once.
//! Parameters enter the tape through [`Tape::param`], which remembers the
//! owning store and slot so [`Tape::backward`] can write gradients back.

use super::matrix::{axpy, Matrix};
use super::ops::{leaky, softmax_in_place, LOG_EPS};
use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    LeakyRelu { x: Var, slope: f64 },
    Softmax { x: Var },
    CrossEntropy { p: Var, targets: Vec<usize> },
    L1 { a: Var, b: Var },
    MaxProb { p: Var, arg: Vec<usize> },
    HCat { parts: Vec<Var> },
    SelectRows { x: Var, rows: Vec<usize> },
    Scale { x: Var, c: f64 },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Square { x: Var },
    Sum { x: Var },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    // True when some parameter is upstream of this node.
    grad: bool,
}

#[derive(Debug, Clone)]
struct Binding {
    store: String,
    slot: usize,
    var: Var,
}

/// Deliberate backward-rule corruption, used as a negative control for the
/// gradient checker.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardFault {
    LeakyReluSlope,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bindings: Vec<Binding>,
    fault: Option<BackwardFault>,
}

/// Adjoints of the leaf nodes (constants and parameters), indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.adj[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    #[doc(hidden)]
    pub fn with_fault(fault: BackwardFault) -> Self {
        Self {
            fault: Some(fault),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.as_slice()[0]
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value recorded on tape");
        let grad = self.inputs_need_grad(&op);
        self.nodes.push(Node { value, op, grad });
        Var(self.nodes.len() - 1)
    }

    fn inputs_need_grad(&self, op: &Op) -> bool {
        let g = |v: &Var| self.nodes[v.0].grad;
        match op {
            Op::Leaf => false,
            Op::Dense { x, w, b } => g(x) || g(w) || g(b),
            Op::L1 { a, b } | Op::Add { a, b } | Op::Sub { a, b } => g(a) || g(b),
            Op::HCat { parts } => parts.iter().any(g),
            Op::SelectRows { x, .. } => g(x),
            Op::LeakyRelu { x, .. }
            | Op::Softmax { x }
            | Op::Scale { x, .. }
            | Op::Square { x }
            | Op::Sum { x } => g(x),
            Op::CrossEntropy { p, .. } | Op::MaxProb { p, .. } => g(p),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].grad
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf whose adjoint is reported by [`Tape::gradients`] but which is
    /// not bound to any parameter store.
    pub fn variable(&mut self, value: Matrix) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].grad = true;
        v
    }

    /// Records a parameter slot; its gradient flows back on `backward`.
    pub fn param(&mut self, store: &ParamStore, slot: usize) -> Var {
        let v = self.variable(store.value(slot).clone());
        self.bindings.push(Binding {
            store: store.name().to_string(),
            slot,
            var: v,
        });
        v
    }

    /// Row-wise `x·Wᵀ + b` with `W` of shape (out, in) and `b` of shape (1, out).
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.cols() {
            return Err(Error::dim("dense input", wv.cols(), xv.cols()));
        }
        if bv.shape() != (1, wv.rows()) {
            return Err(Error::dim("dense bias", wv.rows(), bv.len()));
        }
        let out = wv.affine_rows(xv, bv.as_slice());
        Ok(self.push(out, Op::Dense { x, w, b }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = leaky(*v, slope));
        self.push(out, Op::LeakyRelu { x, slope })
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::Softmax { x })
    }

    /// Mean over rows of `−ln(p[r][targets[r]] + ε)`.
    pub fn cross_entropy(&mut self, p: Var, targets: &[usize]) -> Result<Var> {
        let pv = self.value(p);
        if targets.len() != pv.rows() || pv.rows() == 0 {
            return Err(Error::dim("cross_entropy targets", pv.rows(), targets.len()));
        }
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= pv.cols() {
                return Err(Error::IndexOutOfRange {
                    what: "class",
                    index: t,
                    len: pv.cols(),
                });
            }
            total -= (pv.get(r, t) + LOG_EPS).ln();
        }
        let mean = total / targets.len() as f64;
        Ok(self.push(
            Matrix::scalar(mean),
            Op::CrossEntropy {
                p,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Mean absolute difference over all entries.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(
                "l1 operands",
                format!("{:?}", av.shape()),
                format!("{:?}", bv.shape()),
            ));
        }
        let n = av.len().max(1) as f64;
        let s: f64 = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(x, y)| (x - y).abs())
            .sum();
        Ok(self.push(Matrix::scalar(s / n), Op::L1 { a, b }))
    }

    /// Mean over rows of the row maximum (prediction certainty).
    pub fn max_prob(&mut self, p: Var) -> Result<Var> {
        let pv = self.value(p);
        if pv.rows() == 0 {
            return Err(Error::Empty("certainty batch"));
        }
        let arg: Vec<usize> = (0..pv.rows()).map(|r| super::ops::argmax(pv.row(r))).collect();
        let s: f64 = arg.iter().enumerate().map(|(r, &k)| pv.get(r, k)).sum();
        let mean = s / pv.rows() as f64;
        Ok(self.push(Matrix::scalar(mean), Op::MaxProb { p, arg }))
    }

    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::hcat(&mats)?;
        Ok(self.push(
            out,
            Op::HCat {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Rows `rows` of `x`, in order.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(Error::IndexOutOfRange {
                what: "row",
                index: bad,
                len: xv.rows(),
            });
        }
        let out = xv.select_rows(rows);
        Ok(self.push(
            out,
            Op::SelectRows {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v *= c);
        self.push(out, Op::Scale { x, c })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub { a, b }))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v *= *v);
        self.push(out, Op::Square { x })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).as_slice().iter().sum();
        self.push(Matrix::scalar(s), Op::Sum { x })
    }

    fn zip_with(&self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(
                what,
                format!("{:?}", av.shape()),
                format!("{:?}", bv.shape()),
            ));
        }
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Matrix::from_vec(av.rows(), av.cols(), data)
    }

    /// Adjoint of every node with respect to the scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NotScalar {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.grad {
                adj[idx] = None;
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    adj[idx] = Some(g);
                }
                Op::Dense { x, w, b } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let (rows, out) = g.shape();
                    let inp = wv.cols();
                    let (need_x, need_w) = (self.needs(*x), self.needs(*w));
                    let mut dx = Matrix::zeros(if need_x { rows } else { 0 }, inp);
                    let mut dw = Matrix::zeros(if need_w { out } else { 0 }, inp);
                    let mut db = Matrix::zeros(1, out);
                    for r in 0..rows {
                        let gr = g.row(r);
                        let xr = xv.row(r);
                        for (o, &go) in gr.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            if need_x {
                                axpy(go, wv.row(o), dx.row_mut(r));
                            }
                            if need_w {
                                axpy(go, xr, dw.row_mut(o));
                            }
                        }
                        axpy(1.0, gr, db.as_mut_slice());
                    }
                    if need_x {
                        accumulate(&mut adj, *x, dx);
                    }
                    if need_w {
                        accumulate(&mut adj, *w, dw);
                    }
                    if self.needs(*b) {
                        accumulate(&mut adj, *b, db);
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let slope = match self.fault {
                        Some(BackwardFault::LeakyReluSlope) => slope * 10.0,
                        None => *slope,
                    };
                    let xv = self.value(*x);
                    let mut dx = g;
                    for (d, &xi) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if xi < 0.0 {
                            *d *= slope;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Softmax { x } => {
                    let pv = &node.value;
                    let mut dx = g;
                    for r in 0..pv.rows() {
                        let pr = pv.row(r);
                        let gr = dx.row_mut(r);
                        let inner: f64 = gr.iter().zip(pr).map(|(a, b)| a * b).sum();
                        for (gi, pi) in gr.iter_mut().zip(pr) {
                            *gi = pi * (*gi - inner);
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::CrossEntropy { p, targets } => {
                    let pv = self.value(*p);
                    let up = g.as_slice()[0] / targets.len() as f64;
                    let mut dp = Matrix::zeros(pv.rows(), pv.cols());
                    for (r, &t) in targets.iter().enumerate() {
                        dp.set(r, t, -up / (pv.get(r, t) + LOG_EPS));
                    }
                    accumulate(&mut adj, *p, dp);
                }
                Op::L1 { a, b } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let up = g.as_slice()[0] / av.len().max(1) as f64;
                    let data: Vec<f64> = av
                        .as_slice()
                        .iter()
                        .zip(bv.as_slice())
                        .map(|(x, y)| {
                            let d = x - y;
                            if d > 0.0 {
                                up
                            } else if d < 0.0 {
                                -up
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let da = Matrix::from_vec(av.rows(), av.cols(), data)?;
                    let mut db = da.clone();
                    db.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
                    accumulate(&mut adj, *a, da);
                    accumulate(&mut adj, *b, db);
                }
                Op::MaxProb { p, arg } => {
                    let pv = self.value(*p);
                    let up = g.as_slice()[0] / pv.rows() as f64;
                    let mut dp = Matrix::zeros(pv.rows(), pv.cols());
                    for (r, &k) in arg.iter().enumerate() {
                        dp.set(r, k, up);
                    }
                    accumulate(&mut adj, *p, dp);
                }
                Op::HCat { parts } => {
                    let mut offset = 0;
                    for &part in parts {
                        let (rows, cols) = self.value(part).shape();
                        let mut d = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut adj, part, d);
                    }
                }
                Op::SelectRows { x, rows } => {
                    let (r, c) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(r, c);
                    for (k, &src) in rows.iter().enumerate() {
                        axpy(1.0, g.row(k), dx.row_mut(src));
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Scale { x, c } => {
                    let mut dx = g;
                    dx.as_mut_slice().iter_mut().for_each(|v| *v *= c);
                    accumulate(&mut adj, *x, dx);
                }
                Op::Add { a, b } => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub { a, b } => {
                    let mut neg = g.clone();
                    neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
                    accumulate(&mut adj, *a, g);
                    accumulate(&mut adj, *b, neg);
                }
                Op::Square { x } => {
                    let xv = self.value(*x);
                    let mut dx = g;
                    for (d, &xi) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *d *= 2.0 * xi;
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Sum { x } => {
                    let (rows, cols) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    dx.fill(g.as_slice()[0]);
                    accumulate(&mut adj, *x, dx);
                }
            }
        }
        Ok(Gradients { adj })
    }

    /// Zeroes the gradient accumulators of `stores`, then writes
    /// ∂loss/∂parameter into every slot recorded on this tape. Slots of a
    /// store that never entered the tape end with zero gradient.
    pub fn backward(&self, loss: Var, stores: &mut [&mut ParamStore]) -> Result<()> {
        let grads = self.gradients(loss)?;
        for store in stores.iter_mut() {
            store.zero_grads();
        }
        for b in &self.bindings {
            let Some(store) = stores.iter_mut().find(|s| s.name() == b.store) else {
                continue;
            };
            if let Some(g) = grads.get(b.var) {
                let slot = store.slot_mut(b.slot);
                axpy(1.0, g.as_slice(), slot.grad.as_mut_slice());
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adj[v.0] {
        Some(existing) => axpy(1.0, g.as_slice(), existing.as_mut_slice()),
        slot @ None => *slot = Some(g),
    }
}
