//! Reverse-mode differentiation over a recorded tape of tensor operations.
//!
//! Each forward call appends a node holding its value and the operation that
//! produced it. [`Tape::backward`] walks the nodes in reverse and accumulates
//! gradients into the [`ParamStore`] entries referenced by parameter leaves.

use rand::Rng;

use super::tensor::{dot, masked_softmax_slice, sigmoid};
use super::{NumericError, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Gather {
        param: ParamId,
        rows: Vec<usize>,
    },
    MatMul(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Dot(Var, Var),
    Sum(Var),
    MaskedSoftmax {
        x: Var,
    },
    HeadLogits {
        proj: Var,
        bias: Var,
        query: Var,
        per_head: bool,
        act: Vec<f64>,
    },
    Stack(Vec<Var>),
    Dropout {
        x: Var,
        scale: Vec<f64>,
    },
    Nce(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NumericError {
    NumericError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// Parameter leaf; its gradient is accumulated into the store on backward.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// Selects rows of a matrix parameter (embedding lookup).
    pub fn gather(
        &mut self,
        store: &ParamStore,
        id: ParamId,
        rows: &[usize],
    ) -> Result<Var, NumericError> {
        let table = store.value(id);
        if table.rank() != 2 {
            return Err(NumericError::Shape {
                op: "gather",
                left: table.shape().to_vec(),
                right: vec![rows.len()],
            });
        }
        let cols = table.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= table.rows() {
                return Err(NumericError::Index {
                    op: "gather",
                    index: r,
                    len: table.rows(),
                });
            }
            data.extend_from_slice(table.row(r));
        }
        let value = Tensor::matrix(rows.len(), cols, data)?;
        Ok(self.push(
            value,
            Op::Gather {
                param: id,
                rows: rows.to_vec(),
            },
        ))
    }

    /// `[m, n] x [n, p] -> [m, p]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, n, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * p];
        let (ad, bd) = (ta.data(), tb.data());
        for i in 0..m {
            let orow = &mut out[i * p..(i + 1) * p];
            for k in 0..n {
                let aik = ad[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for (o, &bkj) in orow.iter_mut().zip(&bd[k * p..(k + 1) * p]) {
                    *o += aik * bkj;
                }
            }
        }
        let value = Tensor::matrix(m, p, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `[r, c] x [c] -> [r]`
    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var, NumericError> {
        let (tm, tv) = (self.value(m), self.value(v));
        if tm.rank() != 2 || tv.rank() != 1 || tm.shape()[1] != tv.shape()[0] {
            return Err(shape_err("matvec", tm, tv));
        }
        let out: Vec<f64> = (0..tm.rows()).map(|r| dot(tm.row(r), tv.data())).collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(m, v)))
    }

    /// `[m] x [m, n] -> [n]`, i.e. `Mᵀ v`.
    pub fn vecmat(&mut self, v: Var, m: Var) -> Result<Var, NumericError> {
        let (tv, tm) = (self.value(v), self.value(m));
        if tm.rank() != 2 || tv.rank() != 1 || tm.shape()[0] != tv.shape()[0] {
            return Err(shape_err("vecmat", tv, tm));
        }
        let n = tm.cols();
        let mut out = vec![0.0; n];
        for (r, &w) in tv.data().iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(tm.row(r)) {
                *o += w * x;
            }
        }
        Ok(self.push(Tensor::vector(out), Op::VecMat(v, m)))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.binary(a, b, "hadamard", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect())
            .expect("shape preserved");
        self.push(value, Op::Scale(a, c))
    }

    /// Adds a `[n]` row vector to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var, NumericError> {
        let (tm, tr) = (self.value(m), self.value(row));
        if tm.rank() != 2 || tr.rank() != 1 || tm.cols() != tr.len() {
            return Err(shape_err("add_row", tm, tr));
        }
        let n = tr.len();
        let data = tm
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + tr.data()[i % n])
            .collect();
        let value = Tensor::new(tm.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddRow(m, row)))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
            .expect("shape preserved")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.unary(a, f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.unary(a, sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// Inner product of two equal-shaped tensors, producing a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("dot", ta, tb));
        }
        let s = dot(ta.data(), tb.data());
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Softmax over the unmasked positions of a vector, or of every row of a
    /// matrix with the same column mask. Masked positions are exactly zero.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var, NumericError> {
        let t = self.value(x);
        if t.rank() == 0 || t.rank() > 2 || t.cols() != mask.len() {
            return Err(NumericError::Shape {
                op: "masked_softmax",
                left: t.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(NumericError::Degenerate(
                "masked_softmax: every position is masked",
            ));
        }
        let mut out = vec![0.0; t.len()];
        let cols = t.cols();
        for r in 0..t.rows() {
            masked_softmax_slice(t.row(r), mask, &mut out[r * cols..(r + 1) * cols]);
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(value, Op::MaskedSoftmax { x }))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, NumericError> {
        let mask = vec![true; self.value(x).cols()];
        self.masked_softmax(x, &mask)
    }

    /// Multi-head attention logits `G[k, j] = q_kᵀ tanh(P_k[j] + b_k)`.
    ///
    /// `proj` is `[n, d]` when the projection is shared by all heads, or
    /// `[n, heads * d]` with head `k` reading columns `k*d..(k+1)*d` when
    /// every head has its own projection. `bias` and `query` are `[heads, d]`.
    /// Output is `[heads, n]`.
    pub fn head_logits(
        &mut self,
        proj: Var,
        bias: Var,
        query: Var,
        per_head: bool,
    ) -> Result<Var, NumericError> {
        let (tp, tb, tq) = (self.value(proj), self.value(bias), self.value(query));
        if tb.rank() != 2 || tb.shape() != tq.shape() || tp.rank() != 2 {
            return Err(shape_err("head_logits", tb, tq));
        }
        let (heads, d) = (tb.shape()[0], tb.shape()[1]);
        let width = if per_head { heads * d } else { d };
        if tp.cols() != width {
            return Err(shape_err("head_logits", tp, tb));
        }
        let n = tp.rows();
        let mut act = vec![0.0; heads * n * d];
        let mut out = vec![0.0; heads * n];
        for k in 0..heads {
            let (b, q) = (tb.row(k), tq.row(k));
            let offset = if per_head { k * d } else { 0 };
            for j in 0..n {
                let p = &tp.row(j)[offset..offset + d];
                let a = &mut act[(k * n + j) * d..(k * n + j + 1) * d];
                let mut g = 0.0;
                for i in 0..d {
                    a[i] = (p[i] + b[i]).tanh();
                    g += q[i] * a[i];
                }
                out[k * n + j] = g;
            }
        }
        let value = Tensor::matrix(heads, n, out)?;
        Ok(self.push(
            value,
            Op::HeadLogits {
                proj,
                bias,
                query,
                per_head,
                act,
            },
        ))
    }

    /// Stacks equal-shaped tensors along a new leading axis.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let first = parts
            .first()
            .ok_or(NumericError::Degenerate("stack: no inputs"))?;
        let inner = self.value(*first).shape().to_vec();
        let mut data = Vec::with_capacity(parts.len() * self.value(*first).len());
        for &p in parts {
            let t = self.value(p);
            if t.shape() != inner.as_slice() {
                return Err(shape_err("stack", self.value(*first), t));
            }
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![parts.len()];
        shape.extend(inner);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Stack(parts.to_vec())))
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Var {
        if rate <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - rate);
        let t = self.value(x);
        let scale: Vec<f64> = (0..t.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let data = t.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        self.push(value, Op::Dropout { x, scale })
    }

    /// Sampled softmax cross-entropy with the positive score at index 0:
    /// `logsumexp(s) - s[0]`.
    pub fn nce(&mut self, scores: Var) -> Result<Var, NumericError> {
        let t = self.value(scores);
        if t.rank() != 1 || t.len() < 2 {
            return Err(NumericError::Shape {
                op: "nce",
                left: t.shape().to_vec(),
                right: vec![2],
            });
        }
        let loss = nce_value(t.data())?;
        Ok(self.push(Tensor::scalar(loss), Op::Nce(scores)))
    }

    /// Runs the reverse pass from a scalar `root`, adding parameter gradients
    /// into `store`. Gradients already in the store are kept.
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<(), NumericError> {
        if self.value(root).len() != 1 {
            return Err(NumericError::Shape {
                op: "backward",
                left: self.value(root).shape().to_vec(),
                right: vec![],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let dst = store.get_mut(*id).grad_mut().data_mut();
                    for (d, x) in dst.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Gather { param, rows } => {
                    let grad = store.get_mut(*param).grad_mut();
                    let cols = grad.cols();
                    for (j, &r) in rows.iter().enumerate() {
                        for (d, x) in grad.row_mut(r).iter_mut().zip(&g[j * cols..(j + 1) * cols]) {
                            *d += x;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, n, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    let mut ga = vec![0.0; m * n];
                    let mut gb = vec![0.0; n * p];
                    for r in 0..m {
                        let grow = &g[r * p..(r + 1) * p];
                        for k in 0..n {
                            let brow = tb.row(k);
                            ga[r * n + k] = dot(grow, brow);
                            let ark = ta.data()[r * n + k];
                            if ark != 0.0 {
                                for (d, &x) in gb[k * p..(k + 1) * p].iter_mut().zip(grow) {
                                    *d += ark * x;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::MatVec(m, v) => {
                    let (tm, tv) = (self.value(*m), self.value(*v));
                    let (rows, cols) = (tm.rows(), tm.cols());
                    let mut gm = vec![0.0; rows * cols];
                    let mut gv = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = g[r];
                        for c in 0..cols {
                            gm[r * cols + c] = gr * tv.data()[c];
                            gv[c] += gr * tm.data()[r * cols + c];
                        }
                    }
                    accumulate(&mut grads, *m, &gm);
                    accumulate(&mut grads, *v, &gv);
                }
                Op::VecMat(v, m) => {
                    let (tv, tm) = (self.value(*v), self.value(*m));
                    let (rows, cols) = (tm.rows(), tm.cols());
                    let mut gm = vec![0.0; rows * cols];
                    let mut gv = vec![0.0; rows];
                    for r in 0..rows {
                        gv[r] = dot(&g, tm.row(r));
                        let w = tv.data()[r];
                        for c in 0..cols {
                            gm[r * cols + c] = w * g[c];
                        }
                    }
                    accumulate(&mut grads, *v, &gv);
                    accumulate(&mut grads, *m, &gm);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    accumulate(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga: Vec<f64> = g.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::AddRow(m, row) => {
                    let n = self.value(*row).len();
                    let mut gr = vec![0.0; n];
                    for (i, x) in g.iter().enumerate() {
                        gr[i % n] += x;
                    }
                    accumulate(&mut grads, *m, &g);
                    accumulate(&mut grads, *row, &gr);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, y)| x * (1.0 - y * y))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, y)| x * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Dot(a, b) => {
                    let s = g[0];
                    let ga: Vec<f64> = self.value(*b).data().iter().map(|y| s * y).collect();
                    let gb: Vec<f64> = self.value(*a).data().iter().map(|x| s * x).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Sum(a) => {
                    let ga = vec![g[0]; self.value(*a).len()];
                    accumulate(&mut grads, *a, &ga);
                }
                Op::MaskedSoftmax { x, .. } => {
                    let y = &node.value;
                    let cols = y.cols();
                    let mut gx = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g[r * cols..(r + 1) * cols];
                        let inner = dot(yr, gr);
                        for c in 0..cols {
                            gx[r * cols + c] = yr[c] * (gr[c] - inner);
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::HeadLogits {
                    proj,
                    bias,
                    query,
                    per_head,
                    act,
                } => {
                    let tq = self.value(*query);
                    let tp = self.value(*proj);
                    let (heads, d) = (tq.shape()[0], tq.shape()[1]);
                    let n = tp.rows();
                    let pcols = tp.cols();
                    let mut gp = vec![0.0; tp.len()];
                    let mut gb = vec![0.0; heads * d];
                    let mut gq = vec![0.0; heads * d];
                    for k in 0..heads {
                        let q = tq.row(k);
                        let offset = if *per_head { k * d } else { 0 };
                        for j in 0..n {
                            let up = g[k * n + j];
                            if up == 0.0 {
                                continue;
                            }
                            let a = &act[(k * n + j) * d..(k * n + j + 1) * d];
                            for i in 0..d {
                                gq[k * d + i] += up * a[i];
                                let pre = up * q[i] * (1.0 - a[i] * a[i]);
                                gb[k * d + i] += pre;
                                gp[j * pcols + offset + i] += pre;
                            }
                        }
                    }
                    accumulate(&mut grads, *proj, &gp);
                    accumulate(&mut grads, *bias, &gb);
                    accumulate(&mut grads, *query, &gq);
                }
                Op::Stack(parts) => {
                    let chunk = g.len() / parts.len();
                    for (i, p) in parts.iter().enumerate() {
                        accumulate(&mut grads, *p, &g[i * chunk..(i + 1) * chunk]);
                    }
                }
                Op::Dropout { x, scale } => {
                    let gx: Vec<f64> = g.iter().zip(scale).map(|(a, b)| a * b).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Nce(s) => {
                    let probs = super::tensor::softmax(self.value(*s).data());
                    let mut gs: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    gs[0] -= g[0];
                    accumulate(&mut grads, *s, &gs);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// `-log(exp(s[0]) / Σ exp(s))` with log-sum-exp stabilization.
pub fn nce_value(scores: &[f64]) -> Result<f64, NumericError> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(NumericError::NonFinite("nce scores".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rest: f64 = scores[1..].iter().map(|s| (s - max).exp()).sum();
    let loss = if scores[0] == max {
        rest.ln_1p()
    } else {
        (max - scores[0]) + ((scores[0] - max).exp() + rest).ln()
    };
    Ok(loss.max(0.0))
}
