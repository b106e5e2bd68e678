//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is rebuilt for every training step (define-by-run). Each
//! operation appends a node holding its value, a gradient accumulator and
//! the rule needed to push gradients back to its parents. Parents always
//! precede their consumers on the tape, so replaying nodes in reverse order
//! is a valid topological order for [`Tape::backward`].
//!
//! Broadcasting is limited to adding a bias row to every row of a matrix.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense row-major tensor with a same-shape gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || numel != data.len() {
            return Err(Error::shape("tensor", shape, &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            grad: vec![0.0; data.len()],
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self::new(shape, vec![0.0; numel]).expect("zeros: shape must be non-empty and positive")
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(&[1], vec![value]).unwrap()
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(&[n], data).expect("vector must be non-empty")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(&[rows, cols], data)
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    fn rows_cols(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Identifies a trainable parameter owned outside the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat {
        parts: Vec<Var>,
        outer: usize,
        inners: Vec<usize>,
    },
    Narrow {
        input: Var,
        outer: usize,
        offset: usize,
        inner_in: usize,
    },
    Sigmoid(Var),
    Tanh(Var),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Define-by-run record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
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

    pub fn grad(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.grad()
    }

    fn push(&mut self, mut value: Tensor, op: Op, requires_grad: bool) -> Var {
        value.requires_grad = requires_grad;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    /// Records a leaf. Its `requires_grad` flag is taken from the tensor.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let rg = tensor.requires_grad;
        self.push(tensor, Op::Leaf, rg)
    }

    /// Records a leaf that never receives gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(tensor, Op::Leaf, false)
    }

    /// Records (once per tape) a trainable parameter. Repeated calls with the
    /// same id return the same node, so every use accumulates into one slot.
    pub fn param(&mut self, id: ParamId, tensor: &Tensor) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let mut value = tensor.clone();
        value.zero_grad();
        let v = self.push(value, Op::Param, true);
        self.params.insert(id, v);
        v
    }

    /// Copies `v` into a new leaf that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let mut value = self.value(v).clone();
        value.zero_grad();
        self.push(value, Op::Leaf, false)
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = match (ta.rows_cols(), tb.rows_cols()) {
            (Some(x), Some(y)) if x.1 == y.0 => (x, y),
            _ => return Err(Error::shape("matmul", ta.shape(), tb.shape())),
        };
        debug_assert_eq!(k, k2);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for (p, &av) in ta.data[i * k..(i + 1) * k].iter().enumerate() {
                axpy(av, &tb.data[p * n..(p + 1) * n], row);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    /// `a[m×k] · b[n×k]ᵀ`; the affine maps of the LSTM and the tied output
    /// projection use this form so weights stay in `[out × in]` layout.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (n, _)) = match (ta.rows_cols(), tb.rows_cols()) {
            (Some(x), Some(y)) if x.1 == y.1 => (x, y),
            _ => return Err(Error::shape("matmul_nt", ta.shape(), tb.shape())),
        };
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ta.data[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] = dot(arow, &tb.data[j * k..(j + 1) * k]);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNt(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(Error::shape("add", ta.shape(), tb.shape()));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let value = Tensor::new(&ta.shape.clone(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Adds the vector `row[n]` to every row of `a[m×n]`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (m, n) = match (ta.rows_cols(), tr.shape()) {
            (Some((m, n)), [len]) if *len == n => (m, n),
            _ => return Err(Error::shape("add_row", ta.shape(), tr.shape())),
        };
        let mut data = ta.data.clone();
        for r in data.chunks_exact_mut(n) {
            r.iter_mut().zip(&tr.data).for_each(|(x, b)| *x += b);
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::AddRow(a, row), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(Error::shape("mul", ta.shape(), tb.shape()));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let value = Tensor::new(&ta.shape.clone(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = self.value(a);
        let value = Tensor::new(&ta.shape.clone(), ta.data.iter().map(|x| x * c).collect()).unwrap();
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        self.concat_many(&[a, b], axis)
    }

    /// Concatenates any number of tensors along `axis`.
    pub fn concat_many(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .value(*parts.first().ok_or_else(|| Error::shape("concat", &[], &[]))?)
            .shape
            .clone();
        if axis >= first.len() {
            return Err(Error::shape("concat", &first, &[axis]));
        }
        let outer: usize = first[..axis].iter().product();
        let mut inners = Vec::with_capacity(parts.len());
        let mut out_shape = first.clone();
        out_shape[axis] = 0;
        for &p in parts {
            let s = &self.value(p).shape;
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", &first, s));
            }
            out_shape[axis] += s[axis];
            inners.push(s[axis..].iter().product::<usize>());
        }
        let total_inner: usize = inners.iter().sum();
        let mut data = Vec::with_capacity(outer * total_inner);
        for o in 0..outer {
            for (&p, &inner) in parts.iter().zip(&inners) {
                data.extend_from_slice(&self.value(p).data[o * inner..(o + 1) * inner]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let value = Tensor::new(&out_shape, data)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                outer,
                inners,
            },
            rg,
        ))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.value(a).shape.clone();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::shape("narrow", &shape, &[axis, start, len]));
        }
        let outer: usize = shape[..axis].iter().product();
        let step: usize = shape[axis + 1..].iter().product();
        let inner_in = shape[axis] * step;
        let (offset, inner_out) = (start * step, len * step);
        let src = &self.value(a).data;
        let mut data = Vec::with_capacity(outer * inner_out);
        for o in 0..outer {
            let base = o * inner_in + offset;
            data.extend_from_slice(&src[base..base + inner_out]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(&out_shape, data)?,
            Op::Narrow {
                input: a,
                outer,
                offset,
                inner_in,
            },
            rg,
        ))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data.iter().map(|&x| sigmoid(x)).collect();
        let value = Tensor::new(&ta.shape.clone(), data).unwrap();
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data.iter().map(|x| x.tanh()).collect();
        let value = Tensor::new(&ta.shape.clone(), data).unwrap();
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = t
            .rows_cols()
            .ok_or_else(|| Error::shape("gather", t.shape(), &[ids.len()]))?;
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(Error::Index {
                    index: id,
                    size: rows,
                    context: "embedding lookup",
                });
            }
            data.extend_from_slice(&t.data[id * cols..(id + 1) * cols]);
        }
        let value = Tensor::matrix(ids.len(), cols, data)?;
        let rg = self.rg(table);
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Per-row cross-entropy of `softmax(logits)` against `targets`.
    ///
    /// `logits` is `[V]` (one target) or `[N×V]` (N targets); the result has
    /// shape `[N]` and holds `logsumexp(z) − z[target]` for every row.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (n, v) = match t.shape() {
            [v] => (1, *v),
            [n, v] => (*n, *v),
            s => return Err(Error::shape("softmax_cross_entropy", s, &[targets.len()])),
        };
        if targets.len() != n {
            return Err(Error::shape("softmax_cross_entropy", t.shape(), &[targets.len()]));
        }
        let mut probs = vec![0.0; n * v];
        let mut losses = Vec::with_capacity(n);
        for (r, &target) in targets.iter().enumerate() {
            if target >= v {
                return Err(Error::Index {
                    index: target,
                    size: v,
                    context: "cross-entropy target",
                });
            }
            let row = &t.data[r * v..(r + 1) * v];
            let lse = softmax_into(row, &mut probs[r * v..(r + 1) * v]);
            losses.push(lse - row[target]);
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::vector(losses),
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn zero_grad(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.value.zero_grad());
    }

    /// Accumulates `∂root/∂node` into every reachable node that requires
    /// gradient.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(Error::NonScalarRoot(self.value(root).shape.clone()));
        }
        if !self.rg(root) {
            return Ok(());
        }
        // Seeds live in a separate buffer so that running backward twice
        // accumulates rather than compounds.
        let mut seeds: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        seeds[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = seeds[i].take() else { continue };
            if !self.nodes[i].value.requires_grad {
                continue;
            }
            self.nodes[i]
                .value
                .grad
                .iter_mut()
                .zip(&g)
                .for_each(|(acc, x)| *acc += x);
            for (parent, pg) in self.local_backward(i, &g) {
                if !self.nodes[parent.0].value.requires_grad {
                    continue;
                }
                match &mut seeds[parent.0] {
                    Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, x)| *a += x),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(())
    }

    /// Gradient contributions from node `i` (with upstream `g`) to its parents.
    fn local_backward(&self, i: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf | Op::Param => Vec::new(),
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k) = ta.rows_cols().unwrap();
                let n = tb.shape[1];
                let mut out = Vec::new();
                if self.rg(*a) {
                    // g · bᵀ
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] = dot(grow, &tb.data[p * n..(p + 1) * n]);
                        }
                    }
                    out.push((*a, ga));
                }
                if self.rg(*b) {
                    // aᵀ · g
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            axpy(ta.data[i * k + p], grow, &mut gb[p * n..(p + 1) * n]);
                        }
                    }
                    out.push((*b, gb));
                }
                out
            }
            Op::MatMulNt(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k) = ta.rows_cols().unwrap();
                let n = tb.shape[0];
                let mut out = Vec::new();
                if self.rg(*a) {
                    // g · b
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        let garow = &mut ga[i * k..(i + 1) * k];
                        for j in 0..n {
                            axpy(g[i * n + j], &tb.data[j * k..(j + 1) * k], garow);
                        }
                    }
                    out.push((*a, ga));
                }
                if self.rg(*b) {
                    // gᵀ · a
                    let mut gb = vec![0.0; n * k];
                    for i in 0..m {
                        let arow = &ta.data[i * k..(i + 1) * k];
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij != 0.0 {
                                axpy(gij, arow, &mut gb[j * k..(j + 1) * k]);
                            }
                        }
                    }
                    out.push((*b, gb));
                }
                out
            }
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::AddRow(a, row) => {
                let n = val(*row).numel();
                let mut gr = vec![0.0; n];
                for chunk in g.chunks_exact(n) {
                    gr.iter_mut().zip(chunk).for_each(|(acc, x)| *acc += x);
                }
                vec![(*a, g.to_vec()), (*row, gr)]
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let ga = g.iter().zip(&tb.data).map(|(g, y)| g * y).collect();
                let gb = g.iter().zip(&ta.data).map(|(g, x)| g * x).collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::Scale(a, c) => vec![(*a, g.iter().map(|x| x * c).collect())],
            Op::Concat {
                parts,
                outer,
                inners,
            } => {
                let total: usize = inners.iter().sum();
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for (&p, &inner) in parts.iter().zip(inners) {
                    let mut gp = Vec::with_capacity(outer * inner);
                    for o in 0..*outer {
                        let base = o * total + offset;
                        gp.extend_from_slice(&g[base..base + inner]);
                    }
                    offset += inner;
                    out.push((p, gp));
                }
                out
            }
            Op::Narrow {
                input,
                outer,
                offset,
                inner_in,
            } => {
                let inner_out = g.len() / outer;
                let mut gi = vec![0.0; outer * inner_in];
                for o in 0..*outer {
                    let base = o * inner_in + offset;
                    gi[base..base + inner_out]
                        .copy_from_slice(&g[o * inner_out..(o + 1) * inner_out]);
                }
                vec![(*input, gi)]
            }
            Op::Sigmoid(a) => {
                let y = &node.value.data;
                let ga = g.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect();
                vec![(*a, ga)]
            }
            Op::Tanh(a) => {
                let y = &node.value.data;
                let ga = g.iter().zip(y).map(|(g, t)| g * (1.0 - t * t)).collect();
                vec![(*a, ga)]
            }
            Op::Gather { table, ids } => {
                let tt = val(*table);
                let cols = tt.shape[1];
                let mut gt = vec![0.0; tt.numel()];
                for (r, &id) in ids.iter().enumerate() {
                    gt[id * cols..(id + 1) * cols]
                        .iter_mut()
                        .zip(&g[r * cols..(r + 1) * cols])
                        .for_each(|(acc, x)| *acc += x);
                }
                vec![(*table, gt)]
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let v = probs.len() / targets.len();
                let mut gl = probs.clone();
                for (r, &target) in targets.iter().enumerate() {
                    let row = &mut gl[r * v..(r + 1) * v];
                    row[target] -= 1.0;
                    row.iter_mut().for_each(|x| *x *= g[r]);
                }
                vec![(*logits, gl)]
            }
            Op::Sum(a) => vec![(*a, vec![g[0]; val(*a).numel()])],
        }
    }

    /// Visits every parameter recorded on this tape with its accumulated gradient.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> + '_ {
        self.params
            .iter()
            .map(move |(&id, &v)| (id, self.nodes[v.0].value.grad()))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Writes `softmax(row)` into `out` and returns `logsumexp(row)`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(row) {
        *o = (z - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    max + total.ln()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    softmax_into(row, &mut out);
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}
