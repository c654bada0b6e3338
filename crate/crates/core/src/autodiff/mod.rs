//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation as a node holding its output value.
//! [`Tape::backward`] walks the nodes in reverse creation order (which is a
//! topological order) and returns the gradients of every leaf that asked for
//! one. Parameters are referenced from a borrowed [`ParamStore`], never
//! copied onto the tape.

mod kernels;
mod ops;

pub use ops::Elementwise;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Param(ParamId),
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        a_batched: bool,
        b_batched: bool,
        p: usize,
        q: usize,
        r: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Log(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Concat {
        inputs: Vec<Var>,
        sizes: Vec<usize>,
        outer: usize,
        inner: usize,
    },
    Slice {
        x: Var,
        outer: usize,
        inner: usize,
        src_axis: usize,
        start: usize,
        len: usize,
    },
    Reshape(Var),
    Transpose {
        x: Var,
        batch: usize,
        rows: usize,
        cols: usize,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
        width: usize,
    },
    Sum(Var),
    CrossEntropy {
        pred: Var,
        gold: Vec<f64>,
        weights: Vec<f64>,
        classes: usize,
    },
    BinaryCrossEntropy {
        pred: Var,
        gold: Vec<f64>,
        weights: Vec<f64>,
        classes: usize,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Floor applied to probabilities before taking logarithms in the losses.
pub const LOG_FLOOR: f64 = 1e-12;

/// Recording of one forward computation.
#[derive(Debug)]
pub struct Tape<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    corrupt: Option<(ParamId, f64)>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    /// A tape without parameters; only inputs and constants can be leaves.
    pub fn new() -> Self {
        Tape {
            params: None,
            nodes: Vec::new(),
            param_nodes: Vec::new(),
            corrupt: None,
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Tape {
            params: Some(params),
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            corrupt: None,
        }
    }

    /// Test hook: adds `delta` to the first entry of `id`'s gradient after
    /// backward, simulating a faulty derivative.
    pub fn corrupt_gradient(&mut self, id: ParamId, delta: f64) {
        self.corrupt = Some((id, delta));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => self.params.expect("param node without store").tensor(*id).data(),
        }
    }

    /// Copies a node's value out as a standalone tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        let shape = self.shape(v);
        let data = self.value(v).to_vec();
        if shape.is_empty() {
            Tensor::scalar(data[0])
        } else {
            Tensor::new(shape, data).expect("tape shapes are consistent")
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes.get(id.0).copied().flatten() {
            return v;
        }
        let store = self.params.expect("tape has no parameter store");
        let shape = store.tensor(id).shape().to_vec();
        let v = self.push(shape, Value::Param(id), Op::Param(id), true);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// Leaf for an input tensor; it gets a gradient iff `requires_grad`.
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(
            t.shape().to_vec(),
            Value::Owned(t.data().to_vec()),
            Op::Leaf,
            t.requires_grad,
        )
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        if crate::tensor::numel(shape) != data.len() {
            return Err(Error::dim("constant", shape, &[data.len()]));
        }
        Ok(self.push(shape.to_vec(), Value::Owned(data), Op::Leaf, false))
    }

    fn push(&mut self, shape: Vec<usize>, value: Value, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn node(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.needs(*v));
        self.push(shape, Value::Owned(data), op, needs)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Gradients are returned rather than written into the store so the
    /// store can stay borrowed by the tape; use [`ParamStore::accumulate`].
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);

        let mut out = Gradients::default();
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Leaf => out.leaves.push((Var(i), g)),
                Op::Param(id) => {
                    let mut g = g;
                    if let Some((cid, delta)) = self.corrupt {
                        if cid == *id {
                            g[0] += delta;
                        }
                    }
                    out.params.push((*id, g));
                }
                op => self.backprop_op(op, i, &g, &mut grads),
            }
        }
        out.params.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    fn backprop_op(&self, op: &Op, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out_val = self.value(Var(i));
        match op {
            Op::Leaf | Op::Param(_) => unreachable!(),
            Op::MatMul {
                a,
                b,
                batch,
                a_batched,
                b_batched,
                p,
                q,
                r,
            } => {
                let (p, q, r) = (*p, *q, *r);
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.needs(*a) {
                    let ga = slot(grads, *a, av.len());
                    for bi in 0..*batch {
                        let ao = if *a_batched { bi * p * q } else { 0 };
                        let bo = if *b_batched { bi * q * r } else { 0 };
                        kernels::mm_nt_acc(
                            &g[bi * p * r..(bi + 1) * p * r],
                            &bv[bo..bo + q * r],
                            &mut ga[ao..ao + p * q],
                            p,
                            q,
                            r,
                        );
                    }
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, bv.len());
                    for bi in 0..*batch {
                        let ao = if *a_batched { bi * p * q } else { 0 };
                        let bo = if *b_batched { bi * q * r } else { 0 };
                        kernels::mm_tn_acc(
                            &av[ao..ao + p * q],
                            &g[bi * p * r..(bi + 1) * p * r],
                            &mut gb[bo..bo + q * r],
                            p,
                            q,
                            r,
                        );
                    }
                }
            }
            Op::Add(a, b) => {
                self.acc_map(grads, *a, g, |gi, _| gi);
                self.acc_map(grads, *b, g, |gi, _| gi);
            }
            Op::Sub(a, b) => {
                self.acc_map(grads, *a, g, |gi, _| gi);
                self.acc_map(grads, *b, g, |gi, _| -gi);
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let bv = self.value(*b);
                    let ga = slot(grads, *a, g.len());
                    for ((s, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                        *s += gi * bi;
                    }
                }
                if self.needs(*b) {
                    let av = self.value(*a);
                    let gb = slot(grads, *b, g.len());
                    for ((s, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                        *s += gi * ai;
                    }
                }
            }
            Op::AddBias(x, bias) => {
                self.acc_map(grads, *x, g, |gi, _| gi);
                if self.needs(*bias) {
                    let f = self.value(*bias).len();
                    let gb = slot(grads, *bias, f);
                    for row in g.chunks(f) {
                        for (s, v) in gb.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                }
            }
            Op::Scale(x, c) => {
                let c = *c;
                self.acc_map(grads, *x, g, |gi, _| gi * c);
            }
            Op::Sigmoid(x) => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, g.len());
                    for ((s, gi), y) in gx.iter_mut().zip(g).zip(out_val) {
                        *s += gi * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(x) => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, g.len());
                    for ((s, gi), y) in gx.iter_mut().zip(g).zip(out_val) {
                        *s += gi * (1.0 - y * y);
                    }
                }
            }
            Op::Relu(x) => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, g.len());
                    for ((s, gi), y) in gx.iter_mut().zip(g).zip(out_val) {
                        if *y > 0.0 {
                            *s += gi;
                        }
                    }
                }
            }
            Op::Log(x) => {
                self.acc_map(grads, *x, g, |gi, xi| gi / xi);
            }
            Op::Softmax(x) => {
                if self.needs(*x) {
                    let c = *self.shape(Var(i)).last().unwrap_or(&1);
                    let gx = slot(grads, *x, g.len());
                    for ((s_row, g_row), y_row) in
                        gx.chunks_mut(c).zip(g.chunks(c)).zip(out_val.chunks(c))
                    {
                        let dot: f64 = g_row.iter().zip(y_row).map(|(a, b)| a * b).sum();
                        for ((s, gi), yi) in s_row.iter_mut().zip(g_row).zip(y_row) {
                            *s += yi * (gi - dot);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let f = self.value(*gain).len();
                let gainv = self.value(*gain);
                if self.needs(*x) {
                    let gx = slot(grads, *x, g.len());
                    let mut gxhat = vec![0.0; f];
                    for (row, ((s_row, g_row), xh_row)) in gx
                        .chunks_mut(f)
                        .zip(g.chunks(f))
                        .zip(xhat.chunks(f))
                        .enumerate()
                    {
                        for ((d, gi), w) in gxhat.iter_mut().zip(g_row).zip(gainv) {
                            *d = gi * w;
                        }
                        let sum_d: f64 = gxhat.iter().sum();
                        let sum_dx: f64 = gxhat.iter().zip(xh_row).map(|(a, b)| a * b).sum();
                        let nf = f as f64;
                        let k = inv_std[row] / nf;
                        for ((s, d), xh) in s_row.iter_mut().zip(&gxhat).zip(xh_row) {
                            *s += k * (nf * d - sum_d - xh * sum_dx);
                        }
                    }
                }
                if self.needs(*gain) {
                    let gg = slot(grads, *gain, f);
                    for (g_row, xh_row) in g.chunks(f).zip(xhat.chunks(f)) {
                        for ((s, gi), xh) in gg.iter_mut().zip(g_row).zip(xh_row) {
                            *s += gi * xh;
                        }
                    }
                }
                if self.needs(*bias) {
                    let gb = slot(grads, *bias, f);
                    for g_row in g.chunks(f) {
                        for (s, gi) in gb.iter_mut().zip(g_row) {
                            *s += gi;
                        }
                    }
                }
            }
            Op::Concat {
                inputs,
                sizes,
                outer,
                inner,
            } => {
                let total: usize = sizes.iter().sum();
                let mut offset = 0;
                for (v, &s) in inputs.iter().zip(sizes) {
                    if self.needs(*v) {
                        let gv = slot(grads, *v, outer * s * inner);
                        for o in 0..*outer {
                            let src = &g[(o * total + offset) * inner..(o * total + offset + s) * inner];
                            for (d, x) in gv[o * s * inner..(o + 1) * s * inner].iter_mut().zip(src) {
                                *d += x;
                            }
                        }
                    }
                    offset += s;
                }
            }
            Op::Slice {
                x,
                outer,
                inner,
                src_axis,
                start,
                len,
            } => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, outer * src_axis * inner);
                    for o in 0..*outer {
                        let dst = &mut gx[(o * src_axis + start) * inner..(o * src_axis + start + len) * inner];
                        for (d, v) in dst.iter_mut().zip(&g[o * len * inner..(o + 1) * len * inner]) {
                            *d += v;
                        }
                    }
                }
            }
            Op::Reshape(x) => self.acc_map(grads, *x, g, |gi, _| gi),
            Op::Transpose { x, batch, rows, cols } => {
                if self.needs(*x) {
                    let (rows, cols) = (*rows, *cols);
                    let gx = slot(grads, *x, g.len());
                    for bi in 0..*batch {
                        let base = bi * rows * cols;
                        for i in 0..rows {
                            for j in 0..cols {
                                gx[base + i * cols + j] += g[base + j * rows + i];
                            }
                        }
                    }
                }
            }
            Op::Gather { table, ids, width } => {
                if self.needs(*table) {
                    let n = self.value(*table).len();
                    let gt = slot(grads, *table, n);
                    for (row, &id) in ids.iter().enumerate() {
                        for (d, v) in gt[id * width..(id + 1) * width]
                            .iter_mut()
                            .zip(&g[row * width..(row + 1) * width])
                        {
                            *d += v;
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let g0 = g[0];
                self.acc_map(grads, *x, &[], move |_, _| g0);
            }
            Op::CrossEntropy {
                pred,
                gold,
                weights,
                classes,
            } => {
                if self.needs(*pred) {
                    let pv = self.value(*pred);
                    let gp = slot(grads, *pred, pv.len());
                    for (idx, ((s, p), y)) in gp.iter_mut().zip(pv).zip(gold).enumerate() {
                        let w = weights[idx / classes];
                        if w != 0.0 && *y != 0.0 && *p > LOG_FLOOR {
                            *s -= g[0] * w * y / p;
                        }
                    }
                }
            }
            Op::BinaryCrossEntropy {
                pred,
                gold,
                weights,
                classes,
            } => {
                if self.needs(*pred) {
                    let pv = self.value(*pred);
                    let gp = slot(grads, *pred, pv.len());
                    for (idx, ((s, p), y)) in gp.iter_mut().zip(pv).zip(gold).enumerate() {
                        let w = weights[idx / classes];
                        if w == 0.0 {
                            continue;
                        }
                        let mut d = 0.0;
                        if *p > LOG_FLOOR {
                            d -= y / p;
                        }
                        if 1.0 - *p > LOG_FLOOR {
                            d += (1.0 - y) / (1.0 - p);
                        }
                        *s += g[0] * w * d;
                    }
                }
            }
        }
    }

    /// `grad[x] += f(g_i, x_i)` elementwise; with an empty `g` the closure
    /// receives 0 for `g_i` and is broadcast over `x`.
    fn acc_map(
        &self,
        grads: &mut [Option<Vec<f64>>],
        x: Var,
        g: &[f64],
        f: impl Fn(f64, f64) -> f64,
    ) {
        if !self.needs(x) {
            return;
        }
        let xv = self.value(x);
        let gx = slot(grads, x, xv.len());
        if g.is_empty() {
            for (s, xi) in gx.iter_mut().zip(xv) {
                *s += f(0.0, *xi);
            }
        } else {
            for ((s, gi), xi) in gx.iter_mut().zip(g).zip(xv) {
                *s += f(*gi, *xi);
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

/// Leaf gradients produced by one [`Tape::backward`] call.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    params: Vec<(ParamId, Vec<f64>)>,
    leaves: Vec<(Var, Vec<f64>)>,
}

impl Gradients {
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params.iter().map(|(id, g)| (*id, g.as_slice()))
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.as_slice())
    }

    /// Gradient of an input leaf created with `requires_grad`. Leaves the loss
    /// does not depend on report `None`.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.leaves
            .iter()
            .find(|(l, _)| *l == v)
            .map(|(_, g)| g.as_slice())
    }
}
