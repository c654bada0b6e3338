use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{kernels, Op, Tape, Var, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::tensor::numel;

/// Elementwise operations accepted by [`Tape::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Log,
    Relu,
    Scale(f64),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Tape<'_> {
    /// Batched matrix product `[.., p, q] · [.., q, r]`. Batch dimensions must
    /// match, or one side must be unbatched (rank 2 or all-ones batch dims).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let (p, q) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (q2, r) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if q != q2 {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let bda = &sa[..sa.len() - 2];
        let bdb = &sb[..sb.len() - 2];
        let (na, nb) = (numel(bda), numel(bdb));
        let batch_dims: Vec<usize> = if na == 1 {
            bdb.to_vec()
        } else if nb == 1 || bda == bdb {
            bda.to_vec()
        } else {
            return Err(Error::dim("matmul", &sa, &sb));
        };
        if na != 1 && nb != 1 && bda != bdb {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let batch = numel(&batch_dims);
        let (a_batched, b_batched) = (na != 1, nb != 1);
        let mut out = vec![0.0; batch * p * r];
        {
            let av = self.value(a);
            let bv = self.value(b);
            for bi in 0..batch {
                let ao = if a_batched { bi * p * q } else { 0 };
                let bo = if b_batched { bi * q * r } else { 0 };
                kernels::mm_acc(
                    &av[ao..ao + p * q],
                    &bv[bo..bo + q * r],
                    &mut out[bi * p * r..(bi + 1) * p * r],
                    p,
                    q,
                    r,
                );
            }
        }
        let mut shape = batch_dims;
        shape.push(p);
        shape.push(r);
        Ok(self.node(
            shape,
            out,
            Op::MatMul {
                a,
                b,
                batch,
                a_batched,
                b_batched,
                p,
                q,
                r,
            },
            &[a, b],
        ))
    }

    pub fn elementwise(&mut self, op: Elementwise, args: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if args.len() != arity {
            return Err(Error::contract(format!(
                "{op:?} takes {arity} operand(s), got {}",
                args.len()
            )));
        }
        match op {
            Elementwise::Add => self.add(args[0], args[1]),
            Elementwise::Sub => self.sub(args[0], args[1]),
            Elementwise::Mul => self.mul(args[0], args[1]),
            Elementwise::Sigmoid => Ok(self.sigmoid(args[0])),
            Elementwise::Tanh => Ok(self.tanh(args[0])),
            Elementwise::Log => self.log(args[0]),
            Elementwise::Relu => Ok(self.relu(args[0])),
            Elementwise::Scale(c) => Ok(self.scale(args[0], c)),
        }
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Vec<usize>, Vec<f64>)> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(name, self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok((self.shape(a).to_vec(), out))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64) -> (Vec<usize>, Vec<f64>) {
        let out = self.value(x).iter().map(|v| f(*v)).collect();
        (self.shape(x).to_vec(), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (s, d) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.node(s, d, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (s, d) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.node(s, d, Op::Sub(a, b), &[a, b]))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (s, d) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.node(s, d, Op::Mul(a, b), &[a, b]))
    }

    /// `x[.., f] + bias[f]` (bias may also be `[1, f]`).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let f = *self.shape(x).last().unwrap_or(&1);
        let bs = self.shape(bias);
        if numel(bs) != f || bs.last() != Some(&f) {
            return Err(Error::dim("add_bias", self.shape(x), bs));
        }
        let mut out = self.value(x).to_vec();
        let bv = self.value(bias);
        for row in out.chunks_mut(f) {
            for (o, b) in row.iter_mut().zip(bv) {
                *o += b;
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.node(shape, out, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let (s, d) = self.unary(x, |v| v * c);
        self.node(s, d, Op::Scale(x, c), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let (s, d) = self.unary(x, sigmoid);
        self.node(s, d, Op::Sigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let (s, d) = self.unary(x, libm::tanh);
        self.node(s, d, Op::Tanh(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let (s, d) = self.unary(x, |v| if v > 0.0 { v } else { 0.0 });
        self.node(s, d, Op::Relu(x), &[x])
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive argument {bad}"),
            });
        }
        let (s, d) = self.unary(x, libm::log);
        Ok(self.node(s, d, Op::Log(x), &[x]))
    }

    /// Softmax over the last dimension with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.masked_softmax(x, None)
    }

    /// Softmax over the last dimension where `keep[j] == false` forces
    /// probability exactly 0 at column `j` of every row.
    pub fn masked_softmax(&mut self, x: Var, keep: Option<&[bool]>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let c = *shape.last().ok_or_else(|| Error::contract("softmax of a scalar"))?;
        if let Some(k) = keep {
            if k.len() != c {
                return Err(Error::dim("masked_softmax", &shape, &[k.len()]));
            }
            if !k.iter().any(|b| *b) {
                return Err(Error::contract("softmax with every position masked"));
            }
        }
        let kept = |j: usize| keep.map_or(true, |k| k[j]);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(c) {
            let mut max = f64::NEG_INFINITY;
            for (j, v) in row.iter().enumerate() {
                if kept(j) && *v > max {
                    max = *v;
                }
            }
            let mut sum = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                if kept(j) {
                    *v = libm::exp(*v - max);
                    sum += *v;
                } else {
                    *v = 0.0;
                }
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Ok(self.node(shape, out, Op::Softmax(x), &[x]))
    }

    /// Per-row normalisation over the last dimension followed by `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let f = *shape.last().ok_or_else(|| Error::contract("layer_norm of a scalar"))?;
        if numel(self.shape(gain)) != f {
            return Err(Error::dim("layer_norm gain", &shape, self.shape(gain)));
        }
        if numel(self.shape(bias)) != f {
            return Err(Error::dim("layer_norm bias", &shape, self.shape(bias)));
        }
        if !(eps > 0.0) {
            return Err(Error::contract("layer_norm eps must be positive"));
        }
        let xv = self.value(x);
        let gv = self.value(gain);
        let bv = self.value(bias);
        let rows = xv.len() / f;
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * f..(r + 1) * f];
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let is = 1.0 / libm::sqrt(var + eps);
            inv_std[r] = is;
            for j in 0..f {
                let h = (row[j] - mean) * is;
                xhat[r * f + j] = h;
                out[r * f + j] = gv[j] * h + bv[j];
            }
        }
        Ok(self.node(
            shape,
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        ))
    }

    /// Concatenation along `axis`; every other dimension must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::contract("concat of no tensors"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::contract(format!("concat axis {axis} out of range for {base:?}")));
        }
        if inputs.len() == 1 {
            return Ok(first);
        }
        let mut sizes = Vec::with_capacity(inputs.len());
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            sizes.push(s[axis]);
        }
        let outer = numel(&base[..axis]);
        let inner = numel(&base[axis + 1..]);
        let total: usize = sizes.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &s) in inputs.iter().zip(&sizes) {
                out.extend_from_slice(&self.value(*v)[o * s * inner..(o + 1) * s * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(self.node(
            shape,
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                sizes,
                outer,
                inner,
            },
            inputs,
        ))
    }

    /// `x[.., start..start+len, ..]` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::contract(format!(
                "slice {start}..{} on axis {axis} of {shape:?}",
                start + len
            )));
        }
        if start == 0 && len == shape[axis] {
            return Ok(x);
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let src_axis = shape[axis];
        let xv = self.value(x);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&xv[(o * src_axis + start) * inner..(o * src_axis + start + len) * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        Ok(self.node(
            new_shape,
            out,
            Op::Slice {
                x,
                outer,
                inner,
                src_axis,
                start,
                len,
            },
            &[x],
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != numel(self.shape(x)) {
            return Err(Error::dim("reshape", self.shape(x), shape));
        }
        let data = self.value(x).to_vec();
        Ok(self.node(shape.to_vec(), data, Op::Reshape(x), &[x]))
    }

    /// Swaps the last two dimensions.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::contract(format!("transpose needs rank >= 2, got {shape:?}")));
        }
        let n = shape.len();
        let (rows, cols) = (shape[n - 2], shape[n - 1]);
        let batch = numel(&shape[..n - 2]);
        let xv = self.value(x);
        let mut out = vec![0.0; xv.len()];
        for bi in 0..batch {
            let base = bi * rows * cols;
            for i in 0..rows {
                for j in 0..cols {
                    out[base + j * rows + i] = xv[base + i * cols + j];
                }
            }
        }
        let mut new_shape = shape;
        new_shape.swap(n - 2, n - 1);
        Ok(self.node(new_shape, out, Op::Transpose { x, batch, rows, cols }, &[x]))
    }

    /// Row lookup `table[ids[t], :]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(Error::contract(format!("gather_rows needs a matrix, got {shape:?}")));
        }
        if ids.is_empty() {
            return Err(Error::contract("gather_rows with no ids"));
        }
        let (size, width) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&id| id >= size) {
            return Err(Error::Vocabulary { id: bad, size });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * width);
        for &id in ids {
            out.extend_from_slice(&tv[id * width..(id + 1) * width]);
        }
        Ok(self.node(
            vec![ids.len(), width],
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
                width,
            },
            &[table],
        ))
    }

    /// Sum of all entries, as a rank-0 scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().sum();
        self.node(Vec::new(), vec![s], Op::Sum(x), &[x])
    }

    /// `-Σ_rows w_row Σ_c gold · ln(max(pred, 1e-12))`.
    ///
    /// `row_weights` defaults to all ones; a zero weight masks a row out.
    pub fn cross_entropy(&mut self, pred: Var, gold: &[f64], row_weights: Option<&[f64]>) -> Result<Var> {
        let (classes, weights) = self.loss_layout("cross_entropy", pred, gold, row_weights)?;
        let pv = self.value(pred);
        let mut loss = 0.0;
        for (idx, (p, y)) in pv.iter().zip(gold).enumerate() {
            let w = weights[idx / classes];
            if w != 0.0 && *y != 0.0 {
                loss -= w * y * libm::log(p.max(LOG_FLOOR));
            }
        }
        Ok(self.node(
            Vec::new(),
            vec![loss],
            Op::CrossEntropy {
                pred,
                gold: gold.to_vec(),
                weights,
                classes,
            },
            &[pred],
        ))
    }

    /// Per-entry binary cross-entropy summed over all unmasked rows.
    pub fn binary_cross_entropy(&mut self, pred: Var, gold: &[f64], row_weights: Option<&[f64]>) -> Result<Var> {
        let (classes, weights) = self.loss_layout("binary_cross_entropy", pred, gold, row_weights)?;
        let pv = self.value(pred);
        let mut loss = 0.0;
        for (idx, (p, y)) in pv.iter().zip(gold).enumerate() {
            let w = weights[idx / classes];
            if w != 0.0 {
                loss -= w
                    * (y * libm::log(p.max(LOG_FLOOR)) + (1.0 - y) * libm::log((1.0 - p).max(LOG_FLOOR)));
            }
        }
        Ok(self.node(
            Vec::new(),
            vec![loss],
            Op::BinaryCrossEntropy {
                pred,
                gold: gold.to_vec(),
                weights,
                classes,
            },
            &[pred],
        ))
    }

    fn loss_layout(
        &self,
        op: &'static str,
        pred: Var,
        gold: &[f64],
        row_weights: Option<&[f64]>,
    ) -> Result<(usize, Vec<f64>)> {
        let shape = self.shape(pred);
        let classes = *shape.last().ok_or_else(|| Error::contract(format!("{op} of a scalar")))?;
        if gold.len() != numel(shape) {
            return Err(Error::dim(op, shape, &[gold.len()]));
        }
        let rows = gold.len() / classes;
        let weights = match row_weights {
            Some(w) if w.len() != rows => return Err(Error::dim(op, shape, &[w.len()])),
            Some(w) => w.to_vec(),
            None => vec![1.0; rows],
        };
        Ok((classes, weights))
    }
}
