//! Operation recording and the reverse pass.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::params::{ParamId, ParamStore};
use super::{axis_split, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Concat(Vec<usize>, usize),
    Slice { src: usize, axis: usize, start: usize },
    Repeat { src: usize, axis: usize, n: usize },
    Gather { src: usize, rows: Vec<usize> },
    SumAll(usize),
    MeanAll(usize),
    Sum { src: usize, axis: usize },
    Mean { src: usize, axis: usize },
    Softmax { src: usize, axis: usize },
    LayerNorm { src: usize, inv_std: Vec<f64> },
    Relu(usize),
    Gelu(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
    Square(usize),
    LogCosh(usize),
    Clamp { src: usize, lo: f64, hi: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a computation graph in evaluation order.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// `log(cosh(x))` without overflow for large `|x|`.
pub fn logcosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn is_suffix(short: &[usize], long: &[usize]) -> bool {
    short.len() <= long.len() && long[long.len() - short.len()..] == *short
}

/// Sums `g` down to `n` elements by folding the leading repetitions.
fn reduce_to(g: &Tensor, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    if g.numel() == n {
        return Tensor::new(shape.to_vec(), g.data().to_vec()).expect("same numel");
    }
    let mut out = vec![0.0; n];
    for (i, v) in g.data().iter().enumerate() {
        out[i % n] += v;
    }
    Tensor::new(shape.to_vec(), out).expect("reduced shape")
}

// out[n,m] += a[n,k] * b[k,m]
fn mm(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

// out[n,k] += g[n,m] * b[k,m]^T
fn mm_nt(g: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b[p * m..(p + 1) * m];
            out[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

// out[k,m] += a[n,k]^T * g[n,m]
fn mm_tn(a: &[f64], g: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

fn transpose_last(t: &Tensor) -> Tensor {
    let r = t.rank();
    let (rows, cols) = (t.shape()[r - 2], t.shape()[r - 1]);
    let batch = t.numel() / (rows * cols);
    let mut out = vec![0.0; t.numel()];
    let d = t.data();
    for b in 0..batch {
        let base = b * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                out[base + j * rows + i] = d[base + i * cols + j];
            }
        }
    }
    let mut shape = t.shape().to_vec();
    shape.swap(r - 2, r - 1);
    Tensor::new(shape, out).expect("transpose")
}

fn removed_axis(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.remove(axis);
    if s.is_empty() {
        s.push(1);
    }
    s
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::DetachedNode);
        }
        Ok(v.idx)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// An input leaf whose gradient is reported by [`Tape::backward`].
    pub fn var(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: impl FnOnce(usize) -> Op) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.nodes[ia].value.map(f);
        let rg = self.rg(ia);
        Ok(self.push(value, op(ia), rg))
    }

    /// Elementwise op where one operand's shape may be a suffix of the other's.
    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(usize, usize) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let (sa, sb) = (ta.shape(), tb.shape());
        let value = if is_suffix(sb, sa) {
            let n = tb.numel();
            Tensor::from_fn(sa, |i| f(ta.data()[i], tb.data()[i % n]))
        } else if is_suffix(sa, sb) {
            let n = ta.numel();
            Tensor::from_fn(sb, |i| f(ta.data()[i % n], tb.data()[i]))
        } else {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        };
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(value, op(ia, ib), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| x * c, |i| Op::Scale(i, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| x + c, Op::AddScalar)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    /// `[.., n, k] x [k, m]` with a shared right operand, or a batched
    /// product when both operands carry the same leading dimensions.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let (sa, sb) = (ta.shape().to_vec(), tb.shape().to_vec());
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (n, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, m) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(mismatch());
        }
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(m);
        let mut out = vec![0.0; shape.iter().product()];
        if sb.len() == 2 {
            let rows = ta.numel() / k;
            mm(ta.data(), tb.data(), rows, k, m, &mut out);
        } else {
            if sa.len() != sb.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
                return Err(mismatch());
            }
            let batch = ta.numel() / (n * k);
            for bi in 0..batch {
                mm(
                    &ta.data()[bi * n * k..(bi + 1) * n * k],
                    &tb.data()[bi * k * m..(bi + 1) * k * m],
                    n,
                    k,
                    m,
                    &mut out[bi * n * m..(bi + 1) * n * m],
                );
            }
        }
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul(ia, ib), rg))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        if self.nodes[ia].value.rank() < 2 {
            return Err(Error::ShapeMismatch {
                op: "transpose",
                lhs: self.nodes[ia].value.shape().to_vec(),
                rhs: vec![],
            });
        }
        let value = transpose_last(&self.nodes[ia].value);
        let rg = self.rg(ia);
        Ok(self.push(value, Op::Transpose(ia), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.nodes[ia].value.reshaped(shape)?;
        let rg = self.rg(ia);
        Ok(self.push(value, Op::Reshape(ia), rg))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect::<Result<_>>()?;
        let first = self.nodes[idx[0]].value.shape().to_vec();
        let mut total = 0;
        for &i in &idx {
            let s = self.nodes[i].value.shape();
            let same = s.len() == first.len()
                && axis < s.len()
                && s.iter().zip(&first).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !same {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&first, axis);
        let mut shape = first.clone();
        shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &i in &idx {
                let t = &self.nodes[i].value;
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(Tensor::new(shape, out)?, Op::Concat(idx, axis), rg))
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        if axis >= t.rank() || start + len > t.shape()[axis] {
            return Err(Error::ShapeMismatch {
                op: "slice",
                lhs: t.shape().to_vec(),
                rhs: vec![axis, start, len],
            });
        }
        let (outer, full, inner) = axis_split(t.shape(), axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let rg = self.rg(ia);
        Ok(self.push(Tensor::new(shape, out)?, Op::Slice { src: ia, axis, start }, rg))
    }

    /// Inserts a new axis of size `n` at position `axis` by copying.
    pub fn repeat(&mut self, a: Var, axis: usize, n: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        if axis > t.rank() {
            return Err(Error::ShapeMismatch {
                op: "repeat",
                lhs: t.shape().to_vec(),
                rhs: vec![axis],
            });
        }
        let outer: usize = t.shape()[..axis].iter().product();
        let inner: usize = t.shape()[axis..].iter().product();
        let mut out = Vec::with_capacity(t.numel() * n);
        for o in 0..outer {
            let chunk = &t.data()[o * inner..(o + 1) * inner];
            for _ in 0..n {
                out.extend_from_slice(chunk);
            }
        }
        let mut shape = t.shape().to_vec();
        shape.insert(axis, n);
        let rg = self.rg(ia);
        Ok(self.push(Tensor::new(shape, out)?, Op::Repeat { src: ia, axis, n }, rg))
    }

    /// Selects entries along the first axis.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        let r = t.shape()[0];
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::ShapeMismatch {
                op: "gather_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![bad],
            });
        }
        let inner = t.numel() / r;
        let mut out = Vec::with_capacity(rows.len() * inner);
        for &i in rows {
            out.extend_from_slice(&t.data()[i * inner..(i + 1) * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[0] = rows.len();
        let rg = self.rg(ia);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Gather {
                src: ia,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let s = self.nodes[ia].value.data().iter().sum();
        let rg = self.rg(ia);
        Ok(self.push(Tensor::scalar(s), Op::SumAll(ia), rg))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(ia);
        Ok(self.push(Tensor::scalar(s), Op::MeanAll(ia), rg))
    }

    fn reduce_axis(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        if axis >= t.rank() {
            return Err(Error::ShapeMismatch {
                op: "reduce",
                lhs: t.shape().to_vec(),
                rhs: vec![axis],
            });
        }
        let (outer, len, inner) = axis_split(t.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    out[o * inner + i] += t.data()[base + i];
                }
            }
        }
        if mean {
            out.iter_mut().for_each(|v| *v /= len as f64);
        }
        let shape = removed_axis(t.shape(), axis);
        let rg = self.rg(ia);
        let op = if mean {
            Op::Mean { src: ia, axis }
        } else {
            Op::Sum { src: ia, axis }
        };
        Ok(self.push(Tensor::new(shape, out)?, op, rg))
    }

    /// Sums over `axis`, removing it.
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, false)
    }

    /// Averages over `axis`, removing it.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, true)
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        if axis >= t.rank() {
            return Err(Error::ShapeMismatch {
                op: "softmax",
                lhs: t.shape().to_vec(),
                rhs: vec![axis],
            });
        }
        let (outer, len, inner) = axis_split(t.shape(), axis);
        let mut out = t.data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| out[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in 0..len {
                    let e = (out[at(l)] - max).exp();
                    out[at(l)] = e;
                    z += e;
                }
                for l in 0..len {
                    out[at(l)] /= z;
                }
            }
        }
        let shape = t.shape().to_vec();
        let rg = self.rg(ia);
        Ok(self.push(Tensor::new(shape, out)?, Op::Softmax { src: ia, axis }, rg))
    }

    /// Normalizes the last axis to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let t = &self.nodes[ia].value;
        let d = *t.shape().last().expect("rank >= 1");
        let rows = t.numel() / d;
        let mut out = vec![0.0; t.numel()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let x = &t.data()[r * d..(r + 1) * d];
            let mu = x.iter().sum::<f64>() / d as f64;
            let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            for (o, v) in out[r * d..(r + 1) * d].iter_mut().zip(x) {
                *o = (v - mu) * is;
            }
            inv_std.push(is);
        }
        let shape = t.shape().to_vec();
        let rg = self.rg(ia);
        Ok(self.push(Tensor::new(shape, out)?, Op::LayerNorm { src: ia, inv_std }, rg))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.max(0.0), Op::Relu)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, gelu, Op::Gelu)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::exp, Op::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::ln, Op::Log)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::sqrt, Op::Sqrt)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x * x, Op::Square)
    }

    pub fn logcosh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, logcosh, Op::LogCosh)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(a, |x| x.clamp(lo, hi), |src| Op::Clamp { src, lo, hi })
    }

    /// Reverse pass from a one-element `loss`.
    ///
    /// Returns gradients for every leaf created with [`Tape::var`] or
    /// [`Tape::param`]; intermediate gradients are dropped as soon as they
    /// have been propagated.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.idx(loss)?;
        let lv = &self.nodes[li].value;
        if lv.numel() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; li + 1];
        grads[li] = Some(Tensor::ones(lv.shape()));
        let mut leaves = BTreeMap::new();
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            match &self.nodes[i].op {
                Op::Leaf | Op::Param(_) => {
                    leaves.insert(i, g);
                }
                _ => self.propagate(i, &g, &mut grads),
            }
        }
        let params = leaves
            .iter()
            .filter_map(|(&i, _)| match self.nodes[i].op {
                Op::Param(id) => Some((i, id)),
                _ => None,
            })
            .collect();
        Ok(Gradients {
            tape: self.id,
            leaves,
            params,
        })
    }

    /// Runs [`Tape::backward`] and adds parameter gradients into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        for &(node, id) in &grads.params {
            store.accumulate_grad(id, &grads.leaves[&node]);
        }
        Ok(grads)
    }

    fn send(&self, grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
        if !self.nodes[i].requires_grad {
            return;
        }
        match &mut grads[i] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[i].value;
        let val = |j: usize| &self.nodes[j].value;
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                self.send(grads, *a, reduce_to(g, val(*a).shape()));
                self.send(grads, *b, reduce_to(g, val(*b).shape()));
            }
            Op::Sub(a, b) => {
                self.send(grads, *a, reduce_to(g, val(*a).shape()));
                self.send(grads, *b, reduce_to(&g.map(|v| -v), val(*b).shape()));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if self.rg(*a) {
                    let n = tb.numel();
                    let full = Tensor::from_fn(g.shape(), |k| g.data()[k] * tb.data()[k % n]);
                    self.send(grads, *a, reduce_to(&full, ta.shape()));
                }
                if self.rg(*b) {
                    let n = ta.numel();
                    let full = Tensor::from_fn(g.shape(), |k| g.data()[k] * ta.data()[k % n]);
                    self.send(grads, *b, reduce_to(&full, tb.shape()));
                }
            }
            Op::Scale(a, c) => self.send(grads, *a, g.map(|v| v * c)),
            Op::AddScalar(a) => self.send(grads, *a, g.clone()),
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let sa = ta.shape();
                let sb = tb.shape();
                let (n, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let m = sb[sb.len() - 1];
                let mut ga = vec![0.0; ta.numel()];
                let mut gb = vec![0.0; tb.numel()];
                if sb.len() == 2 {
                    let rows = ta.numel() / k;
                    if self.rg(*a) {
                        mm_nt(g.data(), tb.data(), rows, k, m, &mut ga);
                    }
                    if self.rg(*b) {
                        mm_tn(ta.data(), g.data(), rows, k, m, &mut gb);
                    }
                } else {
                    let batch = ta.numel() / (n * k);
                    for bi in 0..batch {
                        let gs = &g.data()[bi * n * m..(bi + 1) * n * m];
                        let asl = &ta.data()[bi * n * k..(bi + 1) * n * k];
                        let bsl = &tb.data()[bi * k * m..(bi + 1) * k * m];
                        if self.rg(*a) {
                            mm_nt(gs, bsl, n, k, m, &mut ga[bi * n * k..(bi + 1) * n * k]);
                        }
                        if self.rg(*b) {
                            mm_tn(asl, gs, n, k, m, &mut gb[bi * k * m..(bi + 1) * k * m]);
                        }
                    }
                }
                if self.rg(*a) {
                    self.send(grads, *a, Tensor::new(sa.to_vec(), ga).expect("ga"));
                }
                if self.rg(*b) {
                    self.send(grads, *b, Tensor::new(sb.to_vec(), gb).expect("gb"));
                }
            }
            Op::Transpose(a) => self.send(grads, *a, transpose_last(g)),
            Op::Reshape(a) => {
                self.send(grads, *a, g.reshaped(val(*a).shape()).expect("reshape back"))
            }
            Op::Concat(parts, axis) => {
                let (outer, total, inner) = axis_split(out.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).shape()[*axis];
                    if self.rg(p) {
                        let mut piece = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            piece.extend_from_slice(&g.data()[base..base + len * inner]);
                        }
                        self.send(grads, p, Tensor::new(val(p).shape().to_vec(), piece).expect("concat"));
                    }
                    offset += len;
                }
            }
            Op::Slice { src, axis, start } => {
                let s = val(*src).shape();
                let (outer, full, inner) = axis_split(s, *axis);
                let len = out.shape()[*axis];
                let mut back = vec![0.0; val(*src).numel()];
                for o in 0..outer {
                    let dst = (o * full + start) * inner;
                    let from = o * len * inner;
                    back[dst..dst + len * inner].copy_from_slice(&g.data()[from..from + len * inner]);
                }
                self.send(grads, *src, Tensor::new(s.to_vec(), back).expect("slice"));
            }
            Op::Repeat { src, axis, n } => {
                let s = val(*src).shape();
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[*axis..].iter().product();
                let mut back = vec![0.0; val(*src).numel()];
                for o in 0..outer {
                    for r in 0..*n {
                        let from = (o * n + r) * inner;
                        for k in 0..inner {
                            back[o * inner + k] += g.data()[from + k];
                        }
                    }
                }
                self.send(grads, *src, Tensor::new(s.to_vec(), back).expect("repeat"));
            }
            Op::Gather { src, rows } => {
                let s = val(*src).shape();
                let inner = val(*src).numel() / s[0];
                let mut back = vec![0.0; val(*src).numel()];
                for (j, &r) in rows.iter().enumerate() {
                    for k in 0..inner {
                        back[r * inner + k] += g.data()[j * inner + k];
                    }
                }
                self.send(grads, *src, Tensor::new(s.to_vec(), back).expect("gather"));
            }
            Op::SumAll(a) => self.send(grads, *a, Tensor::full(val(*a).shape(), g.item())),
            Op::MeanAll(a) => {
                let n = val(*a).numel() as f64;
                self.send(grads, *a, Tensor::full(val(*a).shape(), g.item() / n))
            }
            Op::Sum { src, axis } | Op::Mean { src, axis } => {
                let s = val(*src).shape();
                let (outer, len, inner) = axis_split(s, *axis);
                let c = if matches!(self.nodes[i].op, Op::Mean { .. }) {
                    1.0 / len as f64
                } else {
                    1.0
                };
                let mut back = vec![0.0; val(*src).numel()];
                for o in 0..outer {
                    for l in 0..len {
                        for k in 0..inner {
                            back[(o * len + l) * inner + k] = g.data()[o * inner + k] * c;
                        }
                    }
                }
                self.send(grads, *src, Tensor::new(s.to_vec(), back).expect("reduce"));
            }
            Op::Softmax { src, axis } => {
                let (outer, len, inner) = axis_split(out.shape(), *axis);
                let y = out.data();
                let mut back = vec![0.0; out.numel()];
                for o in 0..outer {
                    for k in 0..inner {
                        let at = |l: usize| (o * len + l) * inner + k;
                        let dot: f64 = (0..len).map(|l| g.data()[at(l)] * y[at(l)]).sum();
                        for l in 0..len {
                            back[at(l)] = y[at(l)] * (g.data()[at(l)] - dot);
                        }
                    }
                }
                self.send(grads, *src, Tensor::new(out.shape().to_vec(), back).expect("softmax"));
            }
            Op::LayerNorm { src, inv_std } => {
                let d = *out.shape().last().expect("rank");
                let y = out.data();
                let mut back = vec![0.0; out.numel()];
                for (r, is) in inv_std.iter().enumerate() {
                    let gs = &g.data()[r * d..(r + 1) * d];
                    let ys = &y[r * d..(r + 1) * d];
                    let mg = gs.iter().sum::<f64>() / d as f64;
                    let mgy = gs.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for c in 0..d {
                        back[r * d + c] = is * (gs[c] - mg - ys[c] * mgy);
                    }
                }
                self.send(grads, *src, Tensor::new(out.shape().to_vec(), back).expect("layer_norm"));
            }
            Op::Relu(a) => {
                let x = val(*a);
                let back = Tensor::from_fn(x.shape(), |k| if x.data()[k] > 0.0 { g.data()[k] } else { 0.0 });
                self.send(grads, *a, back);
            }
            Op::Gelu(a) => {
                let x = val(*a);
                let back = Tensor::from_fn(x.shape(), |k| g.data()[k] * gelu_grad(x.data()[k]));
                self.send(grads, *a, back);
            }
            Op::Tanh(a) => {
                let back = Tensor::from_fn(out.shape(), |k| g.data()[k] * (1.0 - out.data()[k].powi(2)));
                self.send(grads, *a, back);
            }
            Op::Exp(a) => {
                let back = Tensor::from_fn(out.shape(), |k| g.data()[k] * out.data()[k]);
                self.send(grads, *a, back);
            }
            Op::Log(a) => {
                let x = val(*a);
                let back = Tensor::from_fn(x.shape(), |k| g.data()[k] / x.data()[k]);
                self.send(grads, *a, back);
            }
            Op::Sqrt(a) => {
                let back = Tensor::from_fn(out.shape(), |k| g.data()[k] / (2.0 * out.data()[k]));
                self.send(grads, *a, back);
            }
            Op::Square(a) => {
                let x = val(*a);
                let back = Tensor::from_fn(x.shape(), |k| 2.0 * g.data()[k] * x.data()[k]);
                self.send(grads, *a, back);
            }
            Op::LogCosh(a) => {
                let x = val(*a);
                let back = Tensor::from_fn(x.shape(), |k| g.data()[k] * x.data()[k].tanh());
                self.send(grads, *a, back);
            }
            Op::Clamp { src, lo, hi } => {
                let x = val(*src);
                let back = Tensor::from_fn(x.shape(), |k| {
                    let v = x.data()[k];
                    if v >= *lo && v <= *hi {
                        g.data()[k]
                    } else {
                        0.0
                    }
                });
                self.send(grads, *src, back);
            }
        }
    }
}

/// Leaf gradients produced by one reverse pass.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    leaves: BTreeMap<usize, Tensor>,
    params: Vec<(usize, ParamId)>,
}

impl Gradients {
    /// Gradient of a leaf, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.leaves.get(&v.idx)
    }

    /// Gradient of a parameter summed over every time it entered the tape.
    pub fn param(&self, id: ParamId) -> Option<Tensor> {
        let mut acc: Option<Tensor> = None;
        for &(node, pid) in &self.params {
            if pid == id {
                let g = &self.leaves[&node];
                match &mut acc {
                    Some(a) => a.add_assign(g),
                    None => acc = Some(g.clone()),
                }
            }
        }
        acc
    }

    pub fn wrt(&self, v: Var) -> Result<&Tensor> {
        if v.tape != self.tape {
            return Err(Error::DetachedNode);
        }
        self.get(v)
            .ok_or_else(|| Error::MissingGrad(format!("node {}", v.idx)))
    }
}
