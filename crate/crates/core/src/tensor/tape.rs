use std::cell::{Ref, RefCell};
use std::fmt;

use super::kernels::{gemm, MatRef};
use super::Tensor;
use crate::error::{Error, Result};

/// Record of tensor operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it and a reverse sweep is a valid topological traversal.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

enum Op {
    Leaf,
    Constant,
    MatMul { a: usize, b: usize },
    BatchMatMul { a: usize, b: usize, broadcast_a: bool },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    AddScalar { a: usize },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Exp { a: usize },
    Log { a: usize },
    Relu { a: usize },
    Softmax { a: usize },
    Sum { a: usize },
    Mean { a: usize },
    SumLast { a: usize },
    Reshape { a: usize },
    Transpose { a: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Clamp { a: usize, lo: f64, hi: f64 },
    Gather { a: usize, index: Vec<usize> },
    LinearContract { u: usize, w: usize, b: usize, v: usize, p: usize, q: usize },
    Quantile { a: usize, weights: Vec<(usize, f64)> },
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients of a scalar root with respect to every node that requires them.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, or zeros of its shape when it did not influence the root.
    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&var.shape()))
    }
}

fn suffix_broadcastable(a: &[usize], b: &[usize]) -> bool {
    b.len() <= a.len() && a[a.len() - b.len()..] == *b
}

fn split_last(shape: &[usize]) -> (usize, usize) {
    let last = *shape.last().unwrap_or(&1);
    let numel: usize = shape.iter().product();
    (numel / last.max(1), last)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Constant, false)
    }

    fn push_node(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].requires_grad)
        };
        let op = if requires_grad { op } else { Op::Constant };
        Ok(self.push_node(value, op, requires_grad))
    }

    fn value(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn check_same(&self, vars: &[Var<'_>]) {
        for v in vars {
            assert!(std::ptr::eq(self, v.tape), "variables from different tapes");
        }
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat<'t>(&'t self, vars: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        self.check_same(vars);
        let first = vars
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?
            .shape();
        if axis >= first.len() {
            return Err(Error::shape("concat", format!("axis {axis} for {first:?}")));
        }
        let mut out_shape = first.clone();
        out_shape[axis] = 0;
        for v in vars {
            let s = v.shape();
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", format!("{first:?} vs {s:?}")));
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        {
            let nodes = self.nodes.borrow();
            for o in 0..outer {
                for v in vars {
                    let t = &nodes[v.id].value;
                    let chunk = t.shape()[axis] * inner;
                    data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
                }
            }
        }
        let ids: Vec<usize> = vars.iter().map(|v| v.id).collect();
        self.push(
            "concat",
            Tensor::new(out_shape, data)?,
            Op::Concat {
                inputs: ids.clone(),
                axis,
            },
            &ids,
        )
    }

    /// Fused dense layer contracted against a vector:
    /// `out[r, i] = Σ_j (u·w + b)[r, i·q + j] · v[r, j]`.
    ///
    /// `u` is `[.., m]`, `w` is `[m, p·q]`, `b` is `[p·q]`, `v` is `[.., q]`
    /// with the same leading extents as `u`; the result is `[.., p]`. The
    /// `p × q` matrix per row is never stored on the tape.
    pub fn linear_contract<'t>(
        &'t self,
        u: Var<'t>,
        w: Var<'t>,
        b: Var<'t>,
        v: Var<'t>,
        p: usize,
        q: usize,
    ) -> Result<Var<'t>> {
        self.check_same(&[u, w, b, v]);
        let (us, ws, bs, vs) = (u.shape(), w.shape(), b.shape(), v.shape());
        let (rows, m) = split_last(&us);
        let ok = us.len() >= 1
            && vs.len() == us.len()
            && us[..us.len() - 1] == vs[..vs.len() - 1]
            && vs[vs.len() - 1] == q
            && ws == [m, p * q]
            && bs == [p * q];
        if !ok {
            return Err(Error::shape(
                "linear_contract",
                format!("u {us:?}, w {ws:?}, b {bs:?}, v {vs:?}, p={p}, q={q}"),
            ));
        }
        let out = {
            let nodes = self.nodes.borrow();
            let f = contract_field(&nodes[u.id].value, &nodes[w.id].value, &nodes[b.id].value, rows, m, p * q);
            let vd = nodes[v.id].value.data();
            let mut out = vec![0.0; rows * p];
            for r in 0..rows {
                let fr = &f[r * p * q..(r + 1) * p * q];
                let vr = &vd[r * q..(r + 1) * q];
                for i in 0..p {
                    out[r * p + i] = fr[i * q..(i + 1) * q]
                        .iter()
                        .zip(vr)
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
            out
        };
        let mut shape = us.clone();
        *shape.last_mut().unwrap() = p;
        self.push(
            "linear_contract",
            Tensor::new(shape, out)?,
            Op::LinearContract {
                u: u.id,
                w: w.id,
                b: b.id,
                v: v.id,
                p,
                q,
            },
            &[u.id, w.id, b.id, v.id],
        )
    }

    /// Reverse sweep from a single-element `root`.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        self.check_same(&[root]);
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root.id];
        if root_node.value.numel() != 1 {
            return Err(Error::NotScalar {
                shape: root_node.value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.id + 1];
        if root_node.requires_grad {
            grads[root.id] = Some(vec![1.0]);
        }
        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if node.requires_grad {
                propagate(&nodes, node, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                g.map(|data| {
                    Tensor::new(nodes[id].value.shape().to_vec(), data)
                        .expect("gradient matches node shape")
                })
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn contract_field(u: &Tensor, w: &Tensor, b: &Tensor, rows: usize, m: usize, width: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        f.extend_from_slice(b.data());
    }
    gemm(
        MatRef::new(u.data(), rows, m),
        MatRef::new(w.data(), m, width),
        1.0,
        &mut f,
    );
    f
}

fn grad_slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], id: usize) -> Option<&'g mut Vec<f64>> {
    if !nodes[id].requires_grad {
        return None;
    }
    let n = nodes[id].value.numel();
    Some(grads[id].get_or_insert_with(|| vec![0.0; n]))
}

fn propagate(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = node.value.data();
    match &node.op {
        Op::Leaf | Op::Constant => {}
        Op::MatMul { a, b } => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (k, m) = (bv.shape()[0], bv.shape()[1]);
            let rows = av.numel() / k;
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                gemm(MatRef::new(g, rows, m), MatRef::new(bv.data(), k, m).t(), 1.0, ga);
            }
            if let Some(gb) = grad_slot(grads, nodes, *b) {
                gemm(MatRef::new(av.data(), rows, k).t(), MatRef::new(g, rows, m), 1.0, gb);
            }
        }
        Op::BatchMatMul { a, b, broadcast_a } => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let bs = bv.shape();
            let (batch, k, n) = (bs[0], bs[1], bs[2]);
            let m = av.shape()[av.rank() - 2];
            let a_stride = if *broadcast_a { 0 } else { m * k };
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for i in 0..batch {
                    let off = i * a_stride;
                    gemm(
                        MatRef::new(&g[i * m * n..], m, n),
                        MatRef::new(&bv.data()[i * k * n..], k, n).t(),
                        1.0,
                        &mut ga[off..off + m * k],
                    );
                }
            }
            if let Some(gb) = grad_slot(grads, nodes, *b) {
                for i in 0..batch {
                    let off = i * a_stride;
                    gemm(
                        MatRef::new(&av.data()[off..], m, k).t(),
                        MatRef::new(&g[i * m * n..], m, n),
                        1.0,
                        &mut gb[i * k * n..(i + 1) * k * n],
                    );
                }
            }
        }
        Op::Add { a, b } | Op::Sub { a, b } => {
            let sign = if matches!(node.op, Op::Sub { .. }) { -1.0 } else { 1.0 };
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
            if let Some(gb) = grad_slot(grads, nodes, *b) {
                let nb = gb.len();
                for (i, y) in g.iter().enumerate() {
                    gb[i % nb] += sign * y;
                }
            }
        }
        Op::Mul { a, b } => {
            let (av, bv) = (nodes[*a].value.data(), nodes[*b].value.data());
            let nb = bv.len();
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for (i, y) in g.iter().enumerate() {
                    ga[i] += y * bv[i % nb];
                }
            }
            if let Some(gb) = grad_slot(grads, nodes, *b) {
                for (i, y) in g.iter().enumerate() {
                    gb[i % nb] += y * av[i];
                }
            }
        }
        Op::Scale { a, c } => {
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
            }
        }
        Op::AddScalar { a } | Op::Reshape { a } => {
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
        }
        Op::Tanh { a } => unary_backward(grads, nodes, *a, g, |i| 1.0 - out[i] * out[i]),
        Op::Sigmoid { a } => unary_backward(grads, nodes, *a, g, |i| out[i] * (1.0 - out[i])),
        Op::Exp { a } => unary_backward(grads, nodes, *a, g, |i| out[i]),
        Op::Log { a } => {
            let x = nodes[*a].value.data();
            unary_backward(grads, nodes, *a, g, |i| 1.0 / x[i])
        }
        Op::Relu { a } => {
            let x = nodes[*a].value.data();
            unary_backward(grads, nodes, *a, g, |i| if x[i] > 0.0 { 1.0 } else { 0.0 })
        }
        Op::Clamp { a, lo, hi } => {
            let x = nodes[*a].value.data();
            unary_backward(grads, nodes, *a, g, |i| {
                if x[i] >= *lo && x[i] <= *hi {
                    1.0
                } else {
                    0.0
                }
            })
        }
        Op::Softmax { a } => {
            let (rows, n) = split_last(node.value.shape());
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for r in 0..rows {
                    let y = &out[r * n..(r + 1) * n];
                    let gr = &g[r * n..(r + 1) * n];
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        ga[r * n + j] += y[j] * (gr[j] - dot);
                    }
                }
            }
        }
        Op::Sum { a } => {
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                ga.iter_mut().for_each(|x| *x += g[0]);
            }
        }
        Op::Mean { a } => {
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                let scale = g[0] / ga.len() as f64;
                ga.iter_mut().for_each(|x| *x += scale);
            }
        }
        Op::SumLast { a } => {
            let (_, n) = split_last(nodes[*a].value.shape());
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for (i, x) in ga.iter_mut().enumerate() {
                    *x += g[i / n];
                }
            }
        }
        Op::Transpose { a } => {
            let s = nodes[*a].value.shape();
            let (r, c) = (s[0], s[1]);
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            }
        }
        Op::Concat { inputs, axis } => {
            let shape = node.value.shape();
            let outer: usize = shape[..*axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let total = shape[*axis] * inner;
            let mut offset = 0;
            for &input in inputs {
                let chunk = nodes[input].value.shape()[*axis] * inner;
                if let Some(gi) = grad_slot(grads, nodes, input) {
                    for o in 0..outer {
                        let src = &g[o * total + offset..o * total + offset + chunk];
                        gi[o * chunk..(o + 1) * chunk]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(x, y)| *x += y);
                    }
                }
                offset += chunk;
            }
        }
        Op::Slice { a, axis, start } => {
            let in_shape = nodes[*a].value.shape();
            let len = node.value.shape()[*axis];
            let outer: usize = in_shape[..*axis].iter().product();
            let inner: usize = in_shape[axis + 1..].iter().product();
            let in_chunk = in_shape[*axis] * inner;
            let out_chunk = len * inner;
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for o in 0..outer {
                    let dst = &mut ga[o * in_chunk + start * inner..o * in_chunk + start * inner + out_chunk];
                    dst.iter_mut()
                        .zip(&g[o * out_chunk..(o + 1) * out_chunk])
                        .for_each(|(x, y)| *x += y);
                }
            }
        }
        Op::Gather { a, index } => {
            let (_, n_in) = split_last(nodes[*a].value.shape());
            let n_out = index.len();
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for (i, y) in g.iter().enumerate() {
                    let (r, j) = (i / n_out, i % n_out);
                    ga[r * n_in + index[j]] += y;
                }
            }
        }
        Op::LinearContract { u, w, b, v, p, q } => {
            let (p, q) = (*p, *q);
            let width = p * q;
            let (uv, wv, vv) = (&nodes[*u].value, &nodes[*w].value, &nodes[*v].value);
            let (rows, m) = split_last(uv.shape());
            if let Some(gv) = grad_slot(grads, nodes, *v) {
                let f = contract_field(uv, wv, &nodes[*b].value, rows, m, width);
                for r in 0..rows {
                    for i in 0..p {
                        let gri = g[r * p + i];
                        let fr = &f[r * width + i * q..r * width + (i + 1) * q];
                        for j in 0..q {
                            gv[r * q + j] += gri * fr[j];
                        }
                    }
                }
            }
            let needs_outer = [*u, *w, *b].iter().any(|&i| nodes[i].requires_grad);
            if needs_outer {
                // outer[r, i·q + j] = g[r, i] · v[r, j]
                let vd = vv.data();
                let mut outer = vec![0.0; rows * width];
                for r in 0..rows {
                    let vr = &vd[r * q..(r + 1) * q];
                    for i in 0..p {
                        let gri = g[r * p + i];
                        let dst = &mut outer[r * width + i * q..r * width + (i + 1) * q];
                        dst.iter_mut().zip(vr).for_each(|(x, y)| *x = gri * y);
                    }
                }
                if let Some(gw) = grad_slot(grads, nodes, *w) {
                    gemm(MatRef::new(uv.data(), rows, m).t(), MatRef::new(&outer, rows, width), 1.0, gw);
                }
                if let Some(gb) = grad_slot(grads, nodes, *b) {
                    for r in 0..rows {
                        gb.iter_mut()
                            .zip(&outer[r * width..(r + 1) * width])
                            .for_each(|(x, y)| *x += y);
                    }
                }
                if let Some(gu) = grad_slot(grads, nodes, *u) {
                    gemm(MatRef::new(&outer, rows, width), MatRef::new(wv.data(), m, width).t(), 1.0, gu);
                }
            }
        }
        Op::Quantile { a, weights } => {
            if let Some(ga) = grad_slot(grads, nodes, *a) {
                for &(i, w) in weights {
                    ga[i] += g[0] * w;
                }
            }
        }
    }
}

fn unary_backward(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    a: usize,
    g: &[f64],
    local: impl Fn(usize) -> f64,
) {
    if let Some(ga) = grad_slot(grads, nodes, a) {
        for (i, (x, y)) in ga.iter_mut().zip(g).enumerate() {
            *x += y * local(i);
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.value(self.id).shape().to_vec()
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(self.id).clone()
    }

    /// Borrow the value without cloning; do not record new operations while held.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.value(self.id))
    }

    pub fn item(&self) -> Result<f64> {
        self.tape.value(self.id).item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn map_unary(self, name: &'static str, op: Op, f: impl Fn(f64) -> f64) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())?
        };
        self.tape.push(name, value, op, &[self.id])
    }

    fn binary(self, other: Var<'t>, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.tape.check_same(&[other]);
        let a = self.tape.value(self.id);
        let b = self.tape.value(other.id);
        if !suffix_broadcastable(a.shape(), b.shape()) {
            return Err(Error::shape(name, format!("{:?} with {:?}", a.shape(), b.shape())));
        }
        let (ad, bd) = (a.data(), b.data());
        let nb = bd.len();
        let data = ad.iter().enumerate().map(|(i, &x)| f(x, bd[i % nb])).collect();
        Tensor::new(a.shape().to_vec(), data)
    }

    /// Elementwise sum; `other`'s shape must be a trailing suffix of `self`'s.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = self.binary(other, "add", |a, b| a + b)?;
        self.tape.push("add", v, Op::Add { a: self.id, b: other.id }, &[self.id, other.id])
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = self.binary(other, "sub", |a, b| a - b)?;
        self.tape.push("sub", v, Op::Sub { a: self.id, b: other.id }, &[self.id, other.id])
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = self.binary(other, "mul", |a, b| a * b)?;
        self.tape.push("mul", v, Op::Mul { a: self.id, b: other.id }, &[self.id, other.id])
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.map_unary("scale", Op::Scale { a: self.id, c }, |x| c * x)
    }

    pub fn add_scalar(self, c: f64) -> Result<Var<'t>> {
        self.map_unary("add_scalar", Op::AddScalar { a: self.id }, |x| x + c)
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.map_unary("tanh", Op::Tanh { a: self.id }, f64::tanh)
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.map_unary("sigmoid", Op::Sigmoid { a: self.id }, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.map_unary("exp", Op::Exp { a: self.id }, f64::exp)
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.map_unary("log", Op::Log { a: self.id }, f64::ln)
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.map_unary("relu", Op::Relu { a: self.id }, |x| x.max(0.0))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'t>> {
        self.map_unary("clamp", Op::Clamp { a: self.id, lo, hi }, |x| x.clamp(lo, hi))
    }

    /// Softmax over the last axis.
    pub fn softmax(self) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            let (rows, n) = split_last(x.shape());
            let mut out = x.data().to_vec();
            for r in 0..rows {
                let row = &mut out[r * n..(r + 1) * n];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            Tensor::new(x.shape().to_vec(), out)?
        };
        self.tape.push("softmax", value, Op::Softmax { a: self.id }, &[self.id])
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let s: f64 = self.tape.value(self.id).data().iter().sum();
        self.tape.push("sum", Tensor::scalar(s), Op::Sum { a: self.id }, &[self.id])
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let m = {
            let x = self.tape.value(self.id);
            x.data().iter().sum::<f64>() / x.numel() as f64
        };
        self.tape.push("mean", Tensor::scalar(m), Op::Mean { a: self.id }, &[self.id])
    }

    /// Sum over the last axis, dropping it.
    pub fn sum_last(self) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            if x.rank() == 0 {
                return Err(Error::shape("sum_last", "scalar input"));
            }
            let (rows, n) = split_last(x.shape());
            let data = (0..rows).map(|r| x.data()[r * n..(r + 1) * n].iter().sum()).collect();
            let shape = x.shape()[..x.rank() - 1].to_vec();
            Tensor { shape, data }
        };
        self.tape.push("sum_last", value, Op::SumLast { a: self.id }, &[self.id])
    }

    /// `[.., k] · [k, m] -> [.., m]`; leading axes are flattened into rows.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same(&[other]);
        let value = {
            let a = self.tape.value(self.id);
            let b = self.tape.value(other.id);
            let (ash, bsh) = (a.shape(), b.shape());
            if ash.is_empty() || bsh.len() != 2 || ash[ash.len() - 1] != bsh[0] {
                return Err(Error::shape("matmul", format!("{ash:?} · {bsh:?}")));
            }
            let (k, m) = (bsh[0], bsh[1]);
            let rows = a.numel() / k;
            let mut out = vec![0.0; rows * m];
            gemm(MatRef::new(a.data(), rows, k), MatRef::new(b.data(), k, m), 0.0, &mut out);
            let mut shape = ash.to_vec();
            *shape.last_mut().unwrap() = m;
            Tensor::new(shape, out)?
        };
        self.tape.push("matmul", value, Op::MatMul { a: self.id, b: other.id }, &[self.id, other.id])
    }

    /// `[B, m, k] · [B, k, n] -> [B, m, n]`; a rank-2 `self` is shared by every batch.
    pub fn bmm(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same(&[other]);
        let (value, broadcast_a) = {
            let a = self.tape.value(self.id);
            let b = self.tape.value(other.id);
            let (ash, bsh) = (a.shape(), b.shape());
            let broadcast_a = ash.len() == 2;
            let ok = bsh.len() == 3
                && (broadcast_a || (ash.len() == 3 && ash[0] == bsh[0]))
                && ash[ash.len() - 1] == bsh[1];
            if !ok {
                return Err(Error::shape("bmm", format!("{ash:?} · {bsh:?}")));
            }
            let (batch, k, n) = (bsh[0], bsh[1], bsh[2]);
            let m = ash[ash.len() - 2];
            let a_stride = if broadcast_a { 0 } else { m * k };
            let mut out = vec![0.0; batch * m * n];
            for i in 0..batch {
                gemm(
                    MatRef::new(&a.data()[i * a_stride..], m, k),
                    MatRef::new(&b.data()[i * k * n..], k, n),
                    0.0,
                    &mut out[i * m * n..(i + 1) * m * n],
                );
            }
            (Tensor::new(vec![batch, m, n], out)?, broadcast_a)
        };
        self.tape.push(
            "bmm",
            value,
            Op::BatchMatMul {
                a: self.id,
                b: other.id,
                broadcast_a,
            },
            &[self.id, other.id],
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.tape.value(self.id).clone().reshape(shape)?;
        self.tape.push("reshape", value, Op::Reshape { a: self.id }, &[self.id])
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(self) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            if x.rank() != 2 {
                return Err(Error::shape("transpose", format!("{:?}", x.shape())));
            }
            let (r, c) = (x.shape()[0], x.shape()[1]);
            let mut data = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    data[j * r + i] = x.data()[i * c + j];
                }
            }
            Tensor::new(vec![c, r], data)?
        };
        self.tape.push("transpose", value, Op::Transpose { a: self.id }, &[self.id])
    }

    /// `len` entries of `axis` beginning at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            let shape = x.shape();
            if axis >= shape.len() || len == 0 || start + len > shape[axis] {
                return Err(Error::shape(
                    "slice",
                    format!("axis {axis} [{start}, {}) of {shape:?}", start + len),
                ));
            }
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let chunk = shape[axis] * inner;
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = o * chunk + start * inner;
                data.extend_from_slice(&x.data()[base..base + len * inner]);
            }
            let mut out_shape = shape.to_vec();
            out_shape[axis] = len;
            Tensor::new(out_shape, data)?
        };
        self.tape.push("slice", value, Op::Slice { a: self.id, axis, start }, &[self.id])
    }

    /// Selects entries of the last axis: `out[.., j] = self[.., index[j]]`.
    pub fn gather_last(self, index: &[usize]) -> Result<Var<'t>> {
        let value = {
            let x = self.tape.value(self.id);
            let (rows, n) = split_last(x.shape());
            if x.rank() == 0 || index.is_empty() || index.iter().any(|&i| i >= n) {
                return Err(Error::shape("gather_last", format!("{index:?} of {:?}", x.shape())));
            }
            let mut data = Vec::with_capacity(rows * index.len());
            for r in 0..rows {
                data.extend(index.iter().map(|&j| x.data()[r * n + j]));
            }
            let mut shape = x.shape().to_vec();
            *shape.last_mut().unwrap() = index.len();
            Tensor::new(shape, data)?
        };
        self.tape.push(
            "gather_last",
            value,
            Op::Gather {
                a: self.id,
                index: index.to_vec(),
            },
            &[self.id],
        )
    }

    /// Linear-interpolation `q`-quantile over all entries, as a scalar.
    ///
    /// The gradient flows to the (at most two) order statistics that define
    /// the interpolated value; weight on a tied value is shared equally by
    /// every entry holding it.
    pub fn quantile(self, q: f64) -> Result<Var<'t>> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
        }
        let (value, weights) = {
            let x = self.tape.value(self.id);
            if x.numel() == 0 {
                return Err(Error::InvalidArgument("quantile of an empty tensor".into()));
            }
            quantile_with_weights(x.data(), q)
        };
        self.tape.push(
            "quantile",
            Tensor::scalar(value),
            Op::Quantile { a: self.id, weights },
            &[self.id],
        )
    }
}

/// Quantile value plus the per-entry weights of its (sub)gradient.
pub(crate) fn quantile_with_weights(values: &[f64], q: f64) -> (f64, Vec<(usize, f64)>) {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let pos = q * (m - 1) as f64;
    let lo = (pos.floor() as usize).min(m - 1);
    let hi = (lo + 1).min(m - 1);
    let frac = pos - lo as f64;
    let (vlo, vhi) = (values[order[lo]], values[order[hi]]);
    let value = vlo + frac * (vhi - vlo);

    let mut weights = Vec::new();
    for (rank, w) in [(lo, 1.0 - frac), (hi, frac)] {
        if w == 0.0 {
            continue;
        }
        let v = values[order[rank]];
        let tied: Vec<usize> = (0..m).filter(|&i| values[i] == v).collect();
        let share = w / tied.len() as f64;
        weights.extend(tied.into_iter().map(|i| (i, share)));
    }
    (value, weights)
}
