//! Masked-affine autoregressive flow over the per-sensor embedding.
//!
//! Each block maps `x ↦ z` with `z_i = x_i·exp(s_i(x_{<i})) + c_i(x_{<i})`,
//! where `s` and `c` come from one masked hidden layer, and then reverses the
//! dimension order. The log-determinant of a block is `Σ_i s_i`. The base
//! density is a diagonal normal with frozen mean and variances.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::param_struct;
use crate::tensor::{uniform_fan_in, Rng, Tape, Tensor, Var};

/// Bound on the per-dimension log-scale.
pub const LOG_SCALE_CLAMP: f64 = 7.0;

const OUTPUT_INIT_SCALE: f64 = 0.1;

param_struct! {
    /// One autoregressive block; `m` hidden units over `h` dimensions.
    pub struct FlowBlock / FlowBlockVars {
        /// `[h, m]`, masked so hidden unit `k` sees inputs of degree ≤ its own.
        w1,
        b1,
        /// Log-scale head `[m, h]`.
        ws,
        bs,
        /// Shift head `[m, h]`.
        wc,
        bc,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub blocks: Vec<FlowBlock>,
    /// Base mean, `[h]`; frozen.
    pub mu: Tensor,
    /// Base variances, `[h]`; frozen.
    pub var: Tensor,
}

/// Connectivity masks of a block: `input` is `[h, m]`, `output` is `[m, h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Masks {
    pub input: Tensor,
    pub output: Tensor,
}

/// Input dimension `i` has degree `i + 1`; hidden unit `k` has degree
/// `1 + k mod (h − 1)`; output `j` may see hidden units of degree `< j + 1`.
pub fn masks(dim: usize, hidden: usize) -> Masks {
    let degree = |k: usize| if dim > 1 { 1 + k % (dim - 1) } else { 0 };
    let input = Tensor::from_fn(&[dim, hidden], |idx| {
        let (i, k) = (idx / hidden, idx % hidden);
        f64::from(u8::from(dim > 1 && degree(k) > i))
    });
    let output = Tensor::from_fn(&[hidden, dim], |idx| {
        let (k, j) = (idx / dim, idx % dim);
        f64::from(u8::from(dim > 1 && j + 1 > degree(k)))
    });
    Masks { input, output }
}

impl FlowBlock {
    pub fn init(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let shrink = |t: Tensor| {
            let shape = t.shape().to_vec();
            Tensor::new(shape, t.into_data().into_iter().map(|v| v * OUTPUT_INIT_SCALE).collect())
                .expect("shape preserved")
        };
        Self {
            w1: uniform_fan_in(&[dim, hidden], dim, rng),
            b1: uniform_fan_in(&[hidden], dim, rng),
            ws: shrink(uniform_fan_in(&[hidden, dim], hidden, rng)),
            bs: shrink(uniform_fan_in(&[dim], hidden, rng)),
            wc: shrink(uniform_fan_in(&[hidden, dim], hidden, rng)),
            bc: shrink(uniform_fan_in(&[dim], hidden, rng)),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w1.shape()[1]
    }
}

impl FlowParams {
    /// `blocks` blocks over `dim` dimensions, hidden width `dim`, standard normal base.
    pub fn init(dim: usize, blocks: usize, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || blocks == 0 {
            return Err(Error::InvalidArgument(format!(
                "flow needs dim ≥ 1 and ≥ 1 block, got dim {dim}, {blocks} blocks"
            )));
        }
        Ok(Self {
            blocks: (0..blocks).map(|_| FlowBlock::init(dim, dim, rng)).collect(),
            mu: Tensor::zeros(&[dim]),
            var: Tensor::full(&[dim], 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.numel()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOutput<'t> {
    pub z: Var<'t>,
    /// `[..]`: the input shape without its last axis.
    pub logdet: Var<'t>,
    /// Number of log-scales that hit the clamp.
    pub clamped: usize,
}

fn reversal(dim: usize) -> Vec<usize> {
    (0..dim).rev().collect()
}

/// Log-scale and shift of one block, before the permutation.
fn scale_shift<'t>(x: Var<'t>, block: &FlowBlockVars<'t>, masks: &Masks) -> Result<(Var<'t>, Var<'t>, usize)> {
    let tape = x.tape();
    let w1 = block.w1.mul(tape.constant(masks.input.clone()))?;
    let ws = block.ws.mul(tape.constant(masks.output.clone()))?;
    let wc = block.wc.mul(tape.constant(masks.output.clone()))?;
    let hidden = x.matmul(w1)?.add(block.b1)?.tanh()?;
    let raw = hidden.matmul(ws)?.add(block.bs)?;
    let clamped = raw.with_value(|t| t.data().iter().filter(|v| v.abs() > LOG_SCALE_CLAMP).count());
    let s = raw.clamp(-LOG_SCALE_CLAMP, LOG_SCALE_CLAMP)?;
    let c = hidden.matmul(wc)?.add(block.bc)?;
    Ok((s, c, clamped))
}

/// `z = g(x)` over the last axis, with `log|det ∂z/∂x|` per vector.
pub fn flow_forward<'t>(x: Var<'t>, blocks: &[FlowBlockVars<'t>]) -> Result<FlowOutput<'t>> {
    let dim = *x.shape().last().ok_or_else(|| Error::shape("flow_forward", "scalar input"))?;
    let masks = masks(dim, blocks.first().map_or(dim, |b| b.w1.shape()[1]));
    let mut z = x;
    let mut logdet: Option<Var<'t>> = None;
    let mut clamped = 0;
    for block in blocks {
        if block.w1.shape() != [dim, masks.input.shape()[1]] {
            return Err(Error::shape("flow_forward", format!("block {:?} on dim {dim}", block.w1.shape())));
        }
        let (s, c, hits) = scale_shift(z, block, &masks)?;
        clamped += hits;
        z = z.mul(s.exp()?)?.add(c)?.gather_last(&reversal(dim))?;
        let ld = s.sum_last()?;
        logdet = Some(match logdet {
            Some(acc) => acc.add(ld)?,
            None => ld,
        });
    }
    let logdet = match logdet {
        Some(ld) => ld,
        None => {
            let mut shape = x.shape();
            shape.pop();
            x.tape().constant(Tensor::zeros(&shape))
        }
    };
    Ok(FlowOutput { z, logdet, clamped })
}

/// Inverts the flow by solving each block's autoregression one dimension
/// at a time.
pub fn flow_inverse(z: &Tensor, blocks: &[FlowBlock]) -> Result<Tensor> {
    let dim = *z.shape().last().ok_or_else(|| Error::shape("flow_inverse", "scalar input"))?;
    let rev = reversal(dim);
    let mut current = z.clone();
    for block in blocks.iter().rev() {
        let masks = masks(dim, block.hidden());
        let target = {
            let tape = Tape::new();
            tape.constant(current).gather_last(&rev)?.value()
        };
        let mut x = Tensor::zeros(target.shape());
        for i in 0..dim {
            let tape = Tape::new();
            let vars = block.constants(&tape);
            let (s, c, _) = scale_shift(tape.constant(x.clone()), &vars, &masks)?;
            let (s, c) = (s.value(), c.value());
            for (r, row) in x.data_mut().chunks_mut(dim).enumerate() {
                let k = r * dim + i;
                row[i] = (target.data()[k] - c.data()[k]) * (-s.data()[k]).exp();
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { op: "flow_inverse" });
        }
        current = x;
    }
    Ok(current)
}

/// `log N(z | μ, diag(var))` over the last axis.
pub fn base_logprob<'t>(z: Var<'t>, mu: &Tensor, var: &Tensor) -> Result<Var<'t>> {
    if var.data().iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("base variances must be positive".into()));
    }
    let dim = mu.numel();
    let tape = z.tape();
    let inv = Tensor::new(vec![dim], var.data().iter().map(|v| 1.0 / v).collect())?;
    let norm: f64 = var.data().iter().map(|v| v.ln()).sum::<f64>() + dim as f64 * (2.0 * PI).ln();
    let centered = z.sub(tape.constant(mu.clone()))?;
    centered
        .mul(centered)?
        .mul(tape.constant(inv))?
        .sum_last()?
        .add_scalar(norm)?
        .scale(-0.5)
}

/// Per-vector log-likelihood `log N(g(x)) + log|det ∂g/∂x|`, plus the clamp count.
pub fn log_likelihood<'t>(x: Var<'t>, blocks: &[FlowBlockVars<'t>], params: &FlowParams) -> Result<(Var<'t>, usize)> {
    let out = flow_forward(x, blocks)?;
    let ll = base_logprob(out.z, &params.mu, &params.var)?.add(out.logdet)?;
    Ok((ll, out.clamped))
}
