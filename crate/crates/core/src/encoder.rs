//! Dual controlled differential equation encoder.
//!
//! Each sensor's window becomes a 2-channel path `X(t) = (x(t), t / (w − 1))`
//! where `x` is the natural cubic spline through the samples. A temporal
//! state `H` is driven by `X` through the vector field `f1`, and a spatial
//! state `Y` is driven by `H` through `f2`, which first mixes sensors with
//! a Chebyshev graph convolution. Both are integrated with explicit Euler
//! steps on the knot grid, and the encoding is `S(T) = Y(T) ⊙ H(T)`.

use crate::error::{Error, Result};
use crate::graph::{adjacency, chebyshev_stack, graph_conv, ChebyshevStack};
use crate::params::param_struct;
use crate::spline::SplinePath;
use crate::tensor::{uniform_fan_in, Rng, Tape, Tensor, Var};

/// Channels of each sensor's control path: value and normalized time.
pub const PATH_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderShape {
    pub sensors: usize,
    pub hidden: usize,
    /// Chebyshev order `K`.
    pub order: usize,
    pub embed_dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EncoderKind {
    #[default]
    Ncde,
    /// Single-layer tanh recurrence per sensor, the ablation without CDEs.
    Rnn,
}

param_struct! {
    /// Learnable parameters of both encoder variants.
    pub struct EncoderParams / EncoderVars {
        /// Node embeddings `E`, `[n, d_e]`.
        embeddings,
        /// `X(T_0) → H(T_0)`, `[2, h]`.
        w_h,
        /// `X(T_0) → Y(T_0)`, `[2, h]`.
        w_y,
        f1_w1,
        f1_b1,
        /// `[h, h·2]`, reshaped per row into the `h × 2` field.
        f1_w2,
        f1_b2,
        /// Graph-convolution weights `[K + 1, h, h]`.
        f2_cheb,
        f2_b1,
        /// `[h, h·h]`, reshaped per row into the `h × h` field.
        f2_w2,
        f2_b2,
        rnn_wx,
        rnn_wh,
        rnn_b,
    }
}

impl EncoderParams {
    pub fn init(shape: EncoderShape, rng: &mut Rng) -> Result<Self> {
        let EncoderShape {
            sensors: n,
            hidden: h,
            order: k,
            embed_dim: de,
        } = shape;
        if n == 0 || h == 0 || de == 0 {
            return Err(Error::InvalidArgument(format!("degenerate encoder shape {shape:?}")));
        }
        Ok(Self {
            embeddings: uniform_fan_in(&[n, de], 1, rng),
            w_h: uniform_fan_in(&[PATH_DIM, h], PATH_DIM, rng),
            w_y: uniform_fan_in(&[PATH_DIM, h], PATH_DIM, rng),
            f1_w1: uniform_fan_in(&[h, h], h, rng),
            f1_b1: uniform_fan_in(&[h], h, rng),
            f1_w2: uniform_fan_in(&[h, h * PATH_DIM], h, rng),
            f1_b2: uniform_fan_in(&[h * PATH_DIM], h, rng),
            f2_cheb: uniform_fan_in(&[k + 1, h, h], (k + 1) * h, rng),
            f2_b1: uniform_fan_in(&[h], (k + 1) * h, rng),
            f2_w2: uniform_fan_in(&[h, h * h], h, rng),
            f2_b2: uniform_fan_in(&[h * h], h, rng),
            rnn_wx: uniform_fan_in(&[PATH_DIM, h], PATH_DIM, rng),
            rnn_wh: uniform_fan_in(&[h, h], h, rng),
            rnn_b: uniform_fan_in(&[h], h, rng),
        })
    }

    pub fn shape(&self) -> EncoderShape {
        EncoderShape {
            sensors: self.embeddings.shape()[0],
            hidden: self.w_h.shape()[1],
            order: self.f2_cheb.shape()[0] - 1,
            embed_dim: self.embeddings.shape()[1],
        }
    }
}

/// `H(T_0) = X(T_0)·W_H` and `Y(T_0) = X(T_0)·W_Y` for `X(T_0)` of shape `[B, n, 2]`.
pub fn init_state<'t>(x0: Var<'t>, p: &EncoderVars<'t>) -> Result<(Var<'t>, Var<'t>)> {
    Ok((x0.matmul(p.w_h)?, x0.matmul(p.w_y)?))
}

fn f1_hidden<'t>(h: Var<'t>, p: &EncoderVars<'t>) -> Result<Var<'t>> {
    h.matmul(p.f1_w1)?.add(p.f1_b1)?.tanh()
}

fn f2_hidden<'t>(y: Var<'t>, stack: &ChebyshevStack<'t>, p: &EncoderVars<'t>) -> Result<Var<'t>> {
    graph_conv(stack, y, p.f2_cheb)?.add(p.f2_b1)?.tanh()
}

fn with_matrix_tail<'t>(v: Var<'t>, rows: usize, cols: usize) -> Result<Var<'t>> {
    let mut shape = v.shape();
    shape.pop();
    shape.extend([rows, cols]);
    v.reshape(&shape)
}

/// Temporal field `f1(H)` as `[B, n, h, 2]`.
pub fn vector_field_f1<'t>(h: Var<'t>, p: &EncoderVars<'t>) -> Result<Var<'t>> {
    let hidden = h.shape().last().copied().unwrap_or(0);
    let field = f1_hidden(h, p)?.matmul(p.f1_w2)?.add(p.f1_b2)?;
    with_matrix_tail(field, hidden, PATH_DIM)
}

/// Spatial field `f2(Y)` as `[B, n, h, h]`.
pub fn vector_field_f2<'t>(y: Var<'t>, stack: &ChebyshevStack<'t>, p: &EncoderVars<'t>) -> Result<Var<'t>> {
    let hidden = y.shape().last().copied().unwrap_or(0);
    let field = f2_hidden(y, stack, p)?.matmul(p.f2_w2)?.add(p.f2_b2)?;
    with_matrix_tail(field, hidden, hidden)
}

fn check_windows(windows: &Tensor, sensors: usize) -> Result<(usize, usize)> {
    let s = windows.shape();
    if s.len() != 3 || s[1] != sensors {
        return Err(Error::shape(
            "encode",
            format!("windows {s:?}, expected [batch, {sensors}, w]"),
        ));
    }
    if s[2] < 2 {
        return Err(Error::InvalidArgument(format!("window length {} < 2", s[2])));
    }
    Ok((s[0], s[2]))
}

fn at_step<T>(step: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite { .. } => Error::NonFiniteState { step },
        other => other,
    })
}

/// NCDE encoding of `[B, n, w]` windows into `S(T)` of shape `[B, n, h]`.
///
/// `substeps` Euler steps of size `1 / substeps` are taken per sample
/// interval; 1 is the plain knot-grid discretization.
pub fn encode<'t>(tape: &'t Tape, windows: &Tensor, p: &EncoderVars<'t>, substeps: usize) -> Result<Var<'t>> {
    let n = p.embeddings.shape()[0];
    let (batch, w) = check_windows(windows, n)?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    let rows = batch * n;
    let path = SplinePath::fit_rows(windows.data(), rows, w)?;
    let stack = chebyshev_stack(adjacency(p.embeddings)?, p.f2_cheb.shape()[0] - 1)?;

    let mut x0 = vec![0.0; rows * PATH_DIM];
    path.eval_into(0.0, &mut x0[..rows])?;
    interleave(&mut x0, rows);
    let x0 = tape.constant(Tensor::new(vec![batch, n, PATH_DIM], x0)?);
    let (mut h, mut y) = init_state(x0, p)?;
    let hidden = p.w_h.shape()[1];

    let dt = 1.0 / substeps as f64;
    let time_rate = 1.0 / (w - 1) as f64;
    let mut dx = vec![0.0; rows * PATH_DIM];
    for step in 0..(w - 1) * substeps {
        let t = step as f64 * dt;
        path.derivative_into(t, &mut dx[..rows])?;
        for v in &mut dx[..rows] {
            *v *= dt;
        }
        interleave(&mut dx, rows);
        for r in 0..rows {
            dx[r * PATH_DIM + 1] = time_rate * dt;
        }
        let dx_var = tape.constant(Tensor::new(vec![batch, n, PATH_DIM], dx.clone())?);
        let advanced = at_step(step, (|| {
            let dh = tape.linear_contract(f1_hidden(h, p)?, p.f1_w2, p.f1_b2, dx_var, hidden, PATH_DIM)?;
            let dy = tape.linear_contract(f2_hidden(y, &stack, p)?, p.f2_w2, p.f2_b2, dh, hidden, hidden)?;
            Ok((h.add(dh)?, y.add(dy)?))
        })())?;
        (h, y) = advanced;
    }
    at_step((w - 1) * substeps, y.mul(h))
}

/// Turns `[v_0..v_{rows}, 0..]` into `[(v_0, 0), (v_1, 0), ..]` in place.
fn interleave(buf: &mut [f64], rows: usize) {
    for r in (0..rows).rev() {
        buf[r * PATH_DIM] = buf[r];
        for c in 1..PATH_DIM {
            buf[r * PATH_DIM + c] = 0.0;
        }
    }
}

/// Recurrent ablation: `H_{i+1} = tanh(x_i·W_x + H_i·W_h + b)` over the raw
/// samples with `H_0 = 0`; returns `H_w`.
pub fn encode_rnn<'t>(tape: &'t Tape, windows: &Tensor, p: &EncoderVars<'t>) -> Result<Var<'t>> {
    let n = p.embeddings.shape()[0];
    let (batch, w) = check_windows(windows, n)?;
    let hidden = p.rnn_wh.shape()[0];
    let mut h = tape.constant(Tensor::zeros(&[batch, n, hidden]));
    let data = windows.data();
    for i in 0..w {
        let time = i as f64 / (w - 1) as f64;
        let x = Tensor::from_fn(&[batch, n, PATH_DIM], |k| {
            if k % PATH_DIM == 0 {
                data[(k / PATH_DIM) * w + i]
            } else {
                time
            }
        });
        h = at_step(i, (|| tape.constant(x).matmul(p.rnn_wx)?.add(h.matmul(p.rnn_wh)?)?.add(p.rnn_b)?.tanh())())?;
    }
    Ok(h)
}

pub fn encode_with<'t>(
    kind: EncoderKind,
    tape: &'t Tape,
    windows: &Tensor,
    p: &EncoderVars<'t>,
    substeps: usize,
) -> Result<Var<'t>> {
    match kind {
        EncoderKind::Ncde => encode(tape, windows, p, substeps),
        EncoderKind::Rnn => encode_rnn(tape, windows, p),
    }
}
