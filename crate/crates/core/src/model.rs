//! The full detector: encoder, per-sensor flow and the score reduction.

use crate::encoder::{encode_with, EncoderKind, EncoderParams, EncoderShape, EncoderVars};
use crate::error::{Error, Result};
use crate::flow::{log_likelihood, FlowBlock, FlowBlockVars, FlowParams};
use crate::objective::{loss, window_scores, Reduction};
use crate::tensor::{seeded_rng, Rng, Tape, Tensor, Var};

/// Windows scored per forward pass when no gradient is needed.
pub const SCORE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub shape: EncoderShape,
    pub flow_blocks: usize,
    pub encoder: EncoderKind,
    pub reduction: Reduction,
    pub substeps: usize,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub encoder: EncoderParams,
    pub flow: FlowParams,
}

pub struct ModelVars<'t> {
    pub encoder: EncoderVars<'t>,
    pub flow: Vec<FlowBlockVars<'t>>,
}

impl<'t> ModelVars<'t> {
    /// Every trainable leaf, in [`Model::named_tensors`] order.
    pub fn all(&self) -> Vec<Var<'t>> {
        let mut out = self.encoder.all();
        for b in &self.flow {
            out.extend(b.all());
        }
        out
    }

    /// Inverse of [`ModelVars::all`] for a model with `flow_blocks` blocks.
    pub fn from_slice(vars: &[Var<'t>], flow_blocks: usize) -> Result<Self> {
        let n_enc = EncoderParams::NAMES.len();
        let n_block = FlowBlock::NAMES.len();
        let wrong = || {
            Error::InvalidArgument(format!(
                "expected {} variables, got {}",
                n_enc + flow_blocks * n_block,
                vars.len()
            ))
        };
        if vars.len() != n_enc + flow_blocks * n_block {
            return Err(wrong());
        }
        let encoder = EncoderVars::from_slice(&vars[..n_enc]).ok_or_else(wrong)?;
        let flow = vars[n_enc..]
            .chunks(n_block)
            .map(|c| FlowBlockVars::from_slice(c).ok_or_else(wrong))
            .collect::<Result<_>>()?;
        Ok(Self { encoder, flow })
    }
}

/// Batch forward result.
pub struct Forward<'t> {
    /// `[B, n]` log-likelihood of each sensor's final state.
    pub lls: Var<'t>,
    pub clamped: usize,
}

impl Model {
    pub fn init(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        if spec.flow_blocks == 0 {
            return Err(Error::Config("at least one flow block is required".into()));
        }
        if spec.substeps == 0 {
            return Err(Error::Config("substeps must be positive".into()));
        }
        let encoder = EncoderParams::init(spec.shape, rng)?;
        let flow = FlowParams::init(spec.shape.hidden, spec.flow_blocks, rng)?;
        Ok(Self { spec, encoder, flow })
    }

    pub fn seeded(spec: ModelSpec, seed: u64) -> Result<Self> {
        Self::init(spec, &mut seeded_rng(seed))
    }

    /// Trainable tensors with stable names; the frozen base distribution is excluded.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .encoder
            .named()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        for (i, b) in self.flow.blocks.iter().enumerate() {
            out.extend(b.named().into_iter().map(|(n, t)| (format!("flow.{i}.{n}"), t)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        for b in &mut self.flow.blocks {
            out.extend(b.tensors_mut());
        }
        out
    }

    pub fn leaves<'t>(&self, tape: &'t Tape) -> ModelVars<'t> {
        ModelVars {
            encoder: self.encoder.leaves(tape),
            flow: self.flow.blocks.iter().map(|b| b.leaves(tape)).collect(),
        }
    }

    pub fn constants<'t>(&self, tape: &'t Tape) -> ModelVars<'t> {
        ModelVars {
            encoder: self.encoder.constants(tape),
            flow: self.flow.blocks.iter().map(|b| b.constants(tape)).collect(),
        }
    }

    /// Encodes `[B, n, w]` windows and evaluates the flow on every sensor state.
    pub fn forward<'t>(&self, tape: &'t Tape, vars: &ModelVars<'t>, windows: &Tensor) -> Result<Forward<'t>> {
        let states = encode_with(self.spec.encoder, tape, windows, &vars.encoder, self.spec.substeps)?;
        let (lls, clamped) = log_likelihood(states, &vars.flow, &self.flow)?;
        Ok(Forward { lls, clamped })
    }

    /// Training objective on one batch.
    pub fn loss<'t>(&self, tape: &'t Tape, vars: &ModelVars<'t>, windows: &Tensor) -> Result<(Var<'t>, usize)> {
        let out = self.forward(tape, vars, windows)?;
        Ok((loss(out.lls, self.spec.reduction)?, out.clamped))
    }

    /// `[B, n]` per-sensor log-likelihoods without recording gradients.
    pub fn sensor_log_likelihoods(&self, windows: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let vars = self.constants(&tape);
        Ok(self.forward(&tape, &vars, windows)?.lls.value())
    }

    /// Per-window scores and sensor log-likelihoods of `[B, n, w]` windows.
    pub fn score(&self, windows: &Tensor) -> Result<(Vec<f64>, Tensor)> {
        let lls = self.sensor_log_likelihoods(windows)?;
        Ok((window_scores(&lls, self.spec.reduction)?, lls))
    }
}
