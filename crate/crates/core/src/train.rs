//! Minibatch training with per-epoch validation and best-F1 retention.

use rand::seq::SliceRandom;

use crate::data::window::WindowSet;
use crate::data::Profile;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Metrics};
use crate::model::{Model, SCORE_CHUNK};
use crate::tensor::{seeded_rng, AdamW, AdamWConfig, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Seeds the batch order.
    pub seed: u64,
}

/// Windows with one label each, scored after every epoch.
pub struct Validation<'a> {
    pub profiles: &'a [Profile],
    pub windows: &'a WindowSet,
    pub labels: Vec<bool>,
}

impl Validation<'_> {
    fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&l| l) && self.labels.iter().any(|&l| !l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub clamped: usize,
    pub validation: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept; `None` keeps the last one
    /// (or the initialization when no epoch ran).
    pub best_epoch: Option<usize>,
    pub best: Option<Metrics>,
}

/// Scores every window of `set`, in order, `SCORE_CHUNK` windows at a time.
pub fn score_windows(model: &Model, profiles: &[Profile], set: &WindowSet) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut scores = Vec::with_capacity(set.len());
    let mut lls = Vec::with_capacity(set.len());
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(SCORE_CHUNK) {
        let batch = set.batch(profiles, chunk)?;
        let (s, l) = model.score(&batch.tensor)?;
        scores.extend(s);
        lls.extend(l.data().chunks(l.shape()[1]).map(<[f64]>::to_vec));
    }
    Ok((scores, lls))
}

fn step(model: &mut Model, opt: &mut AdamW, windows: &Tensor) -> Result<(f64, usize)> {
    let tape = Tape::new();
    let vars = model.leaves(&tape);
    let (loss, clamped) = model.loss(&tape, &vars, windows)?;
    let grads = tape.backward(loss)?;
    let grads: Vec<Tensor> = vars.all().into_iter().map(|v| grads.get_or_zeros(v)).collect();
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { op: "gradient" });
    }
    let value = loss.item()?;
    drop(vars);
    opt.step(&mut model.tensors_mut(), &grads)?;
    Ok((value, clamped))
}

fn diverged(e: Error, epoch: usize, step: usize) -> Error {
    if !e.is_numerical() {
        return e;
    }
    log::error!("epoch {epoch} step {step}: {e}");
    Error::Divergence { epoch, step }
}

pub fn train(
    model: &mut Model,
    settings: &TrainSettings,
    profiles: &[Profile],
    windows: &WindowSet,
    validation: Option<&Validation>,
) -> Result<TrainOutcome> {
    if windows.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    if settings.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = seeded_rng(settings.seed);
    let mut opt = AdamW::new(settings.optimizer, model.tensors_mut().into_iter().map(|t| &*t));
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut outcome = TrainOutcome {
        epochs: Vec::with_capacity(settings.epochs),
        best_epoch: None,
        best: None,
    };
    let mut best_model: Option<Model> = None;
    let mut global_step = 0;

    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        let mut clamped = 0;
        for chunk in order.chunks(settings.batch_size) {
            let batch = windows.batch(profiles, chunk)?;
            let (loss, c) = step(model, &mut opt, &batch.tensor).map_err(|e| diverged(e, epoch, global_step))?;
            total += loss;
            batches += 1;
            clamped += c;
            global_step += 1;
        }
        if clamped > 0 {
            log::warn!("epoch {epoch}: flow log-scale clamped {clamped} times");
        }
        let mut entry = EpochLog {
            epoch,
            loss: total / batches as f64,
            clamped,
            validation: None,
        };
        if let Some(val) = validation.filter(|v| v.has_both_classes()) {
            // parameters from the last step may only blow up once scored
            let (scores, _) = score_windows(model, val.profiles, val.windows)
                .map_err(|e| diverged(e, epoch, global_step.saturating_sub(1)))?;
            let metrics = evaluate(&scores, &val.labels)?;
            if outcome.best.as_ref().map_or(true, |b| metrics.f1_pa >= b.f1_pa) {
                outcome.best = Some(metrics);
                outcome.best_epoch = Some(epoch);
                best_model = Some(model.clone());
            }
            entry.validation = Some(metrics);
        }
        match &entry.validation {
            Some(m) => log::info!(
                "epoch {epoch} loss {:.6} val f1_pa {:.4} auroc {:.4}",
                entry.loss,
                m.f1_pa,
                m.auroc
            ),
            None => log::info!("epoch {epoch} loss {:.6}", entry.loss),
        }
        outcome.epochs.push(entry);
    }
    if let Some(best) = best_model {
        *model = best;
    }
    Ok(outcome)
}
