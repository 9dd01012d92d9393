//! Run configuration as flat `key = value` text.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::data::anomaly::AnomalyKind;
use crate::data::DEFAULT_CHANNELS;
use crate::encoder::{EncoderKind, EncoderShape};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::objective::Reduction;
use crate::tensor::AdamWConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` uses the shortest training profile.
    pub window: Option<usize>,
    pub stride: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub flow_blocks: usize,
    pub q: f64,
    pub cheb_order: usize,
    pub embed_dim: usize,
    pub channels: Vec<String>,
    pub seed: u64,
    pub no_ncde: bool,
    pub no_quantile: bool,
    pub train_split: f64,
    pub substeps: usize,
    /// Anomaly rate assumed when τ must be set without labels.
    pub expected_anomaly_rate: f64,
    pub drives: usize,
    pub anomaly_ratio: f64,
    pub anomaly_kinds: Vec<AnomalyKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: None,
            stride: 1,
            batch_size: 256,
            epochs: 10,
            lr: 3e-3,
            weight_decay: 5e-4,
            hidden: 32,
            flow_blocks: 1,
            q: 0.05,
            cheb_order: 2,
            embed_dim: 8,
            channels: DEFAULT_CHANNELS.iter().map(|c| c.to_string()).collect(),
            seed: 0,
            no_ncde: false,
            no_quantile: false,
            train_split: 0.8,
            substeps: 1,
            expected_anomaly_rate: 0.4,
            drives: 60,
            anomaly_ratio: 0.6,
            anomaly_kinds: AnomalyKind::ALL.to_vec(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "window",
    "stride",
    "batch_size",
    "epochs",
    "lr",
    "weight_decay",
    "hidden",
    "flow_blocks",
    "q",
    "cheb_order",
    "embed_dim",
    "channels",
    "seed",
    "no_ncde",
    "no_quantile",
    "train_split",
    "substeps",
    "expected_anomaly_rate",
    "drives",
    "anomaly_ratio",
    "anomaly_kinds",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key} = {value:?} is not a valid value")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "window" => {
                self.window = match value {
                    "auto" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "stride" => self.stride = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "flow_blocks" => self.flow_blocks = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "cheb_order" => self.cheb_order = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "channels" => self.channels = list(value),
            "seed" => self.seed = parse(key, value)?,
            "no_ncde" => self.no_ncde = parse(key, value)?,
            "no_quantile" => self.no_quantile = parse(key, value)?,
            "train_split" => self.train_split = parse(key, value)?,
            "substeps" => self.substeps = parse(key, value)?,
            "expected_anomaly_rate" => self.expected_anomaly_rate = parse(key, value)?,
            "drives" => self.drives = parse(key, value)?,
            "anomaly_ratio" => self.anomaly_ratio = parse(key, value)?,
            "anomaly_kinds" => {
                self.anomaly_kinds = list(value)
                    .iter()
                    .map(|k| AnomalyKind::from_name(k).ok_or_else(|| Error::Config(format!("unknown anomaly kind {k:?}"))))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "window" => self.window.map_or_else(|| "auto".to_string(), |w| w.to_string()),
            "stride" => self.stride.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "lr" => self.lr.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "hidden" => self.hidden.to_string(),
            "flow_blocks" => self.flow_blocks.to_string(),
            "q" => self.q.to_string(),
            "cheb_order" => self.cheb_order.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "channels" => self.channels.join(","),
            "seed" => self.seed.to_string(),
            "no_ncde" => self.no_ncde.to_string(),
            "no_quantile" => self.no_quantile.to_string(),
            "train_split" => self.train_split.to_string(),
            "substeps" => self.substeps.to_string(),
            "expected_anomaly_rate" => self.expected_anomaly_rate.to_string(),
            "drives" => self.drives.to_string(),
            "anomaly_ratio" => self.anomaly_ratio.to_string(),
            "anomaly_kinds" => self.anomaly_kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
            _ => return None,
        })
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored; a repeated key keeps the last value.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            self.set(key.trim(), value)?;
        }
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    /// Every key in [`KEYS`] order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if let Some(w) = self.window {
            if w < 2 {
                return fail(format!("window {w} must be ≥ 2"));
            }
        }
        let positive = [
            ("stride", self.stride),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("flow_blocks", self.flow_blocks),
            ("embed_dim", self.embed_dim),
            ("substeps", self.substeps),
        ];
        for (k, v) in positive {
            if v == 0 {
                return fail(format!("{k} must be positive"));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay {} must be nonnegative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.q) {
            return fail(format!("q {} outside [0, 1)", self.q));
        }
        if !(self.train_split > 0.0 && self.train_split <= 1.0) {
            return fail(format!("train_split {} outside (0, 1]", self.train_split));
        }
        if !(0.0..1.0).contains(&self.expected_anomaly_rate) {
            return fail(format!("expected_anomaly_rate {} outside [0, 1)", self.expected_anomaly_rate));
        }
        if !(0.0..=1.0).contains(&self.anomaly_ratio) {
            return fail(format!("anomaly_ratio {} outside [0, 1]", self.anomaly_ratio));
        }
        if self.channels.is_empty() {
            return fail("channels must name at least one channel".into());
        }
        if self.anomaly_kinds.is_empty() && self.anomaly_ratio > 0.0 {
            return fail("anomaly_kinds is empty but anomaly_ratio > 0".into());
        }
        Ok(())
    }

    pub fn reduction(&self) -> Reduction {
        if self.no_quantile {
            Reduction::Mean
        } else {
            Reduction::Quantile(self.q)
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            shape: EncoderShape {
                sensors: self.channels.len(),
                hidden: self.hidden,
                order: self.cheb_order,
                embed_dim: self.embed_dim,
            },
            flow_blocks: self.flow_blocks,
            encoder: if self.no_ncde { EncoderKind::Rnn } else { EncoderKind::Ncde },
            reduction: self.reduction(),
            substeps: self.substeps,
        }
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}
