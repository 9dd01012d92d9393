//! Checkpoint container: a UTF-8 header followed by raw parameter blocks.
//!
//! ```text
//! gdflow-checkpoint 1
//! [config]
//! key = value
//! [stats]
//! <channel> = <mean> <std>
//! [run]
//! window = 65
//! tau = 1.25
//! best_epoch = 3 | none
//! best_f1 = 0.9 | none
//! test_id = <profile id>      (repeated)
//! [tensors]
//! count = N
//! ```
//!
//! followed by N blocks, each a line `<name> <d0>x<d1>…` and then the values
//! as little-endian f64.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::data::normalize::NormStats;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

pub const MAGIC: &str = "gdflow-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub stats: NormStats,
    pub window: usize,
    pub tau: f64,
    pub best_epoch: Option<usize>,
    pub best_f1: Option<f64>,
    pub test_ids: Vec<String>,
    pub model: Model,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        let _ = writeln!(head, "{MAGIC} {VERSION}");
        head.push_str("[config]\n");
        head.push_str(&self.config.to_text());
        head.push_str("[stats]\n");
        for ((c, m), s) in self.stats.channels.iter().zip(&self.stats.mean).zip(&self.stats.std) {
            let _ = writeln!(head, "{c} = {m} {s}");
        }
        head.push_str("[run]\n");
        let _ = writeln!(head, "window = {}", self.window);
        let _ = writeln!(head, "tau = {}", self.tau);
        let _ = writeln!(head, "best_epoch = {}", opt(self.best_epoch));
        let _ = writeln!(head, "best_f1 = {}", opt(self.best_f1));
        for id in &self.test_ids {
            let _ = writeln!(head, "test_id = {id}");
        }
        let tensors = self.model.named_tensors();
        head.push_str("[tensors]\n");
        let _ = writeln!(head, "count = {}", tensors.len());

        let mut out = head.into_bytes();
        for (name, t) in tensors {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            out.extend_from_slice(format!("{name} {}\n", dims.join("x")).as_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let magic = cursor.line()?;
        if magic != format!("{MAGIC} {VERSION}") {
            return Err(bad(format!("unsupported header {magic:?}")));
        }
        cursor.expect("[config]")?;
        let mut config_text = String::new();
        let mut line = cursor.line()?;
        while line != "[stats]" {
            config_text.push_str(&line);
            config_text.push('\n');
            line = cursor.line()?;
        }
        let config = RunConfig::parse_text(&config_text).map_err(|e| bad(format!("stored config: {e}")))?;

        let mut stats = NormStats {
            channels: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        line = cursor.line()?;
        while line != "[run]" {
            let (c, rest) = split_kv(&line)?;
            let (m, s) = rest.split_once(' ').ok_or_else(|| bad(format!("stats line {line:?}")))?;
            stats.channels.push(c.to_string());
            stats.mean.push(num(m)?);
            stats.std.push(num(s)?);
            line = cursor.line()?;
        }

        let mut window = None;
        let mut tau = None;
        let mut best_epoch = None;
        let mut best_f1 = None;
        let mut test_ids = Vec::new();
        line = cursor.line()?;
        while line != "[tensors]" {
            let (k, v) = split_kv(&line)?;
            match k {
                "window" => window = Some(v.parse().map_err(|_| bad(format!("window {v:?}")))?),
                "tau" => tau = Some(num(v)?),
                "best_epoch" if v == "none" => {}
                "best_epoch" => best_epoch = Some(v.parse().map_err(|_| bad(format!("best_epoch {v:?}")))?),
                "best_f1" if v == "none" => {}
                "best_f1" => best_f1 = Some(num(v)?),
                "test_id" => test_ids.push(v.to_string()),
                other => return Err(bad(format!("unknown run key {other:?}"))),
            }
            line = cursor.line()?;
        }
        let count_line = cursor.line()?;
        let (k, v) = split_kv(&count_line)?;
        if k != "count" {
            return Err(bad(format!("expected tensor count, got {count_line:?}")));
        }
        let count: usize = v.parse().map_err(|_| bad(format!("tensor count {v:?}")))?;

        let mut model = Model::seeded(config.model_spec(), 0).map_err(|e| bad(format!("stored config: {e}")))?;
        let expected: Vec<(String, Vec<usize>)> = model
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if count != expected.len() {
            return Err(bad(format!("{count} tensors stored, model has {}", expected.len())));
        }
        for ((name, shape), slot) in expected.iter().zip(model.tensors_mut()) {
            let header = cursor.line()?;
            let (stored_name, dims) = header.split_once(' ').ok_or_else(|| bad(format!("tensor header {header:?}")))?;
            let stored_shape = dims
                .split('x')
                .map(|d| d.parse::<usize>().map_err(|_| bad(format!("tensor header {header:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if stored_name != name || &stored_shape != shape {
                return Err(bad(format!("tensor {stored_name} {stored_shape:?}, expected {name} {shape:?}")));
            }
            let numel: usize = shape.iter().product();
            let raw = cursor.take(numel * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            *slot = Tensor::new(shape.clone(), data)?;
        }
        if cursor.pos != bytes.len() {
            return Err(bad("trailing bytes after the last tensor"));
        }
        Ok(Self {
            window: window.ok_or_else(|| bad("missing window"))?,
            tau: tau.ok_or_else(|| bad("missing tau"))?,
            config,
            stats,
            best_epoch,
            best_f1,
            test_ids,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn split_kv(line: &str) -> Result<(&str, &str)> {
    line.split_once(" = ").ok_or_else(|| bad(format!("expected key = value, got {line:?}")))
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(format!("not a number: {s:?}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<String> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        self.pos += end + 1;
        String::from_utf8(rest[..end].to_vec()).map_err(|_| bad("header is not UTF-8"))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let got = self.line()?;
        if got != want {
            return Err(bad(format!("expected {want:?}, got {got:?}")));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(bad("truncated tensor data"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}
