//! Drives, deceleration profiles and everything between raw CSV samples and
//! window tensors.

pub mod anomaly;
pub mod benchmark;
pub mod io;
pub mod normalize;
pub mod preprocess;
pub mod split;
pub mod synth;
pub mod window;

use crate::error::{Error, Result};

/// Sampling interval of every profile, in milliseconds.
pub const SAMPLE_MS: f64 = 10.0;

/// Signal columns of a drive, in CSV order after `t_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Signal {
    AccelPedal,
    BrakePedal,
    Speed,
    LatAcc,
    LongAcc,
}

impl Signal {
    pub const ALL: [Signal; 5] = [
        Signal::AccelPedal,
        Signal::BrakePedal,
        Signal::Speed,
        Signal::LatAcc,
        Signal::LongAcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::AccelPedal => "accel_pedal_pct",
            Signal::BrakePedal => "brake_pedal_pct",
            Signal::Speed => "speed_kph",
            Signal::LatAcc => "lat_acc_g",
            Signal::LongAcc => "long_acc_g",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Signal> {
        Signal::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Channels the model reads from deceleration profiles unless configured otherwise.
pub const DEFAULT_CHANNELS: [&str; 5] = [
    "long_acc_g",
    "speed_kph",
    "brake_pedal_pct",
    "accel_pedal_pct",
    "lat_acc_g",
];

/// Timestamped samples of one drive; `t_ms` strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDrive {
    pub id: String,
    pub t_ms: Vec<f64>,
    /// One column per [`Signal`], indexed by [`Signal::index`].
    pub signals: [Vec<f64>; 5],
}

impl RawDrive {
    pub fn new(id: impl Into<String>, t_ms: Vec<f64>, signals: [Vec<f64>; 5]) -> Result<Self> {
        let id = id.into();
        if signals.iter().any(|s| s.len() != t_ms.len()) {
            return Err(Error::Data(format!("drive {id}: signal columns differ in length from t_ms")));
        }
        if t_ms.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Data(format!("drive {id}: t_ms is not strictly increasing")));
        }
        if t_ms.iter().chain(signals.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("drive {id}: non-finite sample")));
        }
        Ok(Self { id, t_ms, signals })
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }

    pub fn signal(&self, s: Signal) -> &[f64] {
        &self.signals[s.index()]
    }
}

/// A contiguous multichannel series on the 10 ms grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub id: String,
    pub start_ms: f64,
    pub channels: Vec<String>,
    /// Channel-major samples, `data[c][i]`.
    pub data: Vec<Vec<f64>>,
    /// Whole-profile label, `Some(true)` = anomalous.
    pub label: Option<bool>,
    /// Per-sample labels, for benchmark data labelled by timestamp.
    pub point_labels: Option<Vec<bool>>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        let i = self.channels.iter().position(|c| c == name)?;
        Some(&mut self.data[i])
    }

    /// Copy restricted to `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Profile> {
        let data = names
            .iter()
            .map(|n| {
                self.channel(n)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::Data(format!("profile {} has no channel {n}", self.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Profile {
            channels: names.to_vec(),
            data,
            ..self.clone()
        })
    }
}
