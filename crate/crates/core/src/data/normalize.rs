//! Per-channel z-scoring with statistics taken from the training profiles.

use super::Profile;
use crate::error::{Error, Result};

/// Standard deviations below this are replaced by it.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

impl NormStats {
    /// Pooled mean and standard deviation of every sample of every profile.
    pub fn fit(profiles: &[Profile]) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::Data("normalization statistics need at least one profile".into()))?;
        let channels = first.channels.clone();
        let mut mean = Vec::with_capacity(channels.len());
        let mut std = Vec::with_capacity(channels.len());
        for name in &channels {
            let columns = profiles
                .iter()
                .map(|p| {
                    p.channel(name)
                        .ok_or_else(|| Error::Data(format!("profile {} lacks channel {name}", p.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            let count: usize = columns.iter().map(|c| c.len()).sum();
            if count == 0 {
                return Err(Error::Data(format!("channel {name} has no samples")));
            }
            let m = columns.iter().flat_map(|c| c.iter()).sum::<f64>() / count as f64;
            let var = columns.iter().flat_map(|c| c.iter()).map(|v| (v - m) * (v - m)).sum::<f64>() / count as f64;
            mean.push(m);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Ok(Self { channels, mean, std })
    }

    pub fn apply(&self, profile: &Profile) -> Result<Profile> {
        let mut out = profile.select(&self.channels)?;
        for ((col, m), s) in out.data.iter_mut().zip(&self.mean).zip(&self.std) {
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}

/// Normalizes `profiles` with `stats`, fitting them on `profiles` when absent.
pub fn normalize(profiles: &[Profile], stats: Option<&NormStats>) -> Result<(Vec<Profile>, NormStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormStats::fit(profiles)?,
    };
    let out = profiles.iter().map(|p| stats.apply(p)).collect::<Result<Vec<_>>>()?;
    Ok((out, stats))
}
