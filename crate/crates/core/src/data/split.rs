//! Train/test split by profile.

use rand::seq::SliceRandom;

use super::Profile;
use crate::error::{Error, Result};
use crate::tensor::seeded_rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    /// Indices of profiles used for fitting; anomalous ones are already removed.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits each label class separately so both sides keep the class mix,
/// then drops anomalous profiles from the training side. Both index lists
/// are sorted.
pub fn split_profiles(profiles: &[Profile], train_fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::Config(format!("train split {train_fraction} outside (0, 1]")));
    }
    let mut rng = seeded_rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [None, Some(false), Some(true)] {
        let mut members: Vec<usize> = (0..profiles.len()).filter(|&i| profiles[i].label == class).collect();
        members.sort_by(|&a, &b| profiles[a].id.cmp(&profiles[b].id));
        members.shuffle(&mut rng);
        let cut = (train_fraction * members.len() as f64).round() as usize;
        if class != Some(true) {
            train.extend_from_slice(&members[..cut]);
        }
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
