//! Sliding windows over profiles and their batching into `[B, n, w]` tensors.

use super::Profile;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowRef {
    /// Index into the profile slice the set was built from.
    pub profile: usize,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub width: usize,
    pub stride: usize,
    pub windows: Vec<WindowRef>,
    /// Profiles shorter than the width.
    pub skipped: usize,
}

/// Starts `0, s, 2s, …` while `start + w ≤ len`.
pub fn window_starts(len: usize, w: usize, s: usize) -> Result<Vec<usize>> {
    if w < 2 || s == 0 {
        return Err(Error::Config(format!("window {w} must be ≥ 2 and stride {s} ≥ 1")));
    }
    if len < w {
        return Ok(Vec::new());
    }
    Ok((0..=len - w).step_by(s).collect())
}

pub fn make_windows(profiles: &[Profile], w: usize, s: usize) -> Result<WindowSet> {
    let mut windows = Vec::new();
    let mut skipped = 0;
    for (i, p) in profiles.iter().enumerate() {
        let starts = window_starts(p.len(), w, s)?;
        if starts.is_empty() {
            skipped += 1;
            continue;
        }
        windows.extend(starts.into_iter().map(|start| WindowRef { profile: i, start }));
    }
    if skipped > 0 {
        log::warn!("{skipped} profile(s) shorter than window {w} skipped");
    }
    Ok(WindowSet {
        width: w,
        stride: s,
        windows,
        skipped,
    })
}

/// Length of the shortest profile, the default window width.
pub fn shortest_length(profiles: &[Profile]) -> Option<usize> {
    profiles.iter().map(Profile::len).min()
}

/// Label of a window: its profile's label, or for per-sample labels
/// whether any covered sample is anomalous.
pub fn window_label(profile: &Profile, start: usize, w: usize) -> Option<bool> {
    match &profile.point_labels {
        Some(points) => Some(points[start..start + w].iter().any(|&l| l)),
        None => profile.label,
    }
}

#[derive(Clone, Debug)]
pub struct WindowBatch {
    /// `[B, n, w]`.
    pub tensor: Tensor,
    pub refs: Vec<WindowRef>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Materializes the windows at `indices`.
    pub fn batch(&self, profiles: &[Profile], indices: &[usize]) -> Result<WindowBatch> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty window batch".into()));
        }
        let w = self.width;
        let n = profiles[self.windows[indices[0]].profile].channels.len();
        let mut data = Vec::with_capacity(indices.len() * n * w);
        let mut refs = Vec::with_capacity(indices.len());
        for &i in indices {
            let r = self.windows[i];
            let p = &profiles[r.profile];
            if p.channels.len() != n {
                return Err(Error::Data(format!("profile {} has {} channels, expected {n}", p.id, p.channels.len())));
            }
            for col in &p.data {
                data.extend_from_slice(&col[r.start..r.start + w]);
            }
            refs.push(r);
        }
        Ok(WindowBatch {
            tensor: Tensor::new(vec![indices.len(), n, w], data)?,
            refs,
        })
    }
}
