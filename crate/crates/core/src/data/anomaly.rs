//! Anomaly injection into extracted deceleration profiles.
//!
//! A perturbation is an extra acceleration trace `Δa` (m/s²). It is added to
//! `long_acc_g`, integrated into `speed_kph` and mirrored on the brake pedal,
//! so the accelerator and lateral channels and hence the gates are untouched.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::synth::G;
use super::{Profile, Signal, SAMPLE_MS};
use crate::error::{Error, Result};
use crate::tensor::{seeded_rng, Rng};

/// Brake stroke (%) per m/s² of injected deceleration.
const BRAKE_GAIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnomalyKind {
    /// A short hard brake pulse late in the episode.
    LateSpike,
    /// Deceleration oscillating around its normal course.
    Oscillation,
    /// Deceleration held instead of fading out.
    NonConverging,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::LateSpike, AnomalyKind::Oscillation, AnomalyKind::NonConverging];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::LateSpike => "late_spike",
            AnomalyKind::Oscillation => "oscillation",
            AnomalyKind::NonConverging => "non_converging",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Number of profiles marked anomalous: ⌈ratio · count⌉.
pub fn anomaly_count(ratio: f64, count: usize) -> usize {
    // the slack keeps products such as 0.6 · 50 from rounding up past an integer
    ((ratio * count as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Index of the strongest deceleration.
fn peak(accel: &[f64]) -> usize {
    accel
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

fn perturbation(kind: AnomalyKind, accel: &[f64], rng: &mut Rng) -> Vec<f64> {
    let len = accel.len();
    let dt = SAMPLE_MS / 1000.0;
    let at = |frac: f64| ((frac * len as f64).round() as usize).min(len - 1);
    let mut delta = vec![0.0; len];
    match kind {
        AnomalyKind::LateSpike => {
            let width = ((rng.gen_range(0.3..0.4) / dt).round() as usize).clamp(1, len);
            let start = at(0.5).saturating_sub(width / 2);
            let depth = rng.gen_range(6.0..8.0);
            let end = (start + width).min(len);
            for (i, d) in delta.iter_mut().enumerate().take(end).skip(start) {
                // half-sine pulse
                let phase = (i - start) as f64 / width as f64;
                *d = -depth * (std::f64::consts::PI * phase).sin();
            }
        }
        AnomalyKind::Oscillation => {
            let start = 0;
            let amplitude = rng.gen_range(2.5..3.5);
            let period = rng.gen_range(0.15..0.25);
            for (i, d) in delta.iter_mut().enumerate().skip(start) {
                let t = (i - start) as f64 * dt;
                *d = amplitude * (2.0 * std::f64::consts::PI * t / period).sin();
            }
        }
        AnomalyKind::NonConverging => {
            let start = peak(accel);
            let hold = accel[start].min(-rng.gen_range(3.5..5.0));
            for (d, &a) in delta.iter_mut().zip(accel).skip(start) {
                *d = (hold - a).min(0.0);
            }
        }
    }
    delta
}

fn apply(profile: &mut Profile, kind: AnomalyKind, rng: &mut Rng) -> Result<()> {
    let missing = |s: Signal| Error::Data(format!("profile {} has no {} channel to perturb", profile.id, s.name()));
    let accel: Vec<f64> = profile
        .channel(Signal::LongAcc.name())
        .ok_or_else(|| missing(Signal::LongAcc))?
        .iter()
        .map(|g| g * G)
        .collect();
    for s in [Signal::Speed, Signal::BrakePedal] {
        profile.channel(s.name()).ok_or_else(|| missing(s))?;
    }
    let delta = perturbation(kind, &accel, rng);
    let dt = SAMPLE_MS / 1000.0;

    let long = profile.channel_mut(Signal::LongAcc.name()).expect("checked");
    long.iter_mut().zip(&delta).for_each(|(v, d)| *v += d / G);
    let speed = profile.channel_mut(Signal::Speed.name()).expect("checked");
    let mut shift = 0.0;
    for (v, d) in speed.iter_mut().zip(&delta) {
        *v = (*v + shift).max(0.0);
        shift += d * dt * 3.6;
    }
    let brake = profile.channel_mut(Signal::BrakePedal.name()).expect("checked");
    brake.iter_mut().zip(&delta).for_each(|(v, d)| *v = (*v - BRAKE_GAIN * d).max(0.0));
    Ok(())
}

/// Labels every profile, perturbing ⌈ratio · count⌉ of them chosen by `seed`.
/// Kinds are assigned in turn over the chosen profiles. Returns the kinds per
/// profile alongside the labelled copies.
pub fn inject_anomalies(
    profiles: &[Profile],
    ratio: f64,
    kinds: &[AnomalyKind],
    seed: u64,
) -> Result<(Vec<Profile>, Vec<Option<AnomalyKind>>)> {
    if profiles.is_empty() {
        return Err(Error::Data("anomaly injection needs at least one profile".into()));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!("anomaly ratio {ratio} outside [0, 1]")));
    }
    let count = anomaly_count(ratio, profiles.len());
    if count > 0 && kinds.is_empty() {
        return Err(Error::Config("anomaly injection needs at least one kind".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.shuffle(&mut rng);

    let mut out: Vec<Profile> = profiles
        .iter()
        .map(|p| Profile {
            label: Some(false),
            ..p.clone()
        })
        .collect();
    let mut assigned = vec![None; profiles.len()];
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    for (j, &i) in chosen.iter().enumerate() {
        let kind = kinds[j % kinds.len()];
        apply(&mut out[i], kind, &mut rng)?;
        out[i].label = Some(true);
        assigned[i] = Some(kind);
    }
    Ok((out, assigned))
}
