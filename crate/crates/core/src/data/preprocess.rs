//! Resampling onto the 10 ms grid and deceleration-profile extraction.

use super::{Profile, RawDrive, Signal, SAMPLE_MS};
use crate::error::{Error, Result};

/// Accelerator stroke (%) below which the pedal counts as released.
pub const ACCEL_RELEASED_BELOW: f64 = 0.5;
/// A profile's maximum speed (kph) must exceed this.
pub const MIN_PEAK_SPEED_KPH: f64 = 15.0;
/// A profile's maximum brake stroke (%) must exceed this.
pub const MIN_PEAK_BRAKE_PCT: f64 = 2.0;
/// |lateral acceleration| (g) must stay below this throughout.
pub const MAX_ABS_LAT_G: f64 = 0.07;

/// Linear interpolation of every signal onto `t_0, t_0 + 10, …` up to the last timestamp.
pub fn resample_10ms(raw: &RawDrive) -> Result<RawDrive> {
    if raw.len() < 2 {
        return Err(Error::Data(format!(
            "drive {}: resampling needs at least 2 samples, got {}",
            raw.id,
            raw.len()
        )));
    }
    let t0 = raw.t_ms[0];
    let span = raw.t_ms[raw.len() - 1] - t0;
    // tolerate rounding in the span so an endpoint on the grid is kept
    let steps = (span / SAMPLE_MS + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| t0 + k as f64 * SAMPLE_MS).collect();

    let mut signals: [Vec<f64>; 5] = Default::default();
    for (out, column) in signals.iter_mut().zip(&raw.signals) {
        out.reserve(grid.len());
        let mut seg = 0;
        for &t in &grid {
            while seg + 2 < raw.len() && raw.t_ms[seg + 1] <= t {
                seg += 1;
            }
            let (ta, tb) = (raw.t_ms[seg], raw.t_ms[seg + 1]);
            let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            out.push(column[seg] + frac * (column[seg + 1] - column[seg]));
        }
    }
    RawDrive::new(raw.id.clone(), grid, signals)
}

/// Maximal runs `[start, end)` where the accelerator is released.
fn released_runs(accel: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &a) in accel.iter().enumerate() {
        match (a < ACCEL_RELEASED_BELOW, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, accel.len()));
    }
    runs
}

/// Sample ranges of the runs that pass all three gates.
pub fn profile_ranges(drive: &RawDrive) -> Vec<(usize, usize)> {
    let speed = drive.signal(Signal::Speed);
    let brake = drive.signal(Signal::BrakePedal);
    let lat = drive.signal(Signal::LatAcc);
    released_runs(drive.signal(Signal::AccelPedal))
        .into_iter()
        .filter(|&(s, e)| e - s >= 2)
        .filter(|&(s, e)| {
            let peak_speed = speed[s..e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let peak_brake = brake[s..e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            peak_speed > MIN_PEAK_SPEED_KPH && peak_brake > MIN_PEAK_BRAKE_PCT
        })
        .filter(|&(s, e)| lat[s..e].iter().all(|v| v.abs() < MAX_ABS_LAT_G))
        .collect()
}

/// Deceleration profiles of a resampled drive, named `<drive id>_<k>`.
pub fn extract_profiles(drive: &RawDrive) -> Vec<Profile> {
    profile_ranges(drive)
        .into_iter()
        .enumerate()
        .map(|(k, (s, e))| Profile {
            id: format!("{}_{k}", drive.id),
            start_ms: drive.t_ms[s],
            channels: Signal::ALL.iter().map(|c| c.name().to_string()).collect(),
            data: drive.signals.iter().map(|col| col[s..e].to_vec()).collect(),
            label: None,
            point_labels: None,
        })
        .collect()
}
