//! Synthetic drives: an ego vehicle following a braking lead under a
//! constant-time-gap controller, with pedal traces that pass the profile gates.
//!
//! Each drive is a cruise phase (accelerator pressed), one braking episode
//! (accelerator released) and a short resume phase (accelerator pressed again),
//! so it yields exactly one deceleration profile.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{RawDrive, SAMPLE_MS};
use crate::error::{Error, Result};
use crate::tensor::{seeded_rng, Rng};

pub const G: f64 = 9.81;
/// Bounds of the commanded acceleration during braking (m/s²).
pub const MAX_BRAKE_DECEL: f64 = -6.0;
/// Lag-one correlation of sensor noise at 10 ms.
const NOISE_RHO: f64 = 0.9;
/// Lateral noise stays well inside the lateral gate.
const MAX_LAT_NOISE_G: f64 = 0.03;

/// Instantaneous car-following state.
///
/// `delta` is the spacing error: desired gap minus actual gap, positive when
/// the ego vehicle is too close. The spacing error rate is the closing speed
/// `v_ego - v_front`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtgParams {
    /// Target time gap (s).
    pub h_gap: f64,
    pub lambda: f64,
    /// Distance to the lead vehicle (m).
    pub eps: f64,
    pub delta: f64,
    pub v_front: f64,
    pub v_ego: f64,
}

impl CtgParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.h_gap, self.lambda, self.eps, self.delta, self.v_front, self.v_ego];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite CTG parameter in {self:?}")));
        }
        if self.h_gap <= 0.0 || self.eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "CTG needs h_gap > 0 and eps > 0, got h_gap {} eps {}",
                self.h_gap, self.eps
            )));
        }
        Ok(())
    }

    pub fn eps_dot(&self) -> f64 {
        self.v_ego - self.v_front
    }

    pub fn a_ctg(&self) -> f64 {
        -(self.eps_dot() + self.lambda * self.delta) / self.h_gap
    }

    pub fn a_uam(&self) -> f64 {
        (self.v_front * self.v_front - self.v_ego * self.v_ego) / (2.0 * self.eps)
    }

    /// The stricter of the two laws, limited to braking.
    pub fn commanded(&self) -> f64 {
        self.a_ctg().min(self.a_uam()).clamp(MAX_BRAKE_DECEL, 0.0)
    }
}

/// Everything that shapes one drive apart from the noise draw.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSpec {
    /// Initial state; `delta` is recomputed from the gap every step afterwards.
    pub ctg: CtgParams,
    /// Gap kept at standstill (m); desired gap = `h_gap * v_ego + standstill_gap`.
    pub standstill_gap: f64,
    /// Lead deceleration (m/s², ≤ 0) and how long it lasts (s).
    pub front_decel: f64,
    pub front_decel_s: f64,
    pub cruise_s: f64,
    pub brake_s: f64,
    pub resume_s: f64,
    /// Accelerator stroke (%) while cruising and resuming.
    pub cruise_pedal: f64,
    /// Brake stroke (%) per m/s² of brake deceleration.
    pub brake_gain: f64,
    /// First-order lag of the brake actuator (s).
    pub lag_s: f64,
    /// Rolling and aerodynamic drag while coasting (m/s², < 0).
    pub drag: f64,
    /// Acceleration while resuming (m/s²).
    pub resume_accel: f64,
    /// Scales all sensor noise; 0 disables it.
    pub noise: f64,
}

/// Habits of one driver and vehicle, shared by every drive of a corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriverStyle {
    pub h_gap: f64,
    pub lambda: f64,
    pub brake_gain: f64,
    pub lag_s: f64,
    pub drag: f64,
    pub cruise_pedal: f64,
}

impl DriverStyle {
    pub fn sample(rng: &mut Rng) -> Self {
        Self {
            h_gap: rng.gen_range(0.3..0.5),
            lambda: rng.gen_range(0.3..0.6),
            brake_gain: rng.gen_range(8.0..12.0),
            lag_s: rng.gen_range(0.06..0.1),
            drag: -rng.gen_range(0.15..0.25),
            cruise_pedal: rng.gen_range(10.0..25.0),
        }
    }
}

impl DriveSpec {
    /// Draws a lead-braking scenario for a driver with `style`, jittering the
    /// style slightly from drive to drive.
    pub fn sample(style: &DriverStyle, rng: &mut Rng) -> Self {
        let mut jitter = |v: f64| v * rng.gen_range(0.95..1.05);
        let (h_gap, lambda, brake_gain, lag_s, drag, cruise_pedal) = (
            jitter(style.h_gap),
            jitter(style.lambda),
            jitter(style.brake_gain),
            jitter(style.lag_s),
            jitter(style.drag),
            jitter(style.cruise_pedal),
        );
        let v_ego = rng.gen_range(14.5..17.5);
        let closing = rng.gen_range(0.85..1.15);
        let standstill_gap = 2.0;
        let delta = rng.gen_range(-0.1..0.1);
        Self {
            ctg: CtgParams {
                h_gap,
                lambda,
                eps: h_gap * v_ego + standstill_gap - delta,
                delta,
                v_front: v_ego - closing,
                v_ego,
            },
            standstill_gap,
            front_decel: -rng.gen_range(1.8..2.2),
            front_decel_s: rng.gen_range(0.25..0.3),
            cruise_s: rng.gen_range(0.3..0.6),
            brake_s: rng.gen_range(0.7..1.3),
            resume_s: 0.3,
            cruise_pedal,
            brake_gain,
            lag_s,
            drag,
            resume_accel: 0.5,
            noise: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.ctg.validate()?;
        let bad = |what: &str| Err(Error::InvalidArgument(format!("drive spec: {what}")));
        if self.front_decel > 0.0 || self.front_decel_s < 0.0 {
            return bad("lead deceleration must be ≤ 0 with a nonnegative duration");
        }
        if self.cruise_s <= 0.0 || self.brake_s <= 0.0 || self.resume_s <= 0.0 {
            return bad("phase durations must be positive");
        }
        if self.lag_s <= 0.0 || self.drag >= 0.0 || self.brake_gain <= 0.0 || self.noise < 0.0 {
            return bad("lag and brake gain must be positive, drag negative, noise nonnegative");
        }
        if self.cruise_pedal < 0.5 {
            return bad("cruise pedal must count as pressed");
        }
        Ok(())
    }
}

/// Sensor noise as a stationary AR(1) process; real signals arrive filtered.
struct Smooth {
    state: f64,
    innovation: Normal<f64>,
}

impl Smooth {
    fn new(sd: f64) -> Self {
        Self {
            state: 0.0,
            innovation: Normal::new(0.0, sd * (1.0 - NOISE_RHO * NOISE_RHO).sqrt()).expect("finite noise scale"),
        }
    }

    fn next(&mut self, rng: &mut Rng) -> f64 {
        self.state = NOISE_RHO * self.state + self.innovation.sample(rng);
        self.state
    }
}

fn samples(seconds: f64) -> usize {
    (seconds * 1000.0 / SAMPLE_MS).round().max(1.0) as usize
}

/// Simulates one drive at 10 ms. During braking the ego acceleration is the
/// lagged commanded brake deceleration plus drag, so speed falls monotonically.
pub fn synthesize_drive(id: impl Into<String>, spec: &DriveSpec, seed: u64) -> Result<RawDrive> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let dt = SAMPLE_MS / 1000.0;
    let mut speed_noise = Smooth::new(0.05 * spec.noise);
    let mut acc_noise = Smooth::new(0.004 * spec.noise);
    let mut brake_noise = Smooth::new(0.15 * spec.noise);
    let mut lat_noise = Smooth::new(0.01 * spec.noise);

    let (n_cruise, n_brake, n_resume) = (samples(spec.cruise_s), samples(spec.brake_s), samples(spec.resume_s));
    let total = n_cruise + n_brake + n_resume;
    let mut t_ms = Vec::with_capacity(total);
    let mut cols: [Vec<f64>; 5] = Default::default();

    let mut state = spec.ctg;
    let mut brake_decel = 0.0;
    for k in 0..total {
        let braking = (n_cruise..n_cruise + n_brake).contains(&k);
        let (accel_pct, brake_pct, a_ego) = if braking {
            let elapsed = (k - n_cruise) as f64 * dt;
            let a_front = if elapsed < spec.front_decel_s { spec.front_decel } else { 0.0 };
            state.delta = state.h_gap * state.v_ego + spec.standstill_gap - state.eps;
            brake_decel += (state.commanded() - brake_decel) * dt / spec.lag_s;
            let a_ego = brake_decel + spec.drag;
            let brake_pct = spec.brake_gain * -brake_decel;
            // advance the lead; the ego speed is advanced below
            state.eps += (state.v_front - state.v_ego) * dt;
            state.v_front = (state.v_front + a_front * dt).max(0.0);
            (0.0, brake_pct, a_ego)
        } else if k < n_cruise {
            (spec.cruise_pedal, 0.0, 0.0)
        } else {
            brake_decel = 0.0;
            (spec.cruise_pedal, 0.0, spec.resume_accel)
        };
        if !braking {
            state.eps += (state.v_front - state.v_ego) * dt;
        }

        t_ms.push(k as f64 * SAMPLE_MS);
        cols[0].push(accel_pct);
        cols[1].push((brake_pct + brake_noise.next(&mut rng)).max(0.0));
        cols[2].push(state.v_ego * 3.6 + speed_noise.next(&mut rng));
        cols[3].push(lat_noise.next(&mut rng).clamp(-MAX_LAT_NOISE_G, MAX_LAT_NOISE_G));
        cols[4].push(a_ego / G + acc_noise.next(&mut rng));

        state.v_ego = (state.v_ego + a_ego * dt).max(0.0);
    }
    RawDrive::new(id, t_ms, cols)
}

/// `count` drives of one driver, named `drive_000`, `drive_001`, ….
pub fn generate_drives(count: usize, seed: u64) -> Result<Vec<RawDrive>> {
    let mut rng = seeded_rng(seed);
    let style = DriverStyle::sample(&mut rng);
    (0..count)
        .map(|i| {
            let spec = DriveSpec::sample(&style, &mut rng);
            let noise_seed = rng.gen();
            synthesize_drive(format!("drive_{i:03}"), &spec, noise_seed)
        })
        .collect()
}
