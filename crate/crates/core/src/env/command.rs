//! Body-frame velocity commands.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::morphology::Bounds;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Command {
    /// Heading velocity (m/s).
    pub vx: f64,
    /// Lateral velocity (m/s).
    pub vy: f64,
    /// Yaw rate (rad/s).
    pub wz: f64,
    /// Time left before the next resample (s).
    pub remaining: f64,
}

impl Command {
    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.wz]
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.wz == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandRanges {
    pub vx_max: f64,
    pub vy_max: f64,
    pub wz_max: f64,
    /// Multiplies all three limits (evaluation drives at 0.75).
    pub scale: f64,
    pub duration: Bounds,
    /// Probability of a standing (all-zero) command.
    pub zero_probability: f64,
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            vx_max: 1.0,
            vy_max: 0.75,
            wz_max: 1.5,
            scale: 1.0,
            duration: Bounds::new(3.0, 6.0),
            zero_probability: 0.1,
        }
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    if max > 0.0 {
        rng.random_range(-max..=max)
    } else {
        0.0
    }
}

pub fn sample_command<R: Rng + ?Sized>(rng: &mut R, ranges: &CommandRanges) -> Command {
    let duration = if ranges.duration.hi > ranges.duration.lo {
        rng.random_range(ranges.duration.lo..=ranges.duration.hi)
    } else {
        ranges.duration.lo
    };
    // The zero draw is consumed unconditionally so streams stay aligned.
    let zero = rng.random::<f64>() < ranges.zero_probability;
    let s = ranges.scale;
    let vx = symmetric(rng, ranges.vx_max * s);
    let vy = symmetric(rng, ranges.vy_max * s);
    let wz = symmetric(rng, ranges.wz_max * s);
    if zero {
        Command { vx: 0.0, vy: 0.0, wz: 0.0, remaining: duration }
    } else {
        Command { vx, vy, wz, remaining: duration }
    }
}
