//! Closed-form reference trajectories along the contact axis.

use serde::{Deserialize, Serialize};

/// Reference signal for the contact-axis coordinate. All variants are
/// evaluable at arbitrary time, which keeps runs deterministic and lets
/// consumers finite-difference them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Slew-limited square wave: dives from `high` to `low` in the first
    /// half period, back in the second, ramping at most `slew` (m/s).
    Square { high: f64, low: f64, period: f64, slew: f64 },
    /// `amplitude * sin(omega t) + offset`.
    Sinusoid { amplitude: f64, omega: f64, offset: f64 },
    /// Ramp from the start coordinate to `value` at `slew`, then hold.
    Constant { value: f64, slew: f64 },
}

impl ReferenceSpec {
    /// Coordinate the trajectory starts at.
    pub fn start(&self, start_coord: f64) -> f64 {
        match self {
            ReferenceSpec::Square { high, .. } => *high,
            ReferenceSpec::Sinusoid { offset, .. } => *offset,
            ReferenceSpec::Constant { .. } => start_coord,
        }
    }

    /// Position and velocity at time `t`.
    pub fn eval(&self, t: f64, start_coord: f64) -> (f64, f64) {
        match *self {
            ReferenceSpec::Sinusoid { amplitude, omega, offset } => (
                amplitude * (omega * t).sin() + offset,
                amplitude * omega * (omega * t).cos(),
            ),
            ReferenceSpec::Constant { value, slew } => {
                ramp_toward(start_coord, value, slew, t)
            }
            ReferenceSpec::Square { high, low, period, slew } => {
                let half = period / 2.0;
                // Walk the completed half-periods to find the segment
                // start value, then ramp within the current segment.
                let k = (t / half).floor() as i64;
                let mut r = high;
                for seg in 0..k {
                    let target = if seg % 2 == 0 { low } else { high };
                    let step = slew * half;
                    r += (target - r).clamp(-step, step);
                }
                let target = if k % 2 == 0 { low } else { high };
                let (pos, vel) = ramp_toward(r, target, slew, t - k as f64 * half);
                (pos, vel)
            }
        }
    }
}

fn ramp_toward(from: f64, target: f64, slew: f64, elapsed: f64) -> (f64, f64) {
    let full = target - from;
    let travel = slew * elapsed.max(0.0);
    if travel >= full.abs() {
        (target, 0.0)
    } else {
        (from + full.signum() * travel, full.signum() * slew)
    }
}
