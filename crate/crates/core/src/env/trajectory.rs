use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rpm_to_rad_per_s, ScenarioKind};

/// One piece of a target trajectory. A ramp interpolates linearly from the
/// previous segment's value to `value` over `duration`; otherwise the target
/// jumps to `value` and holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub value: f64,
    pub ramp: bool,
}

/// Piecewise target signal in SI units: joint angle in rad for the arm,
/// cadence in rad/s for the crank. Past the end the last value holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
}

/// Inclusive target range for a scenario: 20°–120° for the arm, 20–60 RPM
/// for the crank.
pub fn target_range(kind: ScenarioKind) -> (f64, f64) {
    if kind.is_arm() {
        (20f64.to_radians(), 120f64.to_radians())
    } else {
        (rpm_to_rad_per_s(20.0), rpm_to_rad_per_s(60.0))
    }
}

const RAMP_PROBABILITY: f64 = 0.3;
const MIN_SEGMENT: f64 = 5.0;
const MAX_SEGMENT: f64 = 15.0;

/// Random trajectory covering at least `duration` seconds: segment lengths
/// uniform in `[5, 15]` s, values uniform over the scenario range, each
/// segment after the first a ramp with probability 0.3.
pub fn gen_trajectory<R: Rng + ?Sized>(kind: ScenarioKind, rng: &mut R, duration: f64) -> Trajectory {
    let (lo, hi) = target_range(kind);
    let mut segments = Vec::new();
    let mut total = 0.0;
    while total < duration {
        let seg_duration = rng.random_range(MIN_SEGMENT..=MAX_SEGMENT);
        let value = rng.random_range(lo..=hi);
        let ramp = rng.random_bool(RAMP_PROBABILITY) && !segments.is_empty();
        segments.push(Segment {
            duration: seg_duration,
            value,
            ramp,
        });
        total += seg_duration;
    }
    Trajectory { segments }
}

impl Trajectory {
    pub fn constant(value: f64, duration: f64) -> Self {
        Self {
            segments: vec![Segment {
                duration,
                value,
                ramp: false,
            }],
        }
    }

    /// Alternates a high and a low level every 15 s, starting high:
    /// 70°/20° for the arm, 50/30 RPM for the crank.
    pub fn two_level(kind: ScenarioKind, duration: f64) -> Self {
        let (high, low) = if kind.is_arm() {
            (70f64.to_radians(), 20f64.to_radians())
        } else {
            (rpm_to_rad_per_s(50.0), rpm_to_rad_per_s(30.0))
        };
        let count = (duration / 15.0).ceil() as usize;
        let segments = (0..count)
            .map(|i| Segment {
                duration: 15.0,
                value: if i % 2 == 0 { high } else { low },
                ramp: false,
            })
            .collect();
        Self { segments }
    }

    /// Fixed three-minute benchmark mixing holds, steps and ramps.
    pub fn ramp_benchmark(kind: ScenarioKind) -> Self {
        let plan: [(f64, f64, bool); 8] = [
            (20.0, 40.0, false),
            (30.0, 100.0, true),
            (20.0, 100.0, false),
            (30.0, 30.0, true),
            (20.0, 30.0, false),
            (20.0, 80.0, false),
            (20.0, 50.0, true),
            (20.0, 50.0, false),
        ];
        let (lo, hi) = target_range(kind);
        // Arm plan values are degrees inside 20–120; map them linearly onto
        // the scenario range so the crank gets the same shape in cadence.
        let map = |deg: f64| lo + (deg - 20.0) / 100.0 * (hi - lo);
        let segments = plan
            .iter()
            .map(|&(duration, value, ramp)| Segment {
                duration,
                value: map(value),
                ramp,
            })
            .collect();
        Self { segments }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Target at time `t` (seconds from episode start).
    pub fn target(&self, t: f64) -> f64 {
        let mut start = 0.0;
        let mut previous = self.segments.first().map_or(0.0, |s| s.value);
        for seg in &self.segments {
            if t < start + seg.duration {
                return if seg.ramp {
                    let frac = ((t - start) / seg.duration).clamp(0.0, 1.0);
                    previous + (seg.value - previous) * frac
                } else {
                    seg.value
                };
            }
            start += seg.duration;
            previous = seg.value;
        }
        previous
    }

    /// Index of the segment active at `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if t < start + seg.duration {
                return i;
            }
            start += seg.duration;
        }
        self.segments.len().saturating_sub(1)
    }
}
