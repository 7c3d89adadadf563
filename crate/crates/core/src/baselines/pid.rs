use serde::{Deserialize, Serialize};

use crate::neuromech::{crank_transfer, PlantSpec, PlantState, ScenarioKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        let g = Self { kp, ki, kd };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.kp, self.ki, self.kd].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "PID gains must be non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn from_log(x: &[f64]) -> Self {
        Self {
            kp: x[0].exp(),
            ki: x[1].exp(),
            kd: x[2].exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_measurement: Option<f64>,
}

/// One PID update with derivative on measurement.
///
/// Returns the raw signed command clamped to `[lo, hi]`. The integral
/// advances only when that does not push an already saturated output
/// further into saturation, and the integral term itself never exceeds the
/// output range.
pub fn pid_step(
    gains: &PidGains,
    state: &mut PidState,
    target: f64,
    measurement: f64,
    dt: f64,
    (lo, hi): (f64, f64),
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let e = target - measurement;
    let derivative = state.prev_measurement.map_or(0.0, |prev| -(measurement - prev) / dt);
    state.prev_measurement = Some(measurement);
    let pd = gains.kp * e + gains.kd * derivative;

    let mut candidate = state.integral + e * dt;
    if gains.ki > 0.0 {
        candidate = candidate.clamp(lo / gains.ki, hi / gains.ki);
    }
    let u_try = pd + gains.ki * candidate;
    let pushes_out = (u_try > hi && e > 0.0) || (u_try < lo && e < 0.0);
    if !pushes_out {
        state.integral = candidate;
    }
    Ok((pd + gains.ki * state.integral).clamp(lo, hi))
}

/// PID wired to a scenario: maps the scalar command onto stimulation
/// channels.
///
/// - vertical arm: the command drives the single flexor;
/// - horizontal arm: positive commands drive the flexor, negative ones the
///   extensor;
/// - cycling: the cadence command is distributed to each muscle by its
///   in-phase gate `max(0, cos(θ − θ_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
    kind: ScenarioKind,
    phases: Vec<f64>,
    dt: f64,
}

impl PidController {
    pub fn new(gains: PidGains, spec: &PlantSpec) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            state: PidState::default(),
            kind: spec.kind,
            phases: spec.crank.phases.clone(),
            dt: spec.dt_control,
        })
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
    }

    fn limits(&self) -> (f64, f64) {
        match self.kind {
            ScenarioKind::ArmHorizontal => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    /// Stimulation for the current plant state and target.
    pub fn act(&mut self, plant: &PlantState, target: f64) -> Result<Vec<f64>> {
        let measurement = match self.kind {
            ScenarioKind::Cycling => plant.omega,
            _ => plant.theta,
        };
        let limits = self.limits();
        let u = pid_step(&self.gains, &mut self.state, target, measurement, self.dt, limits)?;
        Ok(match self.kind {
            ScenarioKind::ArmVertical => vec![u],
            ScenarioKind::ArmHorizontal => vec![u.max(0.0), (-u).max(0.0)],
            ScenarioKind::Cycling => self
                .phases
                .iter()
                .map(|&p| (u * crank_transfer(plant.theta, p).max(0.0)).clamp(0.0, 1.0))
                .collect(),
        })
    }
}
