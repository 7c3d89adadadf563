use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-group constants. Times in seconds, torque in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuscleParams {
    pub max_torque: f64,
    pub tau_act: f64,
    pub tau_deact: f64,
    pub tau_fat: f64,
    pub tau_rec: f64,
    pub phi_min: f64,
}

impl Default for MuscleParams {
    fn default() -> Self {
        Self {
            max_torque: 6.0,
            tau_act: 0.015,
            tau_deact: 0.05,
            tau_fat: 30.0,
            tau_rec: 50.0,
            phi_min: 0.2,
        }
    }
}

impl MuscleParams {
    pub fn with_max_torque(max_torque: f64) -> Self {
        Self {
            max_torque,
            ..Self::default()
        }
    }

    /// `(da/dt, dφ/dt)` for stimulation `u`.
    #[inline]
    pub(crate) fn derivative(&self, activation: f64, fatigue: f64, u: f64) -> (f64, f64) {
        let tau = if u >= activation { self.tau_act } else { self.tau_deact };
        let da = (u - activation) / tau;
        let dphi =
            (self.phi_min - fatigue) * activation / self.tau_fat + (1.0 - fatigue) * (1.0 - activation) / self.tau_rec;
        (da, dphi)
    }

    /// Fatigue level at which `dφ/dt = 0` for a constant activation.
    pub fn fatigue_steady_state(&self, activation: f64) -> f64 {
        let fat = activation / self.tau_fat;
        let rec = (1.0 - activation) / self.tau_rec;
        (self.phi_min * fat + rec) / (fat + rec)
    }

    #[inline]
    pub(crate) fn clamp(&self, state: &mut MuscleState) {
        state.activation = state.activation.clamp(0.0, 1.0);
        state.fatigue = state.fatigue.clamp(self.phi_min, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleState {
    /// Activation in `[0, 1]`.
    pub activation: f64,
    /// Fraction of maximum force still available, in `[phi_min, 1]`.
    pub fatigue: f64,
}

impl MuscleState {
    pub fn fresh() -> Self {
        Self {
            activation: 0.0,
            fatigue: 1.0,
        }
    }
}

/// Maximum integration step for a standalone muscle update.
const MAX_SUBSTEP: f64 = 0.005;

/// Advances one muscle group by `dt` under constant stimulation `u`.
///
/// Activation follows `da/dt = (u − a)/τ` with `τ = tau_act` while rising and
/// `tau_deact` while falling. Fatigue follows
/// `dφ/dt = (φ_min − φ)·a/τ_fat + (1 − φ)·(1 − a)/τ_rec`.
/// Both are integrated with RK4 in substeps of at most 5 ms and clamped to
/// their intervals.
pub fn muscle_step(params: &MuscleParams, state: MuscleState, u: f64, dt: f64) -> Result<MuscleState> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("stimulation {u} outside [0, 1]")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    let n = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut s = state;
    for _ in 0..n {
        let f = |a: f64, p: f64| params.derivative(a, p, u);
        let k1 = f(s.activation, s.fatigue);
        let k2 = f(s.activation + 0.5 * h * k1.0, s.fatigue + 0.5 * h * k1.1);
        let k3 = f(s.activation + 0.5 * h * k2.0, s.fatigue + 0.5 * h * k2.1);
        let k4 = f(s.activation + h * k3.0, s.fatigue + h * k3.1);
        s.activation += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        s.fatigue += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        params.clamp(&mut s);
    }
    Ok(s)
}
