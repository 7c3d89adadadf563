use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MuscleParams, MuscleState};
use crate::{Error, Result};

const MAX_CHANNELS: usize = 6;
const MAX_STATE: usize = 2 + 2 * MAX_CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ArmVertical,
    ArmHorizontal,
    Cycling,
}

impl ScenarioKind {
    pub fn n_channels(self) -> usize {
        match self {
            ScenarioKind::ArmVertical => 1,
            ScenarioKind::ArmHorizontal => 2,
            ScenarioKind::Cycling => 6,
        }
    }

    pub fn is_arm(self) -> bool {
        !matches!(self, ScenarioKind::Cycling)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ArmVertical => "arm-vertical",
            ScenarioKind::ArmHorizontal => "arm-horizontal",
            ScenarioKind::Cycling => "cycling",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arm-vertical" | "vertical" => Ok(ScenarioKind::ArmVertical),
            "arm-horizontal" | "horizontal" => Ok(ScenarioKind::ArmHorizontal),
            "cycling" => Ok(ScenarioKind::Cycling),
            other => Err(Error::InvalidArgument(format!("unknown scenario `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Elbow mechanics. Angles in radians, `theta = 0` is the fully extended
/// arm hanging straight down in the vertical scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    pub mass: f64,
    pub com_length: f64,
    pub inertia: f64,
    pub damping: f64,
    pub gravity: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub stop_stiffness: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            com_length: 0.15,
            inertia: 0.06,
            damping: 0.2,
            gravity: 9.81,
            theta_min: 0.0,
            theta_max: 150f64.to_radians(),
            stop_stiffness: 20.0,
        }
    }
}

impl ArmParams {
    /// Peak gravitational torque `m·g·lc`.
    pub fn gravity_torque(&self) -> f64 {
        self.mass * self.gravity * self.com_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrankParams {
    pub inertia: f64,
    /// Crank angle of peak propulsive transfer for each muscle group.
    pub phases: Vec<f64>,
}

impl Default for CrankParams {
    fn default() -> Self {
        // Right rectus femoris, gluteus maximus, hamstrings; left leg +180°.
        let right = [0.0f64, 80.0, 160.0];
        let phases = right
            .iter()
            .chain(right.iter().map(|d| d + 180.0).collect::<Vec<_>>().iter())
            .map(|d| d.to_radians())
            .collect();
        Self { inertia: 0.5, phases }
    }
}

/// Immutable description of a plant. Every field can be overridden from the
/// run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub kind: ScenarioKind,
    pub muscles: Vec<MuscleParams>,
    #[serde(default)]
    pub arm: ArmParams,
    #[serde(default)]
    pub crank: CrankParams,
    pub dt_control: f64,
    pub substeps: usize,
    /// Keep fatigue from the previous episode on reset instead of starting
    /// with fresh muscles.
    #[serde(default)]
    pub carry_over_fatigue: bool,
}

impl PlantSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        let muscles = match kind {
            ScenarioKind::ArmVertical => vec![MuscleParams::default()],
            ScenarioKind::ArmHorizontal => vec![MuscleParams::default(); 2],
            ScenarioKind::Cycling => vec![MuscleParams::with_max_torque(8.0); 6],
        };
        Self {
            kind,
            muscles,
            arm: ArmParams::default(),
            crank: CrankParams::default(),
            dt_control: 0.05,
            substeps: 10,
            carry_over_fatigue: false,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.kind.n_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kind.n_channels();
        if self.muscles.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} expects {n} muscle groups, got {}",
                self.kind,
                self.muscles.len()
            )));
        }
        if self.kind == ScenarioKind::Cycling && self.crank.phases.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cycling expects {n} crank phases, got {}",
                self.crank.phases.len()
            )));
        }
        if !(self.dt_control > 0.0) || self.substeps == 0 {
            return Err(Error::InvalidArgument(
                "dt_control and substeps must be positive".into(),
            ));
        }
        for m in &self.muscles {
            let positive = [m.tau_act, m.tau_deact, m.tau_fat, m.tau_rec].iter().all(|t| *t > 0.0);
            if !positive || !(0.0..=1.0).contains(&m.phi_min) || m.max_torque < 0.0 {
                return Err(Error::InvalidArgument(format!("invalid muscle parameters {m:?}")));
            }
        }
        if self.kind.is_arm() && !(self.arm.theta_min < self.arm.theta_max && self.arm.inertia > 0.0) {
            return Err(Error::InvalidArgument("invalid arm parameters".into()));
        }
        if self.kind == ScenarioKind::Cycling && !(self.crank.inertia > 0.0) {
            return Err(Error::InvalidArgument("crank inertia must be positive".into()));
        }
        Ok(())
    }

    /// Net joint or crank torque for the given kinematics and muscle states.
    fn torque(&self, theta: f64, omega: f64, act: &[f64], fat: &[f64]) -> f64 {
        let force = |i: usize| act[i] * fat[i] * self.muscles[i].max_torque;
        match self.kind {
            ScenarioKind::Cycling => (0..self.muscles.len())
                .map(|i| force(i) * crank_transfer(theta, self.crank.phases[i]))
                .sum(),
            ScenarioKind::ArmVertical | ScenarioKind::ArmHorizontal => {
                let arm = &self.arm;
                let muscle = if self.kind == ScenarioKind::ArmVertical {
                    force(0)
                } else {
                    force(0) - force(1)
                };
                let gravity = if self.kind == ScenarioKind::ArmVertical {
                    arm.gravity_torque() * theta.sin()
                } else {
                    0.0
                };
                let stop = if theta < arm.theta_min {
                    arm.stop_stiffness * (arm.theta_min - theta)
                } else if theta > arm.theta_max {
                    -arm.stop_stiffness * (theta - arm.theta_max)
                } else {
                    0.0
                };
                muscle - gravity - arm.damping * omega + stop
            }
        }
    }

    fn inertia(&self) -> f64 {
        match self.kind {
            ScenarioKind::Cycling => self.crank.inertia,
            _ => self.arm.inertia,
        }
    }

    /// Time derivative of `[θ, ω, a_1..a_n, φ_1..φ_n]`.
    fn derivative(&self, y: &[f64; MAX_STATE], u: &[f64], dy: &mut [f64; MAX_STATE]) {
        let n = self.muscles.len();
        let (act, fat) = (&y[2..2 + n], &y[2 + n..2 + 2 * n]);
        dy[0] = y[1];
        dy[1] = self.torque(y[0], y[1], act, fat) / self.inertia();
        for i in 0..n {
            let (da, dphi) = self.muscles[i].derivative(act[i], fat[i], u[i]);
            dy[2 + i] = da;
            dy[2 + n + i] = dphi;
        }
    }
}

/// Ground-truth physical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Joint angle (arm) or crank angle wrapped to `[0, 2π)` (cycling), rad.
    pub theta: f64,
    /// Angular velocity, rad/s; the cadence for the crank.
    pub omega: f64,
    pub muscles: Vec<MuscleState>,
    /// Elapsed control steps.
    pub steps: u64,
    /// Elapsed time, always `steps · dt_control`.
    pub time: f64,
}

impl PlantState {
    pub fn at_rest(spec: &PlantSpec, theta: f64) -> Self {
        Self {
            theta,
            omega: 0.0,
            muscles: vec![MuscleState::fresh(); spec.n_channels()],
            steps: 0,
            time: 0.0,
        }
    }

    pub fn activations(&self) -> Vec<f64> {
        self.muscles.iter().map(|m| m.activation).collect()
    }

    pub fn fatigue(&self) -> Vec<f64> {
        self.muscles.iter().map(|m| m.fatigue).collect()
    }

    fn pack(&self, y: &mut [f64; MAX_STATE]) {
        let n = self.muscles.len();
        y[0] = self.theta;
        y[1] = self.omega;
        for (i, m) in self.muscles.iter().enumerate() {
            y[2 + i] = m.activation;
            y[2 + n + i] = m.fatigue;
        }
    }
}

/// Torque transfer of a crank muscle with peak phase `phase`.
pub fn crank_transfer(theta: f64, phase: f64) -> f64 {
    (theta - phase).cos()
}

/// Mechanical energy of the arm: kinetic plus gravitational potential
/// (zero with the arm hanging down).
pub fn arm_energy(spec: &PlantSpec, state: &PlantState) -> f64 {
    let arm = &spec.arm;
    let potential = if spec.kind == ScenarioKind::ArmVertical {
        arm.gravity_torque() * (1.0 - state.theta.cos())
    } else {
        0.0
    };
    0.5 * arm.inertia * state.omega * state.omega + potential
}

/// Advances the plant one control step with RK4 substeps, holding the
/// stimulation constant over the step.
pub fn plant_step(spec: &PlantSpec, state: &PlantState, action: &[f64]) -> Result<PlantState> {
    let n = spec.n_channels();
    if action.len() != n {
        return Err(Error::shape("stimulation", &[n], &[action.len()]));
    }
    if let Some(u) = action.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return Err(Error::InvalidArgument(format!("stimulation {u} outside [0, 1]")));
    }
    if state.muscles.len() != n {
        return Err(Error::shape("plant muscle states", &[n], &[state.muscles.len()]));
    }

    let h = spec.dt_control / spec.substeps as f64;
    let dim = 2 + 2 * n;
    let mut y = [0.0; MAX_STATE];
    state.pack(&mut y);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        [0.0; MAX_STATE],
        [0.0; MAX_STATE],
        [0.0; MAX_STATE],
        [0.0; MAX_STATE],
        [0.0; MAX_STATE],
    );
    for _ in 0..spec.substeps {
        spec.derivative(&y, action, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        spec.derivative(&tmp, action, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        spec.derivative(&tmp, action, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        spec.derivative(&tmp, action, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (i, m) in spec.muscles.iter().enumerate() {
            y[2 + i] = y[2 + i].clamp(0.0, 1.0);
            y[2 + n + i] = y[2 + n + i].clamp(m.phi_min, 1.0);
        }
    }

    let steps = state.steps + 1;
    let time = steps as f64 * spec.dt_control;
    if y[..dim].iter().any(|v| !v.is_finite()) {
        return Err(Error::SimulationFault {
            time,
            reason: format!("non-finite state {:?}", &y[..dim]),
        });
    }

    let (mut theta, mut omega) = (y[0], y[1]);
    match spec.kind {
        ScenarioKind::Cycling => theta = theta.rem_euclid(TAU),
        _ => {
            let arm = &spec.arm;
            if theta < arm.theta_min {
                theta = arm.theta_min;
                omega = omega.max(0.0);
            } else if theta > arm.theta_max {
                theta = arm.theta_max;
                omega = omega.min(0.0);
            }
        }
    }
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if theta >= TAU {
        theta = 0.0;
    }
    let muscles = (0..n)
        .map(|i| MuscleState {
            activation: y[2 + i],
            fatigue: y[2 + n + i],
        })
        .collect();
    Ok(PlantState {
        theta,
        omega,
        muscles,
        steps,
        time,
    })
}

/// Random initial state: arm angle uniform over the middle 80% of the joint
/// range at rest; crank angle uniform on the circle with cadence uniform in
/// `[1, 5]` rad/s. Muscles start inactive and fresh unless the spec asks to
/// carry fatigue over from `previous`.
pub fn plant_reset<R: Rng + ?Sized>(spec: &PlantSpec, rng: &mut R, previous: Option<&PlantState>) -> PlantState {
    let (theta, omega) = match spec.kind {
        ScenarioKind::Cycling => (rng.random_range(0.0..TAU), rng.random_range(1.0..=5.0)),
        _ => {
            let (lo, hi) = (spec.arm.theta_min, spec.arm.theta_max);
            let margin = 0.1 * (hi - lo);
            (rng.random_range(lo + margin..=hi - margin), 0.0)
        }
    };
    let mut state = PlantState::at_rest(spec, theta);
    state.omega = omega;
    if spec.carry_over_fatigue {
        if let Some(prev) = previous {
            for (m, p) in state.muscles.iter_mut().zip(&prev.muscles) {
                m.fatigue = p.fatigue;
            }
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn run(spec: &PlantSpec, mut s: PlantState, u: &[f64], steps: usize) -> PlantState {
        for _ in 0..steps {
            s = plant_step(spec, &s, u).unwrap();
        }
        s
    }

    #[test]
    fn vertical_arm_rests_at_bottom() {
        let spec = PlantSpec::new(ScenarioKind::ArmVertical);
        let s = run(&spec, PlantState::at_rest(&spec, 0.0), &[0.0], 200);
        assert_eq!(s.theta, 0.0);
        assert_eq!(s.omega, 0.0);
    }

    #[test]
    fn frictionless_crank_keeps_cadence() {
        let spec = PlantSpec::new(ScenarioKind::Cycling);
        let mut s = PlantState::at_rest(&spec, 0.3);
        s.omega = 3.0;
        let end = run(&spec, s, &[0.0; 6], 1800);
        assert!((end.omega - 3.0).abs() < 1e-12);
        let expected = (0.3 + 3.0 * 90.0f64).rem_euclid(TAU);
        assert!((end.theta - expected).abs() < 1e-9);
        assert!((0.0..TAU).contains(&end.theta));
    }

    #[test]
    fn time_advances_by_control_step() {
        let spec = PlantSpec::new(ScenarioKind::ArmHorizontal);
        let s = run(&spec, PlantState::at_rest(&spec, 1.0), &[0.3, 0.1], 7);
        assert_eq!(s.steps, 7);
        assert_eq!(s.time, 7.0 * 0.05);
    }

    #[test]
    fn horizontal_channels_oppose() {
        let spec = PlantSpec::new(ScenarioKind::ArmHorizontal);
        let flex = run(&spec, PlantState::at_rest(&spec, 1.0), &[0.5, 0.0], 4);
        let ext = run(&spec, PlantState::at_rest(&spec, 1.0), &[0.0, 0.5], 4);
        assert!(flex.theta > 1.0 && ext.theta < 1.0);
        assert!(((flex.theta - 1.0) + (ext.theta - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn joint_limits_hold() {
        let spec = PlantSpec::new(ScenarioKind::ArmHorizontal);
        let s = run(&spec, PlantState::at_rest(&spec, 2.0), &[1.0, 0.0], 200);
        assert!(s.theta <= spec.arm.theta_max);
        let s = run(&spec, PlantState::at_rest(&spec, 0.5), &[0.0, 1.0], 200);
        assert!(s.theta >= spec.arm.theta_min);
    }

    #[test]
    fn invalid_actions_rejected() {
        let spec = PlantSpec::new(ScenarioKind::ArmVertical);
        let s = PlantState::at_rest(&spec, 0.0);
        assert!(plant_step(&spec, &s, &[1.5]).is_err());
        assert!(plant_step(&spec, &s, &[0.5, 0.5]).is_err());
        assert!(plant_step(&spec, &s, &[f64::NAN]).is_err());
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let spec = PlantSpec::new(ScenarioKind::ArmVertical);
        let mut s = PlantState::at_rest(&spec, 0.0);
        s.omega = f64::INFINITY;
        assert!(matches!(
            plant_step(&spec, &s, &[0.0]),
            Err(Error::SimulationFault { .. })
        ));
    }

    #[test]
    fn crank_transfer_lobes() {
        assert_eq!(crank_transfer(0.7, 0.7), 1.0);
        assert!((crank_transfer(0.7 + std::f64::consts::PI, 0.7) + 1.0).abs() < 1e-15);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|i| crank_transfer(TAU * i as f64 / n as f64, 1.2))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn reset_is_deterministic_and_fresh() {
        for kind in [
            ScenarioKind::ArmVertical,
            ScenarioKind::ArmHorizontal,
            ScenarioKind::Cycling,
        ] {
            let spec = PlantSpec::new(kind);
            let a = plant_reset(&spec, &mut seeded(5), None);
            let b = plant_reset(&spec, &mut seeded(5), None);
            assert_eq!(a, b);
            assert!(a.muscles.iter().all(|m| m.activation == 0.0 && m.fatigue == 1.0));
        }
    }

    #[test]
    fn reset_ranges() {
        let spec = PlantSpec::new(ScenarioKind::ArmVertical);
        let (lo, hi) = (spec.arm.theta_min, spec.arm.theta_max);
        let margin = 0.1 * (hi - lo);
        let mut rng = seeded(1);
        for _ in 0..1000 {
            let s = plant_reset(&spec, &mut rng, None);
            assert!(s.theta >= lo + margin && s.theta <= hi - margin);
            assert_eq!(s.omega, 0.0);
        }
        let spec = PlantSpec::new(ScenarioKind::Cycling);
        for _ in 0..1000 {
            let s = plant_reset(&spec, &mut rng, None);
            assert!((0.0..TAU).contains(&s.theta));
            assert!((1.0..=5.0).contains(&s.omega));
        }
    }

    #[test]
    fn carry_over_keeps_fatigue_only_when_requested() {
        let mut spec = PlantSpec::new(ScenarioKind::ArmVertical);
        let tired = run(&spec, PlantState::at_rest(&spec, 0.5), &[1.0], 400);
        assert!(tired.muscles[0].fatigue < 0.9);
        let fresh = plant_reset(&spec, &mut seeded(0), Some(&tired));
        assert_eq!(fresh.muscles[0].fatigue, 1.0);
        spec.carry_over_fatigue = true;
        let kept = plant_reset(&spec, &mut seeded(0), Some(&tired));
        assert_eq!(kept.muscles[0].fatigue, tired.muscles[0].fatigue);
        assert_eq!(kept.muscles[0].activation, 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = PlantSpec::new(ScenarioKind::Cycling);
        assert!(spec.validate().is_ok());
        spec.muscles.pop();
        assert!(spec.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn fatigue_bounds_hold_for_any_stimulation(
                us in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 6), 1..200),
            ) {
                let spec = PlantSpec::new(ScenarioKind::Cycling);
                let mut s = plant_reset(&spec, &mut seeded(3), None);
                for u in us {
                    s = plant_step(&spec, &s, &u).unwrap();
                    for (m, p) in s.muscles.iter().zip(&spec.muscles) {
                        prop_assert!(m.fatigue >= p.phi_min && m.fatigue <= 1.0);
                        prop_assert!((0.0..=1.0).contains(&m.activation));
                    }
                }
            }

            #[test]
            fn unstimulated_arm_dissipates_energy(theta in 0.2f64..2.4, omega in -3.0f64..3.0) {
                let spec = PlantSpec::new(ScenarioKind::ArmVertical);
                let mut s = PlantState::at_rest(&spec, theta);
                s.omega = omega;
                let mut energy = arm_energy(&spec, &s);
                for _ in 0..400 {
                    let next = plant_step(&spec, &s, &[0.0]).unwrap();
                    let touching = next.theta <= spec.arm.theta_min || next.theta >= spec.arm.theta_max
                        || s.theta <= spec.arm.theta_min || s.theta >= spec.arm.theta_max;
                    if touching {
                        break;
                    }
                    let e = arm_energy(&spec, &next);
                    prop_assert!(e <= energy + 1e-12, "energy rose {} -> {}", energy, e);
                    energy = e;
                    s = next;
                }
            }
        }
    }
}
