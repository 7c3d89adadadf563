//! Self-checks shared by the `check` command and the acceptance suite:
//! analytic gradients against central differences, plant behaviour against
//! closed forms, and optimiser convergence.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{cma_ask, cma_tell, minimize, CmaState};
use crate::env::{Env, EnvConfig};
use crate::neuromech::{muscle_step, plant_step, MuscleParams, MuscleState, PlantSpec, PlantState, ScenarioKind};
use crate::nn::{
    finite_diff_check, gru_backward_sequence, gru_forward_sequence, Activation, GradCheckReport, GruParams, MlpParams,
    OutputActivation, Parameters, Tensor,
};
use crate::rng::seeded;
use crate::sac::{alpha_loss, critic_loss, critic_target, policy_loss, Batch, SacConfig, SacParams};
use crate::staterep::{new_gru, prediction_loss, EpisodeSequence, Transition};

/// Relative tolerance of every gradient check.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub passed: bool,
    /// Measured quantity (error, distance, evaluations...).
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl OracleReport {
    fn below(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: value.is_finite() && value < limit,
            value,
            limit,
            detail,
        }
    }

    fn from_grad(name: &str, r: GradCheckReport) -> Self {
        Self {
            name: name.into(),
            passed: r.passed,
            value: r.max_relative_error,
            limit: r.tolerance,
            detail: format!(
                "{} coordinates, worst #{}: analytic {:.6e} vs numeric {:.6e}",
                r.checked, r.worst_index, r.analytic, r.numeric
            ),
        }
    }
}

fn mlp_check(name: &str, sizes: &[usize], hidden: Activation, out: OutputActivation, seed: u64) -> OracleReport {
    let mut rng = seeded(seed);
    let params = MlpParams::new(sizes, hidden, out, &mut rng);
    let batch = 6;
    let x: Vec<f64> = (0..batch * sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..batch * sizes[sizes.len() - 1])
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let report = finite_diff_check(
        |p: &MlpParams| {
            let (y, cache) = p.forward_batch(&x, batch).expect("valid input");
            let loss = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5 * y.iter().map(|v| v * v).sum::<f64>();
            let dy: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a + b).collect();
            (loss, p.backward_batch(&cache, &dy, false).expect("valid cache").0)
        },
        &params,
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    OracleReport::from_grad(name, report)
}

fn gru_check(name: &str, steps: usize, seed: u64) -> OracleReport {
    let mut rng = seeded(seed);
    let mut params = GruParams::new(4, 20, 3, &mut rng);
    params.tensors_mut().into_iter().for_each(|t| {
        t.data_mut()
            .iter_mut()
            .for_each(|v| *v += 0.1 * rng.random_range(-1.0..1.0))
    });
    let h0: Vec<f64> = (0..20).map(|_| rng.random_range(-0.5..0.5)).collect();
    let inputs: Vec<f64> = (0..steps * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..steps * 20).map(|_| rng.sample(StandardNormal)).collect();
    let report = finite_diff_check(
        |p: &GruParams| {
            let (hs, cache) = gru_forward_sequence(p, &h0, &inputs).expect("valid sequence");
            let loss = hs.iter().zip(&weights).map(|(a, b)| a * b).sum();
            (loss, gru_backward_sequence(p, &cache, &weights).expect("valid cache").0)
        },
        &params,
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    OracleReport::from_grad(name, report)
}

fn prediction_check(seed: u64) -> OracleReport {
    let kind = ScenarioKind::ArmVertical;
    let mut env = Env::new(
        PlantSpec::new(kind),
        EnvConfig {
            episode_steps: 40,
            ..EnvConfig::default()
        },
    )
    .expect("default spec is valid");
    let mut rng = seeded(seed);
    let mut ep = EpisodeSequence::new(env.reset(&mut rng));
    while !env.is_done() {
        let a = vec![rng.random::<f64>()];
        let s = env.step(&a).expect("valid action");
        ep.push(a, s.reward, s.observation, s.done);
    }
    let gru = new_gru(env.layout().feature_dim(), 1, 20, &mut rng);
    let report = finite_diff_check(
        |p: &GruParams| prediction_loss(p, &ep).expect("valid episode"),
        &gru,
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    OracleReport::from_grad("representation prediction loss (40-step BPTT + readout)", report)
}

fn frozen_batch(size: usize, ds: usize, n: usize, seed: u64) -> Batch {
    let mut rng = seeded(seed);
    let tuples: Vec<Transition> = (0..size)
        .map(|i| Transition {
            state: (0..ds).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..n).map(|_| rng.random_range(0.05..0.95)).collect(),
            reward: -rng.random::<f64>(),
            next_state: (0..ds).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: i + 1 == size,
        })
        .collect();
    let refs: Vec<&Transition> = tuples.iter().collect();
    Batch::from_transitions(&refs).expect("consistent batch")
}

fn sac_checks(seed: u64) -> Vec<OracleReport> {
    let (ds, n, b) = (21, 2, 16);
    let config = SacConfig {
        hidden: vec![32, 32],
        ..SacConfig::default()
    };
    let mut rng = seeded(seed);
    let mut params = SacParams::new(ds, n, &config, &mut rng);
    params.log_alpha = 0.2f64.ln();
    let batch = frozen_batch(b, ds, n, seed + 1);
    let normals =
        |rng: &mut crate::rng::StreamRng| -> Vec<f64> { (0..b * n).map(|_| rng.sample(StandardNormal)).collect() };
    let target_noise = normals(&mut rng);
    let noise = normals(&mut rng);
    let targets = critic_target(&params, &batch, &target_noise, false).expect("valid batch");

    let critic = finite_diff_check(
        |q: &MlpParams| critic_loss(q, &batch, &targets).expect("valid batch"),
        &params.q1,
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    let policy = finite_diff_check(
        |pol: &MlpParams| {
            let mut p = params.clone();
            p.policy = pol.clone();
            let out = policy_loss(&p, &batch, &noise).expect("valid batch");
            (out.loss, out.grads)
        },
        &params.policy,
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    let logp = policy_loss(&params, &batch, &noise).expect("valid batch").log_probs;
    let alpha = finite_diff_check(
        |la: &Tensor| {
            let (l, g) = alpha_loss(la.data()[0], &logp, -(n as f64));
            (l, Tensor::scalar(g))
        },
        &Tensor::scalar(params.log_alpha),
        GRADIENT_TOLERANCE,
        FD_STEP,
        seed,
    );
    vec![
        OracleReport::from_grad("sac critic loss", critic),
        OracleReport::from_grad("sac policy loss (reparameterised, sigmoid-squashed)", policy),
        OracleReport::from_grad("sac temperature loss", alpha),
    ]
}

/// Every backward pass against central differences.
pub fn gradient_oracles() -> Vec<OracleReport> {
    let mut out = vec![
        mlp_check("affine layer", &[5, 4], Activation::Relu, OutputActivation::Identity, 1),
        mlp_check(
            "relu hidden layers",
            &[5, 8, 8, 3],
            Activation::Relu,
            OutputActivation::Identity,
            2,
        ),
        mlp_check(
            "tanh hidden layers",
            &[5, 8, 8, 3],
            Activation::Tanh,
            OutputActivation::Identity,
            3,
        ),
        mlp_check(
            "sigmoid output",
            &[5, 8, 2],
            Activation::Tanh,
            OutputActivation::Sigmoid,
            4,
        ),
        gru_check("gru cell (single step)", 1, 5),
        gru_check("gru unrolled 50 steps", 50, 6),
        prediction_check(7),
    ];
    out.extend(sac_checks(8));
    out
}

fn run_plant(spec: &PlantSpec, mut s: PlantState, steps: usize, u: impl Fn(usize) -> Vec<f64>) -> PlantState {
    for k in 0..steps {
        s = plant_step(spec, &s, &u(k)).expect("admissible stimulation");
    }
    s
}

/// Fatigue steady states, arm equilibrium, crank conservation and RK4
/// step-halving.
pub fn plant_oracles() -> Vec<OracleReport> {
    let mut out = Vec::new();

    let m = MuscleParams::default();
    for (u, start) in [(0.0, 0.5), (1.0, 1.0)] {
        let mut s = MuscleState {
            activation: u,
            fatigue: start,
        };
        for _ in 0..600 {
            s = muscle_step(&m, s, u, 1.0).expect("valid stimulation");
        }
        let expected = m.fatigue_steady_state(u);
        let rel = (s.fatigue - expected).abs() / expected;
        out.push(OracleReport::below(
            &format!("fatigue steady state, u = {u}"),
            rel,
            0.02,
            format!("φ(600 s) = {:.6}, closed form {expected:.6}", s.fatigue),
        ));
    }

    let mut spec = PlantSpec::new(ScenarioKind::ArmVertical);
    spec.muscles[0].phi_min = 1.0;
    let u = 0.25;
    let torque = u * spec.muscles[0].max_torque;
    let theta = run_plant(&spec, PlantState::at_rest(&spec, 0.0), 1200, |_| vec![u]).theta;
    let expected = (torque / spec.arm.gravity_torque()).asin();
    out.push(OracleReport::below(
        "vertical arm static equilibrium (deg)",
        (theta - expected).abs().to_degrees(),
        0.5,
        format!(
            "θ(60 s) = {:.4}°, asin(T/mgl) = {:.4}°",
            theta.to_degrees(),
            expected.to_degrees()
        ),
    ));

    let spec = PlantSpec::new(ScenarioKind::Cycling);
    let mut s = PlantState::at_rest(&spec, 0.7);
    s.omega = 3.0;
    let end = run_plant(&spec, s, 1800, |_| vec![0.0; 6]);
    out.push(OracleReport::below(
        "frictionless crank cadence drift over 90 s (rad/s)",
        (end.omega - 3.0).abs(),
        1e-6,
        format!("ω(90 s) = {:.12}", end.omega),
    ));

    let stim = |k: usize| vec![0.3 + 0.1 * (k as f64 * 0.013).sin()];
    let coarse = PlantSpec::new(ScenarioKind::ArmVertical);
    let mut fine = coarse.clone();
    fine.substeps *= 2;
    let (mut a, mut b) = (PlantState::at_rest(&coarse, 0.5), PlantState::at_rest(&fine, 0.5));
    let mut worst: f64 = 0.0;
    for k in 0..1800 {
        a = plant_step(&coarse, &a, &stim(k)).expect("admissible stimulation");
        b = plant_step(&fine, &b, &stim(k)).expect("admissible stimulation");
        worst = worst.max((a.theta - b.theta).abs());
    }
    out.push(OracleReport::below(
        "RK4 step-halving difference over 90 s (rad)",
        worst,
        1e-4,
        format!("max |Δθ| = {worst:.3e}"),
    ));
    out
}

/// Sphere and Rosenbrock convergence plus rank invariance.
pub fn cma_oracles() -> Vec<OracleReport> {
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let rosenbrock = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let mut out = Vec::new();

    let mut s = CmaState::new(&[3.0; 10], 2.0).expect("valid setup");
    let r = minimize(sphere, &mut s, 2000, 1e-10, &mut seeded(1)).expect("finite run");
    out.push(OracleReport::below(
        "cma-es 10-D sphere within 2000 evaluations",
        r.best_fitness,
        1e-10,
        format!("f = {:.3e} after {} evaluations", r.best_fitness, r.evaluations),
    ));

    let mut s = CmaState::new(&[-1.2, 1.0], 0.5).expect("valid setup");
    let r = minimize(rosenbrock, &mut s, 10_000, 1e-6, &mut seeded(2)).expect("finite run");
    out.push(OracleReport::below(
        "cma-es 2-D Rosenbrock within 10^4 evaluations",
        r.best_fitness,
        1e-6,
        format!("f = {:.3e} after {} evaluations", r.best_fitness, r.evaluations),
    ));

    let mut a = CmaState::new(&[1.0, 2.0, -1.0], 0.7).expect("valid setup");
    let mut b = a.clone();
    let mut rng = seeded(3);
    let mut identical = true;
    for _ in 0..30 {
        let cands = cma_ask(&a, &mut rng);
        let fa: Vec<f64> = cands.iter().map(|c| sphere(c)).collect();
        let fb: Vec<f64> = fa.iter().map(|f| f + 1234.5).collect();
        cma_tell(&mut a, &cands, &fa).expect("finite fitness");
        cma_tell(&mut b, &cands, &fb).expect("finite fitness");
        identical &= a.mean == b.mean && a.sigma == b.sigma && a.cov == b.cov;
    }
    out.push(OracleReport {
        name: "cma-es rank invariance under fitness shift".into(),
        passed: identical,
        value: if identical { 0.0 } else { 1.0 },
        limit: 0.0,
        detail: "30 generations, bitwise comparison of mean, sigma and covariance".into(),
    });
    out
}
