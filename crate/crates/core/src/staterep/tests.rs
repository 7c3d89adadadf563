use super::*;
use crate::env::{action_penalty, normalize_target, Env};
use crate::neuromech::PlantSpec;
use crate::nn::finite_diff_check;
use crate::rng::seeded;
use rand::Rng;

fn rollout(kind: ScenarioKind, steps: usize, seed: u64) -> EpisodeSequence {
    let cfg = EnvConfig {
        episode_steps: steps,
        ..EnvConfig::default()
    };
    let mut env = Env::new(PlantSpec::new(kind), cfg).unwrap();
    let mut rng = seeded(seed);
    let mut ep = EpisodeSequence::new(env.reset(&mut rng));
    while !env.is_done() {
        let a: Vec<f64> = (0..env.n_channels()).map(|_| rng.random::<f64>()).collect();
        let step = env.step(&a).unwrap();
        ep.push(a, step.reward, step.observation, step.done);
    }
    ep
}

fn gru_for(kind: ScenarioKind, seed: u64) -> GruParams {
    let layout = crate::env::ObsLayout::for_scenario(kind, &EnvConfig::default());
    new_gru(layout.feature_dim(), kind.n_channels(), 8, &mut seeded(seed))
}

#[test]
fn hidden_trajectory_matches_incremental_updates() {
    let ep = rollout(ScenarioKind::ArmHorizontal, 30, 1);
    let gru = gru_for(ScenarioKind::ArmHorizontal, 2);
    let hs = hidden_trajectory(&gru, &ep).unwrap();
    assert_eq!(hs.len(), (ep.len() + 1) * gru.hidden_dim);
    let mut h = init_hidden(&gru, &ep.observations[0]).unwrap();
    assert_eq!(&hs[..gru.hidden_dim], h.as_slice());
    for t in 0..ep.len() {
        h = update_hidden(&gru, &h, &ep.observations[t + 1], &ep.actions[t]).unwrap();
        let stored = &hs[(t + 1) * gru.hidden_dim..(t + 2) * gru.hidden_dim];
        for (a, b) in stored.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn prediction_gradient_matches_finite_differences() {
    for kind in [ScenarioKind::ArmVertical, ScenarioKind::Cycling] {
        let ep = rollout(kind, 25, 3);
        let gru = gru_for(kind, 4);
        let report = finite_diff_check(|p: &GruParams| prediction_loss(p, &ep).unwrap(), &gru, 1e-5, 1e-6, 5);
        assert!(report.passed, "{kind}: {report:?}");
    }
}

#[test]
fn training_reduces_prediction_loss() {
    let eps: Vec<EpisodeSequence> = (0..3).map(|s| rollout(ScenarioKind::ArmVertical, 200, s)).collect();
    let refs: Vec<&EpisodeSequence> = eps.iter().collect();
    let mut gru = gru_for(ScenarioKind::ArmVertical, 7);
    let before = prediction_mse(&gru, &refs).unwrap();
    let mut adam = AdamState::new(&gru, 3e-3);
    let curve = train_representation(&mut gru, &mut adam, &refs, 40, 5.0, &mut seeded(8)).unwrap();
    let after = prediction_mse(&gru, &refs).unwrap();
    assert_eq!(curve.len(), 40);
    assert!(after < 0.2 * before, "{before} -> {after}");
}

#[test]
fn zero_epochs_is_a_no_op() {
    let ep = rollout(ScenarioKind::ArmVertical, 20, 1);
    let mut gru = gru_for(ScenarioKind::ArmVertical, 2);
    let original = gru.clone();
    let mut adam = AdamState::new(&gru, 1e-3);
    let curve = train_representation(&mut gru, &mut adam, &[&ep], 0, 5.0, &mut seeded(0)).unwrap();
    assert!(curve.is_empty());
    assert_eq!(gru, original);
    assert!(train_representation(&mut gru, &mut adam, &[], 1, 5.0, &mut seeded(0)).is_err());
}

#[test]
fn converted_tuples_chain_and_carry_raw_rewards() {
    let eps = [
        rollout(ScenarioKind::Cycling, 15, 1),
        rollout(ScenarioKind::Cycling, 15, 2),
    ];
    let refs: Vec<&EpisodeSequence> = eps.iter().collect();
    let gru = gru_for(ScenarioKind::Cycling, 3);
    let tuples = convert_buffer(&gru, &refs).unwrap();
    assert_eq!(tuples.len(), 30);
    for (k, tr) in tuples.iter().enumerate() {
        let (e, t) = (k / 15, k % 15);
        assert_eq!(tr.state.len(), gru.hidden_dim + 1);
        assert_eq!(tr.reward, eps[e].rewards[t]);
        assert_eq!(tr.action, eps[e].actions[t]);
        assert_eq!(*tr.state.last().unwrap(), eps[e].observations[t].normalized_target());
        if t + 1 < 15 {
            assert_eq!(tr.next_state, tuples[k + 1].state);
        } else {
            assert!(tr.done);
        }
    }
}

#[test]
fn hindsight_replicas_keep_only_the_effort_penalty() {
    for kind in [
        ScenarioKind::ArmVertical,
        ScenarioKind::ArmHorizontal,
        ScenarioKind::Cycling,
    ] {
        let cfg = EnvConfig::default();
        let eps = [rollout(kind, 40, 11)];
        let refs: Vec<&EpisodeSequence> = eps.iter().collect();
        let gru = gru_for(kind, 12);
        let real = convert_buffer(&gru, &refs).unwrap();
        let augmented = hindsight_augment(real.clone(), &refs, kind, &cfg).unwrap();
        assert_eq!(augmented.len(), 2 * real.len());
        assert_eq!(&augmented[..real.len()], real.as_slice());
        for (t, replica) in augmented[real.len()..].iter().enumerate() {
            let expected = -cfg.action_penalty_weight * action_penalty(kind, &eps[0].actions[t]);
            assert!((replica.reward - expected).abs() < 1e-12, "{kind} t={t}");
            let goal = normalize_target(
                eps[0].observations[t + 1].layout,
                eps[0].observations[t + 1].controlled(),
            );
            assert_eq!(*replica.state.last().unwrap(), goal);
            assert_eq!(*replica.next_state.last().unwrap(), goal);
            let h = replica.state.len() - 1;
            assert_eq!(replica.state[..h], real[t].state[..h]);
        }
    }
}

#[test]
fn hindsight_rejects_mismatched_sources() {
    let ep = rollout(ScenarioKind::ArmVertical, 10, 1);
    let gru = gru_for(ScenarioKind::ArmVertical, 2);
    let mut tuples = convert_buffer(&gru, &[&ep]).unwrap();
    tuples.pop();
    let err = hindsight_augment(tuples, &[&ep], ScenarioKind::ArmVertical, &EnvConfig::default());
    assert!(err.is_err());
}

#[test]
fn probe_recovers_linear_relation() {
    let mut rng = seeded(3);
    let xs: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = xs.chunks(3).map(|r| 2.0 * r[0] - r[1] + 0.5 * r[2] + 0.25).collect();
    let probe = LinearProbe::fit(&xs, 3, &ys, 1e-9).unwrap();
    assert!((probe.weights[0] - 2.0).abs() < 1e-5);
    assert!((probe.bias - 0.25).abs() < 1e-5);
    let preds = probe.predict_all(&xs);
    assert!(pearson(&preds, &ys) > 0.999_999);
    assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), 0.0);
}
