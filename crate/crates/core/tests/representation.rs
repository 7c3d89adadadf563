use fesrl_core::env::{Env, EnvConfig, ObsLayout, Observation};
use fesrl_core::rng::{seeded, stream, Purpose};
use fesrl_core::staterep::{
    behaviour_episode, fatigue_head, fatigue_probe, new_gru, prediction_mse, train_representation, ConstantPredictor,
    EpisodeSequence, FatigueHeadConfig, LabelledEpisode,
};
use fesrl_core::{AdamState, PlantSpec, ScenarioKind};
use rand::Rng;

/// An arm observation whose first feature is `s` and second is zero.
fn obs(s: f64) -> Observation {
    Observation {
        layout: ObsLayout::Arm,
        values: vec![s * std::f64::consts::PI, 0.0, 0.5],
    }
}

#[test]
fn constant_sequence_is_memorised_within_200_epochs() {
    let mut ep = EpisodeSequence::new(obs(0.3));
    for _ in 0..50 {
        ep.push(vec![0.5], 0.0, obs(0.3), false);
    }
    let mut gru = new_gru(2, 1, 20, &mut seeded(0));
    let mut adam = AdamState::new(&gru, 1e-2);
    let curve = train_representation(&mut gru, &mut adam, &[&ep], 200, 5.0, &mut seeded(1)).unwrap();
    let best = curve.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(best < 1e-4, "best loss {best}");
}

/// `s_{t+1} = 0.9 s_t + 0.1 a_t` with actions held for 5 to 15 steps.
/// The hidden state that predicts `s_{t+1}` has not yet seen `a_t`, so
/// only the rare switching steps carry irreducible error.
fn linear_episode(rng: &mut impl Rng, steps: usize) -> EpisodeSequence {
    let mut s = rng.random_range(0.0..1.0);
    let mut ep = EpisodeSequence::new(obs(s));
    let mut a = 0.0;
    let mut hold = 0;
    for _ in 0..steps {
        if hold == 0 {
            a = rng.random_range(0.0..1.0);
            hold = rng.random_range(5..=15);
        }
        hold -= 1;
        s = 0.9 * s + 0.1 * a;
        ep.push(vec![a], 0.0, obs(s), false);
    }
    ep
}

#[test]
fn linear_system_is_identified_on_held_out_episodes() {
    let mut rng = seeded(7);
    let train: Vec<EpisodeSequence> = (0..20).map(|_| linear_episode(&mut rng, 200)).collect();
    let test: Vec<EpisodeSequence> = (0..5).map(|_| linear_episode(&mut rng, 200)).collect();
    let train_refs: Vec<&EpisodeSequence> = train.iter().collect();
    let test_refs: Vec<&EpisodeSequence> = test.iter().collect();
    let mut gru = new_gru(2, 1, 20, &mut seeded(3));
    let mut adam = AdamState::new(&gru, 3e-3);
    train_representation(&mut gru, &mut adam, &train_refs, 60, 5.0, &mut seeded(4)).unwrap();
    let mse = prediction_mse(&gru, &test_refs).unwrap();
    assert!(mse < 1e-3, "held-out mse {mse}");
}

/// Behaviour episodes of the vertical arm: 60 for training, 10 held out.
/// Stimulation stays below 0.5 so the arm rarely rests on its upper stop,
/// where the observation carries no trace of fatigue.
fn vertical_arm_data() -> (Vec<LabelledEpisode>, Vec<LabelledEpisode>) {
    let mut env = Env::new(PlantSpec::new(ScenarioKind::ArmVertical), EnvConfig::default()).unwrap();
    let mut all: Vec<LabelledEpisode> = (0..70)
        .map(|i| behaviour_episode(&mut env, 0.5, &mut stream(0, Purpose::Behaviour, i)).unwrap())
        .collect();
    let test = all.split_off(60);
    (all, test)
}

#[test]
fn trained_representation_beats_constant_predictor_and_tracks_fatigue() {
    let (train, test) = vertical_arm_data();
    let train_seq: Vec<&EpisodeSequence> = train.iter().map(|e| &e.sequence).collect();
    let test_seq: Vec<&EpisodeSequence> = test.iter().map(|e| &e.sequence).collect();
    let mut gru = new_gru(2, 1, 20, &mut stream(0, Purpose::NetworkInit, 0));
    let mut adam = AdamState::new(&gru, 1e-3);
    let t = std::time::Instant::now();
    let curve = train_representation(&mut gru, &mut adam, &train_seq, 30, 5.0, &mut seeded(5)).unwrap();
    let mse = prediction_mse(&gru, &test_seq).unwrap();
    let constant = ConstantPredictor::fit(&train_seq).unwrap().mse(&test_seq);
    let train_refs: Vec<&LabelledEpisode> = train.iter().collect();
    let test_refs: Vec<&LabelledEpisode> = test.iter().collect();
    let (_, r_linear) = fatigue_probe(&gru, &train_refs, &test_refs, 1e-6).unwrap();
    let (_, r) = fatigue_head(
        &gru,
        &train_refs,
        &test_refs,
        &FatigueHeadConfig::default(),
        &mut seeded(11),
    )
    .unwrap();
    eprintln!(
        "loss {:?} -> {:?}, mse {mse:.3e}, constant {constant:.3e}, ratio {:.4}, fatigue r {r:.3} (linear {r_linear:.3}), {:.1}s",
        curve.first(),
        curve.last(),
        mse / constant,
        t.elapsed().as_secs_f64()
    );
    assert!(mse <= 0.1 * constant, "mse {mse} vs constant {constant}");
    assert!(r >= 0.8, "fatigue correlation {r}");
}
