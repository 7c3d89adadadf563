//! The episodic training loop: an interaction phase with the current
//! networks, then a learning phase (representation training, buffer
//! conversion with hindsight relabelling, SAC updates).

use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use fesrl_core::checkpoint::Checkpoint;
use fesrl_core::env::episodic_error;
use fesrl_core::rng::{stream, Purpose};
use fesrl_core::sac::{ActionMode, SacLosses};
use fesrl_core::staterep::{
    convert_buffer, hindsight_augment, init_hidden, new_gru, represented_state, train_representation, update_hidden,
};
use fesrl_core::{AdamState, Env, EpisodeSequence, EpisodeTrace, GruParams, ReplayBuffer, SacAgent};

use crate::artifacts::{build_checkpoint, export_trace, read_gru, write_json, JsonLines};
use crate::config::RunConfig;
use crate::metrics::{MetricsRecord, PhaseEvent, TimingRecord};

/// Owns every mutable piece of a training run.
pub struct Trainer {
    pub config: RunConfig,
    pub env: Env,
    pub gru: GruParams,
    gru_opt: AdamState,
    pub agent: SacAgent,
    window: VecDeque<EpisodeSequence>,
    pub events: Vec<PhaseEvent>,
    episode: usize,
}

/// Result of one training episode.
pub struct EpisodeOutcome {
    pub metrics: MetricsRecord,
    pub timing: TimingRecord,
    pub trace: EpisodeTrace,
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.plant_spec()?;
        let env = Env::new(spec, config.env.clone())?;
        let feature_dim = env.layout().feature_dim();
        let n = env.n_channels();
        let hidden = config.representation.hidden_dim;
        let mut gru = new_gru(
            feature_dim,
            n,
            hidden,
            &mut stream(config.seed, Purpose::NetworkInit, 0),
        );
        let mut agent = SacAgent::new(
            hidden + 1,
            n,
            config.sac.clone(),
            &mut stream(config.seed, Purpose::NetworkInit, 1),
        );
        if let Some(path) = &config.warm_start {
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading warm start {}", path.display()))?;
            read_gru(&ckpt, &mut gru)?;
            let mut params = agent.params.clone();
            params.read_checkpoint(&ckpt)?;
            agent = SacAgent::from_params(params, config.sac.clone());
        }
        Ok(Self {
            gru_opt: AdamState::new(&gru, config.representation.learning_rate),
            gru,
            agent,
            env,
            window: VecDeque::new(),
            events: Vec::new(),
            episode: 0,
            config,
        })
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        build_checkpoint(&self.config, self.episode, &self.gru, &self.agent.params)
    }

    /// Rolls out one episode with the stochastic policy and records the
    /// raw sequence. On a simulation fault the partial trace is returned
    /// with the error.
    fn interact(&mut self) -> std::result::Result<(EpisodeSequence, EpisodeTrace), (anyhow::Error, EpisodeTrace)> {
        let seed = self.config.seed;
        let e = self.episode as u64;
        let mut reset_rng = stream(seed, Purpose::PlantReset, e);
        let mut policy_rng = stream(seed, Purpose::Policy, e);
        let obs = self.env.reset(&mut reset_rng);
        let mut run = || -> Result<EpisodeSequence> {
            let mut h = init_hidden(&self.gru, &obs)?;
            let mut seq = EpisodeSequence::new(obs.clone());
            let mut current = obs.clone();
            while !self.env.is_done() {
                let x = represented_state(&h, &current);
                let a = self.agent.act(&x, ActionMode::Stochastic, &mut policy_rng)?;
                let step = self.env.step(&a)?;
                h = update_hidden(&self.gru, &h, &step.observation, &a)?;
                current = step.observation.clone();
                seq.push(a, step.reward, step.observation, step.done);
            }
            Ok(seq)
        };
        match run() {
            Ok(seq) => Ok((seq, self.env.take_trace())),
            Err(err) => Err((err, self.env.take_trace())),
        }
    }

    /// One interaction phase followed by one learning phase.
    pub fn run_episode(&mut self) -> std::result::Result<EpisodeOutcome, (anyhow::Error, Option<EpisodeTrace>)> {
        let e = self.episode;
        let seed = self.config.seed;
        let start = Instant::now();
        let updates_before = self.agent.update_count();
        let (seq, trace) = self.interact().map_err(|(err, trace)| (err, Some(trace)))?;
        self.events.push(PhaseEvent::Interaction {
            episode: e,
            steps: seq.len(),
            updates_before,
            updates_after: self.agent.update_count(),
        });
        let interaction_s = start.elapsed().as_secs_f64();
        let no_trace = |err: anyhow::Error| (err, None);

        let episode_return: f64 = seq.rewards.iter().sum();
        self.window.push_back(seq);
        while self.window.len() > self.config.representation.window {
            self.window.pop_front();
        }
        let episodes: Vec<&EpisodeSequence> = self.window.iter().collect();

        let t_rep = Instant::now();
        let rep = &self.config.representation;
        let curve = train_representation(
            &mut self.gru,
            &mut self.gru_opt,
            &episodes,
            rep.epochs,
            rep.clip_norm,
            &mut stream(seed, Purpose::RepresentationShuffle, e as u64),
        )
        .map_err(|err| no_trace(err.into()))?;
        self.events.push(PhaseEvent::RepresentationTraining {
            episode: e,
            epochs: rep.epochs,
        });
        let tuples = convert_buffer(&self.gru, &episodes).map_err(|err| no_trace(err.into()))?;
        let tuples = hindsight_augment(tuples, &episodes, self.env.kind(), self.env.config())
            .map_err(|err| no_trace(err.into()))?;
        let buffer = ReplayBuffer::from_transitions(tuples);
        let representation_s = t_rep.elapsed().as_secs_f64();

        let t_pol = Instant::now();
        let mut rng = stream(seed, Purpose::SacUpdate, e as u64);
        let count = self.config.sac.updates_per_episode;
        let mut mean = SacLosses::default();
        for _ in 0..count {
            let l = self
                .agent
                .update(&buffer, &mut rng)
                .map_err(|err| no_trace(err.into()))?;
            mean.q1 += 0.5 * (l.q1 + l.q2) / count as f64;
            mean.policy += l.policy / count as f64;
            mean.entropy += l.entropy / count as f64;
        }
        self.events.push(PhaseEvent::PolicyUpdates { episode: e, count });
        let policy_s = t_pol.elapsed().as_secs_f64();

        let err = episodic_error(&trace).map_err(|err| no_trace(err.into()))?;
        let metrics = MetricsRecord {
            episode: e,
            mean_error: err.mean_abs,
            rmse: err.rmse,
            mean_stimulation: trace.mean_stimulation(),
            final_fatigue: trace.rows.last().map(|r| r.fatigue.clone()).unwrap_or_default(),
            episode_return,
            representation_loss: curve.last().copied().unwrap_or(f64::NAN),
            critic_loss: mean.q1,
            policy_loss: mean.policy,
            alpha: self.agent.params.alpha(),
            entropy: mean.entropy,
            replay_size: buffer.len(),
        };
        self.episode += 1;
        Ok(EpisodeOutcome {
            metrics,
            timing: TimingRecord {
                episode: e,
                interaction_s,
                representation_s,
                policy_s,
                total_s: start.elapsed().as_secs_f64(),
            },
            trace,
        })
    }
}

pub struct TrainSummary {
    pub metrics: Vec<MetricsRecord>,
    pub trainer: Trainer,
}

/// Trains for the configured budget. With `out`, writes `metrics.jsonl`,
/// `timing.jsonl`, `events.jsonl`, periodic `checkpoint_<episode>.json` and
/// `trace_train_<episode>.csv`, and `checkpoint_final.json`. `on_episode`
/// may stop the run early by returning `false`.
pub fn run_train(
    config: &RunConfig,
    out: Option<&Path>,
    mut on_episode: impl FnMut(&MetricsRecord) -> bool,
) -> Result<TrainSummary> {
    let mut trainer = Trainer::new(config.clone())?;
    let hash = config.hash();
    let mut files = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_json(&dir.join("config.json"), config)?;
            Some((
                JsonLines::create(&dir.join("metrics.jsonl"))?,
                JsonLines::create(&dir.join("timing.jsonl"))?,
            ))
        }
        None => None,
    };
    let mut metrics = Vec::new();
    for _ in 0..config.episode_budget() {
        let e = trainer.episodes_done();
        let outcome = match trainer.run_episode() {
            Ok(o) => o,
            Err((err, trace)) => {
                if let (Some(dir), Some(trace)) = (out, trace) {
                    export_trace(&trace, &dir.join(format!("trace_fault_{e}.csv")), &hash, config.seed)?;
                }
                return Err(err.context(format!("episode {e} failed")));
            }
        };
        if let (Some(dir), Some((m, t))) = (out, files.as_mut()) {
            m.append(&outcome.metrics)?;
            t.append(&outcome.timing)?;
            let every = config.checkpoint_every;
            if every > 0 && (e + 1) % every == 0 {
                trainer
                    .checkpoint()?
                    .save(&dir.join(format!("checkpoint_{}.json", e + 1)))?;
                export_trace(
                    &outcome.trace,
                    &dir.join(format!("trace_train_{}.csv", e + 1)),
                    &hash,
                    config.seed,
                )?;
            }
        }
        let keep_going = on_episode(&outcome.metrics);
        metrics.push(outcome.metrics);
        if !keep_going {
            break;
        }
    }
    if let Some(dir) = out {
        trainer.checkpoint()?.save(&dir.join("checkpoint_final.json"))?;
        let mut events = JsonLines::create(&dir.join("events.jsonl"))?;
        for ev in &trainer.events {
            events.append(ev)?;
        }
    }
    Ok(TrainSummary { metrics, trainer })
}
