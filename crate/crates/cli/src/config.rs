//! Run configuration: one JSON document holding every knob of a run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fesrl_core::baselines::TuneConfig;
use fesrl_core::{EnvConfig, PlantSpec, RepresentationConfig, SacConfig, ScenarioKind};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    /// Training episodes; the scenario default when unset.
    pub episodes: Option<usize>,
    /// Overrides merged key by key into the scenario's default plant.
    pub plant: Map<String, Value>,
    pub env: EnvConfig,
    pub representation: RepresentationConfig,
    pub sac: SacConfig,
    pub tune: TuneConfig,
    /// Checkpoint (and training trace) every this many episodes; 0 keeps
    /// only the final checkpoint.
    pub checkpoint_every: usize,
    pub eval: EvalConfig,
    /// Checkpoint whose networks initialise training.
    pub warm_start: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Length of the two-level benchmark in seconds.
    pub two_level_duration: f64,
    /// Seeds of the random evaluation trajectories.
    pub random_seeds: Vec<u64>,
    /// Error threshold for counting overshoots (degrees or RPM).
    pub overshoot_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            two_level_duration: 180.0,
            random_seeds: vec![100, 101, 102, 103, 104],
            overshoot_threshold: 2.0,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::ArmVertical,
            seed: 0,
            episodes: None,
            plant: Map::new(),
            env: EnvConfig::default(),
            representation: RepresentationConfig::default(),
            sac: SacConfig::default(),
            tune: TuneConfig::default(),
            checkpoint_every: 50,
            eval: EvalConfig::default(),
            warm_start: None,
        }
    }
}

/// Default training budget per scenario.
pub fn default_episodes(kind: ScenarioKind) -> usize {
    match kind {
        ScenarioKind::ArmVertical => 300,
        ScenarioKind::ArmHorizontal => 500,
        ScenarioKind::Cycling => 800,
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl RunConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        Self {
            scenario: kind,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn episode_budget(&self) -> usize {
        self.episodes.unwrap_or_else(|| default_episodes(self.scenario))
    }

    /// The scenario's default plant with `plant` overrides applied.
    pub fn plant_spec(&self) -> Result<PlantSpec> {
        let mut value = serde_json::to_value(PlantSpec::new(self.scenario))?;
        merge(&mut value, &Value::Object(self.plant.clone()));
        let spec: PlantSpec = serde_json::from_value(value).context("invalid plant override")?;
        if spec.kind != self.scenario {
            bail!("plant override changes the scenario kind");
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant_spec()?;
        if self.episode_budget() == 0 {
            bail!("episode budget must be positive");
        }
        if self.env.episode_steps == 0 {
            bail!("env.episode_steps must be positive");
        }
        let r = &self.representation;
        if r.window == 0 || r.hidden_dim == 0 || !(r.learning_rate > 0.0) || !(r.clip_norm > 0.0) {
            bail!("invalid representation settings: {r:?}");
        }
        let s = &self.sac;
        if !(0.0..1.0).contains(&s.gamma) || !(0.0..=1.0).contains(&s.tau) || s.batch_size == 0 {
            bail!(
                "invalid SAC settings: gamma {}, tau {}, batch {}",
                s.gamma,
                s.tau,
                s.batch_size
            );
        }
        if !(s.learning_rate > 0.0) || !(s.initial_alpha > 0.0) || s.hidden.is_empty() {
            bail!("invalid SAC settings: {s:?}");
        }
        Ok(())
    }

    /// Short SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fesrl_core::env::EPISODE_STEPS;
    use serde_json::json;

    #[test]
    fn overrides_merge_into_defaults() {
        let mut c = RunConfig::for_scenario(ScenarioKind::ArmVertical);
        c.plant = json!({"arm": {"damping": 0.5}, "dt_control": 0.02})
            .as_object()
            .unwrap()
            .clone();
        let spec = c.plant_spec().unwrap();
        assert_eq!(spec.arm.damping, 0.5);
        assert_eq!(spec.dt_control, 0.02);
        assert_eq!(spec.arm.mass, PlantSpec::new(ScenarioKind::ArmVertical).arm.mass);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sceanrio": "cycling"}"#).is_err());
        let c = RunConfig {
            sac: SacConfig {
                gamma: 1.0,
                ..SacConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            plant: json!({"kind": "cycling"}).as_object().unwrap().clone(),
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn round_trip_and_stable_hash() {
        let c = RunConfig::for_scenario(ScenarioKind::Cycling);
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(d.hash(), c.hash());
        assert_eq!(c.episode_budget(), 800);
        assert_eq!(c.env.episode_steps, EPISODE_STEPS);
    }
}
