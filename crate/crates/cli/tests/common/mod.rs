use fesrl_cli::config::RunConfig;
use fesrl_core::ScenarioKind;

/// A configuration small enough to train in well under a second.
pub fn tiny(kind: ScenarioKind, episodes: usize) -> RunConfig {
    let mut c = RunConfig::for_scenario(kind);
    c.episodes = Some(episodes);
    c.env.episode_steps = 40;
    c.representation.epochs = 1;
    c.representation.window = 2;
    c.sac.batch_size = 16;
    c.sac.hidden = vec![8, 8];
    c.sac.updates_per_episode = 5;
    c.checkpoint_every = 1;
    c
}
