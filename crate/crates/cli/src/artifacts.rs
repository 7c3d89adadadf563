//! On-disk artifacts: checkpoints, traces and JSON-lines metrics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use fesrl_core::checkpoint::Checkpoint;
use fesrl_core::env::{ANGLE_SCALE, VELOCITY_SCALE};
use fesrl_core::{EpisodeTrace, GruParams, Parameters, SacParams};
use serde::Serialize;

use crate::config::RunConfig;

/// Stores the recurrent module with gate tensors under `gru.*` and the
/// readout under `readout.*`.
pub fn write_gru(ckpt: &mut Checkpoint, gru: &GruParams) {
    for (name, t) in gru.names().into_iter().zip(gru.tensors()) {
        let key = if name.starts_with("readout.") {
            name
        } else {
            format!("gru.{name}")
        };
        ckpt.insert_tensor(key, t);
    }
}

pub fn read_gru(ckpt: &Checkpoint, gru: &mut GruParams) -> Result<()> {
    let names = gru.names();
    for (name, t) in names.into_iter().zip(gru.tensors_mut()) {
        let key = if name.starts_with("readout.") {
            name
        } else {
            format!("gru.{name}")
        };
        let stored = ckpt.tensor(&key)?;
        if stored.shape() != t.shape() {
            return Err(anyhow!(
                "checkpoint array `{key}` has shape {:?}, expected {:?}",
                stored.shape(),
                t.shape()
            ));
        }
        *t = stored;
    }
    gru.validate()?;
    Ok(())
}

/// Full training checkpoint: networks plus the config and the observation
/// scaling they were trained with.
pub fn build_checkpoint(config: &RunConfig, episode: usize, gru: &GruParams, sac: &SacParams) -> Result<Checkpoint> {
    let mut ckpt = Checkpoint::new();
    write_gru(&mut ckpt, gru);
    sac.write_checkpoint(&mut ckpt);
    ckpt.meta.insert("config".into(), serde_json::to_value(config)?);
    ckpt.meta.insert("config_hash".into(), config.hash().into());
    ckpt.meta.insert("episode".into(), episode.into());
    ckpt.meta.insert("scenario".into(), config.scenario.name().into());
    ckpt.meta.insert("angle_scale".into(), ANGLE_SCALE.into());
    ckpt.meta.insert("velocity_scale".into(), VELOCITY_SCALE.into());
    Ok(ckpt)
}

pub fn checkpoint_config(ckpt: &Checkpoint) -> Result<RunConfig> {
    let value = ckpt
        .meta
        .get("config")
        .ok_or_else(|| anyhow!("checkpoint has no embedded config"))?;
    Ok(serde_json::from_value(value.clone())?)
}

/// Writes a trace CSV headed by `# config=<hash> seed=<seed>`.
pub fn export_trace(trace: &EpisodeTrace, path: &Path, config_hash: &str, seed: u64) -> Result<()> {
    let text = trace.to_csv(Some(&format!("config={config_hash} seed={seed}")));
    std::fs::write(path, text).with_context(|| format!("writing trace {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Append-only JSON-lines file.
pub struct JsonLines {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out
            .flush()
            .with_context(|| format!("writing {}", self.path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fesrl_core::rng::seeded;

    #[test]
    fn gru_names_split_between_gates_and_readout() {
        let gru = GruParams::new(3, 5, 2, &mut seeded(1));
        let mut ckpt = Checkpoint::new();
        write_gru(&mut ckpt, &gru);
        assert!(ckpt.arrays.keys().any(|k| k == "readout.weight"));
        assert!(ckpt.arrays.keys().any(|k| k.starts_with("gru.")));
        assert!(ckpt.arrays.keys().all(|k| !k.starts_with("gru.readout")));
        let mut other = GruParams::new(3, 5, 2, &mut seeded(2));
        read_gru(&ckpt, &mut other).unwrap();
        assert_eq!(other, gru);
        let mut wrong = GruParams::new(3, 6, 2, &mut seeded(2));
        assert!(read_gru(&ckpt, &mut wrong).is_err());
    }
}
