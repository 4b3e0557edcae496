//! Experiment configuration document (TOML) and its content digest.

use std::path::{Path, PathBuf};

use ms3l_core::eval::TaskSpec;
use ms3l_core::trainer::TrainConfig;
use ms3l_core::world::{fixtures, load_map, WorldMap};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    pub episodes: usize,
    pub max_seconds: f64,
    /// Position (m) and heading (rad) jitter of each episode's spawn.
    pub spawn_jitter: (f64, f64),
    /// Command noise of the `noise` task.
    pub noise_sigma: f64,
    pub betas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            episodes: 5,
            max_seconds: 250.0,
            spawn_jitter: (0.1, 0.1),
            noise_sigma: 1.0,
            betas: vec![0.99, 0.5, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    pub host: String,
    /// Wall-clock tick rate; the simulated step stays `1 / train.fps`.
    pub tick_hz: f64,
    /// Outgoing messages a connection may fall behind before it is dropped.
    pub backlog: usize,
    /// Directory served at `/`.
    pub ui_dir: String,
    /// Checkpoint whose recording head supplies `p_r` in state messages.
    pub checkpoint: Option<String>,
    /// Edge length of the image sent on the wire (at most 64).
    pub wire_image: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            tick_hz: 10.0,
            backlog: 64,
            ui_dir: "ui/dist".into(),
            checkpoint: None,
            wire_image: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled map name or a path to a map file, relative to the config file.
    pub map: String,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub bridge: BridgeConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: "hallway".into(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            bridge: BridgeConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Defaults, or the file at `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, Error> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.train.validate()?;
        let e = &self.eval;
        if e.episodes == 0 || !(e.max_seconds > 0.0) || !(e.noise_sigma >= 0.0) {
            return Err(Error::Config("eval: episodes, max_seconds and noise_sigma out of range".into()));
        }
        if e.betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::Config("eval: every beta must lie in (0, 1)".into()));
        }
        let b = &self.bridge;
        if !(b.tick_hz > 0.0) || b.backlog == 0 || b.wire_image == 0 || b.wire_image > 64 {
            return Err(Error::Config("bridge: tick_hz, backlog or wire_image out of range".into()));
        }
        Ok(())
    }

    /// Canonical TOML rendering (comments and formatting of the source dropped).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, lowercase hex.
    pub fn digest(&self) -> String {
        let h = Sha256::digest(self.to_toml().as_bytes());
        h.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Provenance line stored in datasets and report headers.
    pub fn provenance(&self) -> String {
        format!("config_sha256={} map={} seed={}", self.digest(), self.map, self.train.seed)
    }

    /// The training config with provenance filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { provenance: self.provenance(), ..self.train.clone() }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.eval.seed = seed;
    }

    pub fn world(&self) -> Result<WorldMap, Error> {
        resolve_map(&self.map, &self.base_dir)
    }

    /// Task by name with the evaluation settings applied.
    pub fn task(&self, name: &str) -> Result<TaskSpec, Error> {
        let mut t = match name {
            "hallway" => TaskSpec::hallway(),
            "hallway-peds" => TaskSpec::hallway_peds(),
            "classroom" => TaskSpec::classroom(),
            "noise" => TaskSpec { control_noise_sigma: self.eval.noise_sigma, ..TaskSpec::noise() },
            other => return Err(Error::Config(format!("unknown task `{other}`"))),
        };
        t.episodes = self.eval.episodes;
        t.max_seconds = self.eval.max_seconds;
        t.spawn_jitter = self.eval.spawn_jitter;
        Ok(t)
    }
}

/// A bundled map name, or a map file path resolved against `base`.
pub fn resolve_map(map: &str, base: &Path) -> Result<WorldMap, Error> {
    if let Some(w) = fixtures::by_name(map) {
        return Ok(w);
    }
    let path = base.join(map);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    load_map(&text).map_err(|e| Error::Map(format!("{}: {e}", path.display())))
}
