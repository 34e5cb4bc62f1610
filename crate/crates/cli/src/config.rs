use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hplatent::bisim::EmbeddingConfig;
use hplatent::envs::EnvId;
use hplatent::worldmodel::{TrainConfig, TrainMode};

/// JSON schema of [`ExperimentConfig`].
pub const CONFIG_SCHEMA: &str = include_str!("../schema/experiment-config.schema.json");

pub const OUT_DIR_VAR: &str = "HPL_OUT_DIR";
pub const THREADS_VAR: &str = "HPL_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvName {
    MountainCar,
    Arm,
    Drone,
}

/// Which drone parameter is hidden; the other one becomes part of the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DroneHidden {
    Payload,
    Temperature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_trajectories: usize,
    pub eval_train_trajectories: usize,
    pub eval_test_trajectories: usize,
    pub length: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_trajectories: 2000,
            eval_train_trajectories: 30,
            eval_test_trajectories: 100,
            length: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub train_data: u64,
    pub eval_train_data: u64,
    pub eval_test_data: u64,
    pub anchors: u64,
    pub memories: u64,
    pub sweep: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            train_data: 0,
            eval_train_data: 1,
            eval_test_data: 2,
            anchors: 3,
            memories: 4,
            sweep: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisimConfig {
    pub anchors: usize,
    pub memories: usize,
    /// Earliest time step memories are drawn from.
    pub min_step: usize,
    pub embedding: EmbeddingConfig,
}

impl Default for BisimConfig {
    fn default() -> Self {
        Self {
            anchors: 256,
            memories: 512,
            min_step: 5,
            embedding: EmbeddingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub knn_k: usize,
    /// Recurrent model compared against the stateless one in the error-ratio table.
    pub error_ratio_model: TrainMode,
    /// Hidden values to condition imagined rollouts on. Defaults to the
    /// discrete support, or low/mid/high of a continuous range.
    pub sweep_values: Option<Vec<f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            knn_k: 5,
            error_ratio_model: TrainMode::Standard,
            sweep_values: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvName,
    /// Required for the drone, rejected otherwise.
    pub hidden: Option<DroneHidden>,
    pub data: DataConfig,
    pub seeds: SeedConfig,
    /// Baseline recurrent model; the stateless comparison model reuses it.
    pub standard: TrainConfig,
    pub time_invariant: TrainConfig,
    pub bisim: BisimConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvName::MountainCar,
            hidden: None,
            data: DataConfig::default(),
            seeds: SeedConfig::default(),
            standard: desk_train_config(TrainMode::Standard),
            time_invariant: desk_train_config(TrainMode::TimeInvariant),
            bisim: BisimConfig::default(),
            eval: EvalConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// World-model settings tuned for mountain car at desk scale. The library
/// default (lr 1e-3, memory 32) learns almost no gravity signal within a few
/// hundred CPU-minutes.
fn desk_train_config(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        epochs: 100,
        learning_rate: 1e-2,
        memory_size: 8,
        encoder_layers: vec![32, 32],
        decoder_layers: vec![32, 32],
        mode,
        ..TrainConfig::default()
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key.
fn overlay(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Reads a config file. Keys left out, at any depth, take the values of
    /// [`ExperimentConfig::default`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let patch: serde_json::Value = serde_json::from_str(text)?;
        let mut merged = serde_json::to_value(Self::default())?;
        overlay(&mut merged, patch);
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn env_id(&self) -> Result<EnvId> {
        Ok(match (self.env, self.hidden) {
            (EnvName::MountainCar, None) => EnvId::MountainCar,
            (EnvName::Arm, None) => EnvId::Arm,
            (EnvName::Drone, Some(DroneHidden::Payload)) => EnvId::DronePayload,
            (EnvName::Drone, Some(DroneHidden::Temperature)) => EnvId::DroneTemperature,
            (EnvName::Drone, None) => bail!("the drone needs `hidden` set to payload or temperature"),
            (_, Some(_)) => bail!("`hidden` applies only to the drone"),
        })
    }

    /// Training settings for one mode; the section's own `mode` must agree.
    pub fn train_config(&self, mode: TrainMode) -> &TrainConfig {
        match mode {
            TrainMode::Standard => &self.standard,
            TrainMode::TimeInvariant => &self.time_invariant,
        }
    }

    pub fn sweep_values(&self) -> Result<Vec<f64>> {
        let spec = self.env_id()?.hidden_spec();
        Ok(match &self.eval.sweep_values {
            Some(v) => v.clone(),
            None => match &spec.kind {
                hplatent::envs::HiddenKind::Discrete { support } => support.clone(),
                hplatent::envs::HiddenKind::Continuous { low, high } => vec![*low, 0.5 * (low + high), *high],
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let env = self.env_id()?;
        let d = &self.data;
        if d.train_trajectories == 0 || d.eval_train_trajectories == 0 || d.eval_test_trajectories == 0 {
            bail!("dataset sizes must be positive");
        }
        if d.length < 2 {
            bail!("trajectory length must be at least 2");
        }
        let s = &self.seeds;
        let data_seeds = [s.train_data, s.eval_train_data, s.eval_test_data];
        if data_seeds[0] == data_seeds[1] || data_seeds[0] == data_seeds[2] || data_seeds[1] == data_seeds[2] {
            bail!("the three dataset seeds must be distinct");
        }
        for (name, mode) in [("standard", TrainMode::Standard), ("time_invariant", TrainMode::TimeInvariant)] {
            let tc = self.train_config(mode);
            if tc.mode != mode {
                bail!("section `{name}` must have mode `{}`", mode.as_str());
            }
            tc.validate().with_context(|| format!("section `{name}`"))?;
        }
        self.bisim.embedding.validate()?;
        if self.bisim.anchors == 0 || self.bisim.memories < 2 {
            bail!("need at least one anchor and two memories");
        }
        if self.bisim.min_step > d.length {
            bail!("min_step {} exceeds trajectory length {}", self.bisim.min_step, d.length);
        }
        if self.eval.knn_k == 0 || self.eval.knn_k > d.eval_train_trajectories {
            bail!("knn_k must be in 1..={}", d.eval_train_trajectories);
        }
        let spec = env.hidden_spec();
        for v in self.sweep_values()? {
            if !spec.contains(v) {
                bail!("sweep value {v} outside the support of {}", spec.name);
            }
        }
        Ok(())
    }
}

/// Output directory from, in order: the command line, the environment, the config.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| cfg.out_dir.clone())
}

/// Thread count from the command line, then the environment, defaulting to 1.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_VAR) {
            Ok(v) => v.parse().with_context(|| format!("{THREADS_VAR}={v} is not a thread count"))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        bail!("thread count must be positive");
    }
    Ok(n)
}
