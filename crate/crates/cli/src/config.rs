//! The JSON run configuration. Every field has a default and unknown keys
//! are rejected at every level.

use std::path::{Path, PathBuf};

use pal_core::env::EnvConfig;
use pal_core::eval::{RolloutProtocol, SweepSpec};
use pal_core::morphology::{reference, reference_by_name, GenerationConfig};
use pal_core::ppo::{PpoConfig, Variant};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Robot set written by `gen-robots` and read by `train`.
    pub robots: PathBuf,
    pub checkpoints: PathBuf,
    /// Metric CSVs and evaluation reports. `PAL_METRICS_DIR` overrides it.
    pub metrics: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { robots: "robots.json".into(), checkpoints: "run/checkpoints".into(), metrics: "run/metrics".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub protocol: RolloutProtocol,
    /// Sweeps run when `eval` gets no task flags.
    pub sweeps: Vec<SweepSpec>,
    /// Model for sweeps and tracking.
    pub robot: String,
    /// Unseen models for the zero-shot table.
    pub models: Vec<String>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            protocol: RolloutProtocol::default(),
            sweeps: Vec::new(),
            robot: "a1_ref".into(),
            models: ["a1_ref", "aliengo_ref", "anymal_b_ref", "anymal_c_ref"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub variant: Variant,
    /// Reference ids trained on.
    pub ids: Vec<u32>,
    /// Robots generated per reference id.
    pub count: usize,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub generation: GenerationConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            variant: Variant::Pal,
            ids: vec![1, 2, 4, 5],
            count: 50,
            ppo: PpoConfig::default(),
            env: EnvConfig::default(),
            generation: GenerationConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.ids.is_empty() {
            return Err("ids must not be empty".into());
        }
        for &id in &self.ids {
            reference(id).map_err(|e| e.to_string())?;
        }
        if self.count == 0 {
            return Err("count must be at least 1".into());
        }
        self.ppo.validate()?;
        self.eval.protocol.validate().map_err(|e| e.to_string())?;
        for s in &self.eval.sweeps {
            s.validate().map_err(|e| e.to_string())?;
        }
        for m in std::iter::once(&self.eval.robot).chain(&self.eval.models) {
            reference_by_name(m).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}
