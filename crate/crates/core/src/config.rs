//! Layered configuration: embedded defaults < user TOML file < `key=value`
//! overrides.

use crate::agents::{AgentConfig, FeatureScaling, TrainingConfig};
use crate::baselines::{ApfConfig, MpcConfig};
use crate::colregs::RewardConfig;
use crate::dynamics::{DisturbanceModel, Timing, VesselParams};
use crate::error::{Error, Result};
use crate::harness::HarnessConfig;
use crate::nn::NetworkConfig;
use crate::perception::PerceptionConfig;
use crate::world::{CurriculumStage, ScenarioConfig, WorldConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSection {
    pub goal_radius: f64,
    pub timeout: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub vessel: VesselParams,
    pub timing: Timing,
    pub world: WorldSection,
    pub scenario: ScenarioConfig,
    pub curriculum: Vec<CurriculumStage>,
    pub perception: PerceptionConfig,
    pub reward: RewardConfig,
    pub network: NetworkConfig,
    pub features: FeatureScaling,
    pub agent: AgentConfig,
    pub training: TrainingConfig,
    pub apf: ApfConfig,
    pub mpc: MpcConfig,
    pub harness: HarnessConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self::from_value(Self::default_value()).expect("embedded default config is valid")
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    // reuse the TOML grammar for numbers, booleans, strings and arrays
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl LabConfig {
    fn default_value() -> toml::Value {
        toml::from_str(DEFAULT_CONFIG).expect("embedded default config parses")
    }

    fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the optional file, then `dotted.key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = Self::default_value();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            let file: toml::Value =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut value, file);
        }
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let mut overlay = parse_scalar(raw.trim());
            for part in key.trim().split('.').rev() {
                let mut t = toml::Table::new();
                t.insert(part.to_string(), overlay);
                overlay = toml::Value::Table(t);
            }
            merge(&mut value, overlay);
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        self.vessel.validate()?;
        if !(self.timing.dt_physics > 0.0 && self.timing.dt_physics <= self.timing.dt_control) {
            return Err(Error::Config("need 0 < dt_physics <= dt_control".into()));
        }
        for stage in &self.curriculum {
            stage.validate()?;
        }
        self.perception.noise.validate()?;
        self.reward.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            vessel: self.vessel.clone(),
            timing: self.timing,
            goal_radius: self.world.goal_radius,
            timeout: self.world.timeout,
            disturbance: self.world.disturbance,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
