//! TOML run configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::WaterModel;
use crate::error::{Result, SnakeError};
use crate::gait::GaitSpec;
use crate::params::RobotParams;
use crate::sim::SimSettings;

/// Everything a run needs. Every table and key is optional in the file;
/// missing ones take their defaults and unknown ones are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub robot: RobotParams,
    pub water: WaterModel,
    pub gait: GaitSpec,
    pub sim: SimSettings,
}

impl Config {
    /// Parses and validates a configuration.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| SnakeError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            SnakeError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| SnakeError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.water.validate()?;
        self.gait.validate(self.robot.max_pressure)?;
        self.sim.validate()
    }
}
