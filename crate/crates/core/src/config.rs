//! Sectioned TOML run configuration. Every section falls back to its
//! defaults, and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::EncodingConfig;
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::pcm::{DeviceConfig, EnergyModel, PulseSpec};
use crate::rbm::{RbmTopology, TrainConfig};
use crate::snn::LifParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcnnConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for FcnnConfig {
    fn default() -> Self {
        Self { learning_rate: 0.003, epochs: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            train_per_class: 500,
            test_per_class: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub frontend: FrontendConfig,
    pub encoding: EncodingConfig,
    pub lif: LifParams,
    pub device: DeviceConfig,
    pub pulse: PulseSpec,
    pub energy: EnergyModel,
    pub topology: RbmTopology,
    pub train: TrainConfig,
    pub fcnn: FcnnConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.encoding.validate()?;
        self.lif.validate()?;
        self.device.build()?;
        self.pulse.validate()?;
        self.train.validate()?;
        let pixels = self.frontend.pixel_count()?;
        if pixels != self.topology.n_image {
            return Err(Error::Config(format!(
                "frontend produces {pixels} pixels but topology.n_image is {}",
                self.topology.n_image
            )));
        }
        if !(self.fcnn.learning_rate >= 0.0) {
            return Err(Error::Config("fcnn.learning_rate must be non-negative".into()));
        }
        Ok(())
    }
}
