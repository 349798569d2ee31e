use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositor::{BlendConfig, BlendMode};
use crate::depth::DepthParams;
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::semantics::{FixedVisibilityParams, VisibilityParams, DEFAULT_SIGMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSource {
    /// TV-L1 on the input frames.
    Computed,
    /// Exact flow from the dataset's `truth/` directory.
    Truth,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    /// Reuse products whose inputs and settings are unchanged.
    pub enabled: bool,
    /// Where intermediate products go; the output directory when unset.
    pub dir: Option<PathBuf>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            dir: None,
        }
    }
}

/// Everything the pipeline needs, loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Gaussian scale of the probability weighting.
    pub sigma: f64,
    /// Frames whose flow and depth may be computed ahead of fusion.
    pub in_flight: usize,
    pub flow_source: FlowSource,
    /// Blend modes to render for every frame.
    pub modes: Vec<BlendMode>,
    pub flow: FlowParams,
    pub depth: DepthParams,
    pub visibility: VisibilityParams,
    pub fixed_visibility: FixedVisibilityParams,
    pub blend: BlendConfig,
    pub paths: PathsConfig,
    pub cache: CacheConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            in_flight: 4,
            flow_source: FlowSource::Computed,
            modes: BlendMode::ALL.to_vec(),
            flow: FlowParams::default(),
            depth: DepthParams::default(),
            visibility: VisibilityParams::default(),
            fixed_visibility: FixedVisibilityParams::default(),
            blend: BlendConfig::default(),
            paths: PathsConfig::default(),
            cache: CacheConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.in_flight == 0 {
            return Err(Error::Config("in_flight must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one blend mode is required".into()));
        }
        self.flow.validate()?;
        self.depth.validate()?;
        self.visibility.validate()?;
        self.fixed_visibility.validate()?;
        self.blend.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
