//! Run configuration: one TOML/JSON file covering every module, with CLI
//! flags taking precedence over file values.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sgl_core::classify::PipelineConfig;
use sgl_core::preprocess::PreprocessConfig;
use sgl_core::synth::SynthConfig;
use std::path::Path;

/// Evaluation section of the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ratio: f64,
    pub repeats: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { ratio: 0.8, repeats: 1 }
    }
}

/// Full run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; propagated into the pipeline and generator sections.
    pub seed: Option<u64>,
    /// Worker threads; 0 keeps the library default.
    pub jobs: usize,
    pub preprocess: PreprocessConfig,
    pub pipeline: PipelineConfig,
    pub eval: EvalSection,
    pub synth: SynthConfig,
}

impl RunConfig {
    /// Loads from a TOML (default) or JSON file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?,
            _ => toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?,
        };
        Ok(cfg)
    }

    /// Applies the master seed to the nested sections and validates.
    pub fn resolve(mut self) -> Result<RunConfig> {
        if let Some(seed) = self.seed {
            self.pipeline.seed = seed;
            self.synth.seed = seed;
        }
        self.preprocess.validate().map_err(|e| anyhow::anyhow!(e))?;
        self.pipeline.validate().map_err(|e| anyhow::anyhow!(e))?;
        self.synth.validate().map_err(|e| anyhow::anyhow!(e))?;
        if !(self.eval.ratio > 0.0 && self.eval.ratio < 1.0) {
            bail!("eval.ratio must be in (0, 1)");
        }
        if self.eval.repeats < 1 {
            bail!("eval.repeats must be >= 1");
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializable")
    }
}
