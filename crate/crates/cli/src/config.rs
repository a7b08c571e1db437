use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use narrclause::classifier::{CnnConfig, TrainConfig};
use narrclause::corpus::SplitOptions;
use narrclause::features::FeatureConfig;
use serde::{Deserialize, Serialize};

/// File locations a run reads or writes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub trees: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub tagset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherSettings {
    /// `word-vectors`, `precomputed` or `checkpoint`; filled from the flags used.
    pub encoder: String,
    pub threshold: f64,
    pub aspect: String,
    pub n: usize,
}

impl Default for MatcherSettings {
    fn default() -> Self {
        MatcherSettings {
            encoder: String::new(),
            threshold: 0.5,
            aspect: "all".into(),
            n: 100,
        }
    }
}

/// Everything a command needs, after merging the config file and flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub paths: Paths,
    pub features: FeatureConfig,
    pub model: CnnConfig,
    pub training: TrainConfig,
    pub split: SplitOptions,
    pub matcher: MatcherSettings,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// One seed drives aggregation, splitting and training.
    pub fn set_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.training.seed = self.seed;
        self.split.seed = self.seed;
    }

    /// Writes the resolved config beside `output`: inside it when it is a
    /// directory, else as `<output>.run.json`.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let target = if output.is_dir() {
            output.join("run_config.json")
        } else {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".run.json");
            output.with_file_name(name)
        };
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&target, text + "\n").with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }
}
