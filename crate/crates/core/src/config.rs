//! Run configuration and the provenance stamp every output carries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::ModelConfig;
use crate::model::sha256_hex;
use crate::vote::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
}

fn default_threshold() -> usize {
    DEFAULT_THRESHOLD
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            template_dir: None,
            cache_dir: None,
            output_dir: None,
            models: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    /// Loads a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.template_dir, &mut cfg.cache_dir, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold == 0 {
            return Err(Error::Validation("threshold must be at least 1".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            m.validate()?;
            if !names.insert(m.name.as_str()) {
                return Err(Error::Validation(format!("model {} configured twice", m.name)));
            }
        }
        if let Some(dir) = &self.template_dir {
            if !dir.is_dir() {
                return Err(Error::Validation(format!("template_dir {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    pub fn model_names(&self) -> Vec<String> {
        self.models.iter().map(|m| m.name.clone()).collect()
    }

    /// sha256 over the settings that change results. Paths are left out so
    /// the same run on another machine digests the same.
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!({
            "seed": self.seed,
            "threshold": self.threshold,
            "models": self.models,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    pub fn stamp(&self) -> RunStamp {
        RunStamp {
            config_digest: self.digest(),
            seed: self.seed,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_digest: String,
    pub seed: u64,
    pub threshold: usize,
}

impl RunStamp {
    /// `key=value` pairs for comment lines and footers.
    pub fn line(&self) -> String {
        format!("config_digest={} seed={} threshold={}", self.config_digest, self.seed, self.threshold)
    }
}
