use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::chunker::DEFAULT_MAX_TOKENS;
use crate::gateway::ModelConfig;
use crate::notebook::DEFAULT_GLOB;
use crate::query::DEFAULT_K;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub repo_root: PathBuf,
    pub index_dir: PathBuf,
    /// Seconds between sync cycles.
    pub sync_interval_s: u64,
    pub token_budget: usize,
    pub k_default: usize,
    pub model: ModelConfig,
    pub glob: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            repo_root: PathBuf::from("."),
            index_dir: PathBuf::from(".nbsearch"),
            sync_interval_s: 900,
            token_budget: DEFAULT_MAX_TOKENS,
            k_default: DEFAULT_K,
            model: ModelConfig::default(),
            glob: DEFAULT_GLOB.to_string(),
        }
    }
}

impl AppConfig {
    /// Offline configuration for a repository, indexing into `index_dir`.
    pub fn offline(repo_root: impl Into<PathBuf>, index_dir: impl Into<PathBuf>) -> Self {
        Self {
            repo_root: repo_root.into(),
            index_dir: index_dir.into(),
            model: ModelConfig::offline(),
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let fail = |m: &str| Err(AppError::Config(m.to_string()));
        if self.sync_interval_s < 1 {
            return fail("sync_interval_s must be at least 1");
        }
        if self.token_budget < 1 {
            return fail("token_budget must be at least 1");
        }
        if self.k_default < 1 {
            return fail("k_default must be at least 1");
        }
        if self.model.completion_max_tokens < 1 {
            return fail("model.completion_max_tokens must be at least 1");
        }
        if self.model.offline_dim < 1 {
            return fail("model.offline_dim must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = AppConfig::default();
        assert_eq!(cfg.sync_interval_s, 900);
        assert_eq!(cfg.token_budget, 8191);
        assert_eq!(cfg.k_default, 5);
        assert_eq!(cfg.glob, "**/*.ipynb");
        assert_eq!(cfg.model.embed_model, "text-embedding-ada-002");
    }

    #[test]
    fn partial_file_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"repo_root": "/repo", "model": {"offline_mode": true}}"#).unwrap();
        let cfg = AppConfig::from_file(&p).unwrap();
        assert_eq!(cfg.repo_root, PathBuf::from("/repo"));
        assert!(cfg.model.offline_mode);
        assert_eq!(cfg.model.retry.max_attempts, 3);

        std::fs::write(&p, r#"{"sync_interval_s": 0}"#).unwrap();
        assert!(matches!(AppConfig::from_file(&p), Err(AppError::Config(_))));
    }
}
