//! Run configuration shared by the library entry points and the CLI.

use serde::{Deserialize, Serialize};

pub const ENV_TRUNCATION: &str = "PADIC_SR_TRUNCATION";
pub const ENV_HENSEL_DEPTH: &str = "PADIC_SR_HENSEL_DEPTH";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{name} must be a positive integer, got {value:?}")]
    NotPositive { name: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    /// Explicit series truncation; `None` means `max(p + 1, 2p)`.
    pub truncation: Option<usize>,
    /// Extra `p`-adic digits used by the Hensel power test.
    pub hensel_depth: u32,
    /// Worker threads for batch runs; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults overridden by `PADIC_SR_TRUNCATION` / `PADIC_SR_HENSEL_DEPTH`.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Ok(v) = std::env::var(ENV_TRUNCATION) {
            cfg.truncation = Some(parse_positive(ENV_TRUNCATION, &v)?);
        }
        if let Ok(v) = std::env::var(ENV_HENSEL_DEPTH) {
            cfg.hensel_depth = parse_positive(ENV_HENSEL_DEPTH, &v)? as u32;
        }
        Ok(cfg)
    }

    pub fn truncation_for(&self, p: u64) -> usize {
        let p = p as usize;
        self.truncation.unwrap_or((p + 1).max(2 * p))
    }
}

fn parse_positive(name: &str, v: &str) -> Result<usize, ConfigError> {
    match v.trim().parse::<usize>() {
        Ok(x) if x > 0 => Ok(x),
        _ => Err(ConfigError::NotPositive { name: name.to_string(), value: v.to_string() }),
    }
}
