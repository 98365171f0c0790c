//! Run configuration: flags, an optional JSON file, and defaults, merged in
//! that order of precedence.

use std::path::{Path, PathBuf};

use rectbound::sampler::HashFamily;
use serde::{Deserialize, Serialize};

use crate::error::{validation, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Every parameter a command can take. Unset fields fall through to the
/// config file and then to the command's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Path to a problem file (`x_size`, `y_size`, `z_size`, `accept`, `mass`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_hash_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<HashFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident; $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    /// Fields set in `self` win over `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        overlay_fields!(self, base; command, family, n, problem, z, eps, delta, eps_prime, c, reduced_delta,
            reduced_iterations, reduced_hash_bits, hash, suite, seed, trials, t, budget_fraction, output, format)
    }

    pub fn from_json(text: &str) -> CliResult<RunConfig> {
        serde_json::from_str(text).map_err(|e| validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| validation(format!("missing --{flag}")))
}

pub fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> CliResult<f64> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(validation(format!("--{name} = {v}; need {lo} <= {name} <= {hi}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig { eps: Some(0.2), z: Some(0), seed: Some(3), ..Default::default() };
        let flags = RunConfig { eps: Some(0.1), ..Default::default() };
        let merged = flags.overlay(file);
        assert_eq!(merged.eps, Some(0.1));
        assert_eq!(merged.z, Some(0));
        assert_eq!(merged.seed, Some(3));
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            command: Some("sampler run".into()),
            family: Some("AND".into()),
            n: Some(1),
            eps: Some(0.3),
            c: Some(1.5),
            reduced_delta: Some(3.0),
            hash: Some(HashFamily::Random),
            seed: Some(u64::MAX),
            trials: Some(100_000),
            budget_fraction: Some(0.1 + 0.2),
            format: Some(Format::Csv),
            problem: Some("p.json".into()),
            ..Default::default()
        };
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"epsilon": 0.1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"eps": "high"}"#).is_err());
    }
}
