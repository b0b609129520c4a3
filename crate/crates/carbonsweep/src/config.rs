//! TOML configuration for the command-line tool, and its canonical digest.
//!
//! Every section is optional and every field has a default, so an empty file
//! (or no file) runs the standard B100 sweep. Unknown keys are rejected with
//! the offending key named. The GPU comes from the built-in catalog by name,
//! or from a `[custom_gpu]` table which wins when both are present.
//!
//! Output files embed a SHA-256 digest of the *resolved* configuration —
//! defaults filled in, GPU looked up, durations parsed — so two configs that
//! mean the same thing stamp the same digest regardless of formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::carbon::CarbonConfig;
use crate::hardware::{GpuSpec, ScalingRates};
use crate::perf::PerfConfig;
use crate::scaling::ScalingConfig;
use crate::scenario::{RunParams, ScenarioConfig};
use crate::search::SearchLimits;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown GPU {name:?}; built-in parts: {available}")]
    UnknownGpu { name: String, available: String },
    #[error("cannot parse duration {0:?}; use forms like \"90d\", \"12h\", \"3 months\", \"5y\", or plain seconds")]
    InvalidDuration(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which widths to sweep and under what deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Geometric span of active parameter counts...
    pub min_active_params: f64,
    pub max_active_params: f64,
    /// ...sampled at this many points (deduplicated after width rounding).
    pub points: usize,
    /// Explicit width list; overrides the span when present.
    pub d_models: Option<Vec<u64>>,
    pub seq_len: u64,
    /// Training deadline, e.g. "90d", "12h", "3 months", or seconds.
    pub deadline: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_active_params: 1e11,
            max_active_params: 1e15,
            points: 9,
            d_models: None,
            seq_len: 2048,
            deadline: "90d".into(),
        }
    }
}

/// Bounds on the plan search, as configured (see [`SearchLimits`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_gpus: Option<u64>,
    pub max_candidates: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let d = SearchLimits::default();
        Self {
            max_gpus: None,
            max_candidates: d.max_candidates,
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Built-in GPU name; ignored when `custom_gpu` is given.
    pub gpu: String,
    pub custom_gpu: Option<GpuSpec>,
    pub scaling: ScalingConfig,
    pub perf: PerfConfig,
    pub carbon: CarbonConfig,
    pub rates: ScalingRates,
    pub sweep: SweepConfig,
    pub search: SearchConfig,
    /// Extra scenarios beyond the always-run baseline.
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            gpu: "B100".into(),
            custom_gpu: None,
            scaling: ScalingConfig::default(),
            perf: PerfConfig::default(),
            carbon: CarbonConfig::default(),
            rates: ScalingRates::default(),
            sweep: SweepConfig::default(),
            search: SearchConfig::default(),
            scenarios: Vec::new(),
        }
    }
}

/// Parse a human-friendly duration into seconds. Months are exactly 30 days
/// and years 365, so "3 months" and "90d" agree.
pub fn parse_duration(s: &str) -> Result<f64, ConfigError> {
    let trimmed = s.trim();
    let digits_end = trimmed
        .find(|c: char| !c.is_ascii_digit() && c != '.')
        .unwrap_or(trimmed.len());
    let (num_str, unit_str) = trimmed.split_at(digits_end);
    let value: f64 = num_str
        .parse()
        .map_err(|_| ConfigError::InvalidDuration(s.to_string()))?;
    let unit = unit_str.trim().to_ascii_lowercase();
    let multiplier = match unit.as_str() {
        "" | "s" | "sec" | "secs" | "second" | "seconds" => 1.0,
        "h" | "hr" | "hrs" | "hour" | "hours" => 3600.0,
        "d" | "day" | "days" => 86_400.0,
        "mo" | "month" | "months" => 30.0 * 86_400.0,
        "y" | "yr" | "yrs" | "year" | "years" => 365.0 * 86_400.0,
        _ => return Err(ConfigError::InvalidDuration(s.to_string())),
    };
    let seconds = value * multiplier;
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(ConfigError::InvalidDuration(s.to_string()));
    }
    Ok(seconds)
}

/// A configuration with every choice made: GPU looked up, widths listed,
/// deadline in seconds, everything validated.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub params: RunParams,
    pub d_models: Vec<u64>,
    pub scenarios: Vec<ScenarioConfig>,
    /// SHA-256 of the canonical resolved TOML, stamped into outputs.
    pub digest: String,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    fn gpu_spec(&self) -> Result<GpuSpec, ConfigError> {
        if let Some(custom) = &self.custom_gpu {
            custom
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            return Ok(custom.clone());
        }
        GpuSpec::builtin(&self.gpu).ok_or_else(|| ConfigError::UnknownGpu {
            name: self.gpu.clone(),
            available: crate::hardware::builtin_names().join(", "),
        })
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let gpu = self.gpu_spec()?;
        self.scaling
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.perf.validate().map_err(ConfigError::Invalid)?;
        self.carbon
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.rates
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for s in &self.scenarios {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.sweep.seq_len == 0 {
            return Err(ConfigError::Invalid("seq_len must be positive".into()));
        }
        let deadline_s = parse_duration(&self.sweep.deadline)?;
        let d_models = match &self.sweep.d_models {
            Some(list) if list.is_empty() => {
                return Err(ConfigError::Invalid("d_models must not be empty".into()))
            }
            Some(list) => list.clone(),
            None => self
                .scaling
                .d_models_spanning_active_params(
                    self.sweep.min_active_params,
                    self.sweep.max_active_params,
                    self.sweep.points,
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        };
        let limits = SearchLimits {
            max_gpus: self.search.max_gpus.map(|v| v as u128),
            max_candidates: self.search.max_candidates,
        };
        let digest = self.canonical_digest(&gpu, &d_models)?;
        Ok(ResolvedConfig {
            params: RunParams {
                scaling: self.scaling.clone(),
                perf: self.perf.clone(),
                carbon: self.carbon.clone(),
                rates: self.rates.clone(),
                gpu,
                seq_len: self.sweep.seq_len,
                deadline_s,
                limits,
            },
            d_models,
            scenarios: self.scenarios.clone(),
            digest,
        })
    }

    /// Serialize the resolved form — explicit GPU table, explicit width list,
    /// deadline in seconds — and hash it.
    fn canonical_digest(&self, gpu: &GpuSpec, d_models: &[u64]) -> Result<String, ConfigError> {
        let mut canonical = self.clone();
        canonical.custom_gpu = Some(gpu.clone());
        canonical.gpu = gpu.name.clone();
        canonical.sweep.d_models = Some(d_models.to_vec());
        canonical.sweep.deadline = format!("{}s", parse_duration(&self.sweep.deadline)?);
        let text = toml::to_string(&canonical)
            .map_err(|e| ConfigError::Invalid(format!("cannot serialize config: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_the_standard_run() {
        let cfg: AppConfig = toml::from_str("").unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.params.gpu.name, "B100");
        assert_eq!(resolved.params.seq_len, 2048);
        assert_eq!(resolved.params.deadline_s, 90.0 * 86_400.0);
        assert_eq!(resolved.d_models.len(), 9);
        assert_eq!(*resolved.d_models.first().unwrap(), 4736);
        assert_eq!(*resolved.d_models.last().unwrap(), 133_504);
        assert!(resolved.scenarios.is_empty());
        assert_eq!(resolved.digest.len(), 64);
    }

    #[test]
    fn durations_cover_the_documented_forms() {
        assert_eq!(parse_duration("90d").unwrap(), 7_776_000.0);
        assert_eq!(parse_duration("3 months").unwrap(), 7_776_000.0);
        assert_eq!(parse_duration("3mo").unwrap(), 7_776_000.0);
        assert_eq!(parse_duration("12h").unwrap(), 43_200.0);
        assert_eq!(parse_duration("3600s").unwrap(), 3600.0);
        assert_eq!(parse_duration("3600").unwrap(), 3600.0);
        assert_eq!(parse_duration("5y").unwrap(), 157_680_000.0);
        assert_eq!(parse_duration("2.5h").unwrap(), 9000.0);
        assert_eq!(parse_duration(" 1 day ").unwrap(), 86_400.0);
        for bad in ["", "d", "90 fortnights", "-3h", "abc", "1e3s"] {
            assert!(parse_duration(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn unknown_gpu_names_list_the_catalog() {
        let cfg = AppConfig {
            gpu: "Z9000".into(),
            ..AppConfig::default()
        };
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("Z9000"));
        assert!(err.contains("B100"));
    }

    #[test]
    fn custom_gpu_table_beats_the_catalog_name() {
        let text = r#"
gpu = "A100"

[custom_gpu]
name = "bespoke"
peak_flops = 1e15
hbm_bytes = 96e9
hbm_bw = 4e12
nvlink_bw = 9e11
tdp_watts = 500.0
die_area_cm2 = 10.0
logic_cpa = 2.0
hbm_cpa = 1.9
"#;
        let cfg: AppConfig = toml::from_str(text).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.params.gpu.name, "bespoke");
        assert_eq!(resolved.params.gpu.peak_flops, 1e15);
        // Defaulted fields fill in.
        assert_eq!(resolved.params.gpu.internode_bw, 50e9);
        assert_eq!(resolved.params.gpu.static_fraction, 0.842);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = toml::from_str::<AppConfig>("tpu = \"v5\"").unwrap_err();
        assert!(err.to_string().contains("tpu"));
        let err = toml::from_str::<AppConfig>("[sweep]\npoint = 9").unwrap_err();
        assert!(err.to_string().contains("point"));
    }

    #[test]
    fn digest_ignores_formatting_but_not_meaning() {
        let a: AppConfig = toml::from_str("").unwrap();
        let b: AppConfig = toml::from_str("# just a comment\ngpu = \"B100\"\n\n[sweep]\npoints = 9\n").unwrap();
        let c: AppConfig = toml::from_str("[sweep]\ndeadline = \"3 months\"").unwrap();
        let d: AppConfig = toml::from_str("[sweep]\ndeadline = \"91d\"").unwrap();
        let da = a.resolve().unwrap().digest;
        assert_eq!(da, b.resolve().unwrap().digest);
        // "3 months" resolves to the same seconds as the default "90d".
        assert_eq!(da, c.resolve().unwrap().digest);
        assert_ne!(da, d.resolve().unwrap().digest);
    }

    #[test]
    fn explicit_width_lists_bypass_the_span() {
        let cfg: AppConfig = toml::from_str("[sweep]\nd_models = [4096, 8192]").unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.d_models, vec![4096, 8192]);
    }

    #[test]
    fn scenario_list_parses_and_validates() {
        let text = r#"
[[scenarios]]
label = "aggressive_batch"
batch_exponent = 0.33

[[scenarios]]
label = "advances"
sharding_comm_factor = 0.8
eviction_mem_factor = 0.8
"#;
        let cfg: AppConfig = toml::from_str(text).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.scenarios.len(), 2);
        assert_eq!(resolved.scenarios[0].batch_exponent, Some(0.33));

        let bad = r#"
[[scenarios]]
label = "x"
sharding_comm_factor = 1.5
"#;
        let cfg: AppConfig = toml::from_str(bad).unwrap();
        assert!(cfg.resolve().is_err());
    }
}
