//! GPU descriptions and forward projection of their headline numbers.
//!
//! A [`GpuSpec`] carries everything the rest of the tool needs to know about
//! an accelerator: peak throughput, memory capacity and bandwidth, interconnect
//! bandwidths, power draw, and the two embodied-carbon intensities (logic die
//! and HBM stack). Four shipping datacenter parts are built in; custom parts
//! can be supplied from a config file.
//!
//! [`ScalingRates`] captures how each of those numbers has historically moved
//! per year. [`GpuSpec::project`] compounds the rates over a fractional number
//! of years to sketch a plausible future part. Projection deliberately leaves
//! alone the things that have not moved with process scaling: inter-node
//! bandwidth, the static-power fraction, and the carbon intensity per unit of
//! silicon or memory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HardwareError {
    #[error("projection horizon must be nonnegative, got {0} years")]
    NegativeYears(f64),
    #[error("invalid GPU spec for {name}: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("invalid scaling rates: {0}")]
    InvalidRates(String),
}

/// One accelerator model as the planner sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpuSpec {
    pub name: String,
    /// Peak dense half-precision throughput, FLOP/s.
    pub peak_flops: f64,
    /// HBM capacity, bytes.
    pub hbm_bytes: f64,
    /// HBM bandwidth, bytes/s.
    pub hbm_bw: f64,
    /// Intra-node (scale-up) link bandwidth per GPU, bytes/s.
    pub nvlink_bw: f64,
    /// Inter-node network bandwidth per GPU, bytes/s.
    #[serde(default = "default_internode_bw")]
    pub internode_bw: f64,
    /// Board power limit, watts.
    pub tdp_watts: f64,
    /// Logic die area, cm^2.
    pub die_area_cm2: f64,
    /// Embodied carbon of the logic die, kg CO2e per cm^2.
    pub logic_cpa: f64,
    /// Embodied carbon of the HBM stacks, kg CO2e per GB.
    pub hbm_cpa: f64,
    /// Fraction of TDP drawn regardless of load.
    #[serde(default = "default_static_fraction")]
    pub static_fraction: f64,
    /// On-die SRAM capacity relative to today's parts; feeds kernel efficiency.
    #[serde(default = "default_sram_scale")]
    pub sram_capacity_scale: f64,
}

fn default_internode_bw() -> f64 {
    50e9
}

fn default_static_fraction() -> f64 {
    0.842
}

fn default_sram_scale() -> f64 {
    1.0
}

impl GpuSpec {
    /// Look up a built-in part by name, case-insensitively.
    pub fn builtin(name: &str) -> Option<GpuSpec> {
        catalog()
            .into_iter()
            .find(|g| g.name.eq_ignore_ascii_case(name))
    }

    pub fn validate(&self) -> Result<(), HardwareError> {
        let err = |reason: String| HardwareError::InvalidSpec {
            name: self.name.clone(),
            reason,
        };
        if self.name.is_empty() {
            return Err(HardwareError::InvalidSpec {
                name: "<unnamed>".into(),
                reason: "name must not be empty".into(),
            });
        }
        let positive = [
            ("peak_flops", self.peak_flops),
            ("hbm_bytes", self.hbm_bytes),
            ("hbm_bw", self.hbm_bw),
            ("nvlink_bw", self.nvlink_bw),
            ("internode_bw", self.internode_bw),
            ("tdp_watts", self.tdp_watts),
            ("die_area_cm2", self.die_area_cm2),
            ("logic_cpa", self.logic_cpa),
            ("hbm_cpa", self.hbm_cpa),
            ("sram_capacity_scale", self.sram_capacity_scale),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("{field} must be positive and finite, got {v}")));
            }
        }
        if !(self.static_fraction.is_finite() && (0.0..1.0).contains(&self.static_fraction)) {
            return Err(err(format!(
                "static_fraction must lie in [0, 1), got {}",
                self.static_fraction
            )));
        }
        Ok(())
    }

    /// Compound the yearly rates over `years` to sketch a future part.
    ///
    /// `years` may be fractional; zero returns the part unchanged, bit for
    /// bit. The name is left alone so callers can tell what the projection
    /// started from.
    pub fn project(&self, rates: &ScalingRates, years: f64) -> Result<GpuSpec, HardwareError> {
        if !(years >= 0.0) || !years.is_finite() {
            return Err(HardwareError::NegativeYears(years));
        }
        rates.validate()?;
        let core = rates.core_tdp_fraction;
        let tdp_factor =
            core * rates.core_power.powf(years) + (1.0 - core) * rates.hbm_power.powf(years);
        Ok(GpuSpec {
            name: self.name.clone(),
            peak_flops: self.peak_flops * rates.core_flops.powf(years),
            hbm_bytes: self.hbm_bytes * rates.hbm_capacity.powf(years),
            hbm_bw: self.hbm_bw * rates.hbm_bw.powf(years),
            nvlink_bw: self.nvlink_bw * rates.nvlink_bw.powf(years),
            internode_bw: self.internode_bw,
            tdp_watts: self.tdp_watts * tdp_factor,
            die_area_cm2: self.die_area_cm2 * rates.core_area.powf(years),
            logic_cpa: self.logic_cpa,
            hbm_cpa: self.hbm_cpa,
            static_fraction: self.static_fraction,
            sram_capacity_scale: self.sram_capacity_scale * rates.sram_capacity.powf(years),
        })
    }
}

/// The four datacenter parts the tool knows out of the box.
pub fn catalog() -> Vec<GpuSpec> {
    let base = |name: &str,
                peak_flops: f64,
                hbm_bytes: f64,
                hbm_bw: f64,
                nvlink_bw: f64,
                tdp_watts: f64,
                die_area_cm2: f64,
                logic_cpa: f64,
                hbm_cpa: f64| GpuSpec {
        name: name.into(),
        peak_flops,
        hbm_bytes,
        hbm_bw,
        nvlink_bw,
        internode_bw: default_internode_bw(),
        tdp_watts,
        die_area_cm2,
        logic_cpa,
        hbm_cpa,
        static_fraction: default_static_fraction(),
        sram_capacity_scale: default_sram_scale(),
    };
    vec![
        base("V100", 119.2e12, 32e9, 900e9, 300e9, 250.0, 8.15, 1.2, 1.8),
        base("A100", 312e12, 40e9, 1555e9, 600e9, 400.0, 8.26, 1.6, 1.85),
        base("H100", 989.4e12, 80e9, 3352e9, 900e9, 700.0, 8.14, 1.9, 1.9),
        base("B100", 1980e12, 192e9, 8200e9, 1.8e12, 700.0, 16.0, 2.1, 1.95),
    ]
}

pub fn builtin_names() -> Vec<String> {
    catalog().into_iter().map(|g| g.name).collect()
}

/// Yearly improvement factors for each projectable spec field.
///
/// A rate of 1.3 means the number multiplies by 1.3 every year. Power rates
/// apply to the core and memory shares of TDP separately, weighted by
/// `core_tdp_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingRates {
    pub core_flops: f64,
    pub sram_capacity: f64,
    pub core_power: f64,
    pub core_area: f64,
    pub hbm_bw: f64,
    pub hbm_power: f64,
    pub hbm_capacity: f64,
    pub nvlink_bw: f64,
    /// Share of TDP attributed to the core (the rest is memory).
    pub core_tdp_fraction: f64,
}

impl Default for ScalingRates {
    fn default() -> Self {
        Self {
            core_flops: 1.3,
            sram_capacity: 1.4,
            core_power: 1.03,
            core_area: 1.05,
            hbm_bw: 1.25,
            hbm_power: 1.03,
            hbm_capacity: 1.24,
            nvlink_bw: 1.11,
            core_tdp_fraction: 0.70,
        }
    }
}

impl ScalingRates {
    pub fn validate(&self) -> Result<(), HardwareError> {
        let rates = [
            ("core_flops", self.core_flops),
            ("sram_capacity", self.sram_capacity),
            ("core_power", self.core_power),
            ("core_area", self.core_area),
            ("hbm_bw", self.hbm_bw),
            ("hbm_power", self.hbm_power),
            ("hbm_capacity", self.hbm_capacity),
            ("nvlink_bw", self.nvlink_bw),
        ];
        for (field, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(HardwareError::InvalidRates(format!(
                    "{field} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.core_tdp_fraction.is_finite() && (0.0..=1.0).contains(&self.core_tdp_fraction)) {
            return Err(HardwareError::InvalidRates(format!(
                "core_tdp_fraction must lie in [0, 1], got {}",
                self.core_tdp_fraction
            )));
        }
        Ok(())
    }
}
