//! Operational and embodied emissions of a GPU fleet over a training run.
//!
//! Operational carbon is grid carbon: fleet power (a static floor plus a
//! utilization-tracking dynamic part, times datacenter PUE) integrated over
//! the run and multiplied by grid intensity. Embodied carbon charges each
//! device for its manufacturing footprint — die area times a per-area cost
//! for logic, capacity times a per-GB cost for memory — amortized over the
//! fraction of the hardware's service life the run consumes. Node-level
//! overheads (CPU, DRAM, SSD, fans and NICs burning watts) are charged per
//! group of GPUs sharing a host.
//!
//! Everything reports in grams internally and tonnes at the boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hardware::GpuSpec;

/// Joules per kilowatt-hour; the only unit bridge in the module.
const J_PER_KWH: f64 = 3.6e6;

const G_PER_KG: f64 = 1000.0;
const G_PER_TONNE: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum CarbonError {
    #[error("invalid carbon configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Datacenter and supply-chain assumptions, all overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarbonConfig {
    /// Power usage effectiveness: facility watts per IT watt.
    pub pue: f64,
    /// Grid carbon intensity, grams CO2e per kWh.
    pub carbon_intensity_g_per_kwh: f64,
    /// Hardware service life over which embodied carbon amortizes, seconds.
    pub lifetime_s: f64,
    /// GPUs sharing one host node.
    pub gpus_per_node: u64,
    /// Host-side power per node (CPU, fans, NICs), watts.
    pub node_overhead_watts: f64,
    /// Node SSD capacity, GB, and its embodied cost per GB.
    pub node_ssd_gb: f64,
    pub ssd_cpa_kg_per_gb: f64,
    /// Node DRAM capacity, GB, and its embodied cost per GB.
    pub node_dram_gb: f64,
    pub dram_cpa_kg_per_gb: f64,
    /// Host CPU die area, cm²; costed at the GPU's logic rate.
    pub cpu_die_area_cm2: f64,
    /// Fraction of dynamic power actually drawn at full utilization.
    pub alpha: f64,
}

impl Default for CarbonConfig {
    fn default() -> Self {
        Self {
            pue: 1.1,
            carbon_intensity_g_per_kwh: 127.0,
            // Five 365-day years.
            lifetime_s: 157_680_000.0,
            gpus_per_node: 8,
            node_overhead_watts: 600.0,
            node_ssd_gb: 32768.0,
            ssd_cpa_kg_per_gb: 0.018,
            node_dram_gb: 256.0,
            dram_cpa_kg_per_gb: 1.8,
            cpu_die_area_cm2: 6.0,
            alpha: 1.0,
        }
    }
}

impl CarbonConfig {
    pub fn validate(&self) -> Result<(), CarbonError> {
        let positive = [
            ("carbon_intensity_g_per_kwh", self.carbon_intensity_g_per_kwh),
            ("lifetime_s", self.lifetime_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CarbonError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("node_overhead_watts", self.node_overhead_watts),
            ("node_ssd_gb", self.node_ssd_gb),
            ("ssd_cpa_kg_per_gb", self.ssd_cpa_kg_per_gb),
            ("node_dram_gb", self.node_dram_gb),
            ("dram_cpa_kg_per_gb", self.dram_cpa_kg_per_gb),
            ("cpu_die_area_cm2", self.cpu_die_area_cm2),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CarbonError::InvalidConfig(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.pue >= 1.0) || !self.pue.is_finite() {
            return Err(CarbonError::InvalidConfig(format!(
                "pue must be at least 1, got {}",
                self.pue
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CarbonError::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.gpus_per_node == 0 {
            return Err(CarbonError::InvalidConfig(
                "gpus_per_node must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Emissions of one training run, split by source. Tonnes CO2e.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CarbonReport {
    pub op_gpu_t: f64,
    pub op_other_t: f64,
    pub emb_gpu_logic_t: f64,
    pub emb_hbm_t: f64,
    pub emb_cpu_t: f64,
    pub emb_dram_t: f64,
    pub emb_ssd_t: f64,
}

impl CarbonReport {
    pub fn emb_total_t(&self) -> f64 {
        self.emb_gpu_logic_t + self.emb_hbm_t + self.emb_cpu_t + self.emb_dram_t + self.emb_ssd_t
    }

    pub fn op_total_t(&self) -> f64 {
        self.op_gpu_t + self.op_other_t
    }

    pub fn total_t(&self) -> f64 {
        self.op_total_t() + self.emb_total_t()
    }
}

/// Whole nodes hosting a fleet, each holding `gpus_per_node` GPUs.
pub fn nodes_for(n_gpu: u128, cfg: &CarbonConfig) -> f64 {
    n_gpu.div_ceil(cfg.gpus_per_node as u128) as f64
}

/// Grid emissions of the GPUs themselves, grams.
///
/// Static power burns regardless of load; dynamic power scales with
/// utilization (damped by `alpha` for workloads that don't toggle every
/// transistor). PUE marks the whole draw up to facility level.
pub fn operational_gpu_g(
    n_gpu: u128,
    duration_s: f64,
    utilization: f64,
    gpu: &GpuSpec,
    cfg: &CarbonConfig,
) -> f64 {
    let p_static = gpu.static_fraction * gpu.tdp_watts;
    let p_dynamic = (1.0 - gpu.static_fraction) * gpu.tdp_watts;
    let watts = p_static + cfg.alpha * p_dynamic * utilization;
    let kwh = n_gpu as f64 * duration_s * watts / J_PER_KWH;
    cfg.pue * cfg.carbon_intensity_g_per_kwh * kwh
}

/// Grid emissions of host-node overhead (CPU, fans, NICs), grams.
pub fn operational_other_g(
    n_gpu: u128,
    duration_s: f64,
    gpu_cfg: &CarbonConfig,
) -> f64 {
    let kwh = nodes_for(n_gpu, gpu_cfg) * duration_s * gpu_cfg.node_overhead_watts / J_PER_KWH;
    gpu_cfg.pue * gpu_cfg.carbon_intensity_g_per_kwh * kwh
}

/// Manufacturing emissions attributable to the run, grams, by component.
/// Returns (gpu_logic, hbm, cpu, dram, ssd).
pub fn embodied_g(
    n_gpu: u128,
    duration_s: f64,
    gpu: &GpuSpec,
    cfg: &CarbonConfig,
) -> (f64, f64, f64, f64, f64) {
    let amortized = duration_s / cfg.lifetime_s;
    let n = n_gpu as f64;
    let nodes = nodes_for(n_gpu, cfg);
    let hbm_gb = gpu.hbm_bytes / 1e9;
    let gpu_logic = n * gpu.die_area_cm2 * gpu.logic_cpa * G_PER_KG * amortized;
    let hbm = n * hbm_gb * gpu.hbm_cpa * G_PER_KG * amortized;
    let cpu = nodes * cfg.cpu_die_area_cm2 * gpu.logic_cpa * G_PER_KG * amortized;
    let dram = nodes * cfg.node_dram_gb * cfg.dram_cpa_kg_per_gb * G_PER_KG * amortized;
    let ssd = nodes * cfg.node_ssd_gb * cfg.ssd_cpa_kg_per_gb * G_PER_KG * amortized;
    (gpu_logic, hbm, cpu, dram, ssd)
}

/// Full accounting of one deployment: a fleet of `n_gpu` devices running for
/// `duration_s` at the given utilization.
pub fn training_report(
    n_gpu: u128,
    duration_s: f64,
    utilization: f64,
    gpu: &GpuSpec,
    cfg: &CarbonConfig,
    include_embodied: bool,
) -> CarbonReport {
    let op_gpu_t = operational_gpu_g(n_gpu, duration_s, utilization, gpu, cfg) / G_PER_TONNE;
    let op_other_t = operational_other_g(n_gpu, duration_s, cfg) / G_PER_TONNE;
    let (logic, hbm, cpu, dram, ssd) = if include_embodied {
        embodied_g(n_gpu, duration_s, gpu, cfg)
    } else {
        (0.0, 0.0, 0.0, 0.0, 0.0)
    };
    CarbonReport {
        op_gpu_t,
        op_other_t,
        emb_gpu_logic_t: logic / G_PER_TONNE,
        emb_hbm_t: hbm / G_PER_TONNE,
        emb_cpu_t: cpu / G_PER_TONNE,
        emb_dram_t: dram / G_PER_TONNE,
        emb_ssd_t: ssd / G_PER_TONNE,
    }
}

/// The floor against which real deployments are judged: the smallest fleet
/// that fits the deadline, running at utilization 1 with no node overhead
/// and no embodied charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealDeployment {
    pub n_gpu: u128,
    pub duration_s: f64,
}

pub fn ideal_deployment(
    compute_flops: f64,
    peak_flops: f64,
    deadline_s: f64,
) -> Result<IdealDeployment, CarbonError> {
    if !(compute_flops > 0.0) || !(peak_flops > 0.0) || !(deadline_s > 0.0) {
        return Err(CarbonError::InvalidInput(format!(
            "ideal deployment needs positive compute ({compute_flops}), peak ({peak_flops}), and deadline ({deadline_s})"
        )));
    }
    let q = (compute_flops / (peak_flops * deadline_s)).ceil();
    if !q.is_finite() || q >= 1e38 {
        return Err(CarbonError::InvalidInput(format!(
            "ideal fleet of {q:.3e} GPUs overflows"
        )));
    }
    let n_gpu = (q as u128).max(1);
    Ok(IdealDeployment {
        n_gpu,
        duration_s: compute_flops / (n_gpu as f64 * peak_flops),
    })
}

/// Operational-only carbon of the ideal deployment, grams. Because
/// n · duration = compute / peak exactly, the result does not depend on the
/// deadline — only on how many FLOPs must happen.
pub fn ideal_carbon_g(
    compute_flops: f64,
    gpu: &GpuSpec,
    cfg: &CarbonConfig,
    deadline_s: f64,
) -> Result<f64, CarbonError> {
    let ideal = ideal_deployment(compute_flops, gpu.peak_flops, deadline_s)?;
    let kwh = ideal.n_gpu as f64 * ideal.duration_s * gpu.tdp_watts / J_PER_KWH;
    Ok(cfg.pue * cfg.carbon_intensity_g_per_kwh * kwh)
}
