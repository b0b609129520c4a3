//! Analytical step-time, utilization, and memory model for one training step
//! under a (TP, DP, PP, EP) parallelism plan.
//!
//! The model is a roofline plus explicit communication terms. Per microbatch
//! and pipeline stage, compute and HBM traffic overlap (take the max); tensor-
//! parallel all-reduces and expert all-to-alls are serialized on top; the
//! pipeline multiplies the stage time by the classic (m + pp - 1) fill/drain
//! factor; and half of the data-parallel gradient all-reduce is assumed hidden
//! behind backward compute.
//!
//! Expert parallelism splits tokens as well as weights: each of the `n_ep`
//! groups routes its own share of the microbatch, so activation traffic,
//! scale-up collective volume, and activation memory all carry a 1/n_ep
//! factor, while the dense attention weights stay replicated across expert
//! ranks. Optimizer state is sharded across data-parallel ranks the way
//! mixed-precision Adam states usually are; fp16 gradients are not.
//!
//! All quantities are per GPU ("per rank") unless a name says otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hardware::GpuSpec;
use crate::scaling::Architecture;

/// Microbatch volume (tokens times width) at which kernel efficiency reaches
/// one half on a baseline part. 2^22 \u{2248} a 2048-token microbatch at width 2048.
const DEFAULT_SRAM_HALF_SAT: f64 = (1u64 << 22) as f64;

#[derive(Debug, Error, PartialEq)]
pub enum PerfError {
    #[error("plan dimensions must all be at least 1")]
    ZeroDimension,
    #[error("n_tp = {n_tp} does not divide 4 * d_model^2 = {dim}")]
    IndivisibleTensor { n_tp: u64, dim: u128 },
    #[error("n_pp = {n_pp} does not divide n_layers = {n_layers}")]
    IndivisibleLayers { n_pp: u64, n_layers: u64 },
    #[error("n_ep = {n_ep} does not divide n_experts = {n_experts}")]
    IndivisibleExperts { n_ep: u64, n_experts: u64 },
    #[error("n_dp = {n_dp} does not divide the global batch of {batch_tokens} tokens")]
    IndivisibleBatch { n_dp: u64, batch_tokens: u64 },
    #[error("microbatch of {microbatch_tokens} tokens does not divide the per-rank batch of {per_rank_tokens}")]
    IndivisibleMicrobatch {
        microbatch_tokens: u64,
        per_rank_tokens: u64,
    },
    #[error("plan needs {needed_bytes:.3e} bytes per GPU but the device has {hbm_bytes:.3e}")]
    OutOfMemory { needed_bytes: f64, hbm_bytes: f64 },
    #[error("GPU count overflows 128-bit arithmetic")]
    GpuCountOverflow,
    #[error("parameter count overflows 128-bit arithmetic")]
    ParamOverflow,
}

/// Knobs of the performance model, distinct from the hardware itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfConfig {
    /// Token-width product at which kernel efficiency is 50% (divided by the
    /// GPU's `sram_capacity_scale`). Zero or negative disables the penalty.
    pub sram_half_sat: f64,
    /// Multiplier on every communication volume; below 1.0 models more
    /// bandwidth-frugal sharding schemes.
    pub comm_factor: f64,
    /// Fraction of the data-parallel gradient all-reduce hidden behind
    /// backward compute.
    pub dp_overlap: f64,
    /// Multiplier on activation memory; below 1.0 models activation eviction.
    pub eviction_factor: f64,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            sram_half_sat: DEFAULT_SRAM_HALF_SAT,
            comm_factor: 1.0,
            dp_overlap: 0.5,
            eviction_factor: 1.0,
        }
    }
}

impl PerfConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !self.sram_half_sat.is_finite() {
            return Err(format!("sram_half_sat must be finite, got {}", self.sram_half_sat));
        }
        if !(self.comm_factor.is_finite() && self.comm_factor > 0.0 && self.comm_factor <= 1.0) {
            return Err(format!(
                "comm_factor must lie in (0, 1], got {}",
                self.comm_factor
            ));
        }
        if !(self.dp_overlap.is_finite() && (0.0..=1.0).contains(&self.dp_overlap)) {
            return Err(format!("dp_overlap must lie in [0, 1], got {}", self.dp_overlap));
        }
        if !(self.eviction_factor.is_finite()
            && self.eviction_factor > 0.0
            && self.eviction_factor <= 1.0)
        {
            return Err(format!(
                "eviction_factor must lie in (0, 1], got {}",
                self.eviction_factor
            ));
        }
        Ok(())
    }
}

/// One candidate parallelism decomposition plus its microbatch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelismPlan {
    pub n_tp: u64,
    pub n_dp: u64,
    pub n_pp: u64,
    pub n_ep: u64,
    pub microbatch_tokens: u64,
}

impl ParallelismPlan {
    pub fn n_gpu(&self) -> Result<u128, PerfError> {
        (self.n_tp as u128)
            .checked_mul(self.n_dp as u128)
            .and_then(|x| x.checked_mul(self.n_pp as u128))
            .and_then(|x| x.checked_mul(self.n_ep as u128))
            .ok_or(PerfError::GpuCountOverflow)
    }
}

/// Everything the model needs to know about the workload being planned.
#[derive(Debug, Clone, Copy)]
pub struct Workload<'a> {
    pub arch: &'a Architecture,
    pub gpu: &'a GpuSpec,
    pub perf: &'a PerfConfig,
    /// Training FLOPs per token (forward + backward over active parameters).
    pub flops_per_token: f64,
    /// Global batch per optimizer step, tokens.
    pub batch_tokens: u64,
}

/// Per-GPU memory demand of a plan, bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryFootprint {
    /// fp16 weights, sharded over TP and PP (experts also over EP).
    pub weights_bytes: f64,
    /// fp16 gradients plus DP-sharded Adam states.
    pub optimizer_bytes: f64,
    /// Checkpointed activations for all in-flight microbatches.
    pub activation_bytes: f64,
}

impl MemoryFootprint {
    pub fn total_bytes(&self) -> f64 {
        self.weights_bytes + self.optimizer_bytes + self.activation_bytes
    }
}

/// Timing of one optimizer step under a plan, with its component breakdown.
///
/// The components report time attributable to each resource summed over
/// microbatches; they do not add up to `total_s` because compute and HBM
/// overlap inside a stage and the pipeline bubble stretches whatever the
/// per-stage critical path is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanTiming {
    pub total_s: f64,
    pub compute_s: f64,
    pub hbm_s: f64,
    pub tp_comm_s: f64,
    pub ep_comm_s: f64,
    pub dp_comm_s: f64,
    pub pipeline_bubble_s: f64,
    pub microbatches: u64,
    pub n_gpu: u128,
    pub utilization: f64,
    pub memory: MemoryFootprint,
}

/// Ring all-reduce wall time for `volume` bytes across `n` ranks.
pub fn allreduce_time(volume_bytes: f64, bandwidth: f64, n: u64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    2.0 * volume_bytes * (n - 1) as f64 / (n as f64 * bandwidth)
}

/// All-to-all wall time for `volume` bytes across `n` ranks.
pub fn alltoall_time(volume_bytes: f64, bandwidth: f64, n: u64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    volume_bytes * (n - 1) as f64 / (n as f64 * bandwidth)
}

/// Saturating kernel efficiency in (0, 1]: small matmuls waste the device.
pub fn gemm_efficiency(tokens: f64, d_model: f64, sram_scale: f64, half_sat: f64) -> f64 {
    if half_sat <= 0.0 {
        return 1.0;
    }
    let x = tokens * d_model;
    x / (x + half_sat / sram_scale)
}

/// Parameters held by one GPU: dense attention sharded over TP and PP,
/// expert weights additionally over EP.
pub fn params_per_rank(arch: &Architecture, plan: &ParallelismPlan) -> Result<f64, PerfError> {
    let attn = arch.attention_params().map_err(|_| PerfError::ParamOverflow)? as f64;
    let total = arch.n_params().map_err(|_| PerfError::ParamOverflow)? as f64;
    let model_shard = (plan.n_tp as f64) * (plan.n_pp as f64);
    Ok(attn / model_shard + (total - attn) / (model_shard * plan.n_ep as f64))
}

/// Bytes of activation memory per token of microbatch, for the memory bound.
pub fn activation_bytes_per_token(
    arch: &Architecture,
    perf: &PerfConfig,
    n_pp: u64,
    n_ep: u64,
) -> f64 {
    let layers_per_stage = (arch.n_layers / n_pp) as f64;
    // 2 bytes, twice (checkpoint + working set), times pp in-flight microbatches,
    // spread over the ep token split.
    4.0 * arch.d_model as f64 * layers_per_stage * n_pp as f64 * perf.eviction_factor
        / n_ep as f64
}

pub fn memory_footprint(w: &Workload, plan: &ParallelismPlan) -> Result<MemoryFootprint, PerfError> {
    let p_rank = params_per_rank(w.arch, plan)?;
    let weights_bytes = 2.0 * p_rank;
    // fp16 gradients stay resident; Adam moments + master weights shard over DP.
    let optimizer_bytes = (2.0 + 12.0 / plan.n_dp as f64) * p_rank;
    let activation_bytes = activation_bytes_per_token(w.arch, w.perf, plan.n_pp, plan.n_ep)
        * plan.microbatch_tokens as f64;
    Ok(MemoryFootprint {
        weights_bytes,
        optimizer_bytes,
        activation_bytes,
    })
}

fn check_divisibility(w: &Workload, plan: &ParallelismPlan) -> Result<(), PerfError> {
    if plan.n_tp == 0
        || plan.n_dp == 0
        || plan.n_pp == 0
        || plan.n_ep == 0
        || plan.microbatch_tokens == 0
    {
        return Err(PerfError::ZeroDimension);
    }
    let d = w.arch.d_model as u128;
    let shardable = 4 * d * d;
    if shardable % plan.n_tp as u128 != 0 {
        return Err(PerfError::IndivisibleTensor {
            n_tp: plan.n_tp,
            dim: shardable,
        });
    }
    if w.arch.n_layers % plan.n_pp != 0 {
        return Err(PerfError::IndivisibleLayers {
            n_pp: plan.n_pp,
            n_layers: w.arch.n_layers,
        });
    }
    if w.arch.n_experts % plan.n_ep != 0 {
        return Err(PerfError::IndivisibleExperts {
            n_ep: plan.n_ep,
            n_experts: w.arch.n_experts,
        });
    }
    if w.batch_tokens % plan.n_dp != 0 {
        return Err(PerfError::IndivisibleBatch {
            n_dp: plan.n_dp,
            batch_tokens: w.batch_tokens,
        });
    }
    let per_rank = w.batch_tokens / plan.n_dp;
    if per_rank % plan.microbatch_tokens != 0 {
        return Err(PerfError::IndivisibleMicrobatch {
            microbatch_tokens: plan.microbatch_tokens,
            per_rank_tokens: per_rank,
        });
    }
    // Note: m < n_pp (an under-filled pipeline) is timeable — the bubble just
    // dominates — so it is legal here; the plan search simply never picks it.
    Ok(())
}

/// Time one optimizer step of the workload under `plan` and check that it
/// fits device memory.
pub fn evaluate_plan(w: &Workload, plan: &ParallelismPlan) -> Result<PlanTiming, PerfError> {
    check_divisibility(w, plan)?;
    let n_gpu = plan.n_gpu()?;
    let memory = memory_footprint(w, plan)?;
    if memory.total_bytes() > w.gpu.hbm_bytes {
        return Err(PerfError::OutOfMemory {
            needed_bytes: memory.total_bytes(),
            hbm_bytes: w.gpu.hbm_bytes,
        });
    }

    let gpu = w.gpu;
    let cf = w.perf.comm_factor;
    let d = w.arch.d_model as f64;
    let mu = plan.microbatch_tokens as f64;
    let per_rank_tokens = w.batch_tokens / plan.n_dp;
    let m = per_rank_tokens / plan.microbatch_tokens;
    let layers_per_stage = (w.arch.n_layers / plan.n_pp) as f64;
    let model_shard = (plan.n_tp * plan.n_pp * plan.n_ep) as f64;
    let p_rank = params_per_rank(w.arch, plan)?;
    // Tokens each expert-parallel group actually processes per microbatch.
    let mu_ep = mu / plan.n_ep as f64;

    let eff = gemm_efficiency(mu, d, gpu.sram_capacity_scale, w.perf.sram_half_sat);
    let flops_mb = w.flops_per_token * mu / model_shard;
    let compute_mb = flops_mb / (gpu.peak_flops * eff);

    // Weights are read and written once per microbatch (2 bytes each way);
    // checkpointed activations cross HBM four times at 2 bytes + recompute.
    let hbm_mb = (4.0 * p_rank + 16.0 * mu_ep * d * layers_per_stage) / gpu.hbm_bw;

    // Two all-reduces forward + two backward per layer, fp16 activations.
    let tp_mb = 4.0
        * layers_per_stage
        * allreduce_time(cf * 4.0 * mu_ep * d, gpu.nvlink_bw, plan.n_tp);

    // Dispatch + combine per layer; the routed slice is TP-sharded.
    let ep_mb = 2.0
        * layers_per_stage
        * alltoall_time(
            cf * 2.0 * mu_ep * d / plan.n_tp as f64,
            gpu.internode_bw,
            plan.n_ep,
        );

    let dp_residual = (1.0 - w.perf.dp_overlap)
        * allreduce_time(cf * 2.0 * p_rank, gpu.internode_bw, plan.n_dp);

    // Compute and HBM overlap (roofline); collectives do not.
    let stage_mb = compute_mb.max(hbm_mb) + tp_mb;
    let fill_drain = (m + plan.n_pp - 1) as f64;
    let total_s = fill_drain * (stage_mb + ep_mb) + dp_residual;
    let pipeline_bubble_s = (plan.n_pp - 1) as f64 * (stage_mb + ep_mb);

    // Useful work per step over what the fleet could have done.
    let useful_flops = w.flops_per_token * w.batch_tokens as f64;
    let utilization =
        (useful_flops / (n_gpu as f64 * gpu.peak_flops * total_s)).min(1.0);

    Ok(PlanTiming {
        total_s,
        compute_s: m as f64 * compute_mb,
        hbm_s: m as f64 * hbm_mb,
        tp_comm_s: m as f64 * tp_mb,
        ep_comm_s: m as f64 * ep_mb,
        dp_comm_s: dp_residual,
        pipeline_bubble_s,
        microbatches: m,
        n_gpu,
        utilization,
        memory,
    })
}
