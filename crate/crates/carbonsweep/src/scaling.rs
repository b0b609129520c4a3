//! Scaling-law relations for mixture-of-experts transformer training runs.
//!
//! Everything downstream (parallelism search, carbon accounting) starts from a
//! single knob: the model width `d_model`. This module derives the rest of the
//! architecture from that width, counts parameters exactly, and applies
//! compute-optimal scaling rules to get dataset size, training FLOPs, expected
//! loss, and the critical batch size past which data parallelism stops paying.
//!
//! Parameter and token counts use `u128` with checked arithmetic. The sweeps
//! this tool runs reach 10^15 active parameters, and a silent wraparound in a
//! parameter count would quietly poison every downstream number, so overflow
//! is an error, never a wrap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Depth grows sublinearly with width: layers = round(0.402 * d_model^0.75).
const LAYER_COEFF: f64 = 0.402;
const LAYER_WIDTH_EXP: f64 = 0.75;

/// Expert count scales linearly with width, anchored at 8 experts for width 12288.
const EXPERTS_AT_REF: f64 = 8.0;
const EXPERT_WIDTH_REF: f64 = 12288.0;

/// Feed-forward hidden size relative to d_model.
const FFN_MULT: u64 = 4;

/// Real configurations keep d_model a multiple of this (tile-friendly widths).
pub const D_MODEL_STEP: u64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("d_model must be a positive multiple of {D_MODEL_STEP}, got {0}")]
    InvalidDModel(u64),
    #[error("sequence length must be positive")]
    InvalidSeqLen,
    #[error("{0} overflows 128-bit arithmetic")]
    Overflow(&'static str),
    #[error("invalid scaling configuration: {0}")]
    InvalidConfig(String),
    #[error("sweep over [{min:e}, {max:e}] active parameters with {points} points: need a positive ordered range and at least one point")]
    InvalidSweepRange { min: f64, max: f64, points: usize },
}

/// Tunable constants of the scaling model.
///
/// The defaults are the compute-optimal fits the rest of the tool is anchored
/// to: loss as a sum of power laws in active parameters and data, twenty
/// tokens of data per active parameter, six FLOPs per active parameter per
/// token, and a critical batch that grows as a small power of total compute.
/// Every field can be overridden from a config file for sensitivity studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// Coefficient of the parameter term in the loss law.
    pub loss_coeff_params: f64,
    /// Exponent of active parameters in the loss law.
    pub loss_exp_params: f64,
    /// Coefficient of the data term in the loss law.
    pub loss_coeff_data: f64,
    /// Exponent of dataset tokens in the loss law.
    pub loss_exp_data: f64,
    /// Irreducible loss both power-law terms asymptote to.
    pub loss_floor: f64,
    /// Compute-optimal dataset tokens per active parameter.
    pub tokens_per_param: f64,
    /// Training FLOPs per active parameter per token (forward + backward).
    pub flops_multiplier: f64,
    /// Exponent of critical-batch growth with total training compute.
    pub batch_exponent: f64,
    /// Critical batch in tokens at the reference compute budget.
    pub batch_ref_tokens: f64,
    /// Reference compute budget anchoring the batch law, in FLOPs.
    pub compute_ref_flops: f64,
    /// Experts routed per token; caps the active-parameter count per layer.
    pub max_active_experts: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            loss_coeff_params: 406.4,
            loss_exp_params: 0.34,
            loss_coeff_data: 410.7,
            loss_exp_data: 0.28,
            loss_floor: 1.69,
            tokens_per_param: 20.0,
            flops_multiplier: 6.0,
            batch_exponent: 1.0 / 6.0,
            batch_ref_tokens: 1.6e7,
            compute_ref_flops: 5.88e23,
            max_active_experts: 2,
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<(), ScalingError> {
        let positive = [
            ("loss_coeff_params", self.loss_coeff_params),
            ("loss_exp_params", self.loss_exp_params),
            ("loss_coeff_data", self.loss_coeff_data),
            ("loss_exp_data", self.loss_exp_data),
            ("tokens_per_param", self.tokens_per_param),
            ("flops_multiplier", self.flops_multiplier),
            ("batch_exponent", self.batch_exponent),
            ("batch_ref_tokens", self.batch_ref_tokens),
            ("compute_ref_flops", self.compute_ref_flops),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScalingError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.loss_floor.is_finite() && self.loss_floor >= 0.0) {
            return Err(ScalingError::InvalidConfig(format!(
                "loss_floor must be nonnegative and finite, got {}",
                self.loss_floor
            )));
        }
        if self.max_active_experts == 0 {
            return Err(ScalingError::InvalidConfig(
                "max_active_experts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Expected training loss for `n_active` parameters trained on `dataset_tokens` tokens.
    pub fn loss(&self, n_active: f64, dataset_tokens: f64) -> f64 {
        self.loss_coeff_params * n_active.powf(-self.loss_exp_params)
            + self.loss_coeff_data * dataset_tokens.powf(-self.loss_exp_data)
            + self.loss_floor
    }

    /// Compute-optimal dataset size in tokens.
    ///
    /// Exact (integer) whenever `tokens_per_param` is integral, which it is by
    /// default; fractional multipliers round to the nearest token.
    pub fn dataset_tokens(&self, n_active: u128) -> Result<u128, ScalingError> {
        let tpp = self.tokens_per_param;
        if !(tpp.is_finite() && tpp > 0.0) {
            return Err(ScalingError::InvalidConfig(format!(
                "tokens_per_param must be positive and finite, got {tpp}"
            )));
        }
        if tpp.fract() == 0.0 && tpp <= u64::MAX as f64 {
            n_active
                .checked_mul(tpp as u128)
                .ok_or(ScalingError::Overflow("dataset size"))
        } else {
            let tokens = (n_active as f64 * tpp).round();
            if tokens.is_finite() && tokens < u128::MAX as f64 {
                Ok(tokens as u128)
            } else {
                Err(ScalingError::Overflow("dataset size"))
            }
        }
    }

    /// Total training FLOPs for `n_active` parameters over `dataset_tokens` tokens.
    pub fn compute_flops(&self, n_active: u128, dataset_tokens: u128) -> f64 {
        self.flops_multiplier * n_active as f64 * dataset_tokens as f64
    }

    /// Training FLOPs consumed per token, i.e. total compute over dataset size.
    pub fn flops_per_token(&self, n_active: u128) -> f64 {
        self.flops_multiplier * n_active as f64
    }

    /// Critical batch size in tokens at a given compute budget, rounded to a
    /// whole number of sequences (half away from zero, never below one).
    pub fn batch_tokens(&self, compute_flops: f64, seq_len: u64) -> Result<u64, ScalingError> {
        if seq_len == 0 {
            return Err(ScalingError::InvalidSeqLen);
        }
        if !(compute_flops.is_finite() && compute_flops > 0.0) {
            return Err(ScalingError::InvalidConfig(format!(
                "compute budget must be positive and finite, got {compute_flops}"
            )));
        }
        let raw =
            self.batch_ref_tokens * (compute_flops / self.compute_ref_flops).powf(self.batch_exponent);
        let seqs = (raw / seq_len as f64).round();
        if !seqs.is_finite() || seqs >= u64::MAX as f64 {
            return Err(ScalingError::Overflow("batch size"));
        }
        (seqs as u64)
            .max(1)
            .checked_mul(seq_len)
            .ok_or(ScalingError::Overflow("batch size"))
    }

    /// Widths whose active-parameter counts span `[min_active, max_active]`.
    ///
    /// Targets are spaced evenly in log(active params); each target maps to
    /// the smallest valid width that reaches it. The result is sorted and
    /// deduplicated, so it may hold fewer than `points` entries.
    pub fn d_models_spanning_active_params(
        &self,
        min_active: f64,
        max_active: f64,
        points: usize,
    ) -> Result<Vec<u64>, ScalingError> {
        if points == 0
            || !min_active.is_finite()
            || !max_active.is_finite()
            || min_active <= 0.0
            || max_active < min_active
        {
            return Err(ScalingError::InvalidSweepRange {
                min: min_active,
                max: max_active,
                points,
            });
        }
        let mut widths = Vec::with_capacity(points);
        for i in 0..points {
            let target = if points == 1 {
                min_active
            } else {
                min_active * (max_active / min_active).powf(i as f64 / (points - 1) as f64)
            };
            let d = self.smallest_d_model_reaching(target)?;
            if widths.last() != Some(&d) {
                widths.push(d);
            }
        }
        Ok(widths)
    }

    /// Smallest multiple of [`D_MODEL_STEP`] whose active parameters reach `target`.
    fn smallest_d_model_reaching(&self, target_active: f64) -> Result<u64, ScalingError> {
        let reaches = |steps: u64| -> Result<bool, ScalingError> {
            let d = steps
                .checked_mul(D_MODEL_STEP)
                .ok_or(ScalingError::Overflow("width search"))?;
            let arch = Architecture::from_d_model(d)?;
            Ok(arch.active_params(self.max_active_experts)? as f64 >= target_active)
        };
        let mut hi = 1u64;
        while !reaches(hi)? {
            hi = hi
                .checked_mul(2)
                .ok_or(ScalingError::Overflow("width search"))?;
        }
        // Invariant: reaches(hi), !reaches(lo) (lo = 0 stands in for "below range").
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi * D_MODEL_STEP)
    }
}

/// Shape of a mixture-of-experts transformer.
///
/// Normally derived from the width alone via [`Architecture::from_d_model`].
/// The fields stay public so tests and calibration runs can build synthetic
/// shapes that the derivation would never produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub d_model: u64,
    pub d_ff: u64,
    pub n_layers: u64,
    pub n_experts: u64,
}

impl Architecture {
    pub fn from_d_model(d_model: u64) -> Result<Self, ScalingError> {
        if d_model == 0 || d_model % D_MODEL_STEP != 0 {
            return Err(ScalingError::InvalidDModel(d_model));
        }
        let d = d_model as f64;
        let n_layers = ((LAYER_COEFF * d.powf(LAYER_WIDTH_EXP)).round() as u64).max(1);
        let n_experts = ((EXPERTS_AT_REF * d / EXPERT_WIDTH_REF).round() as u64).max(1);
        let d_ff = d_model
            .checked_mul(FFN_MULT)
            .ok_or(ScalingError::Overflow("d_ff"))?;
        Ok(Self {
            d_model,
            d_ff,
            n_layers,
            n_experts,
        })
    }

    /// Parameters of one block with `experts` experts instantiated: four
    /// attention projections plus two expert matrices per expert.
    fn block_params(&self, experts: u64) -> Result<u128, ScalingError> {
        const OVERFLOW: ScalingError = ScalingError::Overflow("parameter count");
        let d = self.d_model as u128;
        let attn = d.checked_mul(d).and_then(|dd| dd.checked_mul(4)).ok_or(OVERFLOW)?;
        let expert = d
            .checked_mul(self.d_ff as u128)
            .and_then(|x| x.checked_mul(2))
            .and_then(|x| x.checked_mul(experts as u128))
            .ok_or(OVERFLOW)?;
        attn.checked_add(expert).ok_or(OVERFLOW)
    }

    /// Total parameters across all layers and all experts.
    pub fn n_params(&self) -> Result<u128, ScalingError> {
        self.block_params(self.n_experts)?
            .checked_mul(self.n_layers as u128)
            .ok_or(ScalingError::Overflow("parameter count"))
    }

    /// Parameters touched per token: attention plus the routed experts only.
    pub fn active_params(&self, max_active_experts: u64) -> Result<u128, ScalingError> {
        self.block_params(self.n_experts.min(max_active_experts))?
            .checked_mul(self.n_layers as u128)
            .ok_or(ScalingError::Overflow("parameter count"))
    }

    /// Attention-projection parameters across all layers (the dense part of
    /// the model that every token passes through regardless of routing).
    pub fn attention_params(&self) -> Result<u128, ScalingError> {
        let d = self.d_model as u128;
        d.checked_mul(d)
            .and_then(|dd| dd.checked_mul(4))
            .and_then(|a| a.checked_mul(self.n_layers as u128))
            .ok_or(ScalingError::Overflow("parameter count"))
    }
}
