//! Named what-if runs over a sweep of model sizes, and the loss-versus-carbon
//! power laws fitted to them.
//!
//! A scenario is the baseline pipeline — derive workload from width, search
//! the cheapest deadline-meeting deployment, account its carbon — with a
//! small set of orthogonal toggles: project the GPU some years forward, drop
//! the embodied charge, invert the static/dynamic power split, relax the
//! batch growth exponent, shrink communication volumes or activation memory,
//! replace the searched plan with the median-latency one, or skip deployment
//! entirely and charge the compute-bound ideal.
//!
//! Points that admit no feasible plan carry their error; the rest of the
//! sweep still reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carbon::{self, CarbonConfig, CarbonError, CarbonReport};
use crate::hardware::{GpuSpec, HardwareError, ScalingRates};
use crate::perf::{ParallelismPlan, PerfConfig, Workload};
use crate::scaling::{Architecture, ScalingConfig, ScalingError};
use crate::search::{self, SearchError, SearchLimits, SearchRequest};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error(transparent)]
    Carbon(#[from] CarbonError),
}

/// Everything shared by the scenarios of one run.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub scaling: ScalingConfig,
    pub perf: PerfConfig,
    pub carbon: CarbonConfig,
    pub rates: ScalingRates,
    pub gpu: GpuSpec,
    pub seq_len: u64,
    pub deadline_s: f64,
    pub limits: SearchLimits,
}

/// One named variation of the baseline pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: String,
    /// Project the GPU this many years forward before planning.
    pub years: f64,
    /// Charge manufacturing emissions (amortized) on top of grid emissions.
    pub embodied_enabled: bool,
    /// Swap the GPU's static and dynamic power shares, modeling a part
    /// engineered to idle cheaply.
    pub static_swap: bool,
    /// Skip deployment: compute-bound fleet at utilization 1, operational
    /// GPU carbon only.
    pub ideal_mode: bool,
    /// Deploy the median-latency feasible plan instead of the fastest.
    pub median_parallelism: bool,
    /// Override the critical-batch growth exponent (e.g. 0.33 for models
    /// that tolerate aggressive batch scaling).
    pub batch_exponent: Option<f64>,
    /// Multiplier on communication volumes, composed onto the base perf
    /// config; 0.8 models leaner sharding schemes.
    pub sharding_comm_factor: f64,
    /// Multiplier on activation memory, composed likewise; 0.8 models
    /// activation eviction.
    pub eviction_mem_factor: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            label: "default".into(),
            years: 0.0,
            embodied_enabled: true,
            static_swap: false,
            ideal_mode: false,
            median_parallelism: false,
            batch_exponent: None,
            sharding_comm_factor: 1.0,
            eviction_mem_factor: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.label.is_empty() {
            return Err(ScenarioError::InvalidConfig(
                "scenario label must not be empty".into(),
            ));
        }
        if !(self.years >= 0.0) || !self.years.is_finite() {
            return Err(ScenarioError::InvalidConfig(format!(
                "years must be non-negative, got {}",
                self.years
            )));
        }
        for (name, v) in [
            ("sharding_comm_factor", self.sharding_comm_factor),
            ("eviction_mem_factor", self.eviction_mem_factor),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ScenarioError::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if let Some(b) = self.batch_exponent {
            if !(b > 0.0) || !b.is_finite() {
                return Err(ScenarioError::InvalidConfig(format!(
                    "batch_exponent must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// The deployment chosen for one sweep point, with its emissions.
#[derive(Debug, Clone)]
pub struct PointPlan {
    pub n_gpu: u128,
    pub plan: ParallelismPlan,
    pub duration_s: f64,
    pub utilization: f64,
    pub report: CarbonReport,
}

/// One model size within a scenario run.
#[derive(Debug)]
pub struct ScenarioPoint {
    pub d_model: u64,
    pub n_params: u128,
    pub n_params_active: u128,
    pub dataset_tokens: u128,
    pub compute_flops: f64,
    pub batch_tokens: u64,
    pub loss: f64,
    pub outcome: Result<PointPlan, SearchError>,
}

/// A scenario evaluated across the sweep, points in sweep order.
#[derive(Debug)]
pub struct ScenarioRun {
    pub scenario: ScenarioConfig,
    pub points: Vec<ScenarioPoint>,
}

impl ScenarioRun {
    /// (total carbon, loss) pairs of the points that found a plan.
    pub fn carbon_loss_pairs(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| {
                p.outcome
                    .as_ref()
                    .ok()
                    .map(|plan| (plan.report.total_t(), p.loss))
            })
            .collect()
    }
}

/// Evaluate one scenario over the given widths.
pub fn run_scenario(
    params: &RunParams,
    scenario: &ScenarioConfig,
    d_models: &[u64],
) -> Result<ScenarioRun, ScenarioError> {
    scenario.validate()?;
    params
        .scaling
        .validate()
        .map_err(ScenarioError::Scaling)?;
    params
        .perf
        .validate()
        .map_err(ScenarioError::InvalidConfig)?;
    params.carbon.validate()?;

    let mut gpu = params.gpu.project(&params.rates, scenario.years)?;
    if scenario.static_swap {
        gpu.static_fraction = 1.0 - gpu.static_fraction;
        gpu.validate().map_err(ScenarioError::Hardware)?;
    }

    let mut scaling = params.scaling.clone();
    if let Some(b) = scenario.batch_exponent {
        scaling.batch_exponent = b;
    }

    let mut perf = params.perf.clone();
    perf.comm_factor *= scenario.sharding_comm_factor;
    perf.eviction_factor *= scenario.eviction_mem_factor;

    let mut points = Vec::with_capacity(d_models.len());
    for &d in d_models {
        let arch = Architecture::from_d_model(d)?;
        let n_params = arch.n_params()?;
        let n_active = arch.active_params(scaling.max_active_experts)?;
        let dataset = scaling.dataset_tokens(n_active)?;
        let compute = scaling.compute_flops(n_active, dataset);
        let loss = scaling.loss(n_active as f64, dataset as f64);
        let batch = scaling.batch_tokens(compute, params.seq_len)?;

        let outcome = if scenario.ideal_mode {
            ideal_point(compute, batch, &gpu, &params.carbon, params.deadline_s)
        } else {
            let req = SearchRequest {
                workload: Workload {
                    arch: &arch,
                    gpu: &gpu,
                    perf: &perf,
                    flops_per_token: scaling.flops_per_token(n_active),
                    batch_tokens: batch,
                },
                dataset_tokens: dataset,
                deadline_s: params.deadline_s,
                limits: params.limits,
            };
            let searched = if scenario.median_parallelism {
                search::median_latency_plan(&req)
            } else {
                search::search(&req)
            };
            searched.map(|o| PointPlan {
                n_gpu: o.n_gpu,
                plan: o.plan,
                duration_s: o.duration_s,
                utilization: o.timing.utilization,
                report: carbon::training_report(
                    o.n_gpu,
                    o.duration_s,
                    o.timing.utilization,
                    &gpu,
                    &params.carbon,
                    scenario.embodied_enabled,
                ),
            })
        };
        points.push(ScenarioPoint {
            d_model: d,
            n_params,
            n_params_active: n_active,
            dataset_tokens: dataset,
            compute_flops: compute,
            batch_tokens: batch,
            loss,
            outcome,
        });
    }
    Ok(ScenarioRun {
        scenario: scenario.clone(),
        points,
    })
}

/// The compute-bound floor as a pseudo-deployment: smallest fleet that fits
/// the deadline at utilization 1, charged operational GPU carbon only.
fn ideal_point(
    compute: f64,
    batch: u64,
    gpu: &GpuSpec,
    cfg: &CarbonConfig,
    deadline_s: f64,
) -> Result<PointPlan, SearchError> {
    let ideal = carbon::ideal_deployment(compute, gpu.peak_flops, deadline_s)
        .map_err(|e| SearchError::InvalidRequest(e.to_string()))?;
    let grams = carbon::ideal_carbon_g(compute, gpu, cfg, deadline_s)
        .map_err(|e| SearchError::InvalidRequest(e.to_string()))?;
    Ok(PointPlan {
        n_gpu: ideal.n_gpu,
        plan: ParallelismPlan {
            n_tp: 1,
            n_dp: 1,
            n_pp: 1,
            n_ep: 1,
            microbatch_tokens: batch,
        },
        duration_s: ideal.duration_s,
        utilization: 1.0,
        report: CarbonReport {
            op_gpu_t: grams / 1e6,
            ..CarbonReport::default()
        },
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("power-law fit needs at least 3 points, got {n}")]
    TooFewPoints { n: usize },
    #[error("power-law fit needs positive values; pair {index} is ({x}, {y})")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("all carbon values coincide; the exponent is unidentifiable")]
    DegenerateCarbon,
}

/// loss ≈ k · carbon^(-alpha_exp), fitted by least squares in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub k: f64,
    pub alpha_exp: f64,
    pub r_squared: f64,
    /// True when every loss coincides: slope and r² are meaningless.
    pub degenerate: bool,
    pub n_points: usize,
}

/// Fit loss against total carbon across (carbon_tonnes, loss) pairs.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit, FitError> {
    if pairs.len() < 3 {
        return Err(FitError::TooFewPoints { n: pairs.len() });
    }
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(FitError::NonPositive { index: i, x, y });
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        syy += (y - y_mean) * (y - y_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(FitError::DegenerateCarbon);
    }
    if syy == 0.0 {
        return Ok(PowerLawFit {
            k: y_mean.exp(),
            alpha_exp: 0.0,
            r_squared: 0.0,
            degenerate: true,
            n_points: pairs.len(),
        });
    }
    let slope = sxy / sxx;
    Ok(PowerLawFit {
        k: (y_mean - slope * x_mean).exp(),
        alpha_exp: -slope,
        r_squared: (sxy * sxy) / (sxx * syy),
        degenerate: false,
        n_points: pairs.len(),
    })
}

/// One GPU generation's sweep within a comparison.
#[derive(Debug)]
pub struct GenerationRun {
    pub gpu: GpuSpec,
    pub run: ScenarioRun,
}

#[derive(Debug)]
pub struct GenerationComparison {
    /// The sweep width whose active parameter count is closest (in log
    /// space) to the designated size.
    pub designated_d_model: u64,
    pub runs: Vec<GenerationRun>,
}

/// Run the default scenario on each GPU over the same widths, marking the
/// width nearest `designated_active` parameters for breakdown reporting.
pub fn compare_generations(
    params: &RunParams,
    gpus: &[GpuSpec],
    d_models: &[u64],
    designated_active: f64,
) -> Result<GenerationComparison, ScenarioError> {
    if gpus.is_empty() || d_models.is_empty() {
        return Err(ScenarioError::InvalidConfig(
            "generation comparison needs at least one GPU and one width".into(),
        ));
    }
    let designated_d_model = designated_width(&params.scaling, d_models, designated_active)?;
    let mut runs = Vec::with_capacity(gpus.len());
    for gpu in gpus {
        let mut p = params.clone();
        p.gpu = gpu.clone();
        let scenario = ScenarioConfig {
            label: gpu.name.clone(),
            ..ScenarioConfig::default()
        };
        runs.push(GenerationRun {
            gpu: gpu.clone(),
            run: run_scenario(&p, &scenario, d_models)?,
        });
    }
    Ok(GenerationComparison {
        designated_d_model,
        runs,
    })
}

/// The width whose active parameter count is log-nearest the target.
pub fn designated_width(
    scaling: &ScalingConfig,
    d_models: &[u64],
    target_active: f64,
) -> Result<u64, ScenarioError> {
    let mut best: Option<(f64, u64)> = None;
    for &d in d_models {
        let arch = Architecture::from_d_model(d)?;
        let active = arch.active_params(scaling.max_active_experts)? as f64;
        let dist = (active.ln() - target_active.ln()).abs();
        if best.map_or(true, |(bd, _)| dist < bd) {
            best = Some((dist, d));
        }
    }
    Ok(best.expect("d_models checked non-empty").1)
}

/// Run the baseline on the GPU projected to each horizon (year 0 = today).
pub fn compare_futures(
    params: &RunParams,
    years: &[f64],
    d_models: &[u64],
) -> Result<Vec<(f64, ScenarioRun)>, ScenarioError> {
    let mut out = Vec::with_capacity(years.len());
    for &y in years {
        let scenario = ScenarioConfig {
            label: format!("year_{y}"),
            years: y,
            ..ScenarioConfig::default()
        };
        out.push((y, run_scenario(params, &scenario, d_models)?));
    }
    Ok(out)
}
