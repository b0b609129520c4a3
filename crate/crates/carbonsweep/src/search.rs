//! Find the smallest GPU fleet — and the parallelism plan on it — that trains
//! a workload inside a deadline.
//!
//! The search space is structured by divisibility: tensor parallelism must
//! divide the 4·d_model² shardable dimension, pipeline stages the layer count,
//! data parallelism the global batch, and the microbatch the per-rank batch.
//! Expert parallelism is pinned to the expert count, so every fleet is a
//! multiple of it. Rather than stepping fleet sizes one by one, we enumerate
//! every (TP, DP, PP) divisor combination whose implied fleet lands between
//! the compute-bound lower limit and the cap, time each admissible microbatch,
//! and keep the global best under the order
//! (fleet size, duration, TP, PP, DP, larger microbatch).
//!
//! That order makes the reduction a total order, so results are bit-identical
//! no matter how many worker threads rayon uses.
//!
//! The compute lower limit is sound: utilization never exceeds 1, so a step
//! takes at least per-rank-FLOPs/peak seconds and a fleet smaller than
//! ceil(FLOPs / (deadline · peak)) cannot finish in time under any plan.

use rayon::prelude::*;
use thiserror::Error;

use crate::perf::{self, ParallelismPlan, PerfError, PlanTiming, Workload};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no plan meets the deadline with at most {n_gpu_cap} GPUs")]
    NoFeasiblePlan { n_gpu_cap: u128 },
    #[error("search space holds {candidates} candidate plans, over the cap of {cap}; tighten the fleet cap or raise max_candidates")]
    CandidateOverflow { candidates: u128, cap: u64 },
    #[error("invalid search request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Perf(#[from] PerfError),
}

/// Bounds on how much of the plan space a search may touch.
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    /// Largest fleet considered; `None` means 2^50 GPUs per expert group.
    pub max_gpus: Option<u128>,
    /// Upper bound on (triple, microbatch) evaluations, counted exactly
    /// before any evaluation runs.
    pub max_candidates: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_gpus: None,
            max_candidates: 100_000_000,
        }
    }
}

/// A workload plus the training volume and deadline it must meet.
#[derive(Debug, Clone, Copy)]
pub struct SearchRequest<'a> {
    pub workload: Workload<'a>,
    pub dataset_tokens: u128,
    pub deadline_s: f64,
    pub limits: SearchLimits,
}

/// The winning plan with its fleet, step timing, and end-to-end duration.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: ParallelismPlan,
    pub n_gpu: u128,
    pub timing: PlanTiming,
    /// Optimizer steps to cover the dataset (fractional at small scale).
    pub steps: f64,
    pub duration_s: f64,
}

/// Compute-bound fleet sizes: the raw ceiling and its round-up to a whole
/// number of expert groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdealGpuCount {
    pub raw: u128,
    pub expert_rounded: u128,
}

/// Smallest fleet that could finish `compute_flops` in `deadline_s` at full
/// utilization, before and after rounding up to a multiple of `n_experts`.
pub fn ideal_gpu_count(
    compute_flops: f64,
    peak_flops: f64,
    deadline_s: f64,
    n_experts: u64,
) -> Result<IdealGpuCount, SearchError> {
    if !(compute_flops > 0.0) || !(peak_flops > 0.0) || !(deadline_s > 0.0) || n_experts == 0 {
        return Err(SearchError::InvalidRequest(format!(
            "ideal_gpu_count needs positive compute ({compute_flops}), peak ({peak_flops}), deadline ({deadline_s}), and experts ({n_experts})"
        )));
    }
    let q = (compute_flops / (peak_flops * deadline_s)).ceil();
    if !q.is_finite() || q >= 1e38 {
        return Err(SearchError::InvalidRequest(format!(
            "ideal fleet of {q:.3e} GPUs overflows"
        )));
    }
    let raw = (q as u128).max(1);
    let expert_rounded = raw
        .div_ceil(n_experts as u128)
        .checked_mul(n_experts as u128)
        .ok_or_else(|| SearchError::InvalidRequest("expert rounding overflows".into()))?;
    Ok(IdealGpuCount {
        raw,
        expert_rounded,
    })
}

/// One way to write q as an ordered product n_tp * n_dp * n_pp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub n_tp: u64,
    pub n_dp: u64,
    pub n_pp: u64,
}

/// All ordered factorizations of `q` into three parts, sorted by
/// (n_tp, n_pp, n_dp). q = 1 gives one triple; a prime gives three.
pub fn factorize_triples(q: u64) -> Vec<Triple> {
    assert!(q >= 1, "cannot factorize zero");
    let mut out = Vec::new();
    for &tp in &divisors(q) {
        let rest = q / tp;
        for &pp in &divisors(rest) {
            out.push(Triple {
                n_tp: tp,
                n_dp: rest / pp,
                n_pp: pp,
            });
        }
    }
    out.sort_by_key(|t| (t.n_tp, t.n_pp, t.n_dp));
    out
}

/// Sorted divisors of n.
pub fn divisors(n: u64) -> Vec<u64> {
    assert!(n >= 1, "zero has no divisors");
    let mut out = Vec::new();
    let mut i = 1u64;
    while i.saturating_mul(i) <= n {
        if n % i == 0 {
            out.push(i);
            if i != n / i {
                out.push(n / i);
            }
        }
        i += 1;
    }
    out.sort_unstable();
    out
}

/// Sorted divisors of 4·d² that fit in u64 (the tensor-parallel candidates).
fn shardable_divisors(d_model: u64) -> Vec<u64> {
    // Factor d, then double every exponent and add two twos for 4·d².
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut rest = d_model;
    let mut p = 2u64;
    while p.saturating_mul(p) <= rest {
        if rest % p == 0 {
            let mut e = 0;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        factors.push((rest, 1));
    }
    for f in &mut factors {
        f.1 *= 2;
    }
    match factors.iter_mut().find(|f| f.0 == 2) {
        Some(f) => f.1 += 2,
        None => factors.insert(0, (2, 2)),
    }
    let mut out: Vec<u64> = vec![1];
    for &(p, e) in &factors {
        let prior = out.clone();
        let mut power = 1u128;
        for _ in 0..e {
            power *= p as u128;
            for &v in &prior {
                let cand = v as u128 * power;
                if cand <= u64::MAX as u128 {
                    out.push(cand as u64);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Why a candidate (or a whole triple) was rejected, for diagnostics.
pub const REASON_MEMORY: &str = "insufficient_memory";
pub const REASON_NO_MICROBATCH: &str = "no_valid_microbatch";
pub const REASON_DEADLINE: &str = "deadline_exceeded";

/// One enumerated (triple, microbatch) evaluation, for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub n_gpu: u128,
    pub n_tp: u64,
    pub n_dp: u64,
    pub n_pp: u64,
    pub n_ep: u64,
    pub microbatch_tokens: Option<u64>,
    pub duration_s: Option<f64>,
    pub feasible: bool,
    pub reject_reason: &'static str,
}

/// A triple whose fleet size is in range, with the admissible microbatch
/// divisors identified by an index range into the per-dp divisor list.
struct TripleItem {
    n_tp: u64,
    n_dp: u64,
    n_pp: u64,
    n_gpu: u128,
    dp_idx: usize,
    /// Microbatch candidates are mu_lists[dp_idx][..mu_hi]; zero means the
    /// triple was rejected before timing, for `reject` below.
    mu_hi: usize,
    reject: Option<&'static str>,
}

struct Enumeration {
    /// Divisors of the per-rank batch for each data-parallel degree.
    mu_lists: Vec<Vec<u64>>,
    items: Vec<TripleItem>,
    min_gpus: u128,
    cap: u128,
}

fn enumerate(req: &SearchRequest) -> Result<Enumeration, SearchError> {
    let w = &req.workload;
    let arch = w.arch;
    if req.dataset_tokens == 0 || w.batch_tokens == 0 {
        return Err(SearchError::InvalidRequest(
            "dataset and batch must be positive".into(),
        ));
    }
    if !(req.deadline_s > 0.0) || !(w.flops_per_token > 0.0) {
        return Err(SearchError::InvalidRequest(
            "deadline and FLOPs per token must be positive".into(),
        ));
    }
    let n_ep = arch.n_experts;
    let compute_flops = w.flops_per_token * req.dataset_tokens as f64;
    let ideal = ideal_gpu_count(compute_flops, w.gpu.peak_flops, req.deadline_s, n_ep)?;
    let min_gpus = ideal.raw;
    let cap = req
        .limits
        .max_gpus
        .unwrap_or((1u128 << 50) * n_ep as u128);

    let batch_divisors = divisors(w.batch_tokens);
    let layer_divisors = divisors(arch.n_layers);
    let tensor_divisors = shardable_divisors(arch.d_model);

    let mut mu_lists: Vec<Vec<u64>> = Vec::with_capacity(batch_divisors.len());
    let mut items = Vec::new();
    let mut candidates: u128 = 0;

    for (dp_idx, &dp) in batch_divisors.iter().enumerate() {
        let per_rank = w.batch_tokens / dp;
        mu_lists.push(
            batch_divisors
                .iter()
                .copied()
                .filter(|&mu| mu <= per_rank && per_rank % mu == 0)
                .collect(),
        );
        let floor_dp = (n_ep as u128) * (dp as u128);
        if floor_dp > cap {
            continue;
        }
        for &pp in &layer_divisors {
            let Some(floor_pp) = floor_dp.checked_mul(pp as u128) else {
                continue;
            };
            if floor_pp > cap {
                continue;
            }
            // Largest microbatch that still fills every pipeline stage.
            let fill_limit = per_rank / pp;
            for &tp in &tensor_divisors {
                let Some(n_gpu) = floor_pp.checked_mul(tp as u128) else {
                    continue;
                };
                if n_gpu > cap {
                    break; // tensor divisors ascend
                }
                if n_gpu < min_gpus {
                    continue;
                }
                let plan_probe = ParallelismPlan {
                    n_tp: tp,
                    n_dp: dp,
                    n_pp: pp,
                    n_ep,
                    microbatch_tokens: 1,
                };
                let p_rank = perf::params_per_rank(arch, &plan_probe)?;
                let static_bytes = (4.0 + 12.0 / dp as f64) * p_rank;
                let headroom = w.gpu.hbm_bytes - static_bytes;
                let apt = perf::activation_bytes_per_token(arch, w.perf, pp, n_ep);
                let mem_limit = if headroom <= 0.0 {
                    0
                } else {
                    (headroom / apt).floor().min(u64::MAX as f64) as u64
                };
                let (mu_hi, reject) = if mem_limit == 0 {
                    (0, Some(REASON_MEMORY))
                } else if fill_limit == 0 {
                    (0, Some(REASON_NO_MICROBATCH))
                } else {
                    let limit = fill_limit.min(mem_limit);
                    let hi = mu_lists[dp_idx].partition_point(|&mu| mu <= limit);
                    if hi == 0 {
                        // Divisor 1 always qualifies unless memory blocks it.
                        (0, Some(REASON_MEMORY))
                    } else {
                        (hi, None)
                    }
                };
                candidates += mu_hi as u128;
                items.push(TripleItem {
                    n_tp: tp,
                    n_dp: dp,
                    n_pp: pp,
                    n_gpu,
                    dp_idx,
                    mu_hi,
                    reject,
                });
            }
        }
    }

    if candidates > req.limits.max_candidates as u128 {
        return Err(SearchError::CandidateOverflow {
            candidates,
            cap: req.limits.max_candidates,
        });
    }
    Ok(Enumeration {
        mu_lists,
        items,
        min_gpus,
        cap,
    })
}

/// Time every admissible microbatch of one triple and keep the fastest
/// (largest microbatch on ties). Returns `None` when nothing is timeable.
fn best_of_triple(
    req: &SearchRequest,
    item: &TripleItem,
    mu_list: &[u64],
) -> Option<(ParallelismPlan, PlanTiming)> {
    let mut best: Option<(ParallelismPlan, PlanTiming)> = None;
    for &mu in &mu_list[..item.mu_hi] {
        let plan = ParallelismPlan {
            n_tp: item.n_tp,
            n_dp: item.n_dp,
            n_pp: item.n_pp,
            n_ep: req.workload.arch.n_experts,
            microbatch_tokens: mu,
        };
        match perf::evaluate_plan(&req.workload, &plan) {
            Ok(t) => {
                let replace = match &best {
                    None => true,
                    // Ties go to the larger microbatch (fewer, fatter kernels).
                    Some((bp, bt)) => {
                        t.total_s < bt.total_s
                            || (t.total_s == bt.total_s && mu > bp.microbatch_tokens)
                    }
                };
                if replace {
                    best = Some((plan, t));
                }
            }
            // Float rounding at the memory boundary: trust the evaluator.
            Err(PerfError::OutOfMemory { .. }) => continue,
            Err(e) => panic!("enumeration produced an invalid plan {plan:?}: {e}"),
        }
    }
    best
}

fn outcome(req: &SearchRequest, plan: ParallelismPlan, timing: PlanTiming) -> PlanOutcome {
    let steps = req.dataset_tokens as f64 / req.workload.batch_tokens as f64;
    let duration_s = steps * timing.total_s;
    PlanOutcome {
        plan,
        n_gpu: timing.n_gpu,
        timing,
        steps,
        duration_s,
    }
}

/// Total order for winners: fewest GPUs, then fastest, then the conventional
/// (TP, PP, DP) preference. Total, so parallel reduction is deterministic.
fn outcome_key(o: &PlanOutcome) -> (u128, f64, u64, u64, u64) {
    (o.n_gpu, o.duration_s, o.plan.n_tp, o.plan.n_pp, o.plan.n_dp)
}

fn min_outcome(a: PlanOutcome, b: PlanOutcome) -> PlanOutcome {
    let (ka, kb) = (outcome_key(&a), outcome_key(&b));
    let ord = ka
        .0
        .cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.cmp(&kb.2))
        .then(ka.3.cmp(&kb.3))
        .then(ka.4.cmp(&kb.4));
    if ord == std::cmp::Ordering::Greater {
        b
    } else {
        a
    }
}

/// Find the cheapest deadline-meeting deployment.
pub fn search(req: &SearchRequest) -> Result<PlanOutcome, SearchError> {
    let e = enumerate(req)?;
    let best = e
        .items
        .par_iter()
        .filter_map(|item| {
            let (plan, timing) = best_of_triple(req, item, &e.mu_lists[item.dp_idx])?;
            let o = outcome(req, plan, timing);
            (o.duration_s <= req.deadline_s).then_some(o)
        })
        .reduce_with(min_outcome);
    best.ok_or(SearchError::NoFeasiblePlan { n_gpu_cap: e.cap })
}

/// The plan with the median duration among all feasible plans on the optimal
/// fleet — a proxy for what a non-exhaustive practitioner would deploy.
/// For an even count the lower median is taken.
pub fn median_latency_plan(req: &SearchRequest) -> Result<PlanOutcome, SearchError> {
    let optimal = search(req)?;
    let e = enumerate(req)?;
    let mut feasible: Vec<PlanOutcome> = e
        .items
        .par_iter()
        .filter(|item| item.n_gpu == optimal.n_gpu)
        .flat_map_iter(|item| {
            let req = *req;
            e.mu_lists[item.dp_idx][..item.mu_hi]
                .iter()
                .filter_map(move |&mu| {
                    let plan = ParallelismPlan {
                        n_tp: item.n_tp,
                        n_dp: item.n_dp,
                        n_pp: item.n_pp,
                        n_ep: req.workload.arch.n_experts,
                        microbatch_tokens: mu,
                    };
                    match perf::evaluate_plan(&req.workload, &plan) {
                        Ok(t) => {
                            let o = outcome(&req, plan, t);
                            (o.duration_s <= req.deadline_s).then_some(o)
                        }
                        Err(_) => None,
                    }
                })
        })
        .collect();
    feasible.sort_by(|a, b| {
        a.duration_s
            .total_cmp(&b.duration_s)
            .then(a.plan.n_tp.cmp(&b.plan.n_tp))
            .then(a.plan.n_pp.cmp(&b.plan.n_pp))
            .then(a.plan.n_dp.cmp(&b.plan.n_dp))
            .then(b.plan.microbatch_tokens.cmp(&a.plan.microbatch_tokens))
    });
    assert!(
        !feasible.is_empty(),
        "optimal fleet must hold at least the optimal plan"
    );
    Ok(feasible[(feasible.len() - 1) / 2].clone())
}

/// Every candidate the search visits on fleets up to the optimum (or, when
/// nothing is feasible, the smallest enumerable fleet), as exportable rows.
/// Returns the winning outcome too when one exists.
pub fn diagnostics(
    req: &SearchRequest,
) -> Result<(Vec<DiagnosticRow>, Option<PlanOutcome>), SearchError> {
    let winner = match search(req) {
        Ok(o) => Some(o),
        Err(SearchError::NoFeasiblePlan { .. }) => None,
        Err(e) => return Err(e),
    };
    let e = enumerate(req)?;
    let bound = winner
        .as_ref()
        .map(|o| o.n_gpu)
        .or_else(|| e.items.iter().map(|i| i.n_gpu).min())
        .unwrap_or(e.min_gpus);
    let n_ep = req.workload.arch.n_experts;
    let mut rows: Vec<DiagnosticRow> = Vec::new();
    for item in e.items.iter().filter(|i| i.n_gpu <= bound) {
        if let Some(reason) = item.reject {
            rows.push(DiagnosticRow {
                n_gpu: item.n_gpu,
                n_tp: item.n_tp,
                n_dp: item.n_dp,
                n_pp: item.n_pp,
                n_ep,
                microbatch_tokens: None,
                duration_s: None,
                feasible: false,
                reject_reason: reason,
            });
            continue;
        }
        for &mu in &e.mu_lists[item.dp_idx][..item.mu_hi] {
            let plan = ParallelismPlan {
                n_tp: item.n_tp,
                n_dp: item.n_dp,
                n_pp: item.n_pp,
                n_ep,
                microbatch_tokens: mu,
            };
            let row = match perf::evaluate_plan(&req.workload, &plan) {
                Ok(t) => {
                    let o = outcome(req, plan, t);
                    let feasible = o.duration_s <= req.deadline_s;
                    DiagnosticRow {
                        n_gpu: item.n_gpu,
                        n_tp: item.n_tp,
                        n_dp: item.n_dp,
                        n_pp: item.n_pp,
                        n_ep,
                        microbatch_tokens: Some(mu),
                        duration_s: Some(o.duration_s),
                        feasible,
                        reject_reason: if feasible { "" } else { REASON_DEADLINE },
                    }
                }
                Err(PerfError::OutOfMemory { .. }) => DiagnosticRow {
                    n_gpu: item.n_gpu,
                    n_tp: item.n_tp,
                    n_dp: item.n_dp,
                    n_pp: item.n_pp,
                    n_ep,
                    microbatch_tokens: Some(mu),
                    duration_s: None,
                    feasible: false,
                    reject_reason: REASON_MEMORY,
                },
                Err(e) => return Err(e.into()),
            };
            rows.push(row);
        }
    }
    rows.sort_by_key(|r| {
        (
            r.n_gpu,
            r.n_tp,
            r.n_pp,
            r.n_dp,
            r.microbatch_tokens.unwrap_or(0),
        )
    });
    Ok((rows, winner))
}
