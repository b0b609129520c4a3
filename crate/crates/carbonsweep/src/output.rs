//! CSV emission for sweep results.
//!
//! Every file starts with two comment lines — the tool version and the
//! SHA-256 of the resolved configuration — so a result can always be traced
//! back to what produced it. Formatting is fixed per column and rows arrive
//! in deterministic order from the callers, so re-running the same
//! configuration yields byte-identical files regardless of thread count.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::scenario::{
    FitError, GenerationComparison, PointPlan, PowerLawFit, ScenarioPoint, ScenarioRun,
};
use crate::search::DiagnosticRow;

/// Provenance stamped into every output file.
#[derive(Debug, Clone)]
pub struct OutputMeta {
    pub version: String,
    pub config_digest: String,
}

impl OutputMeta {
    pub fn new(config_digest: impl Into<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest.into(),
        }
    }
}

/// Shortest decimal that round-trips; what almost every column uses.
fn num(v: f64) -> String {
    v.to_string()
}

/// Scientific notation for compute budgets, which span many decades.
fn sci(v: f64) -> String {
    format!("{v:e}")
}

fn start_file(path: &Path, meta: &OutputMeta) -> io::Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# carbonsweep v{}", meta.version)?;
    writeln!(file, "# config sha256: {}", meta.config_digest)?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut writer: csv::Writer<BufWriter<File>>) -> io::Result<()> {
    writer.flush()
}

const POINT_COLUMNS: [&str; 16] = [
    "d_model",
    "n_params",
    "dataset_tokens",
    "compute_flops",
    "loss",
    "n_gpu",
    "n_tp",
    "n_dp",
    "n_pp",
    "n_ep",
    "duration_s",
    "utilization",
    "op_gpu_t",
    "op_other_t",
    "emb_total_t",
    "total_t",
];

/// The 16 cells shared by the scenario, generation, and future tables.
/// A point whose plan search failed keeps its model columns and leaves the
/// plan and carbon columns empty.
fn point_cells(p: &ScenarioPoint) -> Vec<String> {
    let mut cells = vec![
        p.d_model.to_string(),
        p.n_params.to_string(),
        p.dataset_tokens.to_string(),
        sci(p.compute_flops),
        num(p.loss),
    ];
    match &p.outcome {
        Ok(plan) => cells.extend(plan_cells(plan)),
        Err(_) => cells.extend(std::iter::repeat(String::new()).take(11)),
    }
    cells
}

fn plan_cells(plan: &PointPlan) -> Vec<String> {
    vec![
        plan.n_gpu.to_string(),
        plan.plan.n_tp.to_string(),
        plan.plan.n_dp.to_string(),
        plan.plan.n_pp.to_string(),
        plan.plan.n_ep.to_string(),
        num(plan.duration_s),
        num(plan.utilization),
        num(plan.report.op_gpu_t),
        num(plan.report.op_other_t),
        num(plan.report.emb_total_t()),
        num(plan.report.total_t()),
    ]
}

/// One scenario, one file: a row per swept width.
pub fn write_scenario_csv(path: &Path, run: &ScenarioRun, meta: &OutputMeta) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    w.write_record(POINT_COLUMNS)?;
    for point in &run.points {
        w.write_record(point_cells(point))?;
    }
    finish(w)
}

/// A scenario label with its loss-against-carbon fit (or why there is none).
pub struct FitLine {
    pub scenario: String,
    pub fit: Result<PowerLawFit, FitError>,
}

pub fn write_fits_csv(path: &Path, lines: &[FitLine], meta: &OutputMeta) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    w.write_record(["scenario", "k", "alpha_exp", "r_squared", "n_points", "degenerate"])?;
    for line in lines {
        let cells = match &line.fit {
            Ok(fit) => vec![
                line.scenario.clone(),
                num(fit.k),
                num(fit.alpha_exp),
                num(fit.r_squared),
                fit.n_points.to_string(),
                fit.degenerate.to_string(),
            ],
            Err(_) => vec![
                line.scenario.clone(),
                String::new(),
                String::new(),
                String::new(),
                "0".to_string(),
                String::new(),
            ],
        };
        w.write_record(cells)?;
    }
    finish(w)
}

/// All generations in one table, a `gpu` column in front of the usual 16.
pub fn write_generations_csv(
    path: &Path,
    cmp: &GenerationComparison,
    meta: &OutputMeta,
) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    let mut header = vec!["gpu"];
    header.extend(POINT_COLUMNS);
    w.write_record(header)?;
    for gen in &cmp.runs {
        for point in &gen.run.points {
            let mut cells = vec![gen.gpu.name.clone()];
            cells.extend(point_cells(point));
            w.write_record(cells)?;
        }
    }
    finish(w)
}

/// Carbon anatomy of the designated width: one row per generation with the
/// full embodied split, per-GPU burden, and embodied share of the total.
pub fn write_generation_breakdown_csv(
    path: &Path,
    cmp: &GenerationComparison,
    meta: &OutputMeta,
) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    w.write_record([
        "gpu",
        "d_model",
        "n_gpu",
        "duration_s",
        "utilization",
        "op_gpu_t",
        "op_other_t",
        "emb_gpu_logic_t",
        "emb_hbm_t",
        "emb_cpu_t",
        "emb_dram_t",
        "emb_ssd_t",
        "total_t",
        "per_gpu_kg",
        "embodied_share",
    ])?;
    for gen in &cmp.runs {
        let Some(point) = gen
            .run
            .points
            .iter()
            .find(|p| p.d_model == cmp.designated_d_model)
        else {
            continue;
        };
        let mut cells = vec![gen.gpu.name.clone(), point.d_model.to_string()];
        match &point.outcome {
            Ok(plan) => {
                let r = &plan.report;
                let total = r.total_t();
                let per_gpu_kg = total * 1000.0 / plan.n_gpu as f64;
                let embodied_share = if total > 0.0 { r.emb_total_t() / total } else { 0.0 };
                cells.extend([
                    plan.n_gpu.to_string(),
                    num(plan.duration_s),
                    num(plan.utilization),
                    num(r.op_gpu_t),
                    num(r.op_other_t),
                    num(r.emb_gpu_logic_t),
                    num(r.emb_hbm_t),
                    num(r.emb_cpu_t),
                    num(r.emb_dram_t),
                    num(r.emb_ssd_t),
                    num(total),
                    num(per_gpu_kg),
                    num(embodied_share),
                ]);
            }
            Err(_) => cells.extend(std::iter::repeat(String::new()).take(13)),
        }
        w.write_record(cells)?;
    }
    finish(w)
}

/// Projected hardware years out, a `years` column in front of the usual 16.
pub fn write_futures_csv(
    path: &Path,
    futures: &[(f64, &ScenarioRun)],
    meta: &OutputMeta,
) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    let mut header = vec!["years"];
    header.extend(POINT_COLUMNS);
    w.write_record(header)?;
    for (years, run) in futures {
        for point in &run.points {
            let mut cells = vec![num(*years)];
            cells.extend(point_cells(point));
            w.write_record(cells)?;
        }
    }
    finish(w)
}

/// Every candidate plan at the chosen fleet size, feasible or not.
pub fn write_diagnostics_csv(
    path: &Path,
    rows: &[DiagnosticRow],
    meta: &OutputMeta,
) -> io::Result<()> {
    let mut w = start_file(path, meta)?;
    w.write_record([
        "n_gpu",
        "n_tp",
        "n_dp",
        "n_pp",
        "n_ep",
        "microbatch_tokens",
        "duration_s",
        "feasible",
        "reject_reason",
    ])?;
    for row in rows {
        w.write_record([
            row.n_gpu.to_string(),
            row.n_tp.to_string(),
            row.n_dp.to_string(),
            row.n_pp.to_string(),
            row.n_ep.to_string(),
            row.microbatch_tokens.map(|v| v.to_string()).unwrap_or_default(),
            row.duration_s.map(num).unwrap_or_default(),
            row.feasible.to_string(),
            row.reject_reason.to_string(),
        ])?;
    }
    finish(w)
}
