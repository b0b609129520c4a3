//! Command-line front end: sweeps, single-width plan searches, quick carbon
//! estimates, hardware projection, and GEMM-efficiency calibration.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use carbonsweep::carbon;
use carbonsweep::config::{parse_duration, AppConfig, ConfigError, ResolvedConfig};
use carbonsweep::hardware::{self, GpuSpec};
use carbonsweep::output::{self, FitLine, OutputMeta};
use carbonsweep::perf::Workload;
use carbonsweep::scaling::Architecture;
use carbonsweep::scenario::{self, fit_power_law, RunParams, ScenarioConfig, ScenarioRun};
use carbonsweep::search::{self, SearchError, SearchRequest};

#[derive(Parser)]
#[command(name = "carbonsweep", version, about = "Carbon accounting for scaled-up model training")]
struct Cli {
    /// TOML configuration file; defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the plan search (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the commands that run the full model pipeline.
#[derive(Args)]
struct RunOverrides {
    /// GPU from the built-in catalog (overrides the config).
    #[arg(long)]
    gpu: Option<String>,
    /// Project the GPU's specs this many years out first.
    #[arg(long)]
    years: Option<f64>,
    /// Training deadline, e.g. "90d", "12h", "3 months" (overrides the config).
    #[arg(long)]
    deadline: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep model widths and write per-scenario carbon tables plus fits.
    Sweep {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Output directory for the CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also run the compute-bound ideal as its own scenario.
        #[arg(long)]
        ideal: bool,
        /// Run every catalog GPU over the sweep and write generation tables.
        #[arg(long)]
        compare_generations: bool,
        /// Comma-separated projection years, e.g. "4,8"; year 0 is always included.
        #[arg(long, value_name = "YEARS")]
        compare_futures: Option<String>,
    },
    /// Find the best parallelism plan for one model width.
    Search {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Model width (a multiple of 64).
        #[arg(long)]
        d_model: u64,
        /// Report the median-latency feasible plan instead of the fastest.
        #[arg(long)]
        median: bool,
        /// Write every candidate at the chosen fleet size to this CSV.
        #[arg(long, value_name = "FILE")]
        diagnostics: Option<PathBuf>,
    },
    /// Carbon for a deployment you describe directly.
    ///
    /// Two modes: `--ideal --compute-flops C` charges the compute-bound
    /// floor; `--n-gpu N --duration D --utilization U` charges a measured
    /// deployment, embodied carbon included.
    Estimate {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Compute-bound floor instead of a measured deployment.
        #[arg(long)]
        ideal: bool,
        /// Training compute in FLOPs (ideal mode).
        #[arg(long)]
        compute_flops: Option<f64>,
        /// Fleet size (measured mode).
        #[arg(long)]
        n_gpu: Option<u128>,
        /// Training duration, e.g. "30d" (measured mode).
        #[arg(long)]
        duration: Option<String>,
        /// Average GPU utilization in [0, 1] (measured mode).
        #[arg(long)]
        utilization: Option<f64>,
    },
    /// Print a catalog GPU's specs projected years into the future.
    GpuProject {
        /// GPU from the built-in catalog.
        #[arg(long)]
        gpu: String,
        #[arg(long)]
        years: f64,
        /// Emit a `[custom_gpu]` TOML block instead of a table.
        #[arg(long)]
        toml: bool,
    },
    /// Fit the GEMM efficiency half-saturation constant to measured runs.
    ///
    /// Reads a CSV with columns tokens,d_model,measured_s, where each row is
    /// one d_model x d_model matrix multiply over `tokens` rows. Rows at or
    /// past theoretical peak are skipped.
    Calibrate {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Measurements CSV.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Failures mapped to exit codes: 2 configuration, 3 infeasible, 4 I/O.
enum AppError {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Infeasible(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Infeasible(m) | AppError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<scenario::ScenarioError> for AppError {
    fn from(e: scenario::ScenarioError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<SearchError> for AppError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::NoFeasiblePlan { .. } | SearchError::CandidateOverflow { .. } => {
                AppError::Infeasible(e.to_string())
            }
            other => AppError::Config(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            std::process::exit(2);
        }
        // Ignores the error if a pool already exists (it cannot here).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Sweep {
            overrides,
            out,
            ideal,
            compare_generations,
            compare_futures,
        } => cmd_sweep(
            &cli.config,
            overrides,
            out,
            *ideal,
            *compare_generations,
            compare_futures.as_deref(),
        ),
        Command::Search {
            overrides,
            d_model,
            median,
            diagnostics,
        } => cmd_search(&cli.config, overrides, *d_model, *median, diagnostics.as_deref()),
        Command::Estimate {
            overrides,
            ideal,
            compute_flops,
            n_gpu,
            duration,
            utilization,
        } => cmd_estimate(
            &cli.config,
            overrides,
            *ideal,
            *compute_flops,
            *n_gpu,
            duration.as_deref(),
            *utilization,
        ),
        Command::GpuProject { gpu, years, toml } => cmd_gpu_project(&cli.config, gpu, *years, *toml),
        Command::Calibrate { overrides, input } => cmd_calibrate(&cli.config, overrides, input),
    }
}

/// Load the config (or defaults), fold in shared flags, resolve.
fn load_resolved(
    path: &Option<PathBuf>,
    overrides: &RunOverrides,
) -> Result<ResolvedConfig, AppError> {
    let mut cfg = match path {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(name) = &overrides.gpu {
        cfg.gpu = name.clone();
        cfg.custom_gpu = None;
    }
    if let Some(d) = &overrides.deadline {
        cfg.sweep.deadline = d.clone();
    }
    if let Some(years) = overrides.years {
        // Bake the projection into the config so the digest reflects it.
        let base = cfg.resolve()?.params.gpu;
        let projected = base
            .project(&cfg.rates, years)
            .map_err(|e| AppError::Config(e.to_string()))?;
        cfg.custom_gpu = Some(projected);
    }
    Ok(cfg.resolve()?)
}

fn scenario_filename(label: &str) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    format!("scenario_{safe}.csv")
}

fn cmd_sweep(
    config: &Option<PathBuf>,
    overrides: &RunOverrides,
    out: &Path,
    ideal: bool,
    generations: bool,
    futures: Option<&str>,
) -> Result<(), AppError> {
    let resolved = load_resolved(config, overrides)?;
    std::fs::create_dir_all(out)?;
    let meta = OutputMeta::new(&resolved.digest);

    let mut scenarios = vec![ScenarioConfig::default()];
    scenarios.extend(resolved.scenarios.iter().cloned());
    if ideal {
        scenarios.push(ScenarioConfig {
            label: "ideal".into(),
            ideal_mode: true,
            embodied_enabled: false,
            ..ScenarioConfig::default()
        });
    }

    let mut fit_lines = Vec::with_capacity(scenarios.len());
    let mut baseline_feasible = 0usize;
    for (i, sc) in scenarios.iter().enumerate() {
        let run = scenario::run_scenario(&resolved.params, sc, &resolved.d_models)?;
        let feasible = run.points.iter().filter(|p| p.outcome.is_ok()).count();
        if i == 0 {
            baseline_feasible = feasible;
        }
        let path = out.join(scenario_filename(&sc.label));
        output::write_scenario_csv(&path, &run, &meta)?;
        let fit = fit_power_law(&run.carbon_loss_pairs());
        match &fit {
            Ok(f) => println!(
                "scenario {}: {}/{} widths planned, loss = {:.4} * carbon_t^-{:.4} (r2 {:.4}) -> {}",
                sc.label,
                feasible,
                run.points.len(),
                f.k,
                f.alpha_exp,
                f.r_squared,
                path.display()
            ),
            Err(e) => println!(
                "scenario {}: {}/{} widths planned, no fit ({e}) -> {}",
                sc.label,
                feasible,
                run.points.len(),
                path.display()
            ),
        }
        fit_lines.push(FitLine {
            scenario: sc.label.clone(),
            fit,
        });
    }
    let fits_path = out.join("fits.csv");
    output::write_fits_csv(&fits_path, &fit_lines, &meta)?;
    println!("fits -> {}", fits_path.display());

    if generations {
        let gpus = hardware::catalog();
        let cmp = scenario::compare_generations(
            &resolved.params,
            &gpus,
            &resolved.d_models,
            DESIGNATED_ACTIVE_PARAMS,
        )?;
        let gen_path = out.join("generations.csv");
        let brk_path = out.join("generation_breakdown.csv");
        output::write_generations_csv(&gen_path, &cmp, &meta)?;
        output::write_generation_breakdown_csv(&brk_path, &cmp, &meta)?;
        println!(
            "generations (designated width {}) -> {}, {}",
            cmp.designated_d_model,
            gen_path.display(),
            brk_path.display()
        );
    }

    if let Some(spec) = futures {
        let mut years = vec![0.0];
        for part in spec.split(',') {
            let y: f64 = part
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("cannot parse years {part:?}")))?;
            if y != 0.0 {
                years.push(y);
            }
        }
        let runs = scenario::compare_futures(&resolved.params, &years, &resolved.d_models)?;
        let futures_path = out.join("futures.csv");
        let borrowed: Vec<(f64, &ScenarioRun)> = runs.iter().map(|(y, r)| (*y, r)).collect();
        output::write_futures_csv(&futures_path, &borrowed, &meta)?;
        println!("futures -> {}", futures_path.display());
    }

    if baseline_feasible == 0 {
        return Err(AppError::Infeasible(
            "no width in the sweep has a plan that meets the deadline".into(),
        ));
    }
    Ok(())
}

/// The model size singled out for generation breakdowns.
const DESIGNATED_ACTIVE_PARAMS: f64 = 1e12;

fn cmd_search(
    config: &Option<PathBuf>,
    overrides: &RunOverrides,
    d_model: u64,
    median: bool,
    diagnostics: Option<&Path>,
) -> Result<(), AppError> {
    let resolved = load_resolved(config, overrides)?;
    let params = &resolved.params;
    let scaling = &params.scaling;
    let arch = Architecture::from_d_model(d_model).map_err(|e| AppError::Config(e.to_string()))?;
    let n_active = arch
        .active_params(scaling.max_active_experts)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let dataset = scaling
        .dataset_tokens(n_active)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let compute = scaling.compute_flops(n_active, dataset);
    let batch = scaling
        .batch_tokens(compute, params.seq_len)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let req = SearchRequest {
        workload: Workload {
            arch: &arch,
            gpu: &params.gpu,
            perf: &params.perf,
            flops_per_token: scaling.flops_per_token(n_active),
            batch_tokens: batch,
        },
        dataset_tokens: dataset,
        deadline_s: params.deadline_s,
        limits: params.limits,
    };

    println!(
        "width {d_model}: layers {}, experts {}, active params {:.3e}, dataset {:.3e} tokens, compute {:.3e} FLOPs, batch {} tokens",
        arch.n_layers, arch.n_experts, n_active as f64, dataset as f64, compute, batch
    );

    if let Some(diag_path) = diagnostics {
        let (rows, winner) = search::diagnostics(&req)?;
        let meta = OutputMeta::new(&resolved.digest);
        output::write_diagnostics_csv(diag_path, &rows, &meta)?;
        println!("{} candidate plans -> {}", rows.len(), diag_path.display());
        let outcome = winner.ok_or_else(|| {
            AppError::Infeasible(format!(
                "no plan meets the {} s deadline on {}",
                params.deadline_s, params.gpu.name
            ))
        })?;
        print_outcome(&outcome, params);
        return Ok(());
    }

    let outcome = if median {
        search::median_latency_plan(&req)?
    } else {
        search::search(&req)?
    };
    print_outcome(&outcome, params);
    Ok(())
}

fn print_outcome(o: &search::PlanOutcome, params: &RunParams) {
    let t = &o.timing;
    let m = &t.memory;
    println!(
        "plan: {} GPUs = {} expert x {} tensor x {} pipeline x {} data, microbatch {} tokens",
        o.n_gpu, o.plan.n_ep, o.plan.n_tp, o.plan.n_pp, o.plan.n_dp, o.plan.microbatch_tokens
    );
    println!(
        "step: {:.6} s (compute {:.6}, hbm {:.6}, tp {:.6}, ep {:.6}, dp {:.6}, bubble {:.6}) over {} microbatches",
        t.total_s,
        t.compute_s,
        t.hbm_s,
        t.tp_comm_s,
        t.ep_comm_s,
        t.dp_comm_s,
        t.pipeline_bubble_s,
        t.microbatches
    );
    println!(
        "memory per GPU: {:.3} GB of {:.3} GB (weights {:.3}, optimizer {:.3}, activations {:.3})",
        m.total_bytes() / 1e9,
        params.gpu.hbm_bytes / 1e9,
        m.weights_bytes / 1e9,
        m.optimizer_bytes / 1e9,
        m.activation_bytes / 1e9
    );
    println!(
        "training: {:.1} steps, {:.0} s ({:.2} days) at utilization {:.4}, deadline {:.0} s",
        o.steps,
        o.duration_s,
        o.duration_s / 86_400.0,
        t.utilization,
        params.deadline_s
    );
    let report = carbon::training_report(
        o.n_gpu,
        o.duration_s,
        t.utilization,
        &params.gpu,
        &params.carbon,
        true,
    );
    println!(
        "carbon: {:.3} t total = operational {:.3} t (gpu {:.3}, other {:.3}) + embodied {:.3} t",
        report.total_t(),
        report.op_total_t(),
        report.op_gpu_t,
        report.op_other_t,
        report.emb_total_t()
    );
}

fn cmd_estimate(
    config: &Option<PathBuf>,
    overrides: &RunOverrides,
    ideal: bool,
    compute_flops: Option<f64>,
    n_gpu: Option<u128>,
    duration: Option<&str>,
    utilization: Option<f64>,
) -> Result<(), AppError> {
    let resolved = load_resolved(config, overrides)?;
    let params = &resolved.params;
    let gpu = &params.gpu;
    let cc = &params.carbon;

    let config_source = match config {
        Some(p) => p.display().to_string(),
        None => "defaults (no file)".to_string(),
    };
    let gpu_source = match (&overrides.gpu, overrides.years) {
        (Some(_), Some(y)) => format!("--gpu, projected {y} years"),
        (Some(_), None) => "--gpu".to_string(),
        (None, Some(y)) => format!("config, projected {y} years"),
        (None, None) => "config".to_string(),
    };
    println!("resolved parameters");
    println!("  config: {config_source}");
    println!(
        "  gpu: {} ({gpu_source}); peak {:.4e} FLOP/s, tdp {} W, static fraction {}",
        gpu.name, gpu.peak_flops, gpu.tdp_watts, gpu.static_fraction
    );
    println!(
        "  carbon: pue {}, intensity {} g/kWh, gpu lifetime {} s, node overhead {} W per {} GPUs",
        cc.pue, cc.carbon_intensity_g_per_kwh, cc.lifetime_s, cc.node_overhead_watts, cc.gpus_per_node
    );

    if ideal {
        let compute = compute_flops.ok_or_else(|| {
            AppError::Config("--ideal needs --compute-flops".into())
        })?;
        let deployment = carbon::ideal_deployment(compute, gpu.peak_flops, params.deadline_s)
            .map_err(|e| AppError::Config(e.to_string()))?;
        let grams = carbon::ideal_carbon_g(compute, gpu, cc, params.deadline_s)
            .map_err(|e| AppError::Config(e.to_string()))?;
        println!("  deadline: {} s", params.deadline_s);
        println!(
            "ideal deployment: {} GPUs for {:.0} s at utilization 1",
            deployment.n_gpu, deployment.duration_s
        );
        println!("operational carbon: {:.6} t", grams / 1e6);
        return Ok(());
    }

    let (n, dur_text, util) = match (n_gpu, duration, utilization) {
        (Some(n), Some(d), Some(u)) => (n, d, u),
        _ => {
            return Err(AppError::Config(
                "measured mode needs --n-gpu, --duration, and --utilization (or pass --ideal)".into(),
            ))
        }
    };
    if n == 0 {
        return Err(AppError::Config("--n-gpu must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&util) {
        return Err(AppError::Config(format!(
            "--utilization must be in [0, 1], got {util}"
        )));
    }
    let dur_s = parse_duration(dur_text)?;
    let report = carbon::training_report(n, dur_s, util, gpu, cc, true);
    println!(
        "deployment: {n} GPUs ({} nodes) for {dur_s} s at utilization {util}",
        carbon::nodes_for(n, cc)
    );
    println!("operational gpu:    {:>14.6} t", report.op_gpu_t);
    println!("operational other:  {:>14.6} t", report.op_other_t);
    println!("embodied gpu logic: {:>14.6} t", report.emb_gpu_logic_t);
    println!("embodied hbm:       {:>14.6} t", report.emb_hbm_t);
    println!("embodied cpu:       {:>14.6} t", report.emb_cpu_t);
    println!("embodied dram:      {:>14.6} t", report.emb_dram_t);
    println!("embodied ssd:       {:>14.6} t", report.emb_ssd_t);
    println!("total:              {:>14.6} t", report.total_t());
    Ok(())
}

fn cmd_gpu_project(
    config: &Option<PathBuf>,
    name: &str,
    years: f64,
    as_toml: bool,
) -> Result<(), AppError> {
    let cfg = match config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let base = GpuSpec::builtin(name).ok_or_else(|| {
        AppError::Config(format!(
            "unknown GPU {name:?}; built-in parts: {}",
            hardware::builtin_names().join(", ")
        ))
    })?;
    let projected = base
        .project(&cfg.rates, years)
        .map_err(|e| AppError::Config(e.to_string()))?;
    if as_toml {
        #[derive(serde::Serialize)]
        struct Wrapper<'a> {
            custom_gpu: &'a GpuSpec,
        }
        let text = toml::to_string(&Wrapper {
            custom_gpu: &projected,
        })
        .map_err(|e| AppError::Config(format!("cannot serialize GPU: {e}")))?;
        print!("{text}");
        return Ok(());
    }
    println!("{} projected {} years with yearly rates:", base.name, years);
    println!("  peak:          {:.6e} FLOP/s (from {:.6e})", projected.peak_flops, base.peak_flops);
    println!("  hbm capacity:  {:.6e} B      (from {:.6e})", projected.hbm_bytes, base.hbm_bytes);
    println!("  hbm bw:        {:.6e} B/s    (from {:.6e})", projected.hbm_bw, base.hbm_bw);
    println!("  nvlink bw:     {:.6e} B/s    (from {:.6e})", projected.nvlink_bw, base.nvlink_bw);
    println!("  internode bw:  {:.6e} B/s    (unchanged)", projected.internode_bw);
    println!("  tdp:           {:.4} W       (from {:.4})", projected.tdp_watts, base.tdp_watts);
    println!("  die area:      {:.4} cm2     (from {:.4})", projected.die_area_cm2, base.die_area_cm2);
    println!("  sram scale:    {:.6}         (from {:.6})", projected.sram_capacity_scale, base.sram_capacity_scale);
    Ok(())
}

#[derive(serde::Deserialize)]
struct CalibrationRow {
    tokens: f64,
    d_model: f64,
    measured_s: f64,
}

fn cmd_calibrate(
    config: &Option<PathBuf>,
    overrides: &RunOverrides,
    input: &Path,
) -> Result<(), AppError> {
    let resolved = load_resolved(config, overrides)?;
    let gpu = &resolved.params.gpu;
    let mut reader = csv::Reader::from_path(input).map_err(|e| AppError::Io(e.to_string()))?;
    let mut log_sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (i, row) in reader.deserialize::<CalibrationRow>().enumerate() {
        let row = row.map_err(|e| AppError::Io(format!("row {}: {e}", i + 2)))?;
        if !(row.tokens > 0.0 && row.d_model > 0.0 && row.measured_s > 0.0) {
            return Err(AppError::Config(format!(
                "row {}: tokens, d_model, and measured_s must be positive",
                i + 2
            )));
        }
        // One d_model x d_model GEMM over `tokens` rows: 2 t d^2 FLOPs.
        let flops = 2.0 * row.tokens * row.d_model * row.d_model;
        let efficiency = flops / (gpu.peak_flops * row.measured_s);
        if efficiency >= 1.0 {
            eprintln!(
                "warning: row {} runs at {:.3}x theoretical peak; skipped",
                i + 2,
                efficiency
            );
            skipped += 1;
            continue;
        }
        let x = row.tokens * row.d_model;
        let k = gpu.sram_capacity_scale * x * (1.0 - efficiency) / efficiency;
        log_sum += k.ln();
        used += 1;
    }
    if used == 0 {
        return Err(AppError::Config(format!(
            "no usable measurements in {} ({skipped} skipped)",
            input.display()
        )));
    }
    let k = (log_sum / used as f64).exp();
    println!(
        "fitted half-saturation from {used} measurements on {} ({skipped} skipped):",
        gpu.name
    );
    println!();
    println!("[perf]");
    println!("sram_half_sat = {k}");
    Ok(())
}
