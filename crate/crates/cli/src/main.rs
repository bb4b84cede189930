//! `gridres` — battery reserve dispatch and grid-reliability analysis.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridres_core::battery::BatteryConfig;
use gridres_core::metrics;
use gridres_core::myopic::{run_policy, Policy, SocBand};
use gridres_core::opt_convex::{self, ConvexOptions};
use gridres_core::opt_mccormick::{self, MipOptions};
use gridres_core::problem::{CostKind, DispatchResult, ProblemSpec, SocPenalty};
use gridres_core::response::ResponseModel;
use gridres_core::scenario::{self, Scenario};
use gridres_core::timeseries::{self, CsvSchema, ImbalanceSeries, SynthModel};
use gridres_core::verify;

#[derive(Parser)]
#[command(
    name = "gridres",
    about = "Battery reserve dispatch and response-aware grid reliability analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dispatch a battery against an imbalance series over the full horizon.
    Optimize(OptimizeArgs),
    /// Run a storage-size x epsilon sweep from a scenario file.
    Sweep(SweepArgs),
    /// Cross-check the solvers against the brute-force oracle on random
    /// instances.
    Verify(VerifyArgs),
    /// Generate a synthetic imbalance series as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with an imbalance column.
    #[arg(long)]
    data: PathBuf,
    /// Name of the net-imbalance column.
    #[arg(long, default_value = "delta")]
    col_delta: String,
    /// Name of the scheduled-generation column.
    #[arg(long)]
    col_pg: Option<String>,
    /// Constant scheduled generation in MW (alternative to --col-pg).
    #[arg(long)]
    pg_const: Option<f64>,
    /// Name of the timestamp column used to infer the step.
    #[arg(long)]
    col_time: Option<String>,
    /// Explicit sample duration in hours.
    #[arg(long)]
    step_h: Option<f64>,
    /// Negate the imbalance column (opposite sign convention).
    #[arg(long)]
    negate_delta: bool,
    /// Fill single-run timestamp gaps by linear interpolation.
    #[arg(long)]
    fill_gaps: bool,
}

impl DataArgs {
    fn load(&self) -> Result<ImbalanceSeries> {
        let mut schema = CsvSchema::new(&self.col_delta);
        if let Some(col) = &self.col_pg {
            schema = schema.with_generation_col(col);
        }
        if let Some(pg) = self.pg_const {
            schema = schema.with_constant_generation(pg);
        }
        if let Some(col) = &self.col_time {
            schema = schema.with_time_col(col);
        }
        if let Some(h) = self.step_h {
            schema = schema.with_step_hours(h);
        }
        schema.negate_imbalance = self.negate_delta;
        schema.fill_gaps = self.fill_gaps;
        timeseries::load_csv(&self.data, &schema)
            .with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Battery description JSON ({"energy_mwh": .., "c_charge": .., ...}).
    #[arg(long)]
    battery: PathBuf,
    /// Cost shape for the deterministic optimizers.
    #[arg(long, value_parser = parse_cost, default_value = "linear")]
    cost: CostKind,
    /// Permissible-imbalance band as a fraction of scheduled generation.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// State-of-charge band "low:high" enabling SoC management.
    #[arg(long, value_parser = parse_band)]
    soc_band: Option<SocBand>,
    /// SoC penalty weight.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Solution method.
    #[arg(long, default_value = "convex", value_parser = ["convex", "mip", "myopic"])]
    method: String,
    /// Threshold policy for --method myopic.
    #[arg(long, value_parser = ["alg1", "alg2", "alg3"])]
    policy: Option<String>,
    /// Horizon cap for the exact MIP.
    #[arg(long, default_value_t = opt_mccormick::DEFAULT_HORIZON_CAP)]
    max_horizon: usize,
    /// Optimality tolerance for the convex solver.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap for the convex solver.
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also print the reliability report as a table row.
    #[arg(long)]
    report_table: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario description JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which comparison to run.
    #[arg(long, default_value = "all", value_parser = ["oracle", "mip", "myopic", "all"])]
    suite: String,
    /// Number of randomized instances (per suite).
    #[arg(long, default_value_t = 60)]
    instances: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 20_190_501)]
    seed: u64,
    /// Write the machine-readable outcome to this JSON path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Sample count.
    #[arg(long)]
    n: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_cost(s: &str) -> Result<CostKind, String> {
    match s {
        "linear" => Ok(CostKind::Linear),
        "quadratic" => Ok(CostKind::Quadratic),
        other => Err(format!("unknown cost '{other}'")),
    }
}

fn parse_band(s: &str) -> Result<SocBand, String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| "expected low:high".to_string())?;
    let low: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let high: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    SocBand::new(low, high).map_err(|e| e.to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Optimize(args) => optimize(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify(args) => run_verify(args),
        Command::Synth(args) => synth(args),
    }
}

fn optimize(args: OptimizeArgs) -> Result<()> {
    let series = Arc::new(args.data.load()?);
    let battery_text = fs::read_to_string(&args.battery)
        .with_context(|| format!("reading {}", args.battery.display()))?;
    let config: BatteryConfig = serde_json::from_str(&battery_text)?;
    let (battery, initial) = config.build()?;
    let response = ResponseModel::direct(args.epsilon)?;
    let soc_penalty = args.soc_band.map(|band| SocPenalty {
        weight: args.lambda,
        band,
    });

    let result: DispatchResult = match args.method.as_str() {
        "myopic" => {
            let Some(policy) = &args.policy else {
                bail!("--method myopic requires --policy {{alg1,alg2,alg3}}");
            };
            run_policy(
                Policy::parse(policy)?,
                &battery,
                args.soc_band.as_ref(),
                &series,
                &response,
                initial,
            )?
        }
        "convex" => {
            let spec = ProblemSpec::new(
                series.clone(),
                battery,
                args.cost,
                true,
                response,
                soc_penalty,
                initial,
            )?;
            let options = ConvexOptions {
                optimality_tol: args.tol,
                max_iterations: args.max_iter,
                ..Default::default()
            };
            opt_convex::optimize(&spec, &options)?
        }
        "mip" => {
            let spec = ProblemSpec::new(
                series.clone(),
                battery,
                args.cost,
                true,
                response,
                soc_penalty,
                initial,
            )?;
            let options = MipOptions {
                horizon_cap: args.max_horizon,
                ..Default::default()
            };
            opt_mccormick::optimize(&spec, &options)?
        }
        other => bail!("unknown method '{other}'"),
    };

    if args.report_table {
        let rows = vec![(args.method.clone(), args.epsilon, result.report.clone())];
        print!("{}", metrics::format_report_table(&rows));
        println!(
            "SAIDI_eps_mod = {:.4} minutes",
            metrics::saidi_to_minutes(result.report.saidi_eps_mod, series.step_hours())
        );
    } else {
        println!(
            "objective {} | RI_eps_mod {:.4}% | mean SoC {}",
            result.objective,
            result.report.ri_eps_mod,
            result
                .report
                .mean_soc
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into())
        );
    }

    fs::write(&args.out, serde_json::to_string_pretty(&result)? + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let sc: Scenario = serde_json::from_str(&text)?;
    let result = scenario::run_scenario(&sc)?;
    scenario::emit_report(&result, &args.out)?;
    print!("{}", result.table());
    if result.failed_count() > 0 {
        println!("{} cell(s) failed; see summary.table.txt", result.failed_count());
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<()> {
    let mut failures = 0usize;
    let mut payload = serde_json::Map::new();

    if args.suite == "oracle" || args.suite == "all" {
        let r = verify::oracle_equivalence(args.instances, args.seed)?;
        println!(
            "oracle equivalence: {} instances, convex checked {} (carve-outs {}), max err convex {:.3e} mip {:.3e} -> {}",
            r.instances,
            r.convex_checked,
            r.convex_carveouts,
            r.max_convex_error,
            r.max_mip_error,
            if r.failures.is_empty() { "PASS" } else { "FAIL" }
        );
        for f in &r.failures {
            println!("  {f}");
        }
        failures += r.failures.len();
        payload.insert("oracle".into(), serde_json::to_value(&r)?);
    }
    if args.suite == "mip" || args.suite == "all" {
        let r = verify::convex_vs_mip(args.instances, 12, args.seed.wrapping_add(1))?;
        println!(
            "convex vs mip: {} compared ({} skipped for split activity), max rel err {:.3e} -> {}",
            r.compared,
            r.skipped_violations,
            r.max_relative_error,
            if r.failures.is_empty() { "PASS" } else { "FAIL" }
        );
        for f in &r.failures {
            println!("  {f}");
        }
        failures += r.failures.len();
        payload.insert("mip".into(), serde_json::to_value(&r)?);
    }
    if args.suite == "myopic" || args.suite == "all" {
        let r = verify::myopic_optimality(args.instances, args.seed.wrapping_add(2))?;
        println!(
            "myopic vs oracle: {} instances, alg2 gap mean {:.3e} max {:.3e} (unit efficiency), lossy max {:.3e} -> {}",
            r.instances,
            r.mean_alg2_gap_unit_eta,
            r.max_alg2_gap_unit_eta,
            r.max_gap_lossy,
            if r.failures.is_empty() { "PASS" } else { "FAIL" }
        );
        for f in &r.failures {
            println!("  {f}");
        }
        failures += r.failures.len();
        payload.insert("myopic".into(), serde_json::to_value(&r)?);
    }

    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&payload)? + "\n")?;
    }
    if failures > 0 {
        bail!("{failures} verification failure(s)");
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let model: SynthModel = serde_json::from_str(&text)?;
    let series = timeseries::synth(args.n, &model, args.seed)?;
    timeseries::write_csv(&series, &args.out)?;
    println!(
        "wrote {} samples at {} h step to {}",
        series.len(),
        series.step_hours(),
        args.out.display()
    );
    Ok(())
}
