//! `wecfarm`: run and compare buoy-layout optimizers on wave scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use wecfarm::anso::{AnsoConfig, BacktrackConfig, SigmaMode};
use wecfarm::harness::{
    self, export, export_ranks, ComparePlan, ExperimentPlan, Method, RunRecord,
};
use wecfarm::seqplace::{LsnmConfig, SlsConfig};
use wecfarm::surrogate::TuneConfig;

#[derive(Parser)]
#[command(name = "wecfarm", about = "Wave-energy-converter farm layout optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method for several seeded runs and export the results.
    Run(RunArgs),
    /// Run several methods under one budget and rank them.
    Compare(CompareArgs),
    /// Scenario file utilities.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Parse and validate a scenario file.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct MethodArgs {
    /// de | pso | cmaes | mu-lambda | lsnm | anso
    #[arg(long)]
    method: String,
    /// ANSO strategy: s1 | s2 | s3 | s4
    #[arg(long)]
    strategy: Option<String>,
    /// ANSO backtracking: on | off
    #[arg(long, default_value = "off")]
    backtrack: String,
    /// EA parameter override, repeatable: key=value
    #[arg(long = "ea-param")]
    ea_param: Vec<String>,
    /// Symmetric-search angular resolution in degrees
    #[arg(long = "sls-res", default_value_t = 3)]
    sls_res: u32,
    /// Inner ring offset in meters
    #[arg(long = "sls-r1", default_value_t = 0.0)]
    sls_r1: f64,
    /// Outer ring offset in meters
    #[arg(long = "sls-r2", default_value_t = 20.0)]
    sls_r2: f64,
    /// Nelder-Mead iterations per LS-NM placement
    #[arg(long = "lsnm-ns", default_value_t = 25)]
    lsnm_ns: usize,
    /// Gaussian samples per LS-NM placement
    #[arg(long = "lsnm-samples", default_value_t = 8)]
    lsnm_samples: usize,
    /// Backtracking iterations
    #[arg(long = "bo-iters", default_value_t = 500)]
    bo_iters: usize,
    /// Backtracking step schedule: increasing | decreasing
    #[arg(long = "bo-sigma-mode", default_value = "increasing")]
    bo_sigma_mode: String,
    /// GWO pack size for surrogate tuning
    #[arg(long = "gwo-pack", default_value_t = 8)]
    gwo_pack: usize,
    /// GWO iterations for surrogate tuning
    #[arg(long = "gwo-iters", default_value_t = 10)]
    gwo_iters: usize,
    /// Cross-validation folds for surrogate tuning
    #[arg(long = "cv-folds", default_value_t = 3)]
    cv_folds: usize,
}

impl MethodArgs {
    fn sls(&self) -> SlsConfig {
        SlsConfig {
            res: self.sls_res,
            r1: self.sls_r1,
            r2: self.sls_r2,
            ..SlsConfig::default()
        }
    }

    fn anso(&self) -> anyhow::Result<AnsoConfig> {
        let sigma_mode = match self.bo_sigma_mode.as_str() {
            "increasing" => SigmaMode::Increasing,
            "decreasing" => SigmaMode::Decreasing,
            other => anyhow::bail!("unknown --bo-sigma-mode \"{other}\""),
        };
        Ok(AnsoConfig {
            sls: self.sls(),
            tuning: TuneConfig {
                pack_size: self.gwo_pack,
                iterations: self.gwo_iters,
                folds: self.cv_folds,
                ..TuneConfig::default()
            },
            backtrack: BacktrackConfig {
                iterations: self.bo_iters,
                sigma_mode,
                ..BacktrackConfig::default()
            },
        })
    }

    fn lsnm(&self) -> LsnmConfig {
        LsnmConfig {
            samples: self.lsnm_samples,
            nm_iterations: self.lsnm_ns,
            ..LsnmConfig::default()
        }
    }

    fn backtrack_on(&self) -> anyhow::Result<bool> {
        match self.backtrack.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => anyhow::bail!("--backtrack must be on or off, got \"{other}\""),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name or JSON file path
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    method: MethodArgs,
    /// Simulator-call budget per run
    #[arg(long)]
    budget: u64,
    /// Independent seeded runs
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Base seed; run r uses seed + r
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Buoy count
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Write real wall-clock seconds into files (not reproducible)
    #[arg(long, default_value_t = false)]
    timing: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Comparison plan JSON
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Write real wall-clock seconds into files (not reproducible)
    #[arg(long, default_value_t = false)]
    timing: bool,
}

fn configure_threads(threads: usize) -> anyhow::Result<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool setup")?;
    }
    Ok(())
}

fn print_records(label: &str, records: &[RunRecord]) {
    for r in records {
        println!(
            "{label} seed={} objective={:.2} W calls={} wall={:.2}s{}{}",
            r.seed,
            r.best_objective,
            r.simulator_calls,
            r.wall_seconds,
            if r.partial { " PARTIAL" } else { "" },
            if r.fallbacks > 0 {
                format!(" fallbacks={}", r.fallbacks)
            } else {
                String::new()
            }
        );
        for (buoy, rv) in &r.surrogate_r {
            println!("{label} seed={}   surrogate buoy {buoy}: R={rv:.3}", r.seed);
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    configure_threads(args.threads)?;
    let method = Method::parse(
        &args.method.method,
        args.method.strategy.as_deref(),
        args.method.backtrack_on()?,
    )?;
    let mut plan = ExperimentPlan::new(args.scenario.clone(), method, args.budget, args.seed);
    plan.n = args.n;
    plan.runs = args.runs;
    plan.timing = args.timing;
    plan.anso = args.method.anso()?;
    plan.lsnm = args.method.lsnm();
    plan.ea_overrides = args
        .method
        .ea_param
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| anyhow::anyhow!("--ea-param must be key=value, got \"{kv}\""))
        })
        .collect::<anyhow::Result<_>>()?;

    let records = harness::run_experiment(&plan)?;
    let stats = harness::summarize(&records)?;
    print_records(&method.label(), &records);
    println!(
        "{} on {}: max={:.2} min={:.2} mean={:.2} median={:.2} std={:.2}",
        method.label(),
        args.scenario,
        stats.max,
        stats.min,
        stats.mean,
        stats.median,
        stats.std
    );
    export(
        &records,
        &stats,
        &method.label(),
        &args.scenario,
        &args.out,
        args.timing,
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<()> {
    configure_threads(args.threads)?;
    let text = std::fs::read_to_string(&args.plan)
        .with_context(|| format!("reading {}", args.plan.display()))?;
    let plan = ComparePlan::from_json(&text)?;
    let anso = args.method.anso()?;
    let lsnm = args.method.lsnm();
    let outcome = harness::run_compare(&plan, &anso, &lsnm)?;

    for (label, records) in outcome.labels.iter().zip(&outcome.records) {
        print_records(label, records);
        let stats = harness::summarize(records)?;
        let dir = args.out.join(label);
        export(records, &stats, label, &plan.scenario, &dir, args.timing)?;
    }
    let mut ranked: Vec<(usize, f64)> = outcome
        .friedman
        .mean_ranks
        .iter()
        .copied()
        .enumerate()
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!(
        "friedman ranks on {} (chi2={:.3}):",
        plan.scenario, outcome.friedman.chi_square
    );
    for (i, rank) in ranked {
        println!("  {:<12} {:.3}", outcome.labels[i], rank);
    }
    export_ranks(&outcome.labels, &outcome.friedman, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_validate(file: PathBuf) -> anyhow::Result<()> {
    let text =
        std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let scenario = wecfarm::hydro::WaveScenario::from_json(&text)?;
    if !scenario.buoy.volume_consistent_with_sphere() {
        eprintln!("warning: buoy volume is not within 1% of a sphere of the stated radius");
    }
    println!(
        "{}: {} components, depth {} m, PTO damping {:.1} N*s/m, stiffness {:.1} N/m",
        scenario.name,
        scenario.components.len(),
        scenario.depth,
        scenario.pto.damping,
        scenario.pto.stiffness
    );
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<wecfarm::Error>() {
        match e {
            wecfarm::Error::NumericFailure(_) | wecfarm::Error::TrainingFailure { .. } => 3,
            _ => 2,
        }
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scenario { command } => match command {
            ScenarioCommand::Validate { file } => cmd_validate(file),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
