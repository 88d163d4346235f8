//! Experiment orchestration: method dispatch, seeded multi-run experiments,
//! statistics and persistence. The budget currency is simulator calls; wall
//! time is recorded but never terminates a run.

mod export;
mod stats;

pub use export::{export, export_ranks};
pub use stats::{friedman_ranks, FriedmanResult, SummaryStats};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::anso::{run_anso, strategy, AnsoConfig, StrategyName};
use crate::ea::{
    run_cmaes, run_de, run_mu_plus_lambda, run_pso, BoundsBox, EaConfig, EaMethod, RunTrace,
};
use crate::error::{Error, Result};
use crate::farm::{FarmGeometry, Layout};
use crate::hydro::{Simulator, WaveScenario};
use crate::seqplace::{run_lsnm, LsnmConfig};

/// An optimization method as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ea(EaMethod),
    Lsnm,
    Anso {
        strategy: StrategyName,
        backtrack: bool,
    },
}

impl Method {
    pub fn parse(name: &str, strategy_name: Option<&str>, backtrack: bool) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "de" => Ok(Method::Ea(EaMethod::De)),
            "pso" => Ok(Method::Ea(EaMethod::Pso)),
            "cmaes" | "cma-es" => Ok(Method::Ea(EaMethod::CmaEs)),
            "mu-lambda" | "mu+lambda" => Ok(Method::Ea(EaMethod::MuPlusLambda)),
            "lsnm" | "ls-nm" => Ok(Method::Lsnm),
            "anso" => {
                let s = StrategyName::parse(strategy_name.unwrap_or("s4"))?;
                Ok(Method::Anso {
                    strategy: s,
                    backtrack,
                })
            }
            other => Err(Error::Config(format!(
                "unknown method \"{other}\"; known: de, pso, cmaes, mu-lambda, lsnm, anso"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Ea(m) => m.tag().to_string(),
            Method::Lsnm => "lsnm".to_string(),
            Method::Anso {
                strategy,
                backtrack,
            } => {
                if *backtrack {
                    format!("anso-{}-b", strategy.tag())
                } else {
                    format!("anso-{}", strategy.tag())
                }
            }
        }
    }
}

/// One experiment: a method run `runs` times with consecutive seeds on one
/// scenario under a shared call budget.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Bundled scenario name or a JSON file path.
    pub scenario: String,
    pub method: Method,
    pub n: usize,
    pub runs: usize,
    pub budget: u64,
    pub seed_base: u64,
    /// `key=value` overrides for the EA configuration.
    pub ea_overrides: Vec<(String, String)>,
    pub lsnm: LsnmConfig,
    pub anso: AnsoConfig,
    /// Write real wall-clock seconds into output files (breaks byte-level
    /// reproducibility of repeated runs).
    pub timing: bool,
}

impl ExperimentPlan {
    pub fn new(scenario: impl Into<String>, method: Method, budget: u64, seed_base: u64) -> Self {
        ExperimentPlan {
            scenario: scenario.into(),
            method,
            n: 16,
            runs: 10,
            budget,
            seed_base,
            ea_overrides: Vec::new(),
            lsnm: LsnmConfig::default(),
            anso: AnsoConfig::default(),
            timing: false,
        }
    }
}

/// One seeded run's results.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub trace: RunTrace,
    pub final_layout: Layout,
    /// Objective of the final complete layout (what the statistics compare).
    pub best_objective: f64,
    pub wall_seconds: f64,
    pub simulator_calls: u64,
    /// Ledger reading at the end of the placement loop, for sequential
    /// methods.
    pub placement_calls: Option<u64>,
    pub fallbacks: u64,
    pub surrogate_r: Vec<(usize, f64)>,
    pub partial: bool,
}

/// Loads a scenario from a file path or a bundled name.
pub fn load_scenario(name_or_path: &str) -> Result<WaveScenario> {
    let path = Path::new(name_or_path);
    if path.exists() {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        WaveScenario::from_json(&text)
    } else {
        WaveScenario::bundled(name_or_path)
    }
}

/// Executes one seeded run of the plan's method against a fresh simulator.
pub fn execute_run(plan: &ExperimentPlan, scenario: &WaveScenario, seed: u64) -> Result<RunRecord> {
    let geometry = FarmGeometry::standard(plan.n)?;
    let sim = Simulator::new(scenario.clone(), geometry);
    let started = Instant::now();

    let record = match &plan.method {
        Method::Ea(ea_method) => {
            let bounds = BoundsBox::square_farm(plan.n, geometry.side());
            let mut config = EaConfig::new(*ea_method, plan.budget as usize, seed);
            for (k, v) in &plan.ea_overrides {
                config.set_param(k, v)?;
            }
            let objective = |x: &[f64]| -> f64 {
                Layout::from_flat(x)
                    .and_then(|l| sim.evaluate(&l))
                    .map(|r| r.objective)
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let trace = match ea_method {
                EaMethod::De => run_de(&objective, &bounds, &config)?,
                EaMethod::Pso => run_pso(&objective, &bounds, &config)?,
                EaMethod::CmaEs => run_cmaes(&objective, &bounds, &config)?,
                EaMethod::MuPlusLambda => run_mu_plus_lambda(&objective, &bounds, &config)?,
            };
            let final_layout = Layout::from_flat(&trace.best_x)?;
            let best_objective = trace.best_objective;
            RunRecord {
                seed,
                trace,
                final_layout,
                best_objective,
                wall_seconds: started.elapsed().as_secs_f64(),
                simulator_calls: sim.calls(),
                placement_calls: None,
                fallbacks: 0,
                surrogate_r: Vec::new(),
                partial: false,
            }
        }
        Method::Lsnm => {
            let (trace, layout, partial) = run_lsnm(&sim, &plan.lsnm, plan.budget, seed)?;
            // the statistics compare the complete layout the method returns
            let oracle = Simulator::new(scenario.clone(), geometry);
            let best_objective = oracle.evaluate(&layout)?.objective;
            RunRecord {
                seed,
                trace,
                final_layout: layout,
                best_objective,
                wall_seconds: started.elapsed().as_secs_f64(),
                simulator_calls: sim.calls(),
                placement_calls: None,
                fallbacks: 0,
                surrogate_r: Vec::new(),
                partial,
            }
        }
        Method::Anso {
            strategy: name,
            backtrack,
        } => {
            let mut spec = strategy(*name, plan.n)?;
            spec.backtracking = *backtrack;
            let out = run_anso(&sim, &spec, &plan.anso, plan.budget, seed)?;
            RunRecord {
                seed,
                trace: out.trace,
                final_layout: out.layout,
                best_objective: out.final_objective,
                wall_seconds: started.elapsed().as_secs_f64(),
                simulator_calls: out.total_calls,
                placement_calls: Some(out.placement_calls),
                fallbacks: out.fallbacks,
                surrogate_r: out.surrogate_r,
                partial: out.partial,
            }
        }
    };
    if record.simulator_calls > plan.budget {
        return Err(Error::NumericFailure(format!(
            "budget overrun: {} calls against {}",
            record.simulator_calls, plan.budget
        )));
    }
    Ok(record)
}

/// Runs the plan with seeds `seed_base .. seed_base + runs`; independent
/// runs execute concurrently.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<RunRecord>> {
    if plan.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let scenario = load_scenario(&plan.scenario)?;
    (0..plan.runs)
        .into_par_iter()
        .map(|r| execute_run(plan, &scenario, plan.seed_base + r as u64))
        .collect()
}

/// Statistics over the runs' final best objectives.
pub fn summarize(records: &[RunRecord]) -> Result<SummaryStats> {
    let values: Vec<f64> = records.iter().map(|r| r.best_objective).collect();
    SummaryStats::from_values(&values)
}

/// A multi-method comparison sharing scenario, budget, run count and seeds.
#[derive(Debug, Clone, Deserialize)]
pub struct ComparePlan {
    pub scenario: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    pub methods: Vec<CompareMethod>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompareMethod {
    pub method: String,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub backtrack: bool,
}

fn default_n() -> usize {
    16
}
fn default_runs() -> usize {
    10
}

impl ComparePlan {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("compare plan: {e}")))
    }
}

/// Outcome of a comparison: per-method records plus Friedman ranks.
pub struct CompareOutcome {
    pub labels: Vec<String>,
    pub records: Vec<Vec<RunRecord>>,
    pub friedman: FriedmanResult,
}

/// Runs every method of the plan on the shared scenario and budget, then
/// ranks them per run.
pub fn run_compare(
    plan: &ComparePlan,
    anso: &AnsoConfig,
    lsnm: &LsnmConfig,
) -> Result<CompareOutcome> {
    if plan.methods.len() < 2 {
        return Err(Error::Config("compare plan needs at least two methods".into()));
    }
    let mut labels = Vec::new();
    let mut records = Vec::new();
    for m in &plan.methods {
        let method = Method::parse(&m.method, m.strategy.as_deref(), m.backtrack)?;
        let mut exp = ExperimentPlan::new(plan.scenario.clone(), method, plan.budget, plan.seed);
        exp.n = plan.n;
        exp.runs = plan.runs;
        exp.anso = anso.clone();
        exp.lsnm = *lsnm;
        labels.push(method.label());
        records.push(run_experiment(&exp)?);
    }
    let table: Vec<Vec<f64>> = records
        .iter()
        .map(|rs| rs.iter().map(|r| r.best_objective).collect())
        .collect();
    let friedman = friedman_ranks(&table)?;
    Ok(CompareOutcome {
        labels,
        records,
        friedman,
    })
}
