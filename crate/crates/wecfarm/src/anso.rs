//! Adaptive neuro-surrogate placement: sequential buoy placement that
//! alternates simulator-evaluated symmetric local search with
//! surrogate-estimated placement according to a strategy, followed by an
//! elitist backtracking refinement of the full layout.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ea::RunTrace;
use crate::error::{Error, Result};
use crate::farm::{feasible_against, EvaluationResult, Layout, Point};
use crate::hydro::Simulator;
use crate::rng;
use crate::seqplace::{sector_angles, sector_draw, SlsConfig};
use crate::surrogate::{tune_and_train, DataSet, LstmModel, TuneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    S1,
    S2,
    S3,
    S4,
}

impl StrategyName {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "s1" => Ok(StrategyName::S1),
            "s2" => Ok(StrategyName::S2),
            "s3" => Ok(StrategyName::S3),
            "s4" => Ok(StrategyName::S4),
            other => Err(Error::invalid(format!("unknown strategy \"{other}\""))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            StrategyName::S1 => "s1",
            StrategyName::S2 => "s2",
            StrategyName::S3 => "s3",
            StrategyName::S4 => "s4",
        }
    }
}

/// Which data trains the surrogate before an estimated placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingScope {
    /// Samples of the most recent simulator-evaluated placement.
    PreviousPlacementOnly,
    /// Every simulator sample gathered so far.
    AllHistory,
}

/// Placement plan: which buoy indices the simulator evaluates and which the
/// surrogate estimates. Buoy 1 is always simulator-evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategySpec {
    pub name: StrategyName,
    pub eval_set: BTreeSet<usize>,
    pub estim_set: BTreeSet<usize>,
    pub training_scope: TrainingScope,
    pub backtracking: bool,
}

/// Builds the published strategies. For n = 16 the sets match the printed
/// ones; other sizes extend the same patterns (S1 evaluates {2, 3} then
/// every other index from 5; S2 evaluates {2, 3} then every third from 6).
pub fn strategy(name: StrategyName, n: usize) -> Result<StrategySpec> {
    if n < 1 {
        return Err(Error::invalid("buoy count must be at least 1"));
    }
    let all: BTreeSet<usize> = (2..=n).collect();
    let eval_set: BTreeSet<usize> = match name {
        StrategyName::S1 | StrategyName::S3 => [2usize, 3]
            .into_iter()
            .chain((5..=n).step_by(2))
            .filter(|&i| i <= n)
            .collect(),
        StrategyName::S2 => [2usize, 3]
            .into_iter()
            .chain((6..=n).step_by(3))
            .filter(|&i| i <= n)
            .collect(),
        StrategyName::S4 => all.clone(),
    };
    let estim_set: BTreeSet<usize> = all.difference(&eval_set).copied().collect();
    let spec = StrategySpec {
        name,
        eval_set,
        estim_set,
        training_scope: if name == StrategyName::S3 {
            TrainingScope::AllHistory
        } else {
            TrainingScope::PreviousPlacementOnly
        },
        backtracking: false,
    };
    // eval and estim partition {2..n}
    debug_assert!(spec.eval_set.is_disjoint(&spec.estim_set));
    debug_assert_eq!(
        spec.eval_set.union(&spec.estim_set).count(),
        n.saturating_sub(1)
    );
    Ok(spec)
}

/// How the mutation step size evolves over backtracking iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// The printed schedule: `sigma_max * 0.08 * iter / iter_max`.
    Increasing,
    /// The prose reading: decreasing linearly with a 0.1 m floor.
    Decreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktrackConfig {
    /// Initial mutation step bound in meters.
    pub sigma_max: f64,
    pub iterations: usize,
    /// Top of the per-buoy linear weight band (lowest-power buoy).
    pub omega_max: f64,
    pub sigma_mode: SigmaMode,
}

impl Default for BacktrackConfig {
    fn default() -> Self {
        BacktrackConfig {
            sigma_max: 10.0,
            iterations: 500,
            omega_max: 0.1,
            sigma_mode: SigmaMode::Increasing,
        }
    }
}

/// Mutation step size for iteration `iter` in `1..=iter_max`.
pub fn sigma_schedule(iter: usize, iter_max: usize, sigma_max: f64, mode: SigmaMode) -> f64 {
    let frac = iter as f64 / iter_max.max(1) as f64;
    match mode {
        SigmaMode::Increasing => sigma_max * 0.08 * frac,
        SigmaMode::Decreasing => sigma_max * 0.08 * (1.0 - frac) + 0.1,
    }
}

/// Per-buoy mutation probabilities: `(1/N) * (max_power / power_i)` plus a
/// linear weight from `omega_max` (lowest power) to 0 (highest power),
/// clamped to `[1/N, 1]`.
pub fn mutation_probabilities(per_buoy_power: &[f64], omega_max: f64) -> Vec<f64> {
    let n = per_buoy_power.len();
    if n == 0 {
        return Vec::new();
    }
    let max_power = per_buoy_power
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    // rank 0 = highest power -> omega 0; rank n-1 = lowest -> omega_max
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| per_buoy_power[b].total_cmp(&per_buoy_power[a]));
    let mut omega = vec![0.0; n];
    for (rank, &buoy) in order.iter().enumerate() {
        omega[buoy] = if n > 1 {
            omega_max * rank as f64 / (n - 1) as f64
        } else {
            0.0
        };
    }
    per_buoy_power
        .iter()
        .zip(&omega)
        .map(|(&p, &w)| {
            let ratio = if p > 0.0 { max_power / p } else { f64::INFINITY };
            let raw = ratio / n as f64 + w;
            raw.clamp(1.0 / n as f64, 1.0)
        })
        .collect()
}

/// Whole-method configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnsoConfig {
    pub sls: SlsConfig,
    pub tuning: TuneConfig,
    pub backtrack: BacktrackConfig,
}

/// Mutable state threaded through the placement loop.
pub struct PlacementState<'a> {
    pub sim: &'a Simulator,
    pub layout: Layout,
    pub dataset: DataSet,
    /// Per-buoy absorbed power of the last simulator-evaluated full prefix.
    pub per_buoy_power: Vec<f64>,
    /// Index of the most recent placement that contributed samples.
    pub last_eval_placement: usize,
    pub fallbacks: u64,
    /// (buoy index, held-out R) per surrogate retraining.
    pub surrogate_r: Vec<(usize, f64)>,
}

impl<'a> PlacementState<'a> {
    pub fn new(sim: &'a Simulator) -> Self {
        PlacementState {
            sim,
            layout: Layout::empty(sim.geometry.n()),
            dataset: DataSet::new(sim.geometry.side()),
            per_buoy_power: Vec::new(),
            last_eval_placement: 0,
            fallbacks: 0,
            surrogate_r: Vec::new(),
        }
    }
}

/// One line of the per-placement log.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementLog {
    pub buoy: usize,
    pub branch: &'static str,
    pub calls_used: u64,
    pub best_energy: f64,
    pub surrogate_r: Option<f64>,
}

/// Places the first buoy at the bottom corner `(side, 0)` and evaluates it.
pub fn place_first(state: &mut PlacementState) -> Result<EvaluationResult> {
    let corner = Point::new(state.sim.geometry.side(), 0.0);
    state.layout.push(corner)?;
    let (eval, per_buoy) = state.sim.evaluate_per_buoy(&state.layout)?;
    state
        .dataset
        .push(state.layout.positions(), eval.raw_power, 1);
    state.per_buoy_power = per_buoy;
    state.last_eval_placement = 1;
    Ok(eval)
}

struct ScoredCandidate {
    point: Point,
    feasible: bool,
    raw_power: f64,
    per_buoy: Vec<f64>,
}

/// Simulator-evaluated placement: one sample per sector (feasible where the
/// sector allows it), two refinement samples beside the best sector, every
/// evaluation fed to the dataset.
pub fn place_evaluated(
    state: &mut PlacementState,
    buoy: usize,
    cfg: &AnsoConfig,
    seed: u64,
) -> Result<(EvaluationResult, PlacementLog)> {
    let calls_before = state.sim.calls();
    let anchor = *state
        .layout
        .last()
        .ok_or_else(|| Error::invalid("placement requires a previous buoy"))?;
    let geometry = state.sim.geometry;
    let placed = state.layout.positions().to_vec();
    let mut rng = rng::substream(seed, "anso-eval", buoy as u64);

    let angles = sector_angles(cfg.sls.res)?;
    // sequential draws keep RNG use deterministic; evaluations run in parallel
    let draws: Vec<_> = angles
        .iter()
        .map(|&a| sector_draw(&anchor, a, &cfg.sls, &placed, &geometry, &mut rng))
        .collect();

    let evaluate_candidate = |p: Point, feasible: bool| -> Result<ScoredCandidate> {
        let mut candidate = Layout::new(placed.len() + 1, placed.clone())?;
        candidate.push(p)?;
        let (eval, per_buoy) = state.sim.evaluate_per_buoy(&candidate)?;
        Ok(ScoredCandidate {
            point: p,
            feasible,
            raw_power: eval.raw_power,
            per_buoy,
        })
    };

    let scored: Vec<ScoredCandidate> = draws
        .par_iter()
        .map(|d| evaluate_candidate(d.point, d.feasible))
        .collect::<Result<_>>()?;
    for c in &scored {
        state
            .dataset
            .push(&with_point(&placed, c.point), c.raw_power, buoy);
    }

    let mut best: Option<(usize, &ScoredCandidate)> = None;
    for (j, c) in scored.iter().enumerate() {
        if c.feasible && best.is_none_or(|(_, b): (usize, &ScoredCandidate)| c.raw_power > b.raw_power) {
            best = Some((j, c));
        }
    }

    let (best_angle, mut chosen): (f64, ScoredCandidate) = match best {
        Some((j, c)) => (
            angles[j],
            ScoredCandidate {
                point: c.point,
                feasible: true,
                raw_power: c.raw_power,
                per_buoy: c.per_buoy.clone(),
            },
        ),
        None => {
            // no feasible sector sample: one uniform random feasible
            // placement near the previous buoy
            state.fallbacks += 1;
            let p = random_feasible_near(&anchor, &placed, &geometry, &cfg.sls, &mut rng)?;
            let c = evaluate_candidate(p, true)?;
            state
                .dataset
                .push(&with_point(&placed, c.point), c.raw_power, buoy);
            let angle = (p.y - anchor.y)
                .atan2(p.x - anchor.x)
                .to_degrees()
                .rem_euclid(360.0);
            (angle, c)
        }
    };

    // refinement: the best sector's neighbourhood at +-res/2
    let half = f64::from(cfg.sls.res) / 2.0;
    for offset in [-half, half] {
        let angle = (best_angle + offset).rem_euclid(360.0);
        let draw = sector_draw(&anchor, angle, &cfg.sls, &placed, &geometry, &mut rng);
        let c = evaluate_candidate(draw.point, draw.feasible)?;
        state
            .dataset
            .push(&with_point(&placed, c.point), c.raw_power, buoy);
        if c.feasible && c.raw_power > chosen.raw_power {
            chosen = c;
        }
    }

    state.layout.push(chosen.point)?;
    state.per_buoy_power = chosen.per_buoy;
    state.last_eval_placement = buoy;
    let eval = EvaluationResult {
        raw_power: chosen.raw_power,
        violation_sum: 0.0,
        penalty: 0.0,
        objective: chosen.raw_power,
        simulator_calls: state.sim.calls(),
    };
    let log = PlacementLog {
        buoy,
        branch: "eval",
        calls_used: state.sim.calls() - calls_before,
        best_energy: chosen.raw_power,
        surrogate_r: None,
    };
    Ok((eval, log))
}

/// Surrogate-estimated placement: tune and retrain on the strategy's
/// training scope, then pick the feasible sector candidate with the highest
/// estimate. Consumes no simulator calls.
pub fn place_estimated(
    state: &mut PlacementState,
    buoy: usize,
    spec: &StrategySpec,
    cfg: &AnsoConfig,
    seed: u64,
) -> Result<(LstmModel, PlacementLog)> {
    let calls_before = state.sim.calls();
    if state.dataset.is_empty() {
        return Err(Error::invalid("estimated placement requires training data"));
    }
    let scope = match spec.training_scope {
        TrainingScope::PreviousPlacementOnly => {
            state.dataset.of_placement(state.last_eval_placement)
        }
        TrainingScope::AllHistory => state.dataset.clone(),
    };
    let tune_seed: u64 = rng::substream(seed, "anso-tune", buoy as u64).random();
    let model = tune_and_train(&scope, &cfg.tuning, tune_seed)?;
    if let Some(r) = model.validation_r {
        state.surrogate_r.push((buoy, r));
    }

    let anchor = *state
        .layout
        .last()
        .ok_or_else(|| Error::invalid("placement requires a previous buoy"))?;
    let geometry = state.sim.geometry;
    let placed = state.layout.positions().to_vec();
    let mut rng = rng::substream(seed, "anso-estim", buoy as u64);

    let angles = sector_angles(cfg.sls.res)?;
    let draws: Vec<_> = angles
        .iter()
        .map(|&a| sector_draw(&anchor, a, &cfg.sls, &placed, &geometry, &mut rng))
        .collect();

    let side = geometry.side();
    let feasible: Vec<&crate::seqplace::SectorDraw> =
        draws.iter().filter(|d| d.feasible).collect();
    let chosen = if feasible.is_empty() {
        // mirror of the eval-branch fallback; appended without any
        // simulator call
        state.fallbacks += 1;
        random_feasible_near(&anchor, &placed, &geometry, &cfg.sls, &mut rng)?
    } else {
        let sequences: Vec<Vec<(f64, f64)>> = feasible
            .iter()
            .map(|d| {
                placed
                    .iter()
                    .chain(std::iter::once(&d.point))
                    .map(|p| (p.x / side, p.y / side))
                    .collect()
            })
            .collect();
        let scores = model.forward_batch_std(&sequences)?;
        // argmax with first-index tie-break
        let mut best = 0usize;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        feasible[best].point
    };

    state.layout.push(chosen)?;
    debug_assert_eq!(state.sim.calls(), calls_before);
    let estimate = crate::surrogate::lstm_forward(&model, state.layout.positions())?;
    let log = PlacementLog {
        buoy,
        branch: "estim",
        calls_used: 0,
        best_energy: estimate,
        surrogate_r: model.validation_r,
    };
    Ok((model, log))
}

fn with_point(placed: &[Point], p: Point) -> Vec<Point> {
    let mut v = placed.to_vec();
    v.push(p);
    v
}

/// Uniform feasible point near the anchor: annulus first, whole farm as the
/// last resort.
fn random_feasible_near(
    anchor: &Point,
    placed: &[Point],
    geometry: &crate::farm::FarmGeometry,
    sls: &SlsConfig,
    rng: &mut impl Rng,
) -> Result<Point> {
    let annulus = crate::farm::resample_until_feasible(
        || {
            let radius = rng.random_range((sls.safe + sls.r1)..=(sls.safe + sls.r2));
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            Point::new(
                anchor.x + radius * theta.cos(),
                anchor.y + radius * theta.sin(),
            )
        },
        |p| feasible_against(p, placed, geometry),
        1000,
    );
    match annulus {
        Ok(p) => Ok(p),
        Err(_) => {
            let side = geometry.side();
            crate::farm::resample_until_feasible(
                || Point::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side)),
                |p| feasible_against(p, placed, geometry),
                10_000,
            )
        }
    }
}

/// Elitist 1+1 refinement of a complete layout. Each iteration mutates buoys
/// by their power-derived probabilities, repairs into bounds, evaluates and
/// accepts only strict improvements. Consumes exactly `iterations` calls.
pub fn backtrack(
    sim: &Simulator,
    layout: &Layout,
    incumbent: &EvaluationResult,
    per_buoy: &[f64],
    cfg: &BacktrackConfig,
    seed: u64,
    mut on_accept: impl FnMut(u64, f64),
) -> Result<(Layout, EvaluationResult, Vec<f64>)> {
    let mut best_layout = layout.clone();
    let mut best_eval = incumbent.clone();
    let mut best_per_buoy = per_buoy.to_vec();
    let mut rng = rng::stream(seed, "anso-backtrack");
    let side = sim.geometry.side();
    let n = layout.len();

    for iter in 1..=cfg.iterations {
        let sigma = sigma_schedule(iter, cfg.iterations, cfg.sigma_max, cfg.sigma_mode);
        let probs = mutation_probabilities(&best_per_buoy, cfg.omega_max);
        let normal = Normal::new(0.0, sigma.max(1e-12)).expect("sigma positive");
        let mut positions = best_layout.positions().to_vec();
        for (i, p) in positions.iter_mut().enumerate() {
            if rng.random::<f64>() < probs[i] {
                p.x = (p.x + normal.sample(&mut rng)).clamp(0.0, side);
                p.y = (p.y + normal.sample(&mut rng)).clamp(0.0, side);
            }
        }
        let candidate = Layout::new(n, positions)?;
        let (eval, cand_per_buoy) = sim.evaluate_per_buoy(&candidate)?;
        if eval.objective > best_eval.objective {
            best_layout = candidate;
            best_eval = eval;
            best_per_buoy = cand_per_buoy;
            on_accept(sim.calls(), best_eval.objective);
        }
    }
    Ok((best_layout, best_eval, best_per_buoy))
}

/// Full run outcome.
#[derive(Debug, Clone)]
pub struct AnsoOutcome {
    pub trace: RunTrace,
    pub layout: Layout,
    pub final_objective: f64,
    /// Ledger reading when the placement loop finished, before any final
    /// true-up evaluation and before backtracking.
    pub placement_calls: u64,
    pub total_calls: u64,
    pub fallbacks: u64,
    pub surrogate_r: Vec<(usize, f64)>,
    pub placements: Vec<PlacementLog>,
    pub partial: bool,
}

/// Simulator calls one evaluated placement may need: one per sector, two
/// refinements, plus one for a possible fallback evaluation.
fn eval_placement_worst_case(sls: &SlsConfig) -> u64 {
    u64::from(360 / sls.res) + 3
}

/// End-to-end run: corner placement, per-index dispatch, optional
/// backtracking. Stops gracefully (flagged partial) if the budget cannot
/// cover the next evaluated placement.
pub fn run_anso(
    sim: &Simulator,
    spec: &StrategySpec,
    cfg: &AnsoConfig,
    budget: u64,
    seed: u64,
) -> Result<AnsoOutcome> {
    let started = Instant::now();
    let n = sim.geometry.n();
    if budget < 1 {
        return Err(Error::invalid("budget must cover the first placement"));
    }
    let mut state = PlacementState::new(sim);
    let mut trace = RunTrace::new();
    let mut placements = Vec::new();

    let first = place_first(&mut state)?;
    trace.offer(&state.layout.to_flat(), first.objective);
    trace.record(sim.calls(), started);
    placements.push(PlacementLog {
        buoy: 1,
        branch: "eval",
        calls_used: 1,
        best_energy: first.raw_power,
        surrogate_r: None,
    });

    let mut last_eval: EvaluationResult = first;
    let mut partial = false;
    for buoy in 2..=n {
        if spec.eval_set.contains(&buoy) {
            if sim.calls() + eval_placement_worst_case(&cfg.sls) > budget {
                partial = true;
                break;
            }
            let (eval, log) = place_evaluated(&mut state, buoy, cfg, seed)?;
            trace.offer(&state.layout.to_flat(), eval.objective);
            trace.record(sim.calls(), started);
            last_eval = eval;
            placements.push(log);
        } else {
            let (_, log) = place_estimated(&mut state, buoy, spec, cfg, seed)?;
            placements.push(log);
        }
    }
    let placement_calls = sim.calls();

    // the last placement may be surrogate-estimated; the reported objective
    // must come from the simulator
    let mut per_buoy = state.per_buoy_power.clone();
    let mut final_eval = last_eval.clone();
    let needs_true_up = !partial && state.last_eval_placement != state.layout.len();
    if needs_true_up && sim.calls() < budget {
        let (eval, pb) = sim.evaluate_per_buoy(&state.layout)?;
        final_eval = eval;
        per_buoy = pb;
        trace.offer(&state.layout.to_flat(), final_eval.objective);
        trace.record(sim.calls(), started);
    }

    let mut layout = state.layout;
    if spec.backtracking && !partial && sim.calls() < budget {
        let remaining = (budget - sim.calls()) as usize;
        let bo_cfg = BacktrackConfig {
            iterations: cfg.backtrack.iterations.min(remaining),
            ..cfg.backtrack.clone()
        };
        let started_ref = &started;
        let trace_cell = std::cell::RefCell::new(&mut trace);
        let (bl, be, _) = backtrack(
            sim,
            &layout,
            &final_eval,
            &per_buoy,
            &bo_cfg,
            seed,
            |calls, objective| {
                let mut t = trace_cell.borrow_mut();
                t.best_objective = objective;
                t.points.push(crate::ea::TracePoint {
                    calls,
                    elapsed: started_ref.elapsed().as_secs_f64(),
                    best_objective: objective,
                });
            },
        )?;
        layout = bl;
        final_eval = be;
    }
    trace.offer(&layout.to_flat(), final_eval.objective);
    trace.record(sim.calls(), started);

    Ok(AnsoOutcome {
        trace,
        final_objective: final_eval.objective,
        layout,
        placement_calls,
        total_calls: sim.calls(),
        fallbacks: state.fallbacks,
        surrogate_r: state.surrogate_r,
        placements,
        partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm::FarmGeometry;
    use crate::hydro::WaveScenario;
    use crate::surrogate::HyperBox;

    #[test]
    fn strategy_sets_match_published_16_buoy_plan() {
        let s1 = strategy(StrategyName::S1, 16).unwrap();
        assert_eq!(
            s1.eval_set.iter().copied().collect::<Vec<_>>(),
            vec![2, 3, 5, 7, 9, 11, 13, 15]
        );
        assert_eq!(
            s1.estim_set.iter().copied().collect::<Vec<_>>(),
            vec![4, 6, 8, 10, 12, 14, 16]
        );
        assert_eq!(s1.training_scope, TrainingScope::PreviousPlacementOnly);

        let s2 = strategy(StrategyName::S2, 16).unwrap();
        assert_eq!(
            s2.eval_set.iter().copied().collect::<Vec<_>>(),
            vec![2, 3, 6, 9, 12, 15]
        );
        assert_eq!(s2.estim_set.len(), 9);

        let s3 = strategy(StrategyName::S3, 16).unwrap();
        assert_eq!(s3.eval_set, s1.eval_set);
        assert_eq!(s3.training_scope, TrainingScope::AllHistory);

        let s4 = strategy(StrategyName::S4, 16).unwrap();
        assert_eq!(s4.eval_set.len(), 15);
        assert!(s4.estim_set.is_empty());
    }

    #[test]
    fn strategy_partitions_indices() {
        for name in [
            StrategyName::S1,
            StrategyName::S2,
            StrategyName::S3,
            StrategyName::S4,
        ] {
            for n in [2usize, 5, 9, 16, 20] {
                let s = strategy(name, n).unwrap();
                let union: BTreeSet<usize> = s.eval_set.union(&s.estim_set).copied().collect();
                assert_eq!(union, (2..=n).collect::<BTreeSet<_>>());
                assert!(s.eval_set.is_disjoint(&s.estim_set));
            }
        }
    }

    #[test]
    fn unknown_strategy_name_rejected() {
        assert!(StrategyName::parse("s5").is_err());
        assert_eq!(StrategyName::parse("S2").unwrap(), StrategyName::S2);
    }

    #[test]
    fn sigma_schedule_endpoints() {
        // printed formula: grows to sigma_max * 0.08
        let first = sigma_schedule(1, 500, 10.0, SigmaMode::Increasing);
        let last = sigma_schedule(500, 500, 10.0, SigmaMode::Increasing);
        assert!((first - 10.0 * 0.08 / 500.0).abs() < 1e-12);
        assert!((last - 0.8).abs() < 1e-12);

        // prose variant: decreasing with the 0.1 floor
        let first = sigma_schedule(1, 500, 10.0, SigmaMode::Decreasing);
        let last = sigma_schedule(500, 500, 10.0, SigmaMode::Decreasing);
        assert!(first > last);
        assert!((last - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lowest_power_buoy_gets_largest_mutation_probability() {
        let mut rng = crate::rng::stream(7, "eq5");
        for _ in 0..200 {
            let n = rng.random_range(2..20);
            let powers: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..100.0)).collect();
            // the claim requires distinct powers
            let mut sorted = powers.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let probs = mutation_probabilities(&powers, 0.1);
            let argmin_power = powers
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            let max_prob = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // the lowest-power buoy attains the maximal probability; the
            // argmax is unique unless the [.., 1] clamp saturates several
            assert_eq!(probs[argmin_power], max_prob);
            if max_prob < 1.0 {
                let ties = probs.iter().filter(|p| **p == max_prob).count();
                assert_eq!(ties, 1);
            }
            for (i, p) in probs.iter().enumerate() {
                assert!(*p >= 1.0 / n as f64 - 1e-15 && *p <= 1.0, "prob[{i}]={p}");
            }
            // the highest-power buoy sits exactly at the 1/N floor
            let argmax_power = powers
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!((probs[argmax_power] - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    fn test_sim(n: usize) -> Simulator {
        let mut scenario = WaveScenario::bundled("perth-like").unwrap();
        scenario.components.truncate(3);
        for c in &mut scenario.components {
            c.probability = 1.0;
        }
        Simulator::new(scenario, FarmGeometry::standard(n).unwrap())
    }

    fn cheap_tuning() -> TuneConfig {
        TuneConfig {
            pack_size: 3,
            iterations: 1,
            folds: 2,
            bounds: HyperBox {
                minibatch: (16.0, 32.0),
                learning_rate: (5e-3, 2e-2),
                epochs: (30.0, 50.0),
                layers: (1.0, 1.0),
                hidden: (8.0, 16.0),
            },
        }
    }

    #[test]
    fn place_first_puts_corner_buoy() {
        let sim = test_sim(16);
        let mut state = PlacementState::new(&sim);
        place_first(&mut state).unwrap();
        let p = state.layout.positions()[0];
        assert_eq!(p, Point::new(sim.geometry.side(), 0.0));
        assert!(crate::farm::in_bounds(&p, &sim.geometry));
        assert_eq!(sim.calls(), 1);
        assert_eq!(state.dataset.len(), 1);
    }

    #[test]
    fn evaluated_placement_uses_exactly_122_calls_with_res_3() {
        let sim = test_sim(4);
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            ..AnsoConfig::default()
        };
        let mut state = PlacementState::new(&sim);
        place_first(&mut state).unwrap();
        let before = sim.calls();
        let (eval, log) = place_evaluated(&mut state, 2, &cfg, 3).unwrap();
        assert_eq!(state.fallbacks, 0);
        assert_eq!(sim.calls() - before, 122);
        assert_eq!(log.calls_used, 122);
        assert_eq!(state.dataset.of_placement(2).len(), 122);
        // appended buoy respects both constraints
        let p = state.layout.positions()[1];
        assert!(feasible_against(
            &p,
            &state.layout.positions()[..1],
            &sim.geometry
        ));
        assert!(eval.objective > 0.0);
    }

    #[test]
    fn estimated_placement_consumes_no_simulator_calls() {
        let sim = test_sim(4);
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            ..AnsoConfig::default()
        };
        let spec = strategy(StrategyName::S1, 4).unwrap();
        let mut state = PlacementState::new(&sim);
        place_first(&mut state).unwrap();
        place_evaluated(&mut state, 2, &cfg, 3).unwrap();
        place_evaluated(&mut state, 3, &cfg, 3).unwrap();
        let before = sim.calls();
        let (_, log) = place_estimated(&mut state, 4, &spec, &cfg, 3).unwrap();
        assert_eq!(sim.calls(), before);
        assert_eq!(log.calls_used, 0);
        assert_eq!(log.branch, "estim");
        let p = state.layout.positions()[3];
        assert!(feasible_against(
            &p,
            &state.layout.positions()[..3],
            &sim.geometry
        ));
    }

    #[test]
    fn backtrack_never_worsens_and_counts_iterations() {
        let sim = test_sim(3);
        let cfg = BacktrackConfig {
            iterations: 40,
            ..BacktrackConfig::default()
        };
        let layout = Layout::new(
            3,
            vec![
                Point::new(100.0, 100.0),
                Point::new(180.0, 100.0),
                Point::new(100.0, 180.0),
            ],
        )
        .unwrap();
        let (eval, per_buoy) = sim.evaluate_per_buoy(&layout).unwrap();
        let before = sim.calls();
        let (out_layout, out_eval, _) =
            backtrack(&sim, &layout, &eval, &per_buoy, &cfg, 5, |_, _| {}).unwrap();
        assert_eq!(sim.calls() - before, 40);
        assert!(out_eval.objective >= eval.objective);
        assert!(out_layout.is_complete());
        // feasibility preserved under elitism from a feasible incumbent
        assert_eq!(out_eval.penalty, 0.0);
    }

    #[test]
    fn run_anso_s4_call_accounting() {
        let sim = test_sim(4);
        let spec = strategy(StrategyName::S4, 4).unwrap();
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            ..AnsoConfig::default()
        };
        let out = run_anso(&sim, &spec, &cfg, 10_000, 9).unwrap();
        assert!(!out.partial);
        if out.fallbacks == 0 {
            assert_eq!(out.placement_calls, 1 + 3 * 122);
            assert_eq!(out.total_calls, out.placement_calls);
        }
        assert!(out.layout.is_complete());
        assert!(out.trace.is_monotone());
    }

    #[test]
    fn run_anso_s1_true_up_and_backtracking() {
        let sim = test_sim(4);
        let mut spec = strategy(StrategyName::S1, 4).unwrap();
        spec.backtracking = true;
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            backtrack: BacktrackConfig {
                iterations: 25,
                ..BacktrackConfig::default()
            },
            ..AnsoConfig::default()
        };
        let out = run_anso(&sim, &spec, &cfg, 10_000, 11).unwrap();
        // S1 on n=4: eval {2, 3}, estim {4}; placements cost 1 + 2*122,
        // then the true-up and 25 backtracking iterations
        if out.fallbacks == 0 {
            assert_eq!(out.placement_calls, 1 + 2 * 122);
            assert_eq!(out.total_calls, out.placement_calls + 1 + 25);
        }
        assert!(out.layout.is_complete());
        assert_eq!(out.surrogate_r.len(), 1);
        assert!(out.trace.is_monotone());
        assert_eq!(out.placements.len(), 4);
        assert_eq!(out.placements[3].branch, "estim");
    }

    #[test]
    fn run_anso_budget_exhaustion_flags_partial() {
        let sim = test_sim(4);
        let spec = strategy(StrategyName::S4, 4).unwrap();
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            ..AnsoConfig::default()
        };
        let out = run_anso(&sim, &spec, &cfg, 150, 13).unwrap();
        assert!(out.partial);
        assert!(out.layout.len() < 4);
        assert!(out.total_calls <= 150);
    }

    #[test]
    fn run_anso_is_deterministic() {
        let spec = strategy(StrategyName::S4, 3).unwrap();
        let cfg = AnsoConfig {
            tuning: cheap_tuning(),
            ..AnsoConfig::default()
        };
        let a = run_anso(&test_sim(3), &spec, &cfg, 10_000, 17).unwrap();
        let b = run_anso(&test_sim(3), &spec, &cfg, 10_000, 17).unwrap();
        assert_eq!(a.layout, b.layout);
        assert_eq!(a.final_objective.to_bits(), b.final_objective.to_bits());
        assert_eq!(a.total_calls, b.total_calls);
    }
}
