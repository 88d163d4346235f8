//! Differential evolution, DE/rand/1/bin.

use std::time::Instant;

use rand::Rng;

use super::{evaluate_batch, BoundsBox, EaConfig, RunTrace};
use crate::error::Result;
use crate::rng;

/// DE/rand/1/bin with clamping repair, maximizing `objective`.
///
/// Runs `floor(budget / population)` generations including the initial
/// population; the leftover budget is discarded.
pub fn run_de<F>(objective: &F, bounds: &BoundsBox, config: &EaConfig) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.dim();
    config.validate(dim)?;
    let lambda = config.population;
    let started = Instant::now();
    let mut rng = rng::stream(config.seed, config.method.tag());
    let mut trace = RunTrace::new();

    let mut pop: Vec<Vec<f64>> = (0..lambda).map(|_| bounds.sample_uniform(&mut rng)).collect();
    let mut fitness = evaluate_batch(objective, &pop);
    let mut calls = lambda as u64;
    for (x, &v) in pop.iter().zip(&fitness) {
        trace.offer(x, v);
    }
    trace.record(calls, started);

    let generations = config.budget / lambda;
    for _ in 1..generations {
        // all RNG consumed up front so trial evaluation can run concurrently
        let trials: Vec<Vec<f64>> = (0..lambda)
            .map(|i| {
                let (r1, r2, r3) = distinct_triple(&mut rng, lambda, i);
                let j_rand = rng.random_range(0..dim);
                let mut trial = pop[i].clone();
                for d in 0..dim {
                    if d == j_rand || rng.random::<f64>() < config.de_cr {
                        trial[d] = pop[r1][d] + config.de_f * (pop[r2][d] - pop[r3][d]);
                    }
                }
                bounds.clamp(&mut trial);
                trial
            })
            .collect();

        let trial_fit = evaluate_batch(objective, &trials);
        calls += lambda as u64;

        for i in 0..lambda {
            if trial_fit[i] >= fitness[i] {
                pop[i] = trials[i].clone();
                fitness[i] = trial_fit[i];
            }
            trace.offer(&pop[i], fitness[i]);
        }
        trace.record(calls, started);
    }
    Ok(trace)
}

fn distinct_triple(rng: &mut impl Rng, n: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let c = rng.random_range(0..n);
        if c != exclude && !taken.contains(&c) {
            return c;
        }
    };
    let r1 = pick(&[]);
    let r2 = pick(&[r1]);
    let r3 = pick(&[r1, r2]);
    (r1, r2, r3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ea::test_support::{neg_sphere, unit_box};
    use crate::ea::EaMethod;

    #[test]
    fn solves_sphere_to_1e6() {
        let bounds = unit_box(10);
        let config = EaConfig::new(EaMethod::De, 20_000, 42);
        let trace = run_de(&neg_sphere, &bounds, &config).unwrap();
        assert!(
            -trace.best_objective < 1e-6,
            "sphere value {}",
            -trace.best_objective
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let bounds = unit_box(4);
        let config = EaConfig::new(EaMethod::De, 600, 7);
        let a = run_de(&neg_sphere, &bounds, &config).unwrap();
        let b = run_de(&neg_sphere, &bounds, &config).unwrap();
        assert_eq!(a.best_x, b.best_x);
        assert_eq!(
            a.points.iter().map(|p| (p.calls, p.best_objective.to_bits())).collect::<Vec<_>>(),
            b.points.iter().map(|p| (p.calls, p.best_objective.to_bits())).collect::<Vec<_>>()
        );
    }

    #[test]
    fn budget_equal_to_population_evaluates_initial_only() {
        let bounds = unit_box(3);
        let config = EaConfig::new(EaMethod::De, 30, 1);
        let trace = run_de(&neg_sphere, &bounds, &config).unwrap();
        assert_eq!(trace.points.len(), 1);
        assert_eq!(trace.points[0].calls, 30);
    }

    #[test]
    fn trace_is_monotone_and_budget_respected() {
        let bounds = unit_box(6);
        let config = EaConfig::new(EaMethod::De, 1000, 3);
        let trace = run_de(&neg_sphere, &bounds, &config).unwrap();
        assert!(trace.is_monotone());
        assert!(trace.points.last().unwrap().calls <= 1000);
        // truncated, never exceeded: 1000 / 30 = 33 generations
        assert_eq!(trace.points.last().unwrap().calls, 33 * 30);
    }
}
