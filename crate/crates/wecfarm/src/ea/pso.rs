//! Global-best particle swarm with linearly decreasing inertia.

use std::time::Instant;

use rand::Rng;

use super::{evaluate_batch, BoundsBox, EaConfig, RunTrace, PSO_VELOCITY_CLAMP_FRACTION};
use crate::error::Result;
use crate::rng;

/// Velocity update for one dimension, clamped to the allowed band.
pub(crate) fn velocity_step(
    v: f64,
    x: f64,
    pbest: f64,
    gbest: f64,
    inertia: f64,
    c1: f64,
    c2: f64,
    r1: f64,
    r2: f64,
    range: f64,
) -> f64 {
    let vmax = PSO_VELOCITY_CLAMP_FRACTION * range;
    (inertia * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)).clamp(-vmax, vmax)
}

pub fn run_pso<F>(objective: &F, bounds: &BoundsBox, config: &EaConfig) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.dim();
    config.validate(dim)?;
    let lambda = config.population;
    let started = Instant::now();
    let mut rng = rng::stream(config.seed, config.method.tag());
    let mut trace = RunTrace::new();

    let mut pos: Vec<Vec<f64>> = (0..lambda).map(|_| bounds.sample_uniform(&mut rng)).collect();
    let mut vel: Vec<Vec<f64>> = vec![vec![0.0; dim]; lambda];
    let mut fit = evaluate_batch(objective, &pos);
    let mut calls = lambda as u64;

    let mut pbest = pos.clone();
    let mut pbest_fit = fit.clone();
    for (x, &v) in pos.iter().zip(&fit) {
        trace.offer(x, v);
    }
    let mut gbest = trace.best_x.clone();
    trace.record(calls, started);

    let iterations = config.budget / lambda - 1;
    for it in 0..iterations {
        let inertia = if iterations > 1 {
            config.pso_inertia_start
                + (config.pso_inertia_end - config.pso_inertia_start) * it as f64
                    / (iterations - 1) as f64
        } else {
            config.pso_inertia_start
        };

        for i in 0..lambda {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                vel[i][d] = velocity_step(
                    vel[i][d],
                    pos[i][d],
                    pbest[i][d],
                    gbest[d],
                    inertia,
                    config.pso_c1,
                    config.pso_c2,
                    r1,
                    r2,
                    bounds.range(d),
                );
                pos[i][d] += vel[i][d];
            }
            bounds.clamp(&mut pos[i]);
        }

        fit = evaluate_batch(objective, &pos);
        calls += lambda as u64;

        for i in 0..lambda {
            if fit[i] > pbest_fit[i] {
                pbest_fit[i] = fit[i];
                pbest[i] = pos[i].clone();
            }
            trace.offer(&pos[i], fit[i]);
        }
        gbest = trace.best_x.clone();
        trace.record(calls, started);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ea::test_support::{neg_sphere, unit_box};
    use crate::ea::EaMethod;

    #[test]
    fn solves_sphere_to_1e4() {
        let bounds = unit_box(10);
        let config = EaConfig::new(EaMethod::Pso, 20_000, 42);
        let trace = run_pso(&neg_sphere, &bounds, &config).unwrap();
        assert!(
            -trace.best_objective < 1e-4,
            "sphere value {}",
            -trace.best_objective
        );
    }

    #[test]
    fn velocity_clamp_never_exceeded() {
        // direct check on the update rule with adversarial pulls
        for (v, x, p, g) in [(10.0, 0.0, 50.0, -50.0), (-3.0, 1.0, 400.0, 300.0)] {
            let out = velocity_step(v, x, p, g, 1.0, 1.5, 2.0, 1.0, 1.0, 10.0);
            assert!(out.abs() <= PSO_VELOCITY_CLAMP_FRACTION * 10.0 + 1e-15);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let bounds = unit_box(5);
        let config = EaConfig::new(EaMethod::Pso, 900, 9);
        let a = run_pso(&neg_sphere, &bounds, &config).unwrap();
        let b = run_pso(&neg_sphere, &bounds, &config).unwrap();
        assert_eq!(a.best_x, b.best_x);
        assert_eq!(a.best_objective.to_bits(), b.best_objective.to_bits());
    }

    #[test]
    fn global_best_trace_is_monotone() {
        let bounds = unit_box(8);
        let config = EaConfig::new(EaMethod::Pso, 3000, 5);
        let trace = run_pso(&neg_sphere, &bounds, &config).unwrap();
        assert!(trace.is_monotone());
        assert_eq!(trace.points.last().unwrap().calls, 3000);
    }
}
