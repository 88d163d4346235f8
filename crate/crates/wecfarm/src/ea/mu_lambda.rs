//! Elitist (mu+lambda) EA with per-buoy Gaussian mutation.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{evaluate_batch, BoundsBox, EaConfig, RunTrace};
use crate::error::{Error, Result};
use crate::rng;

/// Coordinate groups mutated as one unit. A buoy is an (x, y) pair, so an
/// even-dimensional genome defaults to dim/2 groups.
pub(crate) fn group_count(dim: usize, configured: Option<usize>) -> usize {
    match configured {
        Some(g) => g.clamp(1, dim),
        None if dim % 2 == 0 => dim / 2,
        None => dim,
    }
}

/// Mutates each group with probability `1/groups`; every coordinate of a
/// selected group receives a Gaussian step of `sigma_fraction * range`.
pub(crate) fn mutate_genome(
    genome: &mut [f64],
    bounds: &BoundsBox,
    groups: usize,
    sigma_fraction: f64,
    rng: &mut impl Rng,
) -> usize {
    let dim = genome.len();
    let per_group = dim.div_ceil(groups);
    let p = 1.0 / groups as f64;
    let mut mutated = 0;
    for g in 0..groups {
        if rng.random::<f64>() < p {
            mutated += 1;
            let start = g * per_group;
            let end = (start + per_group).min(dim);
            for d in start..end {
                let sigma = sigma_fraction * bounds.range(d);
                let step = Normal::new(0.0, sigma).expect("sigma > 0").sample(rng);
                genome[d] += step;
            }
        }
    }
    bounds.clamp(genome);
    mutated
}

pub fn run_mu_plus_lambda<F>(objective: &F, bounds: &BoundsBox, config: &EaConfig) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.dim();
    config.validate(dim)?;
    let mu = config.mu;
    let lambda = config.population;
    if config.budget < mu {
        return Err(Error::invalid("budget must cover the initial mu evaluations"));
    }
    let groups = group_count(dim, config.groups);
    let started = Instant::now();
    let mut rng = rng::stream(config.seed, config.method.tag());
    let mut trace = RunTrace::new();

    let mut parents: Vec<Vec<f64>> = (0..mu).map(|_| bounds.sample_uniform(&mut rng)).collect();
    let mut parent_fit = evaluate_batch(objective, &parents);
    let mut calls = mu as u64;
    for (x, &v) in parents.iter().zip(&parent_fit) {
        trace.offer(x, v);
    }
    trace.record(calls, started);

    while (calls as usize) + lambda <= config.budget {
        let children: Vec<Vec<f64>> = (0..lambda)
            .map(|_| {
                let parent = rng.random_range(0..mu);
                let mut child = parents[parent].clone();
                mutate_genome(&mut child, bounds, groups, config.mutation_sigma_fraction, &mut rng);
                child
            })
            .collect();
        let child_fit = evaluate_batch(objective, &children);
        calls += lambda as u64;

        // elitist survivor selection over the mu+lambda pool; the stable sort
        // keeps incumbents ahead of equal-fitness children
        let mut pool: Vec<(Vec<f64>, f64)> = parents
            .drain(..)
            .zip(parent_fit.drain(..))
            .chain(children.into_iter().zip(child_fit))
            .collect();
        pool.sort_by(|a, b| b.1.total_cmp(&a.1));
        pool.truncate(mu);
        for (x, v) in &pool {
            trace.offer(x, *v);
        }
        (parents, parent_fit) = pool.into_iter().unzip();
        trace.record(calls, started);
    }
    Ok(trace)
}
