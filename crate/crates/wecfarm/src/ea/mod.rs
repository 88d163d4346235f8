//! Population-based baselines optimizing all coordinates at once: DE, PSO,
//! CMA-ES and a (mu+lambda) EA.
//!
//! All runners maximize the objective, repair candidates into the box by
//! clamping before evaluation, spend whole generations only (leftover budget
//! is discarded, never exceeded) and derive their RNG stream from
//! (seed, method tag). Candidate evaluations within a generation may run
//! concurrently; RNG draws happen only in the sequential phase.

mod cmaes;
mod de;
mod mu_lambda;
mod pso;

pub use cmaes::run_cmaes;
pub use de::run_de;
pub use mu_lambda::run_mu_plus_lambda;
pub use pso::run_pso;

use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};

/// PSO velocities are clamped to this fraction of the per-dimension range.
pub const PSO_VELOCITY_CLAMP_FRACTION: f64 = 0.2;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundsBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("each lower bound must be below its upper bound"));
        }
        Ok(BoundsBox { lower, upper })
    }

    /// `[0, side]^(2n)` box for a flat buoy-coordinate genome.
    pub fn square_farm(n: usize, side: f64) -> Self {
        BoundsBox {
            lower: vec![0.0; 2 * n],
            upper: vec![side; 2 * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample_uniform(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|d| rng.random_range(self.lower[d]..=self.upper[d]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EaMethod {
    De,
    Pso,
    CmaEs,
    MuPlusLambda,
}

impl EaMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            EaMethod::De => "de",
            EaMethod::Pso => "pso",
            EaMethod::CmaEs => "cmaes",
            EaMethod::MuPlusLambda => "mu-lambda",
        }
    }
}

/// Shared EA configuration; constructed with the published per-method
/// defaults and overridable field by field.
#[derive(Debug, Clone)]
pub struct EaConfig {
    pub method: EaMethod,
    /// Population (offspring count for the (mu+lambda) EA).
    pub population: usize,
    pub de_f: f64,
    pub de_cr: f64,
    /// Parent count of the (mu+lambda) EA.
    pub mu: usize,
    /// Mutation sigma as a fraction of the per-dimension range.
    pub mutation_sigma_fraction: f64,
    pub pso_c1: f64,
    pub pso_c2: f64,
    pub pso_inertia_start: f64,
    pub pso_inertia_end: f64,
    /// Coordinate groups mutated together by the (mu+lambda) EA; `None`
    /// pairs consecutive coordinates (buoy encoding) when the dimension is
    /// even and falls back to singletons otherwise.
    pub groups: Option<usize>,
    /// Objective-call budget.
    pub budget: usize,
    pub seed: u64,
}

impl EaConfig {
    pub fn new(method: EaMethod, budget: usize, seed: u64) -> Self {
        let population = match method {
            EaMethod::MuPlusLambda => 25,
            _ => 30,
        };
        EaConfig {
            method,
            population,
            de_f: 0.5,
            de_cr: 0.5,
            mu: 50,
            mutation_sigma_fraction: 0.1,
            pso_c1: 1.5,
            pso_c2: 2.0,
            pso_inertia_start: 1.0,
            pso_inertia_end: 0.4,
            groups: None,
            budget,
            seed,
        }
    }

    /// Applies a `key=value` override as accepted by the CLI.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse --ea-param {key}={value}")))
        }
        match key {
            "population" | "lambda" => self.population = parse(key, value)?,
            "de_f" => self.de_f = parse(key, value)?,
            "de_cr" | "de_pcr" => self.de_cr = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "mutation_sigma_fraction" => self.mutation_sigma_fraction = parse(key, value)?,
            "pso_c1" => self.pso_c1 = parse(key, value)?,
            "pso_c2" => self.pso_c2 = parse(key, value)?,
            "pso_inertia_start" => self.pso_inertia_start = parse(key, value)?,
            "pso_inertia_end" => self.pso_inertia_end = parse(key, value)?,
            "groups" => self.groups = Some(parse(key, value)?),
            other => return Err(Error::Config(format!("unknown --ea-param key \"{other}\""))),
        }
        Ok(())
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::invalid("objective dimension must be positive"));
        }
        if self.population == 0 || self.mu == 0 {
            return Err(Error::invalid("population and mu must be at least 1"));
        }
        if self.method == EaMethod::De && self.population < 4 {
            return Err(Error::invalid("DE needs a population of at least 4"));
        }
        for (name, v) in [("de_cr", self.de_cr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Objective calls consumed when this point was recorded.
    pub calls: u64,
    /// Wall-clock seconds since the run started.
    pub elapsed: f64,
    /// Best objective seen so far.
    pub best_objective: f64,
}

/// Best-so-far convergence trace of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub points: Vec<TracePoint>,
    /// Flat coordinates of the best candidate found.
    pub best_x: Vec<f64>,
    pub best_objective: f64,
}

impl RunTrace {
    pub fn new() -> Self {
        RunTrace {
            points: Vec::new(),
            best_x: Vec::new(),
            best_objective: f64::NEG_INFINITY,
        }
    }

    pub(crate) fn record(&mut self, calls: u64, started: Instant) {
        self.points.push(TracePoint {
            calls,
            elapsed: started.elapsed().as_secs_f64(),
            best_objective: self.best_objective,
        });
    }

    /// Folds a candidate into the best-so-far state; first index wins ties.
    pub(crate) fn offer(&mut self, x: &[f64], value: f64) {
        if value > self.best_objective {
            self.best_objective = value;
            self.best_x = x.to_vec();
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].best_objective >= w[0].best_objective)
    }
}

impl Default for RunTrace {
    fn default() -> Self {
        RunTrace::new()
    }
}

/// Evaluates a generation, preserving candidate order.
pub(crate) fn evaluate_batch<F>(objective: &F, candidates: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    candidates.par_iter().map(|c| objective(c)).collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Negated sphere: maximized at the origin with value 0.
    pub fn neg_sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn unit_box(dim: usize) -> BoundsBox {
        BoundsBox::new(vec![-1.0; dim], vec![1.0; dim]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_clamp_and_sample() {
        let b = BoundsBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mut x = vec![2.0, -3.0];
        b.clamp(&mut x);
        assert_eq!(x, vec![1.0, -1.0]);
        let mut rng = crate::rng::stream(1, "bounds");
        for _ in 0..100 {
            let s = b.sample_uniform(&mut rng);
            assert!(s[0] >= 0.0 && s[0] <= 1.0 && s[1] >= -1.0 && s[1] <= 1.0);
        }
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(BoundsBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoundsBox::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(BoundsBox::new(vec![], vec![]).is_err());
    }

    #[test]
    fn trace_offer_keeps_first_on_tie() {
        let mut t = RunTrace::new();
        t.offer(&[1.0], 5.0);
        t.offer(&[2.0], 5.0);
        assert_eq!(t.best_x, vec![1.0]);
    }
}
