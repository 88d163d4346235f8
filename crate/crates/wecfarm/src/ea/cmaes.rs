//! CMA-ES with weighted recombination, rank-one and rank-mu covariance
//! updates and cumulative step-size adaptation, standard constants.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{evaluate_batch, BoundsBox, EaConfig, RunTrace};
use crate::error::Result;
use crate::rng;

pub(crate) struct CmaState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    sigma0: f64,

    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    p_c: DVector<f64>,
    p_sigma: DVector<f64>,
    eigen_basis: DMatrix<f64>,
    eigen_scale: DVector<f64>,
    generation: usize,
    pub restarts: usize,
}

impl CmaState {
    pub fn new(bounds: &BoundsBox, lambda: usize, rng: &mut impl Rng) -> Self {
        let dim = bounds.dim();
        let n = dim as f64;
        let mu = lambda / 2;
        let mut weights: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let cc = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let cs = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
        let cmu = (1.0 - c1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
        let damps = 1.0 + 2.0 * (0.0f64).max(((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        let mean_range: f64 =
            (0..dim).map(|d| bounds.range(d)).sum::<f64>() / n;
        let sigma0 = 0.3 * mean_range;

        CmaState {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            sigma0,
            mean: DVector::from_vec(bounds.sample_uniform(rng)),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            p_c: DVector::zeros(dim),
            p_sigma: DVector::zeros(dim),
            eigen_basis: DMatrix::identity(dim, dim),
            eigen_scale: DVector::from_element(dim, 1.0),
            generation: 0,
            restarts: 0,
        }
    }

    /// Samples the generation; candidates are clamped into the box and the
    /// update later uses the repaired points.
    pub fn sample(&self, bounds: &BoundsBox, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_iterator(
                    self.dim,
                    (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                let y = &self.eigen_basis * z.component_mul(&self.eigen_scale);
                let mut x: Vec<f64> = (&self.mean + self.sigma * y).iter().copied().collect();
                bounds.clamp(&mut x);
                x
            })
            .collect()
    }

    /// One full distribution update from the ranked generation
    /// (best first). Returns false when the covariance lost positive
    /// definiteness and the state restarted from the current mean.
    pub fn update(&mut self, ranked: &[&Vec<f64>]) -> bool {
        self.generation += 1;
        let old_mean = self.mean.clone();

        let mut new_mean = DVector::zeros(self.dim);
        for (w, x) in self.weights.iter().zip(ranked.iter().take(self.mu)) {
            new_mean += *w * DVector::from_vec((*x).clone());
        }
        let y_w = (&new_mean - &old_mean) / self.sigma;
        self.mean = new_mean;

        // C^{-1/2} y through the cached eigendecomposition
        let inv_sqrt = {
            let scaled = self.eigen_basis.transpose() * &y_w;
            let corrected = DVector::from_iterator(
                self.dim,
                scaled.iter().zip(self.eigen_scale.iter()).map(|(v, d)| v / d),
            );
            &self.eigen_basis * corrected
        };
        self.p_sigma = (1.0 - self.cs) * &self.p_sigma
            + (self.cs * (2.0 - self.cs) * self.mu_eff).sqrt() * inv_sqrt;

        let ps_norm = self.p_sigma.norm();
        let expected = (1.0 - (1.0 - self.cs).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = if ps_norm / expected < (1.4 + 2.0 / (self.dim as f64 + 1.0)) * self.chi_n {
            1.0
        } else {
            0.0
        };

        self.p_c = (1.0 - self.cc) * &self.p_c
            + h_sigma * (self.cc * (2.0 - self.cc) * self.mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, x) in self.weights.iter().zip(ranked.iter().take(self.mu)) {
            let y = (DVector::from_vec((*x).clone()) - &old_mean) / self.sigma;
            rank_mu += *w * &y * y.transpose();
        }
        let delta_h = (1.0 - h_sigma) * self.cc * (2.0 - self.cc);
        self.cov = (1.0 - self.c1 - self.cmu) * &self.cov
            + self.c1 * (&self.p_c * self.p_c.transpose() + delta_h * &self.cov)
            + self.cmu * rank_mu;

        // enforce exact symmetry before the eigen solve
        self.cov = 0.5 * (&self.cov + self.cov.transpose());

        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        if !self.sigma.is_finite() {
            self.restart();
            return false;
        }

        let eigen = SymmetricEigen::new(self.cov.clone());
        if eigen.eigenvalues.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            self.restart();
            return false;
        }
        self.eigen_scale = eigen.eigenvalues.map(f64::sqrt);
        self.eigen_basis = eigen.eigenvectors;
        true
    }

    fn restart(&mut self) {
        self.restarts += 1;
        self.cov = DMatrix::identity(self.dim, self.dim);
        self.eigen_basis = DMatrix::identity(self.dim, self.dim);
        self.eigen_scale = DVector::from_element(self.dim, 1.0);
        self.p_c = DVector::zeros(self.dim);
        self.p_sigma = DVector::zeros(self.dim);
        self.sigma = self.sigma0;
        self.generation = 0;
    }

    #[cfg(test)]
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen_scale.iter().map(|d| d * d).fold(f64::INFINITY, f64::min)
    }

    #[cfg(test)]
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.cov[(i, j)] - self.cov[(j, i)]).abs());
            }
        }
        worst
    }
}

pub fn run_cmaes<F>(objective: &F, bounds: &BoundsBox, config: &EaConfig) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate(bounds.dim())?;
    let lambda = config.population;
    let started = Instant::now();
    let mut rng = rng::stream(config.seed, config.method.tag());
    let mut trace = RunTrace::new();
    let mut state = CmaState::new(bounds, lambda, &mut rng);

    let mut calls = 0u64;
    let generations = config.budget / lambda;
    for _ in 0..generations {
        let candidates = state.sample(bounds, &mut rng);
        let fitness = evaluate_batch(objective, &candidates);
        calls += lambda as u64;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
        for &i in &order {
            trace.offer(&candidates[i], fitness[i]);
        }
        let ranked: Vec<&Vec<f64>> = order.iter().map(|&i| &candidates[i]).collect();
        state.update(&ranked);
        trace.record(calls, started);
    }
    Ok(trace)
}
