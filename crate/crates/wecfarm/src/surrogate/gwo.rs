//! Grey wolf optimizer over the five LSTM hyperparameters, and the
//! tune-then-retrain pipeline driven by k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::lstm::{train, train_core, LstmModel};
use super::{DataSet, HyperParams};
use crate::error::{Error, Result};
use crate::rng;

/// Continuous search box over (minibatch, learning rate, epochs, layers,
/// hidden). Integer dimensions are rounded at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBox {
    pub minibatch: (f64, f64),
    pub learning_rate: (f64, f64),
    pub epochs: (f64, f64),
    pub layers: (f64, f64),
    pub hidden: (f64, f64),
}

impl Default for HyperBox {
    fn default() -> Self {
        HyperBox {
            minibatch: (5.0, 100.0),
            learning_rate: (1e-4, 1e-1),
            epochs: (50.0, 600.0),
            layers: (1.0, 2.0),
            hidden: (10.0, 150.0),
        }
    }
}

impl HyperBox {
    fn dims(&self) -> [(f64, f64); 5] {
        [
            self.minibatch,
            self.learning_rate,
            self.epochs,
            self.layers,
            self.hidden,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.dims() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid("hyperparameter box bounds must be ordered"));
            }
        }
        if self.layers.0 < 1.0 || self.layers.1 > 2.0 {
            return Err(Error::invalid("layer count box must stay within [1, 2]"));
        }
        if self.minibatch.0 < 1.0 || self.hidden.0 < 1.0 || self.epochs.0 < 1.0 {
            return Err(Error::invalid("integer hyperparameters must be at least 1"));
        }
        Ok(())
    }

    /// Rounds a continuous position into concrete hyperparameters.
    pub fn realize(&self, position: &[f64; 5]) -> HyperParams {
        HyperParams {
            minibatch: position[0].round() as usize,
            learning_rate: position[1],
            epochs: position[2].round() as usize,
            layers: position[3].round().clamp(1.0, 2.0) as usize,
            hidden: position[4].round() as usize,
        }
    }

    pub fn mid(&self) -> HyperParams {
        let mid: Vec<f64> = self.dims().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        self.realize(&[mid[0], mid[1], mid[2], mid[3], mid[4]])
    }

    pub fn check(&self, h: &HyperParams) -> Result<()> {
        let p = [
            h.minibatch as f64,
            h.learning_rate,
            h.epochs as f64,
            h.layers as f64,
            h.hidden as f64,
        ];
        for ((v, (lo, hi)), name) in p.iter().zip(self.dims()).zip([
            "minibatch",
            "learning_rate",
            "epochs",
            "layers",
            "hidden",
        ]) {
            // rounding of a clamped position can land half a unit outside
            if *v < lo - 0.5 || *v > hi + 0.5 {
                return Err(Error::invalid(format!("{name} {v} outside its box")));
            }
        }
        Ok(())
    }

    fn clamp(&self, position: &mut [f64; 5]) {
        for (v, (lo, hi)) in position.iter_mut().zip(self.dims()) {
            *v = v.clamp(lo, hi);
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (v, (lo, hi)) in out.iter_mut().zip(self.dims()) {
            *v = rng.random_range(lo..=hi);
        }
        out
    }
}

/// Linearly decaying control scalar: 2 at the first update round, 0 at the
/// last.
fn control_a(iteration: usize, iterations: usize) -> f64 {
    if iterations <= 1 {
        0.0
    } else {
        2.0 * (1.0 - iteration as f64 / (iterations - 1) as f64)
    }
}

/// Minimizes `fitness` over the hyperparameter box.
///
/// One wolf starts at the mid-box reference point, so the winner is never
/// worse than that default. Fitness evaluations of one round run
/// concurrently; all RNG is drawn beforehand. Returns the best
/// hyperparameters and their fitness.
pub fn gwo_optimize<F>(
    fitness: F,
    bounds: &HyperBox,
    pack_size: usize,
    iterations: usize,
    seed: u64,
) -> Result<(HyperParams, f64)>
where
    F: Fn(&HyperParams) -> f64 + Sync,
{
    bounds.validate()?;
    if pack_size < 3 {
        return Err(Error::invalid("pack size must be at least 3"));
    }
    let mut rng = rng::stream(seed, "gwo");

    let mid = bounds.mid();
    let mut positions: Vec<[f64; 5]> = Vec::with_capacity(pack_size);
    positions.push([
        mid.minibatch as f64,
        mid.learning_rate,
        mid.epochs as f64,
        mid.layers as f64,
        mid.hidden as f64,
    ]);
    for _ in 1..pack_size {
        positions.push(bounds.sample(&mut rng));
    }

    let evaluate = |positions: &[[f64; 5]]| -> Vec<f64> {
        positions
            .par_iter()
            .map(|p| fitness(&bounds.realize(p)))
            .collect()
    };

    let mut scores = evaluate(&positions);
    // elitist leaders: best three positions ever seen
    let mut leaders: Vec<([f64; 5], f64)> = positions
        .iter()
        .copied()
        .zip(scores.iter().copied())
        .collect();
    leaders.sort_by(|a, b| a.1.total_cmp(&b.1));
    leaders.truncate(3);

    for it in 0..iterations {
        let a = control_a(it, iterations);
        for pos in &mut positions {
            let mut next = [0.0; 5];
            for d in 0..5 {
                let mut acc = 0.0;
                for (leader, _) in &leaders {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let a_coef = 2.0 * a * r1 - a;
                    let c_coef = 2.0 * r2;
                    let dist = (c_coef * leader[d] - pos[d]).abs();
                    acc += leader[d] - a_coef * dist;
                }
                next[d] = acc / 3.0;
            }
            bounds.clamp(&mut next);
            *pos = next;
        }
        scores = evaluate(&positions);
        for (pos, &score) in positions.iter().zip(&scores) {
            if score < leaders[2].1 {
                leaders[2] = (*pos, score);
                leaders.sort_by(|a, b| a.1.total_cmp(&b.1));
            }
        }
    }

    let (best_pos, best_score) = leaders[0];
    Ok((bounds.realize(&best_pos), best_score))
}

/// Tuning budget and box for [`tune_and_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub pack_size: usize,
    pub iterations: usize,
    pub folds: usize,
    pub bounds: HyperBox,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            pack_size: 8,
            iterations: 10,
            folds: 3,
            bounds: HyperBox::default(),
        }
    }
}

/// GWO over mean k-fold validation MSE, then a final retrain on all data
/// with the winning hyperparameters. The returned model carries the held-out
/// Pearson R of that final training.
pub fn tune_and_train(dataset: &DataSet, cfg: &TuneConfig, seed: u64) -> Result<LstmModel> {
    if cfg.folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if dataset.len() < cfg.folds {
        return Err(Error::invalid(format!(
            "dataset of {} rows cannot form {} folds",
            dataset.len(),
            cfg.folds
        )));
    }
    let padded = if dataset.has_equal_lengths() {
        dataset.clone()
    } else {
        dataset.padded_to_max()
    };

    let mut order: Vec<usize> = (0..padded.len()).collect();
    order.shuffle(&mut rng::stream(seed, "cv-folds"));
    let folds: Vec<Vec<usize>> = (0..cfg.folds)
        .map(|k| {
            order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % cfg.folds == k)
                .map(|(_, &idx)| idx)
                .collect()
        })
        .collect();
    let splits: Vec<(DataSet, DataSet)> = folds
        .iter()
        .map(|val_idx| {
            let train_idx: Vec<usize> = order
                .iter()
                .copied()
                .filter(|i| !val_idx.contains(i))
                .collect();
            (padded.subset(&train_idx), padded.subset(val_idx))
        })
        .collect();

    // one fixed training seed keeps wolf comparisons noise-free
    let train_seed = rng::stream(seed, "cv-train-seed").random();
    let fitness = |hyper: &HyperParams| -> f64 {
        let mut total = 0.0;
        for (train_set, val_set) in &splits {
            match train_core(train_set, Some(val_set), hyper, train_seed) {
                Ok(out) => total += out.val_mse.unwrap_or(f64::INFINITY),
                Err(_) => return f64::INFINITY,
            }
        }
        total / splits.len() as f64
    };

    let (winner, _) = gwo_optimize(fitness, &cfg.bounds, cfg.pack_size, cfg.iterations, seed)?;
    let (model, _) = train(&padded, &winner, train_seed)?;
    Ok(model)
}
