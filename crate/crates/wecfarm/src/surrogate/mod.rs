//! The neuro-surrogate: an LSTM sequence-to-one regressor mapping a partial
//! layout's ordered buoy positions to farm power, its trainer, and grey-wolf
//! hyperparameter optimization.

mod gwo;
mod lstm;

pub use gwo::{gwo_optimize, tune_and_train, HyperBox, TuneConfig};
pub use lstm::{lstm_forward, train, train_core, LossAndGrads, LstmModel};

use crate::error::{Error, Result};
use crate::farm::Point;

/// The five tuned hyperparameters. Integer dimensions are rounded from the
/// continuous search space at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub minibatch: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub layers: usize,
    pub hidden: usize,
}

impl HyperParams {
    pub fn validate(&self, bounds: &HyperBox) -> Result<()> {
        bounds.check(self)
    }

    /// Mid-box defaults, useful as a reference configuration.
    pub fn mid(bounds: &HyperBox) -> Self {
        bounds.mid()
    }
}

/// One training example: the ordered (x, y) inputs normalized to [0, 1] by
/// the farm side, and the simulator-evaluated farm power in raw watts.
/// Target standardization happens at training time from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub inputs: Vec<(f64, f64)>,
    pub target: f64,
}

/// Training data with its normalization metadata and per-sample provenance
/// (which buoy placement contributed the sample).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataSet {
    side: f64,
    samples: Vec<SequenceSample>,
    provenance: Vec<usize>,
}

impl DataSet {
    pub fn new(side: f64) -> Self {
        DataSet {
            side,
            samples: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Normalizes positions by the farm side and stores the sample.
    pub fn push(&mut self, positions: &[Point], target_watts: f64, buoy_index: usize) {
        let inputs = positions
            .iter()
            .map(|p| (p.x / self.side, p.y / self.side))
            .collect();
        self.samples.push(SequenceSample {
            inputs,
            target: target_watts,
        });
        self.provenance.push(buoy_index);
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SequenceSample] {
        &self.samples
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    /// Samples contributed by one buoy placement.
    pub fn of_placement(&self, buoy_index: usize) -> DataSet {
        let mut out = DataSet::new(self.side);
        for (s, &p) in self.samples.iter().zip(&self.provenance) {
            if p == buoy_index {
                out.samples.push(s.clone());
                out.provenance.push(p);
            }
        }
        out
    }

    pub fn sequence_len(&self) -> Option<usize> {
        self.samples.first().map(|s| s.inputs.len())
    }

    pub fn has_equal_lengths(&self) -> bool {
        match self.sequence_len() {
            None => true,
            Some(l) => self.samples.iter().all(|s| s.inputs.len() == l),
        }
    }

    /// Equal-length view for pooled training sets: shorter sequences are
    /// left-padded with their own first position, which replicates the fixed
    /// first-buoy prefix rather than inventing a mask value.
    pub fn padded_to_max(&self) -> DataSet {
        let max_len = self
            .samples
            .iter()
            .map(|s| s.inputs.len())
            .max()
            .unwrap_or(0);
        let mut out = DataSet::new(self.side);
        out.provenance = self.provenance.clone();
        out.samples = self
            .samples
            .iter()
            .map(|s| {
                let pad = max_len - s.inputs.len();
                let first = s.inputs[0];
                let mut inputs = vec![first; pad];
                inputs.extend_from_slice(&s.inputs);
                SequenceSample {
                    inputs,
                    target: s.target,
                }
            })
            .collect();
        out
    }

    /// Subset by sample indices, preserving order.
    pub fn subset(&self, indices: &[usize]) -> DataSet {
        let mut out = DataSet::new(self.side);
        for &i in indices {
            out.samples.push(self.samples[i].clone());
            out.provenance.push(self.provenance[i]);
        }
        out
    }
}

/// Standard sample Pearson correlation.
pub fn pearson_r(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::invalid("prediction/target length mismatch"));
    }
    let n = predictions.len();
    if n < 2 {
        return Err(Error::invalid("correlation needs at least two points"));
    }
    let nf = n as f64;
    let mean_p = predictions.iter().sum::<f64>() / nf;
    let mean_t = targets.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_t = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        cov += (p - mean_p) * (t - mean_t);
        var_p += (p - mean_p) * (p - mean_p);
        var_t += (t - mean_t) * (t - mean_t);
    }
    if var_p == 0.0 || var_t == 0.0 {
        return Err(Error::UndefinedStatistic(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((cov / (var_p * var_t).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_exact_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let double: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(pearson_r(&double, &x).unwrap(), 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson_r(&neg, &x).unwrap(), -1.0);
    }

    #[test]
    fn pearson_hand_computed() {
        // cov = 1.0, both variances 1.25 -> r = 0.8
        let r = pearson_r(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate_input() {
        assert!(matches!(
            pearson_r(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedStatistic(_))
        ));
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
        assert!(pearson_r(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn dataset_padding_replicates_first_position() {
        let mut d = DataSet::new(100.0);
        d.push(&[Point::new(100.0, 0.0), Point::new(50.0, 50.0)], 1.0, 2);
        d.push(
            &[
                Point::new(100.0, 0.0),
                Point::new(10.0, 20.0),
                Point::new(30.0, 40.0),
            ],
            2.0,
            3,
        );
        let padded = d.padded_to_max();
        assert!(padded.has_equal_lengths());
        assert_eq!(padded.sequence_len(), Some(3));
        // the short sample gained one copy of its first position up front
        assert_eq!(padded.samples()[0].inputs[0], (1.0, 0.0));
        assert_eq!(padded.samples()[0].inputs[1], (1.0, 0.0));
        assert_eq!(padded.samples()[0].inputs[2], (0.5, 0.5));
    }

    #[test]
    fn dataset_placement_filter() {
        let mut d = DataSet::new(100.0);
        d.push(&[Point::new(0.0, 0.0)], 1.0, 1);
        d.push(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0)], 2.0, 2);
        d.push(&[Point::new(0.0, 0.0), Point::new(2.0, 2.0)], 3.0, 2);
        assert_eq!(d.of_placement(2).len(), 2);
        assert_eq!(d.of_placement(1).len(), 1);
        assert_eq!(d.of_placement(9).len(), 0);
    }
}
