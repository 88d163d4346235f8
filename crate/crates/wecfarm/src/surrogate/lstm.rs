//! LSTM sequence-to-one regressor with full backpropagation through time.
//!
//! Parameters live in one flat vector viewed as per-layer gate matrices
//! (gate order: input, forget, cell, output), which keeps the optimizer and
//! finite-difference checks trivial and the matmuls zero-copy.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataSet, HyperParams};
use crate::error::{Error, Result};
use crate::farm::Point;
use crate::rng;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    input: usize,
    hidden: usize,
    layers: usize,
}

impl Shape {
    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    fn w_len(&self, layer: usize) -> usize {
        4 * self.hidden * self.layer_input(layer)
    }

    fn u_len(&self) -> usize {
        4 * self.hidden * self.hidden
    }

    fn b_len(&self) -> usize {
        4 * self.hidden
    }

    /// (w, u, b) offsets of one layer in the flat parameter vector.
    fn layer_offsets(&self, layer: usize) -> (usize, usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.w_len(l) + self.u_len() + self.b_len();
        }
        (off, off + self.w_len(layer), off + self.w_len(layer) + self.u_len())
    }

    fn head_offset(&self) -> usize {
        let (w, _, _) = self.layer_offsets(self.layers);
        w
    }

    fn total_len(&self) -> usize {
        self.head_offset() + self.hidden + 1
    }
}

/// Trained surrogate: weights plus the normalization metadata needed to map
/// raw meter positions to watt predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    shape: Shape,
    params: Vec<f64>,
    /// Farm side used to normalize input positions.
    pub side: f64,
    pub target_mean: f64,
    pub target_std: f64,
    /// Held-out Pearson correlation recorded at training time.
    pub validation_r: Option<f64>,
}

impl LstmModel {
    /// Fresh model with uniform +-1/sqrt(hidden) weights and forget-gate
    /// bias 1.
    pub fn init(layers: usize, hidden: usize, side: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(1..=2).contains(&layers) {
            return Err(Error::invalid("layer count must be 1 or 2"));
        }
        if hidden == 0 {
            return Err(Error::invalid("hidden size must be positive"));
        }
        let shape = Shape {
            input: 2,
            hidden,
            layers,
        };
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut params = vec![0.0; shape.total_len()];
        for layer in 0..layers {
            let (w_off, u_off, b_off) = shape.layer_offsets(layer);
            for p in &mut params[w_off..w_off + shape.w_len(layer)] {
                *p = rng.random_range(-bound..=bound);
            }
            for p in &mut params[u_off..u_off + shape.u_len()] {
                *p = rng.random_range(-bound..=bound);
            }
            // forget-gate block sits second in the [i, f, g, o] ordering
            for p in &mut params[b_off + hidden..b_off + 2 * hidden] {
                *p = 1.0;
            }
        }
        let head = shape.head_offset();
        for p in &mut params[head..head + hidden] {
            *p = rng.random_range(-bound..=bound);
        }
        Ok(LstmModel {
            shape,
            params,
            side,
            target_mean: 0.0,
            target_std: 1.0,
            validation_r: None,
        })
    }

    pub fn layers(&self) -> usize {
        self.shape.layers
    }

    pub fn hidden(&self) -> usize {
        self.shape.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid("parameter count mismatch"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn weight_views(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let sh = &self.shape;
        let (w_off, u_off, b_off) = sh.layer_offsets(layer);
        let w = ArrayView2::from_shape(
            (4 * sh.hidden, sh.layer_input(layer)),
            &self.params[w_off..w_off + sh.w_len(layer)],
        )
        .expect("parameter layout is consistent");
        let u = ArrayView2::from_shape(
            (4 * sh.hidden, sh.hidden),
            &self.params[u_off..u_off + sh.u_len()],
        )
        .expect("parameter layout is consistent");
        let b = ArrayView1::from(&self.params[b_off..b_off + sh.b_len()]);
        (w, u, b)
    }

    fn head_views(&self) -> (ArrayView1<'_, f64>, f64) {
        let off = self.shape.head_offset();
        (
            ArrayView1::from(&self.params[off..off + self.shape.hidden]),
            self.params[off + self.shape.hidden],
        )
    }

    /// Standardized prediction for a batch of equal-length normalized
    /// sequences.
    pub fn forward_batch_std(&self, sequences: &[Vec<(f64, f64)>]) -> Result<Vec<f64>> {
        let (h_last, _) = self.forward_cached(sequences)?;
        let (head_w, head_b) = self.head_views();
        Ok(h_last.dot(&head_w).iter().map(|v| v + head_b).collect())
    }

    /// Runs the recurrence, returning the final hidden state and the full
    /// cache needed by backpropagation.
    fn forward_cached(&self, sequences: &[Vec<(f64, f64)>]) -> Result<(Array2<f64>, Cache)> {
        let batch = sequences.len();
        if batch == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let steps = sequences[0].len();
        if steps == 0 {
            return Err(Error::invalid("sequences must have at least one step"));
        }
        if sequences.iter().any(|s| s.len() != steps) {
            return Err(Error::invalid("sequences in one batch must share a length"));
        }
        let h = self.shape.hidden;

        let inputs: Vec<Array2<f64>> = (0..steps)
            .map(|t| {
                Array2::from_shape_fn((batch, 2), |(i, j)| {
                    if j == 0 {
                        sequences[i][t].0
                    } else {
                        sequences[i][t].1
                    }
                })
            })
            .collect();

        let mut cache = Cache {
            steps: Vec::with_capacity(self.shape.layers),
        };
        let mut layer_input = inputs;
        for layer in 0..self.shape.layers {
            let (w, u, b) = self.weight_views(layer);
            let mut h_prev = Array2::zeros((batch, h));
            let mut c_prev = Array2::zeros((batch, h));
            let mut steps_cache = Vec::with_capacity(steps);
            let mut next_input = Vec::with_capacity(steps);
            for x in &layer_input {
                let mut z = x.dot(&w.t()) + h_prev.dot(&u.t());
                for mut row in z.rows_mut() {
                    row += &b;
                }
                let gate_i = z.slice(s![.., 0..h]).mapv(sigmoid);
                let gate_f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
                let gate_g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
                let gate_o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
                let c = &gate_f * &c_prev + &gate_i * &gate_g;
                let tanh_c = c.mapv(f64::tanh);
                let h_t = &gate_o * &tanh_c;
                next_input.push(h_t.clone());
                steps_cache.push(StepCache {
                    x: x.clone(),
                    h_prev: h_prev.clone(),
                    c_prev: c_prev.clone(),
                    gate_i,
                    gate_f,
                    gate_g,
                    gate_o,
                    tanh_c,
                });
                h_prev = h_t;
                c_prev = c;
            }
            cache.steps.push(steps_cache);
            layer_input = next_input;
        }
        let h_last = layer_input.last().expect("steps >= 1").clone();
        Ok((h_last, cache))
    }

    /// Writes the model to its JSON form (shape header plus row-major
    /// weight arrays).
    pub fn to_json(&self) -> String {
        let mut layers = Vec::new();
        for layer in 0..self.shape.layers {
            let (w_off, u_off, b_off) = self.shape.layer_offsets(layer);
            layers.push(LayerFile {
                w: self.params[w_off..w_off + self.shape.w_len(layer)].to_vec(),
                u: self.params[u_off..u_off + self.shape.u_len()].to_vec(),
                b: self.params[b_off..b_off + self.shape.b_len()].to_vec(),
            });
        }
        let head = self.shape.head_offset();
        let file = ModelFile {
            input: self.shape.input,
            hidden: self.shape.hidden,
            layers: self.shape.layers,
            side: self.side,
            target_mean: self.target_mean,
            target_std: self.target_std,
            validation_r: self.validation_r,
            weights: layers,
            head_w: self.params[head..head + self.shape.hidden].to_vec(),
            head_b: self.params[head + self.shape.hidden],
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    /// Loads a model, refusing any shape-header mismatch.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("model json: {e}")))?;
        if file.input != 2 {
            return Err(Error::invalid("model input size must be 2"));
        }
        let shape = Shape {
            input: file.input,
            hidden: file.hidden,
            layers: file.layers,
        };
        if file.weights.len() != shape.layers {
            return Err(Error::invalid("layer count does not match weight arrays"));
        }
        let mut params = Vec::with_capacity(shape.total_len());
        for (l, layer) in file.weights.iter().enumerate() {
            if layer.w.len() != shape.w_len(l)
                || layer.u.len() != shape.u_len()
                || layer.b.len() != shape.b_len()
            {
                return Err(Error::invalid(format!(
                    "layer {l} weight array sizes do not match the shape header"
                )));
            }
            params.extend_from_slice(&layer.w);
            params.extend_from_slice(&layer.u);
            params.extend_from_slice(&layer.b);
        }
        if file.head_w.len() != shape.hidden {
            return Err(Error::invalid("head size does not match the shape header"));
        }
        params.extend_from_slice(&file.head_w);
        params.push(file.head_b);
        Ok(LstmModel {
            shape,
            params,
            side: file.side,
            target_mean: file.target_mean,
            target_std: file.target_std,
            validation_r: file.validation_r,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input: usize,
    hidden: usize,
    layers: usize,
    side: f64,
    target_mean: f64,
    target_std: f64,
    validation_r: Option<f64>,
    weights: Vec<LayerFile>,
    head_w: Vec<f64>,
    head_b: f64,
}

struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    gate_i: Array2<f64>,
    gate_f: Array2<f64>,
    gate_g: Array2<f64>,
    gate_o: Array2<f64>,
    tanh_c: Array2<f64>,
}

struct Cache {
    steps: Vec<Vec<StepCache>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean-squared-error loss and the full BPTT gradient, flat like the
/// parameters.
#[derive(Debug, Clone)]
pub struct LossAndGrads {
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// Loss and gradients of one minibatch of standardized targets.
pub fn loss_and_grads(
    model: &LstmModel,
    sequences: &[Vec<(f64, f64)>],
    targets_std: &[f64],
) -> Result<LossAndGrads> {
    if sequences.len() != targets_std.len() {
        return Err(Error::invalid("batch/target length mismatch"));
    }
    let batch = sequences.len();
    let h = model.shape.hidden;
    let steps = sequences[0].len();
    let (h_last, cache) = model.forward_cached(sequences)?;
    let (head_w, head_b) = model.head_views();

    let y = h_last.dot(&head_w) + head_b;
    let t = Array1::from_vec(targets_std.to_vec());
    let err = &y - &t;
    let loss = err.iter().map(|e| e * e).sum::<f64>() / batch as f64;

    let mut grads = vec![0.0; model.params.len()];
    let dy = err.mapv(|e| 2.0 * e / batch as f64);

    {
        let head = model.shape.head_offset();
        let ghead_w = h_last.t().dot(&dy);
        grads[head..head + h].copy_from_slice(ghead_w.as_slice().expect("contiguous"));
        grads[head + h] = dy.sum();
    }

    // dh arriving at each timestep of the layer being processed; the top
    // layer only receives head gradient at the final step
    let mut dh_from_above: Vec<Array2<f64>> = (0..steps)
        .map(|t| {
            if t == steps - 1 {
                let mut d = Array2::zeros((batch, h));
                for (i, &dyi) in dy.iter().enumerate() {
                    for (j, &wj) in head_w.iter().enumerate() {
                        d[(i, j)] = dyi * wj;
                    }
                }
                d
            } else {
                Array2::zeros((batch, h))
            }
        })
        .collect();

    for layer in (0..model.shape.layers).rev() {
        let (w, u, _) = model.weight_views(layer);
        let in_l = model.shape.layer_input(layer);
        let (w_off, u_off, b_off) = model.shape.layer_offsets(layer);

        let mut gw = Array2::<f64>::zeros((4 * h, in_l));
        let mut gu = Array2::<f64>::zeros((4 * h, h));
        let mut gb = Array1::<f64>::zeros(4 * h);

        let mut dh_carry = Array2::<f64>::zeros((batch, h));
        let mut dc_carry = Array2::<f64>::zeros((batch, h));
        let mut dx_below: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); steps];

        for t in (0..steps).rev() {
            let cache_t = &cache.steps[layer][t];
            let dh = &dh_from_above[t] + &dh_carry;
            let d_o = &dh * &cache_t.tanh_c;
            let dc = &dh * &cache_t.gate_o * cache_t.tanh_c.mapv(|v| 1.0 - v * v) + &dc_carry;
            let d_i = &dc * &cache_t.gate_g;
            let d_g = &dc * &cache_t.gate_i;
            let d_f = &dc * &cache_t.c_prev;
            dc_carry = &dc * &cache_t.gate_f;

            let mut dz = Array2::<f64>::zeros((batch, 4 * h));
            dz.slice_mut(s![.., 0..h])
                .assign(&(&d_i * &cache_t.gate_i * cache_t.gate_i.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., h..2 * h])
                .assign(&(&d_f * &cache_t.gate_f * cache_t.gate_f.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., 2 * h..3 * h])
                .assign(&(&d_g * cache_t.gate_g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * h..4 * h])
                .assign(&(&d_o * &cache_t.gate_o * cache_t.gate_o.mapv(|v| 1.0 - v)));

            gw += &dz.t().dot(&cache_t.x);
            gu += &dz.t().dot(&cache_t.h_prev);
            gb += &dz.sum_axis(Axis(0));
            dh_carry = dz.dot(&u);
            if layer > 0 {
                dx_below[t] = dz.dot(&w);
            }
        }

        write_block(&mut grads[w_off..w_off + model.shape.w_len(layer)], &gw);
        write_block(&mut grads[u_off..u_off + model.shape.u_len()], &gu);
        grads[b_off..b_off + model.shape.b_len()]
            .copy_from_slice(gb.as_slice().expect("contiguous"));
        if layer > 0 {
            dh_from_above = dx_below;
        }
    }

    Ok(LossAndGrads { loss, grads })
}

fn write_block(dst: &mut [f64], src: &Array2<f64>) {
    dst.copy_from_slice(src.as_slice().expect("row-major contiguous"));
}

/// Denormalized watt prediction for an ordered list of raw meter positions.
pub fn lstm_forward(model: &LstmModel, positions: &[Point]) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::invalid("surrogate input must hold at least one position"));
    }
    let seq: Vec<(f64, f64)> = positions
        .iter()
        .map(|p| (p.x / model.side, p.y / model.side))
        .collect();
    let std_out = model.forward_batch_std(std::slice::from_ref(&seq))?[0];
    Ok(std_out * model.target_std + model.target_mean)
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LstmModel,
    /// Per-epoch mean training MSE in standardized units.
    pub loss_trace: Vec<f64>,
    pub val_mse: Option<f64>,
    pub val_r: Option<f64>,
}

/// Trains on `train_set` (equal-length sequences) with adaptive-moment
/// gradient descent, evaluating `val_set` afterwards.
pub fn train_core(
    train_set: &DataSet,
    val_set: Option<&DataSet>,
    hyper: &HyperParams,
    seed: u64,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !train_set.has_equal_lengths() {
        return Err(Error::invalid(
            "training sequences must share one length; pad pooled sets first",
        ));
    }
    let mut rng = rng::stream(seed, "lstm-train");
    let mut model = LstmModel::init(hyper.layers, hyper.hidden, train_set.side(), &mut rng)?;

    let targets_raw: Vec<f64> = train_set.samples().iter().map(|s| s.target).collect();
    let mean = targets_raw.iter().sum::<f64>() / targets_raw.len() as f64;
    let var = targets_raw.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
        / targets_raw.len() as f64;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    model.target_mean = mean;
    model.target_std = std;

    let sequences: Vec<Vec<(f64, f64)>> = train_set
        .samples()
        .iter()
        .map(|s| s.inputs.clone())
        .collect();
    let targets_std: Vec<f64> = targets_raw.iter().map(|t| (t - mean) / std).collect();

    let minibatch = hyper.minibatch.clamp(1, sequences.len());
    let mut adam_m = vec![0.0; model.params.len()];
    let mut adam_v = vec![0.0; model.params.len()];
    let mut step = 0u32;
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(minibatch) {
            let batch: Vec<Vec<(f64, f64)>> =
                chunk.iter().map(|&i| sequences[i].clone()).collect();
            let batch_targets: Vec<f64> = chunk.iter().map(|&i| targets_std[i]).collect();
            let out = loss_and_grads(&model, &batch, &batch_targets)?;
            if !out.loss.is_finite() {
                return Err(Error::TrainingFailure {
                    epoch,
                    reason: "non-finite loss".into(),
                });
            }
            epoch_loss += out.loss * chunk.len() as f64;

            step += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
            for ((p, g), (m, v)) in model
                .params
                .iter_mut()
                .zip(&out.grads)
                .zip(adam_m.iter_mut().zip(adam_v.iter_mut()))
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= hyper.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            }
        }
        loss_trace.push(epoch_loss / sequences.len() as f64);
    }

    let (val_mse, val_r) = match val_set {
        Some(val) if !val.is_empty() => {
            let mut preds = Vec::with_capacity(val.len());
            let mut targets = Vec::with_capacity(val.len());
            for sample in val.samples() {
                let out = model.forward_batch_std(std::slice::from_ref(&sample.inputs))?[0];
                preds.push(out);
                targets.push((sample.target - mean) / std);
            }
            let mse = preds
                .iter()
                .zip(&targets)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / preds.len() as f64;
            let r = super::pearson_r(&preds, &targets).ok();
            (Some(mse), r)
        }
        _ => (None, None),
    };
    model.validation_r = val_r;
    Ok(TrainOutcome {
        model,
        loss_trace,
        val_mse,
        val_r,
    })
}

/// Trains with a deterministic 80/20 holdout split; the model carries the
/// held-out Pearson R. Returns the model and the per-epoch loss trace.
pub fn train(dataset: &DataSet, hyper: &HyperParams, seed: u64) -> Result<(LstmModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng::stream(seed, "train-split"));
    let val_len = if dataset.len() >= 10 {
        dataset.len() / 5
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(val_len);
    debug_assert!(val_idx.iter().all(|i| !train_idx.contains(i)));
    let train_set = dataset.subset(train_idx);
    let val_set = dataset.subset(val_idx);
    let outcome = train_core(
        &train_set,
        if val_len > 0 { Some(&val_set) } else { None },
        hyper,
        seed,
    )?;
    Ok((outcome.model, outcome.loss_trace))
}
