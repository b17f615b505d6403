use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GnnConfig, GnnModel, GraphStructure};
use crate::error::{Error, Result};
use crate::graph::HamiltonianGraph;
use crate::tensor::{Adam, AdamConfig, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-graph MSE over the epoch, measured before each update.
    pub train_mse: f64,
    /// Mean per-graph MSE on the validation graphs after the epoch.
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: GnnConfig,
    pub seed: u64,
    pub initial_train_mse: f64,
    pub initial_val_mse: Option<f64>,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were kept; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_score: f64,
}

fn check_labels(model: &GnnModel, data: &[(HamiltonianGraph, Vec<f64>)]) -> Result<()> {
    match data.iter().find(|(_, l)| l.len() != model.config.out_dim) {
        Some((_, l)) => Err(Error::Shape(format!(
            "label of length {} for a model with {} outputs",
            l.len(),
            model.config.out_dim
        ))),
        None => Ok(()),
    }
}

/// Mean per-graph MSE of the batch `idx` and, when `with_grad`, the
/// gradients in parameter order. All graphs share one output width, so the
/// element-wise MSE over the stacked outputs equals the per-graph mean.
fn batch_loss(
    model: &GnnModel,
    data: &[(HamiltonianGraph, Vec<f64>)],
    idx: &[usize],
    with_grad: bool,
) -> Result<(f64, Vec<Option<Array2<f64>>>)> {
    let graphs: Vec<&HamiltonianGraph> = idx.iter().map(|&i| &data[i].0).collect();
    let s = GraphStructure::batch(&graphs)?;
    let mut target = Vec::with_capacity(idx.len() * model.config.out_dim);
    for &i in idx {
        target.extend_from_slice(&data[i].1);
    }
    let mut pass = model.forward(&graphs, &s)?;
    let target = Array2::from_shape_vec((idx.len(), model.config.out_dim), target).expect("labels");
    let target = pass.tape.constant(target);
    let loss = pass.tape.mse(pass.output, target)?;
    let value = pass.tape.value(loss)[(0, 0)];
    if !with_grad {
        return Ok((value, Vec::new()));
    }
    let mut grads = pass.tape.backward(loss)?;
    Ok((value, pass.param_vars().iter().map(|&v| grads.take(v)).collect()))
}

fn mean_loss(model: &GnnModel, data: &[(HamiltonianGraph, Vec<f64>)], chunk: usize) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for batch in idx.chunks(chunk) {
        total += batch_loss(model, data, batch, false)?.0 * batch.len() as f64;
    }
    Ok(Some(total / data.len() as f64))
}

fn snapshot(model: &GnnModel) -> Vec<Tensor> {
    model.named_params().into_iter().map(|(_, t)| t.clone()).collect()
}

fn restore(model: &mut GnnModel, saved: Vec<Tensor>) {
    for (slot, t) in model.params_mut().into_iter().zip(saved) {
        *slot = t;
    }
}

/// Minimizes the mean per-graph MSE with Adam over `model.config.epochs`
/// epochs of shuffled mini-batches, then restores the weights with the
/// lowest validation MSE (training MSE when `val` is empty).
pub fn train(
    model: &mut GnnModel,
    train_set: &[(HamiltonianGraph, Vec<f64>)],
    val_set: &[(HamiltonianGraph, Vec<f64>)],
) -> Result<TrainReport> {
    model.config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Size("training set is empty".into()));
    }
    let cfg = model.config.clone();
    check_labels(model, train_set)?;
    check_labels(model, val_set)?;
    let initial_train = mean_loss(model, train_set, cfg.batch_size)?.expect("non-empty");
    let initial_val = mean_loss(model, val_set, cfg.batch_size)?;
    if !initial_train.is_finite() {
        return Err(Error::Divergence { step: 0, loss: initial_train });
    }
    let score = |train: f64, val: Option<f64>| val.unwrap_or(train);
    let mut best = (0, score(initial_train, initial_val), snapshot(model));

    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_loss(model, train_set, batch, true)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step: epoch, loss });
            }
            epoch_total += loss * batch.len() as f64;
            let mut params = model.params_mut();
            for (p, g) in params.iter_mut().zip(grads) {
                p.zero_grad();
                let g = g.unwrap_or_else(|| {
                    let [r, c] = p.shape();
                    Array2::zeros((r, c))
                });
                p.accumulate_grad(&g)?;
            }
            adam.step(&mut params)?;
        }
        let train_mse = epoch_total / train_set.len() as f64;
        if !train_mse.is_finite() {
            return Err(Error::Divergence { step: epoch, loss: train_mse });
        }
        let val_mse = mean_loss(model, val_set, cfg.batch_size)?;
        let s = score(train_mse, val_mse);
        log::debug!("epoch {epoch}: train {train_mse:.6e} val {val_mse:?}");
        if s < best.1 {
            best = (epoch, s, snapshot(model));
        }
        epochs.push(EpochLog { epoch, train_mse, val_mse });
    }

    let (best_epoch, best_score, weights) = best;
    restore(model, weights);
    model.params_mut().into_iter().for_each(Tensor::zero_grad);
    Ok(TrainReport {
        config: cfg.clone(),
        seed: cfg.seed,
        initial_train_mse: initial_train,
        initial_val_mse: initial_val,
        epochs,
        best_epoch,
        best_score,
    })
}
