use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cnn::{CnnModel, CnnParams};
use super::Example;
use crate::error::{domain, Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { adam: AdamConfig::default(), batch_size: 16, max_epochs: 100, patience: 10, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let ok = a.lr > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0
            && self.batch_size > 0
            && self.patience > 0;
        if !ok {
            return Err(domain("training hyperparameters must be positive (betas in [0, 1))"));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    cfg: AdamConfig,
    m: CnnParams<T>,
    v: CnnParams<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, like: &CnnParams<T>) -> Self {
        let mut zeros = like.clone();
        for block in zeros.blocks_mut() {
            block.iter_mut().for_each(|v| *v = T::zero());
        }
        Self { cfg, m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn step(&mut self, params: &mut CnnParams<T>, grads: &CnnParams<T>) {
        self.t += 1;
        let b1 = T::of(self.cfg.beta1);
        let b2 = T::of(self.cfg.beta2);
        let one = T::one();
        let c1 = one - T::of(self.cfg.beta1.powi(self.t));
        let c2 = one - T::of(self.cfg.beta2.powi(self.t));
        let lr = T::of(self.cfg.lr);
        let eps = T::of(self.cfg.eps);
        let blocks = params.blocks_mut().into_iter().zip(grads.blocks()).zip(self.m.blocks_mut()).zip(self.v.blocks_mut());
        for (((p, g), m), v) in blocks {
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were returned; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

fn evaluate<T: Real>(model: &CnnModel<T>, set: &[Example<T>]) -> Result<(f64, f64)> {
    let refs: Vec<&Example<T>> = set.iter().collect();
    let loss = model.loss(&refs)?.as_f64();
    let mut correct = 0;
    for ex in set {
        if model.predict(&ex.input)? == ex.label {
            correct += 1;
        }
    }
    Ok((loss, correct as f64 / set.len() as f64))
}

/// Mini-batch Adam training with early stopping on validation accuracy.
///
/// Returns the snapshot with the best validation accuracy (lower validation
/// loss breaks ties) and the per-epoch history.
pub fn cnn_train<T: Real>(
    model: &CnnModel<T>,
    train: &[Example<T>],
    val: &[Example<T>],
    cfg: &TrainConfig,
) -> Result<(CnnModel<T>, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(domain("training and validation splits must be nonempty"));
    }
    let mut current = model.clone();
    current.train_config = Some(*cfg);
    let mut history = TrainHistory::default();
    if cfg.max_epochs == 0 {
        return Ok((current, history));
    }

    let mut adam = Adam::new(cfg.adam, &current.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, f64, CnnModel<T>)> = None;
    let mut best_acc = f64::NEG_INFINITY;
    let mut since_improvement = 0;

    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = current.loss_and_grads(&batch)?;
            let loss = loss.as_f64();
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut current.params, &grads);
        }
        let (_, train_accuracy) = evaluate(&current, train)?;
        let (val_loss, val_accuracy) = evaluate(&current, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        history.epochs.push(EpochStats { epoch, train_loss: loss_sum / train.len() as f64, train_accuracy, val_loss, val_accuracy });

        let better = match &best {
            None => true,
            Some((acc, loss, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if better {
            best = Some((val_accuracy, val_loss, current.clone()));
            history.best_epoch = Some(epoch);
        }
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= cfg.patience {
                break;
            }
        }
    }
    let (_, _, model) = best.expect("at least one epoch ran");
    Ok((model, history))
}
