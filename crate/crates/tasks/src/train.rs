//! Minibatch training with Adam on cross-entropy against the uniform answer
//! distribution, and Hits@k evaluation.

use kbfollow::sets::topk_indices;
use kbfollow_grad::{adam_step, Adam, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Result, TaskError};
use crate::models::{answer_targets, QaModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 10,
            lr: 1e-3,
            clip: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(TaskError::Config(
                "epochs and batch_size must be positive and lr > 0".into(),
            ));
        }
        if matches!(self.clip, Some(c) if !(c > 0.0)) {
            return Err(TaskError::Config("clip must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hits {
    pub hits1: f64,
    pub hits10: f64,
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub hits1: f64,
    pub hits10: f64,
}

/// Mean cross-entropy of `batch` without touching gradients.
pub fn batch_loss<M: QaModel + ?Sized>(model: &M, batch: &[&Example]) -> Result<f64> {
    let mut tape = Tape::new();
    let s = model.scores(&mut tape, batch)?;
    let (loss, _) = tape.softmax_xent(s, answer_targets(model.kb(), batch)?)?;
    Ok(tape.scalar(loss))
}

/// Mean cross-entropy of `batch`; adds its gradient to the parameter
/// gradient buffers.
pub fn batch_loss_grad<M: QaModel + ?Sized>(model: &mut M, batch: &[&Example]) -> Result<f64> {
    let mut tape = Tape::new();
    let s = model.scores(&mut tape, batch)?;
    let (loss, _) = tape.softmax_xent(s, answer_targets(model.kb(), batch)?)?;
    let grads = tape.backward(loss)?;
    let value = tape.scalar(loss);
    let adjoints = tape.into_param_grads(grads);
    let params = model.params_mut();
    for (id, g) in adjoints {
        params.get_mut(id).grad += &g;
    }
    Ok(value)
}

/// Hits@1 and Hits@10; ties rank lower entity indices first.
pub fn evaluate<M: QaModel + ?Sized>(model: &M, data: &[Example], batch_size: usize) -> Result<Hits> {
    let kb = model.kb();
    let (mut h1, mut h10) = (0usize, 0usize);
    for chunk in data.chunks(batch_size.max(1)) {
        let batch: Vec<&Example> = chunk.iter().collect();
        let probs = model.predict(&batch)?;
        for (row, ex) in probs.rows().into_iter().zip(chunk) {
            let answers = ex
                .answers
                .iter()
                .map(|a| Ok(kb.global_index(kb.entity(a)?)))
                .collect::<Result<Vec<_>>>()?;
            let values = row.to_vec();
            let top = topk_indices(&values, 10);
            if top.first().is_some_and(|i| answers.contains(i)) {
                h1 += 1;
            }
            if top.iter().any(|i| answers.contains(i)) {
                h10 += 1;
            }
        }
    }
    let n = data.len().max(1) as f64;
    Ok(Hits {
        hits1: h1 as f64 / n,
        hits10: h10 as f64 / n,
    })
}

/// Trains for `cfg.epochs`, reporting each epoch's mean training loss and
/// the metrics on `eval` (or on the training data when `eval` is `None`).
pub fn train<M: QaModel + ?Sized>(
    model: &mut M,
    data: &[Example],
    eval: Option<&[Example]>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TaskError::Config("empty training set".into()));
    }
    let adam = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = idx.iter().map(|&i| &data[i]).collect();
            model.params_mut().zero_grad();
            total += batch_loss_grad(model, &batch)? * batch.len() as f64;
            if let Some(c) = cfg.clip {
                model.params_mut().clip_grad_norm(c);
            }
            adam_step(model.params_mut(), &adam);
        }
        let hits = evaluate(model, eval.unwrap_or(data), 100)?;
        let log = EpochLog {
            epoch,
            loss: total / data.len() as f64,
            hits1: hits.hits1,
            hits10: hits.hits10,
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}
