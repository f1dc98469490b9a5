//! The four architectures. Each produces pre-softmax scores over the global
//! entity space; the answer distribution is their row-wise softmax.

use kbfollow::{partition_reified, reify, FollowEngine, Parallelism, ReifiedKb, ShardedReifiedKb, TypedKb};
use kbfollow_grad::{softmax_rows, Embedding, ModelParams, Tape, Var};
use ndarray::Array2;

use crate::data::{Example, Vocab};
use crate::error::Result;

pub mod chain;
pub mod fixed_hop;
pub mod kbc;
pub mod template;

pub use chain::{stop_mixture, ChainConfig, ChainModel};
pub use fixed_hop::{FixedHopConfig, FixedHopModel};
pub use kbc::{KbcConfig, KbcModel};
pub use template::{TemplateConfig, TemplateModel};

pub trait QaModel {
    fn params(&self) -> &ModelParams;
    fn params_mut(&mut self) -> &mut ModelParams;
    fn kb(&self) -> &TypedKb;
    /// Scores for each example in `batch`, one row per example.
    fn scores<'a>(&'a self, tape: &mut Tape<'a>, batch: &[&Example]) -> Result<Var>;

    /// Answer distributions for `batch`.
    fn predict(&self, batch: &[&Example]) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let s = self.scores(&mut tape, batch)?;
        Ok(softmax_rows(tape.value(s)))
    }
}

/// The reified KB a model follows relations through, optionally split into
/// shards.
#[derive(Debug, Clone)]
pub struct Backend {
    rkb: ReifiedKb,
    sharded: Option<ShardedReifiedKb>,
}

impl Backend {
    pub fn new(kb: &TypedKb, shards: usize) -> Result<Self> {
        let rkb = reify(kb);
        let sharded = if shards > 1 { Some(partition_reified(&rkb, shards)?) } else { None };
        Ok(Backend { rkb, sharded })
    }

    pub fn engine(&self) -> FollowEngine<'_> {
        match &self.sharded {
            Some(s) => FollowEngine::Sharded(s, Parallelism::Sequential),
            None => FollowEngine::Reified(&self.rkb),
        }
    }
}

/// One-hot rows on each example's start entity.
pub fn start_rows(kb: &TypedKb, batch: &[&Example]) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((batch.len(), kb.n_entities()));
    for (i, ex) in batch.iter().enumerate() {
        x[[i, kb.global_index(kb.entity(&ex.start)?)]] = 1.0;
    }
    Ok(x)
}

/// Uniform distribution over each example's answers.
pub fn answer_targets(kb: &TypedKb, batch: &[&Example]) -> Result<Array2<f64>> {
    let mut t = Array2::zeros((batch.len(), kb.n_entities()));
    for (i, ex) in batch.iter().enumerate() {
        let w = 1.0 / ex.answers.len().max(1) as f64;
        for a in &ex.answers {
            t[[i, kb.global_index(kb.entity(a)?)]] += w;
        }
    }
    Ok(t)
}

/// Mean-pooled token embeddings, one row per example.
pub(crate) fn bag_of_words<'a>(
    tape: &mut Tape<'a>,
    params: &ModelParams,
    emb: &Embedding,
    vocab: &Vocab,
    batch: &[&Example],
) -> Result<Var> {
    let mut ids = Vec::new();
    let mut segments = Vec::with_capacity(batch.len());
    for ex in batch {
        let start = ids.len();
        ids.extend(vocab.encode(&ex.tokens)?);
        segments.push(start..ids.len());
    }
    let rows = emb.forward(tape, params, &ids)?;
    Ok(tape.mean_pool(rows, &segments)?)
}
