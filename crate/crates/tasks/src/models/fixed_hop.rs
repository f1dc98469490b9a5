//! Fixed-hop chain: `k` relation sets, each a linear projection of the
//! pooled question, followed in sequence from the question entity.

use kbfollow::TypedKb;
use kbfollow_grad::{Embedding, Linear, ModelParams, Tape, Var};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bag_of_words, start_rows, Backend, QaModel};
use crate::data::{Example, Vocab};
use crate::error::{Result, TaskError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedHopConfig {
    pub embed_dim: usize,
    pub hops: usize,
    pub shards: usize,
    pub seed: u64,
}

impl Default for FixedHopConfig {
    fn default() -> Self {
        FixedHopConfig {
            embed_dim: 32,
            hops: 1,
            shards: 1,
            seed: 0,
        }
    }
}

pub struct FixedHopModel {
    params: ModelParams,
    vocab: Vocab,
    kb: TypedKb,
    backend: Backend,
    embed: Embedding,
    steps: Vec<Linear>,
}

impl FixedHopModel {
    pub fn new(kb: TypedKb, vocab: Vocab, cfg: &FixedHopConfig) -> Result<Self> {
        if !(1..=3).contains(&cfg.hops) {
            return Err(TaskError::Config(format!("hops must be 1, 2 or 3, got {}", cfg.hops)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ModelParams::new();
        let embed = Embedding::new(&mut params, "embed", vocab.len(), cfg.embed_dim, &mut rng)?;
        let steps = (1..=cfg.hops)
            .map(|t| Linear::new(&mut params, &format!("f_{t}"), cfg.embed_dim, kb.n_relations(), &mut rng))
            .collect::<Result<_, _>>()?;
        let backend = Backend::new(&kb, cfg.shards)?;
        Ok(FixedHopModel {
            params,
            vocab,
            kb,
            backend,
            embed,
            steps,
        })
    }

    pub fn steps(&self) -> &[Linear] {
        &self.steps
    }

    /// Scores for `batch` starting from an arbitrary weighted entity set `x`
    /// instead of each example's start entity.
    pub fn scores_from<'a>(&'a self, tape: &mut Tape<'a>, x: Array2<f64>, batch: &[&Example]) -> Result<Var> {
        let engine = self.backend.engine();
        let q = bag_of_words(tape, &self.params, &self.embed, &self.vocab, batch)?;
        let mut x = tape.constant(x);
        for f in &self.steps {
            let r = f.forward(tape, &self.params, q)?;
            x = tape.follow(engine, x, r)?;
        }
        Ok(x)
    }
}

impl QaModel for FixedHopModel {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn kb(&self) -> &TypedKb {
        &self.kb
    }

    fn scores<'a>(&'a self, tape: &mut Tape<'a>, batch: &[&Example]) -> Result<Var> {
        let x = start_rows(&self.kb, batch)?;
        self.scores_from(tape, x, batch)
    }
}
