//! KB completion as a disjunction of N residual chains of T steps. The query
//! relation is looked up in an embedding table; every chain step projects
//! that embedding to a relation set.

use kbfollow::TypedKb;
use kbfollow_grad::{Embedding, Linear, ModelParams, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{start_rows, Backend, QaModel};
use crate::data::{Example, Vocab};
use crate::error::{Result, TaskError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KbcConfig {
    pub embed_dim: usize,
    /// Number of chains N.
    pub chains: usize,
    /// Steps per chain T.
    pub steps: usize,
    pub shards: usize,
    pub seed: u64,
}

impl Default for KbcConfig {
    fn default() -> Self {
        KbcConfig {
            embed_dim: 16,
            chains: 1,
            steps: 2,
            shards: 1,
            seed: 0,
        }
    }
}

pub struct KbcModel {
    params: ModelParams,
    queries: Vocab,
    kb: TypedKb,
    backend: Backend,
    embed: Embedding,
    /// `heads[i][t]` produces chain i's relation set at step t.
    heads: Vec<Vec<Linear>>,
}

impl KbcModel {
    /// `queries` lists the query relation names the model answers.
    pub fn new(kb: TypedKb, queries: Vocab, cfg: &KbcConfig) -> Result<Self> {
        if !(1..=3).contains(&cfg.chains) || !(1..=6).contains(&cfg.steps) {
            return Err(TaskError::Config(format!(
                "need 1 <= chains <= 3 and 1 <= steps <= 6, got {} and {}",
                cfg.chains, cfg.steps
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ModelParams::new();
        let embed = Embedding::new(&mut params, "query", queries.len(), cfg.embed_dim, &mut rng)?;
        let mut heads = Vec::with_capacity(cfg.chains);
        for i in 0..cfg.chains {
            let chain = (0..cfg.steps)
                .map(|t| Linear::new(&mut params, &format!("f_{i}_{t}"), cfg.embed_dim, kb.n_relations(), &mut rng))
                .collect::<Result<_, _>>()?;
            heads.push(chain);
        }
        let backend = Backend::new(&kb, cfg.shards)?;
        Ok(KbcModel {
            params,
            queries,
            kb,
            backend,
            embed,
            heads,
        })
    }

    pub fn heads(&self) -> &[Vec<Linear>] {
        &self.heads
    }

    fn query_ids(&self, batch: &[&Example]) -> Result<Vec<usize>> {
        batch
            .iter()
            .map(|ex| {
                let q = ex.tokens.first().map(String::as_str).unwrap_or("");
                self.queries
                    .id(q)
                    .map_err(|_| TaskError::UnknownQueryRelation(q.to_string()))
            })
            .collect()
    }
}

impl QaModel for KbcModel {
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
        let engine = self.backend.engine();
        let ids = self.query_ids(batch)?;
        let q = self.embed.forward(tape, &self.params, &ids)?;
        let x0 = tape.constant(start_rows(&self.kb, batch)?);
        let mut total = None;
        for chain in &self.heads {
            let mut x = x0;
            for f in chain {
                let r = f.forward(tape, &self.params, q)?;
                let y = tape.follow(engine, x, r)?;
                x = tape.add(y, x)?;
            }
            total = Some(match total {
                None => x,
                Some(s) => tape.add(s, x)?,
            });
        }
        Ok(total.expect("at least one chain"))
    }
}
