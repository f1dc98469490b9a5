//! Encoder-decoder for varying-length chains. An LSTM encodes the question;
//! a decoder LSTM emits at each step a stop probability and a distribution
//! over relations, and the answer mixes every intermediate entity set by
//! the probability of stopping there.

use kbfollow::TypedKb;
use kbfollow_grad::{Embedding, Linear, LstmCell, LstmState, ModelParams, Tape, Var};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, QaModel};
use crate::data::{Example, Vocab};
use crate::error::{Result, TaskError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    /// Maximum chain length T.
    pub max_hops: usize,
    /// Initial bias of the stop gate.
    pub stop_bias: f64,
    /// Normalize each r^t with a softmax instead of using the raw projection.
    pub softmax_relations: bool,
    pub shards: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            embed_dim: 32,
            hidden: 64,
            max_hops: 10,
            stop_bias: 0.0,
            softmax_relations: false,
            shards: 1,
            seed: 0,
        }
    }
}

pub struct ChainModel {
    params: ModelParams,
    vocab: Vocab,
    kb: TypedKb,
    backend: Backend,
    embed: Embedding,
    encoder: LstmCell,
    decoder: LstmCell,
    f_start: Linear,
    f_rel: Linear,
    f_stop: Linear,
    max_hops: usize,
    softmax_relations: bool,
}

/// Mixture weights `p_t * prod_{t' < t} (1 - p_t')` for t = 1..=T.
pub fn stop_mixture(p: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    p.iter()
        .map(|&p| {
            let w = p * remaining;
            remaining *= 1.0 - p;
            w
        })
        .collect()
}

/// Intermediate values of one forward pass, for inspection.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    /// Entity sets x^0..=x^T.
    pub sets: Vec<Array2<f64>>,
    /// Relation vectors r^1..=r^T.
    pub relations: Vec<Array2<f64>>,
    /// Stop probabilities p^1..=p^T.
    pub stops: Vec<Array2<f64>>,
    /// Mixture weights for x^1..=x^T.
    pub weights: Vec<Array2<f64>>,
}

impl ChainModel {
    pub fn new(kb: TypedKb, vocab: Vocab, cfg: &ChainConfig) -> Result<Self> {
        if cfg.max_hops == 0 || cfg.hidden == 0 || cfg.embed_dim == 0 {
            return Err(TaskError::Config("chain model sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ModelParams::new();
        let (e, h) = (cfg.embed_dim, cfg.hidden);
        let embed = Embedding::new(&mut params, "embed", vocab.len(), e, &mut rng)?;
        let encoder = LstmCell::new(&mut params, "encoder", e, h, &mut rng)?;
        let decoder = LstmCell::new(&mut params, "decoder", kb.n_relations(), h, &mut rng)?;
        let f_start = Linear::new(&mut params, "f_start", h, kb.n_entities(), &mut rng)?;
        let f_rel = Linear::new(&mut params, "f_rel", h, kb.n_relations(), &mut rng)?;
        let f_stop = Linear::new(&mut params, "f_stop", h, 1, &mut rng)?;
        params.value_mut(f_stop.bias).fill(cfg.stop_bias as f32);
        let backend = Backend::new(&kb, cfg.shards)?;
        Ok(ChainModel {
            params,
            vocab,
            kb,
            backend,
            embed,
            encoder,
            decoder,
            f_start,
            f_rel,
            f_stop,
            max_hops: cfg.max_hops,
            softmax_relations: cfg.softmax_relations,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    pub fn layers(&self) -> (Linear, Linear, Linear) {
        (self.f_start, self.f_rel, self.f_stop)
    }

    fn encode<'a>(&'a self, tape: &mut Tape<'a>, batch: &[&Example]) -> Result<LstmState> {
        let ids: Vec<Vec<usize>> = batch.iter().map(|ex| self.vocab.encode(&ex.tokens)).collect::<Result<_>>()?;
        let longest = ids.iter().map(Vec::len).max().unwrap_or(0);
        let mut state = self.encoder.zero_state(tape, batch.len());
        for s in 0..longest {
            // finished rows keep their state; they read token 0 meanwhile
            let mask: Vec<bool> = ids.iter().map(|t| s < t.len()).collect();
            let step_ids: Vec<usize> = ids.iter().map(|t| t.get(s).copied().unwrap_or(0)).collect();
            let x = self.embed.forward(tape, &self.params, &step_ids)?;
            let next = self.encoder.forward(tape, &self.params, x, state)?;
            if mask.iter().all(|&m| m) {
                state = next;
            } else {
                state = LstmState {
                    h: tape.select_rows(&mask, next.h, state.h)?,
                    c: tape.select_rows(&mask, next.c, state.c)?,
                };
            }
        }
        Ok(state)
    }

    fn run<'a>(&'a self, tape: &mut Tape<'a>, batch: &[&Example], mut trace: Option<&mut ChainTrace>) -> Result<Var> {
        let b = batch.len();
        let engine = self.backend.engine();
        let mut state = self.encode(tape, batch)?;
        let start = self.f_start.forward(tape, &self.params, state.h)?;
        let mut x = tape.softmax(start);
        let mut r_prev = tape.constant(Array2::zeros((b, self.kb.n_relations())));
        let mut remaining = tape.constant(Array2::ones((b, 1)));
        let mut mix = None;
        if let Some(tr) = trace.as_deref_mut() {
            tr.sets.push(tape.value(x).clone());
        }
        for t in 1..=self.max_hops {
            let p = if t == self.max_hops {
                tape.constant(Array2::ones((b, 1)))
            } else {
                let logit = self.f_stop.forward(tape, &self.params, state.h)?;
                tape.sigmoid(logit)
            };
            let rel_logits = self.f_rel.forward(tape, &self.params, state.h)?;
            let r = if self.softmax_relations { tape.softmax(rel_logits) } else { rel_logits };
            state = self.decoder.forward(tape, &self.params, r_prev, state)?;
            x = tape.follow(engine, x, r)?;
            let w = tape.mul(p, remaining)?;
            let term = tape.scale_rows(x, w)?;
            mix = Some(match mix {
                None => term,
                Some(m) => tape.add(m, term)?,
            });
            if let Some(tr) = trace.as_deref_mut() {
                tr.sets.push(tape.value(x).clone());
                tr.relations.push(tape.value(r).clone());
                tr.stops.push(tape.value(p).clone());
                tr.weights.push(tape.value(w).clone());
            }
            let keep = tape.one_minus(p);
            remaining = tape.mul(remaining, keep)?;
            r_prev = r;
        }
        Ok(mix.expect("max_hops >= 1"))
    }

    pub fn trace(&self, batch: &[&Example]) -> Result<ChainTrace> {
        let mut tr = ChainTrace {
            sets: Vec::new(),
            relations: Vec::new(),
            stops: Vec::new(),
            weights: Vec::new(),
        };
        let mut tape = Tape::new();
        self.run(&mut tape, batch, Some(&mut tr))?;
        Ok(tr)
    }
}

impl QaModel for ChainModel {
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
        self.run(tape, batch, None)
    }
}
