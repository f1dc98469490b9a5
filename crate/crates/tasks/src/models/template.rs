//! Two-template QA: a one-hop chain between ordinary entities mixed with a
//! two-hop chain through an event (CVT) node. Relation sets for the three
//! relation groups are linear projections of mean-pooled token embeddings.

use kbfollow::{relation_group_name, TypedKb};
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
pub struct TemplateConfig {
    pub embed_dim: usize,
    /// Type name of ordinary entities.
    pub entity_type: String,
    /// Type name of event nodes.
    pub cvt_type: String,
    pub shards: usize,
    pub seed: u64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            embed_dim: 32,
            entity_type: "ent".into(),
            cvt_type: "cvt".into(),
            shards: 1,
            seed: 0,
        }
    }
}

/// A projection onto one relation group, scattered into the full relation
/// space by a fixed 0/1 matrix.
struct GroupHead {
    proj: Linear,
    scatter: Array2<f64>,
}

impl GroupHead {
    fn new(
        params: &mut ModelParams,
        kb: &TypedKb,
        name: &str,
        (subj, obj): (&str, &str),
        dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let tag = relation_group_name(subj, obj);
        let group = kb.type_id(&tag).map_err(|_| TaskError::MissingGroupTag(tag.clone()))?;
        let rels = kb.group_relations(group)?;
        let mut scatter = Array2::zeros((rels.len(), kb.n_relations()));
        for (k, r) in rels.iter().enumerate() {
            scatter[[k, r.idx()]] = 1.0;
        }
        let proj = Linear::new(params, name, dim, rels.len(), rng)?;
        Ok(GroupHead { proj, scatter })
    }

    fn forward<'a>(&self, tape: &mut Tape<'a>, params: &ModelParams, q: Var) -> Result<Var> {
        let local = self.proj.forward(tape, params, q)?;
        let s = tape.constant(self.scatter.clone());
        Ok(tape.matmul(local, s)?)
    }
}

pub struct TemplateModel {
    params: ModelParams,
    vocab: Vocab,
    kb: TypedKb,
    backend: Backend,
    embed: Embedding,
    one_hop: GroupHead,
    to_cvt: GroupHead,
    from_cvt: GroupHead,
    use_two_hop: bool,
}

impl TemplateModel {
    pub fn new(kb: TypedKb, vocab: Vocab, cfg: &TemplateConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ModelParams::new();
        let d = cfg.embed_dim;
        let (e, c) = (cfg.entity_type.as_str(), cfg.cvt_type.as_str());
        let embed = Embedding::new(&mut params, "embed", vocab.len(), d, &mut rng)?;
        let one_hop = GroupHead::new(&mut params, &kb, "f_e_e", (e, e), d, &mut rng)?;
        let to_cvt = GroupHead::new(&mut params, &kb, "f_e_cvt", (e, c), d, &mut rng)?;
        let from_cvt = GroupHead::new(&mut params, &kb, "f_cvt_e", (c, e), d, &mut rng)?;
        let backend = Backend::new(&kb, cfg.shards)?;
        Ok(TemplateModel {
            params,
            vocab,
            kb,
            backend,
            embed,
            one_hop,
            to_cvt,
            from_cvt,
            use_two_hop: true,
        })
    }

    /// Enables or removes the two-hop template.
    pub fn set_two_hop(&mut self, on: bool) {
        self.use_two_hop = on;
    }

    /// Projection layers for the one-hop, entity-to-event and event-to-entity
    /// relation sets.
    pub fn heads(&self) -> [Linear; 3] {
        [self.one_hop.proj, self.to_cvt.proj, self.from_cvt.proj]
    }

    /// Scores for `batch` starting from an arbitrary weighted entity set `x`
    /// instead of each example's start entity.
    pub fn scores_from<'a>(&'a self, tape: &mut Tape<'a>, x: Array2<f64>, batch: &[&Example]) -> Result<Var> {
        let engine = self.backend.engine();
        let q = bag_of_words(tape, &self.params, &self.embed, &self.vocab, batch)?;
        let x = tape.constant(x);
        let r1 = self.one_hop.forward(tape, &self.params, q)?;
        let one = tape.follow(engine, x, r1)?;
        if !self.use_two_hop {
            return Ok(one);
        }
        let r_in = self.to_cvt.forward(tape, &self.params, q)?;
        let r_out = self.from_cvt.forward(tape, &self.params, q)?;
        let mid = tape.follow(engine, x, r_in)?;
        let two = tape.follow(engine, mid, r_out)?;
        Ok(tape.add(two, one)?)
    }
}

impl QaModel for TemplateModel {
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
