//! Layers used by the models: affine projection, LSTM cell, embedding table.

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::params::{glorot_bound, ModelParams, ParamId};
use crate::tape::{Tape, Var};

/// `y = x W + b` with `W` of shape `in x out` and `b` of shape `1 x out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng>(params: &mut ModelParams, name: &str, n_in: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        let weight = params.add_uniform(format!("{name}.w"), (n_in, n_out), glorot_bound(n_in, n_out), rng)?;
        let bias = params.add_zeros(format!("{name}.b"), (1, n_out))?;
        Ok(Linear { weight, bias, n_in, n_out })
    }

    pub fn forward<'a>(&self, tape: &mut Tape<'a>, params: &ModelParams, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

/// Standard LSTM cell. Gate columns are ordered input, forget, candidate,
/// output; the weight acts on `[x, h]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_in: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(params: &mut ModelParams, name: &str, n_in: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let weight = params.add_uniform(format!("{name}.w"), (n_in + hidden, 4 * hidden), 0.1, rng)?;
        let bias = params.add_zeros(format!("{name}.b"), (1, 4 * hidden))?;
        Ok(LstmCell { weight, bias, n_in, hidden })
    }

    /// Zero state for a batch of `b` rows.
    pub fn zero_state<'a>(&self, tape: &mut Tape<'a>, b: usize) -> LstmState {
        let h = tape.constant(Array2::zeros((b, self.hidden)));
        let c = tape.constant(Array2::zeros((b, self.hidden)));
        LstmState { h, c }
    }

    pub fn forward<'a>(&self, tape: &mut Tape<'a>, params: &ModelParams, x: Var, state: LstmState) -> Result<LstmState> {
        let hd = self.hidden;
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let xh = tape.concat_cols(&[x, state.h])?;
        let pre = tape.matmul(xh, w)?;
        let pre = tape.add_row(pre, b)?;
        let i = tape.slice_cols(pre, 0..hd)?;
        let f = tape.slice_cols(pre, hd..2 * hd)?;
        let g = tape.slice_cols(pre, 2 * hd..3 * hd)?;
        let o = tape.slice_cols(pre, 3 * hd..4 * hd)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, state.c)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok(LstmState { h, c })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(params: &mut ModelParams, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let table = params.add_uniform(format!("{name}.table"), (vocab, dim), 0.1, rng)?;
        Ok(Embedding { table, vocab, dim })
    }

    pub fn forward<'a>(&self, tape: &mut Tape<'a>, params: &ModelParams, ids: &[usize]) -> Result<Var> {
        let t = tape.param(params, self.table);
        tape.embed(t, ids)
    }
}
