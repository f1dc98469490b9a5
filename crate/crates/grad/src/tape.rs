//! Reverse-mode tape over dense row-major matrices.
//!
//! Nodes are appended in evaluation order, so inputs always precede their
//! consumers. `backward` walks the tape once in reverse and accumulates
//! adjoints additively.

use std::collections::HashMap;
use std::ops::Range;

use kbfollow::FollowEngine;
use ndarray::{s, Array2, Axis, Zip};

use crate::error::{shape_err, GradError, Result};
use crate::follow_grad::follow_backward;
use crate::params::{ModelParams, ParamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<'a> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Sum(Var),
    SoftmaxXent { logits: Var, probs: Array2<f64>, target: Array2<f64> },
    Embed { table: Var, ids: Vec<usize> },
    MeanPool { input: Var, segments: Vec<Range<usize>> },
    Concat(Vec<Var>),
    Slice(Var, Range<usize>),
    Select { mask: Vec<bool>, on: Var, off: Var },
    Follow { x: Var, r: Var, engine: FollowEngine<'a> },
}

struct Node<'a> {
    value: Array2<f64>,
    op: Op<'a>,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<ParamId, Var>,
}

/// Adjoints of every node after a backward pass.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn same_dim(op: &'static str, a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(shape_err(op, format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op<'a>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// The parameter as a leaf; repeated calls return the same node.
    pub fn param(&mut self, params: &ModelParams, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let value = params.value(id).mapv(f64::from);
        let v = self.push(value, Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", av.dim(), bv.dim())));
        }
        let out = av.dot(bv);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_dim("add", self.value(a), self.value(b))?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_dim("sub", self.value(a), self.value(b))?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.nrows() != 1 || rv.ncols() != av.ncols() {
            return Err(shape_err("add_row", format!("{:?} + {:?}", av.dim(), rv.dim())));
        }
        let out = av + rv;
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_dim("mul", self.value(a), self.value(b))?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Multiplies row `i` of `a` by `scale[i, 0]`.
    pub fn scale_rows(&mut self, a: Var, scale: Var) -> Result<Var> {
        let (av, sv) = (self.value(a), self.value(scale));
        if sv.dim() != (av.nrows(), 1) {
            return Err(shape_err("scale_rows", format!("{:?} by {:?}", av.dim(), sv.dim())));
        }
        let out = av * sv;
        Ok(self.push(out, Op::ScaleRows(a, scale)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| 1.0 - v);
        self.push(out, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::Softmax(a))
    }

    /// Sum of all elements as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Fused softmax + cross-entropy averaged over rows. `target` rows are
    /// distributions. Returns the loss node and the softmax probabilities.
    pub fn softmax_xent(&mut self, logits: Var, target: Array2<f64>) -> Result<(Var, Array2<f64>)> {
        let lv = self.value(logits);
        if lv.dim() != target.dim() {
            return Err(shape_err("softmax_xent", format!("{:?} vs {:?}", lv.dim(), target.dim())));
        }
        let logp = log_softmax_rows(lv);
        let b = lv.nrows().max(1) as f64;
        let loss = -(&logp * &target).sum() / b;
        let probs = logp.mapv(f64::exp);
        let var = self.push(
            Array2::from_elem((1, 1), loss),
            Op::SoftmaxXent {
                logits,
                probs: probs.clone(),
                target,
            },
        );
        Ok((var, probs))
    }

    /// Rows of `table` selected by `ids`.
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= tv.nrows()) {
            return Err(shape_err("embed", format!("id {bad} outside table of {} rows", tv.nrows())));
        }
        let out = tv.select(Axis(0), ids);
        Ok(self.push(
            out,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Mean of the rows in each segment; an empty segment yields zeros.
    pub fn mean_pool(&mut self, input: Var, segments: &[Range<usize>]) -> Result<Var> {
        let iv = self.value(input);
        if let Some(bad) = segments.iter().find(|s| s.end > iv.nrows()) {
            return Err(shape_err("mean_pool", format!("segment {bad:?} outside {} rows", iv.nrows())));
        }
        let mut out = Array2::zeros((segments.len(), iv.ncols()));
        for (mut o, seg) in out.rows_mut().into_iter().zip(segments) {
            if !seg.is_empty() {
                let rows = iv.slice(s![seg.clone(), ..]);
                o.assign(&rows.mean_axis(Axis(0)).expect("non-empty"));
            }
        }
        Ok(self.push(
            out,
            Op::MeanPool {
                input,
                segments: segments.to_vec(),
            },
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.value(p).nrows());
        if parts.iter().any(|&p| self.value(p).nrows() != rows) {
            return Err(shape_err("concat_cols", "row counts differ"));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).map_err(|e| shape_err("concat_cols", e.to_string()))?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, cols: Range<usize>) -> Result<Var> {
        let av = self.value(a);
        if cols.end > av.ncols() || cols.start > cols.end {
            return Err(shape_err("slice_cols", format!("{cols:?} of {} columns", av.ncols())));
        }
        let out = av.slice(s![.., cols.clone()]).to_owned();
        Ok(self.push(out, Op::Slice(a, cols)))
    }

    /// Row `i` comes from `on` where `mask[i]`, otherwise from `off`.
    pub fn select_rows(&mut self, mask: &[bool], on: Var, off: Var) -> Result<Var> {
        same_dim("select_rows", self.value(on), self.value(off))?;
        if mask.len() != self.value(on).nrows() {
            return Err(shape_err("select_rows", "mask length differs from row count"));
        }
        let mut out = self.value(off).clone();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                out.row_mut(i).assign(&self.value(on).row(i));
            }
        }
        Ok(self.push(
            out,
            Op::Select {
                mask: mask.to_vec(),
                on,
                off,
            },
        ))
    }

    /// Relation-set following as a differentiable node.
    pub fn follow(&mut self, engine: FollowEngine<'a>, x: Var, r: Var) -> Result<Var> {
        let out = engine.follow(self.value(x).view(), self.value(r).view())?;
        Ok(self.push(out, Op::Follow { x, r, engine }))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.dim() != (1, 1) {
            return Err(GradError::NonScalarLoss(lv.nrows(), lv.ncols()));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -&g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b));
                    acc(&mut grads, *b, &g * self.value(*a));
                }
                Op::ScaleRows(a, scale) => {
                    let ds = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *a, &g * self.value(*scale));
                    acc(&mut grads, *scale, ds);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, &g * *c),
                Op::OneMinus(a) => acc(&mut grads, *a, -&g),
                Op::Sigmoid(a) => {
                    let d = Zip::from(&g).and(&node.value).map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = Zip::from(&g).and(&node.value).map_collect(|&g, &y| g * (1.0 - y * y));
                    acc(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *a, y * &(&g - &dot));
                }
                Op::Sum(a) => {
                    let dim = self.value(*a).dim();
                    acc(&mut grads, *a, Array2::from_elem(dim, g[[0, 0]]));
                }
                Op::SoftmaxXent { logits, probs, target } => {
                    let b = probs.nrows().max(1) as f64;
                    let mass = target.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let d = (probs * &mass - target) * (g[[0, 0]] / b);
                    acc(&mut grads, *logits, d);
                }
                Op::Embed { table, ids } => {
                    let mut d = Array2::zeros(self.value(*table).dim());
                    for (row, &id) in g.rows().into_iter().zip(ids) {
                        let mut dst = d.row_mut(id);
                        dst += &row;
                    }
                    acc(&mut grads, *table, d);
                }
                Op::MeanPool { input, segments } => {
                    let mut d = Array2::zeros(self.value(*input).dim());
                    for (grow, seg) in g.rows().into_iter().zip(segments) {
                        let n = seg.len() as f64;
                        for i in seg.clone() {
                            d.row_mut(i).scaled_add(1.0 / n, &grow);
                        }
                    }
                    acc(&mut grads, *input, d);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::Slice(a, cols) => {
                    let mut d = Array2::zeros(self.value(*a).dim());
                    d.slice_mut(s![.., cols.clone()]).assign(&g);
                    acc(&mut grads, *a, d);
                }
                Op::Select { mask, on, off } => {
                    let mut d_on = Array2::zeros(g.dim());
                    let mut d_off = g.clone();
                    for (i, &m) in mask.iter().enumerate() {
                        if m {
                            d_on.row_mut(i).assign(&g.row(i));
                            d_off.row_mut(i).fill(0.0);
                        }
                    }
                    acc(&mut grads, *on, d_on);
                    acc(&mut grads, *off, d_off);
                }
                Op::Follow { x, r, engine } => {
                    let (dx, dr) = follow_backward(engine, self.value(*x).view(), self.value(*r).view(), g.view())?;
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *r, dr);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Consumes the tape and returns the adjoint of every parameter leaf,
    /// releasing whatever the tape borrowed.
    pub fn into_param_grads(self, mut grads: Gradients) -> Vec<(ParamId, Array2<f64>)> {
        let mut out: Vec<_> = self
            .params
            .into_iter()
            .filter_map(|(id, v)| grads.grads[v.0].take().map(|g| (id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }

    /// Adds the adjoints of every parameter leaf into the parameter
    /// gradient buffers.
    pub fn accumulate_param_grads(&self, grads: &Gradients, params: &mut ModelParams) {
        for (&id, &v) in &self.params {
            if let Some(g) = grads.get(v) {
                params.get_mut(id).grad += g;
            }
        }
    }
}
