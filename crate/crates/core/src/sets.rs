//! Weighted sets encoded as dense non-negative vectors.

use ndarray::{Array2, ArrayView1};

use crate::error::{KbError, Result};
use crate::kb::{TypeId, TypedKb};

/// Dense encoding of a weighted set over the entities of one type. A set of
/// relations is the same thing over a relation-group type.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySetVec {
    pub ty: TypeId,
    pub values: Vec<f64>,
}

pub type RelSetVec = EntitySetVec;

impl EntitySetVec {
    pub fn zeros(kb: &TypedKb, ty: TypeId) -> Self {
        EntitySetVec {
            ty,
            values: vec![0.0; kb.type_size(ty)],
        }
    }

    pub fn support(&self) -> Vec<usize> {
        support(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Indices with a nonzero value.
pub fn support(values: impl IntoIterator<Item = f64>) -> Vec<usize> {
    values
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Row-stacked minibatch of set vectors of one type.
#[derive(Debug, Clone, PartialEq)]
pub struct SetBatch {
    pub ty: TypeId,
    pub rows: Array2<f64>,
}

impl SetBatch {
    pub fn from_sets(sets: &[EntitySetVec]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| KbError::dims("cannot batch zero set vectors"))?;
        let n = first.values.len();
        let mut rows = Array2::zeros((sets.len(), n));
        for (b, s) in sets.iter().enumerate() {
            if s.ty != first.ty || s.values.len() != n {
                return Err(KbError::TypeMismatch("batched sets must share one type".into()));
            }
            rows.row_mut(b).assign(&ArrayView1::from(&s.values));
        }
        Ok(SetBatch { ty: first.ty, rows })
    }

    pub fn batch_size(&self) -> usize {
        self.rows.nrows()
    }

    pub fn row(&self, b: usize) -> EntitySetVec {
        EntitySetVec {
            ty: self.ty,
            values: self.rows.row(b).to_vec(),
        }
    }
}

/// Encodes `members` as a set vector of type `ty`. For relation-group types
/// the member names are relation names.
pub fn encode_set(kb: &TypedKb, ty: TypeId, members: &[(&str, f64)]) -> Result<EntitySetVec> {
    let mut v = EntitySetVec::zeros(kb, ty);
    for &(name, w) in members {
        if !w.is_finite() || w < 0.0 {
            return Err(KbError::NegativeWeight {
                name: name.to_string(),
                weight: w,
            });
        }
        let e = kb.entity_in(ty, name)?;
        v.values[e.index] += w;
    }
    Ok(v)
}

/// Encodes a set of relations, inferring the group from the first member.
/// Members from different signature groups are rejected.
pub fn encode_relations(kb: &TypedKb, members: &[(&str, f64)]) -> Result<RelSetVec> {
    let (first, _) = members
        .first()
        .ok_or_else(|| KbError::IncompatibleRelations("empty relation list has no group".into()))?;
    let ty = kb.relation_info(kb.relation(first)?).entity.ty;
    encode_set(kb, ty, members)
}

/// The `k` largest-weight members, ties broken by ascending index. Zero
/// entries are never returned.
pub fn decode_topk(kb: &TypedKb, v: &EntitySetVec, k: usize) -> Vec<(String, f64)> {
    let names = &kb.entity_type(v.ty).names;
    topk_indices(&v.values, k)
        .into_iter()
        .filter(|&i| v.values[i] != 0.0)
        .map(|i| (names[i].clone(), v.values[i]))
        .collect()
}

/// Indices of the `k` largest values (descending, ties by ascending index).
pub fn topk_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < order.len() {
        order.select_nth_unstable_by(k, cmp);
        order.truncate(k);
    }
    order.sort_by(cmp);
    order
}
