//! Forward relation-set following in three strategies.
//!
//! * naive mixing: build `M_R = sum_k r[k] M_k` per example, then `x M_R`;
//!   single examples only.
//! * late mixing: `sum_k R[:,k] * (X M_k)`, one `X M_k` materialized at a time.
//! * reified KB: `(X M_subj^T . R M_rel^T) M_obj` over the triple index.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{KbError, Result};
use crate::kb::{TypeId, TypedKb};
use crate::meter::Meter;
use crate::sets::{EntitySetVec, RelSetVec, SetBatch};
use crate::shard::{follow_sharded_metered, Parallelism, ShardedReifiedKb};
use crate::sparse::{dense_sparse, dense_sparse_acc, CooMatrix, Transpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Naive,
    Late,
    Reified,
    ReifiedSharded,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Naive,
        Strategy::Late,
        Strategy::Reified,
        Strategy::ReifiedSharded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Late => "late",
            Strategy::Reified => "reified",
            Strategy::ReifiedSharded => "reified-sharded",
        }
    }

    pub fn batched(self) -> bool {
        !matches!(self, Strategy::Naive)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected naive, late, reified or reified-sharded)"))
    }
}

fn mix_entries(
    kb: &TypedKb,
    weights: impl Iterator<Item = (crate::kb::RelationId, f64)>,
    subj_offset: impl Fn(TypeId) -> usize,
    obj_offset: impl Fn(TypeId) -> usize,
) -> Vec<(usize, usize, f64)> {
    let mut entries = Vec::new();
    for (rel, w) in weights {
        if w == 0.0 {
            continue;
        }
        for t in kb.triples_of(rel) {
            entries.push((subj_offset(t.subj.ty) + t.subj.index, obj_offset(t.obj.ty) + t.obj.index, w * t.weight));
        }
    }
    entries
}

/// `M_R = sum_k r[k] * M_k` over the relations of `r`'s group.
pub fn mix_relations(kb: &TypedKb, r: &RelSetVec) -> Result<CooMatrix> {
    let rels = kb.group_relations(r.ty)?;
    if r.values.len() != rels.len() {
        return Err(KbError::dims(format!(
            "relation set has {} entries, group has {} relations",
            r.values.len(),
            rels.len()
        )));
    }
    let (subj, obj) = kb.group_signature(r.ty)?;
    let entries = mix_entries(kb, rels.iter().copied().zip(r.values.iter().copied()), |_| 0, |_| 0);
    CooMatrix::from_summed(kb.type_size(subj), kb.type_size(obj), entries)
}

/// Mixture over all relations in the global `N_E x N_E` entity space.
pub fn mix_relations_global(kb: &TypedKb, r: &[f64]) -> Result<CooMatrix> {
    if r.len() != kb.n_relations() {
        return Err(KbError::dims(format!(
            "relation vector has {} entries, KB has {} relations",
            r.len(),
            kb.n_relations()
        )));
    }
    let weights = kb.relations().map(|(id, _)| id).zip(r.iter().copied());
    let entries = mix_entries(kb, weights, |t| kb.type_offset(t), |t| kb.type_offset(t));
    CooMatrix::from_summed(kb.n_entities(), kb.n_entities(), entries)
}

/// Naive mixing for a single example: `x * M_R`.
pub fn follow_naive(x: &EntitySetVec, r: &RelSetVec, kb: &TypedKb) -> Result<EntitySetVec> {
    let (subj, obj) = kb.group_signature(r.ty)?;
    if x.ty != subj {
        return Err(KbError::IncompatibleRelations(format!(
            "set of type `{}` cannot follow relations of `{}`",
            kb.type_name(x.ty),
            kb.type_name(r.ty)
        )));
    }
    if x.values.len() != kb.type_size(subj) {
        return Err(KbError::dims(format!(
            "set vector has {} entries, type `{}` has {}",
            x.values.len(),
            kb.type_name(subj),
            kb.type_size(subj)
        )));
    }
    let m_r = mix_relations(kb, r)?;
    let xv = ArrayView2::from_shape((1, x.values.len()), &x.values).expect("row vector");
    let y = dense_sparse(xv, &m_r, Transpose::No)?;
    Ok(EntitySetVec {
        ty: obj,
        values: y.into_raw_vec_and_offset().0,
    })
}

/// Naive mixing in the global entity space; `x` is `1 x N_E`, `r` is `1 x N_R`.
pub fn follow_naive_global(
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    kb: &TypedKb,
    meter: &mut Meter,
) -> Result<Array2<f64>> {
    if x.nrows() != 1 || r.nrows() != 1 {
        return Err(KbError::StrategyUnavailable("naive"));
    }
    let rv: Vec<f64> = r.row(0).to_vec();
    let m_r = mix_relations_global(kb, &rv)?;
    meter.alloc(m_r.nnz());
    meter.alloc(kb.n_entities());
    let y = dense_sparse(x, &m_r, Transpose::No);
    meter.free(m_r.nnz());
    y
}

/// Relation matrices prepared for late mixing.
#[derive(Debug, Clone)]
pub struct LateKb {
    mats: Vec<CooMatrix>,
    n_in: usize,
    n_out: usize,
}

impl LateKb {
    /// All relations embedded in the global entity space.
    pub fn global(kb: &TypedKb) -> Self {
        LateKb {
            mats: kb.relations().map(|(id, _)| kb.global_relation_matrix(id)).collect(),
            n_in: kb.n_entities(),
            n_out: kb.n_entities(),
        }
    }

    /// The typed matrices of one relation group.
    pub fn for_group(kb: &TypedKb, group: TypeId) -> Result<Self> {
        let (subj, obj) = kb.group_signature(group)?;
        let mats = kb
            .group_relations(group)?
            .iter()
            .map(|&r| kb.relation_matrix(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(LateKb {
            mats,
            n_in: kb.type_size(subj),
            n_out: kb.type_size(obj),
        })
    }

    pub fn matrices(&self) -> &[CooMatrix] {
        &self.mats
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn follow(&self, x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.follow_metered(x, r, &mut Meter::new())
    }

    pub fn follow_metered(
        &self,
        x: ArrayView2<'_, f64>,
        r: ArrayView2<'_, f64>,
        meter: &mut Meter,
    ) -> Result<Array2<f64>> {
        let b = x.nrows();
        if r.nrows() != b {
            return Err(KbError::BatchMismatch(b, r.nrows()));
        }
        if r.ncols() != self.mats.len() {
            return Err(KbError::dims(format!(
                "relation batch has {} columns, {} relations",
                r.ncols(),
                self.mats.len()
            )));
        }
        if x.ncols() != self.n_in {
            return Err(KbError::dims(format!("entity batch has {} columns, expected {}", x.ncols(), self.n_in)));
        }
        // columns of R, contiguous
        let rt = r.t().as_standard_layout().into_owned();
        meter.alloc(rt.len());
        let mut out = Array2::zeros((b, self.n_out));
        meter.alloc(out.len());
        let mut buf = Array2::zeros((b, self.n_out));
        meter.alloc(buf.len());
        for (mk, col) in self.mats.iter().zip(rt.axis_iter(Axis(0))) {
            buf.fill(0.0);
            dense_sparse_acc(x, mk, Transpose::No, 1.0, buf.view_mut())?;
            for ((mut orow, brow), &scale) in out.rows_mut().into_iter().zip(buf.rows()).zip(col.iter()) {
                orow.scaled_add(scale, &brow);
            }
        }
        meter.free(buf.len() + rt.len());
        Ok(out)
    }
}

/// Late mixing over one relation group: `X` is `b x N_subj`, `R` is
/// `b x |group|`.
pub fn follow_late(x: &SetBatch, r: &SetBatch, kb: &TypedKb) -> Result<SetBatch> {
    let (subj, obj) = kb.group_signature(r.ty)?;
    if x.ty != subj {
        return Err(KbError::IncompatibleRelations(format!(
            "set of type `{}` cannot follow relations of `{}`",
            kb.type_name(x.ty),
            kb.type_name(r.ty)
        )));
    }
    if x.batch_size() != r.batch_size() {
        return Err(KbError::BatchMismatch(x.batch_size(), r.batch_size()));
    }
    let late = LateKb::for_group(kb, r.ty)?;
    Ok(SetBatch {
        ty: obj,
        rows: late.follow(x.rows.view(), r.rows.view())?,
    })
}

/// The reified KB: one row per triple `l` in canonical order, mapping it to
/// its subject (`m_subj`), object (`m_obj`) and weighted relation (`m_rel`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReifiedKb {
    pub m_subj: CooMatrix,
    pub m_obj: CooMatrix,
    pub m_rel: CooMatrix,
}

pub fn reify(kb: &TypedKb) -> ReifiedKb {
    let n_t = kb.n_triples();
    let mut subj = Vec::with_capacity(n_t);
    let mut obj = Vec::with_capacity(n_t);
    let mut rel = Vec::with_capacity(n_t);
    let mut w = Vec::with_capacity(n_t);
    for (l, t) in kb.triples().iter().enumerate() {
        subj.push((l, kb.global_index(t.subj)));
        obj.push((l, kb.global_index(t.obj)));
        rel.push((l, t.rel.idx()));
        w.push(t.weight);
    }
    let (n_e, n_r) = (kb.n_entities(), kb.n_relations());
    ReifiedKb {
        m_subj: CooMatrix::from_sorted_unchecked(n_t, n_e, subj, vec![1.0; n_t]),
        m_obj: CooMatrix::from_sorted_unchecked(n_t, n_e, obj, vec![1.0; n_t]),
        m_rel: CooMatrix::from_sorted_unchecked(n_t, n_r, rel, w),
    }
}

impl ReifiedKb {
    pub fn n_triples(&self) -> usize {
        self.m_subj.n_rows()
    }

    pub fn n_entities(&self) -> usize {
        self.m_subj.n_cols()
    }

    pub fn n_relations(&self) -> usize {
        self.m_rel.n_cols()
    }

    pub fn follow(&self, x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.follow_metered(x, r, &mut Meter::new())
    }

    pub fn follow_metered(
        &self,
        x: ArrayView2<'_, f64>,
        r: ArrayView2<'_, f64>,
        meter: &mut Meter,
    ) -> Result<Array2<f64>> {
        if x.nrows() != r.nrows() {
            return Err(KbError::BatchMismatch(x.nrows(), r.nrows()));
        }
        if x.ncols() != self.n_entities() || r.ncols() != self.n_relations() {
            return Err(KbError::dims(format!(
                "reified follow expects b x {} and b x {}, got {:?} and {:?}",
                self.n_entities(),
                self.n_relations(),
                x.dim(),
                r.dim()
            )));
        }
        let mut triples = dense_sparse(x, &self.m_subj, Transpose::Yes)?;
        meter.alloc(triples.len());
        let rel = dense_sparse(r, &self.m_rel, Transpose::Yes)?;
        meter.alloc(rel.len());
        triples *= &rel;
        let out = dense_sparse(triples.view(), &self.m_obj, Transpose::No)?;
        meter.alloc(out.len());
        meter.free(triples.len() + rel.len());
        Ok(out)
    }
}

/// Reified following in the global entity space.
pub fn follow_reified(x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>, rkb: &ReifiedKb) -> Result<Array2<f64>> {
    rkb.follow(x, r)
}

/// A prepared KB for batched following in the global entity space
/// (`X: b x N_E`, `R: b x N_R`).
#[derive(Debug, Clone, Copy)]
pub enum FollowEngine<'a> {
    Naive(&'a TypedKb),
    Late(&'a LateKb),
    Reified(&'a ReifiedKb),
    Sharded(&'a ShardedReifiedKb, Parallelism),
}

impl FollowEngine<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            FollowEngine::Naive(_) => Strategy::Naive,
            FollowEngine::Late(_) => Strategy::Late,
            FollowEngine::Reified(_) => Strategy::Reified,
            FollowEngine::Sharded(..) => Strategy::ReifiedSharded,
        }
    }

    pub fn n_entities(&self) -> usize {
        match self {
            FollowEngine::Naive(kb) => kb.n_entities(),
            FollowEngine::Late(l) => l.n_out(),
            FollowEngine::Reified(r) => r.n_entities(),
            FollowEngine::Sharded(s, _) => s.n_entities(),
        }
    }

    pub fn n_relations(&self) -> usize {
        match self {
            FollowEngine::Naive(kb) => kb.n_relations(),
            FollowEngine::Late(l) => l.matrices().len(),
            FollowEngine::Reified(r) => r.n_relations(),
            FollowEngine::Sharded(s, _) => s.n_relations(),
        }
    }

    pub fn follow(&self, x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.follow_metered(x, r, &mut Meter::new())
    }

    pub fn follow_metered(
        &self,
        x: ArrayView2<'_, f64>,
        r: ArrayView2<'_, f64>,
        meter: &mut Meter,
    ) -> Result<Array2<f64>> {
        match self {
            FollowEngine::Naive(kb) => follow_naive_global(x, r, kb, meter),
            FollowEngine::Late(l) => l.follow_metered(x, r, meter),
            FollowEngine::Reified(rkb) => rkb.follow_metered(x, r, meter),
            FollowEngine::Sharded(skb, par) => {
                let (y, stats) = follow_sharded_metered(x, r, skb, *par)?;
                // shards run in turn; shard s peaks while s earlier partials are held
                let out = y.len();
                let peak = stats.iter().enumerate().map(|(s, m)| s * out + m.peak()).max().unwrap_or(out);
                meter.alloc(peak);
                meter.free(peak - out);
                Ok(y)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{build_kb, RelationDecl, TripleDecl, TypeDecl};
    use crate::sets::{encode_relations, encode_set};
    use ndarray::array;

    /// 3x3 grid, cells `c<row>_<col>`, row 0 on top.
    fn grid3() -> TypedKb {
        let n = 3;
        let names: Vec<String> = (0..n * n).map(|i| format!("c{}_{}", i / n, i % n)).collect();
        let mut triples = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let here = format!("c{r}_{c}");
                if r > 0 {
                    triples.push(TripleDecl::new(&here, "north", format!("c{}_{c}", r - 1), 1.0));
                }
                if r + 1 < n {
                    triples.push(TripleDecl::new(&here, "south", format!("c{}_{c}", r + 1), 1.0));
                }
                if c + 1 < n {
                    triples.push(TripleDecl::new(&here, "east", format!("c{r}_{}", c + 1), 1.0));
                }
                if c > 0 {
                    triples.push(TripleDecl::new(&here, "west", format!("c{r}_{}", c - 1), 1.0));
                }
            }
        }
        let rels: Vec<_> = ["north", "south", "east", "west"]
            .iter()
            .map(|d| RelationDecl::new(*d, "cell", "cell"))
            .collect();
        build_kb(&[TypeDecl::named("cell", names)], &rels, &triples).unwrap()
    }

    fn cell(kb: &TypedKb) -> TypeId {
        kb.type_id("cell").unwrap()
    }

    #[test]
    fn naive_single_hop() {
        let kb = grid3();
        let x = encode_set(&kb, cell(&kb), &[("c0_0", 1.0)]).unwrap();
        let r = encode_relations(&kb, &[("east", 1.0)]).unwrap();
        let y = follow_naive(&x, &r, &kb).unwrap();
        assert_eq!(y, encode_set(&kb, cell(&kb), &[("c0_1", 1.0)]).unwrap());
    }

    #[test]
    fn naive_boundary_is_empty() {
        let kb = grid3();
        let x = encode_set(&kb, cell(&kb), &[("c0_0", 1.0)]).unwrap();
        let r = encode_relations(&kb, &[("north", 1.0)]).unwrap();
        assert!(follow_naive(&x, &r, &kb).unwrap().is_empty());
    }

    #[test]
    fn naive_mixed_relations() {
        let kb = grid3();
        let x = encode_set(&kb, cell(&kb), &[("c1_1", 1.0)]).unwrap();
        let r = encode_relations(&kb, &[("east", 0.5), ("west", 0.5)]).unwrap();
        let y = follow_naive(&x, &r, &kb).unwrap();
        assert_eq!(y, encode_set(&kb, cell(&kb), &[("c1_0", 0.5), ("c1_2", 0.5)]).unwrap());
    }

    #[test]
    fn mix_cases() {
        let kb = grid3();
        let east = kb.relation("east").unwrap();
        let one_hot = encode_relations(&kb, &[("east", 1.0)]).unwrap();
        assert_eq!(mix_relations(&kb, &one_hot).unwrap(), kb.relation_matrix(east).unwrap());
        let zero = encode_relations(&kb, &[("east", 0.0)]).unwrap();
        let m = mix_relations(&kb, &zero).unwrap();
        assert_eq!((m.nnz(), m.shape()), (0, (9, 9)));
    }

    #[test]
    fn mix_east_west_on_2x2() {
        let kb = build_kb(
            &[TypeDecl::named("cell", ["c0_0", "c0_1", "c1_0", "c1_1"])],
            &[RelationDecl::new("east", "cell", "cell"), RelationDecl::new("west", "cell", "cell")],
            &[
                TripleDecl::new("c0_0", "east", "c0_1", 1.0),
                TripleDecl::new("c1_0", "east", "c1_1", 1.0),
                TripleDecl::new("c0_1", "west", "c0_0", 1.0),
                TripleDecl::new("c1_1", "west", "c1_0", 1.0),
            ],
        )
        .unwrap();
        let r = encode_relations(&kb, &[("east", 0.5), ("west", 0.5)]).unwrap();
        let m = mix_relations(&kb, &r).unwrap().to_dense();
        let expected = array![
            [0.0, 0.5, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.5],
            [0.0, 0.0, 0.5, 0.0]
        ];
        assert_eq!(m, expected);
        assert_eq!(m, m.t());
    }

    #[test]
    fn incompatible_types() {
        let kb = build_kb(
            &[TypeDecl::named("a", ["a0"]), TypeDecl::named("b", ["b0"])],
            &[RelationDecl::new("r", "a", "b")],
            &[TripleDecl::new("a0", "r", "b0", 1.0)],
        )
        .unwrap();
        let xb = encode_set(&kb, kb.type_id("b").unwrap(), &[("b0", 1.0)]).unwrap();
        let r = encode_relations(&kb, &[("r", 1.0)]).unwrap();
        assert!(matches!(follow_naive(&xb, &r, &kb), Err(KbError::IncompatibleRelations(_))));
        let xa = encode_set(&kb, kb.type_id("a").unwrap(), &[("a0", 1.0)]).unwrap();
        assert!(matches!(follow_naive(&xa, &xa, &kb), Err(KbError::IncompatibleRelations(_))));
        let y = follow_naive(&xa, &r, &kb).unwrap();
        assert_eq!(y.ty, kb.type_id("b").unwrap());
        assert_eq!(y.values, vec![1.0]);
    }

    #[test]
    fn late_matches_naive_single_row() {
        let kb = grid3();
        let x = encode_set(&kb, cell(&kb), &[("c1_1", 0.7), ("c0_2", 0.2)]).unwrap();
        let r = encode_relations(&kb, &[("east", 0.3), ("south", 1.5), ("west", 0.1)]).unwrap();
        let naive = follow_naive(&x, &r, &kb).unwrap();
        let late = follow_late(
            &SetBatch::from_sets(&[x]).unwrap(),
            &SetBatch::from_sets(&[r]).unwrap(),
            &kb,
        )
        .unwrap();
        for (a, b) in naive.values.iter().zip(late.rows.row(0)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn late_single_relation_row() {
        let kb = grid3();
        let x = encode_set(&kb, cell(&kb), &[("c1_1", 1.0)]).unwrap();
        let r = encode_relations(&kb, &[("south", 2.0)]).unwrap();
        let y = follow_late(
            &SetBatch::from_sets(&[x]).unwrap(),
            &SetBatch::from_sets(&[r]).unwrap(),
            &kb,
        )
        .unwrap();
        assert_eq!(y.row(0), encode_set(&kb, cell(&kb), &[("c2_1", 2.0)]).unwrap());
    }

    #[test]
    fn late_batch_mismatch() {
        let kb = grid3();
        let x = SetBatch {
            ty: cell(&kb),
            rows: Array2::zeros((2, 9)),
        };
        let r = SetBatch {
            ty: kb.relation_info(kb.relation("east").unwrap()).entity.ty,
            rows: Array2::zeros((3, 4)),
        };
        assert!(matches!(follow_late(&x, &r, &kb), Err(KbError::BatchMismatch(2, 3))));
    }

    #[test]
    fn reify_single_triple() {
        let kb = build_kb(
            &[TypeDecl::named("cell", ["c0", "c1"])],
            &[RelationDecl::new("east", "cell", "cell")],
            &[TripleDecl::new("c0", "east", "c1", 1.0)],
        )
        .unwrap();
        let rkb = reify(&kb);
        assert_eq!(rkb.m_subj.iter().collect::<Vec<_>>(), vec![(0, 0, 1.0)]);
        assert_eq!(rkb.m_obj.iter().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);
        assert_eq!(rkb.m_rel.iter().collect::<Vec<_>>(), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn reify_weight_lands_in_rel_only() {
        let kb = build_kb(
            &[TypeDecl::named("cell", ["c0", "c1"])],
            &[RelationDecl::new("east", "cell", "cell")],
            &[TripleDecl::new("c0", "east", "c1", 0.5)],
        )
        .unwrap();
        let rkb = reify(&kb);
        assert_eq!(rkb.m_rel.weights(), &[0.5]);
        assert_eq!(rkb.m_subj.weights(), &[1.0]);
        assert_eq!(rkb.m_obj.weights(), &[1.0]);
    }

    #[test]
    fn reified_one_hot_and_empty_relations() {
        let kb = grid3();
        let rkb = reify(&kb);
        let mut x = Array2::zeros((1, 9));
        x[[0, 0]] = 1.0;
        let mut r = Array2::zeros((1, 4));
        r[[0, kb.relation("east").unwrap().idx()]] = 1.0;
        let y = follow_reified(x.view(), r.view(), &rkb).unwrap();
        let mut expected = Array2::zeros((1, 9));
        expected[[0, 1]] = 1.0;
        assert_eq!(y, expected);
        let y0 = follow_reified(x.view(), Array2::zeros((1, 4)).view(), &rkb).unwrap();
        assert_eq!(y0, Array2::<f64>::zeros((1, 9)));
        assert!(matches!(
            follow_reified(x.view(), Array2::zeros((1, 3)).view(), &rkb),
            Err(KbError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn meters_follow_table_one() {
        let kb = grid3();
        let (b, n_e, n_t, n_r) = (2, 9, kb.n_triples(), 4);
        let x = Array2::ones((b, n_e));
        let r = Array2::ones((b, n_r));
        let mut m = Meter::new();
        LateKb::global(&kb).follow_metered(x.view(), r.view(), &mut m).unwrap();
        assert_eq!(m.peak(), b * n_r + 2 * b * n_e);
        let mut m = Meter::new();
        reify(&kb).follow_metered(x.view(), r.view(), &mut m).unwrap();
        assert_eq!(m.peak(), 2 * b * n_t + b * n_e);
    }

    #[test]
    fn naive_engine_rejects_batches() {
        let kb = grid3();
        let e = FollowEngine::Naive(&kb);
        assert!(matches!(
            e.follow(Array2::zeros((2, 9)).view(), Array2::zeros((2, 4)).view()),
            Err(KbError::StrategyUnavailable(_))
        ));
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("dense".parse::<Strategy>().is_err());
    }
}
