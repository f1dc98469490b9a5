//! Adjoints of the follow operator. KB matrices are constants; gradients
//! flow into the entity batch `X` and the relation batch `R` only.

use kbfollow::shard::tree_sum;
use kbfollow::sparse::{dense_sparse, Transpose};
use kbfollow::{FollowEngine, KbError, LateKb, ReifiedKb};
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{shape_err, GradError, Result};

/// Returns `(dX, dR)` for `Y = follow(X, R)` given `dY`.
pub fn follow_backward(
    engine: &FollowEngine<'_>,
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.nrows() != r.nrows() {
        return Err(KbError::BatchMismatch(x.nrows(), r.nrows()).into());
    }
    if dy.dim() != (x.nrows(), engine.n_entities()) {
        return Err(shape_err(
            "follow_backward",
            format!("dY is {:?}, output is {:?}", dy.dim(), (x.nrows(), engine.n_entities())),
        ));
    }
    match engine {
        FollowEngine::Naive(_) => Err(GradError::StrategyUnavailable("naive")),
        FollowEngine::Late(late) => late_backward(late, x, r, dy),
        FollowEngine::Reified(rkb) => reified_backward(rkb, x, r, dy),
        FollowEngine::Sharded(skb, _) => {
            let mut dxs = Vec::with_capacity(skb.shard_count());
            let mut drs = Vec::with_capacity(skb.shard_count());
            for shard in skb.shards() {
                let (dx, dr) = reified_backward(shard, x, r, dy)?;
                dxs.push(dx);
                drs.push(dr);
            }
            Ok((tree_sum(dxs), tree_sum(drs)))
        }
    }
}

/// `dX = sum_k R[:,k] * (dY M_k^T)`, `dR[:,k] = rowsum(dY . (X M_k))`.
fn late_backward(
    late: &LateKb,
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.ncols() != late.n_in() || r.ncols() != late.matrices().len() {
        return Err(shape_err("follow_backward", format!("X {:?}, R {:?}", x.dim(), r.dim())));
    }
    let mut dx = Array2::zeros(x.dim());
    let mut dr = Array2::zeros(r.dim());
    for (k, mk) in late.matrices().iter().enumerate() {
        let back = dense_sparse(dy, mk, Transpose::Yes)?;
        for ((mut dxr, br), &scale) in dx.rows_mut().into_iter().zip(back.rows()).zip(r.column(k)) {
            dxr.scaled_add(scale, &br);
        }
        let fwd = dense_sparse(x, mk, Transpose::No)?;
        let col = (&fwd * &dy).sum_axis(Axis(1));
        dr.column_mut(k).assign(&col);
    }
    Ok((dx, dr))
}

/// With `A = M_subj`, `B = M_rel`, `C = M_obj` and `G = dY C^T`:
/// `dX = (G . R B^T) A`, `dR = (G . X A^T) B`.
fn reified_backward(
    rkb: &ReifiedKb,
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = dense_sparse(dy, &rkb.m_obj, Transpose::Yes)?;
    let xa = dense_sparse(x, &rkb.m_subj, Transpose::Yes)?;
    let rb = dense_sparse(r, &rkb.m_rel, Transpose::Yes)?;
    let dx = dense_sparse((&g * &rb).view(), &rkb.m_subj, Transpose::No)?;
    let dr = dense_sparse((&g * &xa).view(), &rkb.m_rel, Transpose::No)?;
    Ok((dx, dr))
}
