//! Horizontal partitioning of the reified KB by triple id, and following
//! that sums per-shard partial products.

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{KbError, Result};
use crate::follow::ReifiedKb;
use crate::meter::Meter;
use crate::sparse::CooMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Shards evaluated one after another on the calling thread.
    #[default]
    Sequential,
    /// Shards evaluated by the rayon worker pool.
    Parallel,
}

/// Shard `s` owns the triples in `ranges[s]`; its fragment matrices hold
/// those rows rebased to start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardedReifiedKb {
    shards: Vec<ReifiedKb>,
    ranges: Vec<Range<usize>>,
    n_entities: usize,
    n_relations: usize,
}

/// Balanced contiguous split: sizes differ by at most one, larger shards first.
pub fn balanced_ranges(n: usize, m: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / m, n % m);
    let mut start = 0;
    (0..m)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub fn partition_reified(rkb: &ReifiedKb, m: usize) -> Result<ShardedReifiedKb> {
    let n_t = rkb.n_triples();
    if m == 0 || m > n_t.max(1) {
        return Err(KbError::InvalidShardCount { m, n_triples: n_t });
    }
    partition_with_ranges(rkb, balanced_ranges(n_t, m))
}

/// Partition with caller-chosen ranges; they must be contiguous, in order and
/// cover every triple id exactly once.
pub fn partition_with_ranges(rkb: &ReifiedKb, ranges: Vec<Range<usize>>) -> Result<ShardedReifiedKb> {
    if ranges.is_empty() {
        return Err(KbError::InvalidShardCount {
            m: 0,
            n_triples: rkb.n_triples(),
        });
    }
    let mut expect = 0;
    for r in &ranges {
        if r.start != expect || r.end < r.start {
            return Err(KbError::InvalidPartition(format!("range {r:?} does not start at {expect}")));
        }
        expect = r.end;
    }
    if expect != rkb.n_triples() {
        return Err(KbError::InvalidPartition(format!(
            "ranges cover {expect} of {} triples",
            rkb.n_triples()
        )));
    }
    let shards = ranges
        .iter()
        .map(|r| ReifiedKb {
            m_subj: rkb.m_subj.row_slice(r.clone()),
            m_obj: rkb.m_obj.row_slice(r.clone()),
            m_rel: rkb.m_rel.row_slice(r.clone()),
        })
        .collect();
    Ok(ShardedReifiedKb {
        shards,
        ranges,
        n_entities: rkb.n_entities(),
        n_relations: rkb.n_relations(),
    })
}

impl ShardedReifiedKb {
    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn shards(&self) -> &[ReifiedKb] {
        &self.shards
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    /// Reassembles the unsharded reified KB.
    pub fn concat(&self) -> Result<ReifiedKb> {
        let stack = |f: fn(&ReifiedKb) -> &CooMatrix| {
            CooMatrix::vstack(&self.shards.iter().map(|s| f(s).clone()).collect::<Vec<_>>())
        };
        Ok(ReifiedKb {
            m_subj: stack(|s| &s.m_subj)?,
            m_obj: stack(|s| &s.m_obj)?,
            m_rel: stack(|s| &s.m_rel)?,
        })
    }

    pub fn follow(&self, x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>, par: Parallelism) -> Result<Array2<f64>> {
        follow_sharded_metered(x, r, self, par).map(|(y, _)| y)
    }
}

/// Per-shard reified following, summed across shards by a pairwise tree in
/// shard order. Returns the output and each shard's meter.
pub fn follow_sharded_metered(
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    skb: &ShardedReifiedKb,
    par: Parallelism,
) -> Result<(Array2<f64>, Vec<Meter>)> {
    let run = |shard: &ReifiedKb| {
        let mut meter = Meter::new();
        shard.follow_metered(x, r, &mut meter).map(|y| (y, meter))
    };
    let partials: Vec<(Array2<f64>, Meter)> = match par {
        Parallelism::Sequential => skb.shards.iter().map(run).collect::<Result<_>>()?,
        Parallelism::Parallel => skb.shards.par_iter().map(run).collect::<Result<_>>()?,
    };
    let (outs, meters): (Vec<_>, Vec<_>) = partials.into_iter().unzip();
    Ok((tree_sum(outs), meters))
}

pub fn follow_sharded(x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>, skb: &ShardedReifiedKb) -> Result<Array2<f64>> {
    skb.follow(x, r, Parallelism::Parallel)
}

/// Pairwise reduction of adjacent partials; fixed order for a fixed count.
pub fn tree_sum(mut parts: Vec<Array2<f64>>) -> Array2<f64> {
    assert!(!parts.is_empty(), "tree_sum of nothing");
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a += &b;
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().expect("one part")
}
