//! Differentiable-style relation-set following over typed knowledge bases.
//!
//! A KB's relations are stored as sparse COO matrices; weighted sets of
//! entities and relations are dense non-negative vectors. `follow(X, R)`
//! returns the weighted set of entities reachable from `X` through any
//! relation in `R`, computed with one of three interchangeable strategies
//! (naive mixing, late mixing, reified KB), optionally sharded by triple id.

pub mod error;
pub mod follow;
pub mod kb;
pub mod meter;
pub mod sets;
pub mod shard;
pub mod sparse;
pub mod tsv;

pub use error::{KbError, Result};
pub use follow::{
    follow_late, follow_naive, follow_naive_global, follow_reified, mix_relations, mix_relations_global, reify,
    FollowEngine, LateKb, ReifiedKb, Strategy,
};
pub use kb::{
    build_kb, default_entity_name, relation_group_name, EntityId, RelationDecl, RelationId, Triple, TripleDecl, TypeDecl, TypeId, TypedKb,
};
pub use meter::Meter;
pub use sets::{decode_topk, encode_relations, encode_set, EntitySetVec, RelSetVec, SetBatch};
pub use shard::{follow_sharded, partition_reified, partition_with_ranges, Parallelism, ShardedReifiedKb};
pub use sparse::{dense_sparse, hadamard, spmm, CooMatrix, Transpose};
pub use tsv::{load_kb_tsv, parse_kb_tsv, save_kb_tsv, write_kb_tsv};
