//! Typed symbolic knowledge base.
//!
//! Entities live in declared types with dense zero-based indices. Every
//! relation also owns an entity `x_r` in a synthetic relation type named
//! `rel:<subj>-><obj>`, one per signature, so that any set of
//! type-compatible relations can be encoded as a set vector over that type.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::error::{KbError, Result};
use crate::sparse::CooMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub ty: TypeId,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl TypeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub subj: EntityId,
    pub rel: RelationId,
    pub obj: EntityId,
    pub weight: f64,
}

/// Declaration of an entity type. Without explicit names, entity `i` is
/// called `<type>_<i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub size: usize,
    pub entity_names: Option<Vec<String>>,
}

impl TypeDecl {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        TypeDecl {
            name: name.into(),
            size,
            entity_names: None,
        }
    }

    pub fn named<S: Into<String>>(name: impl Into<String>, names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        TypeDecl {
            name: name.into(),
            size: names.len(),
            entity_names: Some(names),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationDecl {
    pub name: String,
    pub subj_type: String,
    pub obj_type: String,
}

impl RelationDecl {
    pub fn new(name: impl Into<String>, subj_type: impl Into<String>, obj_type: impl Into<String>) -> Self {
        RelationDecl {
            name: name.into(),
            subj_type: subj_type.into(),
            obj_type: obj_type.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleDecl {
    pub subj: String,
    pub rel: String,
    pub obj: String,
    pub weight: f64,
}

impl TripleDecl {
    pub fn new(subj: impl Into<String>, rel: impl Into<String>, obj: impl Into<String>, weight: f64) -> Self {
        TripleDecl {
            subj: subj.into(),
            rel: rel.into(),
            obj: obj.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityType {
    pub name: String,
    pub names: Vec<String>,
    /// Set for the synthetic `rel:<subj>-><obj>` types.
    pub relation_group: Option<(TypeId, TypeId)>,
    explicit_names: bool,
}

impl EntityType {
    pub fn size(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub subj: TypeId,
    pub obj: TypeId,
    /// The relation's own entity in its signature group type.
    pub entity: EntityId,
}

pub fn default_entity_name(type_name: &str, index: usize) -> String {
    format!("{type_name}_{index}")
}

pub fn relation_group_name(subj: &str, obj: &str) -> String {
    format!("rel:{subj}->{obj}")
}

/// Immutable typed KB. Triples are stored sorted by
/// `(relation, subject index, object index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedKb {
    types: Vec<EntityType>,
    n_entity_types: usize,
    relations: Vec<Relation>,
    groups: Vec<Vec<RelationId>>,
    triples: Vec<Triple>,
    rel_spans: Vec<Range<usize>>,
    type_offsets: Vec<usize>,
    n_entities: usize,
    type_index: HashMap<String, TypeId>,
    entity_index: HashMap<String, EntityId>,
    relation_index: HashMap<String, RelationId>,
}

/// Builds a KB from declarations. Indices are assigned in declaration
/// order; duplicate triples with equal weight collapse, conflicting weights
/// are rejected, zero-weight triples are dropped.
pub fn build_kb(types: &[TypeDecl], relations: &[RelationDecl], triples: &[TripleDecl]) -> Result<TypedKb> {
    let mut kb_types = Vec::with_capacity(types.len());
    let mut type_index = HashMap::new();
    let mut entity_index = HashMap::new();
    let mut type_offsets = Vec::with_capacity(types.len());
    let mut n_entities = 0;

    for (t, decl) in types.iter().enumerate() {
        let ty = TypeId(t as u32);
        if type_index.insert(decl.name.clone(), ty).is_some() {
            return Err(KbError::DuplicateName(decl.name.clone()));
        }
        let names = match &decl.entity_names {
            Some(names) => {
                if names.len() != decl.size {
                    return Err(KbError::TypeMismatch(format!(
                        "type `{}` declares size {} but names {} entities",
                        decl.name,
                        decl.size,
                        names.len()
                    )));
                }
                names.clone()
            }
            None => (0..decl.size).map(|i| default_entity_name(&decl.name, i)).collect(),
        };
        for (index, name) in names.iter().enumerate() {
            if entity_index.insert(name.clone(), EntityId { ty, index }).is_some() {
                return Err(KbError::DuplicateName(name.clone()));
            }
        }
        type_offsets.push(n_entities);
        n_entities += names.len();
        kb_types.push(EntityType {
            name: decl.name.clone(),
            names,
            relation_group: None,
            explicit_names: decl.entity_names.is_some(),
        });
    }
    let n_entity_types = kb_types.len();

    let mut kb_relations = Vec::with_capacity(relations.len());
    let mut relation_index = HashMap::new();
    let mut group_of_sig: HashMap<(TypeId, TypeId), TypeId> = HashMap::new();
    let mut groups: Vec<Vec<RelationId>> = Vec::new();
    for (k, decl) in relations.iter().enumerate() {
        let rel = RelationId(k as u32);
        if relation_index.insert(decl.name.clone(), rel).is_some() {
            return Err(KbError::DuplicateName(decl.name.clone()));
        }
        let subj = *type_index
            .get(&decl.subj_type)
            .ok_or_else(|| KbError::UnknownName(decl.subj_type.clone()))?;
        let obj = *type_index
            .get(&decl.obj_type)
            .ok_or_else(|| KbError::UnknownName(decl.obj_type.clone()))?;
        let group_ty = *group_of_sig.entry((subj, obj)).or_insert_with(|| {
            let ty = TypeId((n_entity_types + groups.len()) as u32);
            groups.push(Vec::new());
            kb_types.push(EntityType {
                name: relation_group_name(&decl.subj_type, &decl.obj_type),
                names: Vec::new(),
                relation_group: Some((subj, obj)),
                explicit_names: true,
            });
            ty
        });
        let group = &mut groups[group_ty.idx() - n_entity_types];
        let entity = EntityId {
            ty: group_ty,
            index: group.len(),
        };
        group.push(rel);
        kb_types[group_ty.idx()].names.push(decl.name.clone());
        kb_relations.push(Relation {
            name: decl.name.clone(),
            subj,
            obj,
            entity,
        });
    }

    let mut resolved = Vec::with_capacity(triples.len());
    for decl in triples {
        let rel = *relation_index
            .get(&decl.rel)
            .ok_or_else(|| KbError::UnknownName(decl.rel.clone()))?;
        let subj = *entity_index
            .get(&decl.subj)
            .ok_or_else(|| KbError::UnknownName(decl.subj.clone()))?;
        let obj = *entity_index
            .get(&decl.obj)
            .ok_or_else(|| KbError::UnknownName(decl.obj.clone()))?;
        let info = &kb_relations[rel.idx()];
        if subj.ty != info.subj || obj.ty != info.obj {
            return Err(KbError::TypeMismatch(format!(
                "triple ({}, {}, {}) violates signature {} -> {}",
                decl.subj, decl.rel, decl.obj, kb_types[info.subj.idx()].name, kb_types[info.obj.idx()].name
            )));
        }
        if !decl.weight.is_finite() || decl.weight < 0.0 {
            return Err(KbError::NegativeWeight {
                name: format!("{}\t{}\t{}", decl.subj, decl.rel, decl.obj),
                weight: decl.weight,
            });
        }
        if decl.weight == 0.0 {
            continue;
        }
        resolved.push(Triple {
            subj,
            rel,
            obj,
            weight: decl.weight,
        });
    }
    resolved.sort_by_key(|t| (t.rel, t.subj.index, t.obj.index));
    let mut deduped: Vec<Triple> = Vec::with_capacity(resolved.len());
    for t in resolved {
        if let Some(last) = deduped.last() {
            if last.rel == t.rel && last.subj == t.subj && last.obj == t.obj {
                if last.weight != t.weight {
                    return Err(KbError::DuplicateTriple {
                        subj: kb_types[t.subj.ty.idx()].names[t.subj.index].clone(),
                        rel: kb_relations[t.rel.idx()].name.clone(),
                        obj: kb_types[t.obj.ty.idx()].names[t.obj.index].clone(),
                        first: last.weight,
                        second: t.weight,
                    });
                }
                continue;
            }
        }
        deduped.push(t);
    }

    let rel_spans = (0..kb_relations.len())
        .map(|k| {
            let lo = deduped.partition_point(|t| t.rel.idx() < k);
            let hi = deduped.partition_point(|t| t.rel.idx() <= k);
            lo..hi
        })
        .collect();

    Ok(TypedKb {
        types: kb_types,
        n_entity_types,
        relations: kb_relations,
        groups,
        triples: deduped,
        rel_spans,
        type_offsets,
        n_entities,
        type_index,
        entity_index,
        relation_index,
    })
}

impl TypedKb {
    /// Total number of entities over declared types (relation entities excluded).
    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    /// Declared entity types, in declaration order.
    pub fn entity_types(&self) -> impl Iterator<Item = (TypeId, &EntityType)> {
        self.types[..self.n_entity_types]
            .iter()
            .enumerate()
            .map(|(i, t)| (TypeId(i as u32), t))
    }

    /// Synthetic relation-group types, one per relation signature.
    pub fn relation_groups(&self) -> impl Iterator<Item = (TypeId, &[RelationId])> {
        self.groups
            .iter()
            .enumerate()
            .map(|(g, rels)| (TypeId((self.n_entity_types + g) as u32), rels.as_slice()))
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId> {
        self.type_index
            .get(name)
            .copied()
            .or_else(|| {
                self.types[self.n_entity_types..]
                    .iter()
                    .position(|t| t.name == name)
                    .map(|g| TypeId((self.n_entity_types + g) as u32))
            })
            .ok_or_else(|| KbError::UnknownName(name.to_string()))
    }

    pub fn entity_type(&self, ty: TypeId) -> &EntityType {
        &self.types[ty.idx()]
    }

    pub fn type_name(&self, ty: TypeId) -> &str {
        &self.types[ty.idx()].name
    }

    pub fn type_size(&self, ty: TypeId) -> usize {
        self.types[ty.idx()].names.len()
    }

    pub fn is_relation_type(&self, ty: TypeId) -> bool {
        ty.idx() >= self.n_entity_types
    }

    pub(crate) fn has_explicit_names(&self, ty: TypeId) -> bool {
        self.types[ty.idx()].explicit_names
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.entity_index
            .get(name)
            .copied()
            .ok_or_else(|| KbError::UnknownName(name.to_string()))
    }

    /// Resolves `name` inside type `ty`; relation-group types resolve
    /// relation names.
    pub fn entity_in(&self, ty: TypeId, name: &str) -> Result<EntityId> {
        if self.is_relation_type(ty) {
            let rel = self.relation(name)?;
            let e = self.relations[rel.idx()].entity;
            if e.ty != ty {
                return Err(KbError::IncompatibleRelations(format!(
                    "relation `{name}` is not in group `{}`",
                    self.type_name(ty)
                )));
            }
            return Ok(e);
        }
        let e = self.entity(name)?;
        if e.ty != ty {
            return Err(KbError::TypeMismatch(format!(
                "entity `{name}` has type `{}`, expected `{}`",
                self.type_name(e.ty),
                self.type_name(ty)
            )));
        }
        Ok(e)
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.types[e.ty.idx()].names[e.index]
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.relation_index
            .get(name)
            .copied()
            .ok_or_else(|| KbError::UnknownName(name.to_string()))
    }

    pub fn relation_info(&self, r: RelationId) -> &Relation {
        &self.relations[r.idx()]
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &Relation)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(k, r)| (RelationId(k as u32), r))
    }

    /// Relations in the group type `ty`, ordered by their index in the group.
    pub fn group_relations(&self, ty: TypeId) -> Result<&[RelationId]> {
        if !self.is_relation_type(ty) || ty.idx() >= self.types.len() {
            return Err(KbError::IncompatibleRelations(format!(
                "type `{}` is not a relation group",
                self.types.get(ty.idx()).map_or("?", |t| t.name.as_str())
            )));
        }
        Ok(&self.groups[ty.idx() - self.n_entity_types])
    }

    /// Signature `(subject type, object type)` of a relation-group type.
    pub fn group_signature(&self, ty: TypeId) -> Result<(TypeId, TypeId)> {
        self.group_relations(ty)?;
        Ok(self.types[ty.idx()].relation_group.expect("relation group"))
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triples_of(&self, r: RelationId) -> &[Triple] {
        &self.triples[self.rel_spans[r.idx()].clone()]
    }

    /// Span of relation `r` in the canonical triple order.
    pub fn triple_span(&self, r: RelationId) -> Range<usize> {
        self.rel_spans[r.idx()].clone()
    }

    /// Position of an entity in the global space that concatenates all
    /// declared types.
    pub fn global_index(&self, e: EntityId) -> usize {
        debug_assert!(!self.is_relation_type(e.ty));
        self.type_offsets[e.ty.idx()] + e.index
    }

    pub fn type_offset(&self, ty: TypeId) -> usize {
        self.type_offsets[ty.idx()]
    }

    pub fn global_entity(&self, g: usize) -> EntityId {
        let t = self.type_offsets.partition_point(|&off| off <= g) - 1;
        EntityId {
            ty: TypeId(t as u32),
            index: g - self.type_offsets[t],
        }
    }

    pub fn global_name(&self, g: usize) -> &str {
        self.entity_name(self.global_entity(g))
    }

    /// The relation matrix `M_r` of shape `N_subj x N_obj`.
    pub fn relation_matrix(&self, r: RelationId) -> Result<CooMatrix> {
        let info = self
            .relations
            .get(r.idx())
            .ok_or_else(|| KbError::UnknownName(r.to_string()))?;
        let triples = self.triples_of(r);
        let ind = triples.iter().map(|t| (t.subj.index, t.obj.index)).collect();
        let w = triples.iter().map(|t| t.weight).collect();
        // canonical triple order is already row-major within a relation
        Ok(CooMatrix::from_sorted_unchecked(
            self.type_size(info.subj),
            self.type_size(info.obj),
            ind,
            w,
        ))
    }

    /// `M_r` embedded in the global `N_E x N_E` entity space.
    pub fn global_relation_matrix(&self, r: RelationId) -> CooMatrix {
        let info = &self.relations[r.idx()];
        let (so, oo) = (self.type_offsets[info.subj.idx()], self.type_offsets[info.obj.idx()]);
        let triples = self.triples_of(r);
        let ind = triples.iter().map(|t| (so + t.subj.index, oo + t.obj.index)).collect();
        let w = triples.iter().map(|t| t.weight).collect();
        CooMatrix::from_sorted_unchecked(self.n_entities, self.n_entities, ind, w)
    }
}
