//! Line-oriented KB text format.
//!
//! ```text
//! // comment
//! #type cell 4 c0_0 c0_1 c1_0 c1_1
//! #rel east cell cell
//! c0_0<TAB>east<TAB>c0_1<TAB>1.0
//! ```
//!
//! `#type` lines come first, then `#rel` lines, then triples. Entity names
//! after the size are optional; without them entity `i` of type `t` is `t_i`.
//! The weight column is optional and defaults to 1.0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{KbError, Result};
use crate::kb::{build_kb, default_entity_name, RelationDecl, TripleDecl, TypeDecl, TypedKb};

pub fn parse_kb_tsv(text: &str) -> Result<TypedKb> {
    let mut types = Vec::new();
    let mut relations = Vec::new();
    let mut triples = Vec::new();
    // 0: types, 1: relations, 2: triples
    let mut phase = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() || l.starts_with("//") {
            continue;
        }
        let err = |msg: String| KbError::Parse { line, msg };
        if let Some(rest) = l.strip_prefix("#type") {
            if phase > 0 {
                return Err(err("#type after #rel or triples".into()));
            }
            let mut fields = rest.split_whitespace();
            let name = fields.next().ok_or_else(|| err("#type needs a name".into()))?;
            let size: usize = fields
                .next()
                .ok_or_else(|| err("#type needs a size".into()))?
                .parse()
                .map_err(|e| err(format!("bad type size: {e}")))?;
            let names: Vec<String> = fields.map(str::to_string).collect();
            let entity_names = if names.is_empty() {
                None
            } else if names.len() == size {
                Some(names)
            } else {
                return Err(err(format!("type `{name}` has size {size} but lists {} names", names.len())));
            };
            types.push(TypeDecl {
                name: name.to_string(),
                size,
                entity_names,
            });
        } else if let Some(rest) = l.strip_prefix("#rel") {
            if phase > 1 {
                return Err(err("#rel after triples".into()));
            }
            phase = 1;
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [name, subj, obj] = fields[..] else {
                return Err(err("#rel needs <name> <subj_type> <obj_type>".into()));
            };
            relations.push(RelationDecl::new(name, subj, obj));
        } else if l.starts_with('#') {
            return Err(err(format!("unknown directive `{}`", l.split_whitespace().next().unwrap_or("#"))));
        } else {
            phase = 2;
            let fields: Vec<&str> = l.split('\t').collect();
            let (s, r, o, w) = match fields[..] {
                [s, r, o] => (s, r, o, 1.0),
                [s, r, o, w] => {
                    let w: f64 = w.trim().parse().map_err(|_| err(format!("malformed weight `{w}`")))?;
                    (s, r, o, w)
                }
                _ => return Err(err(format!("expected 3 or 4 tab-separated fields, got {}", fields.len()))),
            };
            triples.push(TripleDecl::new(s, r, o, w));
        }
    }
    build_kb(&types, &relations, &triples)
}

pub fn load_kb_tsv(path: impl AsRef<Path>) -> Result<TypedKb> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kb_tsv(&text)
}

/// Canonical text form: declarations in index order, triples in canonical
/// order, every weight written explicitly.
pub fn write_kb_tsv(kb: &TypedKb) -> String {
    let mut out = String::new();
    for (ty, t) in kb.entity_types() {
        let _ = write!(out, "#type {} {}", t.name, t.size());
        let defaults = t
            .names
            .iter()
            .enumerate()
            .all(|(i, n)| *n == default_entity_name(&t.name, i));
        if kb.has_explicit_names(ty) && !defaults {
            for n in &t.names {
                out.push(' ');
                out.push_str(n);
            }
        }
        out.push('\n');
    }
    for (_, r) in kb.relations() {
        let _ = writeln!(out, "#rel {} {} {}", r.name, kb.type_name(r.subj), kb.type_name(r.obj));
    }
    for t in kb.triples() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:?}",
            kb.entity_name(t.subj),
            kb.relation_info(t.rel).name,
            kb.entity_name(t.obj),
            t.weight
        );
    }
    out
}

pub fn save_kb_tsv(kb: &TypedKb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_kb_tsv(kb)).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })
}
