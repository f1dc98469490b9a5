//! Example records, JSON-lines IO and token vocabularies.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, TaskError};

/// One question. `start` names the question entity (or the start cell for
/// grid questions); for completion queries `tokens` holds the query relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<String>,
    pub start: String,
    pub answers: Vec<String>,
    pub hops: usize,
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).expect("rows serialize");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| TaskError::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut v = Vocab::default();
        for w in words {
            v.insert(w.as_ref());
        }
        v
    }

    /// Every token appearing in `examples`, in first-seen order.
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        let mut v = Vocab::default();
        for ex in examples {
            for t in &ex.tokens {
                v.insert(t);
            }
        }
        v
    }

    fn insert(&mut self, w: &str) {
        if !self.index.contains_key(w) {
            self.index.insert(w.to_string(), self.words.len());
            self.words.push(w.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| TaskError::UnknownToken(token.to_string()))
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let rows = vec![
            Example {
                tokens: vec!["from".into(), "center".into()],
                start: "c5_5".into(),
                answers: vec!["c5_6".into()],
                hops: 1,
            },
            Example {
                tokens: vec![],
                start: "a".into(),
                answers: vec![],
                hops: 2,
            },
        ];
        write_jsonl(&path, &rows).unwrap();
        let back: Vec<Example> = read_jsonl(&path).unwrap();
        assert_eq!(back, rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"tokens":["from","center"],"start":"c5_5","answers":["c5_6"],"hops":1}"#));
    }

    #[test]
    fn bad_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(&path, "{\"tokens\":[],\"start\":\"a\",\"answers\":[],\"hops\":1}\n{oops\n").unwrap();
        let err = read_jsonl::<Example>(&path).unwrap_err();
        assert!(matches!(err, TaskError::Dataset { line: 2, .. }));
    }

    #[test]
    fn vocab_lookup() {
        let v = Vocab::new(["a", "b", "a"]);
        assert_eq!(v.len(), 2);
        assert_eq!(v.encode(&["b".into(), "a".into()]).unwrap(), vec![1, 0]);
        assert!(matches!(v.id("zzz"), Err(TaskError::UnknownToken(_))));
    }
}
