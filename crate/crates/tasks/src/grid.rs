//! The n-by-n grid KB. Cell `c{row}_{col}` has row 0 at the top; `north`
//! decreases the row and `east` increases the column.

use kbfollow::{build_kb, RelationDecl, TripleDecl, TypeDecl, TypedKb};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TaskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn relation(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }

    /// The word used in question text.
    pub fn word(self) -> &'static str {
        match self {
            Direction::North => "up",
            Direction::South => "down",
            Direction::East => "right",
            Direction::West => "left",
        }
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::South => (1, 0),
            Direction::East => (0, 1),
            Direction::West => (0, -1),
        }
    }

    /// The neighbouring cell, or `None` off the grid.
    pub fn step(self, n: usize, (row, col): (usize, usize)) -> Option<(usize, usize)> {
        let (dr, dc) = self.delta();
        let r = row.checked_add_signed(dr)?;
        let c = col.checked_add_signed(dc)?;
        (r < n && c < n).then_some((r, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Benchmark mode: spread the grid triples round-robin over this many
    /// invented relations `r0, r1, ...`.
    #[serde(default)]
    pub relations: Option<usize>,
}

impl GridSpec {
    pub fn new(n: usize) -> Self {
        GridSpec { n, relations: None }
    }

    pub fn bench(n: usize, m: usize) -> Self {
        GridSpec { n, relations: Some(m) }
    }
}

pub fn cell_name(row: usize, col: usize) -> String {
    format!("c{row}_{col}")
}

/// Inverse of `cell_name`.
pub fn parse_cell(name: &str) -> Option<(usize, usize)> {
    let (r, c) = name.strip_prefix('c')?.split_once('_')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

/// Walks `dirs` from `start`, or `None` if the walk leaves the grid.
pub fn walk(n: usize, start: (usize, usize), dirs: &[Direction]) -> Option<(usize, usize)> {
    dirs.iter().try_fold(start, |pos, d| d.step(n, pos))
}

/// Directed adjacency pairs for one direction, in row-major order of the
/// subject cell.
fn edges(n: usize, d: Direction) -> impl Iterator<Item = ((usize, usize), (usize, usize))> {
    (0..n).flat_map(move |r| (0..n).filter_map(move |c| d.step(n, (r, c)).map(|to| ((r, c), to))))
}

pub fn gen_grid(spec: &GridSpec) -> Result<TypedKb> {
    let n = spec.n;
    if n < 2 {
        return Err(TaskError::Config(format!("grid side must be at least 2, got {n}")));
    }
    let names = (0..n * n).map(|i| cell_name(i / n, i % n));
    let types = [TypeDecl::named("cell", names)];
    let mut triples = Vec::with_capacity(4 * n * (n - 1));
    match spec.relations {
        None => {
            for d in Direction::ALL {
                for (a, b) in edges(n, d) {
                    triples.push(TripleDecl::new(cell_name(a.0, a.1), d.relation(), cell_name(b.0, b.1), 1.0));
                }
            }
            let rels: Vec<_> = Direction::ALL
                .iter()
                .map(|d| RelationDecl::new(d.relation(), "cell", "cell"))
                .collect();
            Ok(build_kb(&types, &rels, &triples)?)
        }
        Some(m) => {
            if m == 0 {
                return Err(TaskError::Config("benchmark grid needs at least one relation".into()));
            }
            // triple ids follow the canonical (relation, subject, object) order
            // of the plain grid
            let plain = gen_grid(&GridSpec::new(n))?;
            for (l, t) in plain.triples().iter().enumerate() {
                triples.push(TripleDecl::new(
                    plain.entity_name(t.subj),
                    format!("r{}", l % m),
                    plain.entity_name(t.obj),
                    1.0,
                ));
            }
            let rels: Vec<_> = (0..m).map(|k| RelationDecl::new(format!("r{k}"), "cell", "cell")).collect();
            Ok(build_kb(&types, &rels, &triples)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_adjacency() {
        for n in [2usize, 3, 10] {
            let kb = gen_grid(&GridSpec::new(n)).unwrap();
            // count adjacent ordered pairs directly
            let mut pairs = 0;
            for a in 0..n * n {
                for b in 0..n * n {
                    let (ra, ca, rb, cb) = (a / n, a % n, b / n, b % n);
                    if ra.abs_diff(rb) + ca.abs_diff(cb) == 1 {
                        pairs += 1;
                    }
                }
            }
            assert_eq!(kb.n_entities(), n * n);
            assert_eq!(kb.n_triples(), pairs);
            assert_eq!(kb.n_triples(), 4 * n * (n - 1));
        }
    }

    #[test]
    fn east_on_three_grid() {
        let kb = gen_grid(&GridSpec::new(3)).unwrap();
        let m = kb.relation_matrix(kb.relation("east").unwrap()).unwrap();
        assert_eq!(m.nnz(), 6);
        for (i, j, w) in m.iter() {
            assert_eq!((j, w), (i + 1, 1.0));
            assert!(i % 3 < 2);
        }
    }

    #[test]
    fn bench_mode_round_robin() {
        let plain = gen_grid(&GridSpec::new(10)).unwrap();
        let kb = gen_grid(&GridSpec::bench(10, 1000)).unwrap();
        assert_eq!(kb.n_relations(), 1000);
        assert_eq!(kb.n_triples(), 360);
        let empty = kb.relations().filter(|(r, _)| kb.triples_of(*r).is_empty()).count();
        assert_eq!(empty, 640);
        let pairs = |kb: &TypedKb| {
            let mut v: Vec<_> = kb.triples().iter().map(|t| (t.subj, t.obj)).collect();
            v.sort();
            v
        };
        assert_eq!(pairs(&plain), pairs(&kb));
        let kb3 = gen_grid(&GridSpec::bench(4, 3)).unwrap();
        let sizes: Vec<_> = kb3.relations().map(|(r, _)| kb3.triples_of(r).len()).collect();
        assert_eq!(sizes, vec![16, 16, 16]);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(gen_grid(&GridSpec::new(1)).is_err());
        assert!(gen_grid(&GridSpec::bench(3, 0)).is_err());
    }

    #[test]
    fn walk_and_names() {
        assert_eq!(parse_cell(&cell_name(4, 7)), Some((4, 7)));
        assert_eq!(parse_cell("x"), None);
        assert_eq!(walk(3, (0, 0), &[Direction::East, Direction::South]), Some((1, 1)));
        assert_eq!(walk(3, (0, 0), &[Direction::North]), None);
    }
}
