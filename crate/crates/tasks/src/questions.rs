//! Grid navigation questions: "from <anchor> go <dir> (then <dir>)*".

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Result, TaskError};
use crate::grid::{cell_name, Direction};

pub const MAX_HOPS: usize = 10;

/// Named start positions on an n-by-n grid.
pub fn anchors(n: usize) -> [(&'static str, (usize, usize)); 9] {
    let (m, e) = (n / 2, n - 1);
    [
        ("center", (m, m)),
        ("top left", (0, 0)),
        ("top right", (0, e)),
        ("bottom left", (e, 0)),
        ("bottom right", (e, e)),
        ("center left", (m, 0)),
        ("center right", (m, e)),
        ("top center", (0, m)),
        ("bottom center", (e, m)),
    ]
}

/// Every word the grammar can produce.
pub fn grammar_words() -> Vec<&'static str> {
    vec!["from", "go", "then", "center", "top", "bottom", "left", "right", "up", "down"]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainQuestion {
    pub tokens: Vec<String>,
    pub start: (usize, usize),
    pub directions: Vec<Direction>,
    pub answer: (usize, usize),
}

impl ChainQuestion {
    pub fn to_example(&self) -> Example {
        Example {
            tokens: self.tokens.clone(),
            start: cell_name(self.start.0, self.start.1),
            answers: vec![cell_name(self.answer.0, self.answer.1)],
            hops: self.directions.len(),
        }
    }
}

pub fn question_tokens(anchor: &str, dirs: &[Direction]) -> Vec<String> {
    let mut tokens = vec!["from".to_string()];
    tokens.extend(anchor.split(' ').map(str::to_string));
    tokens.push("go".into());
    for (i, d) in dirs.iter().enumerate() {
        if i > 0 {
            tokens.push("then".into());
        }
        tokens.push(d.word().into());
    }
    tokens
}

/// Seeded question generator. Hop counts are uniform over `hops`, anchors
/// uniform over the nine names, and each move uniform over the directions
/// that stay on the grid.
pub fn gen_chain_questions(n: usize, count: usize, hops: RangeInclusive<usize>, seed: u64) -> Result<Vec<ChainQuestion>> {
    if n < 2 || hops.is_empty() || *hops.start() < 1 || *hops.end() > MAX_HOPS {
        return Err(TaskError::Config(format!(
            "need n >= 2 and hops within 1..={MAX_HOPS}, got n={n}, hops={hops:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = anchors(n);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.gen_range(hops.clone());
        let &(name, start) = anchors.choose(&mut rng).expect("nine anchors");
        let mut pos = start;
        let mut dirs = Vec::with_capacity(k);
        for _ in 0..k {
            let legal: Vec<_> = Direction::ALL.iter().filter(|d| d.step(n, pos).is_some()).collect();
            let d = **legal.choose(&mut rng).expect("every cell has a neighbour when n >= 2");
            pos = d.step(n, pos).expect("legal move");
            dirs.push(d);
        }
        out.push(ChainQuestion {
            tokens: question_tokens(name, &dirs),
            start,
            directions: dirs,
            answer: pos,
        });
    }
    Ok(out)
}
