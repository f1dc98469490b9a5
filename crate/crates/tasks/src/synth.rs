//! Small synthetic KBs standing in for the real QA and completion datasets,
//! each paired with questions whose answers come from graph traversal.

use std::collections::BTreeSet;

use kbfollow::{build_kb, RelationDecl, TripleDecl, TypeDecl, TypedKb};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::Result;

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_string).collect()
}

/// Objects reachable from `start` along `path`, by set traversal.
pub fn traverse(kb: &TypedKb, start: &str, path: &[&str]) -> Result<BTreeSet<String>> {
    let mut frontier = BTreeSet::from([kb.entity(start)?]);
    for rel in path {
        let r = kb.relation(rel)?;
        frontier = kb
            .triples_of(r)
            .iter()
            .filter(|t| frontier.contains(&t.subj))
            .map(|t| t.obj)
            .collect();
    }
    Ok(frontier.iter().map(|&e| kb.entity_name(e).to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvtSpec {
    pub persons: usize,
    pub films: usize,
    pub awards: usize,
    pub seed: u64,
}

impl Default for CvtSpec {
    fn default() -> Self {
        CvtSpec {
            persons: 60,
            films: 120,
            awards: 6,
            seed: 0,
        }
    }
}

/// Question templates over the event KB: (paraphrases, relation path).
const CVT_QUESTIONS: [([&str; 2], &[&str]); 4] = [
    (["what films did ENT direct", "which movies were directed by ENT"], &["directed"]),
    (["what did ENT write", "which films were written by ENT"], &["wrote"]),
    (["which film won ENT an award", "for what movie was ENT honored"], &["won", "event_film"]),
    (["what award did ENT win", "which prize was given to ENT"], &["won", "event_award"]),
];

/// People direct and write films (one-hop facts) and win awards through
/// event nodes that link a winner, a film and an award. The film of an
/// award is never one the winner directed or wrote, so award questions are
/// answerable only through the event. Entity 0 is a person.
pub fn gen_cvt(spec: &CvtSpec) -> Result<(TypedKb, Vec<Example>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let person = |i: usize| format!("p{i}");
    let film = |i: usize| format!("f{i}");
    let mut names: Vec<String> = (0..spec.persons).map(person).collect();
    names.extend((0..spec.films).map(film));
    names.extend((0..spec.awards).map(|i| format!("a{i}")));
    let mut triples = Vec::new();
    let mut events = 0usize;
    for p in 0..spec.persons {
        let n_own = rng.gen_range(2..=5);
        let own: Vec<usize> = (0..spec.films).choose_multiple(&mut rng, n_own);
        let n_dir = rng.gen_range(1..own.len());
        for (k, &f) in own.iter().enumerate() {
            let rel = if k < n_dir { "directed" } else { "wrote" };
            triples.push(TripleDecl::new(person(p), rel, film(f), 1.0));
        }
        for _ in 0..rng.gen_range(1..=2) {
            let f = (0..spec.films).filter(|f| !own.contains(f)).choose(&mut rng).expect("enough films");
            let ev = format!("ev{events}");
            events += 1;
            triples.push(TripleDecl::new(person(p), "won", ev.clone(), 1.0));
            triples.push(TripleDecl::new(ev.clone(), "event_film", film(f), 1.0));
            triples.push(TripleDecl::new(ev, "event_award", format!("a{}", rng.gen_range(0..spec.awards)), 1.0));
        }
    }
    let types = [
        TypeDecl::named("ent", names),
        TypeDecl::named("cvt", (0..events).map(|i| format!("ev{i}"))),
    ];
    let rels = [
        RelationDecl::new("directed", "ent", "ent"),
        RelationDecl::new("wrote", "ent", "ent"),
        RelationDecl::new("won", "ent", "cvt"),
        RelationDecl::new("event_film", "cvt", "ent"),
        RelationDecl::new("event_award", "cvt", "ent"),
    ];
    let kb = build_kb(&types, &rels, &triples)?;
    let mut examples = Vec::new();
    for p in 0..spec.persons {
        for (phrases, path) in CVT_QUESTIONS {
            let phrase = phrases.choose(&mut rng).expect("two paraphrases");
            let answers = traverse(&kb, &person(p), path)?;
            examples.push(Example {
                tokens: words(phrase),
                start: person(p),
                answers: answers.into_iter().collect(),
                hops: path.len(),
            });
        }
    }
    Ok((kb, examples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MovieSpec {
    pub movies: usize,
    pub people: usize,
    pub genres: usize,
    pub seed: u64,
}

impl Default for MovieSpec {
    fn default() -> Self {
        MovieSpec {
            movies: 80,
            people: 60,
            genres: 6,
            seed: 0,
        }
    }
}

const MOVIE_QUESTIONS: [(&str, &[&str]); 12] = [
    ("who directed ENT", &["directed_by"]),
    ("who wrote ENT", &["written_by"]),
    ("who acted in ENT", &["starred"]),
    ("what genre is ENT", &["has_genre"]),
    ("what movies did ENT direct", &["directed"]),
    ("what movies did ENT act in", &["acted_in"]),
    ("who directed movies starring ENT", &["acted_in", "directed_by"]),
    ("what genres did ENT write", &["wrote", "has_genre"]),
    ("who acted with ENT", &["acted_in", "starred"]),
    ("who wrote films directed by ENT", &["directed", "written_by"]),
    ("which movies share directors with films starring ENT", &["acted_in", "directed_by", "directed"]),
    ("what genres did the writers of ENT also write", &["written_by", "wrote", "has_genre"]),
];

/// Movies with a director, a writer, two actors and a genre, plus inverse
/// relations. Questions cover one to three hops; `hops` records the path
/// length.
pub fn gen_movies(spec: &MovieSpec) -> Result<(TypedKb, Vec<Example>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut names: Vec<String> = (0..spec.movies).map(|i| format!("m{i}")).collect();
    names.extend((0..spec.people).map(|i| format!("p{i}")));
    names.extend((0..spec.genres).map(|i| format!("g{i}")));
    let mut triples = Vec::new();
    let mut link = |m: &str, fwd: &str, inv: Option<&str>, o: String| {
        triples.push(TripleDecl::new(m, fwd, o.clone(), 1.0));
        if let Some(inv) = inv {
            triples.push(TripleDecl::new(o, inv, m, 1.0));
        }
    };
    for m in 0..spec.movies {
        let name = format!("m{m}");
        link(&name, "directed_by", Some("directed"), format!("p{}", rng.gen_range(0..spec.people)));
        link(&name, "written_by", Some("wrote"), format!("p{}", rng.gen_range(0..spec.people)));
        for a in (0..spec.people).choose_multiple(&mut rng, 2) {
            link(&name, "starred", Some("acted_in"), format!("p{a}"));
        }
        link(&name, "has_genre", None, format!("g{}", rng.gen_range(0..spec.genres)));
    }
    let rels: Vec<_> = ["directed_by", "written_by", "starred", "has_genre", "directed", "wrote", "acted_in"]
        .iter()
        .map(|r| RelationDecl::new(*r, "ent", "ent"))
        .collect();
    let kb = build_kb(&[TypeDecl::named("ent", names.clone())], &rels, &triples)?;
    let mut examples = Vec::new();
    for (phrase, path) in MOVIE_QUESTIONS {
        for start in &names {
            let answers = traverse(&kb, start, path)?;
            if !answers.is_empty() {
                examples.push(Example {
                    tokens: words(phrase),
                    start: start.clone(),
                    answers: answers.into_iter().collect(),
                    hops: path.len(),
                });
            }
        }
    }
    Ok((kb, examples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    /// Couples in the first generation.
    pub founders: usize,
    pub generations: usize,
    pub seed: u64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            founders: 8,
            generations: 4,
            seed: 0,
        }
    }
}

pub const GRANDPARENT: &str = "grandparent";
/// A query relation whose answers coincide with `parent`.
pub const HAS_PARENT: &str = "has_parent";

/// A family tree: every couple has one to three children, who then marry
/// within their generation (never a sibling). KB relations are `parent`,
/// `child` and `spouse`; the returned examples are `grandparent` queries
/// and `has_parent` queries, neither of which is stored in the KB.
pub fn gen_family(spec: &FamilySpec) -> Result<(TypedKb, Vec<Example>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parents: Vec<Vec<usize>> = Vec::new();
    let mut couples: Vec<(usize, usize)> = Vec::new();
    for _ in 0..spec.founders {
        let a = parents.len();
        parents.push(vec![]);
        parents.push(vec![]);
        couples.push((a, a + 1));
    }
    for _ in 1..spec.generations {
        let mut generation = Vec::new();
        for &(a, b) in &couples {
            for _ in 0..rng.gen_range(1..=3) {
                generation.push(parents.len());
                parents.push(vec![a, b]);
            }
        }
        generation.shuffle(&mut rng);
        couples.clear();
        let mut single: Vec<usize> = Vec::new();
        for p in generation {
            match single.iter().position(|&q| parents[q] != parents[p]) {
                Some(i) => couples.push((single.swap_remove(i), p)),
                None => single.push(p),
            }
        }
    }
    let name = |i: usize| format!("person{i}");
    let mut triples = Vec::new();
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            triples.push(TripleDecl::new(name(c), "parent", name(p), 1.0));
            triples.push(TripleDecl::new(name(p), "child", name(c), 1.0));
        }
    }
    // every couple that had children, plus the unparented last generation
    let mut all_couples: BTreeSet<(usize, usize)> = parents
        .iter()
        .filter(|ps| ps.len() == 2)
        .map(|ps| (ps[0].min(ps[1]), ps[0].max(ps[1])))
        .collect();
    all_couples.extend(couples.iter().map(|&(a, b)| (a.min(b), a.max(b))));
    for (a, b) in all_couples {
        triples.push(TripleDecl::new(name(a), "spouse", name(b), 1.0));
        triples.push(TripleDecl::new(name(b), "spouse", name(a), 1.0));
    }
    let rels: Vec<_> = ["parent", "child", "spouse"]
        .iter()
        .map(|r| RelationDecl::new(*r, "person", "person"))
        .collect();
    let kb = build_kb(&[TypeDecl::named("person", (0..parents.len()).map(name))], &rels, &triples)?;
    let mut examples = Vec::new();
    for i in 0..parents.len() {
        for (query, path) in [(GRANDPARENT, &["parent", "parent"][..]), (HAS_PARENT, &["parent"][..])] {
            let answers = traverse(&kb, &name(i), path)?;
            if !answers.is_empty() {
                examples.push(Example {
                    tokens: vec![query.to_string()],
                    start: name(i),
                    answers: answers.into_iter().collect(),
                    hops: path.len(),
                });
            }
        }
    }
    Ok((kb, examples))
}

/// Deterministic shuffle and split into (train, test) with `test` examples
/// held out.
pub fn split(mut examples: Vec<Example>, test: usize, seed: u64) -> (Vec<Example>, Vec<Example>) {
    examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = examples.split_off(examples.len().saturating_sub(test));
    (examples, held)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvt_award_films_need_two_hops() {
        let (kb, examples) = gen_cvt(&CvtSpec::default()).unwrap();
        assert_eq!(kb.entity_name(kb.global_entity(0)), "p0");
        for ex in examples.iter().filter(|e| e.hops == 2) {
            let one: BTreeSet<String> = ["directed", "wrote"]
                .iter()
                .flat_map(|r| traverse(&kb, &ex.start, &[r]).unwrap())
                .collect();
            assert!(!ex.answers.is_empty());
            assert!(ex.answers.iter().all(|a| !one.contains(a)));
        }
    }

    #[test]
    fn family_grandparents_are_parents_of_parents() {
        let (kb, examples) = gen_family(&FamilySpec::default()).unwrap();
        for ex in examples.iter().filter(|e| e.tokens[0] == GRANDPARENT) {
            let mut expected = BTreeSet::new();
            for p in traverse(&kb, &ex.start, &["parent"]).unwrap() {
                expected.extend(traverse(&kb, &p, &["parent"]).unwrap());
            }
            assert_eq!(ex.answers.iter().cloned().collect::<BTreeSet<_>>(), expected);
            assert!(!ex.answers.contains(&ex.start));
        }
        // nobody is married to a sibling
        for t in kb.triples().iter().filter(|t| kb.relation_info(t.rel).name == "spouse") {
            let pa = traverse(&kb, kb.entity_name(t.subj), &["parent"]).unwrap();
            let pb = traverse(&kb, kb.entity_name(t.obj), &["parent"]).unwrap();
            assert!(pa.is_empty() || pa != pb);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_movies(&MovieSpec::default()).unwrap().1, gen_movies(&MovieSpec::default()).unwrap().1);
        assert_eq!(gen_family(&FamilySpec::default()).unwrap().1, gen_family(&FamilySpec::default()).unwrap().1);
        assert_eq!(gen_cvt(&CvtSpec::default()).unwrap().1, gen_cvt(&CvtSpec::default()).unwrap().1);
    }

    #[test]
    fn movie_hops_match_paths() {
        let (_, examples) = gen_movies(&MovieSpec::default()).unwrap();
        for k in 1..=3 {
            assert!(examples.iter().any(|e| e.hops == k));
        }
    }
}
