//! Corpora compiled into the library.

use crate::corpus::parse_corpus;
use crate::problem::Problem;

pub const SEEDS: &str = include_str!("../data/seeds.jsonl");
pub const SEED_EXCLUSIONS: &str = include_str!("../data/seed_exclusions.jsonl");
pub const MUTATIONS: &str = include_str!("../data/mutations.jsonl");
pub const P70_PARENTS: &str = include_str!("../data/p70_parents.jsonl");

fn load(text: &str) -> Vec<Problem> {
    parse_corpus(text)
        .expect("bundled corpora are well-formed")
        .problems
}

/// The 75 seed problems (25 per category).
pub fn seeds() -> Vec<Problem> {
    load(SEEDS)
}

/// Statements with the inequality reversed or weakened; every one is false.
pub fn mutations() -> Vec<Problem> {
    load(MUTATIONS)
}

/// The two parents of the weighted-sum-then-cube example.
pub fn p70_parents() -> (Problem, Problem) {
    let mut ps = load(P70_PARENTS).into_iter();
    (ps.next().unwrap(), ps.next().unwrap())
}

pub fn seed(id: &str) -> Option<Problem> {
    seeds().into_iter().find(|p| p.id() == id)
}
