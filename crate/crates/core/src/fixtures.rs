//! Bundled example problems (also shipped as files under `fixtures/`).

use crate::model::{parse_problem_named, Problem};

pub const NLP1: &str = include_str!("../../../fixtures/nlp1.nlp");
pub const NLP2: &str = include_str!("../../../fixtures/nlp2.nlp");
pub const QUADRATIC: &str = include_str!("../../../fixtures/quadratic.nlp");
pub const NONSTATIONARY: &str = include_str!("../../../fixtures/nonstationary.nlp");

/// `(name, source)` for every bundled fixture.
pub const ALL: [(&str, &str); 4] = [
    ("nlp1", NLP1),
    ("nlp2", NLP2),
    ("quadratic", QUADRATIC),
    ("nonstationary", NONSTATIONARY),
];

fn load(name: &str, src: &str) -> Problem {
    parse_problem_named(src, name).expect("bundled fixture parses")
}

pub fn nlp1() -> Problem {
    load("nlp1", NLP1)
}

pub fn nlp2() -> Problem {
    load("nlp2", NLP2)
}

pub fn quadratic() -> Problem {
    load("quadratic", QUADRATIC)
}

pub fn nonstationary() -> Problem {
    load("nonstationary", NONSTATIONARY)
}
