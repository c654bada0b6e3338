use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    /// Subject entity index.
    pub head: usize,
    /// Predicate entity index.
    pub tail: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

/// One corpus line: tokens with typed entity spans and typed relations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

/// Non-fatal findings from [`AnnotatedSentence::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// The two arguments of a relation share at least one token.
    OverlappingArguments { relation: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::OverlappingArguments { relation } => {
                write!(f, "relation {relation} links entities with overlapping spans")
            }
        }
    }
}

impl AnnotatedSentence {
    /// Checks spans, entity references and duplicate relations. All problems
    /// are collected into one error.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let mut problems = Vec::new();
        for (i, e) in self.entities.iter().enumerate() {
            if e.start >= e.end || e.end > self.tokens.len() {
                problems.push(format!(
                    "entity {i} span [{}, {}) invalid for {} tokens",
                    e.start,
                    e.end,
                    self.tokens.len()
                ));
            }
            if e.kind.is_empty() {
                problems.push(format!("entity {i} has an empty type"));
            }
        }
        let mut seen = BTreeSet::new();
        let mut warnings = Vec::new();
        for (i, r) in self.relations.iter().enumerate() {
            let n = self.entities.len();
            if r.head >= n || r.tail >= n {
                problems.push(format!(
                    "relation {i} references entity {} but only {n} exist",
                    r.head.max(r.tail)
                ));
                continue;
            }
            if r.kind.is_empty() {
                problems.push(format!("relation {i} has an empty type"));
            }
            if !seen.insert((r.head, r.tail, r.kind.as_str())) {
                problems.push(format!("relation {i} duplicates ({}, {}, {})", r.head, r.tail, r.kind));
            }
            let (a, b) = (&self.entities[r.head], &self.entities[r.tail]);
            if a.start < b.end && b.start < a.end {
                warnings.push(Warning::OverlappingArguments { relation: i });
            }
        }
        if problems.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    pub fn span(&self, entity: usize) -> Span {
        let e = &self.entities[entity];
        Span::new(e.start, e.end, &e.kind)
    }

    /// Gold units for scoring. Every relation is kept, even beyond the
    /// model's slot count.
    pub fn gold(&self) -> Extraction {
        let mut out = Extraction {
            entities: (0..self.entities.len()).map(|i| self.span(i)).collect(),
            ..Extraction::default()
        };
        for r in &self.relations {
            let pair = Pair {
                subject: self.span(r.head),
                predicate: self.span(r.tail),
            };
            if !out.pairs.contains(&pair) {
                out.pairs.push(pair.clone());
            }
            out.triples.push(Triple {
                subject: pair.subject,
                predicate: pair.predicate,
                relation: r.kind.clone(),
            });
        }
        out
    }
}

/// A typed token span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

impl Span {
    pub fn new(start: usize, end: usize, kind: &str) -> Self {
        Span {
            start,
            end,
            kind: String::from(kind),
        }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub subject: Span,
    pub predicate: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Span,
    pub predicate: Span,
    pub relation: String,
}

/// Everything extracted from one sentence, in the units each task scores.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Extraction {
    pub entities: Vec<Span>,
    pub pairs: Vec<Pair>,
    pub triples: Vec<Triple>,
}
