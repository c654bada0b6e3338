//! Synthetic corpus whose annotations follow from the surface tokens.
//!
//! Every entity word belongs to exactly one entity type. Consecutive entities
//! are joined either by the trigger phrase of a relation (and are then
//! related, subject first) or by a separator (and are then unrelated).
//! Relation `r` links type `r mod E` to type `(r + 1) mod E`, so chains of
//! triggers produce entities shared by two triples.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AnnotatedSentence, Entity, Relation};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, Stream};

const ENTITY_NAMES: [&str; 3] = ["Peop", "Org", "Loc"];
const RELATION_NAMES: [&str; 2] = ["Work_For", "OrgBased_In"];
const WORDS: [[&str; 8]; 3] = [
    ["David", "Maria", "Chen", "Omar", "Lena", "Ravi", "Sofia", "Tom"],
    ["AP", "Reuters", "Acme", "NASA", "Intel", "Oxfam", "Fiat", "Sony"],
    ["Seattle", "Paris", "Lima", "Oslo", "Cairo", "Delhi", "Quito", "Rome"],
];
const SEPARATORS: [&str; 2] = ["and", ","];
const OPENERS: [&str; 3] = ["the", "today", "so"];
const END: &str = ".";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sentences: usize,
    pub entity_types: usize,
    pub relation_types: usize,
    pub words_per_type: usize,
    /// Relative frequency of sentences with `k` triples, indexed by `k`.
    pub triple_weights: Vec<f64>,
    /// Probability of an extra entity that takes part in no relation.
    pub distractor_rate: f64,
    /// Probability that an entity spans two words.
    pub two_word_rate: f64,
    /// Make one two-triple sentence the "David works for AP in Seattle"
    /// example.
    pub include_example: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            sentences: 32,
            entity_types: 3,
            relation_types: 2,
            words_per_type: 6,
            triple_weights: vec![0.0, 0.5, 0.3125, 0.1875],
            distractor_rate: 0.3,
            two_word_rate: 0.3,
            include_example: true,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn max_triples(&self) -> usize {
        self.triple_weights.len().saturating_sub(1)
    }

    pub fn entity_type_name(t: usize) -> String {
        ENTITY_NAMES.get(t).map_or_else(|| format!("Type{t}"), |s| String::from(*s))
    }

    pub fn relation_type_name(r: usize) -> String {
        RELATION_NAMES.get(r).map_or_else(|| format!("Rel{r}"), |s| String::from(*s))
    }

    /// Subject and predicate entity types of relation `r`.
    pub fn schema(&self, r: usize) -> (usize, usize) {
        (r % self.entity_types, (r + 1) % self.entity_types)
    }

    fn word(&self, t: usize, i: usize) -> String {
        match WORDS.get(t).and_then(|w| w.get(i)) {
            Some(w) => String::from(*w),
            None => format!("{}{i}", Self::entity_type_name(t).to_lowercase()),
        }
    }

    fn trigger(r: usize) -> Vec<String> {
        match r {
            0 => vec!["works".into(), "for".into()],
            1 => vec!["in".into()],
            _ => vec![format!("rel{r}")],
        }
    }

    /// Distinct tokens the generator can emit.
    pub fn vocab_size(&self) -> usize {
        let trigger_words: usize = (0..self.relation_types).map(|r| Self::trigger(r).len()).sum();
        self.entity_types * self.words_per_type + trigger_words + SEPARATORS.len() + OPENERS.len() + 1
    }

    /// Sentence counts per triple count, by largest remainder so they sum
    /// to `sentences` exactly.
    pub fn allocation(&self) -> Result<Vec<usize>> {
        let total: f64 = self.triple_weights.iter().sum();
        if self.triple_weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::contract("triple weights must be non-negative with a positive sum"));
        }
        let exact: Vec<f64> = self
            .triple_weights
            .iter()
            .map(|w| w / total * self.sentences as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| libm::floor(*x) as usize).collect();
        let short = self.sentences - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - libm::floor(exact[a]), exact[b] - libm::floor(exact[b]));
            fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &k in order.iter().take(short) {
            counts[k] += 1;
        }
        Ok(counts)
    }

    fn check(&self) -> Result<()> {
        if self.entity_types == 0 || self.relation_types == 0 || self.words_per_type == 0 {
            return Err(Error::contract("synthetic spec needs entity types, relation types and words"));
        }
        if self.relation_types > self.entity_types {
            return Err(Error::contract("synthetic spec needs relation_types <= entity_types"));
        }
        for p in [self.distractor_rate, self.two_word_rate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract("synthetic rates must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// "David works for AP in Seattle ." with its two relations.
pub fn example_sentence() -> AnnotatedSentence {
    let ent = |start, kind: &str| Entity {
        start,
        end: start + 1,
        kind: kind.into(),
    };
    AnnotatedSentence {
        tokens: ["David", "works", "for", "AP", "in", "Seattle", "."].map(String::from).to_vec(),
        entities: vec![ent(0, "Peop"), ent(3, "Org"), ent(5, "Loc")],
        relations: vec![
            Relation {
                head: 0,
                tail: 1,
                kind: "Work_For".into(),
            },
            Relation {
                head: 1,
                tail: 2,
                kind: "OrgBased_In".into(),
            },
        ],
    }
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: Rng,
    sentence: AnnotatedSentence,
}

impl Builder<'_> {
    fn push_entity(&mut self, t: usize) -> usize {
        let words = if self.rng.gen_bool(self.spec.two_word_rate) { 2 } else { 1 };
        let start = self.sentence.tokens.len();
        for _ in 0..words {
            let i = self.rng.gen_range(0..self.spec.words_per_type);
            self.sentence.tokens.push(self.spec.word(t, i));
        }
        self.sentence.entities.push(Entity {
            start,
            end: start + words,
            kind: SynthSpec::entity_type_name(t),
        });
        self.sentence.entities.len() - 1
    }

    fn push_separator(&mut self) {
        let s = SEPARATORS[self.rng.gen_range(0..SEPARATORS.len())];
        self.sentence.tokens.push(s.into());
    }

    /// A chain of `links` relations starting at entity type `t`.
    fn push_chain(&mut self, t: usize, links: usize) {
        let mut prev = self.push_entity(t);
        let mut ty = t;
        for _ in 0..links {
            let r = ty;
            self.sentence.tokens.extend(SynthSpec::trigger(r));
            let (_, next_ty) = self.spec.schema(r);
            let next = self.push_entity(next_ty);
            self.sentence.relations.push(Relation {
                head: prev,
                tail: next,
                kind: SynthSpec::relation_type_name(r),
            });
            prev = next;
            ty = next_ty;
        }
    }

    fn sentence(&mut self, triples: usize) -> AnnotatedSentence {
        self.sentence = AnnotatedSentence::default();
        if self.rng.gen_bool(0.5) {
            let o = OPENERS[self.rng.gen_range(0..OPENERS.len())];
            self.sentence.tokens.push(o.into());
        }
        let r_max = self.spec.relation_types;
        let mut chains = Vec::new();
        let mut left = triples;
        while left > 0 {
            let c = self.rng.gen_range(1..=left.min(r_max));
            chains.push(c);
            left -= c;
        }
        let distractor = self.rng.gen_bool(self.spec.distractor_rate) || chains.is_empty();
        let at = self.rng.gen_range(0..=chains.len());
        for i in 0..=chains.len() {
            if distractor && i == at {
                if !self.sentence.entities.is_empty() {
                    self.push_separator();
                }
                let t = self.rng.gen_range(0..self.spec.entity_types);
                self.push_entity(t);
            }
            if let Some(&c) = chains.get(i) {
                if !self.sentence.entities.is_empty() {
                    self.push_separator();
                }
                let t = self.rng.gen_range(0..=r_max - c);
                self.push_chain(t, c);
            }
        }
        self.sentence.tokens.push(END.into());
        core::mem::take(&mut self.sentence)
    }
}

/// Generates `spec.sentences` valid sentences. The number of sentences with
/// `k` triples is exactly `spec.allocation()[k]`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<AnnotatedSentence>> {
    spec.check()?;
    let counts = spec.allocation()?;
    let mut builder = Builder {
        spec,
        rng: stream(spec.seed, Stream::Synthetic),
        sentence: AnnotatedSentence::default(),
    };
    let with_example = spec.include_example && spec.entity_types >= 3 && spec.relation_types >= 2;
    let mut corpus = Vec::with_capacity(spec.sentences);
    let mut example_placed = false;
    for (k, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            if with_example && k == 2 && !example_placed {
                corpus.push(example_sentence());
                example_placed = true;
            } else {
                corpus.push(builder.sentence(k));
            }
        }
    }
    corpus.shuffle(&mut builder.rng);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn allocation_is_exact() {
        let spec = SynthSpec::default();
        assert_eq!(spec.allocation().unwrap(), vec![0, 16, 10, 6]);
        let spec = SynthSpec {
            sentences: 10,
            triple_weights: vec![1.0, 1.0, 1.0],
            ..SynthSpec::default()
        };
        assert_eq!(spec.allocation().unwrap(), vec![4, 3, 3]);
    }

    #[test]
    fn default_corpus_is_valid_small_and_deterministic() {
        let spec = SynthSpec::default();
        let corpus = generate_synthetic(&spec).unwrap();
        assert_eq!(corpus.len(), 32);
        let mut vocab = BTreeSet::new();
        for s in &corpus {
            assert!(s.validate().unwrap().is_empty());
            assert!(s.tokens.len() <= 32);
            vocab.extend(s.tokens.iter().cloned());
        }
        assert!(vocab.len() <= spec.vocab_size());
        assert!(spec.vocab_size() <= 64);
        assert!(corpus.contains(&example_sentence()));
        assert_eq!(generate_synthetic(&spec).unwrap(), corpus);
    }

    #[test]
    fn relations_follow_schema() {
        let spec = SynthSpec {
            sentences: 50,
            seed: 3,
            ..SynthSpec::default()
        };
        for s in generate_synthetic(&spec).unwrap() {
            for r in &s.relations {
                let id = (0..spec.relation_types)
                    .find(|&i| SynthSpec::relation_type_name(i) == r.kind)
                    .unwrap();
                let (a, b) = spec.schema(id);
                assert_eq!(s.entities[r.head].kind, SynthSpec::entity_type_name(a));
                assert_eq!(s.entities[r.tail].kind, SynthSpec::entity_type_name(b));
            }
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let bad = SynthSpec {
            relation_types: 4,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SynthSpec {
            triple_weights: vec![0.0],
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&bad).is_err());
    }
}
