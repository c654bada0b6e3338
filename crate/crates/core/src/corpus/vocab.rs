use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnnotatedSentence;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id map with `PAD = 0` and `UNK = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Validation("vocabulary must start with <pad>, <unk>".into()));
        }
        let index: BTreeMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::Validation("vocabulary contains duplicate tokens".into()));
        }
        Ok(Vocab { tokens, index })
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unknown tokens map to [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Builds a vocabulary from every token occurring at least `min_count`
/// times, most frequent first, ties in lexicographic order.
pub fn build_vocab(corpus: &[AnnotatedSentence], min_count: usize) -> Vocab {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count.max(1) && *t != PAD_TOKEN && *t != UNK_TOKEN)
        .collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps it
    // as the tie-break.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let mut tokens = alloc::vec![String::from(PAD_TOKEN), String::from(UNK_TOKEN)];
    tokens.extend(ranked.into_iter().map(|(t, _)| String::from(t)));
    Vocab::try_from(tokens).expect("built vocabulary is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sent(words: &[&str]) -> AnnotatedSentence {
        AnnotatedSentence {
            tokens: words.iter().map(|w| String::from(*w)).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn empty_corpus_has_only_specials() {
        let v = build_vocab(&[], 1);
        assert_eq!(v.tokens(), &[PAD_TOKEN, UNK_TOKEN]);
    }

    #[test]
    fn frequency_then_lexicographic() {
        let corpus = vec![sent(&["b", "a", "c", "c"]), sent(&["a", "d"])];
        let v = build_vocab(&corpus, 1);
        assert_eq!(&v.tokens()[2..], &["a", "c", "b", "d"]);
        assert_eq!(build_vocab(&corpus, 1), v);
    }

    #[test]
    fn rare_tokens_become_unk() {
        let corpus = vec![sent(&["b", "a", "a"])];
        let v = build_vocab(&corpus, 2);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), UNK);
        assert_eq!(v.id("never"), UNK);
    }

    #[test]
    fn malformed_lists_are_rejected() {
        assert!(Vocab::try_from(vec![String::from("x")]).is_err());
        let dup = vec![PAD_TOKEN.into(), UNK_TOKEN.into(), "a".into(), "a".into()];
        assert!(Vocab::try_from(dup).is_err());
    }
}
