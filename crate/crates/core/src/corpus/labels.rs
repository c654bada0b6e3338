use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnnotatedSentence;
use crate::error::{Error, Result};

/// Name of the relation class carried by empty slots.
pub const NONE_RELATION: &str = "NONE";

/// Subject/predicate role tags.
pub mod sp {
    pub const O: usize = 0;
    pub const B_SUB: usize = 1;
    pub const I_SUB: usize = 2;
    pub const B_PRD: usize = 3;
    pub const I_PRD: usize = 4;
    pub const COUNT: usize = 5;
    pub const NAMES: [&str; COUNT] = ["O", "B-SUB", "I-SUB", "B-PRD", "I-PRD"];
}

/// Entity and relation inventories and the tag ids derived from them.
///
/// NER tags are BIO over entity types: `O = 0`, `B-T_i = 1 + 2i`,
/// `I-T_i = 2 + 2i`. Relation ids follow `relation_types`, whose last entry
/// is always [`NONE_RELATION`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CatalogRepr", into = "CatalogRepr")]
pub struct LabelCatalog {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CatalogRepr {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
}

impl TryFrom<CatalogRepr> for LabelCatalog {
    type Error = Error;

    fn try_from(r: CatalogRepr) -> Result<Self> {
        let mut rel = r.relation_types;
        if rel.last().map(String::as_str) != Some(NONE_RELATION) {
            return Err(Error::Validation(format!("relation types must end with {NONE_RELATION}")));
        }
        rel.pop();
        LabelCatalog::new(r.entity_types, rel)
    }
}

impl From<LabelCatalog> for CatalogRepr {
    fn from(c: LabelCatalog) -> Self {
        CatalogRepr {
            entity_types: c.entity_types,
            relation_types: c.relation_types,
        }
    }
}

impl LabelCatalog {
    /// `relation_types` excludes the NONE class, which is appended.
    pub fn new(entity_types: Vec<String>, relation_types: Vec<String>) -> Result<Self> {
        if entity_types.is_empty() {
            return Err(Error::Validation("label catalog needs at least one entity type".into()));
        }
        let unique = |v: &[String]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        if !unique(&entity_types) || !unique(&relation_types) {
            return Err(Error::Validation("label catalog contains duplicate types".into()));
        }
        if relation_types.iter().any(|r| r == NONE_RELATION) {
            return Err(Error::Validation(format!("{NONE_RELATION} is reserved")));
        }
        let mut relation_types = relation_types;
        relation_types.push(String::from(NONE_RELATION));
        Ok(LabelCatalog {
            entity_types,
            relation_types,
        })
    }

    /// Collects the sorted entity and relation type names of a corpus.
    pub fn from_corpus(corpus: &[AnnotatedSentence]) -> Result<Self> {
        let mut ents = BTreeSet::new();
        let mut rels = BTreeSet::new();
        for s in corpus {
            ents.extend(s.entities.iter().map(|e| e.kind.clone()));
            rels.extend(s.relations.iter().map(|r| r.kind.clone()));
        }
        Self::new(ents.into_iter().collect(), rels.into_iter().collect())
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    /// Includes NONE as the last entry.
    pub fn relation_types(&self) -> &[String] {
        &self.relation_types
    }

    /// `n_t = 2·|entity types| + 1`.
    pub fn ner_count(&self) -> usize {
        2 * self.entity_types.len() + 1
    }

    pub fn sp_count(&self) -> usize {
        sp::COUNT
    }

    /// `n_r`, including NONE.
    pub fn relation_count(&self) -> usize {
        self.relation_types.len()
    }

    pub fn none_id(&self) -> usize {
        self.relation_types.len() - 1
    }

    pub fn entity_id(&self, kind: &str) -> Result<usize> {
        self.entity_types
            .iter()
            .position(|t| t == kind)
            .ok_or_else(|| Error::UnknownLabel {
                scheme: "entity",
                label: kind.into(),
            })
    }

    pub fn relation_id(&self, kind: &str) -> Result<usize> {
        self.relation_types
            .iter()
            .position(|t| t == kind)
            .ok_or_else(|| Error::UnknownLabel {
                scheme: "relation",
                label: kind.into(),
            })
    }

    pub fn begin_tag(&self, entity: usize) -> usize {
        1 + 2 * entity
    }

    pub fn inside_tag(&self, entity: usize) -> usize {
        2 + 2 * entity
    }

    /// `(is_begin, entity type id)` for a non-O tag.
    pub fn split_tag(&self, tag: usize) -> Option<(bool, usize)> {
        if tag == 0 || tag >= self.ner_count() {
            None
        } else {
            Some((tag % 2 == 1, (tag - 1) / 2))
        }
    }

    pub fn ner_tag_name(&self, tag: usize) -> Option<String> {
        match self.split_tag(tag) {
            None if tag == 0 => Some("O".into()),
            None => None,
            Some((true, e)) => Some(format!("B-{}", self.entity_types[e])),
            Some((false, e)) => Some(format!("I-{}", self.entity_types[e])),
        }
    }
}
