use alloc::vec::Vec;

use super::AnnotatedSentence;

/// One relation in slot order, with entity indices into the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedPair {
    pub subject: usize,
    pub predicate: usize,
    pub relation: alloc::string::String,
}

/// Orders the relations of a sentence left to right: by subject start, then
/// predicate start, then relation name.
///
/// Relation ids in a [`LabelCatalog`](super::LabelCatalog) built from a
/// corpus follow name order, so this is also relation-id order. Remaining
/// ties (only possible with overlapping entities) fall back to span ends,
/// entity types and finally entity indices, which makes the order total.
pub fn order_entity_pairs(sentence: &AnnotatedSentence) -> Vec<OrderedPair> {
    let ents = &sentence.entities;
    let mut rels: Vec<_> = sentence
        .relations
        .iter()
        .filter(|r| r.head < ents.len() && r.tail < ents.len())
        .collect();
    rels.sort_by(|a, b| {
        let (sa, pa) = (&ents[a.head], &ents[a.tail]);
        let (sb, pb) = (&ents[b.head], &ents[b.tail]);
        (sa.start, pa.start, &a.kind, sa.end, pa.end, &sa.kind, &pa.kind, a.head, a.tail).cmp(&(
            sb.start, pb.start, &b.kind, sb.end, pb.end, &sb.kind, &pb.kind, b.head, b.tail,
        ))
    });
    rels.into_iter()
        .map(|r| OrderedPair {
            subject: r.head,
            predicate: r.tail,
            relation: r.kind.clone(),
        })
        .collect()
}
