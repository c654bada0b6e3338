use alloc::vec;
use alloc::vec::Vec;

use super::labels::sp;
use super::{order_entity_pairs, AnnotatedSentence, Entity, Extraction, LabelCatalog, Pair, Relation, Span, Triple, Vocab, PAD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Fixed sentence length `l`.
    pub max_len: usize,
    /// Slot count `n`.
    pub slots: usize,
    /// Put every relation of one (subject, predicate) pair in the same slot
    /// (for multi-label relation outputs). Otherwise one relation per slot.
    pub group_relations: bool,
}

/// Fixed-size supervision for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    /// Length `l`, PAD beyond `len`.
    pub token_ids: Vec<usize>,
    /// Token count after truncation.
    pub len: usize,
    /// BIO tag per position; O on PAD.
    pub ner_gold: Vec<usize>,
    /// Role tag per slot and position.
    pub sp_gold: Vec<Vec<usize>>,
    /// Relation ids per slot; empty slots hold only NONE.
    pub rel_gold: Vec<Vec<usize>>,
}

impl EncodedSample {
    pub fn max_len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn slots(&self) -> usize {
        self.sp_gold.len()
    }

    /// `true` on real tokens.
    pub fn keep_mask(&self) -> Vec<bool> {
        (0..self.max_len()).map(|i| i < self.len).collect()
    }
}

/// What encoding had to throw away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub truncated_tokens: usize,
    pub dropped_entities: usize,
    pub dropped_relations: usize,
    /// Relations ordered after the last slot.
    pub overflow_relations: usize,
    /// Entities not written to the NER tags because they overlap an
    /// earlier one.
    pub ner_conflicts: usize,
}

impl EncodeStats {
    pub fn merge(&mut self, other: &EncodeStats) {
        self.truncated_tokens += other.truncated_tokens;
        self.dropped_entities += other.dropped_entities;
        self.dropped_relations += other.dropped_relations;
        self.overflow_relations += other.overflow_relations;
        self.ner_conflicts += other.ner_conflicts;
    }
}

/// Cuts a sentence to `max_len` tokens, dropping annotations that touch the
/// removed tail.
fn truncate(sentence: &AnnotatedSentence, max_len: usize, stats: &mut EncodeStats) -> AnnotatedSentence {
    if sentence.tokens.len() <= max_len {
        return sentence.clone();
    }
    stats.truncated_tokens = sentence.tokens.len() - max_len;
    let mut remap = vec![None; sentence.entities.len()];
    let mut entities: Vec<Entity> = Vec::new();
    for (i, e) in sentence.entities.iter().enumerate() {
        if e.end <= max_len {
            remap[i] = Some(entities.len());
            entities.push(e.clone());
        } else {
            stats.dropped_entities += 1;
        }
    }
    let mut relations = Vec::new();
    for r in &sentence.relations {
        match (remap.get(r.head).copied().flatten(), remap.get(r.tail).copied().flatten()) {
            (Some(head), Some(tail)) => relations.push(Relation {
                head,
                tail,
                kind: r.kind.clone(),
            }),
            _ => stats.dropped_relations += 1,
        }
    }
    AnnotatedSentence {
        tokens: sentence.tokens[..max_len].to_vec(),
        entities,
        relations,
    }
}

/// Encodes one sentence into fixed-size gold tensors.
pub fn encode_sample(
    sentence: &AnnotatedSentence,
    vocab: &Vocab,
    catalog: &LabelCatalog,
    opts: &EncodeOptions,
) -> Result<(EncodedSample, EncodeStats)> {
    if opts.max_len == 0 || opts.slots == 0 {
        return Err(Error::contract("sentence length and slot count must be positive"));
    }
    let mut stats = EncodeStats::default();
    let s = truncate(sentence, opts.max_len, &mut stats);
    let l = opts.max_len;
    let len = s.tokens.len();

    let mut token_ids = vec![PAD; l];
    for (slot, tok) in token_ids.iter_mut().zip(&s.tokens) {
        *slot = vocab.id(tok);
    }

    let mut ner_gold = vec![0; l];
    let mut by_position: Vec<&Entity> = s.entities.iter().collect();
    by_position.sort_by_key(|e| (e.start, core::cmp::Reverse(e.end)));
    for e in by_position {
        let t = catalog.entity_id(&e.kind)?;
        if ner_gold[e.start..e.end].iter().any(|g| *g != 0) {
            stats.ner_conflicts += 1;
            continue;
        }
        ner_gold[e.start] = catalog.begin_tag(t);
        for g in &mut ner_gold[e.start + 1..e.end] {
            *g = catalog.inside_tag(t);
        }
    }

    // Group ordered relations into slots.
    let mut groups: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for p in order_entity_pairs(&s) {
        let rid = catalog.relation_id(&p.relation)?;
        match groups
            .iter_mut()
            .find(|g| opts.group_relations && g.0 == p.subject && g.1 == p.predicate)
        {
            Some(g) => g.2.push(rid),
            None => groups.push((p.subject, p.predicate, vec![rid])),
        }
    }
    for g in groups.iter().skip(opts.slots) {
        stats.overflow_relations += g.2.len();
    }

    let mut sp_gold = vec![vec![sp::O; l]; opts.slots];
    let mut rel_gold = vec![vec![catalog.none_id()]; opts.slots];
    for (slot, (subj, pred, rels)) in groups.into_iter().take(opts.slots).enumerate() {
        let tags = &mut sp_gold[slot];
        let (a, b) = (&s.entities[subj], &s.entities[pred]);
        tags[a.start] = sp::B_SUB;
        tags[a.start + 1..a.end].fill(sp::I_SUB);
        for i in b.start..b.end {
            if tags[i] == sp::O {
                tags[i] = if i == b.start { sp::B_PRD } else { sp::I_PRD };
            }
        }
        rel_gold[slot] = rels;
    }

    Ok((
        EncodedSample {
            token_ids,
            len,
            ner_gold,
            sp_gold,
            rel_gold,
        },
        stats,
    ))
}

/// Decoded view of one slot: role tag per position and the relation ids it
/// asserts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTags {
    pub roles: Vec<usize>,
    pub relations: Vec<usize>,
}

/// Well-formed BIO spans; an inside tag that does not continue an open span
/// of its own kind is dropped together with the rest of its run.
fn bio_spans(tags: &[usize], classify: impl Fn(usize) -> Option<(bool, usize)>) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut broken = false;
    for (i, &tag) in tags.iter().enumerate() {
        match classify(tag) {
            Some((true, k)) => {
                if let Some((s, k0)) = open.take() {
                    out.push((s, i, k0));
                }
                open = Some((i, k));
                broken = false;
            }
            Some((false, k)) if !broken && open.is_some_and(|(_, k0)| k0 == k) => {}
            Some((false, _)) => {
                if let Some((s, k0)) = open.take() {
                    out.push((s, i, k0));
                }
                broken = true;
            }
            None => {
                if let Some((s, k0)) = open.take() {
                    out.push((s, i, k0));
                }
                broken = false;
            }
        }
    }
    if let Some((s, k0)) = open {
        out.push((s, tags.len(), k0));
    }
    out
}

fn role_kind(tag: usize) -> Option<(bool, usize)> {
    match tag {
        sp::B_SUB => Some((true, 0)),
        sp::I_SUB => Some((false, 0)),
        sp::B_PRD => Some((true, 1)),
        sp::I_PRD => Some((false, 1)),
        _ => None,
    }
}

/// Majority entity type of the tokens in `[start, end)`, smallest id on
/// ties; `None` if no token carries a type.
fn vote(ner: &[usize], start: usize, end: usize, catalog: &LabelCatalog) -> Option<usize> {
    let mut counts = vec![0usize; catalog.entity_types().len()];
    for &tag in &ner[start..end] {
        if let Some((_, t)) = catalog.split_tag(tag) {
            counts[t] += 1;
        }
    }
    let best = counts.iter().copied().max()?;
    if best == 0 {
        return None;
    }
    counts.iter().position(|c| *c == best)
}

/// Turns tag sequences into extracted units.
///
/// Entities come from the BIO NER tags. Each slot contributes its first
/// subject span and first predicate span, typed by majority vote of the NER
/// tags over the span; slots lacking either span or a type contribute
/// nothing. A pair is emitted once per distinct (subject, predicate); one
/// triple is emitted per non-NONE relation id.
pub fn decode_tags(ner: &[usize], slots: &[SlotTags], catalog: &LabelCatalog) -> Extraction {
    let types = catalog.entity_types();
    let entities = bio_spans(ner, |t| catalog.split_tag(t))
        .into_iter()
        .map(|(s, e, k)| Span::new(s, e, &types[k]))
        .collect();
    let mut out = Extraction {
        entities,
        ..Extraction::default()
    };
    for slot in slots {
        let spans = bio_spans(&slot.roles[..ner.len().min(slot.roles.len())], role_kind);
        let first = |role: usize| spans.iter().find(|s| s.2 == role).map(|s| (s.0, s.1));
        let (Some(sub), Some(prd)) = (first(0), first(1)) else {
            continue;
        };
        let (Some(ts), Some(tp)) = (vote(ner, sub.0, sub.1, catalog), vote(ner, prd.0, prd.1, catalog)) else {
            continue;
        };
        let pair = Pair {
            subject: Span::new(sub.0, sub.1, &types[ts]),
            predicate: Span::new(prd.0, prd.1, &types[tp]),
        };
        for &r in &slot.relations {
            if r != catalog.none_id() && r < catalog.relation_count() {
                out.triples.push(Triple {
                    subject: pair.subject.clone(),
                    predicate: pair.predicate.clone(),
                    relation: catalog.relation_types()[r].clone(),
                });
            }
        }
        if !out.pairs.contains(&pair) {
            out.pairs.push(pair);
        }
    }
    out
}

/// Decodes the gold side of an encoded sample.
pub fn decode_gold(sample: &EncodedSample, catalog: &LabelCatalog) -> Extraction {
    let slots: Vec<SlotTags> = sample
        .sp_gold
        .iter()
        .zip(&sample.rel_gold)
        .map(|(roles, rels)| SlotTags {
            roles: roles.clone(),
            relations: rels.clone(),
        })
        .collect();
    decode_tags(&sample.ner_gold[..sample.len], &slots, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, example_sentence, NONE_RELATION};
    use alloc::string::String;

    fn opts(max_len: usize, slots: usize) -> EncodeOptions {
        EncodeOptions {
            max_len,
            slots,
            group_relations: false,
        }
    }

    fn fixture() -> (AnnotatedSentence, Vocab, LabelCatalog) {
        let s = example_sentence();
        let v = build_vocab(core::slice::from_ref(&s), 1);
        let c = LabelCatalog::from_corpus(core::slice::from_ref(&s)).unwrap();
        (s, v, c)
    }

    #[test]
    fn empty_slots_are_all_o_with_none() {
        let (s, v, c) = fixture();
        let (e, stats) = encode_sample(&s, &v, &c, &opts(10, 3)).unwrap();
        assert_eq!(stats, EncodeStats::default());
        assert!(e.sp_gold[2].iter().all(|t| *t == sp::O));
        assert_eq!(e.rel_gold[2], vec![c.none_id()]);
        assert_eq!(c.relation_types()[c.none_id()], NONE_RELATION);
        for pos in e.len..10 {
            assert_eq!(e.token_ids[pos], PAD);
            assert_eq!(e.ner_gold[pos], 0);
            assert!(e.sp_gold.iter().all(|slot| slot[pos] == sp::O));
        }
    }

    #[test]
    fn single_token_entity_gets_begin_only() {
        let (s, v, c) = fixture();
        let (e, _) = encode_sample(&s, &v, &c, &opts(10, 3)).unwrap();
        // slot 0 subject is the single-token "David"
        assert_eq!(e.sp_gold[0][0], sp::B_SUB);
        assert!(!e.sp_gold[0].contains(&sp::I_SUB));
    }

    #[test]
    fn round_trip_recovers_gold() {
        let (s, v, c) = fixture();
        let (e, _) = encode_sample(&s, &v, &c, &opts(10, 3)).unwrap();
        let back = decode_gold(&e, &c);
        assert_eq!(back, s.gold());
    }

    #[test]
    fn overflow_and_truncation_are_counted() {
        let (s, v, c) = fixture();
        let (e, stats) = encode_sample(&s, &v, &c, &opts(10, 1)).unwrap();
        assert_eq!(stats.overflow_relations, 1);
        assert_eq!(decode_gold(&e, &c).triples.len(), 1);

        let (e, stats) = encode_sample(&s, &v, &c, &opts(4, 3)).unwrap();
        assert_eq!(e.len, 4);
        assert_eq!(stats.truncated_tokens, s.tokens.len() - 4);
        assert_eq!(stats.dropped_entities, 1);
        assert_eq!(stats.dropped_relations, 1);
    }

    #[test]
    fn unknown_labels_are_errors() {
        let (mut s, v, c) = fixture();
        s.relations[0].kind = String::from("Kill");
        assert!(matches!(
            encode_sample(&s, &v, &c, &opts(10, 3)),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn stray_inside_tags_are_dropped() {
        let c = LabelCatalog::new(vec!["A".into(), "B".into()], vec!["R".into()]).unwrap();
        // I-A  B-A I-A  I-B  O  B-B
        let ner = [2, 1, 2, 4, 0, 3];
        let x = decode_tags(&ner, &[], &c);
        assert_eq!(x.entities, vec![Span::new(1, 3, "A"), Span::new(5, 6, "B")]);

        let roles = vec![sp::I_SUB, sp::O, sp::O, sp::O, sp::O, sp::B_PRD];
        let slot = SlotTags { roles, relations: vec![0] };
        assert!(decode_tags(&ner, &[slot], &c).triples.is_empty());
    }

    #[test]
    fn all_o_slots_and_none_relations_emit_nothing() {
        let c = LabelCatalog::new(vec!["A".into()], vec!["R".into()]).unwrap();
        let ner = [1, 0, 1];
        let empty = SlotTags { roles: vec![sp::O; 3], relations: vec![0] };
        let none = SlotTags {
            roles: vec![sp::B_SUB, sp::O, sp::B_PRD],
            relations: vec![c.none_id()],
        };
        let x = decode_tags(&ner, &[empty, none], &c);
        assert!(x.triples.is_empty());
        assert_eq!(x.pairs.len(), 1);
    }

    #[test]
    fn span_type_is_majority_vote() {
        let c = LabelCatalog::new(vec!["A".into(), "B".into()], vec!["R".into()]).unwrap();
        // tokens typed B, B, A under the subject; untyped predicate -> skipped
        let ner = [3, 4, 1, 0];
        let slot = SlotTags {
            roles: vec![sp::B_SUB, sp::I_SUB, sp::I_SUB, sp::B_PRD],
            relations: vec![0],
        };
        assert!(decode_tags(&ner, &[slot.clone()], &c).triples.is_empty());
        let ner = [3, 4, 1, 1];
        let x = decode_tags(&ner, &[slot], &c);
        assert_eq!(x.triples[0].subject, Span::new(0, 3, "B"));
        assert_eq!(x.triples[0].predicate, Span::new(3, 4, "A"));
    }
}
