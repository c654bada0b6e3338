//! Corpus format, label codecs, pair ordering, tensor encoding, vocabulary,
//! fold splits and a synthetic corpus generator.

mod encode;
mod folds;
mod labels;
mod ordering;
mod sentence;
pub mod synth;
mod vocab;

pub use encode::{decode_gold, decode_tags, encode_sample, EncodeOptions, EncodeStats, EncodedSample, SlotTags};
pub use folds::{split_folds, Fold};
pub use labels::{sp, LabelCatalog, NONE_RELATION};
pub use ordering::{order_entity_pairs, OrderedPair};
pub use sentence::{AnnotatedSentence, Entity, Extraction, Pair, Relation, Span, Triple, Warning};
pub use synth::{example_sentence, generate_synthetic, SynthSpec};
pub use vocab::{build_vocab, Vocab, PAD, UNK};
