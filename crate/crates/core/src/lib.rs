//! Joint entity and relation extraction built on a small reverse-mode
//! autodiff engine.
//!
//! The pipeline has three heads sharing one computation graph:
//!
//! * NER: token embeddings, a context encoder stack, an LSTM decoder and a
//!   softmax over BIO tags.
//! * Entity pair extraction: the Encoder-LSTM recurrence (an LSTM whose four
//!   gates each run their own Transformer encoder over the whole sentence)
//!   unrolled for `n` slots, each decoded into subject/predicate role tags.
//! * Relation classification: per slot, a layer-normalised concatenation of
//!   role probabilities, pair encoding, NER probabilities and word vectors,
//!   an encoder, additive attention pooling and a softmax (or sigmoid)
//!   output layer.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints
//! and the command line live in the `epex` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod checks;
pub mod corpus;
pub mod encoder_lstm;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
