//! Reusable blocks: embeddings, linear maps, LSTM, multi-head self-attention,
//! the Transformer encoder stack, dropout and additive attention pooling.

mod attention;
mod dropout;
mod encoder;
mod linear;
mod lstm;
mod pool;

pub use attention::MultiHeadAttention;
pub use dropout::{dropout_apply, Mode};
pub use encoder::{Encoder, EncoderLayer};
pub use linear::{Embedding, LayerNorm, Linear};
pub use lstm::{lstm_cell, Lstm};
pub use pool::AttentionPool;

/// Layer-norm epsilon used throughout the model.
pub const LN_EPS: f64 = 1e-12;

pub(crate) fn name(prefix: &str, leaf: &str) -> alloc::string::String {
    if prefix.is_empty() {
        alloc::string::String::from(leaf)
    } else {
        alloc::format!("{prefix}.{leaf}")
    }
}
