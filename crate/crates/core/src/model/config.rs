use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{sp, LabelCatalog};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;

/// How relation probabilities are produced and trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcMode {
    /// One relation per slot: softmax and cross-entropy.
    #[default]
    SoftmaxMulticlass,
    /// Independent sigmoid per relation and binary cross-entropy; a slot may
    /// carry several relations for the same pair.
    SigmoidMultilabel,
}

/// Component switches for ablation runs. All off is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Replace both LSTM decoders by direct linear projections.
    pub no_lstm_decoder: bool,
    /// Feed relation classification only `[M_t; H_t]`, without layer norm.
    pub no_connect_layernorm: bool,
    /// Use zero encoder layers inside the Encoder-LSTM gates, which turns
    /// the cell into a per-token LSTM.
    pub plain_lstm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dropout {
    /// Embeddings and the context encoder.
    pub ner: f64,
    /// Encoder-LSTM gate encoders.
    pub epe: f64,
    /// Relation encoder.
    pub rc: f64,
}

impl Default for Dropout {
    fn default() -> Self {
        Dropout {
            ner: 0.4,
            epe: 0.4,
            rc: 0.4,
        }
    }
}

impl Dropout {
    pub fn uniform(rate: f64) -> Self {
        Dropout {
            ner: rate,
            epe: rate,
            rc: rate,
        }
    }
}

/// Every dimension and training hyperparameter of the joint model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Fixed sentence length `l`.
    pub max_len: usize,
    /// Word vector width `d`.
    pub embed_dim: usize,
    /// Encoder-LSTM hidden width `d_w`.
    pub hidden_dim: usize,
    /// Entity-pair slots `n`.
    pub slots: usize,
    /// NER tag count `n_t`.
    pub ner_labels: usize,
    /// Role tag count `n_d`.
    pub sp_labels: usize,
    /// Relation classes `n_r`, including NONE.
    pub relation_labels: usize,
    pub vocab_size: usize,
    pub heads: usize,
    /// Layers of each gate encoder inside the Encoder-LSTM.
    pub encoder_layers: usize,
    /// Layers of the relation encoder.
    pub rc_encoder_layers: usize,
    /// Layers of the context encoder that produces word vectors.
    pub context_layers: usize,
    pub dropout: Dropout,
    pub rc_mode: RcMode,
    pub ablation: Ablation,
    /// Compute only on real tokens. Padding is always a suffix, so this
    /// gives the same result as running at full length with masks.
    pub trim_padding: bool,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_len: 128,
            embed_dim: 768,
            hidden_dim: 96,
            slots: 3,
            ner_labels: 9,
            sp_labels: sp::COUNT,
            relation_labels: 6,
            vocab_size: 2,
            heads: 4,
            encoder_layers: 3,
            rc_encoder_layers: 1,
            context_layers: 2,
            dropout: Dropout::default(),
            rc_mode: RcMode::default(),
            ablation: Ablation::default(),
            trim_padding: true,
            optimizer: OptimizerKind::Adam,
            learning_rate: 2e-5,
            weight_decay: 0.0,
            batch_size: 8,
            epochs: 40,
        }
    }
}

impl ModelConfig {
    /// Small dimensions that train on one CPU core in minutes.
    pub fn desk() -> Self {
        ModelConfig {
            max_len: 32,
            embed_dim: 32,
            hidden_dim: 32,
            encoder_layers: 2,
            rc_encoder_layers: 1,
            context_layers: 2,
            dropout: Dropout::uniform(0.1),
            learning_rate: 1e-3,
            epochs: 300,
            ..ModelConfig::default()
        }
    }

    /// Takes label counts and vocabulary size from the data.
    pub fn with_data(mut self, catalog: &LabelCatalog, vocab_size: usize) -> Self {
        self.ner_labels = catalog.ner_count();
        self.sp_labels = catalog.sp_count();
        self.relation_labels = catalog.relation_count();
        self.vocab_size = vocab_size;
        self
    }

    /// Gate encoder depth after the `plain_lstm` switch.
    pub fn effective_encoder_layers(&self) -> usize {
        if self.ablation.plain_lstm {
            0
        } else {
            self.encoder_layers
        }
    }

    /// Width of `Z = LayerNorm([S; N])`.
    pub fn z_dim(&self) -> usize {
        self.embed_dim + self.ner_labels
    }

    /// Width of the per-slot relation classification input.
    pub fn rc_input_dim(&self) -> usize {
        let base = self.sp_labels + self.hidden_dim;
        if self.ablation.no_connect_layernorm {
            base
        } else {
            base + self.ner_labels + self.embed_dim
        }
    }

    /// Width of the pooled relation vector `r_t`.
    pub fn rc_pooled_dim(&self) -> usize {
        self.hidden_dim + self.sp_labels
    }

    /// Checks every field; all problems are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let positive = [
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("slots", self.slots),
            ("ner_labels", self.ner_labels),
            ("sp_labels", self.sp_labels),
            ("relation_labels", self.relation_labels),
            ("heads", self.heads),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                bad.push(format!("{name} must be positive"));
            }
        }
        if self.heads > 0 && self.hidden_dim % self.heads != 0 {
            bad.push(format!("hidden_dim {} is not divisible by heads {}", self.hidden_dim, self.heads));
        }
        if self.sp_labels != sp::COUNT {
            bad.push(format!("sp_labels must be {}", sp::COUNT));
        }
        if self.ner_labels % 2 == 0 {
            bad.push(format!("ner_labels {} is not 2·types + 1", self.ner_labels));
        }
        if self.relation_labels < 2 {
            bad.push("relation_labels must include NONE and at least one relation".into());
        }
        if self.vocab_size < 2 {
            bad.push("vocab_size must cover PAD and UNK".into());
        }
        for (name, r) in [("ner", self.dropout.ner), ("epe", self.dropout.epe), ("rc", self.dropout.rc)] {
            if !(0.0..1.0).contains(&r) {
                bad.push(format!("dropout.{name} {r} outside [0, 1)"));
            }
        }
        if !(self.learning_rate > 0.0) {
            bad.push("learning_rate must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            bad.push("weight_decay must be non-negative".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid model config: {}", bad.join("; "))))
        }
    }

    /// Names of the shape fields on which two configs disagree.
    pub fn shape_conflicts(&self, other: &ModelConfig) -> Vec<&'static str> {
        let pairs = [
            ("max_len", self.max_len, other.max_len),
            ("embed_dim", self.embed_dim, other.embed_dim),
            ("hidden_dim", self.hidden_dim, other.hidden_dim),
            ("slots", self.slots, other.slots),
            ("ner_labels", self.ner_labels, other.ner_labels),
            ("sp_labels", self.sp_labels, other.sp_labels),
            ("relation_labels", self.relation_labels, other.relation_labels),
            ("vocab_size", self.vocab_size, other.vocab_size),
            ("heads", self.heads, other.heads),
            ("encoder_layers", self.effective_encoder_layers(), other.effective_encoder_layers()),
            ("rc_encoder_layers", self.rc_encoder_layers, other.rc_encoder_layers),
            ("context_layers", self.context_layers, other.context_layers),
        ];
        let mut out: Vec<&'static str> = pairs.iter().filter(|p| p.1 != p.2).map(|p| p.0).collect();
        if self.ablation != other.ablation {
            out.push("ablation");
        }
        if self.rc_mode != other.rc_mode {
            out.push("rc_mode");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_with_real_label_counts() {
        let c = ModelConfig::default();
        assert_eq!((c.max_len, c.hidden_dim, c.slots, c.heads, c.batch_size, c.epochs), (128, 96, 3, 4, 8, 40));
        assert_eq!(c.learning_rate, 2e-5);
        assert_eq!(c.dropout, Dropout::uniform(0.4));
        let catalog = LabelCatalog::new(alloc::vec!["A".into(), "B".into()], alloc::vec!["R".into()]).unwrap();
        for c in [ModelConfig::default(), ModelConfig::desk()] {
            c.with_data(&catalog, 10).validate().unwrap();
        }
    }

    #[test]
    fn problems_are_collected() {
        let c = ModelConfig {
            hidden_dim: 30,
            slots: 0,
            learning_rate: 0.0,
            ..ModelConfig::desk()
        };
        let Err(Error::Contract(msg)) = c.validate() else { panic!() };
        assert!(msg.contains("slots") && msg.contains("divisible") && msg.contains("learning_rate"), "{msg}");
    }

    #[test]
    fn derived_widths() {
        let mut c = ModelConfig::desk();
        c.ner_labels = 7;
        assert_eq!(c.z_dim(), 39);
        assert_eq!(c.rc_input_dim(), 5 + 32 + 7 + 32);
        assert_eq!(c.rc_pooled_dim(), 37);
        c.ablation.no_connect_layernorm = true;
        assert_eq!(c.rc_input_dim(), 37);
        c.ablation.plain_lstm = true;
        assert_eq!(c.effective_encoder_layers(), 0);
    }

    #[test]
    fn conflicts_name_fields() {
        let a = ModelConfig::desk();
        let b = ModelConfig {
            hidden_dim: 64,
            slots: 2,
            ..a.clone()
        };
        assert_eq!(a.shape_conflicts(&b), alloc::vec!["hidden_dim", "slots"]);
    }
}
