//! Run configuration: a JSON file layered over a preset, then CLI overrides.

use std::path::{Path, PathBuf};

use epex_core::corpus::SynthSpec;
use epex_core::model::ModelConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::FormatError;

/// Starting point that a config file refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size hyperparameters.
    #[default]
    Full,
    /// Small dimensions for CPU runs.
    Desk,
}

impl Preset {
    pub fn model(self) -> ModelConfig {
        match self {
            Preset::Full => ModelConfig::default(),
            Preset::Desk => ModelConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// Model and optimiser settings. Label counts and vocabulary size are
    /// filled in from the training corpus.
    pub model: ModelConfig,
    pub corpus: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    /// Defaults to `<out_dir>/checkpoint.bin`.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub folds: usize,
    /// Tokens seen fewer times than this map to UNK.
    pub min_count: usize,
    /// End training once every training sentence is extracted perfectly.
    pub stop_when_perfect: bool,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Full)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        RunConfig {
            preset,
            model: preset.model(),
            corpus: None,
            validation: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            folds: 10,
            min_count: 1,
            stop_when_perfect: false,
            synth: SynthSpec::default(),
        }
    }

    /// Parses a config document. Fields it omits keep the values of its
    /// `preset` (full when absent); nested objects merge key by key.
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let doc: Value = serde_json::from_str(text)?;
        let preset = match doc.get("preset") {
            Some(p) => serde_json::from_value(p.clone())?,
            None => Preset::Full,
        };
        let mut base = serde_json::to_value(RunConfig::preset(preset))?;
        merge(&mut base, doc);
        Ok(serde_json::from_value(base)?)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = crate::io::read_text(path)?;
        RunConfig::from_json(&text).map_err(|e| FormatError::Line {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoint.bin"))
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_preset_values() {
        let c = RunConfig::from_json(r#"{"preset":"desk","model":{"epochs":7,"dropout":{"rc":0.2}}}"#).unwrap();
        assert_eq!(c.model.epochs, 7);
        assert_eq!(c.model.max_len, 32);
        assert_eq!(c.model.dropout.rc, 0.2);
        assert_eq!(c.model.dropout.ner, ModelConfig::desk().dropout.ner);
    }

    #[test]
    fn empty_document_is_full_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::default().model.learning_rate, 2e-5);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"epochs":3}"#).is_err());
    }
}
