use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Vocabulary;

/// How the slot decoder consumes the predicted-intent information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    /// Per-token graph attention over the slot state and intent embeddings.
    AdaptiveGat,
    /// Dot-product attention from the slot state over intent embeddings;
    /// the context vector is summed with the slot state.
    VanillaAttention,
    /// Same graph, degree-normalized mean aggregation instead of attention.
    Gcn,
    /// The summed intent embeddings are added to every slot state.
    SentenceLevel,
    /// Sentence-level augmentation with a 2-layer slot decoder LSTM.
    #[serde(rename = "sentence_level_2layer")]
    SentenceLevel2Layer,
}

/// Architecture hyperparameters.
///
/// `hidden_dim` is the encoder output size: the BiLSTM contributes
/// `hidden_dim` (two directions of half that) and self-attention another
/// `hidden_dim`, so token encodings have width `2 * hidden_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub key_dim: usize,
    /// Shared dimension of the slot decoder state and intent embeddings.
    pub graph_dim: usize,
    pub graph_heads: usize,
    pub graph_layers: usize,
    pub n_intents: usize,
    pub n_slots: usize,
    /// Intents with probability strictly above this are predicted.
    pub intent_threshold: f64,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub interaction: InteractionMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            hidden_dim: 256,
            key_dim: 32,
            graph_dim: 64,
            graph_heads: 4,
            graph_layers: 2,
            n_intents: 0,
            n_slots: 0,
            intent_threshold: 0.5,
            leaky_slope: 0.01,
            dropout: 0.4,
            interaction: InteractionMode::AdaptiveGat,
        }
    }
}

impl ModelConfig {
    /// Desk-scale configuration for gradient checks and fast tests.
    pub fn micro() -> Self {
        ModelConfig {
            embed_dim: 8,
            hidden_dim: 16,
            key_dim: 8,
            graph_dim: 8,
            graph_heads: 2,
            graph_layers: 2,
            dropout: 0.0,
            ..ModelConfig::default()
        }
    }

    /// Fill the label counts from a vocabulary.
    pub fn with_vocab(mut self, vocab: &Vocabulary) -> Self {
        self.n_intents = vocab.n_intents();
        self.n_slots = vocab.n_slots();
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(2) {
            return Err(ConfigError::OddHidden(self.hidden_dim));
        }
        if self.graph_heads == 0 || !self.graph_dim.is_multiple_of(self.graph_heads) {
            return Err(ConfigError::HeadsDontDivide {
                dim: self.graph_dim,
                heads: self.graph_heads,
            });
        }
        if self.embed_dim == 0 || self.key_dim == 0 || self.graph_dim == 0 {
            return Err(ConfigError::ZeroDim);
        }
        if self.n_intents == 0 || self.n_slots == 0 {
            return Err(ConfigError::NoLabels);
        }
        if !(self.intent_threshold > 0.0 && self.intent_threshold < 1.0) {
            return Err(ConfigError::BadThreshold(self.intent_threshold));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ConfigError::BadDropout(self.dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("hidden_dim {0} must be positive and even (two LSTM directions)")]
    OddHidden(usize),
    #[error("graph_dim {dim} must be divisible by graph_heads {heads}")]
    HeadsDontDivide { dim: usize, heads: usize },
    #[error("embed_dim, key_dim and graph_dim must be positive")]
    ZeroDim,
    #[error("label counts are unset; call with_vocab first")]
    NoLabels,
    #[error("intent_threshold {0} must lie strictly between 0 and 1")]
    BadThreshold(f64),
    #[error("dropout {0} must lie in [0, 1)")]
    BadDropout(f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_width_is_512_at_hidden_256() {
        let cfg = ModelConfig {
            n_intents: 3,
            n_slots: 4,
            ..ModelConfig::default()
        };
        cfg.validate().unwrap();
        assert_eq!(2 * cfg.hidden_dim, 512);
    }

    #[test]
    fn rejects_odd_hidden_and_bad_heads() {
        let cfg = ModelConfig {
            hidden_dim: 15,
            n_intents: 1,
            n_slots: 2,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig {
            graph_heads: 3,
            n_intents: 1,
            n_slots: 2,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn interaction_mode_serde_names() {
        let names: Vec<String> = [
            InteractionMode::AdaptiveGat,
            InteractionMode::VanillaAttention,
            InteractionMode::Gcn,
            InteractionMode::SentenceLevel,
            InteractionMode::SentenceLevel2Layer,
        ]
        .iter()
        .map(|m| serde_json::to_string(m).unwrap())
        .collect();
        assert_eq!(
            names,
            vec![
                "\"adaptive_gat\"",
                "\"vanilla_attention\"",
                "\"gcn\"",
                "\"sentence_level\"",
                "\"sentence_level_2layer\"",
            ]
        );
    }
}
