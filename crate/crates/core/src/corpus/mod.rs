//! Dataset model, text format I/O, vocabularies, batching and the
//! multi-intent corpus mixer.

mod batch;
mod format;
mod mix;
mod vocab;

pub use batch::{encode_batch, Batch};
pub use format::{format_dataset, parse_dataset, parse_dataset_str, write_dataset};
pub use mix::{mix_datasets, reference_split_sizes, MixSpec, ReferenceCorpus};
pub use vocab::{build_vocab, Vocabulary, VocabularyData, PAD_ID, UNK_ID};

use thiserror::Error;

/// One labelled utterance: whitespace tokens, aligned BIO slot labels, and a
/// non-empty set of intent labels (kept in first-occurrence order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub slots: Vec<String>,
    pub intents: Vec<String>,
}

impl Utterance {
    pub fn new(
        tokens: Vec<String>,
        slots: Vec<String>,
        intents: Vec<String>,
    ) -> Result<Self, CorpusError> {
        let u = Utterance {
            tokens,
            slots,
            intents,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Intent labels as an order-insensitive set.
    pub fn intent_set(&self) -> std::collections::BTreeSet<&str> {
        self.intents.iter().map(String::as_str).collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.tokens.is_empty() {
            return Err(CorpusError::EmptyUtterance);
        }
        if self.tokens.len() != self.slots.len() {
            return Err(CorpusError::LengthMismatch {
                tokens: self.tokens.len(),
                slots: self.slots.len(),
            });
        }
        if self.intents.is_empty() {
            return Err(CorpusError::NoIntents);
        }
        let mut seen = std::collections::BTreeSet::new();
        for i in &self.intents {
            if i.is_empty() {
                return Err(CorpusError::EmptyIntentLabel);
            }
            if !seen.insert(i.as_str()) {
                return Err(CorpusError::DuplicateIntent { label: i.clone() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected `token slot`, got {text:?}")]
    BadTokenLine { line: usize, text: String },
    #[error("line {line}: empty utterance block")]
    EmptyBlock { line: usize },
    #[error("line {line}: missing intent line at end of block")]
    MissingIntentLine { line: usize },
    #[error("line {line}: empty intent label")]
    BadIntentLine { line: usize },
    #[error("utterance has no tokens")]
    EmptyUtterance,
    #[error("token/slot length mismatch: {tokens} tokens vs {slots} slots")]
    LengthMismatch { tokens: usize, slots: usize },
    #[error("utterance has no intents")]
    NoIntents,
    #[error("empty intent label")]
    EmptyIntentLabel,
    #[error("duplicate intent label {label:?}")]
    DuplicateIntent { label: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("mix ratio {0:?} must be non-negative and sum to 1")]
    InvalidRatio([f64; 3]),
    #[error("drew a {requested}-intent utterance but only {available} compatible source utterances remain")]
    NotEnoughSources { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
