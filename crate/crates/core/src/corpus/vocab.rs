use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Utterance};

/// Reserved padding id in the token and slot maps.
pub const PAD_ID: usize = 0;
/// Reserved unknown-token id in the token map.
pub const UNK_ID: usize = 1;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bijective string/id map with stable insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct StrMap {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl StrMap {
    fn new() -> Self {
        StrMap {
            items: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn from_items(items: Vec<String>) -> Self {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        StrMap { items, index }
    }

    fn insert(&mut self, s: &str) -> usize {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = self.items.len();
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), id);
        id
    }

    fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// Token, slot-label and intent-label maps built from a training split.
///
/// Token ids reserve `<pad>` = 0 and `<unk>` = 1; slot ids reserve `<pad>` =
/// 0. Ids follow first occurrence in the training data, so they are stable
/// across save/load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: StrMap,
    slots: StrMap,
    intents: StrMap,
    pub lowercase: bool,
}

/// Serialized form of [`Vocabulary`] (id = position in each list).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyData {
    pub tokens: Vec<String>,
    pub slots: Vec<String>,
    pub intents: Vec<String>,
    #[serde(default)]
    pub lowercase: bool,
}

impl From<&Vocabulary> for VocabularyData {
    fn from(v: &Vocabulary) -> Self {
        VocabularyData {
            tokens: v.tokens.items.clone(),
            slots: v.slots.items.clone(),
            intents: v.intents.items.clone(),
            lowercase: v.lowercase,
        }
    }
}

impl From<VocabularyData> for Vocabulary {
    fn from(d: VocabularyData) -> Self {
        Vocabulary {
            tokens: StrMap::from_items(d.tokens),
            slots: StrMap::from_items(d.slots),
            intents: StrMap::from_items(d.intents),
            lowercase: d.lowercase,
        }
    }
}

impl Vocabulary {
    /// Number of intent labels.
    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    /// Number of slot labels, including the reserved padding label.
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    fn normalize(&self, token: &str) -> String {
        if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }

    /// Token id; unseen tokens map to `<unk>`.
    pub fn token_id(&self, token: &str) -> usize {
        self.tokens.get(&self.normalize(token)).unwrap_or(UNK_ID)
    }

    /// Slot-label id; unseen labels map to the padding id.
    pub fn slot_id(&self, slot: &str) -> usize {
        self.slots.get(slot).unwrap_or(PAD_ID)
    }

    pub fn intent_id(&self, intent: &str) -> Option<usize> {
        self.intents.get(intent)
    }

    pub fn intent_name(&self, id: usize) -> &str {
        self.intents.name(id)
    }

    /// Slot label string for a model class id; the padding class renders as
    /// `O` so that decoded predictions are always well-formed BIO.
    pub fn slot_name(&self, id: usize) -> &str {
        if id == PAD_ID {
            "O"
        } else {
            self.slots.name(id)
        }
    }

    pub fn intent_names(&self) -> &[String] {
        &self.intents.items
    }
}

/// Build the vocabulary from the training split only, in first-occurrence
/// order. Unseen test tokens later encode to `<unk>`.
pub fn build_vocab(train: &[Utterance], lowercase: bool) -> Result<Vocabulary, CorpusError> {
    if train.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut tokens = StrMap::new();
    tokens.insert(PAD_TOKEN);
    tokens.insert(UNK_TOKEN);
    let mut slots = StrMap::new();
    slots.insert(PAD_TOKEN);
    let mut intents = StrMap::new();
    for u in train {
        u.validate()?;
        for t in &u.tokens {
            let t = if lowercase {
                t.to_lowercase()
            } else {
                t.clone()
            };
            tokens.insert(&t);
        }
        for s in &u.slots {
            slots.insert(s);
        }
        for i in &u.intents {
            intents.insert(i);
        }
    }
    Ok(Vocabulary {
        tokens,
        slots,
        intents,
        lowercase,
    })
}
