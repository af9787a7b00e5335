use super::{Utterance, Vocabulary, PAD_ID};

/// Padded id matrices for one batch of utterances.
///
/// `mask[b][t]` is true exactly for `t < lengths[b]`; padded positions hold
/// the padding id. `intent_targets` is multi-hot over the intent labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub token_ids: Vec<Vec<usize>>,
    pub slot_ids: Vec<Vec<usize>>,
    pub intent_targets: Vec<Vec<f32>>,
    pub mask: Vec<Vec<bool>>,
    pub lengths: Vec<usize>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.token_ids.first().map_or(0, Vec::len)
    }

    /// Gold intent ids of one utterance, ascending.
    pub fn gold_intents(&self, b: usize) -> Vec<usize> {
        self.intent_targets[b]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Encode utterances into padded id matrices. Unknown tokens map to the
/// unknown id; labels outside the vocabulary map to the padding id (for
/// slots) or are dropped from the multi-hot row (for intents).
pub fn encode_batch(utterances: &[Utterance], vocab: &Vocabulary) -> Batch {
    let t_max = utterances.iter().map(Utterance::len).max().unwrap_or(0);
    let mut batch = Batch {
        token_ids: Vec::with_capacity(utterances.len()),
        slot_ids: Vec::with_capacity(utterances.len()),
        intent_targets: Vec::with_capacity(utterances.len()),
        mask: Vec::with_capacity(utterances.len()),
        lengths: Vec::with_capacity(utterances.len()),
    };
    for u in utterances {
        let len = u.len();
        let mut tokens = vec![PAD_ID; t_max];
        let mut slots = vec![PAD_ID; t_max];
        for t in 0..len {
            tokens[t] = vocab.token_id(&u.tokens[t]);
            slots[t] = vocab.slot_id(&u.slots[t]);
        }
        let mut targets = vec![0.0; vocab.n_intents()];
        for intent in &u.intents {
            if let Some(id) = vocab.intent_id(intent) {
                targets[id] = 1.0;
            }
        }
        let mask = (0..t_max).map(|t| t < len).collect();
        batch.token_ids.push(tokens);
        batch.slot_ids.push(slots);
        batch.intent_targets.push(targets);
        batch.mask.push(mask);
        batch.lengths.push(len);
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::corpus::UNK_ID;

    fn utt(tokens: &[&str], slots: &[&str], intents: &[&str]) -> Utterance {
        Utterance::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            slots.iter().map(|s| s.to_string()).collect(),
            intents.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pads_to_batch_max_and_masks() {
        let us = vec![
            utt(&["a", "b"], &["O", "O"], &["X"]),
            utt(&["a", "b", "c"], &["O", "O", "O"], &["Y"]),
        ];
        let v = build_vocab(&us, false).unwrap();
        let b = encode_batch(&us, &v);
        assert_eq!(b.max_len(), 3);
        assert_eq!(b.mask[0], vec![true, true, false]);
        assert_eq!(b.token_ids[0][2], PAD_ID);
        assert_eq!(b.slot_ids[0][2], PAD_ID);
        assert_eq!(b.lengths, vec![2, 3]);
    }

    #[test]
    fn multi_hot_targets() {
        let us = vec![
            utt(&["a"], &["O"], &["X", "Y"]),
            utt(&["a"], &["O"], &["Y"]),
        ];
        let v = build_vocab(&us, false).unwrap();
        let b = encode_batch(&us, &v);
        assert_eq!(b.intent_targets[0].iter().filter(|x| **x == 1.0).count(), 2);
        assert_eq!(b.gold_intents(1), vec![1]);
    }

    #[test]
    fn mask_count_equals_length_sum() {
        let us = vec![
            utt(&["a"], &["O"], &["X"]),
            utt(&["a", "b", "c", "d"], &["O", "O", "O", "O"], &["X"]),
            utt(&["a", "b"], &["O", "O"], &["X"]),
        ];
        let v = build_vocab(&us, false).unwrap();
        let b = encode_batch(&us, &v);
        let mask_count: usize = b.mask.iter().flatten().filter(|m| **m).count();
        let length_sum: usize = b.lengths.iter().sum();
        assert_eq!(mask_count, length_sum);
    }

    #[test]
    fn unknowns_map_into_vocab_range() {
        let train = vec![utt(&["a"], &["B-x"], &["X"])];
        let v = build_vocab(&train, false).unwrap();
        let test = vec![utt(&["zzz"], &["B-unseen"], &["X"])];
        let b = encode_batch(&test, &v);
        assert_eq!(b.token_ids[0][0], UNK_ID);
        assert!(b.token_ids[0][0] < v.n_tokens());
        assert_eq!(b.slot_ids[0][0], PAD_ID);
    }
}
