use crate::autodiff::Tensor;

/// Per-utterance record of one forward pass.
#[derive(Debug, Clone)]
pub struct UtteranceTrace<S> {
    pub length: usize,
    /// Token encodings, `length x 2*hidden_dim`.
    pub encoding: Tensor<S>,
    /// Intent probabilities, one per intent label.
    pub intent_probs: Vec<S>,
    /// Intent ids fed to the interaction graph (ascending).
    pub intents: Vec<usize>,
    /// Final-layer, head-averaged attention of the slot node per token:
    /// `[self, intent_1, ..., intent_n]`. Empty for interaction modes
    /// without graph attention.
    pub graph_attention: Vec<Vec<S>>,
    /// Slot label distribution per token.
    pub slot_dists: Vec<Vec<S>>,
    /// Argmax slot class per token (lowest index wins ties).
    pub slot_preds: Vec<usize>,
}

/// Forward-pass record for a whole batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace<S> {
    pub utterances: Vec<UtteranceTrace<S>>,
}
