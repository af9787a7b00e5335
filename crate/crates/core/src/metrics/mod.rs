//! Evaluation: span-level slot F1, intent accuracy and macro F1, overall
//! accuracy, prediction dumps and attention export.

mod attention;
mod chunks;
mod report;

pub use attention::{export_attention, parse_attention_csv, AttentionRow};
pub use chunks::{extract_chunks, Chunk};
pub use report::{
    evaluate, intent_metrics, overall_acc, predict_tokens, report_from_predictions, run_inference,
    slot_f1, EvalReport, IntentMetrics, PerIntent, PrecisionRecallF1, Prediction,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("malformed BIO label {0:?}")]
    BadLabel(String),
    #[error("utterance {index}: gold has {gold} tokens but prediction has {pred}")]
    LengthMismatch {
        index: usize,
        gold: usize,
        pred: usize,
    },
    #[error("gold and prediction corpora have different sizes ({gold} vs {pred})")]
    CorpusSizeMismatch { gold: usize, pred: usize },
    #[error("trace has no graph attention to export (interaction mode without attention, or no graph layers)")]
    NoAttention,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
