//! CSV export of the slot node's graph attention weights.
//!
//! One file per utterance. The header names the predicted intents; each row
//! holds the token, the slot node's self-weight, then its weight toward each
//! intent node (final layer, head-averaged), to 6 decimal places:
//!
//! ```text
//! token,self,AddToPlaylist,GetWeather
//! add,0.102431,0.851204,0.046365
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::Vocabulary;
use crate::scalar::Scalar;

use super::report::Prediction;
use super::MetricsError;

/// Write one attention CSV per prediction into `dir`; returns the paths.
pub fn export_attention<S: Scalar>(
    predictions: &[Prediction<S>],
    vocab: &Vocabulary,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, MetricsError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(predictions.len());
    for (i, pred) in predictions.iter().enumerate() {
        let trace = &pred.trace;
        if trace.graph_attention.len() != trace.length {
            return Err(MetricsError::NoAttention);
        }
        let mut csv = String::from("token,self");
        for &intent in &trace.intents {
            csv.push(',');
            csv.push_str(vocab.intent_name(intent));
        }
        csv.push('\n');
        for (token, weights) in pred.tokens.iter().zip(&trace.graph_attention) {
            csv.push_str(token);
            for w in weights {
                csv.push_str(&format!(",{:.6}", w.as_f64()));
            }
            csv.push('\n');
        }
        let path = dir.join(format!("utt_{i:05}.csv"));
        fs::write(&path, csv)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One parsed CSV row: the token and its attention weights.
pub type AttentionRow = (String, Vec<f64>);

/// Parse a file written by [`export_attention`]: the header's intent labels
/// plus one [`AttentionRow`] per token.
pub fn parse_attention_csv(
    path: impl AsRef<Path>,
) -> Result<(Vec<String>, Vec<AttentionRow>), MetricsError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let labels: Vec<String> = header.split(',').skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let token = fields.next().unwrap_or_default().to_string();
        let weights = fields
            .map(|f| f.parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        rows.push((token, weights));
    }
    Ok((labels, rows))
}
