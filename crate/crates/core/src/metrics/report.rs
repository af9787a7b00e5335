use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{encode_batch, Batch, Utterance, Vocabulary, PAD_ID};
use crate::model::{forward, IntentSource, ModelConfig, ModelParams, UtteranceTrace};
use crate::scalar::Scalar;

use super::chunks::extract_chunks;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn prf(tp: usize, fp: usize, fn_: usize) -> PrecisionRecallF1 {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

/// Micro-averaged span precision/recall/F1: a span counts as correct only
/// when label, start and end all match.
pub fn slot_f1<G: AsRef<str>, P: AsRef<str>>(
    gold: &[Vec<G>],
    pred: &[Vec<P>],
) -> Result<PrecisionRecallF1, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::CorpusSizeMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::LengthMismatch {
                index,
                gold: g.len(),
                pred: p.len(),
            });
        }
        let g: BTreeSet<_> = extract_chunks(g)?.into_iter().collect();
        let p: BTreeSet<_> = extract_chunks(p)?.into_iter().collect();
        let matched = g.intersection(&p).count();
        tp += matched;
        fp += p.len() - matched;
        fn_ += g.len() - matched;
    }
    Ok(prf(tp, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerIntent {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMetrics {
    /// Fraction of utterances whose predicted intent set equals the gold
    /// set exactly (order and duplicates ignored).
    pub accuracy: f64,
    /// Mean per-label F1 over all labels; a label absent from both gold and
    /// predictions contributes 0.
    pub macro_f1: f64,
    pub per_intent: Vec<PerIntent>,
}

/// Intent accuracy (exact set match) and macro F1 over the given labels,
/// counting each label per utterance as present/absent.
pub fn intent_metrics(
    gold: &[Vec<String>],
    pred: &[Vec<String>],
    labels: &[String],
) -> IntentMetrics {
    assert_eq!(
        gold.len(),
        pred.len(),
        "intent_metrics: corpus size mismatch"
    );
    let exact = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| {
            let g: BTreeSet<&str> = g.iter().map(String::as_str).collect();
            let p: BTreeSet<&str> = p.iter().map(String::as_str).collect();
            g == p
        })
        .count();
    let accuracy = if gold.is_empty() {
        0.0
    } else {
        exact as f64 / gold.len() as f64
    };

    let mut per_intent = Vec::with_capacity(labels.len());
    let mut f1_sum = 0.0;
    for label in labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(pred) {
            let in_gold = g.iter().any(|l| l == label);
            let in_pred = p.iter().any(|l| l == label);
            match (in_gold, in_pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let score = prf(tp, fp, fn_);
        f1_sum += score.f1;
        per_intent.push(PerIntent {
            label: label.clone(),
            precision: score.precision,
            recall: score.recall,
            f1: score.f1,
        });
    }
    let macro_f1 = if labels.is_empty() {
        0.0
    } else {
        f1_sum / labels.len() as f64
    };
    IntentMetrics {
        accuracy,
        macro_f1,
        per_intent,
    }
}

/// Fraction of utterances whose intent set and entire slot sequence are both
/// exactly correct.
pub fn overall_acc(
    gold_slots: &[Vec<String>],
    gold_intents: &[Vec<String>],
    pred_slots: &[Vec<String>],
    pred_intents: &[Vec<String>],
) -> Result<f64, MetricsError> {
    if gold_slots.len() != pred_slots.len() {
        return Err(MetricsError::CorpusSizeMismatch {
            gold: gold_slots.len(),
            pred: pred_slots.len(),
        });
    }
    let mut correct = 0usize;
    for index in 0..gold_slots.len() {
        if gold_slots[index].len() != pred_slots[index].len() {
            return Err(MetricsError::LengthMismatch {
                index,
                gold: gold_slots[index].len(),
                pred: pred_slots[index].len(),
            });
        }
        let g: BTreeSet<&str> = gold_intents[index].iter().map(String::as_str).collect();
        let p: BTreeSet<&str> = pred_intents[index].iter().map(String::as_str).collect();
        if g == p && gold_slots[index] == pred_slots[index] {
            correct += 1;
        }
    }
    Ok(if gold_slots.is_empty() {
        0.0
    } else {
        correct as f64 / gold_slots.len() as f64
    })
}

/// Model output for one utterance, decoded to label strings.
#[derive(Debug, Clone)]
pub struct Prediction<S> {
    pub tokens: Vec<String>,
    pub slots: Vec<String>,
    pub intents: Vec<String>,
    pub trace: UtteranceTrace<S>,
}

impl<S> Prediction<S> {
    /// Dump form: the utterance with predicted labels in place of gold ones.
    pub fn to_utterance(&self) -> Utterance {
        Utterance {
            tokens: self.tokens.clone(),
            slots: self.slots.clone(),
            intents: self.intents.clone(),
        }
    }
}

/// Evaluation-mode inference over a dataset (predicted intents feed the
/// interaction graph), decoded against the vocabulary.
pub fn run_inference<S: Scalar>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    utterances: &[Utterance],
    batch_size: usize,
) -> Vec<Prediction<S>> {
    assert!(batch_size >= 1);
    let mut out = Vec::with_capacity(utterances.len());
    for chunk in utterances.chunks(batch_size) {
        let batch = encode_batch(chunk, vocab);
        let trace = forward(params, &batch, cfg, IntentSource::Predicted);
        for (u, t) in chunk.iter().zip(trace.utterances) {
            let slots = t
                .slot_preds
                .iter()
                .map(|&id| vocab.slot_name(id).to_string())
                .collect();
            let intents = t
                .intents
                .iter()
                .map(|&id| vocab.intent_name(id).to_string())
                .collect();
            out.push(Prediction {
                tokens: u.tokens.clone(),
                slots,
                intents,
                trace: t,
            });
        }
    }
    out
}

/// Inference over bare token sequences (no gold labels), for interactive
/// prediction. Every input must have at least one token.
pub fn predict_tokens<S: Scalar>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    inputs: &[Vec<String>],
    batch_size: usize,
) -> Vec<Prediction<S>> {
    assert!(batch_size >= 1);
    assert!(
        inputs.iter().all(|toks| !toks.is_empty()),
        "predict_tokens: empty token sequence"
    );
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size) {
        let t_max = chunk.iter().map(Vec::len).max().unwrap_or(0);
        let batch = Batch {
            token_ids: chunk
                .iter()
                .map(|toks| {
                    let mut ids: Vec<usize> = toks.iter().map(|t| vocab.token_id(t)).collect();
                    ids.resize(t_max, PAD_ID);
                    ids
                })
                .collect(),
            slot_ids: vec![vec![PAD_ID; t_max]; chunk.len()],
            intent_targets: vec![vec![0.0; vocab.n_intents()]; chunk.len()],
            mask: chunk
                .iter()
                .map(|toks| (0..t_max).map(|t| t < toks.len()).collect())
                .collect(),
            lengths: chunk.iter().map(Vec::len).collect(),
        };
        let trace = forward(params, &batch, cfg, IntentSource::Predicted);
        for (toks, t) in chunk.iter().zip(trace.utterances) {
            let slots = t
                .slot_preds
                .iter()
                .map(|&id| vocab.slot_name(id).to_string())
                .collect();
            let intents = t
                .intents
                .iter()
                .map(|&id| vocab.intent_name(id).to_string())
                .collect();
            out.push(Prediction {
                tokens: toks.clone(),
                slots,
                intents,
                trace: t,
            });
        }
    }
    out
}

/// The four headline metrics plus per-intent breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub slot_f1: f64,
    pub intent_macro_f1: f64,
    pub intent_acc: f64,
    pub overall_acc: f64,
    pub utterances: usize,
    pub per_intent: Vec<PerIntent>,
}

/// Evaluate a model on a labelled dataset; deterministic.
pub fn evaluate<S: Scalar>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    utterances: &[Utterance],
    batch_size: usize,
) -> Result<EvalReport, MetricsError> {
    let predictions = run_inference(params, cfg, vocab, utterances, batch_size);
    report_from_predictions(utterances, &predictions, vocab)
}

/// Recompute the report from already-decoded predictions.
pub fn report_from_predictions<S>(
    gold: &[Utterance],
    predictions: &[Prediction<S>],
    vocab: &Vocabulary,
) -> Result<EvalReport, MetricsError> {
    let gold_slots: Vec<Vec<String>> = gold.iter().map(|u| u.slots.clone()).collect();
    let gold_intents: Vec<Vec<String>> = gold.iter().map(|u| u.intents.clone()).collect();
    let pred_slots: Vec<Vec<String>> = predictions.iter().map(|p| p.slots.clone()).collect();
    let pred_intents: Vec<Vec<String>> = predictions.iter().map(|p| p.intents.clone()).collect();
    let slots = slot_f1(&gold_slots, &pred_slots)?;
    let intents = intent_metrics(&gold_intents, &pred_intents, vocab.intent_names());
    let overall = overall_acc(&gold_slots, &gold_intents, &pred_slots, &pred_intents)?;
    Ok(EvalReport {
        slot_f1: slots.f1,
        intent_macro_f1: intents.macro_f1,
        intent_acc: intents.accuracy,
        overall_acc: overall,
        utterances: gold.len(),
        per_intent: intents.per_intent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(labels: &[&str]) -> Vec<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_predictions_score_one() {
        let gold = vec![seq(&["B-a", "I-a", "O"]), seq(&["O", "B-b"])];
        let score = slot_f1(&gold, &gold).unwrap();
        assert_eq!(score.f1, 1.0);
    }

    #[test]
    fn all_outside_prediction_scores_zero() {
        let gold = vec![seq(&["B-a", "I-a", "O"])];
        let pred = vec![seq(&["O", "O", "O"])];
        let score = slot_f1(&gold, &pred).unwrap();
        assert_eq!(score.f1, 0.0);
    }

    #[test]
    fn truncated_span_does_not_match() {
        // gold span (a,0,1) vs predicted (a,0,0): no overlap credit
        let gold = vec![seq(&["B-a", "I-a", "O"])];
        let pred = vec![seq(&["B-a", "O", "O"])];
        let score = slot_f1(&gold, &pred).unwrap();
        assert_eq!(score.precision, 0.0);
        assert_eq!(score.recall, 0.0);
        assert_eq!(score.f1, 0.0);
    }

    #[test]
    fn intent_exact_match_rule() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let gold = vec![seq(&["A", "B"]), seq(&["A"])];
        let pred = vec![seq(&["A"]), seq(&["A"])];
        let m = intent_metrics(&gold, &pred, &labels);
        assert_eq!(m.accuracy, 0.5); // {A,B} vs {A} counts zero
        let perfect = intent_metrics(&gold, &gold, &labels);
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.macro_f1, 1.0);
    }

    #[test]
    fn intent_set_comparison_ignores_order() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let gold = vec![seq(&["A", "B"])];
        let pred = vec![seq(&["B", "A"])];
        let m = intent_metrics(&gold, &pred, &labels);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn overall_requires_both_parts() {
        let gold_slots = vec![seq(&["B-a", "O"]), seq(&["O"])];
        let gold_intents = vec![seq(&["A"]), seq(&["B"])];
        let mut pred_slots = gold_slots.clone();
        let pred_intents = gold_intents.clone();
        assert_eq!(
            overall_acc(&gold_slots, &gold_intents, &pred_slots, &pred_intents).unwrap(),
            1.0
        );
        pred_slots[0][1] = "B-a".to_string(); // one wrong slot token
        assert_eq!(
            overall_acc(&gold_slots, &gold_intents, &pred_slots, &pred_intents).unwrap(),
            0.5
        );
    }

    #[test]
    fn mismatched_lengths_error() {
        let gold = vec![seq(&["O", "O"])];
        let pred = vec![seq(&["O"])];
        assert!(matches!(
            slot_f1(&gold, &pred),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_is_deterministic() {
        use crate::corpus::build_vocab;
        use crate::model::{ModelConfig, ModelParams};
        let data = vec![
            Utterance::new(
                vec!["play".into(), "jazz".into()],
                vec!["O".into(), "B-genre".into()],
                vec!["PlayMusic".into()],
            )
            .unwrap(),
            Utterance::new(
                vec!["rain".into(), "in".into(), "oslo".into()],
                vec!["O".into(), "O".into(), "B-city".into()],
                vec!["GetWeather".into()],
            )
            .unwrap(),
        ];
        let vocab = build_vocab(&data, false).unwrap();
        let cfg = ModelConfig::micro().with_vocab(&vocab);
        let params = ModelParams::<f32>::init(&cfg, vocab.n_tokens(), 17);
        let a = evaluate(&params, &cfg, &vocab, &data, 2).unwrap();
        let b = evaluate(&params, &cfg, &vocab, &data, 2).unwrap();
        assert_eq!(a, b);
        // batch size must not change the result either
        let c = evaluate(&params, &cfg, &vocab, &data, 1).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn metrics_are_invariant_to_utterance_order() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let gold_slots = vec![seq(&["B-a", "I-a"]), seq(&["O"]), seq(&["B-b", "O", "I-b"])];
        let gold_intents = vec![seq(&["A"]), seq(&["B"]), seq(&["A", "B"])];
        let pred_slots = vec![seq(&["B-a", "O"]), seq(&["B-b"]), seq(&["B-b", "O", "I-b"])];
        let pred_intents = vec![seq(&["A"]), seq(&["A"]), seq(&["A", "B"])];

        let order = [2usize, 0, 1];
        let pick = |xs: &[Vec<String>]| -> Vec<Vec<String>> {
            order.iter().map(|&i| xs[i].clone()).collect()
        };
        assert_eq!(
            slot_f1(&gold_slots, &pred_slots).unwrap(),
            slot_f1(&pick(&gold_slots), &pick(&pred_slots)).unwrap()
        );
        assert_eq!(
            intent_metrics(&gold_intents, &pred_intents, &labels),
            intent_metrics(&pick(&gold_intents), &pick(&pred_intents), &labels)
        );
        assert_eq!(
            overall_acc(&gold_slots, &gold_intents, &pred_slots, &pred_intents).unwrap(),
            overall_acc(
                &pick(&gold_slots),
                &pick(&gold_intents),
                &pick(&pred_slots),
                &pick(&pred_intents)
            )
            .unwrap()
        );
    }
}
