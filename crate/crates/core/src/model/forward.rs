use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::corpus::Batch;
use crate::rng::stream;
use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::graph::interact;
use super::params::{InteractionVars, LstmVars, ModelParams, ModelVars};
use super::trace::{ForwardTrace, UtteranceTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Dropout active, teacher forcing for the previous slot label.
    Train,
    /// Deterministic; the previous predicted distribution feeds the decoder.
    Eval,
}

/// Where the interaction graph's intent nodes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSource {
    Gold,
    Predicted,
}

/// Tape handles produced by one forward pass, for loss construction.
pub struct ForwardPass<S> {
    pub trace: ForwardTrace<S>,
    /// Per utterance: intent probability vector, `[n_intents]`.
    pub intent_probs: Vec<Var>,
    /// Per utterance, per valid token: slot distribution, `[n_slots]`.
    pub slot_dists: Vec<Vec<Var>>,
}

/// Intents whose probability strictly exceeds the threshold, ascending;
/// falls back to the argmax label when the thresholded set is empty.
pub fn predicted_intent_set<S: Scalar>(probs: &[S], threshold: f64) -> Vec<usize> {
    let set: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.as_f64() > threshold)
        .map(|(i, _)| i)
        .collect();
    if !set.is_empty() {
        return set;
    }
    vec![argmax(probs)]
}

/// Index of the maximum; the lowest index wins exact ties.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    assert!(!values.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One LSTM cell step; returns the new hidden and cell states.
pub(crate) fn lstm_step<S: Scalar>(
    tape: &mut Tape<S>,
    p: &LstmVars,
    x: Var,
    h: Var,
    c: Var,
) -> (Var, Var) {
    let hidden = tape.shape(p.w_h)[1];
    let zx = tape.linear(x, p.w_x, Some(p.b));
    let zh = tape.linear(h, p.w_h, None);
    let z = tape.add(zx, zh);
    let i = tape.slice(z, 0, hidden);
    let i = tape.sigmoid(i);
    let f = tape.slice(z, hidden, hidden);
    let f = tape.sigmoid(f);
    let g = tape.slice(z, 2 * hidden, hidden);
    let g = tape.tanh(g);
    let o = tape.slice(z, 3 * hidden, hidden);
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_new = tape.add(fc, ig);
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc);
    (h_new, c_new)
}

/// Encode one utterance: BiLSTM states concatenated with scaled dot-product
/// self-attention over the embeddings. Returns `length x 2*hidden_dim`.
fn encode_utterance<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &ModelVars,
    cfg: &ModelConfig,
    token_ids: &[usize],
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Var {
    let len = token_ids.len();
    let x = tape.gather_rows(vars.encoder.embedding, token_ids);
    let x = tape.dropout(x, cfg.dropout, training, rng);

    let half = cfg.hidden_dim / 2;
    let mut fw = Vec::with_capacity(len);
    let mut h = tape.zeros(vec![half]);
    let mut c = tape.zeros(vec![half]);
    for t in 0..len {
        let x_t = tape.row(x, t);
        let (nh, nc) = lstm_step(tape, &vars.encoder.fw, x_t, h, c);
        h = nh;
        c = nc;
        fw.push(h);
    }
    let mut bw = vec![None; len];
    let mut h = tape.zeros(vec![half]);
    let mut c = tape.zeros(vec![half]);
    for t in (0..len).rev() {
        let x_t = tape.row(x, t);
        let (nh, nc) = lstm_step(tape, &vars.encoder.bw, x_t, h, c);
        h = nh;
        c = nc;
        bw[t] = Some(h);
    }
    let rows: Vec<Var> = (0..len)
        .map(|t| tape.concat(fw[t], bw[t].unwrap()))
        .collect();
    let states = tape.stack_rows(&rows);

    let q = tape.linear(x, vars.encoder.w_query, None);
    let k = tape.linear(x, vars.encoder.w_key, None);
    let v = tape.linear(x, vars.encoder.w_value, None);
    let scores = tape.matmul_nt(q, k);
    let scale = S::from_f64(1.0 / (cfg.key_dim as f64).sqrt());
    let scores = tape.affine(scores, scale, S::zero());
    let attn = tape.softmax(scores, 1);
    let attended = tape.matmul(attn, v);

    let encoding = tape.concat(states, attended);
    tape.dropout(encoding, cfg.dropout, training, rng)
}

/// Pool token encodings into the utterance context vector: a learned score
/// per token, softmax over positions, convex combination of the encodings.
fn pool_context<S: Scalar>(tape: &mut Tape<S>, vars: &ModelVars, encoding: Var) -> Var {
    let len = tape.shape(encoding)[0];
    let width = tape.shape(encoding)[1];
    let scores = tape.linear(encoding, vars.intent.w_pool, Some(vars.intent.b_pool));
    let scores = tape.reshape(scores, vec![len]);
    let weights = tape.softmax(scores, 0);
    let weights = tape.reshape(weights, vec![1, len]);
    let context = tape.matmul(weights, encoding);
    tape.reshape(context, vec![width])
}

/// Run the full network over a batch.
///
/// Each utterance is processed at its exact length; padded positions never
/// enter the computation, so padding cannot influence values or gradients.
pub fn forward_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &ModelVars,
    batch: &Batch,
    cfg: &ModelConfig,
    mode: RunMode,
    intent_source: IntentSource,
    rng: &mut ChaCha8Rng,
) -> ForwardPass<S> {
    let training = mode == RunMode::Train;
    let slope = S::from_f64(cfg.leaky_slope);
    let mut pass = ForwardPass {
        trace: ForwardTrace {
            utterances: Vec::with_capacity(batch.size()),
        },
        intent_probs: Vec::with_capacity(batch.size()),
        slot_dists: Vec::with_capacity(batch.size()),
    };

    for b in 0..batch.size() {
        let len = batch.lengths[b];
        let encoding = encode_utterance(tape, vars, cfg, &batch.token_ids[b][..len], training, rng);

        let context = pool_context(tape, vars, encoding);
        let hidden = tape.linear(context, vars.intent.w_hidden, Some(vars.intent.b_hidden));
        let hidden = tape.leaky_relu(hidden, slope);
        let logits = tape.linear(hidden, vars.intent.w_out, Some(vars.intent.b_out));
        let probs = tape.sigmoid(logits);
        let prob_values = tape.data(probs).to_vec();

        let intents = match intent_source {
            IntentSource::Predicted => predicted_intent_set(&prob_values, cfg.intent_threshold),
            IntentSource::Gold => {
                let gold = batch.gold_intents(b);
                assert!(
                    !gold.is_empty(),
                    "gold intent source requires labelled batches"
                );
                gold
            }
        };
        let intent_nodes: Vec<Var> = intents
            .iter()
            .map(|&id| {
                let row = tape.gather_rows(vars.intent_embedding, &[id]);
                tape.reshape(row, vec![cfg.graph_dim])
            })
            .collect();

        let mut s = tape.zeros(vec![cfg.graph_dim]);
        let mut cell = tape.zeros(vec![cfg.graph_dim]);
        let mut s2 = tape.zeros(vec![cfg.graph_dim]);
        let mut cell2 = tape.zeros(vec![cfg.graph_dim]);
        let mut prev_label = tape.zeros(vec![cfg.n_slots]);
        let mut dists = Vec::with_capacity(len);
        let mut trace_attention = Vec::with_capacity(len);
        let mut trace_dists = Vec::with_capacity(len);
        let mut trace_preds = Vec::with_capacity(len);
        for t in 0..len {
            let e_t = tape.row(encoding, t);
            let step_in = tape.concat(e_t, prev_label);
            let step_in = tape.dropout(step_in, cfg.dropout, training, rng);
            let (nh, nc) = lstm_step(tape, &vars.slot.lstm, step_in, s, cell);
            s = nh;
            cell = nc;
            let mut state = s;
            if let InteractionVars::SentenceLevel2Layer { lstm2 } = &vars.interaction {
                let (nh2, nc2) = lstm_step(tape, lstm2, state, s2, cell2);
                s2 = nh2;
                cell2 = nc2;
                state = s2;
            }
            let refined = interact(tape, &vars.interaction, &intent_nodes, state, slope);
            let slot_logits = tape.linear(refined.state, vars.slot.w_out, None);
            let dist = tape.softmax(slot_logits, 0);
            let dist_values = tape.data(dist).to_vec();
            trace_preds.push(argmax(&dist_values));
            if let Some(attention) = refined.slot_attention {
                trace_attention.push(attention);
            }
            trace_dists.push(dist_values.clone());
            dists.push(dist);

            prev_label = if training {
                // teacher forcing: one-hot gold label of this step
                let mut one_hot = vec![S::zero(); cfg.n_slots];
                one_hot[batch.slot_ids[b][t]] = S::one();
                tape.constant_vec(one_hot)
            } else {
                tape.constant_vec(dist_values)
            };
        }

        pass.trace.utterances.push(UtteranceTrace {
            length: len,
            encoding: tape.value(encoding).clone(),
            intent_probs: prob_values,
            intents,
            graph_attention: trace_attention,
            slot_dists: trace_dists,
            slot_preds: trace_preds,
        });
        pass.intent_probs.push(probs);
        pass.slot_dists.push(dists);
    }
    pass
}

/// Evaluation-mode forward pass on a fresh tape; returns only the trace.
pub fn forward<S: Scalar>(
    params: &ModelParams<S>,
    batch: &Batch,
    cfg: &ModelConfig,
    intent_source: IntentSource,
) -> ForwardTrace<S> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let mut rng = stream(0, "eval-forward");
    forward_on_tape(
        &mut tape,
        &vars,
        batch,
        cfg,
        RunMode::Eval,
        intent_source,
        &mut rng,
    )
    .trace
}
