//! Multi-task objective: multi-label intent cross-entropy, slot sequence
//! cross-entropy over valid tokens, and the mixed loss with L2 on the
//! weight matrices.

use crate::autodiff::{Tape, Var};
use crate::corpus::Batch;
use crate::scalar::Scalar;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before any log.
pub const CLAMP: f64 = 1e-7;

/// Binary cross-entropy summed over intent labels, averaged over the batch.
pub fn intent_loss<S: Scalar>(tape: &mut Tape<S>, probs: &[Var], batch: &Batch) -> Var {
    assert!(!probs.is_empty(), "intent_loss: empty batch");
    assert_eq!(probs.len(), batch.size());
    let lo = S::from_f64(CLAMP);
    let hi = S::from_f64(1.0 - CLAMP);
    let mut per_utterance = Vec::with_capacity(probs.len());
    for (b, &p) in probs.iter().enumerate() {
        let targets: Vec<S> = batch.intent_targets[b]
            .iter()
            .map(|t| S::from_f64(*t as f64))
            .collect();
        let inverse: Vec<S> = targets.iter().map(|t| S::one() - *t).collect();
        let clamped = tape.clamp(p, lo, hi);
        let log_p = tape.ln(clamped);
        let t_const = tape.constant_vec(targets);
        let hit = tape.mul(t_const, log_p);
        let one_minus = tape.affine(clamped, -S::one(), S::one());
        let log_q = tape.ln(one_minus);
        let inv_const = tape.constant_vec(inverse);
        let miss = tape.mul(inv_const, log_q);
        let both = tape.add(hit, miss);
        let total = tape.sum(both);
        per_utterance.push(tape.affine(total, -S::one(), S::zero()));
    }
    let summed = tape.add_n(&per_utterance);
    tape.affine(summed, S::from_f64(1.0 / probs.len() as f64), S::zero())
}

/// Negative log-likelihood of the gold slot labels over the valid tokens of
/// each utterance, averaged over the batch. Padded steps are never emitted,
/// so they contribute exactly zero.
pub fn slot_loss<S: Scalar>(tape: &mut Tape<S>, dists: &[Vec<Var>], batch: &Batch) -> Var {
    assert!(!dists.is_empty(), "slot_loss: empty batch");
    assert_eq!(dists.len(), batch.size());
    let lo = S::from_f64(CLAMP);
    let hi = S::from_f64(1.0 - CLAMP);
    let mut per_utterance = Vec::with_capacity(dists.len());
    for (b, steps) in dists.iter().enumerate() {
        assert_eq!(
            steps.len(),
            batch.lengths[b],
            "slot_loss: step count != utterance length"
        );
        let mut log_terms = Vec::with_capacity(steps.len());
        for (t, &dist) in steps.iter().enumerate() {
            let gold = batch.slot_ids[b][t];
            assert!(
                gold < tape.shape(dist)[0],
                "slot_loss: gold id {gold} out of range"
            );
            let picked = tape.gather_elems(dist, &[gold]);
            let clamped = tape.clamp(picked, lo, hi);
            log_terms.push(tape.ln(clamped));
        }
        let summed = tape.add_n(&log_terms);
        per_utterance.push(tape.affine(summed, -S::one(), S::zero()));
    }
    let summed = tape.add_n(&per_utterance);
    tape.affine(summed, S::from_f64(1.0 / dists.len() as f64), S::zero())
}

/// `l2 * sum of squared entries` over the weight matrices; `None` when the
/// coefficient is zero.
pub fn l2_penalty<S: Scalar>(tape: &mut Tape<S>, weights: &[Var], coefficient: f64) -> Option<Var> {
    if coefficient == 0.0 || weights.is_empty() {
        return None;
    }
    let mut sums = Vec::with_capacity(weights.len());
    for &w in weights {
        let sq = tape.mul(w, w);
        sums.push(tape.sum(sq));
    }
    let total = tape.add_n(&sums);
    Some(tape.affine(total, S::from_f64(coefficient), S::zero()))
}

/// `alpha * intent + (1 - alpha) * slot (+ l2)`.
pub fn joint_loss<S: Scalar>(
    tape: &mut Tape<S>,
    intent: Var,
    slot: Var,
    alpha: f64,
    l2: Option<Var>,
) -> Var {
    assert!(
        (0.0..=1.0).contains(&alpha),
        "joint_loss: alpha {alpha} outside [0, 1]"
    );
    let a = tape.affine(intent, S::from_f64(alpha), S::zero());
    let s = tape.affine(slot, S::from_f64(1.0 - alpha), S::zero());
    let mut parts = vec![a, s];
    parts.extend(l2);
    tape.add_n(&parts)
}
