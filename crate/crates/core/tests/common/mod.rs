//! Fixtures and independent brute-force oracles shared by the integration
//! suites. The oracles recount everything from first principles so the
//! library implementations have something genuinely separate to agree with.

// each test binary compiles this module separately and uses a subset of it
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use slu_core::corpus::{mix_datasets, MixSpec, Utterance};

pub fn utt(tokens: &[&str], slots: &[&str], intents: &[&str]) -> Utterance {
    Utterance::new(
        tokens.iter().map(|s| s.to_string()).collect(),
        slots.iter().map(|s| s.to_string()).collect(),
        intents.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

/// Single-intent sources over 2 intents and 4 slot types.
pub fn two_intent_sources() -> Vec<Utterance> {
    vec![
        utt(
            &["play", "jazz", "now"],
            &["O", "B-genre", "O"],
            &["PlayMusic"],
        ),
        utt(
            &["play", "songs", "by", "adele"],
            &["O", "O", "O", "B-artist"],
            &["PlayMusic"],
        ),
        utt(
            &["start", "rock", "by", "queen"],
            &["O", "B-genre", "O", "B-artist"],
            &["PlayMusic"],
        ),
        utt(&["play", "the", "hits"], &["O", "O", "O"], &["PlayMusic"]),
        utt(
            &["weather", "in", "oslo"],
            &["O", "O", "B-city"],
            &["GetWeather"],
        ),
        utt(
            &["forecast", "for", "tomorrow"],
            &["O", "O", "B-date"],
            &["GetWeather"],
        ),
        utt(
            &["rain", "in", "paris", "today"],
            &["O", "O", "B-city", "B-date"],
            &["GetWeather"],
        ),
        utt(&["is", "it", "cold"], &["O", "O", "O"], &["GetWeather"]),
    ]
}

/// Single-intent sources over `n` intents, two utterances each.
pub fn many_intent_sources(n: usize) -> Vec<Utterance> {
    (0..2 * n)
        .map(|i| {
            utt(
                &[
                    &format!("tok{i}a"),
                    &format!("tok{i}b"),
                    &format!("tok{i}c"),
                ]
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
                &["O", &format!("B-s{}", i % 4), "O"],
                &[&format!("intent{}", i % n)],
            )
        })
        .collect()
}

/// 1/2-intent toy corpus used by the learning tests.
pub fn toy_multi_intent(count: usize, seed: u64) -> Vec<Utterance> {
    let spec = MixSpec {
        ratio: [0.5, 0.5, 0.0],
        seed,
        ..MixSpec::default()
    };
    mix_datasets(&two_intent_sources(), &spec, count).unwrap()
}

pub fn random_bio_sequence(rng: &mut ChaCha8Rng, max_len: usize, types: &[&str]) -> Vec<String> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| {
            let ty = types[rng.gen_range(0..types.len())];
            match rng.gen_range(0..5) {
                0 | 1 => "O".to_string(),
                2 | 3 => format!("B-{ty}"),
                _ => format!("I-{ty}"),
            }
        })
        .collect()
}

pub fn random_bio_fixed(rng: &mut ChaCha8Rng, len: usize, types: &[&str]) -> Vec<String> {
    (0..len)
        .map(|_| {
            let ty = types[rng.gen_range(0..types.len())];
            match rng.gen_range(0..5) {
                0 | 1 => "O".to_string(),
                2 | 3 => format!("B-{ty}"),
                _ => format!("I-{ty}"),
            }
        })
        .collect()
}

pub fn random_intent_set(rng: &mut ChaCha8Rng, labels: &[&str]) -> Vec<String> {
    loop {
        let picked: Vec<String> = labels
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|s| s.to_string())
            .collect();
        if !picked.is_empty() {
            return picked;
        }
    }
}

/// Random utterances for round-trip tests: arbitrary tokens, BIO slots and
/// intent sets.
pub fn random_utterances(rng: &mut ChaCha8Rng, count: usize) -> Vec<Utterance> {
    let labels = ["Alpha", "Beta", "Gamma", "Delta"];
    (0..count)
        .map(|_| {
            let slots = random_bio_sequence(rng, 9, &["a", "b", "c"]);
            let tokens: Vec<String> = (0..slots.len())
                .map(|_| format!("w{}", rng.gen_range(0..40)))
                .collect();
            Utterance::new(tokens, slots, random_intent_set(rng, &labels)).unwrap()
        })
        .collect()
}

// ── Brute-force oracles ─────────────────────────────────────────────────

/// O(n^2) span enumeration: `(ty, s, e)` is a chunk iff `s` starts one,
/// every following position continues it, and `e` is maximal.
pub fn oracle_chunks(labels: &[String]) -> Vec<(String, usize, usize)> {
    let n = labels.len();
    let ty_of = |i: usize| -> Option<&str> {
        labels[i]
            .strip_prefix("B-")
            .or_else(|| labels[i].strip_prefix("I-"))
    };
    let continues = |i: usize| -> bool {
        i > 0 && labels[i].starts_with("I-") && ty_of(i - 1).is_some() && ty_of(i - 1) == ty_of(i)
    };
    let starts = |i: usize| -> bool {
        labels[i].starts_with("B-") || (labels[i].starts_with("I-") && !continues(i))
    };
    let mut out = Vec::new();
    for s in 0..n {
        for e in s..n {
            let Some(ty) = ty_of(s) else { continue };
            let is_chunk = starts(s)
                && (s + 1..=e).all(|i| ty_of(i) == Some(ty) && continues(i))
                && (e + 1 >= n || !(ty_of(e + 1) == Some(ty) && continues(e + 1)));
            if is_chunk {
                out.push((ty.to_string(), s, e));
            }
        }
    }
    out
}

fn oracle_prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
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
    (precision, recall, f1)
}

/// Corpus-level micro span F1 recounted from [`oracle_chunks`].
pub fn oracle_slot_f1(gold: &[Vec<String>], pred: &[Vec<String>]) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(pred) {
        let gc = oracle_chunks(g);
        let pc = oracle_chunks(p);
        let matched = pc.iter().filter(|c| gc.contains(c)).count();
        tp += matched;
        fp += pc.len() - matched;
        fn_ += gc.len() - matched;
    }
    oracle_prf(tp, fp, fn_)
}

fn set_eq(a: &[String], b: &[String]) -> bool {
    a.iter().all(|x| b.contains(x)) && b.iter().all(|x| a.contains(x))
}

/// (exact-set accuracy, macro F1 over `labels`) recounted per label.
pub fn oracle_intent_metrics(
    gold: &[Vec<String>],
    pred: &[Vec<String>],
    labels: &[String],
) -> (f64, f64) {
    let exact = gold.iter().zip(pred).filter(|(g, p)| set_eq(g, p)).count();
    let accuracy = exact as f64 / gold.len() as f64;
    let mut f1_sum = 0.0;
    for label in labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(pred) {
            match (g.contains(label), p.contains(label)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        f1_sum += oracle_prf(tp, fp, fn_).2;
    }
    (accuracy, f1_sum / labels.len() as f64)
}

pub fn oracle_overall_acc(
    gold_slots: &[Vec<String>],
    gold_intents: &[Vec<String>],
    pred_slots: &[Vec<String>],
    pred_intents: &[Vec<String>],
) -> f64 {
    let mut correct = 0usize;
    for i in 0..gold_slots.len() {
        if set_eq(&gold_intents[i], &pred_intents[i]) && gold_slots[i] == pred_slots[i] {
            correct += 1;
        }
    }
    correct as f64 / gold_slots.len() as f64
}
