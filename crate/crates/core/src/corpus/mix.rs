//! Multi-intent corpus synthesis: combine single-intent utterances with a
//! conjunction token into utterances carrying 1–3 intents.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;

use super::{CorpusError, Utterance};

/// Mixing recipe. `ratio` gives the probabilities of producing a 1-, 2- or
/// 3-intent utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixSpec {
    pub ratio: [f64; 3],
    pub conjunction: String,
    pub seed: u64,
    pub require_distinct_intents: bool,
}

impl Default for MixSpec {
    fn default() -> Self {
        MixSpec {
            ratio: [0.3, 0.5, 0.2],
            conjunction: "and".to_string(),
            seed: 0,
            require_distinct_intents: true,
        }
    }
}

impl MixSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum: f64 = self.ratio.iter().sum();
        if self.ratio.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatio(self.ratio));
        }
        Ok(())
    }
}

/// Reference corpora whose split sizes double as regeneration defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceCorpus {
    MixAtis,
    MixSnips,
    Dstc4,
}

/// Published (train, dev, test) sizes of the reference corpora.
pub fn reference_split_sizes(corpus: ReferenceCorpus) -> (usize, usize, usize) {
    match corpus {
        ReferenceCorpus::MixAtis => (18_000, 1_000, 1_000),
        ReferenceCorpus::MixSnips => (45_000, 2_500, 2_500),
        ReferenceCorpus::Dstc4 => (12_759, 4_812, 7_848),
    }
}

/// Produce `count` mixed utterances from a single-intent source split.
///
/// Per output: draw k in {1,2,3} with probabilities `spec.ratio`, sample k
/// source utterances without replacement (with pairwise-distinct intents
/// when `require_distinct_intents`), and join their token/slot sequences
/// with the conjunction token labelled `O`. The output's intents are the
/// union of the parts' intents. Deterministic under `spec.seed`.
pub fn mix_datasets(
    source: &[Utterance],
    spec: &MixSpec,
    count: usize,
) -> Result<Vec<Utterance>, CorpusError> {
    if source.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    spec.validate()?;
    for u in source {
        u.validate()?;
    }
    let mut rng = stream(spec.seed, "mix");
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = draw_intent_count(&spec.ratio, &mut rng);
        out.push(mix_one(source, spec, k, &mut rng)?);
    }
    Ok(out)
}

fn draw_intent_count(ratio: &[f64; 3], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    if u < ratio[0] {
        1
    } else if u < ratio[0] + ratio[1] {
        2
    } else {
        3
    }
}

fn mix_one(
    source: &[Utterance],
    spec: &MixSpec,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Utterance, CorpusError> {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut used_intents: Vec<&str> = Vec::new();
    for _ in 0..k {
        let candidates: Vec<usize> = (0..source.len())
            .filter(|i| !chosen.contains(i))
            .filter(|&i| {
                !spec.require_distinct_intents
                    || source[i]
                        .intents
                        .iter()
                        .all(|l| !used_intents.contains(&l.as_str()))
            })
            .collect();
        if candidates.is_empty() {
            return Err(CorpusError::NotEnoughSources {
                requested: k,
                available: chosen.len(),
            });
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        chosen.push(pick);
        used_intents.extend(source[pick].intents.iter().map(String::as_str));
    }

    let mut tokens = Vec::new();
    let mut slots = Vec::new();
    let mut intents: Vec<String> = Vec::new();
    for (part, &idx) in chosen.iter().enumerate() {
        if part > 0 {
            tokens.push(spec.conjunction.clone());
            slots.push("O".to_string());
        }
        let u = &source[idx];
        tokens.extend(u.tokens.iter().cloned());
        slots.extend(u.slots.iter().cloned());
        for label in &u.intents {
            if !intents.contains(label) {
                intents.push(label.clone());
            }
        }
    }
    Utterance::new(tokens, slots, intents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(n_intents: usize) -> Vec<Utterance> {
        (0..n_intents * 2)
            .map(|i| {
                Utterance::new(
                    vec![format!("tok{i}a"), format!("tok{i}b")],
                    vec!["O".into(), format!("B-s{}", i % 3)],
                    vec![format!("intent{}", i % n_intents)],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn single_part_output_is_unchanged_source_utterance() {
        let src = source(4);
        let spec = MixSpec {
            ratio: [1.0, 0.0, 0.0],
            seed: 9,
            ..MixSpec::default()
        };
        for u in mix_datasets(&src, &spec, 20).unwrap() {
            assert!(src.contains(&u), "{u:?} is not a source utterance");
        }
    }

    #[test]
    fn conjunction_sits_between_parts_with_slot_o() {
        let src = vec![
            Utterance::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec!["O".into(), "B-x".into(), "I-x".into()],
                vec!["X".into()],
            )
            .unwrap(),
            Utterance::new(
                vec!["d".into(), "e".into(), "f".into(), "g".into()],
                vec!["O".into(); 4],
                vec!["Y".into()],
            )
            .unwrap(),
        ];
        let spec = MixSpec {
            ratio: [0.0, 1.0, 0.0],
            seed: 1,
            ..MixSpec::default()
        };
        let mixed = mix_datasets(&src, &spec, 10).unwrap();
        for u in mixed {
            assert_eq!(u.len(), 8);
            let first_len = if u.tokens[0] == "a" { 3 } else { 4 };
            assert_eq!(u.tokens[first_len], "and");
            assert_eq!(u.slots[first_len], "O");
            assert_eq!(u.intent_set().len(), 2);
        }
    }

    #[test]
    fn ratio_is_respected_empirically() {
        let src = source(5);
        let spec = MixSpec {
            ratio: [0.3, 0.5, 0.2],
            seed: 77,
            ..MixSpec::default()
        };
        let mixed = mix_datasets(&src, &spec, 2000).unwrap();
        let mut counts = [0usize; 3];
        for u in &mixed {
            counts[u.intents.len() - 1] += 1;
        }
        let fracs: Vec<f64> = counts
            .iter()
            .map(|c| *c as f64 / mixed.len() as f64)
            .collect();
        for (f, r) in fracs.iter().zip(&spec.ratio) {
            assert!((f - r).abs() < 0.03, "fraction {f} vs ratio {r}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let src = source(4);
        let spec = MixSpec {
            seed: 123,
            ..MixSpec::default()
        };
        let a = mix_datasets(&src, &spec, 50).unwrap();
        let b = mix_datasets(&src, &spec, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_intents_error_when_source_too_small() {
        let src = source(2); // only 2 distinct intents
        let spec = MixSpec {
            ratio: [0.0, 0.0, 1.0],
            seed: 3,
            ..MixSpec::default()
        };
        let err = mix_datasets(&src, &spec, 5).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::NotEnoughSources { requested: 3, .. }
        ));
    }

    #[test]
    fn intents_are_union_of_parts() {
        let src = source(6);
        let spec = MixSpec {
            ratio: [0.0, 0.0, 1.0],
            seed: 5,
            ..MixSpec::default()
        };
        for u in mix_datasets(&src, &spec, 30).unwrap() {
            assert_eq!(u.intents.len(), 3);
            assert_eq!(u.intent_set().len(), 3);
        }
    }

    #[test]
    fn invalid_ratio_rejected() {
        let spec = MixSpec {
            ratio: [0.5, 0.6, 0.0],
            ..MixSpec::default()
        };
        assert!(matches!(spec.validate(), Err(CorpusError::InvalidRatio(_))));
    }

    #[test]
    fn reference_sizes() {
        assert_eq!(
            reference_split_sizes(ReferenceCorpus::MixSnips),
            (45_000, 2_500, 2_500)
        );
        assert_eq!(
            reference_split_sizes(ReferenceCorpus::MixAtis),
            (18_000, 1_000, 1_000)
        );
        assert_eq!(
            reference_split_sizes(ReferenceCorpus::Dstc4),
            (12_759, 4_812, 7_848)
        );
    }
}
