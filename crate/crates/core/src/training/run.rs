use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamState, GradCheckError, GradCheckReport, Tape, Tensor};
use crate::corpus::{encode_batch, Batch, Utterance, Vocabulary};
use crate::metrics::{evaluate, EvalReport, MetricsError};
use crate::model::{forward_on_tape, ConfigError, IntentSource, ModelConfig, ModelParams, RunMode};
use crate::rng::stream;
use crate::scalar::Scalar;

use super::checkpoint::Checkpoint;
use super::loss::{intent_loss, joint_loss, l2_penalty, slot_loss};

/// Dev-set metric used for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    OverallAcc,
    SlotF1,
    IntentAcc,
}

impl SelectionMetric {
    pub fn value(self, report: &EvalReport) -> f64 {
        match self {
            SelectionMetric::OverallAcc => report.overall_acc,
            SelectionMetric::SlotF1 => report.slot_f1,
            SelectionMetric::IntentAcc => report.intent_acc,
        }
    }
}

/// Training-run settings. `dropout` and `intent_threshold` override the
/// model configuration for the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Intent/slot loss mixing weight.
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2: f64,
    pub dropout: f64,
    pub seed: u64,
    pub intent_threshold: f64,
    /// Node source for the interaction graph while training; inference
    /// always uses predicted intents.
    pub graph_intents: IntentSource,
    pub selection: SelectionMetric,
    /// Optional global-norm gradient clip.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 50,
            l2: 1e-6,
            dropout: 0.4,
            seed: 0,
            intent_threshold: 0.5,
            graph_intents: IntentSource::Gold,
            selection: SelectionMetric::OverallAcc,
            grad_clip: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: loss {loss}, intent {intent}, slot {slot}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        intent: f64,
        slot: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub intent_loss: f64,
    pub slot_loss: f64,
}

/// One line of the training log, one JSON object per epoch.
#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub intent_loss: f64,
    pub slot_loss: f64,
    pub dev: EvalReport,
}

/// One pass over the training split: deterministic shuffle, then per batch
/// forward, joint loss, backward and an Adam step.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<S: Scalar>(
    train: &[Utterance],
    vocab: &Vocabulary,
    params: &mut ModelParams<S>,
    opt: &mut AdamState<S>,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    epoch: usize,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<EpochStats, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut stream(tcfg.seed, &format!("shuffle/{epoch}")));

    let mut seen = 0usize;
    let mut loss_sum = 0.0;
    let mut intent_sum = 0.0;
    let mut slot_sum = 0.0;
    for (batch_index, ids) in order.chunks(tcfg.batch_size.max(1)).enumerate() {
        let utterances: Vec<Utterance> = ids.iter().map(|&i| train[i].clone()).collect();
        let batch = encode_batch(&utterances, vocab);

        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let pass = forward_on_tape(
            &mut tape,
            &vars,
            &batch,
            cfg,
            RunMode::Train,
            tcfg.graph_intents,
            dropout_rng,
        );
        let intent = intent_loss(&mut tape, &pass.intent_probs, &batch);
        let slot = slot_loss(&mut tape, &pass.slot_dists, &batch);
        let penalty = l2_penalty(&mut tape, &vars.weight_vars(), tcfg.l2);
        let loss = joint_loss(&mut tape, intent, slot, tcfg.alpha, penalty);

        let loss_value = tape.item(loss).as_f64();
        let intent_value = tape.item(intent).as_f64();
        let slot_value = tape.item(slot).as_f64();
        if !loss_value.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: batch_index,
                loss: loss_value,
                intent: intent_value,
                slot: slot_value,
            });
        }

        tape.backward(loss);
        let mut grads: Vec<Option<Vec<S>>> = vars
            .bound
            .iter()
            .map(|(_, _, v)| tape.grad(*v).map(<[S]>::to_vec))
            .collect();
        if let Some(max_norm) = tcfg.grad_clip {
            clip_global_norm(&mut grads, max_norm);
        }
        let mut tensors: Vec<&mut Tensor<S>> =
            params.named_mut().into_iter().map(|p| p.tensor).collect();
        opt.step(&mut tensors, &grads);

        let weight = ids.len() as f64;
        loss_sum += loss_value * weight;
        intent_sum += intent_value * weight;
        slot_sum += slot_value * weight;
        seen += ids.len();
    }
    let n = seen as f64;
    Ok(EpochStats {
        epoch,
        loss: loss_sum / n,
        intent_loss: intent_sum / n,
        slot_loss: slot_sum / n,
    })
}

fn clip_global_norm<S: Scalar>(grads: &mut [Option<Vec<S>>], max_norm: f64) {
    let mut sq = 0.0f64;
    for g in grads.iter().flatten() {
        for v in g {
            sq += v.as_f64() * v.as_f64();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = S::from_f64(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            for v in g {
                *v *= scale;
            }
        }
    }
}

/// Strictly-better comparison for dev-set selection: primary metric first,
/// slot F1 as tie-break; on a full tie the incumbent (earlier epoch) wins.
pub fn improves(candidate: &EvalReport, incumbent: &EvalReport, metric: SelectionMetric) -> bool {
    let c = metric.value(candidate);
    let i = metric.value(incumbent);
    c > i || (c == i && candidate.slot_f1 > incumbent.slot_f1)
}

/// Index of the selected report under the [`improves`] rule.
pub fn select_best(reports: &[EvalReport], metric: SelectionMetric) -> usize {
    assert!(!reports.is_empty(), "select_best: no reports");
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        if improves(r, &reports[best], metric) {
            best = i;
        }
    }
    best
}

/// Train with dev-set selection: after every epoch the dev split is
/// evaluated and the best parameters are kept. `log` receives one entry per
/// epoch.
pub fn fit<S: Scalar>(
    train: &[Utterance],
    dev: &[Utterance],
    vocab: &Vocabulary,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    mut log: impl FnMut(&EpochLog),
) -> Result<Checkpoint<S>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if dev.is_empty() {
        return Err(TrainError::EmptySplit("dev"));
    }
    let cfg = ModelConfig {
        dropout: train_cfg.dropout,
        intent_threshold: train_cfg.intent_threshold,
        ..model_cfg.clone()
    };
    cfg.validate()?;

    let mut params = ModelParams::<S>::init(&cfg, vocab.n_tokens(), train_cfg.seed);
    let mut opt = AdamState::new(S::from_f64(train_cfg.learning_rate));
    let mut dropout_rng = stream(train_cfg.seed, "dropout");

    let mut best: Option<(EvalReport, usize, ModelParams<S>)> = None;
    for epoch in 1..=train_cfg.epochs {
        let stats = train_epoch(
            train,
            vocab,
            &mut params,
            &mut opt,
            &cfg,
            train_cfg,
            epoch,
            &mut dropout_rng,
        )?;
        let dev_report = evaluate(&params, &cfg, vocab, dev, train_cfg.batch_size)?;
        log(&EpochLog {
            epoch,
            loss: stats.loss,
            intent_loss: stats.intent_loss,
            slot_loss: stats.slot_loss,
            dev: dev_report.clone(),
        });
        let replace = match &best {
            None => true,
            Some((incumbent, _, _)) => improves(&dev_report, incumbent, train_cfg.selection),
        };
        if replace {
            best = Some((dev_report, epoch, params.clone()));
        }
    }
    let (dev_metrics, epoch, params) = best.expect("epochs >= 1");
    Ok(Checkpoint {
        params,
        model: cfg,
        train: train_cfg.clone(),
        vocab: vocab.clone(),
        dev_metrics: Some(dev_metrics),
        epoch,
    })
}

/// Training-mode joint loss of a parameter set on one batch (dropout must be
/// disabled in the config so the value is deterministic).
pub fn training_loss<S: Scalar>(
    params: &ModelParams<S>,
    batch: &Batch,
    cfg: &ModelConfig,
    alpha: f64,
    l2: f64,
) -> S {
    assert_eq!(
        cfg.dropout, 0.0,
        "training_loss: dropout must be disabled for deterministic checks"
    );
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let mut rng = stream(0, "loss-eval");
    let pass = forward_on_tape(
        &mut tape,
        &vars,
        batch,
        cfg,
        RunMode::Train,
        IntentSource::Gold,
        &mut rng,
    );
    let intent = intent_loss(&mut tape, &pass.intent_probs, batch);
    let slot = slot_loss(&mut tape, &pass.slot_dists, batch);
    let penalty = l2_penalty(&mut tape, &vars.weight_vars(), l2);
    let loss = joint_loss(&mut tape, intent, slot, alpha, penalty);
    tape.item(loss)
}

/// Analytic gradients of [`training_loss`] in canonical parameter order;
/// parameters not reached by the loss get zero gradients.
pub fn training_loss_grads<S: Scalar>(
    params: &ModelParams<S>,
    batch: &Batch,
    cfg: &ModelConfig,
    alpha: f64,
    l2: f64,
) -> Vec<Vec<S>> {
    assert_eq!(
        cfg.dropout, 0.0,
        "training_loss_grads: dropout must be disabled"
    );
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let mut rng = stream(0, "loss-eval");
    let pass = forward_on_tape(
        &mut tape,
        &vars,
        batch,
        cfg,
        RunMode::Train,
        IntentSource::Gold,
        &mut rng,
    );
    let intent = intent_loss(&mut tape, &pass.intent_probs, batch);
    let slot = slot_loss(&mut tape, &pass.slot_dists, batch);
    let penalty = l2_penalty(&mut tape, &vars.weight_vars(), l2);
    let loss = joint_loss(&mut tape, intent, slot, alpha, penalty);
    tape.backward(loss);
    vars.bound
        .iter()
        .map(|(_, _, v)| {
            tape.grad(*v)
                .map(<[S]>::to_vec)
                .unwrap_or_else(|| vec![S::zero(); tape.data(*v).len()])
        })
        .collect()
}

/// Compare every analytic parameter gradient of the joint training loss
/// against central finite differences.
#[allow(clippy::too_many_arguments)]
pub fn model_gradient_check<S: Scalar>(
    params: &ModelParams<S>,
    batch: &Batch,
    cfg: &ModelConfig,
    alpha: f64,
    l2: f64,
    h: f64,
    max_coords_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport, GradCheckError> {
    let analytic = training_loss_grads(params, batch, cfg, alpha, l2);
    let (names, mut flat) = params.flatten();
    let mut scratch = params.clone();
    let mut f = |tensors: &[Tensor<S>]| {
        scratch.assign_flat(tensors);
        training_loss(&scratch, batch, cfg, alpha, l2)
    };
    crate::autodiff::finite_diff_check(
        &names,
        &mut flat,
        &analytic,
        &mut f,
        h,
        max_coords_per_tensor,
        &mut stream(seed, "gradcheck-sample"),
    )
}
