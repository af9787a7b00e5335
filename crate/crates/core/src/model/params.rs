use crate::autodiff::{xavier_init, Tape, Tensor, Var};
use crate::rng::stream;
use crate::scalar::Scalar;

use super::config::{InteractionMode, ModelConfig};

/// Parameter role, used for L2 regularization (weights only) and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
}

pub struct NamedParam<'a, S> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: &'a Tensor<S>,
}

pub struct NamedParamMut<'a, S> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: &'a mut Tensor<S>,
}

fn xav<S: Scalar>(rows: usize, cols: usize, seed: u64, name: &str) -> Tensor<S> {
    xavier_init(rows, cols, &mut stream(seed, &format!("init/{name}"))).with_grad()
}

fn zeros_1d<S: Scalar>(len: usize) -> Tensor<S> {
    Tensor::zeros(vec![len]).with_grad()
}

// ── LSTM ────────────────────────────────────────────────────────────────

/// One LSTM cell. Gate rows are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<S> {
    pub w_x: Tensor<S>,
    pub w_h: Tensor<S>,
    pub b: Tensor<S>,
}

impl<S: Scalar> LstmParams<S> {
    fn init(input: usize, hidden: usize, seed: u64, prefix: &str) -> Self {
        LstmParams {
            w_x: xav(4 * hidden, input, seed, &format!("{prefix}.w_x")),
            w_h: xav(4 * hidden, hidden, seed, &format!("{prefix}.w_h")),
            b: zeros_1d(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.numel() / 4
    }

    fn named<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a, S>>) {
        out.push(NamedParam {
            name: format!("{prefix}.w_x"),
            kind: ParamKind::Weight,
            tensor: &self.w_x,
        });
        out.push(NamedParam {
            name: format!("{prefix}.w_h"),
            kind: ParamKind::Weight,
            tensor: &self.w_h,
        });
        out.push(NamedParam {
            name: format!("{prefix}.b"),
            kind: ParamKind::Bias,
            tensor: &self.b,
        });
    }

    fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedParamMut<'a, S>>) {
        out.push(NamedParamMut {
            name: format!("{prefix}.w_x"),
            kind: ParamKind::Weight,
            tensor: &mut self.w_x,
        });
        out.push(NamedParamMut {
            name: format!("{prefix}.w_h"),
            kind: ParamKind::Weight,
            tensor: &mut self.w_h,
        });
        out.push(NamedParamMut {
            name: format!("{prefix}.b"),
            kind: ParamKind::Bias,
            tensor: &mut self.b,
        });
    }

    fn bind(&self, b: &mut Binder<'_, S>, prefix: &str) -> LstmVars {
        LstmVars {
            w_x: b.leaf(format!("{prefix}.w_x"), ParamKind::Weight, &self.w_x),
            w_h: b.leaf(format!("{prefix}.w_h"), ParamKind::Weight, &self.w_h),
            b: b.leaf(format!("{prefix}.b"), ParamKind::Bias, &self.b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

// ── Encoder ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<S> {
    pub embedding: Tensor<S>,
    pub fw: LstmParams<S>,
    pub bw: LstmParams<S>,
    pub w_query: Tensor<S>,
    pub w_key: Tensor<S>,
    pub w_value: Tensor<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    pub embedding: Var,
    pub fw: LstmVars,
    pub bw: LstmVars,
    pub w_query: Var,
    pub w_key: Var,
    pub w_value: Var,
}

// ── Intent decoder ──────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct IntentParams<S> {
    /// Scores each token encoding for the utterance-context pooling.
    pub w_pool: Tensor<S>,
    pub b_pool: Tensor<S>,
    pub w_hidden: Tensor<S>,
    pub b_hidden: Tensor<S>,
    pub w_out: Tensor<S>,
    pub b_out: Tensor<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct IntentVars {
    pub w_pool: Var,
    pub b_pool: Var,
    pub w_hidden: Var,
    pub b_hidden: Var,
    pub w_out: Var,
    pub b_out: Var,
}

// ── Graph interaction ───────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct GatHeadParams<S> {
    /// Node projection, `[out, in]`.
    pub weight: Tensor<S>,
    /// Attention vector split into source/destination halves, `[2, out]`.
    pub attn: Tensor<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct GatHeadVars {
    pub weight: Var,
    pub attn: Var,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum InteractionParams<S> {
    /// `layers[l][k]`: head `k` of layer `l`. Middle layers concatenate
    /// heads (per-head width `graph_dim / heads`); the final layer averages
    /// full-width heads.
    AdaptiveGat {
        layers: Vec<Vec<GatHeadParams<S>>>,
    },
    Gcn {
        layers: Vec<Tensor<S>>,
    },
    VanillaAttention,
    SentenceLevel,
    SentenceLevel2Layer {
        lstm2: LstmParams<S>,
    },
}

#[derive(Debug, Clone)]
pub enum InteractionVars {
    AdaptiveGat { layers: Vec<Vec<GatHeadVars>> },
    Gcn { layers: Vec<Var> },
    VanillaAttention,
    SentenceLevel,
    SentenceLevel2Layer { lstm2: LstmVars },
}

// ── Slot decoder ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct SlotParams<S> {
    pub lstm: LstmParams<S>,
    pub w_out: Tensor<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct SlotVars {
    pub lstm: LstmVars,
    pub w_out: Var,
}

// ── Full parameter set ──────────────────────────────────────────────────

/// All trainable weights, grouped by sub-network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub encoder: EncoderParams<S>,
    pub intent: IntentParams<S>,
    pub intent_embedding: Tensor<S>,
    pub interaction: InteractionParams<S>,
    pub slot: SlotParams<S>,
}

/// Tape handles for one bound forward pass, mirroring [`ModelParams`].
pub struct ModelVars {
    pub encoder: EncoderVars,
    pub intent: IntentVars,
    pub intent_embedding: Var,
    pub interaction: InteractionVars,
    pub slot: SlotVars,
    /// Every bound leaf in canonical parameter order.
    pub bound: Vec<(String, ParamKind, Var)>,
}

impl ModelVars {
    /// Vars of the weight matrices, for L2 regularization.
    pub fn weight_vars(&self) -> Vec<Var> {
        self.bound
            .iter()
            .filter(|(_, k, _)| *k == ParamKind::Weight)
            .map(|(_, _, v)| *v)
            .collect()
    }
}

struct Binder<'t, S> {
    tape: &'t mut Tape<S>,
    bound: Vec<(String, ParamKind, Var)>,
}

impl<S: Scalar> Binder<'_, S> {
    fn leaf(&mut self, name: String, kind: ParamKind, t: &Tensor<S>) -> Var {
        let v = self.tape.leaf(t);
        self.bound.push((name, kind, v));
        v
    }
}

impl<S: Scalar> ModelParams<S> {
    /// Initialize all parameters: Xavier-uniform matrices and embedding
    /// tables, zero biases. Each tensor draws from its own seed stream, so
    /// the result does not depend on initialization order.
    pub fn init(cfg: &ModelConfig, n_tokens: usize, seed: u64) -> Self {
        cfg.validate().expect("invalid model config");
        let half = cfg.hidden_dim / 2;
        let enc_width = 2 * cfg.hidden_dim;
        let interaction = match cfg.interaction {
            InteractionMode::AdaptiveGat => InteractionParams::AdaptiveGat {
                layers: (0..cfg.graph_layers)
                    .map(|l| {
                        let head_out = if l + 1 == cfg.graph_layers {
                            cfg.graph_dim
                        } else {
                            cfg.graph_dim / cfg.graph_heads
                        };
                        (0..cfg.graph_heads)
                            .map(|k| GatHeadParams {
                                weight: xav(
                                    head_out,
                                    cfg.graph_dim,
                                    seed,
                                    &format!("graph.l{l}.h{k}.weight"),
                                ),
                                attn: xav(2, head_out, seed, &format!("graph.l{l}.h{k}.attn")),
                            })
                            .collect()
                    })
                    .collect(),
            },
            InteractionMode::Gcn => InteractionParams::Gcn {
                layers: (0..cfg.graph_layers)
                    .map(|l| {
                        xav(
                            cfg.graph_dim,
                            cfg.graph_dim,
                            seed,
                            &format!("gcn.l{l}.weight"),
                        )
                    })
                    .collect(),
            },
            InteractionMode::VanillaAttention => InteractionParams::VanillaAttention,
            InteractionMode::SentenceLevel => InteractionParams::SentenceLevel,
            InteractionMode::SentenceLevel2Layer => InteractionParams::SentenceLevel2Layer {
                lstm2: LstmParams::init(cfg.graph_dim, cfg.graph_dim, seed, "slot.lstm2"),
            },
        };
        ModelParams {
            encoder: EncoderParams {
                embedding: xav(n_tokens, cfg.embed_dim, seed, "encoder.embedding"),
                fw: LstmParams::init(cfg.embed_dim, half, seed, "encoder.fw"),
                bw: LstmParams::init(cfg.embed_dim, half, seed, "encoder.bw"),
                w_query: xav(cfg.key_dim, cfg.embed_dim, seed, "encoder.w_query"),
                w_key: xav(cfg.key_dim, cfg.embed_dim, seed, "encoder.w_key"),
                w_value: xav(cfg.hidden_dim, cfg.embed_dim, seed, "encoder.w_value"),
            },
            intent: IntentParams {
                w_pool: xav(1, enc_width, seed, "intent.w_pool"),
                b_pool: zeros_1d(1),
                w_hidden: xav(cfg.hidden_dim, enc_width, seed, "intent.w_hidden"),
                b_hidden: zeros_1d(cfg.hidden_dim),
                w_out: xav(cfg.n_intents, cfg.hidden_dim, seed, "intent.w_out"),
                b_out: zeros_1d(cfg.n_intents),
            },
            intent_embedding: xav(cfg.n_intents, cfg.graph_dim, seed, "intent_embedding"),
            interaction,
            slot: SlotParams {
                lstm: LstmParams::init(enc_width + cfg.n_slots, cfg.graph_dim, seed, "slot.lstm"),
                w_out: xav(cfg.n_slots, cfg.graph_dim, seed, "slot.w_out"),
            },
        }
    }

    /// All parameters in canonical order.
    pub fn named(&self) -> Vec<NamedParam<'_, S>> {
        let mut out = Vec::new();
        out.push(NamedParam {
            name: "encoder.embedding".into(),
            kind: ParamKind::Embedding,
            tensor: &self.encoder.embedding,
        });
        self.encoder.fw.named("encoder.fw", &mut out);
        self.encoder.bw.named("encoder.bw", &mut out);
        out.push(NamedParam {
            name: "encoder.w_query".into(),
            kind: ParamKind::Weight,
            tensor: &self.encoder.w_query,
        });
        out.push(NamedParam {
            name: "encoder.w_key".into(),
            kind: ParamKind::Weight,
            tensor: &self.encoder.w_key,
        });
        out.push(NamedParam {
            name: "encoder.w_value".into(),
            kind: ParamKind::Weight,
            tensor: &self.encoder.w_value,
        });
        out.push(NamedParam {
            name: "intent.w_pool".into(),
            kind: ParamKind::Weight,
            tensor: &self.intent.w_pool,
        });
        out.push(NamedParam {
            name: "intent.b_pool".into(),
            kind: ParamKind::Bias,
            tensor: &self.intent.b_pool,
        });
        out.push(NamedParam {
            name: "intent.w_hidden".into(),
            kind: ParamKind::Weight,
            tensor: &self.intent.w_hidden,
        });
        out.push(NamedParam {
            name: "intent.b_hidden".into(),
            kind: ParamKind::Bias,
            tensor: &self.intent.b_hidden,
        });
        out.push(NamedParam {
            name: "intent.w_out".into(),
            kind: ParamKind::Weight,
            tensor: &self.intent.w_out,
        });
        out.push(NamedParam {
            name: "intent.b_out".into(),
            kind: ParamKind::Bias,
            tensor: &self.intent.b_out,
        });
        out.push(NamedParam {
            name: "intent_embedding".into(),
            kind: ParamKind::Embedding,
            tensor: &self.intent_embedding,
        });
        match &self.interaction {
            InteractionParams::AdaptiveGat { layers } => {
                for (l, heads) in layers.iter().enumerate() {
                    for (k, head) in heads.iter().enumerate() {
                        out.push(NamedParam {
                            name: format!("graph.l{l}.h{k}.weight"),
                            kind: ParamKind::Weight,
                            tensor: &head.weight,
                        });
                        out.push(NamedParam {
                            name: format!("graph.l{l}.h{k}.attn"),
                            kind: ParamKind::Weight,
                            tensor: &head.attn,
                        });
                    }
                }
            }
            InteractionParams::Gcn { layers } => {
                for (l, w) in layers.iter().enumerate() {
                    out.push(NamedParam {
                        name: format!("gcn.l{l}.weight"),
                        kind: ParamKind::Weight,
                        tensor: w,
                    });
                }
            }
            InteractionParams::VanillaAttention | InteractionParams::SentenceLevel => {}
            InteractionParams::SentenceLevel2Layer { lstm2 } => lstm2.named("slot.lstm2", &mut out),
        }
        self.slot.lstm.named("slot.lstm", &mut out);
        out.push(NamedParam {
            name: "slot.w_out".into(),
            kind: ParamKind::Weight,
            tensor: &self.slot.w_out,
        });
        out
    }

    /// All parameters, mutably, in the same order as [`ModelParams::named`].
    pub fn named_mut(&mut self) -> Vec<NamedParamMut<'_, S>> {
        let mut out = Vec::new();
        out.push(NamedParamMut {
            name: "encoder.embedding".into(),
            kind: ParamKind::Embedding,
            tensor: &mut self.encoder.embedding,
        });
        self.encoder.fw.named_mut("encoder.fw", &mut out);
        self.encoder.bw.named_mut("encoder.bw", &mut out);
        out.push(NamedParamMut {
            name: "encoder.w_query".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.encoder.w_query,
        });
        out.push(NamedParamMut {
            name: "encoder.w_key".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.encoder.w_key,
        });
        out.push(NamedParamMut {
            name: "encoder.w_value".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.encoder.w_value,
        });
        out.push(NamedParamMut {
            name: "intent.w_pool".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.intent.w_pool,
        });
        out.push(NamedParamMut {
            name: "intent.b_pool".into(),
            kind: ParamKind::Bias,
            tensor: &mut self.intent.b_pool,
        });
        out.push(NamedParamMut {
            name: "intent.w_hidden".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.intent.w_hidden,
        });
        out.push(NamedParamMut {
            name: "intent.b_hidden".into(),
            kind: ParamKind::Bias,
            tensor: &mut self.intent.b_hidden,
        });
        out.push(NamedParamMut {
            name: "intent.w_out".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.intent.w_out,
        });
        out.push(NamedParamMut {
            name: "intent.b_out".into(),
            kind: ParamKind::Bias,
            tensor: &mut self.intent.b_out,
        });
        out.push(NamedParamMut {
            name: "intent_embedding".into(),
            kind: ParamKind::Embedding,
            tensor: &mut self.intent_embedding,
        });
        match &mut self.interaction {
            InteractionParams::AdaptiveGat { layers } => {
                for (l, heads) in layers.iter_mut().enumerate() {
                    for (k, head) in heads.iter_mut().enumerate() {
                        out.push(NamedParamMut {
                            name: format!("graph.l{l}.h{k}.weight"),
                            kind: ParamKind::Weight,
                            tensor: &mut head.weight,
                        });
                        out.push(NamedParamMut {
                            name: format!("graph.l{l}.h{k}.attn"),
                            kind: ParamKind::Weight,
                            tensor: &mut head.attn,
                        });
                    }
                }
            }
            InteractionParams::Gcn { layers } => {
                for (l, w) in layers.iter_mut().enumerate() {
                    out.push(NamedParamMut {
                        name: format!("gcn.l{l}.weight"),
                        kind: ParamKind::Weight,
                        tensor: w,
                    });
                }
            }
            InteractionParams::VanillaAttention | InteractionParams::SentenceLevel => {}
            InteractionParams::SentenceLevel2Layer { lstm2 } => {
                lstm2.named_mut("slot.lstm2", &mut out)
            }
        }
        self.slot.lstm.named_mut("slot.lstm", &mut out);
        out.push(NamedParamMut {
            name: "slot.w_out".into(),
            kind: ParamKind::Weight,
            tensor: &mut self.slot.w_out,
        });
        out
    }

    /// Bind every parameter as a tape leaf for one forward pass.
    pub fn bind(&self, tape: &mut Tape<S>) -> ModelVars {
        let mut b = Binder {
            tape,
            bound: Vec::new(),
        };
        let encoder = EncoderVars {
            embedding: b.leaf(
                "encoder.embedding".into(),
                ParamKind::Embedding,
                &self.encoder.embedding,
            ),
            fw: self.encoder.fw.bind(&mut b, "encoder.fw"),
            bw: self.encoder.bw.bind(&mut b, "encoder.bw"),
            w_query: b.leaf(
                "encoder.w_query".into(),
                ParamKind::Weight,
                &self.encoder.w_query,
            ),
            w_key: b.leaf(
                "encoder.w_key".into(),
                ParamKind::Weight,
                &self.encoder.w_key,
            ),
            w_value: b.leaf(
                "encoder.w_value".into(),
                ParamKind::Weight,
                &self.encoder.w_value,
            ),
        };
        let intent = IntentVars {
            w_pool: b.leaf(
                "intent.w_pool".into(),
                ParamKind::Weight,
                &self.intent.w_pool,
            ),
            b_pool: b.leaf("intent.b_pool".into(), ParamKind::Bias, &self.intent.b_pool),
            w_hidden: b.leaf(
                "intent.w_hidden".into(),
                ParamKind::Weight,
                &self.intent.w_hidden,
            ),
            b_hidden: b.leaf(
                "intent.b_hidden".into(),
                ParamKind::Bias,
                &self.intent.b_hidden,
            ),
            w_out: b.leaf("intent.w_out".into(), ParamKind::Weight, &self.intent.w_out),
            b_out: b.leaf("intent.b_out".into(), ParamKind::Bias, &self.intent.b_out),
        };
        let intent_embedding = b.leaf(
            "intent_embedding".into(),
            ParamKind::Embedding,
            &self.intent_embedding,
        );
        let interaction = match &self.interaction {
            InteractionParams::AdaptiveGat { layers } => InteractionVars::AdaptiveGat {
                layers: layers
                    .iter()
                    .enumerate()
                    .map(|(l, heads)| {
                        heads
                            .iter()
                            .enumerate()
                            .map(|(k, head)| GatHeadVars {
                                weight: b.leaf(
                                    format!("graph.l{l}.h{k}.weight"),
                                    ParamKind::Weight,
                                    &head.weight,
                                ),
                                attn: b.leaf(
                                    format!("graph.l{l}.h{k}.attn"),
                                    ParamKind::Weight,
                                    &head.attn,
                                ),
                            })
                            .collect()
                    })
                    .collect(),
            },
            InteractionParams::Gcn { layers } => InteractionVars::Gcn {
                layers: layers
                    .iter()
                    .enumerate()
                    .map(|(l, w)| b.leaf(format!("gcn.l{l}.weight"), ParamKind::Weight, w))
                    .collect(),
            },
            InteractionParams::VanillaAttention => InteractionVars::VanillaAttention,
            InteractionParams::SentenceLevel => InteractionVars::SentenceLevel,
            InteractionParams::SentenceLevel2Layer { lstm2 } => {
                InteractionVars::SentenceLevel2Layer {
                    lstm2: lstm2.bind(&mut b, "slot.lstm2"),
                }
            }
        };
        let slot = SlotVars {
            lstm: self.slot.lstm.bind(&mut b, "slot.lstm"),
            w_out: b.leaf("slot.w_out".into(), ParamKind::Weight, &self.slot.w_out),
        };
        ModelVars {
            encoder,
            intent,
            intent_embedding,
            interaction,
            slot,
            bound: b.bound,
        }
    }

    /// Copies of all parameter tensors plus their names, in canonical order.
    pub fn flatten(&self) -> (Vec<String>, Vec<Tensor<S>>) {
        let named = self.named();
        (
            named.iter().map(|p| p.name.clone()).collect(),
            named.iter().map(|p| p.tensor.clone()).collect(),
        )
    }

    /// Overwrite all parameters from a flat list in canonical order.
    pub fn assign_flat(&mut self, tensors: &[Tensor<S>]) {
        let mut named = self.named_mut();
        assert_eq!(
            named.len(),
            tensors.len(),
            "assign_flat: parameter count mismatch"
        );
        for (dst, src) in named.iter_mut().zip(tensors) {
            assert_eq!(
                dst.tensor.shape, src.shape,
                "assign_flat: shape mismatch for {}",
                dst.name
            );
            dst.tensor.data.clone_from(&src.data);
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.named().iter().map(|p| p.tensor.numel()).sum()
    }
}
