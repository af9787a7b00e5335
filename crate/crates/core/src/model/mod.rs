//! The joint model: self-attentive encoder, multi-label intent decoder, and
//! a slot decoder whose state is refined per token by graph attention over
//! the predicted intents.

mod config;
mod forward;
mod graph;
mod params;
mod trace;

pub use config::{ConfigError, InteractionMode, ModelConfig};
pub use forward::{
    argmax, forward, forward_on_tape, predicted_intent_set, ForwardPass, IntentSource, RunMode,
};
pub use graph::{build_interaction_graph, gat_layer, graph_interact, Refined};
pub use params::{
    EncoderParams, EncoderVars, GatHeadParams, GatHeadVars, IntentParams, IntentVars,
    InteractionParams, InteractionVars, LstmParams, LstmVars, ModelParams, ModelVars, NamedParam,
    NamedParamMut, ParamKind, SlotParams, SlotVars,
};
pub use trace::{ForwardTrace, UtteranceTrace};
