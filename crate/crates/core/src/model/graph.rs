//! Per-token interaction between the slot decoder state and the intent
//! embeddings: graph attention by default, plus the ablation variants.

use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

use super::params::{GatHeadVars, InteractionVars};

/// Adjacency over the slot node (index 0) and `n` intent nodes: the slot
/// node connects to every intent, the intents form a clique, and every node
/// keeps a self-loop.
pub fn build_interaction_graph(n: usize) -> Vec<Vec<bool>> {
    let size = n + 1;
    let mut adj = vec![vec![false; size]; size];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = true;
    }
    adj[0][1..].fill(true);
    for row in adj.iter_mut().skip(1) {
        row[0] = true;
        row[1..].fill(true);
    }
    adj
}

fn flatten_adjacency(adj: &[Vec<bool>]) -> Vec<bool> {
    adj.iter().flatten().copied().collect()
}

/// One multi-head graph attention layer over `nodes` (`N x F`).
///
/// Per head: scores `u_i + v_j` from the split attention vector pass through
/// LeakyReLU, are softmax-normalized over each node's neighborhood, and
/// weight the projected neighbor features. Middle layers concatenate head
/// outputs; the final layer averages them before the nonlinearity.
///
/// Returns the new node matrix and each head's attention matrix.
pub fn gat_layer<S: Scalar>(
    tape: &mut Tape<S>,
    nodes: Var,
    adjacency: &[bool],
    heads: &[GatHeadVars],
    final_layer: bool,
    slope: S,
) -> (Var, Vec<Var>) {
    assert!(!heads.is_empty(), "gat_layer: no heads");
    let mut outputs = Vec::with_capacity(heads.len());
    let mut attentions = Vec::with_capacity(heads.len());
    for head in heads {
        let projected = tape.linear(nodes, head.weight, None); // N x F'
        let head_out = tape.shape(head.attn)[1];
        let a_src = tape.row(head.attn, 0);
        let a_src = tape.reshape(a_src, vec![1, head_out]);
        let a_dst = tape.row(head.attn, 1);
        let a_dst = tape.reshape(a_dst, vec![1, head_out]);
        let u = tape.linear(projected, a_src, None);
        let n = tape.shape(u)[0];
        let u = tape.reshape(u, vec![n]);
        let v = tape.linear(projected, a_dst, None);
        let v = tape.reshape(v, vec![n]);
        let scores = tape.pairwise_sum(u, v);
        let scores = tape.leaky_relu(scores, slope);
        let alpha = tape.masked_softmax(scores, adjacency, 1);
        attentions.push(alpha);
        let aggregated = tape.matmul(alpha, projected);
        if final_layer {
            outputs.push(aggregated);
        } else {
            outputs.push(tape.leaky_relu(aggregated, slope));
        }
    }
    let out = if final_layer {
        let summed = tape.add_n(&outputs);
        let avg = tape.affine(summed, S::from_f64(1.0 / heads.len() as f64), S::zero());
        tape.leaky_relu(avg, slope)
    } else {
        let mut it = outputs.into_iter();
        let first = it.next().unwrap();
        it.fold(first, |acc, h| tape.concat(acc, h))
    };
    (out, attentions)
}

/// Graph convolution layer: degree-normalized mean aggregation over the same
/// graph, `sigma(A_norm · nodes · Wᵀ)`.
pub(crate) fn gcn_layer<S: Scalar>(
    tape: &mut Tape<S>,
    nodes: Var,
    norm_adjacency: Var,
    weight: Var,
    slope: S,
) -> Var {
    let mixed = tape.matmul(norm_adjacency, nodes);
    let projected = tape.linear(mixed, weight, None);
    tape.leaky_relu(projected, slope)
}

/// Result of refining one slot state against the intent nodes.
pub struct Refined<S> {
    pub state: Var,
    /// Final-layer, head-averaged attention from the slot node over
    /// `[self, intent_1, ..., intent_n]`; only the graph-attention mode
    /// produces it.
    pub slot_attention: Option<Vec<S>>,
}

/// Refine a slot state against the embeddings of the given intent ids.
///
/// Rows of the bound `intent_embedding` table are gathered in the order of
/// `intents` and used as the graph's intent nodes.
pub fn graph_interact<S: Scalar>(
    tape: &mut Tape<S>,
    interaction: &InteractionVars,
    intent_embedding: Var,
    intents: &[usize],
    s_t: Var,
    slope: S,
) -> Refined<S> {
    let dim = tape.shape(intent_embedding)[1];
    let nodes: Vec<Var> = intents
        .iter()
        .map(|&id| {
            let row = tape.gather_rows(intent_embedding, &[id]);
            tape.reshape(row, vec![dim])
        })
        .collect();
    interact(tape, interaction, &nodes, s_t, slope)
}

/// Apply the configured interaction to one slot state `s_t` given the bound
/// intent node vectors. With no layers (or no applicable computation) the
/// state passes through unchanged.
pub(crate) fn interact<S: Scalar>(
    tape: &mut Tape<S>,
    interaction: &InteractionVars,
    intent_nodes: &[Var],
    s_t: Var,
    slope: S,
) -> Refined<S> {
    match interaction {
        InteractionVars::AdaptiveGat { layers } => {
            if layers.is_empty() {
                return Refined {
                    state: s_t,
                    slot_attention: None,
                };
            }
            let n = intent_nodes.len();
            let adjacency = flatten_adjacency(&build_interaction_graph(n));
            let mut rows = Vec::with_capacity(n + 1);
            rows.push(s_t);
            rows.extend_from_slice(intent_nodes);
            let mut nodes = tape.stack_rows(&rows);
            let mut slot_attention = None;
            for (l, heads) in layers.iter().enumerate() {
                let final_layer = l + 1 == layers.len();
                let (next, attentions) =
                    gat_layer(tape, nodes, &adjacency, heads, final_layer, slope);
                nodes = next;
                if final_layer {
                    let mut avg = vec![S::zero(); n + 1];
                    for alpha in &attentions {
                        for (a, v) in avg.iter_mut().zip(&tape.data(*alpha)[..n + 1]) {
                            *a += *v;
                        }
                    }
                    let k = S::from_f64(attentions.len() as f64);
                    for a in &mut avg {
                        *a /= k;
                    }
                    slot_attention = Some(avg);
                }
            }
            Refined {
                state: tape.row(nodes, 0),
                slot_attention,
            }
        }
        InteractionVars::Gcn { layers } => {
            if layers.is_empty() {
                return Refined {
                    state: s_t,
                    slot_attention: None,
                };
            }
            let n = intent_nodes.len();
            let adj = build_interaction_graph(n);
            let size = n + 1;
            let mut norm = Vec::with_capacity(size * size);
            for row in &adj {
                let degree = row.iter().filter(|x| **x).count();
                let w = S::from_f64(1.0 / degree as f64);
                norm.extend(row.iter().map(|x| if *x { w } else { S::zero() }));
            }
            let norm_adjacency =
                tape.constant(crate::autodiff::Tensor::from_vec(vec![size, size], norm));
            let mut rows = Vec::with_capacity(size);
            rows.push(s_t);
            rows.extend_from_slice(intent_nodes);
            let mut nodes = tape.stack_rows(&rows);
            for weight in layers {
                nodes = gcn_layer(tape, nodes, norm_adjacency, *weight, slope);
            }
            Refined {
                state: tape.row(nodes, 0),
                slot_attention: None,
            }
        }
        InteractionVars::VanillaAttention => {
            if intent_nodes.is_empty() {
                return Refined {
                    state: s_t,
                    slot_attention: None,
                };
            }
            let d = tape.shape(s_t)[0];
            let intents = tape.stack_rows(intent_nodes);
            let query = tape.reshape(s_t, vec![1, d]);
            let scores = tape.matmul_nt(query, intents);
            let n = intent_nodes.len();
            let scores = tape.reshape(scores, vec![n]);
            let alpha = tape.softmax(scores, 0);
            let alpha_row = tape.reshape(alpha, vec![1, n]);
            let context = tape.matmul(alpha_row, intents);
            let context = tape.reshape(context, vec![d]);
            Refined {
                state: tape.add(s_t, context),
                slot_attention: None,
            }
        }
        InteractionVars::SentenceLevel | InteractionVars::SentenceLevel2Layer { .. } => {
            if intent_nodes.is_empty() {
                return Refined {
                    state: s_t,
                    slot_attention: None,
                };
            }
            let summed = tape.add_n(intent_nodes);
            Refined {
                state: tape.add(s_t, summed),
                slot_attention: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn graph_is_star_plus_clique_with_self_loops() {
        let adj = build_interaction_graph(0);
        assert_eq!(adj, vec![vec![true]]);

        let adj = build_interaction_graph(2);
        for (i, row) in adj.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                assert!(cell, "edge {i}-{j} missing");
                assert_eq!(*cell, adj[j][i]);
            }
        }

        let adj = build_interaction_graph(3);
        let degree0 = adj[0].iter().filter(|x| **x).count();
        assert_eq!(degree0, 4); // three intents plus the self-loop
    }

    fn head(tape_seed: u64, in_dim: usize, out_dim: usize) -> (Tensor<f64>, Tensor<f64>) {
        let mut rng = stream(tape_seed, "head");
        let w = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let a = (0..2 * out_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (
            Tensor::from_vec(vec![out_dim, in_dim], w),
            Tensor::from_vec(vec![2, out_dim], a),
        )
    }

    #[test]
    fn single_node_layer_is_projection_through_nonlinearity() {
        let mut tape = Tape::<f64>::new();
        let (w, a) = head(1, 3, 3);
        let wv = tape.leaf(&w);
        let av = tape.leaf(&a);
        let h = tape.constant(Tensor::from_vec(vec![1, 3], vec![0.3, -0.2, 0.9]));
        let (out, attn) = gat_layer(
            &mut tape,
            h,
            &[true],
            &[GatHeadVars {
                weight: wv,
                attn: av,
            }],
            true,
            0.01,
        );
        assert_eq!(tape.data(attn[0]), &[1.0]);
        let projected = tape.linear(h, wv, None);
        let expected = tape.leaky_relu(projected, 0.01);
        assert_eq!(tape.data(out), tape.data(expected));
    }

    #[test]
    fn identical_features_split_attention_evenly() {
        let mut tape = Tape::<f64>::new();
        let (w, a) = head(2, 3, 3);
        let wv = tape.leaf(&w);
        let av = tape.leaf(&a);
        let feats = tape.constant(Tensor::from_vec(
            vec![2, 3],
            vec![0.3, -0.2, 0.9, 0.3, -0.2, 0.9],
        ));
        let adjacency = vec![true; 4];
        let (_, attn) = gat_layer(
            &mut tape,
            feats,
            &adjacency,
            &[GatHeadVars {
                weight: wv,
                attn: av,
            }],
            false,
            0.01,
        );
        for v in tape.data(attn[0]) {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_normalize_on_random_graphs() {
        let mut rng = stream(5, "rand-graph");
        for trial in 0..10 {
            let n = rng.gen_range(0..4);
            let size = n + 1;
            let mut tape = Tape::<f64>::new();
            let (w, a) = head(100 + trial, 4, 4);
            let wv = tape.leaf(&w);
            let av = tape.leaf(&a);
            let feats: Vec<f64> = (0..size * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nodes = tape.constant(Tensor::from_vec(vec![size, 4], feats));
            let adjacency = flatten_adjacency(&build_interaction_graph(n));
            let (_, attn) = gat_layer(
                &mut tape,
                nodes,
                &adjacency,
                &[GatHeadVars {
                    weight: wv,
                    attn: av,
                }],
                true,
                0.01,
            );
            for row in 0..size {
                let sum: f64 = tape.data(attn[0])[row * size..(row + 1) * size]
                    .iter()
                    .sum();
                assert!((sum - 1.0).abs() < 1e-6, "row {row} sums to {sum}");
            }
        }
    }

    #[test]
    fn gcn_single_node_is_plain_projection() {
        let mut tape = Tape::<f64>::new();
        let w = Tensor::from_vec(vec![2, 2], vec![0.5, -1.0, 2.0, 0.25]);
        let wv = tape.leaf(&w);
        let h = tape.constant(Tensor::from_vec(vec![1, 2], vec![0.4, -0.6]));
        let interaction = InteractionVars::Gcn { layers: vec![wv] };
        let s = tape.constant(Tensor::from_vec(vec![2], vec![0.4, -0.6]));
        let refined = interact(&mut tape, &interaction, &[], s, 0.01);
        let projected = tape.linear(h, wv, None);
        let expected = tape.leaky_relu(projected, 0.01);
        assert_eq!(tape.data(refined.state), tape.data(expected));
    }

    #[test]
    fn vanilla_attention_over_identical_intents_returns_that_embedding() {
        let mut tape = Tape::<f64>::new();
        let emb = tape.constant(Tensor::from_vec(vec![3], vec![0.7, -0.3, 0.1]));
        let s = tape.constant(Tensor::from_vec(vec![3], vec![2.0, 0.5, -1.0]));
        let refined = interact(
            &mut tape,
            &InteractionVars::VanillaAttention,
            &[emb, emb, emb],
            s,
            0.01,
        );
        let expected: Vec<f64> = tape
            .data(s)
            .iter()
            .zip(tape.data(emb))
            .map(|(a, b)| a + b)
            .collect();
        for (got, want) in tape.data(refined.state).iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn no_intents_degenerates_to_self_loop_updates() {
        let mut tape = Tape::<f64>::new();
        let (w1, a1) = head(7, 3, 3);
        let (w2, a2) = head(8, 3, 3);
        let layers = vec![
            vec![GatHeadVars {
                weight: tape.leaf(&w1),
                attn: tape.leaf(&a1),
            }],
            vec![GatHeadVars {
                weight: tape.leaf(&w2),
                attn: tape.leaf(&a2),
            }],
        ];
        let s = tape.constant(Tensor::from_vec(vec![3], vec![0.4, -0.9, 0.2]));
        let refined = interact(
            &mut tape,
            &InteractionVars::AdaptiveGat { layers },
            &[],
            s,
            0.01,
        );
        // single node with a self-loop: all attention on itself
        assert_eq!(refined.slot_attention.unwrap(), vec![1.0]);
        assert!(tape.data(refined.state).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn no_layers_passes_state_through_bitwise() {
        let mut tape = Tape::<f64>::new();
        let s = tape.constant(Tensor::from_vec(vec![2], vec![1.5, -2.5]));
        let emb = tape.constant(Tensor::from_vec(vec![2], vec![0.1, 0.2]));
        let refined = interact(
            &mut tape,
            &InteractionVars::AdaptiveGat { layers: vec![] },
            &[emb],
            s,
            0.01,
        );
        assert_eq!(refined.state, s);
        assert!(refined.slot_attention.is_none());
    }
}
