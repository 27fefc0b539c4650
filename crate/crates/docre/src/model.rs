//! Relational core over the encoded document.
//!
//! Mention and anaphor nodes are embedded from encoder states (marker
//! position for mentions, span mean for anaphors). A dynamically weighted
//! adjacency is recomputed from the current node states each outer
//! iteration: per edge type and attention head, scaled bilinear scores are
//! masked to the type's support, summed across types, averaged over heads,
//! and row-softmaxed over the union support; isolated nodes get all-zero
//! rows. A residual graph convolution stack then propagates node states.
//! Entity pooling is logsumexp over member rows; pair context comes from
//! the normalized overlap of the two entities' encoder attention. Scoring
//! is a grouped bilinear form producing one logit per relation plus a
//! threshold logit in the last slot.

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, TensorError, TensorId};
use crate::corpus::Document;
use crate::encoder::{self, EncoderConfig, EncoderError, EncoderOutput};
use crate::graph::{DocGraph, EDGE_TYPES};
use crate::marking::{MarkedDoc, MarkingError};
use crate::params::{init_const, init_normal, Bound, ParamBank};

pub const ADJ_TYPE_KEYS: [&str; EDGE_TYPES] = ["ma", "co", "ie"];
/// Guard for the attention-overlap denominator.
pub const CONTEXT_EPS: f64 = 1e-10;
const INIT_STD: f64 = 0.02;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Marking(#[from] MarkingError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("document {doc:?} marks to {got} tokens, over the encoder limit {max}")]
    DocTooLong { doc: String, got: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Number of real relation classes; logits carry one extra threshold slot.
    pub relations: usize,
    /// GCN layers per iteration.
    pub gcn_layers: usize,
    /// Outer iterations; each recomputes the adjacency.
    pub gcn_iterations: usize,
    /// Attention heads of the dynamic adjacency.
    pub adj_heads: usize,
    /// Groups of the bilinear classifier; must divide `hidden`.
    pub bilinear_groups: usize,
    /// Ablation: skip the graph entirely and feed zero node features.
    pub use_graph: bool,
}

impl ModelConfig {
    pub fn with_encoder(encoder: EncoderConfig, relations: usize) -> Self {
        ModelConfig {
            encoder,
            relations,
            gcn_layers: 2,
            gcn_iterations: 2,
            adj_heads: 2,
            bilinear_groups: 2,
            use_graph: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.encoder.validate()?;
        let bad = |m: String| Err(ModelError::BadConfig(m));
        if self.relations == 0 {
            return bad("relations must be positive".into());
        }
        if self.gcn_layers == 0 || self.gcn_iterations == 0 || self.adj_heads == 0 {
            return bad("gcn_layers, gcn_iterations, adj_heads must be positive".into());
        }
        if self.bilinear_groups == 0 || self.encoder.hidden % self.bilinear_groups != 0 {
            return bad(format!(
                "bilinear_groups {} must divide hidden {}",
                self.bilinear_groups, self.encoder.hidden
            ));
        }
        Ok(())
    }

    pub fn logit_len(&self) -> usize {
        self.relations + 1
    }

    pub fn threshold_index(&self) -> usize {
        self.relations
    }
}

/// Register encoder and relational parameters; returns the complete bank.
pub fn build_params(cfg: &ModelConfig, root_seed: u64) -> ParamBank {
    let mut bank = ParamBank::new();
    encoder::register_params(&mut bank, &cfg.encoder, root_seed);
    register_core_params(&mut bank, cfg, root_seed);
    bank
}

fn register_core_params(bank: &mut ParamBank, cfg: &ModelConfig, root_seed: u64) {
    fn normal(bank: &mut ParamBank, root_seed: u64, name: &str, shape: Vec<usize>) {
        let len = shape.iter().product();
        bank.insert(name, shape, init_normal(root_seed, name, len, INIT_STD));
    }
    let d = cfg.encoder.hidden;
    // Adjacency score matrices start at 1/sqrt(d) rather than INIT_STD: with
    // 0.02 the pair logits are ~4e-4, the softmax is uniform for every input,
    // and the gradient into wq/wk is a product of two near-zero terms, so the
    // learned adjacency never leaves its cold start.
    let adj_std = 1.0 / (d as f64).sqrt();
    for key in ADJ_TYPE_KEYS {
        for u in 0..cfg.adj_heads {
            for mat in ["wq", "wk"] {
                let name = format!("core.adj.{key}.head{u}.{mat}");
                bank.insert(&name, vec![d, d], init_normal(root_seed, &name, d * d, adj_std));
            }
        }
    }
    for k in 0..cfg.gcn_layers {
        normal(bank, root_seed, &format!("core.gcn.layer{k}.w"), vec![d, d]);
        bank.insert(&format!("core.gcn.layer{k}.b"), vec![d], init_const(d, 0.0));
    }
    normal(bank, root_seed, "core.head_proj.w", vec![3 * d, d]);
    normal(bank, root_seed, "core.tail_proj.w", vec![3 * d, d]);
    bank.insert("core.proj.bias", vec![d], init_const(d, 0.0));
    let feat = d * d / cfg.bilinear_groups;
    normal(bank, root_seed, "core.bilinear.w", vec![cfg.logit_len(), feat]);
    bank.insert("core.bilinear.b", vec![cfg.logit_len()], init_const(cfg.logit_len(), 0.0));
}

// ── document preparation ─────────────────────────────────────────────────────

/// Everything deterministic a forward pass needs, computed once per
/// document: marker insertion, anaphor spans, the document graph, and
/// vocabulary ids.
pub struct PreparedDoc {
    pub doc: Document,
    pub anaphors: crate::anaphora::AnaphorSet,
    pub marked: MarkedDoc,
    pub graph: DocGraph,
    pub token_ids: Vec<usize>,
}

pub fn prepare_doc(
    doc: &Document,
    parse: &crate::corpus::DocParse,
    vocab: &crate::vocab::TokenVocab,
    cfg: &ModelConfig,
    anaphor_cfg: crate::anaphora::AnaphorConfig,
    variant: crate::graph::GraphVariant,
    root_seed: u64,
) -> Result<PreparedDoc, ModelError> {
    let anaphors = crate::anaphora::extract_anaphors(doc, parse, anaphor_cfg)?;
    let marked = crate::marking::mark_entities(doc);
    if marked.tokens.len() > cfg.encoder.max_len {
        return Err(ModelError::DocTooLong {
            doc: doc.doc_id.clone(),
            got: marked.tokens.len(),
            max: cfg.encoder.max_len,
        });
    }
    let graph = match variant {
        crate::graph::GraphVariant::RandomReplace => {
            let mut rng =
                crate::seeding::stream(root_seed, &format!("graph.random-replace.doc{}", doc.doc_id));
            crate::graph::build_graph(doc, &anaphors, variant, Some(&mut rng))
        }
        _ => crate::graph::build_graph(doc, &anaphors, variant, None),
    };
    let token_ids = marked.tokens.iter().map(|t| vocab.id(t)).collect();
    Ok(PreparedDoc {
        doc: doc.clone(),
        anaphors,
        marked,
        graph,
        token_ids,
    })
}

impl PreparedDoc {
    /// Forward pass over this prepared document.
    pub fn forward(
        &self,
        tape: &Tape,
        bound: &Bound,
        cfg: &ModelConfig,
        dropout_rng: Option<&mut ChaCha20Rng>,
    ) -> Result<DocForward, ModelError> {
        aa_forward(
            tape,
            bound,
            cfg,
            &self.doc,
            &self.marked,
            &self.graph,
            &self.token_ids,
            dropout_rng,
        )
    }
}

// ── pooling primitives ───────────────────────────────────────────────────────

/// Logsumexp pool over selected rows: smooth maximum per dimension.
pub fn entity_pool(tape: &Tape, h: TensorId, rows: &[usize]) -> Result<TensorId, TensorError> {
    let picked = tape.gather_rows(h, rows)?;
    tape.logsumexp(picked, 0)
}

/// Mean of the entity's marker attention rows: a distribution over tokens.
pub fn entity_attention(tape: &Tape, a: TensorId, rows: &[usize]) -> Result<TensorId, TensorError> {
    let picked = tape.gather_rows(a, rows)?;
    tape.mean_rows(picked)
}

/// Normalized elementwise overlap of two token distributions. Sums to one
/// whenever the overlap is real; a vanishing overlap divides by the guard
/// instead and stays near zero.
pub fn overlap_weights(
    tape: &Tape,
    attn_head: TensorId,
    attn_tail: TensorId,
) -> Result<TensorId, TensorError> {
    let w = tape.mul(attn_head, attn_tail)?;
    let denom = tape.sum(w)?;
    let denom = tape.clamp_min(denom, CONTEXT_EPS)?;
    tape.mul_scalar(w, tape.recip(denom)?)
}

/// Context vector: token states weighted by the pair's overlap distribution.
pub fn context_pool(tape: &Tape, h: TensorId, weights: TensorId) -> Result<TensorId, TensorError> {
    let l = tape.shape(weights)[0];
    let d = tape.shape(h)[1];
    let row = tape.reshape(weights, vec![1, l])?;
    let c = tape.matmul(row, h)?;
    tape.reshape(c, vec![d])
}

// ── dynamic adjacency and GCN ────────────────────────────────────────────────

/// Attention-weighted adjacency from current node states. Row-stochastic on
/// the union support; exactly zero off-support and on isolated rows.
pub fn dynamic_adjacency(
    tape: &Tape,
    nodes: TensorId,
    graph: &DocGraph,
    bound: &Bound,
    cfg: &ModelConfig,
) -> Result<TensorId, TensorError> {
    let n = graph.n();
    let d = cfg.encoder.hidden;
    let scale = 1.0 / (d as f64).sqrt();
    let mut head_sum: Option<TensorId> = None;
    for u in 0..cfg.adj_heads {
        let mut type_sum: Option<TensorId> = None;
        for (ty, key) in ADJ_TYPE_KEYS.iter().enumerate() {
            let mask: Vec<f64> = graph.adj[ty].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            if mask.iter().all(|&m| m == 0.0) {
                continue;
            }
            let m = tape.constant(mask, vec![n, n])?;
            let q = tape.matmul(nodes, bound.id(&format!("core.adj.{key}.head{u}.wq")))?;
            let k = tape.matmul(nodes, bound.id(&format!("core.adj.{key}.head{u}.wk")))?;
            let s = tape.scale(tape.matmul(q, tape.transpose(k)?)?, scale)?;
            let masked = tape.mul(s, m)?;
            type_sum = Some(match type_sum {
                Some(acc) => tape.add(acc, masked)?,
                None => masked,
            });
        }
        let raw = match type_sum {
            Some(s) => s,
            // no edges at all: zero scores, fully masked softmax below
            None => tape.constant(vec![0.0; n * n], vec![n, n])?,
        };
        head_sum = Some(match head_sum {
            Some(acc) => tape.add(acc, raw)?,
            None => raw,
        });
    }
    let avg = tape.scale(head_sum.expect("adj_heads > 0"), 1.0 / cfg.adj_heads as f64)?;
    tape.masked_softmax_rows(avg, &graph.support())
}

/// One residual graph convolution: `relu(Ã G W + b) + G`.
pub fn gcn_layer(
    tape: &Tape,
    adj: TensorId,
    nodes: TensorId,
    w: TensorId,
    b: TensorId,
) -> Result<TensorId, TensorError> {
    let agg = tape.matmul(adj, nodes)?;
    let lin = tape.add_bias(tape.matmul(agg, w)?, b)?;
    let act = tape.relu(lin)?;
    tape.add(act, nodes)
}

// ── full document forward ────────────────────────────────────────────────────

pub struct PairComputation {
    pub head: usize,
    pub tail: usize,
    /// `[relations + 1]`, threshold logit last.
    pub logits: TensorId,
    /// Normalized token overlap of the pair `[len]`; reused as the evidence
    /// source distribution.
    pub token_weights: TensorId,
}

pub struct DocForward {
    pub encoder: EncoderOutput,
    /// Final node states `[n, hidden]` when the graph is in play.
    pub node_states: Option<TensorId>,
    /// Ordered pairs, head-major, excluding self-pairs.
    pub pairs: Vec<PairComputation>,
}

/// Encode the marked document and score every ordered entity pair.
pub fn aa_forward(
    tape: &Tape,
    bound: &Bound,
    cfg: &ModelConfig,
    doc: &Document,
    marked: &MarkedDoc,
    graph: &DocGraph,
    token_ids: &[usize],
    dropout_rng: Option<&mut ChaCha20Rng>,
) -> Result<DocForward, ModelError> {
    cfg.validate()?;
    let d = cfg.encoder.hidden;
    let enc = encoder::encode(tape, bound, &cfg.encoder, token_ids, dropout_rng)?;
    let offsets = doc.sent_offsets();

    // node embeddings in graph order
    let node_states = if cfg.use_graph && graph.n() > 0 {
        let mut rows = Vec::with_capacity(graph.n());
        for node in &graph.nodes {
            match *node {
                crate::graph::NodeKind::Mention { entity, mention } => {
                    let idx = marked.open_marker(doc, entity, mention)?;
                    rows.push(tape.row(enc.h, idx)?);
                }
                crate::graph::NodeKind::Anaphor { index } => {
                    let a = &graph.anaphors[index];
                    let span = marked.map_span(&offsets, a.sent_id, a.start, a.end);
                    let picked = tape.gather_rows(enc.h, &span)?;
                    rows.push(tape.mean_rows(picked)?);
                }
            }
        }
        let mut g = tape.stack_rows(&rows)?;
        for _ in 0..cfg.gcn_iterations {
            let adj = dynamic_adjacency(tape, g, graph, bound, cfg)?;
            for k in 0..cfg.gcn_layers {
                g = gcn_layer(
                    tape,
                    adj,
                    g,
                    bound.id(&format!("core.gcn.layer{k}.w")),
                    bound.id(&format!("core.gcn.layer{k}.b")),
                )?;
            }
        }
        Some(g)
    } else {
        None
    };

    // node indices per entity (graph order puts mentions first)
    let n_entities = doc.entities.len();
    let mut entity_nodes: Vec<Vec<usize>> = vec![Vec::new(); n_entities];
    for (i, node) in graph.nodes.iter().enumerate() {
        if let crate::graph::NodeKind::Mention { entity, .. } = *node {
            entity_nodes[entity].push(i);
        }
    }

    // per-entity representations
    let mut h_e = Vec::with_capacity(n_entities);
    let mut g_e = Vec::with_capacity(n_entities);
    let mut a_e = Vec::with_capacity(n_entities);
    let zero_d = tape.constant(vec![0.0; d], vec![d])?;
    for (e, ent) in doc.entities.iter().enumerate() {
        let markers: Vec<usize> = (0..ent.mentions.len())
            .map(|m| marked.open_marker(doc, e, m))
            .collect::<Result<_, _>>()?;
        h_e.push(entity_pool(tape, enc.h, &markers)?);
        a_e.push(entity_attention(tape, enc.a, &markers)?);
        g_e.push(match node_states {
            Some(g) => entity_pool(tape, g, &entity_nodes[e])?,
            None => zero_d,
        });
    }

    let head_proj = bound.id("core.head_proj.w");
    let tail_proj = bound.id("core.tail_proj.w");
    let proj_bias = bound.id("core.proj.bias");
    let bilinear_w = bound.id("core.bilinear.w");
    let bilinear_b = bound.id("core.bilinear.b");
    let groups = cfg.bilinear_groups;
    let gd = d / groups;

    let project = |pooled: TensorId, ctx: TensorId, node: TensorId, w: TensorId| -> Result<TensorId, TensorError> {
        let joint = tape.concat_last(&[pooled, ctx, node])?;
        let joint = tape.reshape(joint, vec![1, 3 * d])?;
        let lin = tape.reshape(tape.matmul(joint, w)?, vec![d])?;
        tape.tanh(tape.add(lin, proj_bias)?)
    };

    let mut pairs = Vec::with_capacity(n_entities.saturating_mul(n_entities.saturating_sub(1)));
    for head in 0..n_entities {
        for tail in 0..n_entities {
            if head == tail {
                continue;
            }
            let weights = overlap_weights(tape, a_e[head], a_e[tail])?;
            let c = context_pool(tape, enc.h, weights)?;
            let z_h = project(h_e[head], c, g_e[head], head_proj)?;
            let z_t = project(h_e[tail], c, g_e[tail], tail_proj)?;
            let mut feats = Vec::with_capacity(groups);
            for g in 0..groups {
                let idxs: Vec<usize> = (g * gd..(g + 1) * gd).collect();
                let zh_g = tape.gather_rows(z_h, &idxs)?;
                let zt_g = tape.gather_rows(z_t, &idxs)?;
                let o = tape.outer(zh_g, zt_g)?;
                feats.push(tape.reshape(o, vec![gd * gd])?);
            }
            let f = tape.concat_last(&feats)?;
            let f = tape.reshape(f, vec![d * d / groups, 1])?;
            let logits = tape.reshape(tape.matmul(bilinear_w, f)?, vec![cfg.logit_len()])?;
            let logits = tape.add(logits, bilinear_b)?;
            pairs.push(PairComputation {
                head,
                tail,
                logits,
                token_weights: weights,
            });
        }
    }

    Ok(DocForward {
        encoder: enc,
        node_states,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anaphora::{extract_anaphors, AnaphorConfig};
    use crate::corpus::testutil::{doc, flat_parse};
    use crate::graph::{build_graph, GraphVariant};
    use crate::marking::mark_entities;
    use crate::vocab::TokenVocab;

    fn tiny_model() -> ModelConfig {
        let enc = EncoderConfig {
            vocab_size: 32,
            hidden: 8,
            layers: 1,
            heads: 2,
            ff_width: 16,
            max_len: 64,
            dropout: 0.0,
            attn_layers: 1,
        };
        ModelConfig {
            encoder: enc,
            relations: 3,
            gcn_layers: 2,
            gcn_iterations: 2,
            adj_heads: 2,
            bilinear_groups: 2,
            use_graph: true,
        }
    }

    fn fixture() -> (crate::corpus::Document, crate::corpus::DocParse) {
        let d = doc(
            "f1",
            &["Alpha met Beta .", "It thanked Beta ."],
            &[(0, 0, 0, 1), (1, 0, 2, 3), (1, 1, 2, 3)],
            &[(0, 1, "P1", &[0])],
        );
        let mut p = flat_parse(&d);
        p.tokens[4].pos = "PRON".to_string();
        (d, p)
    }

    fn forward_logits(cfg: &ModelConfig, variant: GraphVariant) -> Vec<Vec<f64>> {
        let (d, p) = fixture();
        let a = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let g = build_graph(&d, &a, variant, None);
        let marked = mark_entities(&d);
        let corpus = crate::corpus::Corpus { docs: vec![d.clone()] };
        let vocab = TokenVocab::build(&corpus, 1);
        let ids: Vec<usize> = marked.tokens.iter().map(|t| vocab.id(t)).collect();
        let bank = build_params(cfg, 7);
        let tape = Tape::new();
        let bound = bank.bind_frozen(&tape);
        let fwd = aa_forward(&tape, &bound, cfg, &d, &marked, &g, &ids, None).unwrap();
        fwd.pairs.iter().map(|p| tape.value(p.logits)).collect()
    }

    #[test]
    fn adjacency_is_row_stochastic_on_support_zero_elsewhere() {
        let cfg = tiny_model();
        let (d, p) = fixture();
        let a = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let g = build_graph(&d, &a, GraphVariant::Full, None);
        let bank = build_params(&cfg, 7);
        let tape = Tape::new();
        let bound = bank.bind_frozen(&tape);
        let n = g.n();
        let states = tape
            .constant((0..n * 8).map(|i| (i as f64 * 0.13).sin()).collect(), vec![n, 8])
            .unwrap();
        let adj = dynamic_adjacency(&tape, states, &g, &bound, &cfg).unwrap();
        let v = tape.value(adj);
        let support = g.support();
        for i in 0..n {
            let row_sum: f64 = v[i * n..(i + 1) * n].iter().sum();
            let has_support = support[i * n..(i + 1) * n].iter().any(|&s| s);
            if has_support {
                assert!((row_sum - 1.0).abs() < 1e-9, "row {i} sums to {row_sum}");
            } else {
                assert_eq!(row_sum, 0.0);
            }
            for j in 0..n {
                if !support[i * n + j] {
                    assert_eq!(v[i * n + j], 0.0, "off-support entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn isolated_node_gets_zero_row() {
        // single entity, single mention, no anaphors: no edges at all
        let d = doc("iso", &["Alpha rose ."], &[(0, 0, 0, 1)], &[]);
        let p = flat_parse(&d);
        let a = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let g = build_graph(&d, &a, GraphVariant::Full, None);
        assert_eq!(g.n(), 1);
        let cfg = tiny_model();
        let bank = build_params(&cfg, 7);
        let tape = Tape::new();
        let bound = bank.bind_frozen(&tape);
        let states = tape.constant(vec![0.5; 8], vec![1, 8]).unwrap();
        let adj = dynamic_adjacency(&tape, states, &g, &bound, &cfg).unwrap();
        assert_eq!(tape.value(adj), vec![0.0]);
    }

    #[test]
    fn gcn_layer_hand_oracle() {
        // 3-node chain, identity weight, zero bias:
        // out = relu(A G) + G with A averaging neighbors
        let tape = Tape::new();
        let adj = tape
            .constant(
                vec![0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0],
                vec![3, 3],
            )
            .unwrap();
        let g = tape
            .constant(vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0], vec![3, 2])
            .unwrap();
        let w = tape.constant(vec![1.0, 0.0, 0.0, 1.0], vec![2, 2]).unwrap();
        let b = tape.constant(vec![0.0, 0.0], vec![2]).unwrap();
        let out = gcn_layer(&tape, adj, g, w, b).unwrap();
        assert_eq!(tape.value(out), vec![1.0, 1.0, 1.5, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn forward_produces_ordered_pairs_with_threshold_slot() {
        let cfg = tiny_model();
        let logits = forward_logits(&cfg, GraphVariant::Full);
        // 2 entities: pairs (0,1) and (1,0)
        assert_eq!(logits.len(), 2);
        for l in &logits {
            assert_eq!(l.len(), cfg.logit_len());
            assert!(l.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn token_weights_normalize() {
        let cfg = tiny_model();
        let (d, p) = fixture();
        let a = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let g = build_graph(&d, &a, GraphVariant::Full, None);
        let marked = mark_entities(&d);
        let corpus = crate::corpus::Corpus { docs: vec![d.clone()] };
        let vocab = TokenVocab::build(&corpus, 1);
        let ids: Vec<usize> = marked.tokens.iter().map(|t| vocab.id(t)).collect();
        let bank = build_params(&cfg, 7);
        let tape = Tape::new();
        let bound = bank.bind_frozen(&tape);
        let fwd = aa_forward(&tape, &bound, &cfg, &d, &marked, &g, &ids, None).unwrap();
        for pair in &fwd.pairs {
            let q = tape.value(pair.token_weights);
            let s: f64 = q.iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "pair ({},{}) weights sum {s}", pair.head, pair.tail);
            assert!(q.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn graph_ablation_changes_scores() {
        let mut cfg = tiny_model();
        let with_graph = forward_logits(&cfg, GraphVariant::Full);
        cfg.use_graph = false;
        let without = forward_logits(&cfg, GraphVariant::Full);
        assert_ne!(with_graph, without);
    }

    #[test]
    fn config_validation_catches_bad_groups() {
        let mut cfg = tiny_model();
        cfg.bilinear_groups = 3;
        assert!(matches!(cfg.validate(), Err(ModelError::BadConfig(_))));
    }
}
