//! Document graph construction.
//!
//! Nodes are entity mentions (in entity, then mention order) followed by
//! anaphors (in extraction order). Three undirected edge types with
//! pairwise-disjoint supports and an empty diagonal:
//! mention-anaphor (complete bipartite), coreference (a clique per entity's
//! mentions), and inter-entity (every cross-entity mention pair). Directed
//! edge counts follow closed forms from the node counts alone, which the
//! tests pin against brute-force enumeration.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::anaphora::{Anaphor, AnaphorKind, AnaphorSet};
use crate::corpus::Document;

pub const EDGE_MENTION_ANAPHOR: usize = 0;
pub const EDGE_COREF: usize = 1;
pub const EDGE_INTER_ENTITY: usize = 2;
pub const EDGE_TYPES: usize = 3;

pub const EDGE_NAMES: [&str; EDGE_TYPES] = ["mention-anaphor", "coreference", "inter-entity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Mention node: `(entity index, mention index)`.
    Mention { entity: usize, mention: usize },
    /// Anaphor node: index into the anaphor list the graph was built from.
    Anaphor { index: usize },
}

/// Graph ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphVariant {
    /// Mentions plus extracted anaphors.
    Full,
    /// Mentions only; no anaphor nodes, no mention-anaphor edges.
    NoAnaphor,
    /// Anaphors replaced by the same number of random one-token spans.
    RandomReplace,
}

#[derive(Debug, Clone)]
pub struct DocGraph {
    pub nodes: Vec<NodeKind>,
    /// The anaphors the nodes refer to (original or randomly replaced).
    pub anaphors: Vec<Anaphor>,
    /// Flattened `n x n` boolean adjacency per edge type.
    pub adj: [Vec<bool>; EDGE_TYPES],
}

impl DocGraph {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, ty: usize, i: usize, j: usize) -> bool {
        self.adj[ty][i * self.nodes.len() + j]
    }

    /// Directed edge count (both orientations) per type.
    pub fn edge_counts(&self) -> [usize; EDGE_TYPES] {
        let mut counts = [0; EDGE_TYPES];
        for (t, a) in self.adj.iter().enumerate() {
            counts[t] = a.iter().filter(|&&b| b).count();
        }
        counts
    }

    /// Union support: true where any edge type connects i and j.
    pub fn support(&self) -> Vec<bool> {
        let n = self.nodes.len();
        let mut s = vec![false; n * n];
        for a in &self.adj {
            for (si, &ai) in s.iter_mut().zip(a.iter()) {
                *si = *si || ai;
            }
        }
        s
    }
}

/// Build the document graph for a doc whose anaphors were already extracted.
/// `RandomReplace` draws replacement one-token spans from `rng`, which must
/// come from a per-document seed stream.
pub fn build_graph(
    doc: &Document,
    anaphors: &AnaphorSet,
    variant: GraphVariant,
    rng: Option<&mut ChaCha20Rng>,
) -> DocGraph {
    let effective: Vec<Anaphor> = match variant {
        GraphVariant::Full => anaphors.anaphors.clone(),
        GraphVariant::NoAnaphor => Vec::new(),
        GraphVariant::RandomReplace => {
            let rng = rng.expect("RandomReplace requires an rng");
            random_spans(doc, anaphors.anaphors.len(), rng)
        }
    };

    let mut nodes = Vec::new();
    for (e, ent) in doc.entities.iter().enumerate() {
        for m in 0..ent.mentions.len() {
            nodes.push(NodeKind::Mention { entity: e, mention: m });
        }
    }
    let first_anaphor = nodes.len();
    for i in 0..effective.len() {
        nodes.push(NodeKind::Anaphor { index: i });
    }

    let n = nodes.len();
    let mut adj = [vec![false; n * n], vec![false; n * n], vec![false; n * n]];
    let connect = |ty: usize, adj: &mut [Vec<bool>; EDGE_TYPES], i: usize, j: usize| {
        adj[ty][i * n + j] = true;
        adj[ty][j * n + i] = true;
    };

    for i in 0..first_anaphor {
        let NodeKind::Mention { entity: ei, .. } = nodes[i] else {
            unreachable!()
        };
        // mention-anaphor: complete bipartite
        for j in first_anaphor..n {
            connect(EDGE_MENTION_ANAPHOR, &mut adj, i, j);
        }
        for (j, node) in nodes.iter().enumerate().take(first_anaphor).skip(i + 1) {
            let NodeKind::Mention { entity: ej, .. } = node else {
                unreachable!()
            };
            if ei == *ej {
                connect(EDGE_COREF, &mut adj, i, j);
            } else {
                connect(EDGE_INTER_ENTITY, &mut adj, i, j);
            }
        }
    }

    DocGraph {
        nodes,
        anaphors: effective,
        adj,
    }
}

/// Distinct random one-token spans, at most one per token position.
fn random_spans(doc: &Document, count: usize, rng: &mut ChaCha20Rng) -> Vec<Anaphor> {
    let offsets = doc.sent_offsets();
    let total = doc.total_tokens();
    let mut positions: Vec<usize> = (0..total).collect();
    positions.shuffle(rng);
    positions.truncate(count.min(total));
    positions.sort_unstable();
    positions
        .into_iter()
        .map(|flat| {
            let sent_id = offsets[..offsets.len() - 1]
                .iter()
                .rposition(|&o| o <= flat)
                .expect("offset table covers all tokens");
            let local = flat - offsets[sent_id];
            Anaphor {
                sent_id,
                start: local,
                end: local + 1,
                surface: doc.sents[sent_id][local].clone(),
                kind: AnaphorKind::Pronoun,
            }
        })
        .collect()
}

// ── JSON dump ────────────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
pub struct GraphDump {
    pub doc_id: String,
    pub nodes: Vec<NodeKind>,
    pub anaphors: Vec<Anaphor>,
    /// Undirected edges as `i < j` pairs, per type name.
    pub edges: Vec<(String, Vec<(usize, usize)>)>,
}

pub fn dump_graph(doc: &Document, graph: &DocGraph) -> GraphDump {
    let n = graph.n();
    let edges = (0..EDGE_TYPES)
        .map(|t| {
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if graph.adj[t][i * n + j] {
                        pairs.push((i, j));
                    }
                }
            }
            (EDGE_NAMES[t].to_string(), pairs)
        })
        .collect();
    GraphDump {
        doc_id: doc.doc_id.clone(),
        nodes: graph.nodes.clone(),
        anaphors: graph.anaphors.clone(),
        edges,
    }
}

/// Closed-form directed edge counts from node statistics:
/// mentions-anaphor `2·m·a`, coreference `2·Σ C(|M_e|,2)`, inter-entity
/// `2·(C(m,2) − Σ C(|M_e|,2))`.
pub fn expected_edge_counts(mentions_per_entity: &[usize], n_anaphors: usize) -> [usize; EDGE_TYPES] {
    let m: usize = mentions_per_entity.iter().sum();
    let choose2 = |x: usize| x * x.saturating_sub(1) / 2;
    let coref: usize = mentions_per_entity.iter().map(|&k| choose2(k)).sum();
    [
        2 * m * n_anaphors,
        2 * coref,
        2 * (choose2(m) - coref),
    ]
}
