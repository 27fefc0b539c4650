//! Threshold-based prediction, evidence selection, pseudo-document
//! construction, and score fusion.
//!
//! A relation is emitted when its centered score is positive, where the
//! centered score is `sigmoid(o_r - o_th) - 0.5`. Fusion adds the centered
//! scores of the original and pseudo-document passes and subtracts a
//! blending offset tau, emitting when the sum is positive; a missing
//! pseudo score contributes zero, so tau = 0 with no pseudo pass decides
//! exactly like plain prediction.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tape;
use crate::corpus::{Corpus, DocParse, Document, Entity, Mention};
use crate::eval::{self, EvalError, TrainFactIndex, Triple};
use crate::loss::{sentence_distribution, LossError};
use crate::model::{prepare_doc, ModelConfig, ModelError, PreparedDoc};
use crate::params::ParamBank;
use crate::vocab::{RelationVocab, TokenVocab};

pub const DEFAULT_EVIDENCE_THRESHOLD: f64 = 0.2;
pub const TAU_GRID_MAX: f64 = 2.0;
pub const TAU_GRID_STEP: f64 = 0.05;

#[derive(Error, Debug)]
pub enum InferError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("predictions io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("predictions line {line} is not valid JSON: {source}")]
    BadRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad fusion config: {0}")]
    BadFusion(String),
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-relation centered score: positive iff the relation outranks the
/// threshold logit.
pub fn centered_scores(logits: &[f64]) -> Vec<f64> {
    let th = logits[logits.len() - 1];
    logits[..logits.len() - 1]
        .iter()
        .map(|&o| sigmoid(o - th) - 0.5)
        .collect()
}

#[derive(Debug, Clone)]
pub struct PairScores {
    pub head: usize,
    pub tail: usize,
    /// Centered scores, one per relation.
    pub scores: Vec<f64>,
    /// Sentence-importance distribution for this pair.
    pub sentence_dist: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DocPrediction {
    pub doc_id: String,
    pub pairs: Vec<PairScores>,
}

impl DocPrediction {
    pub fn pair(&self, head: usize, tail: usize) -> Option<&PairScores> {
        self.pairs.iter().find(|p| p.head == head && p.tail == tail)
    }
}

/// Score every ordered pair of a prepared document with frozen parameters.
pub fn score_doc(
    prepared: &PreparedDoc,
    bank: &ParamBank,
    cfg: &ModelConfig,
) -> Result<DocPrediction, InferError> {
    let tape = Tape::new();
    let bound = bank.bind_frozen(&tape);
    let fwd = prepared.forward(&tape, &bound, cfg, None)?;
    let mut pairs = Vec::with_capacity(fwd.pairs.len());
    for pair in &fwd.pairs {
        let logits = tape.value(pair.logits);
        let p = sentence_distribution(&tape, pair.token_weights, &prepared.marked.sent_spans)?;
        pairs.push(PairScores {
            head: pair.head,
            tail: pair.tail,
            scores: centered_scores(&logits),
            sentence_dist: tape.value(p),
        });
    }
    Ok(DocPrediction {
        doc_id: prepared.doc.doc_id.clone(),
        pairs,
    })
}

/// Sentences whose importance clears the threshold; falls back to the
/// single most important sentence so the set is never empty.
pub fn select_evidence(p: &[f64], threshold: f64) -> Vec<usize> {
    let picked: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= threshold).collect();
    if !picked.is_empty() {
        return picked;
    }
    let argmax = (0..p.len())
        .max_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("finite importance"))
        .unwrap_or(0);
    vec![argmax]
}

/// Blend one relation's centered scores: original plus pseudo minus tau.
pub fn fuse(primary: f64, pseudo: Option<f64>, tau: f64) -> f64 {
    primary + pseudo.unwrap_or(0.0) - tau
}

/// How the pseudo-document pass is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionMode {
    /// No pseudo pass; tau still applies.
    None,
    /// Pseudo documents scored by the same checkpoint.
    Isf,
    /// Pseudo documents scored by a companion checkpoint trained with
    /// beta = 0, so its scores carry no evidence-loss shaping.
    Iscf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub tau: f64,
    pub evidence_threshold: f64,
    /// Training run directory of the companion model; required for `Iscf`.
    pub secondary_run: Option<PathBuf>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: FusionMode::Isf,
            tau: 0.0,
            evidence_threshold: DEFAULT_EVIDENCE_THRESHOLD,
            secondary_run: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), InferError> {
        if self.mode == FusionMode::Iscf && self.secondary_run.is_none() {
            return Err(InferError::BadFusion(
                "iscf fusion needs a secondary run directory".into(),
            ));
        }
        if !self.tau.is_finite() || !self.evidence_threshold.is_finite() {
            return Err(InferError::BadFusion(
                "tau and evidence threshold must be finite".into(),
            ));
        }
        Ok(())
    }
}

// ── pseudo documents ─────────────────────────────────────────────────────────

pub struct PseudoDoc {
    pub doc: Document,
    pub parse: DocParse,
    /// Original entity id → pseudo entity id, `None` when all mentions fell
    /// outside the kept sentences.
    pub entity_map: Vec<Option<usize>>,
}

/// Restrict a document to a sentence subset, re-indexing sentences,
/// entities, and the parse sidecar. Facts are not carried over; pseudo
/// documents exist only to be scored.
pub fn pseudo_document(doc: &Document, parse: &DocParse, sentence_ids: &[usize]) -> PseudoDoc {
    let mut keep: Vec<usize> = sentence_ids.to_vec();
    keep.sort_unstable();
    keep.dedup();
    keep.retain(|&s| s < doc.sents.len());
    let new_sent: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &s)| (s, n)).collect();

    let sents: Vec<Vec<String>> = keep.iter().map(|&s| doc.sents[s].clone()).collect();

    let mut entity_map = vec![None; doc.entities.len()];
    let mut entities = Vec::new();
    for (e, ent) in doc.entities.iter().enumerate() {
        let mentions: Vec<Mention> = ent
            .mentions
            .iter()
            .filter(|m| new_sent.contains_key(&m.sent_id))
            .map(|m| Mention {
                sent_id: new_sent[&m.sent_id],
                ..m.clone()
            })
            .collect();
        if !mentions.is_empty() {
            entity_map[e] = Some(entities.len());
            entities.push(Entity { mentions });
        }
    }

    // flat token ranges of kept sentences, old coordinates
    let offsets = doc.sent_offsets();
    let mut old_to_new = vec![None; doc.total_tokens()];
    let mut cursor = 0usize;
    for &s in &keep {
        for old in offsets[s]..offsets[s + 1] {
            old_to_new[old] = Some(cursor);
            cursor += 1;
        }
    }
    let mut tokens = Vec::with_capacity(cursor);
    for &s in &keep {
        for old in offsets[s]..offsets[s + 1] {
            let mut tok = parse.tokens[old].clone();
            // heads pointing outside the kept region become roots
            tok.head = old_to_new[tok.head].unwrap_or(old_to_new[old].unwrap());
            tokens.push(tok);
        }
    }

    let suffix: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
    let doc_id = format!("{}#s{}", doc.doc_id, suffix.join("-"));
    PseudoDoc {
        doc: Document {
            doc_id: doc_id.clone(),
            sents,
            entities,
            facts: Vec::new(),
        },
        parse: DocParse { doc_id, tokens },
        entity_map,
    }
}

// ── fusion pipeline ──────────────────────────────────────────────────────────

/// Pseudo-pass scores for every pair of a primary prediction: pairs are
/// grouped by their selected evidence set, each distinct set is scored as
/// one pseudo document, and results are mapped back through the entity
/// re-indexing. Pairs that lose an entity (or the pair itself) in the
/// pseudo document are absent from the map.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_pass(
    doc: &Document,
    parse: &DocParse,
    primary: &DocPrediction,
    bank: &ParamBank,
    cfg: &ModelConfig,
    vocab: &TokenVocab,
    anaphor_cfg: crate::anaphora::AnaphorConfig,
    variant: crate::graph::GraphVariant,
    root_seed: u64,
    evidence_threshold: f64,
) -> Result<BTreeMap<(usize, usize), Vec<f64>>, InferError> {
    let mut groups: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for pair in &primary.pairs {
        let ev = select_evidence(&pair.sentence_dist, evidence_threshold);
        groups.entry(ev).or_default().push((pair.head, pair.tail));
    }
    let mut out = BTreeMap::new();
    for (ev, members) in groups {
        let pseudo = pseudo_document(doc, parse, &ev);
        if pseudo.doc.entities.len() < 2 {
            continue;
        }
        let prepared = prepare_doc(
            &pseudo.doc,
            &pseudo.parse,
            vocab,
            cfg,
            anaphor_cfg,
            variant,
            root_seed,
        )?;
        let scored = score_doc(&prepared, bank, cfg)?;
        for (h, t) in members {
            if let (Some(ph), Some(pt)) = (pseudo.entity_map[h], pseudo.entity_map[t]) {
                if let Some(ps) = scored.pair(ph, pt) {
                    out.insert((h, t), ps.scores.clone());
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictionRecord {
    pub title: String,
    pub h_idx: usize,
    pub t_idx: usize,
    pub r: String,
    pub score: f64,
    pub evidence: Vec<usize>,
}

impl PredictionRecord {
    pub fn triple(&self) -> Triple {
        Triple {
            doc_id: self.title.clone(),
            head: self.h_idx,
            tail: self.t_idx,
            relation: self.r.clone(),
        }
    }
}

/// Emit triples from a scored document, fusing with pseudo scores when
/// given. `pseudo = None` with `tau = 0` is plain prediction.
pub fn emit_records(
    primary: &DocPrediction,
    pseudo: Option<&BTreeMap<(usize, usize), Vec<f64>>>,
    tau: f64,
    relations: &RelationVocab,
    evidence_threshold: f64,
) -> Vec<PredictionRecord> {
    let mut records = Vec::new();
    for pair in &primary.pairs {
        let pseudo_scores = pseudo.and_then(|m| m.get(&(pair.head, pair.tail)));
        let evidence = select_evidence(&pair.sentence_dist, evidence_threshold);
        for r in 0..relations.len() {
            let fused = fuse(pair.scores[r], pseudo_scores.map(|s| s[r]), tau);
            if fused > 0.0 {
                records.push(PredictionRecord {
                    title: primary.doc_id.clone(),
                    h_idx: pair.head,
                    t_idx: pair.tail,
                    r: relations.name(r).to_string(),
                    score: fused,
                    evidence: evidence.clone(),
                });
            }
        }
    }
    records
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), InferError> {
    let io = |source| InferError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for rec in records {
        let line = serde_json::to_string(rec).expect("record serializes");
        writeln!(f, "{line}").map_err(|e| InferError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    f.flush().map_err(|e| InferError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, InferError> {
    let text = std::fs::read_to_string(path).map_err(|source| InferError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|source| InferError::BadRecord {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Grid-search the blending offset on precomputed scores; ties take the
/// smallest value.
pub fn tune_tau(
    corpus: &Corpus,
    scored: &[(DocPrediction, BTreeMap<(usize, usize), Vec<f64>>)],
    relations: &RelationVocab,
    grid: &[f64],
    train: Option<&TrainFactIndex>,
    evidence_threshold: f64,
) -> Result<(f64, f64), InferError> {
    assert!(!grid.is_empty(), "tau grid must be nonempty");
    let mut best: Option<(f64, f64)> = None;
    for &tau in grid {
        let mut triples = Vec::new();
        for (primary, pseudo) in scored {
            for rec in emit_records(primary, Some(pseudo), tau, relations, evidence_threshold) {
                triples.push(rec.triple());
            }
        }
        let report = eval::evaluate(corpus, &triples, train)?;
        let f1 = report.overall.f1;
        let better = match best {
            None => true,
            Some((bt, bf)) => f1 > bf || (f1 == bf && tau < bt),
        };
        if better {
            best = Some((tau, f1));
        }
    }
    Ok(best.expect("nonempty grid"))
}

pub fn default_tau_grid() -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let tau = i as f64 * TAU_GRID_STEP;
        if tau > TAU_GRID_MAX + 1e-12 {
            break;
        }
        grid.push(tau);
        i += 1;
    }
    grid
}
