//! Document model and corpus I/O.
//!
//! Corpora are JSON arrays of documents in the DocRED shape (`sents`,
//! `vertexSet`, `labels`, `title`). Syntactic parses arrive separately as a
//! line-delimited JSON sidecar, one record per document, aligned to the
//! flattened token sequence. Loading validates every index before anything
//! downstream touches the data; validation failures name the document and
//! the offending field.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {doc}: {message}")]
    Invalid { doc: String, message: String },
    #[error("parse sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
}

// ── in-memory model ──────────────────────────────────────────────────────────

/// One entity mention: a token span inside a single sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub name: String,
    pub sent_id: usize,
    /// Token span within the sentence, half-open.
    pub start: usize,
    pub end: usize,
    pub etype: String,
}

/// An entity is its set of mentions; the index into `Document::entities` is
/// the entity id used by facts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub mentions: Vec<Mention>,
}

/// A labeled relation instance with its evidence sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub head: usize,
    pub tail: usize,
    pub relation: String,
    pub evidence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub sents: Vec<Vec<String>>,
    pub entities: Vec<Entity>,
    pub facts: Vec<Fact>,
}

impl Document {
    pub fn total_tokens(&self) -> usize {
        self.sents.iter().map(|s| s.len()).sum()
    }

    /// Flat index of the first token of each sentence, plus a final bound.
    pub fn sent_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.sents.len() + 1);
        let mut acc = 0;
        for s in &self.sents {
            offs.push(acc);
            acc += s.len();
        }
        offs.push(acc);
        offs
    }

    pub fn flat_tokens(&self) -> Vec<&str> {
        self.sents
            .iter()
            .flat_map(|s| s.iter().map(|t| t.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub docs: Vec<Document>,
}

// ── raw schema ───────────────────────────────────────────────────────────────

#[derive(Deserialize, Serialize)]
struct RawMention {
    name: String,
    sent_id: usize,
    pos: [usize; 2],
    #[serde(rename = "type", default)]
    mtype: String,
}

#[derive(Deserialize, Serialize)]
struct RawLabel {
    h: usize,
    t: usize,
    r: String,
    #[serde(default)]
    evidence: Vec<usize>,
}

#[derive(Deserialize, Serialize)]
struct RawDoc {
    title: String,
    sents: Vec<Vec<String>>,
    #[serde(rename = "vertexSet")]
    vertex_set: Vec<Vec<RawMention>>,
    #[serde(default)]
    labels: Vec<RawLabel>,
}

// ── load / save ──────────────────────────────────────────────────────────────

fn invalid(doc: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Invalid {
        doc: doc.to_string(),
        message: message.into(),
    }
}

fn convert_doc(raw: RawDoc) -> Result<Document, CorpusError> {
    let id = raw.title;
    if raw.sents.is_empty() {
        return Err(invalid(&id, "no sentences"));
    }
    if let Some(i) = raw.sents.iter().position(|s| s.is_empty()) {
        return Err(invalid(&id, format!("sentence {i} is empty")));
    }
    let n_sents = raw.sents.len();
    let mut entities = Vec::with_capacity(raw.vertex_set.len());
    for (e_idx, raw_mentions) in raw.vertex_set.into_iter().enumerate() {
        if raw_mentions.is_empty() {
            return Err(invalid(&id, format!("entity {e_idx} has no mentions")));
        }
        let mut mentions = Vec::with_capacity(raw_mentions.len());
        for (m_idx, m) in raw_mentions.into_iter().enumerate() {
            if m.sent_id >= n_sents {
                return Err(invalid(
                    &id,
                    format!("entity {e_idx} mention {m_idx}: sent_id {} out of range", m.sent_id),
                ));
            }
            let sent_len = raw.sents[m.sent_id].len();
            let [start, end] = m.pos;
            if start >= end || end > sent_len {
                return Err(invalid(
                    &id,
                    format!(
                        "entity {e_idx} mention {m_idx}: span [{start},{end}) invalid for sentence of {sent_len} tokens"
                    ),
                ));
            }
            mentions.push(Mention {
                name: m.name,
                sent_id: m.sent_id,
                start,
                end,
                etype: m.mtype,
            });
        }
        entities.push(Entity { mentions });
    }
    let n_entities = entities.len();
    let mut facts = Vec::with_capacity(raw.labels.len());
    for (f_idx, l) in raw.labels.into_iter().enumerate() {
        if l.h >= n_entities || l.t >= n_entities {
            return Err(invalid(
                &id,
                format!("label {f_idx}: entity index out of range (h={}, t={}, entities={n_entities})", l.h, l.t),
            ));
        }
        if l.h == l.t {
            return Err(invalid(&id, format!("label {f_idx}: head equals tail ({})", l.h)));
        }
        for &ev in &l.evidence {
            if ev >= n_sents {
                return Err(invalid(
                    &id,
                    format!("label {f_idx}: evidence sentence {ev} out of range"),
                ));
            }
        }
        facts.push(Fact {
            head: l.h,
            tail: l.t,
            relation: l.r,
            evidence: l.evidence,
        });
    }
    Ok(Document {
        doc_id: id,
        sents: raw.sents,
        entities,
        facts,
    })
}

fn to_raw(doc: &Document) -> RawDoc {
    RawDoc {
        title: doc.doc_id.clone(),
        sents: doc.sents.clone(),
        vertex_set: doc
            .entities
            .iter()
            .map(|e| {
                e.mentions
                    .iter()
                    .map(|m| RawMention {
                        name: m.name.clone(),
                        sent_id: m.sent_id,
                        pos: [m.start, m.end],
                        mtype: m.etype.clone(),
                    })
                    .collect()
            })
            .collect(),
        labels: doc
            .facts
            .iter()
            .map(|f| RawLabel {
                h: f.head,
                t: f.tail,
                r: f.relation.clone(),
                evidence: f.evidence.clone(),
            })
            .collect(),
    }
}

/// Load and validate a corpus file. Duplicate document ids are an error:
/// the id is the join key for parses, predictions, and metrics.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus_str(&text, &path.display().to_string())
}

pub fn parse_corpus_str(text: &str, origin: &str) -> Result<Corpus, CorpusError> {
    let raw: Vec<RawDoc> = serde_json::from_str(text).map_err(|source| CorpusError::Json {
        path: origin.to_string(),
        source,
    })?;
    let mut docs = Vec::with_capacity(raw.len());
    let mut seen = BTreeMap::new();
    for r in raw {
        let doc = convert_doc(r)?;
        if seen.insert(doc.doc_id.clone(), ()).is_some() {
            return Err(invalid(&doc.doc_id, "duplicate document id"));
        }
        docs.push(doc);
    }
    Ok(Corpus { docs })
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let raw: Vec<RawDoc> = corpus.docs.iter().map(to_raw).collect();
    let text = serde_json::to_string_pretty(&raw).expect("corpus serialization");
    std::fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ── parse sidecar ────────────────────────────────────────────────────────────

/// Per-token syntactic annotation, aligned to the flattened token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenParse {
    pub pos: String,
    pub dep: String,
    /// Flat index of the syntactic head; a root points at itself.
    pub head: usize,
    pub lower: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocParse {
    pub doc_id: String,
    pub tokens: Vec<TokenParse>,
}

/// Parses keyed by document id; iteration order is the sorted id order.
#[derive(Debug, Clone, Default)]
pub struct ParseSet {
    pub by_doc: BTreeMap<String, DocParse>,
}

impl ParseSet {
    pub fn get(&self, doc_id: &str) -> Option<&DocParse> {
        self.by_doc.get(doc_id)
    }

    pub fn insert(&mut self, parse: DocParse) {
        self.by_doc.insert(parse.doc_id.clone(), parse);
    }

    /// Require a parse for the document (anaphor extraction cannot proceed
    /// without one).
    pub fn require(&self, doc_id: &str) -> Result<&DocParse, CorpusError> {
        self.by_doc.get(doc_id).ok_or_else(|| CorpusError::Invalid {
            doc: doc_id.to_string(),
            message: "no parse record in sidecar".to_string(),
        })
    }
}

pub fn load_parses(path: &Path) -> Result<ParseSet, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut set = ParseSet::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DocParse = serde_json::from_str(&line).map_err(|source| CorpusError::Sidecar {
            path: path.display().to_string(),
            message: format!("line {}: {source}", lineno + 1),
        })?;
        if set.by_doc.insert(parsed.doc_id.clone(), parsed).is_some() {
            return Err(CorpusError::Sidecar {
                path: path.display().to_string(),
                message: format!("line {}: duplicate doc_id", lineno + 1),
            });
        }
    }
    Ok(set)
}

pub fn save_parses(set: &ParseSet, path: &Path) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for parse in set.by_doc.values() {
        serde_json::to_writer(&mut out, parse).expect("parse serialization");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Check that every document has a parse of the right length with in-bounds
/// heads. Documents missing from the sidecar are only an error when listed
/// in `corpus`; extra parses are ignored.
pub fn validate_parses(corpus: &Corpus, parses: &ParseSet) -> Result<(), CorpusError> {
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id)?;
        let expected = doc.total_tokens();
        if parse.tokens.len() != expected {
            return Err(invalid(
                &doc.doc_id,
                format!(
                    "parse has {} tokens, document has {expected}",
                    parse.tokens.len()
                ),
            ));
        }
        for (i, tok) in parse.tokens.iter().enumerate() {
            if tok.head >= expected {
                return Err(invalid(
                    &doc.doc_id,
                    format!("token {i}: head {} out of range ({expected} tokens)", tok.head),
                ));
            }
        }
    }
    Ok(())
}
