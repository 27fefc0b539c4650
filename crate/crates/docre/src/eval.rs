//! Micro-averaged metrics over predicted relation triples, with the three
//! standard slices: ignoring triples already seen as training facts
//! (matched by any head/tail mention-name combination), and splitting by
//! whether some single sentence mentions both entities (intra) or not
//! (inter).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("prediction references unknown document {0:?}")]
    UnknownDoc(String),
    #[error("prediction references entity {entity} outside document {doc:?} with {entities} entities")]
    BadEntity {
        doc: String,
        entity: usize,
        entities: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub doc_id: String,
    pub head: usize,
    pub tail: usize,
    pub relation: String,
}

/// (head name, tail name, relation) combinations seen as training facts.
#[derive(Debug, Default)]
pub struct TrainFactIndex {
    set: BTreeSet<(String, String, String)>,
}

impl TrainFactIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut set = BTreeSet::new();
        for doc in &corpus.docs {
            for fact in &doc.facts {
                for hm in &doc.entities[fact.head].mentions {
                    for tm in &doc.entities[fact.tail].mentions {
                        set.insert((hm.name.clone(), tm.name.clone(), fact.relation.clone()));
                    }
                }
            }
        }
        TrainFactIndex { set }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Any-mention matching: true if some name pair of the two entities
    /// occurred with this relation in training.
    pub fn contains(&self, doc: &Document, head: usize, tail: usize, relation: &str) -> bool {
        doc.entities[head].mentions.iter().any(|hm| {
            doc.entities[tail].mentions.iter().any(|tm| {
                self.set
                    .contains(&(hm.name.clone(), tm.name.clone(), relation.to_string()))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl PrfMetrics {
    fn from_counts(predicted: usize, gold: usize, correct: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfMetrics {
            precision,
            recall,
            f1,
            predicted,
            gold,
            correct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: PrfMetrics,
    pub ign: PrfMetrics,
    pub intra: PrfMetrics,
    pub inter: PrfMetrics,
}

impl EvalReport {
    /// Flat report with the conventional field names.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "F1": self.overall.f1,
            "Ign_F1": self.ign.f1,
            "Intra_F1": self.intra.f1,
            "Inter_F1": self.inter.f1,
            "P": self.overall.precision,
            "R": self.overall.recall,
            "n_pred": self.overall.predicted,
            "n_gold": self.overall.gold,
        })
    }
}

fn prf_over(preds: &BTreeSet<Triple>, gold: &BTreeSet<Triple>) -> PrfMetrics {
    let correct = preds.intersection(gold).count();
    PrfMetrics::from_counts(preds.len(), gold.len(), correct)
}

/// True if some sentence holds a mention of both entities.
pub fn is_intra(doc: &Document, head: usize, tail: usize) -> bool {
    let sents: BTreeSet<usize> = doc.entities[head].mentions.iter().map(|m| m.sent_id).collect();
    doc.entities[tail].mentions.iter().any(|m| sents.contains(&m.sent_id))
}

/// Score predictions against the corpus's gold facts.
pub fn evaluate(
    corpus: &Corpus,
    preds: &[Triple],
    train: Option<&TrainFactIndex>,
) -> Result<EvalReport, EvalError> {
    let by_id: BTreeMap<&str, &Document> =
        corpus.docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut pred_set = BTreeSet::new();
    for t in preds {
        let doc = by_id
            .get(t.doc_id.as_str())
            .ok_or_else(|| EvalError::UnknownDoc(t.doc_id.clone()))?;
        for e in [t.head, t.tail] {
            if e >= doc.entities.len() {
                return Err(EvalError::BadEntity {
                    doc: t.doc_id.clone(),
                    entity: e,
                    entities: doc.entities.len(),
                });
            }
        }
        pred_set.insert(t.clone());
    }
    let mut gold_set = BTreeSet::new();
    for doc in &corpus.docs {
        for fact in &doc.facts {
            gold_set.insert(Triple {
                doc_id: doc.doc_id.clone(),
                head: fact.head,
                tail: fact.tail,
                relation: fact.relation.clone(),
            });
        }
    }

    let overall = prf_over(&pred_set, &gold_set);

    let seen = |t: &Triple| -> bool {
        match train {
            Some(idx) => idx.contains(by_id[t.doc_id.as_str()], t.head, t.tail, &t.relation),
            None => false,
        }
    };
    let ign_preds: BTreeSet<Triple> = pred_set.iter().filter(|t| !seen(t)).cloned().collect();
    let ign_gold: BTreeSet<Triple> = gold_set.iter().filter(|t| !seen(t)).cloned().collect();
    let ign = prf_over(&ign_preds, &ign_gold);

    let intra_of = |t: &Triple| is_intra(by_id[t.doc_id.as_str()], t.head, t.tail);
    let split = |set: &BTreeSet<Triple>| -> (BTreeSet<Triple>, BTreeSet<Triple>) {
        let (a, b): (Vec<Triple>, Vec<Triple>) = set.iter().cloned().partition(|t| intra_of(t));
        (a.into_iter().collect(), b.into_iter().collect())
    };
    let (pred_intra, pred_inter) = split(&pred_set);
    let (gold_intra, gold_inter) = split(&gold_set);
    let intra = prf_over(&pred_intra, &gold_intra);
    let inter = prf_over(&pred_inter, &gold_inter);

    Ok(EvalReport {
        overall,
        ign,
        intra,
        inter,
    })
}
