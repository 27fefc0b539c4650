//! The gradient acceptance suite: every tape operator against central
//! finite differences, plus the complete forward pass (encoder, graph,
//! pair scorer, both loss terms) on a fixed two-document batch.
//!
//! The end-to-end check perturbs randomly sampled parameter coordinates;
//! op checks cover each operator's full input space. Dropout is disabled
//! so the loss is a deterministic function of the parameters.

use rand::Rng;
use thiserror::Error;

use crate::autodiff::check::{run_op_checks, DEFAULT_STEP, DEFAULT_TOL};
use crate::autodiff::{Tape, TensorError};
use crate::corpus::{Corpus, DocParse, Document, Entity, Fact, Mention, TokenParse};
use crate::encoder::EncoderConfig;
use crate::graph::GraphVariant;
use crate::loss::{doc_loss, LossError};
use crate::model::{build_params, prepare_doc, ModelConfig, ModelError, PreparedDoc};
use crate::params::ParamBank;
use crate::seeding::stream;
use crate::vocab::{RelationVocab, TokenVocab};

pub const E2E_COORDS_PER_SEED: usize = 40;

#[derive(Error, Debug)]
pub enum SuiteError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub max_rel_err: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_err < DEFAULT_TOL
    }
}

fn toy_doc(id: &str, sents: &[&[&str]], mentions: &[(usize, usize, usize)], facts: &[(usize, usize, &str, usize)]) -> Document {
    let sents: Vec<Vec<String>> = sents
        .iter()
        .map(|s| s.iter().map(|t| t.to_string()).collect())
        .collect();
    let n = mentions.iter().map(|m| m.0 + 1).max().unwrap_or(0);
    let mut entities = vec![Entity { mentions: vec![] }; n];
    for &(e, sent_id, start) in mentions {
        entities[e].mentions.push(Mention {
            name: sents[sent_id][start].clone(),
            sent_id,
            start,
            end: start + 1,
            etype: "ENT".to_string(),
        });
    }
    let facts = facts
        .iter()
        .map(|&(h, t, r, ev)| Fact {
            head: h,
            tail: t,
            relation: r.to_string(),
            evidence: vec![ev],
        })
        .collect();
    Document {
        doc_id: id.to_string(),
        sents,
        entities,
        facts,
    }
}

fn toy_parse(doc: &Document, pron_at: &[usize], det_at: &[usize]) -> DocParse {
    let mut tokens: Vec<TokenParse> = doc
        .flat_tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| TokenParse {
            pos: "NOUN".to_string(),
            dep: "dep".to_string(),
            head: i,
            lower: t.to_lowercase(),
        })
        .collect();
    for &i in pron_at {
        tokens[i].pos = "PRON".into();
    }
    for &i in det_at {
        tokens[i].dep = "det".into();
        tokens[i].head = i + 1;
    }
    DocParse {
        doc_id: doc.doc_id.clone(),
        tokens,
    }
}

/// The fixed two-document batch: one pronoun anaphor, one definite
/// anaphor, facts with evidence so both loss terms contribute.
fn toy_batch() -> (Corpus, Vec<DocParse>) {
    let a = toy_doc(
        "ga",
        &[&["riva", "leads", "board", "."], &["it", "shows", "growth", "."]],
        &[(0, 0, 0), (1, 0, 2)],
        &[(0, 1, "leads", 0)],
    );
    let b = toy_doc(
        "gb",
        &[&["board", "cites", "riva", "."], &["the", "fund", "rose", "."]],
        &[(0, 0, 0), (1, 0, 2)],
        &[(0, 1, "cites", 0), (1, 0, "leads", 0)],
    );
    let pa = toy_parse(&a, &[4], &[]);
    let pb = toy_parse(&b, &[], &[4]);
    (Corpus { docs: vec![a, b] }, vec![pa, pb])
}

fn toy_model(vocab: usize, relations: usize) -> ModelConfig {
    let enc = EncoderConfig {
        vocab_size: vocab,
        hidden: 8,
        layers: 1,
        heads: 2,
        ff_width: 16,
        max_len: 32,
        dropout: 0.0,
        attn_layers: 1,
    };
    let mut cfg = ModelConfig::with_encoder(enc, relations);
    cfg.gcn_layers = 1;
    cfg.gcn_iterations = 1;
    cfg.adj_heads = 1;
    cfg.bilinear_groups = 2;
    cfg
}

const E2E_BETA: f64 = 0.1;

fn batch_loss(
    prepared: &[PreparedDoc],
    bank: &ParamBank,
    cfg: &ModelConfig,
    relations: &RelationVocab,
) -> Result<f64, SuiteError> {
    let mut total = 0.0;
    for p in prepared {
        let tape = Tape::new();
        let bound = bank.bind_frozen(&tape);
        let fwd = p.forward(&tape, &bound, cfg, None)?;
        let dl = doc_loss(&tape, &fwd, &p.doc, &p.marked.sent_spans, relations, E2E_BETA)?;
        total += tape.value_scalar(dl.total);
    }
    Ok(total / prepared.len() as f64)
}

/// Analytic batch gradient vs central differences at `n_coords` sampled
/// parameter coordinates. Returns the worst relative error.
pub fn end_to_end_check(seed: u64, n_coords: usize) -> Result<f64, SuiteError> {
    let (corpus, parses) = toy_batch();
    let vocab = TokenVocab::build(&corpus, 1);
    let relations = RelationVocab::build(&corpus);
    let cfg = toy_model(vocab.len(), relations.len());
    let mut bank = build_params(&cfg, seed);

    let prepared: Vec<PreparedDoc> = corpus
        .docs
        .iter()
        .zip(&parses)
        .map(|(d, p)| {
            prepare_doc(
                d,
                p,
                &vocab,
                &cfg,
                crate::anaphora::AnaphorConfig::default(),
                GraphVariant::Full,
                seed,
            )
        })
        .collect::<Result<_, _>>()?;

    // analytic pass: both documents on one tape, mean loss
    let tape = Tape::new();
    let bound = bank.bind(&tape);
    let mut parts = Vec::new();
    for p in &prepared {
        let fwd = p.forward(&tape, &bound, &cfg, None)?;
        let dl = doc_loss(&tape, &fwd, &p.doc, &p.marked.sent_spans, &relations, E2E_BETA)?;
        parts.push(dl.total);
    }
    let sum = tape.add(parts[0], parts[1])?;
    let mean = tape.scale(sum, 0.5)?;
    tape.backward(mean)?;
    let grads = bound.grads(&tape, &bank);

    // coordinate sample over the whole bank
    let names: Vec<String> = bank.iter().map(|(n, _)| n.clone()).collect();
    let sizes: Vec<usize> = names.iter().map(|n| bank.get(n).values.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = stream(seed, "gradsuite.coords");
    let mut worst = 0.0f64;
    for _ in 0..n_coords {
        let mut flat = rng.gen_range(0..total);
        let mut which = 0;
        while flat >= sizes[which] {
            flat -= sizes[which];
            which += 1;
        }
        let name = &names[which];
        let orig = bank.get(name).values[flat];
        bank.get_mut(name).values[flat] = orig + DEFAULT_STEP;
        let up = batch_loss(&prepared, &bank, &cfg, &relations)?;
        bank.get_mut(name).values[flat] = orig - DEFAULT_STEP;
        let down = batch_loss(&prepared, &bank, &cfg, &relations)?;
        bank.get_mut(name).values[flat] = orig;
        let numeric = (up - down) / (2.0 * DEFAULT_STEP);
        let analytic = grads.get(name)[flat];
        let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-4);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Full suite: one entry per operator (worst error across seeds), then one
/// end-to-end entry.
pub fn run_suite(seeds: &[u64], coords_per_seed: usize) -> Result<Vec<SuiteEntry>, SuiteError> {
    let mut entries: Vec<SuiteEntry> = run_op_checks(seeds)?
        .into_iter()
        .map(|(name, max_rel_err)| SuiteEntry { name, max_rel_err })
        .collect();
    let mut worst = 0.0f64;
    for &seed in seeds {
        worst = worst.max(end_to_end_check(seed, coords_per_seed)?);
    }
    entries.push(SuiteEntry {
        name: "end-to-end".into(),
        max_rel_err: worst,
    });
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_to_end_matches_finite_differences() {
        let worst = end_to_end_check(5, 25).unwrap();
        assert!(worst < DEFAULT_TOL, "worst rel err {worst:.3e}");
    }

    #[test]
    fn suite_reports_every_operator_and_the_model() {
        let entries = run_suite(&[3], 10).unwrap();
        assert!(entries.len() > 10);
        assert_eq!(entries.last().unwrap().name, "end-to-end");
        for e in &entries {
            assert!(e.passed(), "{}: {:.3e}", e.name, e.max_rel_err);
        }
    }
}
