//! The optimization loop: shuffled mini-batches, per-document gradients
//! computed on independent tapes in parallel, sequential in-order
//! reduction (bitwise deterministic), global-norm clipping, scheduled
//! AdamW steps, line-JSON logging, and best-dev checkpoint retention.
//!
//! All randomness derives from the root seed through named streams
//! (`shuffle.epoch{e}`, `dropout.doc{id}.epoch{e}`), so two runs with the
//! same config produce byte-identical checkpoints and logs.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anaphora::AnaphorConfig;
use crate::autodiff::{Tape, TensorError};
use crate::checkpoint::{header_for, save_checkpoint, CheckpointError};
use crate::corpus::{Corpus, CorpusError, ParseSet};
use crate::eval::{evaluate, EvalError, Triple};
use crate::graph::GraphVariant;
use crate::infer::{emit_records, score_doc, InferError};
use crate::loss::{doc_loss, LossError};
use crate::model::{build_params, prepare_doc, ModelConfig, ModelError, PreparedDoc};
use crate::optim::{AdamW, OptimConfig, OptimError};
use crate::params::{GradBank, ParamBank};
use crate::seeding::stream;
use crate::vocab::{RelationVocab, TokenVocab};

pub const LOG_FILE: &str = "train.log.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const TOKEN_VOCAB_FILE: &str = "vocab.json";
pub const RELATION_VOCAB_FILE: &str = "relations.json";
pub const CHECKPOINT_FINAL: &str = "checkpoint-final.bin";
pub const CHECKPOINT_BEST: &str = "checkpoint-best.bin";

#[derive(Error, Debug)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("training io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(
        "training diverged at epoch {epoch} step {step}: L_re={l_re}, L_evi={l_evi}; \
         lower the learning rates or raise the clip threshold"
    )]
    Diverged {
        epoch: usize,
        step: usize,
        l_re: f64,
        l_evi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `encoder.vocab_size` is overwritten with the built vocabulary size.
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_classifier: f64,
    pub warmup_ratio: f64,
    pub beta: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub min_count: usize,
    pub graph_variant: GraphVariant,
    pub anaphors: AnaphorConfig,
}

impl TrainConfig {
    pub fn with_model(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            epochs: 30,
            batch_size: 4,
            lr_encoder: 5e-5,
            lr_classifier: 1e-4,
            warmup_ratio: 0.06,
            beta: 0.1,
            weight_decay: 0.0,
            clip_norm: 1.0,
            seed: 13,
            min_count: 1,
            graph_variant: GraphVariant::Full,
            anaphors: AnaphorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::BadConfig(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup_ratio {} must lie in [0,1)", self.warmup_ratio));
        }
        if self.lr_encoder < 0.0 || self.lr_classifier < 0.0 {
            return bad("learning rates must be nonnegative".into());
        }
        if self.beta < 0.0 {
            return bad("beta must be nonnegative".into());
        }
        if self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive".into());
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1".into());
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: usize,
    pub l_re: f64,
    pub l_evi: f64,
    pub l_total: f64,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_f1: Option<f64>,
}

pub struct TrainOutcome {
    pub steps: usize,
    pub final_train_loss: f64,
    pub best_dev_f1: Option<f64>,
    pub checkpoint_final: PathBuf,
    pub checkpoint_best: Option<PathBuf>,
    pub token_vocab: TokenVocab,
    pub relation_vocab: RelationVocab,
    pub model: ModelConfig,
    /// Mean total loss per epoch, for convergence checks.
    pub epoch_losses: Vec<f64>,
}

pub struct TrainInputs<'a> {
    pub train: &'a Corpus,
    pub train_parses: &'a ParseSet,
    pub dev: Option<(&'a Corpus, &'a ParseSet)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn prepare_all(
    corpus: &Corpus,
    parses: &ParseSet,
    vocab: &TokenVocab,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<Vec<PreparedDoc>, TrainError> {
    corpus
        .docs
        .iter()
        .map(|doc| {
            let parse = parses.require(&doc.doc_id)?;
            Ok(prepare_doc(
                doc,
                parse,
                vocab,
                model,
                cfg.anaphors,
                cfg.graph_variant,
                cfg.seed,
            )?)
        })
        .collect()
}

/// Predict with the current parameters and score against the corpus's own
/// facts (no fusion, no train-fact exclusion).
pub fn quick_f1(
    prepared: &[PreparedDoc],
    corpus: &Corpus,
    bank: &ParamBank,
    model: &ModelConfig,
    relations: &RelationVocab,
) -> Result<f64, TrainError> {
    let results: Vec<Vec<Triple>> = prepared
        .par_iter()
        .map(|p| -> Result<Vec<Triple>, TrainError> {
            let scored = score_doc(p, bank, model)?;
            Ok(emit_records(&scored, None, 0.0, relations, crate::infer::DEFAULT_EVIDENCE_THRESHOLD)
                .into_iter()
                .map(|r| r.triple())
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let triples: Vec<Triple> = results.into_iter().flatten().collect();
    Ok(evaluate(corpus, &triples, None)?.overall.f1)
}

pub fn train(inputs: &TrainInputs, cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let vocab = TokenVocab::build(inputs.train, cfg.min_count);
    let relations = RelationVocab::build(inputs.train);
    if relations.len() == 0 {
        return Err(TrainError::BadConfig(
            "training corpus has no relation facts".into(),
        ));
    }
    let mut model = cfg.model.clone();
    model.encoder.vocab_size = vocab.len();
    model.relations = relations.len();
    model.validate()?;

    // echo resolved configuration and vocabularies
    let echo = toml::to_string_pretty(cfg)
        .map_err(|e| TrainError::BadConfig(format!("config not serializable: {e}")))?;
    std::fs::write(out_dir.join(CONFIG_FILE), echo).map_err(io_err(out_dir))?;
    vocab.save(&out_dir.join(TOKEN_VOCAB_FILE))?;
    relations.save(&out_dir.join(RELATION_VOCAB_FILE))?;

    let prepared = prepare_all(inputs.train, inputs.train_parses, &vocab, &model, cfg)?;
    let prepared_dev = match inputs.dev {
        Some((dev_corpus, dev_parses)) => {
            Some(prepare_all(dev_corpus, dev_parses, &vocab, &model, cfg)?)
        }
        None => None,
    };

    let n = prepared.len();
    if n == 0 {
        return Err(TrainError::BadConfig("training corpus is empty".into()));
    }
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let warmup_steps = (cfg.warmup_ratio * total_steps as f64).round() as usize;
    let mut opt_cfg = OptimConfig::new(cfg.lr_encoder, cfg.lr_classifier, warmup_steps, total_steps);
    opt_cfg.weight_decay = cfg.weight_decay;

    let mut bank = build_params(&model, cfg.seed);
    let mut opt = AdamW::new(opt_cfg, &bank)?;

    let log_path = out_dir.join(LOG_FILE);
    let mut log = File::create(&log_path).map_err(io_err(&log_path))?;

    let train_echo = serde_json::to_value(cfg).expect("config serializes");
    let make_header = |bank: &ParamBank| {
        header_for(
            model.clone(),
            cfg.beta,
            cfg.seed,
            vocab.content_hash(),
            relations.content_hash(),
            train_echo.clone(),
            bank,
        )
    };

    let mut step = 0usize;
    let mut best_dev: Option<f64> = None;
    let mut last_mean_total = 0.0;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let best_path = out_dir.join(CHECKPOINT_BEST);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(cfg.seed, &format!("shuffle.epoch{epoch}")));

        let mut epoch_total = 0.0;
        let mut epoch_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // per-document gradients on independent tapes, order preserved
            let results: Vec<(GradBank, f64, f64, f64)> = chunk
                .par_iter()
                .map(|&i| -> Result<(GradBank, f64, f64, f64), TrainError> {
                    let p = &prepared[i];
                    let tape = Tape::new();
                    let bound = bank.bind(&tape);
                    let mut dropout =
                        stream(cfg.seed, &format!("dropout.doc{}.epoch{epoch}", p.doc.doc_id));
                    let fwd = p.forward(&tape, &bound, &model, Some(&mut dropout))?;
                    let dl = doc_loss(&tape, &fwd, &p.doc, &p.marked.sent_spans, &relations, cfg.beta)?;
                    let l_re = tape.value_scalar(dl.l_re);
                    let l_evi = tape.value_scalar(dl.l_evi);
                    let l_total = tape.value_scalar(dl.total);
                    tape.backward(dl.total)?;
                    Ok((bound.grads(&tape, &bank), l_re, l_evi, l_total))
                })
                .collect::<Result<_, _>>()?;

            let b = results.len() as f64;
            let (mut sum_re, mut sum_evi, mut sum_total) = (0.0, 0.0, 0.0);
            let mut grads = GradBank::zeros_like(&bank);
            for (g, re, evi, total) in &results {
                grads.add_assign(g);
                sum_re += re;
                sum_evi += evi;
                sum_total += total;
            }
            let (mean_re, mean_evi, mean_total) = (sum_re / b, sum_evi / b, sum_total / b);
            if !mean_total.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    step,
                    l_re: mean_re,
                    l_evi: mean_evi,
                });
            }
            grads.scale(1.0 / b);
            grads.clip_global_norm(cfg.clip_norm);
            let lr = opt.next_factor() * cfg.lr_classifier;
            opt.step(&mut bank, &grads);
            step += 1;
            last_mean_total = mean_total;
            epoch_total += mean_total;
            epoch_batches += 1;

            let record = LogRecord {
                epoch,
                step,
                l_re: mean_re,
                l_evi: mean_evi,
                l_total: mean_total,
                lr,
                dev_f1: None,
            };
            writeln!(log, "{}", serde_json::to_string(&record).expect("record serializes"))
                .map_err(io_err(&log_path))?;
        }
        epoch_losses.push(epoch_total / epoch_batches.max(1) as f64);

        if let (Some(dev_prep), Some((dev_corpus, _))) = (&prepared_dev, inputs.dev) {
            let f1 = quick_f1(dev_prep, dev_corpus, &bank, &model, &relations)?;
            let improved = best_dev.map(|b| f1 > b).unwrap_or(true);
            if improved {
                best_dev = Some(f1);
                save_checkpoint(&best_path, &make_header(&bank), &bank)?;
            }
            let record = LogRecord {
                epoch,
                step,
                l_re: 0.0,
                l_evi: 0.0,
                l_total: epoch_losses[epoch],
                lr: 0.0,
                dev_f1: Some(f1),
            };
            writeln!(log, "{}", serde_json::to_string(&record).expect("record serializes"))
                .map_err(io_err(&log_path))?;
        }
        log.flush().map_err(io_err(&log_path))?;
    }

    let final_path = out_dir.join(CHECKPOINT_FINAL);
    save_checkpoint(&final_path, &make_header(&bank), &bank)?;

    Ok(TrainOutcome {
        steps: step,
        final_train_loss: last_mean_total,
        best_dev_f1: best_dev,
        checkpoint_final: final_path,
        checkpoint_best: if best_dev.is_some() { Some(best_path) } else { None },
        token_vocab: vocab,
        relation_vocab: relations,
        model,
        epoch_losses,
    })
}
