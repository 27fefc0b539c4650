//! Scratch harness for calibrating the synthetic experiments. Not part of
//! the showcase; deleted before release.

use std::time::Instant;

use docre::encoder::EncoderConfig;
use docre::eval::{evaluate, Triple};
use docre::graph::GraphVariant;
use docre::infer::{emit_records, score_doc, DEFAULT_EVIDENCE_THRESHOLD};
use docre::model::{prepare_doc, ModelConfig};
use docre::synthetic::{bridge_corpora, overfit_corpus};
use docre::train::{train, TrainConfig, TrainInputs};
use docre::vocab::{RelationVocab, TokenVocab};

fn overfit_model(d: usize, layers: usize) -> ModelConfig {
    let heads: usize = std::env::var("HEADS").ok().and_then(|v| v.parse().ok()).unwrap_or(2);
    let enc = EncoderConfig {
        vocab_size: 1,
        hidden: d,
        layers,
        heads,
        ff_width: 2 * d,
        max_len: 128,
        dropout: 0.1,
        attn_layers: 1,
    };
    ModelConfig::with_encoder(enc, 1)
}

fn run_overfit(epochs: usize, d: usize, lr: f64, seed: u64) {
    let bundle = overfit_corpus(11);
    let mut cfg = TrainConfig::with_model(overfit_model(d, 1));
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.warmup_ratio = 0.06;
    cfg.beta = 0.1;
    cfg.lr_encoder = lr;
    cfg.lr_classifier = lr;
    cfg.seed = seed;
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let inputs = TrainInputs {
        train: &bundle.corpus,
        train_parses: &bundle.parses,
        dev: None,
    };
    let out = train(&inputs, &cfg, dir.path()).unwrap();
    let train_time = t0.elapsed().as_secs_f64();
    let f1 = train_set_f1(&bundle.corpus, &bundle.parses, &out, &cfg);
    println!(
        "overfit d={d} lr={lr} epochs={epochs} seed={seed}: F1={f1:.4} time={train_time:.1}s loss0={:.4} lossN={:.4}",
        out.epoch_losses[0],
        out.epoch_losses.last().unwrap()
    );
}

fn train_set_f1(
    corpus: &docre::corpus::Corpus,
    parses: &docre::corpus::ParseSet,
    out: &docre::train::TrainOutcome,
    cfg: &TrainConfig,
) -> f64 {
    let (_, bank) = docre::checkpoint::load_checkpoint(&out.checkpoint_final).unwrap();
    let mut triples: Vec<Triple> = Vec::new();
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id).unwrap();
        let prep = prepare_doc(
            doc,
            parse,
            &out.token_vocab,
            &out.model,
            cfg.anaphors,
            cfg.graph_variant,
            cfg.seed,
        )
        .unwrap();
        let scored = score_doc(&prep, &bank, &out.model).unwrap();
        triples.extend(
            emit_records(&scored, None, 0.0, &out.relation_vocab, DEFAULT_EVIDENCE_THRESHOLD)
                .into_iter()
                .map(|r| r.triple()),
        );
    }
    evaluate(corpus, &triples, None).unwrap().overall.f1
}

fn eval_bridge(
    corpus: &docre::corpus::Corpus,
    parses: &docre::corpus::ParseSet,
    out: &docre::train::TrainOutcome,
    cfg: &TrainConfig,
    best: bool,
) -> (f64, f64) {
    let path = if best {
        out.checkpoint_best.as_ref().unwrap()
    } else {
        &out.checkpoint_final
    };
    let (_, bank) = docre::checkpoint::load_checkpoint(path).unwrap();
    let mut triples: Vec<Triple> = Vec::new();
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id).unwrap();
        let prep = prepare_doc(
            doc,
            parse,
            &out.token_vocab,
            &out.model,
            cfg.anaphors,
            cfg.graph_variant,
            cfg.seed,
        )
        .unwrap();
        let scored = score_doc(&prep, &bank, &out.model).unwrap();
        triples.extend(
            emit_records(&scored, None, 0.0, &out.relation_vocab, DEFAULT_EVIDENCE_THRESHOLD)
                .into_iter()
                .map(|r| r.triple()),
        );
    }
    let report = evaluate(corpus, &triples, None).unwrap();
    (report.overall.f1, report.inter.f1)
}

fn run_bridge(epochs: usize, d: usize, lr: f64, seed: u64, use_graph: bool, n_train: usize) {
    let lr_encoder: f64 = std::env::var("LRE").ok().and_then(|v| v.parse().ok()).unwrap_or(lr);
    let dropout: f64 = std::env::var("DROP").ok().and_then(|v| v.parse().ok()).unwrap_or(0.1);
    let n_held: usize = std::env::var("HELD").ok().and_then(|v| v.parse().ok()).unwrap_or(32);
    let (tr, te) = bridge_corpora(11, n_train, n_held);
    let mut model = overfit_model(d, 1);
    model.use_graph = use_graph;
    model.encoder.dropout = dropout;
    let mut cfg = TrainConfig::with_model(model);
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.warmup_ratio = 0.06;
    cfg.beta = 0.0;
    cfg.lr_encoder = lr_encoder;
    cfg.lr_classifier = lr;
    cfg.seed = seed;
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    // held set doubles as "dev" purely to log a per-epoch trajectory
    let inputs = TrainInputs {
        train: &tr.corpus,
        train_parses: &tr.parses,
        dev: Some((&te.corpus, &te.parses)),
    };
    let out = train(&inputs, &cfg, dir.path()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let (train_f1, _) = eval_bridge(&tr.corpus, &tr.parses, &out, &cfg, false);
    let (test_f1, test_inter) = eval_bridge(&te.corpus, &te.parses, &out, &cfg, false);
    let log = std::fs::read_to_string(dir.path().join(docre::train::LOG_FILE)).unwrap();
    let traj: Vec<(usize, f64)> = log
        .lines()
        .filter_map(|l| serde_json::from_str::<docre::train::LogRecord>(l).ok())
        .filter_map(|r| r.dev_f1.map(|f| (r.epoch, f)))
        .collect();
    let marks: Vec<String> = traj
        .iter()
        .filter(|(e, _)| (e + 1) % 10 == 0)
        .map(|(e, f)| format!("e{}={f:.3}", e + 1))
        .collect();
    println!(
        "bridge graph={use_graph} d={d} lr={lr} epochs={epochs} n={n_train} seed={seed}: train-F1={train_f1:.3} held-final={test_f1:.3} held-Inter={test_inter:.3} held-max={:.3} time={secs:.1}s lossN={:.4}",
        out.best_dev_f1.unwrap(),
        out.epoch_losses.last().unwrap()
    );
    println!("  traj {}", marks.join(" "));
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("probe");
    match mode {
        "probe" => {
            // one tiny run to measure per-epoch cost
            let bundle = overfit_corpus(11);
            let v = TokenVocab::build(&bundle.corpus, 1);
            let r = RelationVocab::build(&bundle.corpus);
            println!("overfit vocab={} relations={}", v.len(), r.len());
            run_overfit(5, 32, 2e-3, 1);
        }
        "overfit" => {
            let epochs: usize = args[2].parse().unwrap();
            let d: usize = args[3].parse().unwrap();
            let lr: f64 = args[4].parse().unwrap();
            let seed: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1);
            run_overfit(epochs, d, lr, seed);
        }
        "bridge" => {
            let epochs: usize = args[2].parse().unwrap();
            let d: usize = args[3].parse().unwrap();
            let lr: f64 = args[4].parse().unwrap();
            let seed: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1);
            let graph = args.get(6).map(|s| s == "graph").unwrap_or(true);
            let n_train: usize = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(48);
            run_bridge(epochs, d, lr, seed, graph, n_train);
        }
        other => eprintln!("unknown mode {other}"),
    }
}
