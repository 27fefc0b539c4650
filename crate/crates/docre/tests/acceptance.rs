//! Acceptance gate: every release-blocking property in one run, one
//! printed line per criterion. Run with `--nocapture` to see the lines;
//! the test fails (with the failing lines in the panic message) when any
//! criterion fails. Criterion 8 needs the DocRED training split on disk
//! and is skipped, not failed, when it is absent.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use docre::anaphora::{extract_anaphors, Anaphor, AnaphorConfig, AnaphorKind, AnaphorSet};
use docre::autodiff::Tape;
use docre::corpus::{load_corpus, load_parses, Corpus, DocParse, Document, Entity, Fact, Mention, TokenParse};
use docre::encoder::{encode, EncoderConfig};
use docre::eval::{evaluate, Triple};
use docre::graph::{build_graph, expected_edge_counts, DocGraph, GraphVariant, NodeKind};
use docre::gradsuite::run_suite;
use docre::infer::{emit_records, fuse, score_doc, write_predictions, DEFAULT_EVIDENCE_THRESHOLD};
use docre::loss::{atl_loss, evidence_loss, sentence_distribution};
use docre::model::{build_params, dynamic_adjacency, prepare_doc, ModelConfig};
use docre::stats::corpus_stats;
use docre::synthetic::{bridge_corpora, overfit_corpus};
use docre::train::{train, TrainConfig, TrainInputs};
use docre::vocab::{RelationVocab, TokenVocab};

// ── document scaffolding (integration tests cannot see the crate's
//    internal test utilities, so the builders live here) ────────────────────

fn doc(id: &str, sents: &[&str], mentions: &[(usize, usize, usize, usize)], facts: &[(usize, usize, &str, &[usize])]) -> Document {
    let sents: Vec<Vec<String>> = sents
        .iter()
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect();
    let n_entities = mentions.iter().map(|&(e, ..)| e + 1).max().unwrap_or(0);
    let mut entities = vec![Entity { mentions: Vec::new() }; n_entities];
    for &(e, sent_id, start, end) in mentions {
        entities[e].mentions.push(Mention {
            name: sents[sent_id][start..end].join(" "),
            sent_id,
            start,
            end,
            etype: "ENT".to_string(),
        });
    }
    Document {
        doc_id: id.to_string(),
        sents,
        entities,
        facts: facts
            .iter()
            .map(|&(head, tail, relation, evidence)| Fact {
                head,
                tail,
                relation: relation.to_string(),
                evidence: evidence.to_vec(),
            })
            .collect(),
    }
}

fn neutral_parse(d: &Document) -> DocParse {
    DocParse {
        doc_id: d.doc_id.clone(),
        tokens: d
            .flat_tokens()
            .iter()
            .map(|t| TokenParse {
                pos: "X".to_string(),
                dep: String::new(),
                head: 0,
                lower: t.to_lowercase(),
            })
            .collect(),
    }
}

struct Gate {
    lines: Vec<String>,
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Gate { lines: Vec::new(), failures: Vec::new() }
    }

    fn record(&mut self, n: usize, ok: bool, detail: String) {
        let line = format!("[{}] criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        if !ok {
            self.failures.push(line.clone());
        }
        self.lines.push(line);
    }

    fn skip(&mut self, n: usize, detail: String) {
        let line = format!("[SKIP] criterion {n}: {detail}");
        println!("{line}");
        self.lines.push(line);
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate);
    criterion_9(&mut gate);
    criterion_10(&mut gate);
    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}

// ── 1: gradient suite ────────────────────────────────────────────────────────

fn criterion_1(gate: &mut Gate) {
    let seeds: Vec<u64> = (0..20).collect();
    let t0 = Instant::now();
    let entries = run_suite(&seeds, 40).expect("suite runs");
    let secs = t0.elapsed().as_secs_f64();
    let worst = entries.iter().map(|e| e.max_rel_err).fold(0.0f64, f64::max);
    let all_pass = entries.iter().all(|e| e.passed());
    gate.record(
        1,
        all_pass && secs < 120.0,
        format!(
            "gradient suite, {} checks over 20 seeds, worst rel err {worst:.2e}, {secs:.1}s",
            entries.len()
        ),
    );
}

// ── 2: anaphor extraction vs the textual rules ──────────────────────────────

/// Independent restatement of the two extraction rules, written against the
/// raw document: every PRON token is a one-token anaphor; every determiner
/// `the` whose syntactic head lies strictly ahead in the same sentence spans
/// determiner..head; spans overlapping a mention are dropped.
fn anaphor_oracle(d: &Document, p: &DocParse) -> Vec<(usize, usize, usize, AnaphorKind)> {
    let mut out = Vec::new();
    let mut flat = 0usize;
    let mut sent_start = Vec::new();
    for (sid, sent) in d.sents.iter().enumerate() {
        sent_start.push(flat);
        for local in 0..sent.len() {
            let tok = &p.tokens[flat];
            if tok.pos == "PRON" {
                out.push((sid, local, local + 1, AnaphorKind::Pronoun));
            }
            if tok.dep == "det" && tok.lower == "the" {
                let head = tok.head;
                let in_sent = head > flat && head < sent_start[sid] + sent.len();
                if in_sent {
                    out.push((sid, local, head - sent_start[sid] + 1, AnaphorKind::DefiniteNp));
                }
            }
            flat += 1;
        }
    }
    out.retain(|&(sid, s, e, _)| {
        !d.entities.iter().flat_map(|en| &en.mentions).any(|m| {
            m.sent_id == sid && m.start < e && s < m.end
        })
    });
    out
}

fn criterion_2(gate: &mut Gate) {
    // the motivating fixture: a pronoun and a definite noun phrase
    let d = doc("fixture", &["He said the market would grow ."], &[], &[]);
    let mut p = neutral_parse(&d);
    p.tokens[0].pos = "PRON".to_string();
    p.tokens[2].dep = "det".to_string();
    p.tokens[2].head = 3;
    let set = extract_anaphors(&d, &p, AnaphorConfig::default()).expect("extracts");
    let surfaces: Vec<&str> = set.anaphors.iter().map(|a| a.surface.as_str()).collect();
    let fixture_ok = surfaces == vec!["He", "the market"];

    // 50 randomized hand-tagged sentences against the oracle
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let words = ["fund", "firm", "river", "bank", "press", "deal", "rose", "fell", "said", "met"];
    let mut oracle_ok = true;
    for case in 0..50 {
        let n_sents = rng.gen_range(1..=3);
        let sents: Vec<String> = (0..n_sents)
            .map(|_| {
                let len = rng.gen_range(4..=9);
                (0..len)
                    .map(|_| *words.choose(&mut rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let sent_refs: Vec<&str> = sents.iter().map(String::as_str).collect();
        // one random mention to exercise the overlap exclusion
        let msent = rng.gen_range(0..n_sents);
        let mlen = sent_refs[msent].split_whitespace().count();
        let mstart = rng.gen_range(0..mlen);
        let d = doc(
            &format!("rand{case}"),
            &sent_refs,
            &[(0, msent, mstart, mstart + 1)],
            &[],
        );
        let mut p = neutral_parse(&d);
        let offsets = d.sent_offsets();
        for (sid, sent) in d.sents.iter().enumerate() {
            for local in 0..sent.len() {
                let flat = offsets[sid] + local;
                match rng.gen_range(0..10) {
                    0 => p.tokens[flat].pos = "PRON".to_string(),
                    1 | 2 => {
                        // determiner with a random head: ahead, behind, or
                        // out of sentence, so every skip path is exercised
                        p.tokens[flat].dep = "det".to_string();
                        p.tokens[flat].lower = "the".to_string();
                        p.tokens[flat].head = rng.gen_range(0..d.total_tokens());
                    }
                    _ => {}
                }
            }
        }
        let got = extract_anaphors(&d, &p, AnaphorConfig::default()).expect("extracts");
        let got_tuples: Vec<(usize, usize, usize, AnaphorKind)> =
            got.anaphors.iter().map(|a| (a.sent_id, a.start, a.end, a.kind)).collect();
        let mut want = anaphor_oracle(&d, &p);
        want.sort_by_key(|&(sid, s, e, _)| (sid, s, e));
        if got_tuples != want {
            oracle_ok = false;
            break;
        }
    }
    gate.record(
        2,
        fixture_ok && oracle_ok,
        format!(
            "anaphor rules; fixture surfaces {surfaces:?}, 50-sentence oracle equality {}",
            if oracle_ok { "holds" } else { "violated" }
        ),
    );
}

// ── 3: graph construction vs brute force ────────────────────────────────────

fn random_graph_doc(rng: &mut ChaCha20Rng, id: usize) -> (Document, AnaphorSet) {
    let n_sents = rng.gen_range(2..=4);
    let sent_len = 8usize;
    let sents: Vec<String> = (0..n_sents)
        .map(|_| (0..sent_len).map(|_| "tok").collect::<Vec<_>>().join(" "))
        .collect();
    let sent_refs: Vec<&str> = sents.iter().map(String::as_str).collect();
    let n_entities = rng.gen_range(1..=8);
    let mut mentions = Vec::new();
    let mut total = 0usize;
    for e in 0..n_entities {
        let n_m = rng.gen_range(1..=3).min(20 - total);
        for _ in 0..n_m.max(1) {
            if total >= 20 {
                break;
            }
            let s = rng.gen_range(0..n_sents);
            let start = rng.gen_range(0..sent_len - 1);
            mentions.push((e, s, start, start + 1));
            total += 1;
        }
    }
    let d = doc(&format!("g{id}"), &sent_refs, &mentions, &[]);
    let n_anaphors = rng.gen_range(0..=6);
    let anaphors = (0..n_anaphors)
        .map(|_| {
            let s = rng.gen_range(0..n_sents);
            let start = rng.gen_range(0..sent_len);
            Anaphor {
                sent_id: s,
                start,
                end: start + 1,
                surface: "tok".to_string(),
                kind: AnaphorKind::Pronoun,
            }
        })
        .collect();
    (
        d,
        AnaphorSet {
            anaphors,
            skipped_backward_head: 0,
            skipped_cross_sentence: 0,
            skipped_mention_overlap: 0,
        },
    )
}

fn criterion_3(gate: &mut Gate) {
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let mut ok = true;
    let mut checked = 0usize;
    'outer: for case in 0..100 {
        let (d, set) = random_graph_doc(&mut rng, case);
        let g: DocGraph = build_graph(&d, &set, GraphVariant::Full, None);
        let n = g.n();
        // brute-force expectation per ordered node pair and edge type
        for i in 0..n {
            for j in 0..n {
                let want = match (&g.nodes[i], &g.nodes[j]) {
                    (NodeKind::Mention { .. }, NodeKind::Anaphor { .. })
                    | (NodeKind::Anaphor { .. }, NodeKind::Mention { .. }) => [true, false, false],
                    (
                        NodeKind::Mention { entity: a, .. },
                        NodeKind::Mention { entity: b, .. },
                    ) => {
                        if i == j {
                            [false, false, false]
                        } else if a == b {
                            [false, true, false]
                        } else {
                            [false, false, true]
                        }
                    }
                    (NodeKind::Anaphor { .. }, NodeKind::Anaphor { .. }) => [false, false, false],
                };
                for ty in 0..3 {
                    if g.has_edge(ty, i, j) != want[ty] {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        let mentions_per_entity: Vec<usize> =
            d.entities.iter().map(|e| e.mentions.len()).collect();
        if g.edge_counts() != expected_edge_counts(&mentions_per_entity, set.anaphors.len()) {
            ok = false;
            break;
        }
        let n_mentions: usize = mentions_per_entity.iter().sum();
        if n != n_mentions + set.anaphors.len() {
            ok = false;
            break;
        }
        checked += 1;
    }
    gate.record(
        3,
        ok,
        format!("graph edges equal the brute-force oracle on {checked}/100 random documents"),
    );
}

// ── 4: loss and fusion closed forms ─────────────────────────────────────────

fn criterion_4(gate: &mut Gate) {
    let tape = Tape::new();
    let logits = tape.constant(vec![0.3; 5], vec![5]).unwrap();
    let atl = atl_loss(&tape, logits, &[0], 4).expect("atl");
    let atl_val = tape.value_scalar(atl);
    let atl_want = (2.0f64).ln() + (4.0f64).ln();
    let atl_ok = (atl_val - atl_want).abs() < 1e-9;

    let p_same = tape.constant(vec![0.2, 0.3, 0.5], vec![3]).unwrap();
    let zero = evidence_loss(&tape, p_same, &[0.2, 0.3, 0.5]).expect("kl");
    let zero_ok = tape.value_scalar(zero).abs() < 1e-9;

    let p_half = tape.constant(vec![0.5, 0.5], vec![2]).unwrap();
    let ln2 = evidence_loss(&tape, p_half, &[1.0, 0.0]).expect("kl");
    let ln2_ok = (tape.value_scalar(ln2) - (2.0f64).ln()).abs() < 1e-9;

    let fused = fuse(0.7, Some(0.6), 0.5);
    let fuse_ok = fused == 0.7 + 0.6 - 0.5;

    gate.record(
        4,
        atl_ok && zero_ok && ln2_ok && fuse_ok,
        format!(
            "closed forms; adaptive-threshold loss {atl_val:.9} vs ln2+ln4, KL zero and ln 2 fixtures, fusion arithmetic {fused}"
        ),
    );
}

// ── 5: normalization invariants ─────────────────────────────────────────────

fn criterion_5(gate: &mut Gate) {
    let mut ok = true;

    // encoder attention rows are stochastic
    let enc_cfg = EncoderConfig {
        vocab_size: 30,
        hidden: 8,
        layers: 1,
        heads: 2,
        ff_width: 16,
        max_len: 32,
        dropout: 0.0,
        attn_layers: 1,
    };
    let model = ModelConfig::with_encoder(enc_cfg.clone(), 2);
    for seed in 0..50u64 {
        let bank = build_params(&model, seed);
        let tape = Tape::new();
        let bound = bank.bind(&tape);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
        let len = rng.gen_range(2..=12);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..30)).collect();
        let out = encode(&tape, &bound, &enc_cfg, &ids, None).expect("encodes");
        let a = tape.value(out.a);
        for row in a.chunks(len) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                ok = false;
            }
        }
    }

    // dynamic adjacency: rows with neighbors sum to one, zeros off-support
    for seed in 0..50u64 {
        let bank = build_params(&model, seed);
        let tape = Tape::new();
        let bound = bank.bind(&tape);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xad30);
        let n = rng.gen_range(2..=8);
        let nodes_vals: Vec<f64> = (0..n * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nodes = tape.constant(nodes_vals, vec![n, 8]).unwrap();
        let kinds: Vec<NodeKind> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    NodeKind::Mention { entity: i / 2, mention: 0 }
                } else {
                    NodeKind::Anaphor { index: i / 2 }
                }
            })
            .collect();
        let adj = [(); 3].map(|_| {
            (0..n * n)
                .map(|k| k / n != k % n && rng.gen_bool(0.4))
                .collect::<Vec<bool>>()
        });
        let graph = DocGraph { nodes: kinds, anaphors: Vec::new(), adj };
        let tilde = dynamic_adjacency(&tape, nodes, &graph, &bound, &model).expect("adjacency");
        let vals = tape.value(tilde);
        let support = graph.support();
        for i in 0..n {
            let row = &vals[i * n..(i + 1) * n];
            let sum: f64 = row.iter().sum();
            if support[i] {
                if (sum - 1.0).abs() > 1e-6 {
                    ok = false;
                }
                for j in 0..n {
                    let on_support = (0..3).any(|ty| graph.adj[ty][i * n + j]);
                    if !on_support && row[j] != 0.0 {
                        ok = false;
                    }
                }
            } else if row.iter().any(|&v| v != 0.0) {
                ok = false;
            }
        }
    }

    // sentence-importance distribution sums to one
    for seed in 0..50u64 {
        let tape = Tape::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xd157);
        let n_sents = rng.gen_range(1..=5);
        let lens: Vec<usize> = (0..n_sents).map(|_| rng.gen_range(1..=6)).collect();
        let total: usize = lens.iter().sum();
        let mut spans = Vec::new();
        let mut cursor = 0;
        for l in &lens {
            spans.push((cursor, cursor + l));
            cursor += l;
        }
        let weights: Vec<f64> = (0..total).map(|_| rng.gen_range(0.0..2.0)).collect();
        let w = tape.constant(weights, vec![total]).unwrap();
        let p = sentence_distribution(&tape, w, &spans).expect("distribution");
        let sum: f64 = tape.value(p).iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            ok = false;
        }
    }

    gate.record(
        5,
        ok,
        "attention rows, masked adjacency rows, and sentence distributions all normalize"
            .to_string(),
    );
}

// ── 6: overfit experiment ───────────────────────────────────────────────────

fn overfit_model() -> ModelConfig {
    let enc = EncoderConfig {
        vocab_size: 1,
        hidden: 32,
        layers: 1,
        heads: 2,
        ff_width: 64,
        max_len: 128,
        dropout: 0.1,
        attn_layers: 1,
    };
    ModelConfig::with_encoder(enc, 1)
}

fn train_set_f1(corpus: &Corpus, parses: &docre::corpus::ParseSet, out: &docre::train::TrainOutcome, cfg: &TrainConfig) -> f64 {
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

fn criterion_6(gate: &mut Gate) {
    let bundle = overfit_corpus(11);
    let mut cfg = TrainConfig::with_model(overfit_model());
    cfg.epochs = 120;
    cfg.batch_size = 4;
    cfg.warmup_ratio = 0.06;
    cfg.beta = 0.1;
    cfg.lr_encoder = 2e-3;
    cfg.lr_classifier = 2e-3;
    cfg.seed = 1;
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let inputs = TrainInputs {
        train: &bundle.corpus,
        train_parses: &bundle.parses,
        dev: None,
    };
    let out = train(&inputs, &cfg, dir.path()).expect("trains");
    let secs = t0.elapsed().as_secs_f64();
    let f1 = train_set_f1(&bundle.corpus, &bundle.parses, &out, &cfg);
    gate.record(
        6,
        f1 >= 0.95 && secs < 600.0,
        format!("overfit run, training micro-F1 {f1:.3} in {secs:.0}s (needs >= 0.95 under 600s)"),
    );
}

// ── 7: graph ablation direction on the bridge corpus ────────────────────────

fn bridge_run(seed: u64, use_graph: bool) -> f64 {
    let (tr, te) = bridge_corpora(11, 240, 48);
    let mut model = overfit_model();
    model.use_graph = use_graph;
    model.encoder.heads = 4;
    model.encoder.dropout = 0.3;
    let mut cfg = TrainConfig::with_model(model);
    cfg.epochs = 150;
    cfg.batch_size = 4;
    cfg.warmup_ratio = 0.06;
    cfg.beta = 0.0;
    cfg.lr_encoder = 2e-3;
    cfg.lr_classifier = 2e-3;
    cfg.seed = seed;
    let (dev, _) = bridge_corpora(seed.wrapping_add(977), 48, 0);
    let dir = tempfile::tempdir().unwrap();
    let inputs = TrainInputs {
        train: &tr.corpus,
        train_parses: &tr.parses,
        dev: Some((&dev.corpus, &dev.parses)),
    };
    let out = train(&inputs, &cfg, dir.path()).expect("trains");
    let ckpt = out.checkpoint_best.as_ref().unwrap_or(&out.checkpoint_final);
    let (_, bank) = docre::checkpoint::load_checkpoint(ckpt).unwrap();
    let mut triples: Vec<Triple> = Vec::new();
    for doc in &te.corpus.docs {
        let parse = te.parses.require(&doc.doc_id).unwrap();
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
    evaluate(&te.corpus, &triples, None).unwrap().inter.f1
}

fn criterion_7(gate: &mut Gate) {
    let seeds = [1u64, 2, 3];
    let mut gaps = Vec::new();
    for &s in &seeds {
        let full = bridge_run(s, true);
        let ablated = bridge_run(s, false);
        gaps.push((full - ablated) * 100.0);
    }
    let avg = gaps.iter().sum::<f64>() / gaps.len() as f64;
    gate.record(
        7,
        avg >= 5.0,
        format!(
            "graph ablation on the bridge corpus; held-out Inter-F1 gaps {:?} points, average {avg:.1} (needs >= 5)",
            gaps.iter().map(|g| (g * 10.0).round() / 10.0).collect::<Vec<_>>()
        ),
    );
}

// ── 8: DocRED fidelity (only when the files are present) ────────────────────

fn criterion_8(gate: &mut Gate) {
    let root = std::env::var("DOCRED_DIR").unwrap_or_else(|_| "../../data/docred".to_string());
    let corpus_path = std::path::Path::new(&root).join("train_annotated.json");
    if !corpus_path.exists() {
        gate.skip(
            8,
            format!(
                "DocRED fidelity; {} not present (set DOCRED_DIR to run)",
                corpus_path.display()
            ),
        );
        return;
    }
    let corpus = match load_corpus(&corpus_path) {
        Ok(c) => c,
        Err(e) => {
            gate.record(8, false, format!("DocRED fidelity; load failed: {e}"));
            return;
        }
    };
    let parses_path = std::path::Path::new(&root).join("train_parses.json");
    let parses = parses_path.exists().then(|| load_parses(&parses_path).expect("parses load"));
    let stats = corpus_stats(&corpus, parses.as_ref(), AnaphorConfig::default()).expect("stats");
    let mut ok = corpus.docs.len() == 3053;
    let close = |got: f64, want: f64| (got - want).abs() <= 0.1;
    ok &= close(stats.avg_mentions, 21.2);
    ok &= close(stats.avg_entities, 19.5);
    ok &= close(stats.avg_triples, 12.5);
    ok &= close(stats.avg_sentences, 7.9);
    let anaphor_note = match stats.avg_anaphors {
        Some(a) => {
            ok &= (a - 12.1).abs() <= 0.15 * 12.1;
            format!("anaphors/doc {a:.1}")
        }
        None => "anaphor average unchecked (no parse sidecar)".to_string(),
    };
    gate.record(
        8,
        ok,
        format!(
            "DocRED fidelity; {} docs, mentions {:.1}, entities {:.1}, triples {:.1}, sentences {:.1}, {anaphor_note}",
            corpus.docs.len(),
            stats.avg_mentions,
            stats.avg_entities,
            stats.avg_triples,
            stats.avg_sentences
        ),
    );
}

// ── 9: byte-identical train + infer reruns ──────────────────────────────────

fn criterion_9(gate: &mut Gate) {
    let (tr, _) = bridge_corpora(17, 6, 0);
    let mut cfg = TrainConfig::with_model(overfit_model());
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.lr_encoder = 1e-3;
    cfg.lr_classifier = 1e-3;
    cfg.seed = 29;
    let mut files = Vec::new();
    for run in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let inputs = TrainInputs {
            train: &tr.corpus,
            train_parses: &tr.parses,
            dev: None,
        };
        let out = train(&inputs, &cfg, dir.path()).expect("trains");
        let (_, bank) = docre::checkpoint::load_checkpoint(&out.checkpoint_final).unwrap();
        let mut records = Vec::new();
        for doc in &tr.corpus.docs {
            let parse = tr.parses.require(&doc.doc_id).unwrap();
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
            records.extend(emit_records(
                &scored,
                None,
                0.0,
                &out.relation_vocab,
                DEFAULT_EVIDENCE_THRESHOLD,
            ));
        }
        let path = dir.path().join(format!("preds{run}.json"));
        write_predictions(&path, &records).expect("writes");
        files.push(std::fs::read(&path).expect("reads back"));
    }
    gate.record(
        9,
        files[0] == files[1] && !files[0].is_empty(),
        format!(
            "reproducibility; two train+infer runs, {} identical prediction bytes",
            files[0].len()
        ),
    );
}

// ── 10: degenerate fusion equals plain prediction ───────────────────────────

fn criterion_10(gate: &mut Gate) {
    let mut rng = ChaCha20Rng::seed_from_u64(53);
    let relations =
        RelationVocab::from_names(vec!["r0".to_string(), "r1".to_string(), "r2".to_string()]);
    let mut ok = true;
    for case in 0..20 {
        let (d, _) = random_graph_doc(&mut rng, 1000 + case);
        if d.entities.len() < 2 {
            continue;
        }
        let corpus = Corpus { docs: vec![d.clone()] };
        let vocab = TokenVocab::build(&corpus, 1);
        let mut model = ModelConfig::with_encoder(
            EncoderConfig {
                vocab_size: vocab.len(),
                hidden: 8,
                layers: 1,
                heads: 2,
                ff_width: 16,
                max_len: 96,
                dropout: 0.0,
                attn_layers: 1,
            },
            relations.len(),
        );
        model.adj_heads = 1;
        let bank = build_params(&model, 100 + case as u64);
        let parse = neutral_parse(&d);
        let prep = prepare_doc(
            &d,
            &parse,
            &vocab,
            &model,
            AnaphorConfig::default(),
            GraphVariant::Full,
            7,
        )
        .expect("prepares");
        let pred = score_doc(&prep, &bank, &model).expect("scores");
        let plain = emit_records(&pred, None, 0.0, &relations, DEFAULT_EVIDENCE_THRESHOLD);
        let empty: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let fused = emit_records(&pred, Some(&empty), 0.0, &relations, DEFAULT_EVIDENCE_THRESHOLD);
        if plain != fused {
            ok = false;
            break;
        }
    }
    gate.record(
        10,
        ok,
        "fusion with tau = 0 and an empty pseudo pass reproduces plain prediction on 20 fixtures"
            .to_string(),
    );
}
