//! Corpus profile in the shape of a dataset card: document count and
//! per-document averages for mentions, entities, facts, sentences, and
//! rule-extracted anaphors.
//!
//! With no arguments this profiles a generated corpus. Pass a corpus JSON
//! and a parse sidecar to profile real data instead.
//!
//! Run: cargo run --release --example corpus_statistics [corpus.json parses.json]

use docre::anaphora::AnaphorConfig;
use docre::corpus::{load_corpus, load_parses};
use docre::stats::{corpus_stats, render_table};
use docre::synthetic::overfit_corpus;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let (label, corpus, parses) = match args.len() {
        3 => {
            let corpus = load_corpus(args[1].as_ref()).expect("corpus loads");
            let parses = load_parses(args[2].as_ref()).expect("parses load");
            (args[1].clone(), corpus, parses)
        }
        _ => {
            let bundle = overfit_corpus(11);
            ("generated overfit corpus".to_string(), bundle.corpus, bundle.parses)
        }
    };
    let stats = corpus_stats(&corpus, Some(&parses), AnaphorConfig::default()).expect("stats");
    print!("{}", render_table(&label, &stats));
}
