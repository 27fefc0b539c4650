//! Rule-based anaphor extraction on hand-tagged sentences: pronouns
//! become one-token spans, and a definite article plus its parse head
//! becomes a definite-NP span. Spans that would land on an annotated
//! mention are dropped, as are articles whose head precedes them or sits
//! in another sentence.
//!
//! Run: cargo run --example anaphor_extraction

use docre::anaphora::{extract_anaphors, AnaphorConfig};
use docre::corpus::{DocParse, Document, Entity, Fact, Mention, TokenParse};

fn doc(sents: &[&str]) -> Document {
    Document {
        doc_id: "demo".into(),
        sents: sents
            .iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect(),
        entities: Vec::new(),
        facts: Vec::<Fact>::new(),
    }
}

fn plain(doc: &Document) -> DocParse {
    DocParse {
        doc_id: doc.doc_id.clone(),
        tokens: doc
            .flat_tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| TokenParse {
                pos: "X".into(),
                dep: String::new(),
                head: i,
                lower: t.to_lowercase(),
            })
            .collect(),
    }
}

fn main() {
    let mut d = doc(&["He said the market would grow ."]);
    let mut p = plain(&d);
    p.tokens[0].pos = "PRON".into();
    p.tokens[2].dep = "det".into();
    p.tokens[2].head = 3;

    let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
    println!("'{}'", d.sents[0].join(" "));
    for a in &set.anaphors {
        println!("  {:?} span [{}, {}): '{}'", a.kind, a.start, a.end, a.surface);
    }

    // same sentence again, but 'market' is an annotated mention: the
    // definite span overlaps it and is excluded
    d.entities = vec![Entity {
        mentions: vec![Mention {
            name: "market".into(),
            sent_id: 0,
            start: 3,
            end: 4,
            etype: "MISC".into(),
        }],
    }];
    let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
    println!("\nwith 'market' annotated as a mention:");
    for a in &set.anaphors {
        println!("  {:?} '{}'", a.kind, a.surface);
    }
    println!("  skipped for mention overlap: {}", set.skipped_mention_overlap);

    // degenerate parses the rules refuse: a head in a different sentence,
    // and a head before its article
    let d2 = doc(&["see the .", "market the fell ."]);
    let mut p2 = plain(&d2);
    p2.tokens[1].dep = "det".into();
    p2.tokens[1].head = 3;
    p2.tokens[4].dep = "det".into();
    p2.tokens[4].head = 3;
    let set = extract_anaphors(&d2, &p2, AnaphorConfig::default()).unwrap();
    println!("\ndegenerate articles:");
    println!("  extracted: {}", set.anaphors.len());
    println!("  skipped backward head: {}", set.skipped_backward_head);
    println!("  skipped cross-sentence head: {}", set.skipped_cross_sentence);
}
