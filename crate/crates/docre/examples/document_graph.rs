//! Builds the three-relation document graph for one small document and
//! prints its nodes and edges. Mention-anaphor edges form a complete
//! bipartite set, co-mention edges join mentions of one entity, and
//! inter-entity edges join mentions of different entities; which
//! connections matter is left to the learned adjacency weights. Also
//! shows the ablation variants.
//!
//! Run: cargo run --example document_graph

use docre::anaphora::{extract_anaphors, AnaphorConfig};
use docre::corpus::{DocParse, Document, Entity, Fact, Mention, TokenParse};
use docre::graph::{build_graph, expected_edge_counts, GraphVariant, NodeKind};
use docre::seeding::stream;

const EDGE_NAMES: [&str; 3] = ["mention-anaphor", "co-mention", "inter-entity"];

fn main() {
    let sents = [
        "rivia founded the guild in novigrad .",
        "it funds the harbor works .",
        "novigrad taxes the guild heavily .",
    ];
    let doc = Document {
        doc_id: "demo".into(),
        sents: sents
            .iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect(),
        entities: vec![
            Entity {
                mentions: vec![m("guild", 0, 2, 4), m("guild", 2, 2, 4)],
            },
            Entity {
                mentions: vec![m("rivia", 0, 0, 1)],
            },
            Entity {
                mentions: vec![m("novigrad", 0, 5, 6), m("novigrad", 2, 0, 1)],
            },
        ],
        facts: Vec::<Fact>::new(),
    };
    let mut parse = DocParse {
        doc_id: doc.doc_id.clone(),
        tokens: doc
            .flat_tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| TokenParse {
                pos: "NOUN".into(),
                dep: String::new(),
                head: i,
                lower: t.to_lowercase(),
            })
            .collect(),
    };
    parse.tokens[7].pos = "PRON".into(); // 'it'
    parse.tokens[9].dep = "det".into(); // 'the harbor'
    parse.tokens[9].head = 10;

    let anaphors = extract_anaphors(&doc, &parse, AnaphorConfig::default()).unwrap();
    println!("anaphors:");
    for a in &anaphors.anaphors {
        println!("  sentence {} '{}'", a.sent_id, a.surface);
    }

    let g = build_graph(&doc, &anaphors, GraphVariant::Full, None);
    println!("\nnodes ({}):", g.n());
    for (i, node) in g.nodes.iter().enumerate() {
        match node {
            NodeKind::Mention { entity, mention } => {
                let m = &doc.entities[*entity].mentions[*mention];
                println!("  {i}: mention '{}' (entity {entity}, sentence {})", m.name, m.sent_id);
            }
            NodeKind::Anaphor { index } => {
                println!("  {i}: anaphor '{}'", g.anaphors[*index].surface);
            }
        }
    }

    let counts = g.edge_counts();
    let mentions_per_entity: Vec<usize> =
        doc.entities.iter().map(|e| e.mentions.len()).collect();
    println!("\ndirected edges:");
    for (ty, name) in EDGE_NAMES.iter().enumerate() {
        println!("  {name}: {}", counts[ty]);
    }
    println!(
        "closed-form check: {:?}",
        expected_edge_counts(&mentions_per_entity, anaphors.anaphors.len())
    );

    for variant in [GraphVariant::NoAnaphor, GraphVariant::RandomReplace] {
        let mut rng = stream(11, "graph.random-replace.docdemo");
        let g = build_graph(&doc, &anaphors, variant, Some(&mut rng));
        println!("\n{variant:?}: {} nodes, edges {:?}", g.n(), g.edge_counts());
    }
}

fn m(name: &str, sent: usize, start: usize, end: usize) -> Mention {
    Mention {
        name: name.into(),
        sent_id: sent,
        start,
        end,
        etype: "MISC".into(),
    }
}
