//! Generated corpora for controlled experiments.
//!
//! Two families:
//!
//! * `overfit_corpus`: 32 short documents over a ~200-word vocabulary and
//!   5 relations, each fact stated by a unique verb inside one sentence
//!   with that sentence as annotated evidence. A model that can memorize
//!   verb/argument patterns drives training-set F1 toward 1.
//!
//! * `bridge_corpora`: documents where every fact's head and tail never
//!   share a sentence and the only link between them is a gendered
//!   pronoun. An intro sentence names the head, a later relation sentence
//!   says `he/she verb tail`, and the pronoun's antecedent is the most
//!   recent name of its gender. Each document carries two heads per
//!   gender, so matching gender alone leaves two candidate heads per
//!   tail; resolving which one requires comparing candidates by recency,
//!   which attention over the pronoun's context can do but a per-pair
//!   classifier scoring head/tail representations independently cannot.
//!   Sentence lengths vary so no fixed token offset identifies the pair.
//!
//! All choices derive from named seed streams, so generation is
//! reproducible token for token.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::{Corpus, DocParse, Document, Entity, Fact, Mention, ParseSet, TokenParse};
use crate::seeding::stream;

pub const OVERFIT_DOCS: usize = 32;
pub const OVERFIT_RELATIONS: [&str; 5] = ["founded", "leads", "supplies", "owns", "borders"];
const PRONOUNS: [&str; 3] = ["it", "he", "she"];

pub const BRIDGE_RELATIONS: [&str; 6] = ["employs", "visits", "funds", "blames", "hosts", "greets"];
/// Facts per document: one per (gender, block) combination.
pub const BRIDGE_FACTS: usize = 4;
const BRIDGE_PRONOUNS: [&str; 2] = ["he", "she"];
const BRIDGE_HEADS_PER_GENDER: usize = 4;
const BRIDGE_TAIL_POOL: usize = 6;
const BRIDGE_INTRO_VERBS: [&str; 4] = ["arrived", "waited", "smiled", "paused"];
const BRIDGE_PADS: [&str; 10] = [
    "today", "again", "slowly", "quietly", "later", "soon", "twice", "still", "now", "once",
];

/// A corpus together with its parse sidecar.
pub struct Bundle {
    pub corpus: Corpus,
    pub parses: ParseSet,
}

/// Deterministic pronounceable token pool: two consonant-vowel syllables,
/// enumerated with coprime strides and deduplicated.
fn word_pool(n: usize, skip: usize) -> Vec<String> {
    const C: [char; 18] = [
        'b', 'c', 'd', 'f', 'g', 'h', 'j', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'w', 'z',
    ];
    const V: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
    let syl = |k: usize| -> String {
        let mut s = String::new();
        s.push(C[k % C.len()]);
        s.push(V[(k / C.len()) % V.len()]);
        s
    };
    // k -> (37k + 11) mod 8100 is a bijection (37 coprime to 8100), so
    // distinct k give distinct syllable pairs.
    (skip..skip + n)
        .map(|k| {
            let m = (k * 37 + 11) % 8100;
            format!("{}{}", syl(m / 90), syl(m % 90))
        })
        .collect()
}

fn entity_names() -> Vec<String> {
    word_pool(64, 0)
}

fn filler_names() -> Vec<String> {
    word_pool(120, 200)
}

/// Self-headed noun parse for every token; callers override entries.
fn noun_parse(doc: &Document) -> DocParse {
    let tokens = doc
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
    DocParse {
        doc_id: doc.doc_id.clone(),
        tokens,
    }
}

fn flat_index(doc: &Document, sent: usize, tok: usize) -> usize {
    doc.sents[..sent].iter().map(|s| s.len()).sum::<usize>() + tok
}

/// 32 documents, 5 relations, ~200 word types. Each document states two
/// facts in dedicated sentences (annotated as evidence) and carries one
/// definite-article filler and one pronoun filler so anaphor nodes exist.
pub fn overfit_corpus(seed: u64) -> Bundle {
    let mut rng = stream(seed, "synthetic.overfit");
    let entities = entity_names();
    let fillers = filler_names();
    let mut docs = Vec::with_capacity(OVERFIT_DOCS);
    let mut parses = ParseSet::default();

    for i in 0..OVERFIT_DOCS {
        let e = [
            entities[(3 * i) % entities.len()].clone(),
            entities[(3 * i + 1) % entities.len()].clone(),
            entities[(3 * i + 2) % entities.len()].clone(),
        ];
        let f = [
            fillers[(4 * i) % fillers.len()].clone(),
            fillers[(4 * i + 1) % fillers.len()].clone(),
            fillers[(4 * i + 2) % fillers.len()].clone(),
            fillers[(4 * i + 3) % fillers.len()].clone(),
        ];
        let v1 = rng.gen_range(0..OVERFIT_RELATIONS.len());
        let v2 = rng.gen_range(0..OVERFIT_RELATIONS.len());
        let pron = PRONOUNS[rng.gen_range(0..PRONOUNS.len())];

        // roles 0/1 carry the facts; 2 is a definite filler, 3 a pronoun filler
        let sents_by_role: [Vec<String>; 4] = [
            vec![e[0].clone(), OVERFIT_RELATIONS[v1].into(), e[1].clone(), ".".into()],
            vec![e[2].clone(), OVERFIT_RELATIONS[v2].into(), e[0].clone(), ".".into()],
            vec!["the".into(), f[0].clone(), "was".into(), f[1].clone(), ".".into()],
            vec![pron.into(), "was".into(), f[2].clone(), f[3].clone(), ".".into()],
        ];
        let mut order: Vec<usize> = (0..4).collect();
        order.shuffle(&mut rng);
        let sent_of = |role: usize| order.iter().position(|&r| r == role).unwrap();
        let sents: Vec<Vec<String>> = order.iter().map(|&r| sents_by_role[r].clone()).collect();

        let mention = |sent: usize, pos: usize, name: &str| Mention {
            name: name.to_string(),
            sent_id: sent,
            start: pos,
            end: pos + 1,
            etype: "ENT".to_string(),
        };
        let (s1, s2) = (sent_of(0), sent_of(1));
        let entities_out = vec![
            Entity {
                mentions: vec![mention(s1, 0, &e[0]), mention(s2, 2, &e[0])],
            },
            Entity {
                mentions: vec![mention(s1, 2, &e[1])],
            },
            Entity {
                mentions: vec![mention(s2, 0, &e[2])],
            },
        ];
        let facts = vec![
            Fact {
                head: 0,
                tail: 1,
                relation: OVERFIT_RELATIONS[v1].to_string(),
                evidence: vec![s1],
            },
            Fact {
                head: 2,
                tail: 0,
                relation: OVERFIT_RELATIONS[v2].to_string(),
                evidence: vec![s2],
            },
        ];
        let doc = Document {
            doc_id: format!("ov{i:02}"),
            sents,
            entities: entities_out,
            facts,
        };

        let mut parse = noun_parse(&doc);
        let det_sent = sent_of(2);
        let det_at = flat_index(&doc, det_sent, 0);
        parse.tokens[det_at].dep = "det".into();
        parse.tokens[det_at].head = det_at + 1;
        let pron_at = flat_index(&doc, sent_of(3), 0);
        parse.tokens[pron_at].pos = "PRON".into();
        parses.insert(parse);
        docs.push(doc);
    }
    Bundle {
        corpus: Corpus { docs },
        parses,
    }
}

/// One bridge fact. The head is introduced in its own sentence; a later
/// sentence states `pronoun verb tail`. Generation orders sentences so the
/// most recent name of the pronoun's gender is always this block's head.
struct Block {
    gender: usize,
    head: String,
    tail: String,
    verb: usize,
}

/// Core sentence events: (block index, is_relation_sentence).
type Event = (usize, bool);

fn bridge_doc(id: String, rng: &mut ChaCha20Rng) -> (Document, DocParse) {
    let gendered: [Vec<String>; 2] = [
        word_pool(BRIDGE_HEADS_PER_GENDER, 400),
        word_pool(BRIDGE_HEADS_PER_GENDER, 430),
    ];
    let tail_pool = word_pool(BRIDGE_TAIL_POOL, 470);

    let mut tails: Vec<&String> = tail_pool.iter().collect();
    tails.shuffle(rng);
    let mut blocks = Vec::with_capacity(BRIDGE_FACTS);
    for gender in 0..BRIDGE_PRONOUNS.len() {
        let mut heads: Vec<&String> = gendered[gender].iter().collect();
        heads.shuffle(rng);
        for b in 0..BRIDGE_FACTS / BRIDGE_PRONOUNS.len() {
            blocks.push(Block {
                gender,
                head: heads[b].clone(),
                tail: tails[blocks.len()].clone(),
                verb: rng.gen_range(0..BRIDGE_RELATIONS.len()),
            });
        }
    }

    // Interleave the two genders' event chains. Within one gender the order
    // intro1 < rel1 < intro2 < rel2 is fixed: it guarantees the most recent
    // same-gender name before each relation sentence is that block's head.
    let mut gender_of_slot: Vec<usize> = (0..2 * BRIDGE_FACTS).map(|s| s % 2).collect();
    gender_of_slot.shuffle(rng);
    let mut events: Vec<Event> = Vec::with_capacity(2 * BRIDGE_FACTS);
    let mut emitted = [0usize; 2];
    for &g in &gender_of_slot {
        let k = emitted[g];
        // even k: intro of block k/2; odd k: relation sentence of block k/2
        let block = (g * BRIDGE_FACTS / 2) + k / 2;
        events.push((block, k % 2 == 1));
        emitted[g] += 1;
    }

    let pad = |rng: &mut ChaCha20Rng, n: usize| -> Vec<String> {
        (0..n)
            .map(|_| BRIDGE_PADS[rng.gen_range(0..BRIDGE_PADS.len())].to_string())
            .collect()
    };

    let mut staged: Vec<(Vec<String>, Event)> = Vec::new();
    for &(b, is_rel) in &events {
        let blk = &blocks[b];
        let mut sent: Vec<String>;
        if is_rel {
            sent = vec![
                BRIDGE_PRONOUNS[blk.gender].into(),
                BRIDGE_RELATIONS[blk.verb].into(),
                blk.tail.clone(),
            ];
            let n = rng.gen_range(1..=2);
            sent.extend(pad(rng, n));
        } else {
            sent = vec![
                blk.head.clone(),
                BRIDGE_INTRO_VERBS[rng.gen_range(0..BRIDGE_INTRO_VERBS.len())].into(),
            ];
            let n = rng.gen_range(1..=3);
            sent.extend(pad(rng, n));
        }
        sent.push(".".into());
        staged.push((sent, (b, is_rel)));
    }

    let mut sents = Vec::with_capacity(staged.len());
    let mut entities = Vec::with_capacity(2 * BRIDGE_FACTS);
    // block -> (head entity, intro sent, tail entity, rel sent)
    let mut slots = vec![(0usize, 0usize, 0usize, 0usize); BRIDGE_FACTS];
    for (s, (sent, (b, is_rel))) in staged.into_iter().enumerate() {
        let blk = &blocks[b];
        let (name, pos) = if is_rel { (&blk.tail, 2) } else { (&blk.head, 0) };
        entities.push(Entity {
            mentions: vec![Mention {
                name: name.clone(),
                sent_id: s,
                start: pos,
                end: pos + 1,
                etype: "PER".to_string(),
            }],
        });
        if is_rel {
            slots[b].2 = entities.len() - 1;
            slots[b].3 = s;
        } else {
            slots[b].0 = entities.len() - 1;
            slots[b].1 = s;
        }
        sents.push(sent);
    }

    let facts = blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| Fact {
            head: slots[b].0,
            tail: slots[b].2,
            relation: BRIDGE_RELATIONS[blk.verb].to_string(),
            evidence: vec![slots[b].1, slots[b].3],
        })
        .collect();

    let doc = Document {
        doc_id: id,
        sents,
        entities,
        facts,
    };
    let mut parse = noun_parse(&doc);
    for b in 0..BRIDGE_FACTS {
        let at = flat_index(&doc, slots[b].3, 0);
        parse.tokens[at].pos = "PRON".into();
    }
    (doc, parse)
}

/// Train and held-out bridge corpora. Both draw names and verbs from the
/// same pools (so held-out tokens are all trained) but from independent
/// streams, so name pairings and layouts differ.
pub fn bridge_corpora(seed: u64, n_train: usize, n_test: usize) -> (Bundle, Bundle) {
    let gen = |name: &str, prefix: &str, n: usize| {
        let mut rng = stream(seed, name);
        let mut docs = Vec::with_capacity(n);
        let mut parses = ParseSet::default();
        for i in 0..n {
            let (doc, parse) = bridge_doc(format!("{prefix}{i:02}"), &mut rng);
            parses.insert(parse);
            docs.push(doc);
        }
        Bundle {
            corpus: Corpus { docs },
            parses,
        }
    };
    (
        gen("synthetic.bridge.train", "bt", n_train),
        gen("synthetic.bridge.test", "bh", n_test),
    )
}
