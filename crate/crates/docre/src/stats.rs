//! Corpus statistics.
//!
//! Averages are per-document arithmetic means. Anaphor counts require the
//! parse sidecar; without it the anaphor row reads `n/a` instead of a
//! silent zero.

use crate::anaphora::{extract_anaphors, AnaphorConfig};
use crate::corpus::{Corpus, CorpusError, ParseSet};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorpusStats {
    pub docs: usize,
    pub avg_anaphors: Option<f64>,
    pub avg_mentions: f64,
    pub avg_entities: f64,
    pub avg_triples: f64,
    pub avg_sentences: f64,
}

pub fn corpus_stats(
    corpus: &Corpus,
    parses: Option<&ParseSet>,
    config: AnaphorConfig,
) -> Result<CorpusStats, CorpusError> {
    let n = corpus.docs.len();
    let mut mentions = 0usize;
    let mut entities = 0usize;
    let mut triples = 0usize;
    let mut sentences = 0usize;
    let mut anaphors = 0usize;
    for doc in &corpus.docs {
        mentions += doc.entities.iter().map(|e| e.mentions.len()).sum::<usize>();
        entities += doc.entities.len();
        triples += doc.facts.len();
        sentences += doc.sents.len();
        if let Some(parses) = parses {
            let parse = parses.require(&doc.doc_id)?;
            anaphors += extract_anaphors(doc, parse, config)?.anaphors.len();
        }
    }
    let avg = |x: usize| x as f64 / n.max(1) as f64;
    Ok(CorpusStats {
        docs: n,
        avg_anaphors: parses.map(|_| avg(anaphors)),
        avg_mentions: avg(mentions),
        avg_entities: avg(entities),
        avg_triples: avg(triples),
        avg_sentences: avg(sentences),
    })
}

/// Plain-text table, one metric per row.
pub fn render_table(label: &str, stats: &CorpusStats) -> String {
    let fmt = |v: f64| format!("{v:.2}");
    let anaphors = stats
        .avg_anaphors
        .map_or_else(|| "n/a".to_string(), fmt);
    let rows = [
        ("# Docs".to_string(), stats.docs.to_string()),
        ("Avg. # Anaphors".to_string(), anaphors),
        ("Avg. # Mentions".to_string(), fmt(stats.avg_mentions)),
        ("Avg. # Entities".to_string(), fmt(stats.avg_entities)),
        ("Avg. # Triples".to_string(), fmt(stats.avg_triples)),
        ("Avg. # Sentences".to_string(), fmt(stats.avg_sentences)),
    ];
    let key_w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let val_w = rows
        .iter()
        .map(|(_, v)| v.len())
        .max()
        .unwrap_or(0)
        .max(label.len());
    let mut out = String::new();
    out.push_str(&format!("{:key_w$}  {:>val_w$}\n", "", label));
    for (k, v) in rows {
        out.push_str(&format!("{k:key_w$}  {v:>val_w$}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{doc, flat_parse};
    use crate::corpus::ParseSet;

    #[test]
    fn averages_are_per_document_means() {
        let d1 = doc(
            "s1",
            &["Alpha met Beta .", "They left ."],
            &[(0, 0, 0, 1), (1, 0, 2, 3)],
            &[(0, 1, "P1", &[0])],
        );
        let d2 = doc("s2", &["Gamma stayed ."], &[(0, 0, 0, 1)], &[]);
        let corpus = Corpus {
            docs: vec![d1.clone(), d2.clone()],
        };
        let mut parses = ParseSet::default();
        let mut p1 = flat_parse(&d1);
        p1.tokens[4].pos = "PRON".to_string();
        parses.by_doc.insert(p1.doc_id.clone(), p1);
        let p2 = flat_parse(&d2);
        parses.by_doc.insert(p2.doc_id.clone(), p2);

        let stats = corpus_stats(&corpus, Some(&parses), AnaphorConfig::default()).unwrap();
        assert_eq!(stats.docs, 2);
        assert_eq!(stats.avg_anaphors, Some(0.5));
        assert_eq!(stats.avg_mentions, 1.5);
        assert_eq!(stats.avg_entities, 1.5);
        assert_eq!(stats.avg_triples, 0.5);
        assert_eq!(stats.avg_sentences, 1.5);
    }

    #[test]
    fn missing_parses_render_na() {
        let corpus = Corpus {
            docs: vec![doc("s3", &["Hi ."], &[(0, 0, 0, 1)], &[])],
        };
        let stats = corpus_stats(&corpus, None, AnaphorConfig::default()).unwrap();
        assert_eq!(stats.avg_anaphors, None);
        let table = render_table("train", &stats);
        assert!(table.contains("n/a"));
        assert!(table.contains("# Docs"));
    }
}
