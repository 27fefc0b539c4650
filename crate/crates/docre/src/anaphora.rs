//! Rule-based anaphor extraction from parse sidecars.
//!
//! Two rules over the flattened token sequence:
//! pronouns (every `PRON` token, one-token span) and definite noun phrases
//! (a determiner `the` plus its syntactic head, spanning determiner through
//! head inclusive). Determiners whose head does not lie strictly ahead in
//! the same sentence are skipped and tallied, never guessed. Spans that
//! overlap an entity mention are excluded by default so anaphor nodes stay
//! disjoint from mention nodes.

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, DocParse, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnaphorKind {
    Pronoun,
    DefiniteNp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anaphor {
    pub sent_id: usize,
    /// Token span within the sentence, half-open.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub kind: AnaphorKind,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnaphorSet {
    /// Sorted by (sent_id, start, end); the extraction scan produces this
    /// order directly.
    pub anaphors: Vec<Anaphor>,
    /// Definite-NP candidates dropped because the head token did not follow
    /// the determiner.
    pub skipped_backward_head: usize,
    /// Definite-NP candidates dropped because the head lay in another
    /// sentence.
    pub skipped_cross_sentence: usize,
    /// Candidates dropped by the mention-overlap exclusion.
    pub skipped_mention_overlap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnaphorConfig {
    /// Drop candidates whose span intersects an entity mention.
    pub exclude_mention_overlap: bool,
}

impl Default for AnaphorConfig {
    fn default() -> Self {
        AnaphorConfig {
            exclude_mention_overlap: true,
        }
    }
}

/// Extract anaphors for one document. The parse must already be validated
/// against the document (token count and head bounds).
pub fn extract_anaphors(
    doc: &Document,
    parse: &DocParse,
    config: AnaphorConfig,
) -> Result<AnaphorSet, CorpusError> {
    if parse.tokens.len() != doc.total_tokens() {
        return Err(CorpusError::Invalid {
            doc: doc.doc_id.clone(),
            message: format!(
                "parse has {} tokens, document has {}",
                parse.tokens.len(),
                doc.total_tokens()
            ),
        });
    }
    let offsets = doc.sent_offsets();
    let sent_of = |flat: usize| -> usize {
        // offsets is sorted; last sentence whose start <= flat
        match offsets.binary_search(&flat) {
            Ok(i) if i == offsets.len() - 1 => i - 1,
            Ok(i) => i,
            Err(i) => i - 1,
        }
    };

    let mut set = AnaphorSet::default();
    for (flat, tok) in parse.tokens.iter().enumerate() {
        let sent_id = sent_of(flat);
        let local = flat - offsets[sent_id];
        let sent = &doc.sents[sent_id];

        if tok.pos == "PRON" {
            push_candidate(
                doc,
                &mut set,
                config,
                sent_id,
                local,
                local + 1,
                sent[local].clone(),
                AnaphorKind::Pronoun,
            );
        }

        if tok.dep == "det" && tok.lower == "the" {
            let head = tok.head;
            if head <= flat {
                set.skipped_backward_head += 1;
                continue;
            }
            if sent_of(head) != sent_id {
                set.skipped_cross_sentence += 1;
                continue;
            }
            let head_local = head - offsets[sent_id];
            let surface = sent[local..=head_local].join(" ");
            push_candidate(
                doc,
                &mut set,
                config,
                sent_id,
                local,
                head_local + 1,
                surface,
                AnaphorKind::DefiniteNp,
            );
        }
    }
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn push_candidate(
    doc: &Document,
    set: &mut AnaphorSet,
    config: AnaphorConfig,
    sent_id: usize,
    start: usize,
    end: usize,
    surface: String,
    kind: AnaphorKind,
) {
    if config.exclude_mention_overlap && overlaps_mention(doc, sent_id, start, end) {
        set.skipped_mention_overlap += 1;
        return;
    }
    set.anaphors.push(Anaphor {
        sent_id,
        start,
        end,
        surface,
        kind,
    });
}

fn overlaps_mention(doc: &Document, sent_id: usize, start: usize, end: usize) -> bool {
    doc.entities.iter().any(|e| {
        e.mentions
            .iter()
            .any(|m| m.sent_id == sent_id && m.start < end && start < m.end)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{doc, flat_parse};

    #[test]
    fn pronoun_and_definite_np_fixture() {
        // "He" is a pronoun; "the market" is a determiner plus forward head.
        let d = doc("a1", &["He said the market would grow ."], &[], &[]);
        let mut p = flat_parse(&d);
        p.tokens[0].pos = "PRON".to_string();
        p.tokens[2].dep = "det".to_string();
        p.tokens[2].head = 3;
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let surfaces: Vec<&str> = set.anaphors.iter().map(|a| a.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["He", "the market"]);
        assert_eq!(set.anaphors[0].kind, AnaphorKind::Pronoun);
        assert_eq!(set.anaphors[1].kind, AnaphorKind::DefiniteNp);
        assert_eq!(set.anaphors[1].start, 2);
        assert_eq!(set.anaphors[1].end, 4);
        assert_eq!(set.skipped_backward_head, 0);
    }

    #[test]
    fn backward_head_is_skipped_and_tallied() {
        let d = doc("a2", &["market the fell ."], &[], &[]);
        let mut p = flat_parse(&d);
        p.tokens[1].dep = "det".to_string();
        p.tokens[1].head = 0;
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        assert!(set.anaphors.is_empty());
        assert_eq!(set.skipped_backward_head, 1);
    }

    #[test]
    fn self_headed_determiner_counts_as_backward() {
        let d = doc("a3", &["the end ."], &[], &[]);
        let mut p = flat_parse(&d);
        p.tokens[0].dep = "det".to_string();
        p.tokens[0].head = 0;
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        assert!(set.anaphors.is_empty());
        assert_eq!(set.skipped_backward_head, 1);
    }

    #[test]
    fn cross_sentence_head_is_skipped_separately() {
        let d = doc("a4", &["the", "market fell ."], &[], &[]);
        let mut p = flat_parse(&d);
        p.tokens[0].dep = "det".to_string();
        p.tokens[0].head = 1;
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        assert!(set.anaphors.is_empty());
        assert_eq!(set.skipped_cross_sentence, 1);
    }

    #[test]
    fn mention_overlap_exclusion_is_switchable() {
        // "It" overlaps a mention span
        let d = doc("a5", &["It grew fast ."], &[(0, 0, 0, 1)], &[]);
        let mut p = flat_parse(&d);
        p.tokens[0].pos = "PRON".to_string();
        let on = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        assert!(on.anaphors.is_empty());
        assert_eq!(on.skipped_mention_overlap, 1);
        let off = extract_anaphors(
            &d,
            &p,
            AnaphorConfig {
                exclude_mention_overlap: false,
            },
        )
        .unwrap();
        assert_eq!(off.anaphors.len(), 1);
        assert_eq!(off.skipped_mention_overlap, 0);
    }

    #[test]
    fn definite_np_overlapping_mention_tail_is_excluded() {
        // "the market" overlaps the mention covering token 3
        let d = doc("a6", &["He said the market fell ."], &[(0, 0, 3, 4)], &[]);
        let mut p = flat_parse(&d);
        p.tokens[2].dep = "det".to_string();
        p.tokens[2].head = 3;
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        assert!(set.anaphors.iter().all(|a| a.kind != AnaphorKind::DefiniteNp));
        assert_eq!(set.skipped_mention_overlap, 1);
    }

    #[test]
    fn scan_order_is_sorted_by_position() {
        let d = doc("a7", &["He saw the dog .", "She left ."], &[], &[]);
        let mut p = flat_parse(&d);
        p.tokens[0].pos = "PRON".to_string();
        p.tokens[2].dep = "det".to_string();
        p.tokens[2].head = 3;
        p.tokens[5].pos = "PRON".to_string();
        let set = extract_anaphors(&d, &p, AnaphorConfig::default()).unwrap();
        let keys: Vec<(usize, usize)> = set.anaphors.iter().map(|a| (a.sent_id, a.start)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(set.anaphors.len(), 3);
    }
}
