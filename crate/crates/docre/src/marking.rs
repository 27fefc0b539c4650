//! Entity marker insertion.
//!
//! Every mention is wrapped in literal `*` tokens in the flattened document.
//! At one position, closing markers come before opening markers, closings are
//! inner-first, openings outer-first (longer span first), with entity/mention
//! index as the final tie-break; identical spans therefore nest properly.
//! The offset maps are bijective over real tokens, and sentence spans stay a
//! partition of the marked sequence, with markers folded into the sentence
//! of their mention.

use thiserror::Error;

use crate::corpus::Document;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MarkingError {
    #[error("document {doc}: marked length {got} exceeds encoder capacity {max}")]
    TooLong { doc: String, got: usize, max: usize },
    #[error("document {doc}: unknown mention ({entity}, {mention})")]
    UnknownMention {
        doc: String,
        entity: usize,
        mention: usize,
    },
}

#[derive(Debug, Clone)]
pub struct MarkedDoc {
    /// Flattened tokens with `*` markers inserted.
    pub tokens: Vec<String>,
    /// Flat original index to marked index; strictly increasing.
    pub orig_to_marked: Vec<usize>,
    /// Marked index back to flat original index; `None` on markers.
    pub marked_to_orig: Vec<Option<usize>>,
    /// Half-open sentence spans over the marked sequence; a partition.
    pub sent_spans: Vec<(usize, usize)>,
    /// Marked index of the opening marker, per `[entity][mention]`.
    pub mention_open: Vec<Vec<usize>>,
    /// Marked index of the closing marker, per `[entity][mention]`.
    pub mention_close: Vec<Vec<usize>>,
}

impl MarkedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Marked index of a mention's opening marker; the mention representation
    /// is read there.
    pub fn open_marker(
        &self,
        doc: &Document,
        entity: usize,
        mention: usize,
    ) -> Result<usize, MarkingError> {
        self.mention_open
            .get(entity)
            .and_then(|m| m.get(mention))
            .copied()
            .ok_or_else(|| MarkingError::UnknownMention {
                doc: doc.doc_id.clone(),
                entity,
                mention,
            })
    }

    /// Marked indices covering an original-token span inside one sentence.
    pub fn map_span(&self, offsets: &[usize], sent_id: usize, start: usize, end: usize) -> Vec<usize> {
        let base = offsets[sent_id];
        (start..end).map(|i| self.orig_to_marked[base + i]).collect()
    }
}

/// Insert entity markers into the flattened document.
pub fn mark_entities(doc: &Document) -> MarkedDoc {
    let offsets = doc.sent_offsets();
    let n_entities = doc.entities.len();
    let mut mention_open: Vec<Vec<usize>> = doc
        .entities
        .iter()
        .map(|e| vec![usize::MAX; e.mentions.len()])
        .collect();
    let mut mention_close = mention_open.clone();

    let mut tokens = Vec::new();
    let mut orig_to_marked = vec![usize::MAX; doc.total_tokens()];
    let mut marked_to_orig = Vec::new();
    let mut sent_spans = Vec::with_capacity(doc.sents.len());

    // (entity, mention, start, end) per sentence, positions sentence-local
    let mut per_sent: Vec<Vec<(usize, usize, usize, usize)>> = vec![Vec::new(); doc.sents.len()];
    for e in 0..n_entities {
        for (m, men) in doc.entities[e].mentions.iter().enumerate() {
            per_sent[men.sent_id].push((e, m, men.start, men.end));
        }
    }

    for (sent_id, sent) in doc.sents.iter().enumerate() {
        let sent_start_marked = tokens.len();
        let mentions = &per_sent[sent_id];
        for p in 0..=sent.len() {
            // closings first, inner-most (latest start) first
            let mut closing: Vec<&(usize, usize, usize, usize)> =
                mentions.iter().filter(|m| m.3 == p).collect();
            closing.sort_by(|a, b| (b.2, b.0, b.1).cmp(&(a.2, a.0, a.1)));
            for &&(e, m, _, _) in &closing {
                mention_close[e][m] = tokens.len();
                tokens.push(crate::vocab::MARKER_TOKEN.to_string());
                marked_to_orig.push(None);
            }
            // openings, outer-most (latest end) first
            let mut opening: Vec<&(usize, usize, usize, usize)> =
                mentions.iter().filter(|m| m.2 == p).collect();
            opening.sort_by(|a, b| (b.3, a.0, a.1).cmp(&(a.3, b.0, b.1)));
            for &&(e, m, _, _) in &opening {
                mention_open[e][m] = tokens.len();
                tokens.push(crate::vocab::MARKER_TOKEN.to_string());
                marked_to_orig.push(None);
            }
            if p < sent.len() {
                let flat = offsets[sent_id] + p;
                orig_to_marked[flat] = tokens.len();
                marked_to_orig.push(Some(flat));
                tokens.push(sent[p].clone());
            }
        }
        sent_spans.push((sent_start_marked, tokens.len()));
    }

    debug_assert!(orig_to_marked.iter().all(|&i| i != usize::MAX));
    debug_assert!(mention_open.iter().flatten().all(|&i| i != usize::MAX));

    MarkedDoc {
        tokens,
        orig_to_marked,
        marked_to_orig,
        sent_spans,
        mention_open,
        mention_close,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::doc;

    fn check_invariants(d: &Document, m: &MarkedDoc) {
        // bijectivity over real tokens
        for (flat, &mi) in m.orig_to_marked.iter().enumerate() {
            assert_eq!(m.marked_to_orig[mi], Some(flat));
        }
        let n_real = m.marked_to_orig.iter().filter(|o| o.is_some()).count();
        assert_eq!(n_real, d.total_tokens());
        let n_markers = m.tokens.len() - n_real;
        let n_mentions: usize = d.entities.iter().map(|e| e.mentions.len()).sum();
        assert_eq!(n_markers, 2 * n_mentions);
        // strictly increasing map
        for w in m.orig_to_marked.windows(2) {
            assert!(w[0] < w[1]);
        }
        // sentence spans partition the marked sequence
        let mut pos = 0;
        for &(s, e) in &m.sent_spans {
            assert_eq!(s, pos);
            assert!(e >= s);
            pos = e;
        }
        assert_eq!(pos, m.tokens.len());
        // removing markers restores the original token sequence
        let stripped: Vec<&str> = m
            .marked_to_orig
            .iter()
            .zip(&m.tokens)
            .filter(|(o, _)| o.is_some())
            .map(|(_, t)| t.as_str())
            .collect();
        let orig: Vec<&str> = d.flat_tokens();
        assert_eq!(stripped, orig);
        // every open/close index holds a marker and brackets the span
        for (e, ent) in d.entities.iter().enumerate() {
            for (mi, men) in ent.mentions.iter().enumerate() {
                let open = m.mention_open[e][mi];
                let close = m.mention_close[e][mi];
                assert_eq!(m.tokens[open], "*");
                assert_eq!(m.tokens[close], "*");
                let offs = d.sent_offsets();
                let first = m.orig_to_marked[offs[men.sent_id] + men.start];
                let last = m.orig_to_marked[offs[men.sent_id] + men.end - 1];
                assert!(open < first, "open marker precedes first token");
                assert!(close > last, "close marker follows last token");
            }
        }
    }

    #[test]
    fn simple_doc_marks_each_mention() {
        let d = doc(
            "m1",
            &["Alpha bought Beta .", "It grew ."],
            &[(0, 0, 0, 1), (1, 0, 2, 3)],
            &[],
        );
        let m = mark_entities(&d);
        assert_eq!(
            m.tokens,
            vec!["*", "Alpha", "*", "bought", "*", "Beta", "*", ".", "It", "grew", "."]
        );
        assert_eq!(m.sent_spans, vec![(0, 8), (8, 11)]);
        check_invariants(&d, &m);
    }

    #[test]
    fn nested_mentions_nest_properly() {
        // entity 0 covers tokens 0..3, entity 1 covers 1..2 inside it
        let d = doc(
            "m2",
            &["Bank of America Tower ."],
            &[(0, 0, 0, 3), (1, 0, 1, 2)],
            &[],
        );
        let m = mark_entities(&d);
        assert_eq!(
            m.tokens,
            vec!["*", "Bank", "*", "of", "*", "America", "*", "Tower", "."]
        );
        check_invariants(&d, &m);
        // outer opens before inner
        assert!(m.mention_open[0][0] < m.mention_open[1][0]);
    }

    #[test]
    fn shared_boundary_orders_deterministically() {
        // two mentions starting at the same token, different lengths
        let d = doc(
            "m3",
            &["New York City is big ."],
            &[(0, 0, 0, 3), (1, 0, 0, 2)],
            &[],
        );
        let m1 = mark_entities(&d);
        let m2 = mark_entities(&d);
        assert_eq!(m1.tokens, m2.tokens);
        check_invariants(&d, &m1);
        // longer span opens first
        assert!(m1.mention_open[0][0] < m1.mention_open[1][0]);
    }

    #[test]
    fn identical_spans_from_two_entities() {
        let d = doc(
            "m4",
            &["Paris is Paris ."],
            &[(0, 0, 0, 1), (1, 0, 0, 1)],
            &[],
        );
        let m = mark_entities(&d);
        check_invariants(&d, &m);
    }

    #[test]
    fn sentence_final_mention_closes_inside_its_sentence() {
        let d = doc("m5", &["I saw Beta", "Next ."], &[(0, 0, 2, 3)], &[]);
        let m = mark_entities(&d);
        check_invariants(&d, &m);
        let (s0, e0) = m.sent_spans[0];
        let close = m.mention_close[0][0];
        assert!(close >= s0 && close < e0);
    }
}
