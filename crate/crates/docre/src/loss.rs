//! Training objectives: adaptive-threshold relation loss, evidence
//! distributions, and their combination.
//!
//! The relation loss ranks each gold relation logit above a learned
//! threshold logit (kept in the last slot) and the threshold above every
//! non-gold logit, via two restricted softmaxes. The evidence objective
//! pushes the pair's sentence-importance distribution toward a uniform
//! distribution over the gold evidence sentences, measured by KL
//! divergence. Only the model distribution is epsilon-smoothed: the gold
//! side uses the 0·ln 0 = 0 convention, which keeps closed-form fixtures
//! exact instead of perturbed by the smoothing constant.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::autodiff::{Tape, TensorError, TensorId};
use crate::corpus::Document;
use crate::model::DocForward;
use crate::vocab::RelationVocab;

/// Floor mixed into the model's sentence distribution before taking logs.
pub const EVIDENCE_EPS: f64 = 1e-8;

#[derive(Error, Debug)]
pub enum LossError {
    #[error("threshold index {threshold} listed among positives")]
    ThresholdInPositives { threshold: usize },
    #[error("positive relation id {id} out of range for {relations} relations")]
    PositiveOutOfRange { id: usize, relations: usize },
    #[error("sentence spans do not partition the token range: {0}")]
    BadSpans(String),
    #[error("relation {0:?} missing from the relation vocabulary")]
    UnknownRelation(String),
    #[error("gold distribution must sum to 1, got {0}")]
    BadTarget(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Adaptive-threshold loss for one pair's logits `[relations + 1]`.
///
/// `positives` holds gold relation ids (threshold excluded); duplicates are
/// collapsed. Empty positives yield only the negative term, which pushes
/// the threshold logit above every relation logit.
pub fn atl_loss(
    tape: &Tape,
    logits: TensorId,
    positives: &[usize],
    relations: usize,
) -> Result<TensorId, LossError> {
    let th = relations;
    let mut pos: Vec<usize> = positives.to_vec();
    pos.sort_unstable();
    pos.dedup();
    for &r in &pos {
        if r == th {
            return Err(LossError::ThresholdInPositives { threshold: th });
        }
        if r > relations {
            return Err(LossError::PositiveOutOfRange { id: r, relations });
        }
    }
    let is_pos = |r: usize| pos.binary_search(&r).is_ok();

    let mut neg_union: Vec<usize> = (0..relations).filter(|&r| !is_pos(r)).collect();
    neg_union.push(th);
    let neg_lse = tape.logsumexp(tape.gather_rows(logits, &neg_union)?, 0)?;
    let o_th = tape.gather_rows(logits, &[th])?;
    let term2 = tape.sub(neg_lse, o_th)?;

    if pos.is_empty() {
        return Ok(term2);
    }
    let mut pos_union = pos.clone();
    pos_union.push(th);
    let pos_lse = tape.logsumexp(tape.gather_rows(logits, &pos_union)?, 0)?;
    let scaled = tape.scale(pos_lse, pos.len() as f64)?;
    let pos_sum = tape.sum(tape.gather_rows(logits, &pos)?)?;
    let term1 = tape.sub(scaled, pos_sum)?;
    Ok(tape.add(term1, term2)?)
}

/// Fold a token-weight vector into per-sentence mass. `spans` must
/// partition `[0, len)` half-open and in order (marker positions count
/// toward their mention's sentence, which the marked spans already do).
pub fn sentence_distribution(
    tape: &Tape,
    weights: TensorId,
    spans: &[(usize, usize)],
) -> Result<TensorId, LossError> {
    let len = tape.shape(weights)[0];
    let mut cursor = 0usize;
    for &(s, e) in spans {
        if s != cursor || e < s {
            return Err(LossError::BadSpans(format!(
                "span ({s},{e}) does not continue at {cursor}"
            )));
        }
        cursor = e;
    }
    if cursor != len {
        return Err(LossError::BadSpans(format!(
            "spans cover [0,{cursor}) but weights have length {len}"
        )));
    }
    let mut per_sent = Vec::with_capacity(spans.len());
    for &(s, e) in spans {
        if s == e {
            per_sent.push(tape.constant(vec![0.0], vec![1])?);
        } else {
            let picked = tape.gather_rows(weights, &(s..e).collect::<Vec<_>>())?;
            per_sent.push(tape.sum(picked)?);
        }
    }
    Ok(tape.concat_last(&per_sent)?)
}

/// Gold evidence as a distribution: uniform over the cited sentences.
pub fn evidence_target(n_sents: usize, evidence: &[usize]) -> Vec<f64> {
    let mut uniq: Vec<usize> = evidence.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let mut v = vec![0.0; n_sents];
    if uniq.is_empty() {
        return v;
    }
    let w = 1.0 / uniq.len() as f64;
    for s in uniq {
        v[s] = w;
    }
    v
}

/// `KL(v ‖ p)` with `p` floored by [`EVIDENCE_EPS`] and renormalized.
/// Zero entries of `v` contribute nothing, so a one-hot target against
/// its own prediction scores exactly zero.
pub fn evidence_loss(tape: &Tape, p: TensorId, v: &[f64]) -> Result<TensorId, LossError> {
    let n = tape.shape(p)[0];
    if v.len() != n {
        return Err(LossError::Tensor(TensorError::LengthMismatch {
            expected: n,
            got: v.len(),
            shape: vec![n],
        }));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-6 || v.iter().any(|&x| x < 0.0) {
        return Err(LossError::BadTarget(total));
    }
    let shifted = tape.add_scalar(p, EVIDENCE_EPS)?;
    let norm = tape.recip(tape.sum(shifted)?)?;
    let smoothed = tape.mul_scalar(shifted, norm)?;
    // only coordinates with v > 0 enter the divergence
    let entropy: f64 = v.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
    let vc = tape.constant(v.to_vec(), vec![n])?;
    let cross = tape.sum(tape.mul(vc, tape.log(smoothed)?)?)?;
    Ok(tape.add_scalar(tape.neg(cross)?, entropy)?)
}

/// Per-pair gold annotations, keyed by ordered `(head, tail)`.
pub struct PairGold {
    pub positives: Vec<usize>,
    /// Union of evidence sentences across the pair's facts.
    pub evidence: Vec<usize>,
}

pub fn gold_by_pair(
    doc: &Document,
    relations: &RelationVocab,
) -> Result<BTreeMap<(usize, usize), PairGold>, LossError> {
    let mut map: BTreeMap<(usize, usize), PairGold> = BTreeMap::new();
    for fact in &doc.facts {
        let rid = relations
            .id(&fact.relation)
            .ok_or_else(|| LossError::UnknownRelation(fact.relation.clone()))?;
        let entry = map.entry((fact.head, fact.tail)).or_insert_with(|| PairGold {
            positives: Vec::new(),
            evidence: Vec::new(),
        });
        entry.positives.push(rid);
        entry.evidence.extend_from_slice(&fact.evidence);
    }
    for gold in map.values_mut() {
        gold.positives.sort_unstable();
        gold.positives.dedup();
        gold.evidence.sort_unstable();
        gold.evidence.dedup();
    }
    Ok(map)
}

pub struct DocLoss {
    pub total: TensorId,
    pub l_re: TensorId,
    pub l_evi: TensorId,
    /// Pairs that contributed an evidence term.
    pub evidence_pairs: usize,
}

/// Combined objective for one document: relation loss summed over all
/// ordered pairs, evidence loss summed over pairs holding at least one
/// gold relation with cited evidence, blended as `L_re + beta * L_evi`.
pub fn doc_loss(
    tape: &Tape,
    fwd: &DocForward,
    doc: &Document,
    spans: &[(usize, usize)],
    relations: &RelationVocab,
    beta: f64,
) -> Result<DocLoss, LossError> {
    let gold = gold_by_pair(doc, relations)?;
    let empty: Vec<usize> = Vec::new();
    let mut l_re: Option<TensorId> = None;
    let mut l_evi: Option<TensorId> = None;
    let mut evidence_pairs = 0usize;
    for pair in &fwd.pairs {
        let entry = gold.get(&(pair.head, pair.tail));
        let positives = entry.map(|g| g.positives.as_slice()).unwrap_or(&empty);
        let term = atl_loss(tape, pair.logits, positives, relations.len())?;
        l_re = Some(match l_re {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
        if let Some(g) = entry {
            if !g.positives.is_empty() && !g.evidence.is_empty() {
                let p = sentence_distribution(tape, pair.token_weights, spans)?;
                let v = evidence_target(doc.sents.len(), &g.evidence);
                let kl = evidence_loss(tape, p, &v)?;
                l_evi = Some(match l_evi {
                    Some(acc) => tape.add(acc, kl)?,
                    None => kl,
                });
                evidence_pairs += 1;
            }
        }
    }
    let zero = || tape.constant(vec![0.0], vec![1]);
    let l_re = match l_re {
        Some(t) => t,
        None => zero()?,
    };
    let l_evi = match l_evi {
        Some(t) => t,
        None => zero()?,
    };
    let total = tape.add(l_re, tape.scale(l_evi, beta)?)?;
    Ok(DocLoss {
        total,
        l_re,
        l_evi,
        evidence_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_of(
        logits: &[f64],
        positives: &[usize],
        relations: usize,
    ) -> Result<f64, LossError> {
        let tape = Tape::new();
        let o = tape.constant(logits.to_vec(), vec![logits.len()]).unwrap();
        let l = atl_loss(&tape, o, positives, relations)?;
        Ok(tape.value_scalar(l))
    }

    #[test]
    fn all_equal_logits_hit_the_closed_form() {
        // 4 relations + threshold, one positive, all logits equal:
        // positive softmax over 2 equal entries, negative over 4
        let got = scalar_of(&[0.0; 5], &[0], 4).unwrap();
        let want = 2f64.ln() + 4f64.ln();
        assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
    }

    #[test]
    fn correctly_ordered_logits_drive_loss_to_zero() {
        let got = scalar_of(&[40.0, 0.0, 0.0, 0.0, 20.0], &[0], 4).unwrap();
        assert!(got < 1e-8, "got {got}");
        let empty = scalar_of(&[0.0, 0.0, 0.0, 0.0, 40.0], &[], 4).unwrap();
        assert!(empty < 1e-8, "got {empty}");
    }

    #[test]
    fn matches_direct_log_softmax_on_random_logits() {
        use rand::Rng;
        let mut rng = crate::seeding::stream(11, "loss.direct");
        for _ in 0..50 {
            let r = 5usize;
            let logits: Vec<f64> = (0..r + 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pos: Vec<usize> = (0..r).filter(|_| rng.gen_bool(0.4)).collect();
            let got = scalar_of(&logits, &pos, r).unwrap();
            // independent direct evaluation
            let mut want = 0.0;
            let union_exp: f64 = pos
                .iter()
                .map(|&i| logits[i].exp())
                .chain(std::iter::once(logits[r].exp()))
                .sum();
            for &i in &pos {
                want -= (logits[i].exp() / union_exp).ln();
            }
            let neg_union: f64 = (0..r + 1)
                .filter(|i| *i == r || !pos.contains(i))
                .map(|i| logits[i].exp())
                .sum();
            want -= (logits[r].exp() / neg_union).ln();
            assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
        }
    }

    #[test]
    fn loss_moves_the_right_way() {
        let base = scalar_of(&[1.0, 0.0, 0.0, 2.0], &[0], 3).unwrap();
        let better = scalar_of(&[1.5, 0.0, 0.0, 2.0], &[0], 3).unwrap();
        assert!(better < base);
        let worse = scalar_of(&[1.0, 0.8, 0.0, 2.0], &[0], 3).unwrap();
        assert!(worse > base);
    }

    #[test]
    fn threshold_and_range_are_rejected() {
        assert!(matches!(
            scalar_of(&[0.0; 4], &[3], 3),
            Err(LossError::ThresholdInPositives { .. })
        ));
        assert!(matches!(
            scalar_of(&[0.0; 4], &[9], 3),
            Err(LossError::PositiveOutOfRange { .. })
        ));
    }

    #[test]
    fn sentence_distribution_sums_spans() {
        let tape = Tape::new();
        // uniform over 6 tokens, spans of 2 and 4
        let q = tape.constant(vec![1.0 / 6.0; 6], vec![6]).unwrap();
        let p = sentence_distribution(&tape, q, &[(0, 2), (2, 6)]).unwrap();
        let v = tape.value(p);
        assert!((v[0] - 2.0 / 6.0).abs() < 1e-12);
        assert!((v[1] - 4.0 / 6.0).abs() < 1e-12);

        // one-hot inside the second sentence
        let mut one = vec![0.0; 6];
        one[3] = 1.0;
        let q = tape.constant(one, vec![6]).unwrap();
        let p = sentence_distribution(&tape, q, &[(0, 2), (2, 6)]).unwrap();
        assert_eq!(tape.value(p), vec![0.0, 1.0]);
    }

    #[test]
    fn sentence_distribution_conserves_mass() {
        use rand::Rng;
        let mut rng = crate::seeding::stream(3, "loss.mass");
        for _ in 0..50 {
            let l = rng.gen_range(3..20);
            let cut = rng.gen_range(1..l);
            let raw: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let q: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let tape = Tape::new();
            let qt = tape.constant(q, vec![l]).unwrap();
            let p = sentence_distribution(&tape, qt, &[(0, cut), (cut, l)]).unwrap();
            let total: f64 = tape.value(p).iter().sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bad_spans_are_rejected() {
        let tape = Tape::new();
        let q = tape.constant(vec![0.25; 4], vec![4]).unwrap();
        assert!(matches!(
            sentence_distribution(&tape, q, &[(0, 2), (3, 4)]),
            Err(LossError::BadSpans(_))
        ));
        assert!(matches!(
            sentence_distribution(&tape, q, &[(0, 2)]),
            Err(LossError::BadSpans(_))
        ));
    }

    #[test]
    fn kl_fixtures() {
        let tape = Tape::new();
        let p = tape.constant(vec![0.5, 0.5], vec![2]).unwrap();
        let kl = evidence_loss(&tape, p, &[1.0, 0.0]).unwrap();
        let got = tape.value_scalar(kl);
        assert!((got - 2f64.ln()).abs() < 1e-9, "got {got}");

        let v = vec![0.3, 0.7];
        let p = tape.constant(v.clone(), vec![2]).unwrap();
        let kl = evidence_loss(&tape, p, &v).unwrap();
        assert!(tape.value_scalar(kl).abs() < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative_on_random_pairs() {
        use rand::Rng;
        let mut rng = crate::seeding::stream(5, "loss.kl");
        for _ in 0..50 {
            let n = rng.gen_range(2..8);
            let draw = |rng: &mut rand_chacha::ChaCha20Rng| -> Vec<f64> {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            };
            let v = draw(&mut rng);
            let pv = draw(&mut rng);
            let tape = Tape::new();
            let p = tape.constant(pv, vec![n]).unwrap();
            let kl = evidence_loss(&tape, p, &v).unwrap();
            assert!(tape.value_scalar(kl) >= -1e-12);
        }
    }

    #[test]
    fn evidence_target_is_uniform_over_cited_sentences() {
        assert_eq!(evidence_target(4, &[1, 3, 1]), vec![0.0, 0.5, 0.0, 0.5]);
        assert_eq!(evidence_target(3, &[]), vec![0.0; 3]);
    }

    #[test]
    fn zero_weight_sentence_survives_the_log() {
        let tape = Tape::new();
        let p = tape.constant(vec![1.0, 0.0], vec![2]).unwrap();
        let kl = evidence_loss(&tape, p, &[0.5, 0.5]).unwrap();
        let got = tape.value_scalar(kl);
        assert!(got.is_finite() && got > 0.0);
    }

    #[test]
    fn atl_gradient_matches_finite_differences() {
        use crate::autodiff::check::grad_check;
        let report = grad_check(vec![1.0, -0.5, 0.3, 0.8, 0.1], vec![5], |tape, x| {
            atl_loss(tape, x, &[0, 2], 4).map_err(|e| match e {
                LossError::Tensor(t) => t,
                other => panic!("unexpected: {other}"),
            })
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-4);
    }

    #[test]
    fn evidence_gradient_matches_finite_differences() {
        use crate::autodiff::check::grad_check;
        let report = grad_check(vec![0.2, 0.5, 0.3], vec![3], |tape, x| {
            let p = sentence_distribution(tape, x, &[(0, 1), (1, 3)]).map_err(|e| match e {
                LossError::Tensor(t) => t,
                other => panic!("unexpected: {other}"),
            })?;
            evidence_loss(tape, p, &[0.25, 0.75]).map_err(|e| match e {
                LossError::Tensor(t) => t,
                other => panic!("unexpected: {other}"),
            })
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-4);
    }
}
