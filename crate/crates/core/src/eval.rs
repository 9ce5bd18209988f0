//! Precision / recall / F1 scoring for mentions and interactions.
//!
//! Matching is exact and one-to-one (D30-style strictness): a gold mention is
//! matched only by a prediction with the same kind, sentence, and full
//! fragment list, and each gold item can be claimed by at most one prediction.
//! Interactions match on (sentence, precipitant span, interaction type), with
//! PK interactions additionally requiring subtype equality unless lenient PK
//! matching is requested. Zero denominators yield a metric of 0.

use std::collections::BTreeMap;

use crate::corpus::{DdiType, Document, Mention, MentionKind};
use crate::pksubtype::PkSubtype;

/// True/false positive and false negative tallies for one match category.
///
/// Invariants: `true_positives + false_negatives` equals the gold count and
/// `true_positives + false_positives` equals the predicted count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MatchCounts {
    pub fn new(true_positives: usize, false_positives: usize, false_negatives: usize) -> Self {
        MatchCounts { true_positives, false_positives, false_negatives }
    }

    /// tp / (tp + fp), or 0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// tp / (tp + fn), or 0 when there is no gold.
    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// Harmonic mean of precision and recall, or 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
    }

    /// Accumulates another category's tallies into this one (micro-averaging
    /// is F1 over summed counts, never a mean of per-document F1 values).
    pub fn absorb(&mut self, other: MatchCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// Counts exact one-to-one mention matches between two lists drawn from the
/// same document. The match key is (kind, sentence, full fragment list); the
/// annotated interaction type on a trigger does not participate.
pub fn match_mentions(gold: &[Mention], pred: &[Mention]) -> MatchCounts {
    let key = |m: &Mention| (m.kind, m.sentence_index, m.span.fragments.clone());
    one_to_one(gold.iter().map(key), pred.iter().map(key))
}

/// Counts exact one-to-one interaction matches between two documents. The
/// match key is (sentence, precipitant fragment list, interaction type); PK
/// interactions also compare subtypes unless `lenient_pk` is set.
pub fn match_interactions(gold: &Document, pred: &Document, lenient_pk: bool) -> MatchCounts {
    one_to_one(interaction_keys(gold, lenient_pk), interaction_keys(pred, lenient_pk))
}

type InteractionKey = (DdiType, usize, Vec<(usize, usize)>, Option<PkSubtype>);

fn interaction_keys(doc: &Document, lenient_pk: bool) -> impl Iterator<Item = InteractionKey> + '_ {
    doc.interactions.iter().map(move |interaction| {
        let precipitant = doc
            .mention(&interaction.precipitant)
            .expect("validated documents reference existing precipitant mentions");
        let subtype = if interaction.ddi_type == DdiType::Pk && !lenient_pk {
            interaction.pk_subtype
        } else {
            None
        };
        (interaction.ddi_type, precipitant.sentence_index, precipitant.span.fragments.clone(), subtype)
    })
}

/// Greedy-free one-to-one matching of two multisets: every key matches
/// min(gold occurrences, predicted occurrences) times.
fn one_to_one<K: Ord>(
    gold: impl Iterator<Item = K>,
    pred: impl Iterator<Item = K>,
) -> MatchCounts {
    let mut tally: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    let mut gold_total = 0usize;
    let mut pred_total = 0usize;
    for k in gold {
        tally.entry(k).or_default().0 += 1;
        gold_total += 1;
    }
    for k in pred {
        tally.entry(k).or_default().1 += 1;
        pred_total += 1;
    }
    let tp: usize = tally.values().map(|&(g, p)| g.min(p)).sum();
    MatchCounts::new(tp, pred_total - tp, gold_total - tp)
}

/// Scores for a whole corpus: per-kind mention rows, per-type interaction
/// rows, and their micro aggregates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusEval {
    pub mentions_by_kind: BTreeMap<MentionKind, MatchCounts>,
    pub mention_micro: MatchCounts,
    pub interactions_by_type: BTreeMap<DdiType, MatchCounts>,
    pub interaction_micro: MatchCounts,
}

/// Scores predicted documents against gold ones, pairing documents by id.
/// A gold document with no predicted counterpart contributes only misses; a
/// predicted document with no gold counterpart contributes only false
/// positives.
pub fn evaluate_corpus(gold: &[Document], pred: &[Document], lenient_pk: bool) -> CorpusEval {
    let empty = empty_document();
    let pred_by_id: BTreeMap<&str, &Document> =
        pred.iter().map(|d| (d.id.as_str(), d)).collect();
    let gold_ids: std::collections::BTreeSet<&str> =
        gold.iter().map(|d| d.id.as_str()).collect();

    let mut eval = CorpusEval::default();
    for kind in [MentionKind::Precipitant, MentionKind::Trigger, MentionKind::SpecificInteraction] {
        eval.mentions_by_kind.insert(kind, MatchCounts::default());
    }
    for ddi in [DdiType::Pk, DdiType::Pd, DdiType::Un] {
        eval.interactions_by_type.insert(ddi, MatchCounts::default());
    }

    let unmatched_pred = pred.iter().filter(|d| !gold_ids.contains(d.id.as_str()));
    for gold_doc in gold.iter() {
        let pred_doc = pred_by_id.get(gold_doc.id.as_str()).copied().unwrap_or(&empty);
        absorb_document_pair(&mut eval, gold_doc, pred_doc, lenient_pk);
    }
    for pred_doc in unmatched_pred {
        absorb_document_pair(&mut eval, &empty, pred_doc, lenient_pk);
    }
    eval
}

fn absorb_document_pair(eval: &mut CorpusEval, gold: &Document, pred: &Document, lenient_pk: bool) {
    for (&kind, counts) in eval.mentions_by_kind.iter_mut() {
        let of_kind = |m: &&Mention| m.kind == kind;
        let gold_mentions: Vec<Mention> = gold.mentions.iter().filter(of_kind).cloned().collect();
        let pred_mentions: Vec<Mention> = pred.mentions.iter().filter(of_kind).cloned().collect();
        let c = match_mentions(&gold_mentions, &pred_mentions);
        counts.absorb(c);
        eval.mention_micro.absorb(c);
    }
    for (&ddi, counts) in eval.interactions_by_type.iter_mut() {
        let gold_only = restrict_to_type(gold, ddi);
        let pred_only = restrict_to_type(pred, ddi);
        let c = match_interactions(&gold_only, &pred_only, lenient_pk);
        counts.absorb(c);
        eval.interaction_micro.absorb(c);
    }
}

fn restrict_to_type(doc: &Document, ddi: DdiType) -> Document {
    let mut copy = doc.clone();
    copy.interactions.retain(|i| i.ddi_type == ddi);
    copy
}

fn empty_document() -> Document {
    Document {
        id: String::new(),
        label_drug: String::new(),
        label_drug_aliases: vec![],
        sentences: vec![],
        mentions: vec![],
        interactions: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Interaction, Sentence, Span};

    fn mention(id: &str, kind: MentionKind, sentence: usize, fragments: Vec<(usize, usize)>) -> Mention {
        Mention {
            id: id.to_string(),
            kind,
            sentence_index: sentence,
            span: Span::from_fragments(fragments),
            ddi_type: None,
        }
    }

    fn doc_with(mentions: Vec<Mention>, interactions: Vec<Interaction>) -> Document {
        Document {
            id: "d1".to_string(),
            label_drug: "Drugx".to_string(),
            label_drug_aliases: vec![],
            sentences: vec![Sentence::new("unused")],
            mentions,
            interactions,
        }
    }

    fn pk_interaction(precipitant: &str, trigger: &str, subtype: Option<PkSubtype>) -> Interaction {
        Interaction {
            ddi_type: DdiType::Pk,
            precipitant: precipitant.to_string(),
            trigger: trigger.to_string(),
            specific_interaction: None,
            pk_subtype: subtype,
        }
    }

    #[test]
    fn identical_mention_lists_are_a_perfect_match() {
        let gold = vec![
            mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("m1", MentionKind::Trigger, 0, vec![(4, 5)]),
        ];
        let counts = match_mentions(&gold, &gold);
        assert_eq!(counts, MatchCounts::new(2, 0, 0));
        assert_eq!((counts.precision(), counts.recall(), counts.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_predictions_miss_every_gold_mention() {
        let gold = vec![
            mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("m1", MentionKind::Trigger, 1, vec![(0, 1)]),
            mention("m2", MentionKind::SpecificInteraction, 1, vec![(3, 4)]),
        ];
        assert_eq!(match_mentions(&gold, &[]), MatchCounts::new(0, 0, 3));
    }

    #[test]
    fn contiguous_hull_does_not_match_a_discontinuous_gold_span() {
        let gold = vec![mention("m0", MentionKind::SpecificInteraction, 0, vec![(1, 1), (4, 5)])];
        let pred = vec![mention("p0", MentionKind::SpecificInteraction, 0, vec![(1, 5)])];
        assert_eq!(match_mentions(&gold, &pred), MatchCounts::new(0, 1, 1));
    }

    #[test]
    fn kind_and_sentence_participate_in_the_match_key() {
        let gold = vec![mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)])];
        let wrong_kind = vec![mention("p0", MentionKind::Trigger, 0, vec![(2, 2)])];
        let wrong_sentence = vec![mention("p0", MentionKind::Precipitant, 1, vec![(2, 2)])];
        assert_eq!(match_mentions(&gold, &wrong_kind), MatchCounts::new(0, 1, 1));
        assert_eq!(match_mentions(&gold, &wrong_sentence), MatchCounts::new(0, 1, 1));
    }

    #[test]
    fn matching_is_one_to_one() {
        let gold = vec![mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)])];
        let pred = vec![
            mention("p0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("p1", MentionKind::Precipitant, 0, vec![(2, 2)]),
        ];
        let counts = match_mentions(&gold, &pred);
        assert_eq!(counts, MatchCounts::new(1, 1, 0));
        assert!(counts.true_positives <= gold.len().min(pred.len()));
    }

    #[test]
    fn identical_interaction_sets_match_perfectly() {
        let doc = doc_with(
            vec![
                mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
                mention("m1", MentionKind::Trigger, 0, vec![(4, 5)]),
            ],
            vec![pk_interaction("m0", "m1", Some(PkSubtype::all()[0]))],
        );
        assert_eq!(match_interactions(&doc, &doc, false), MatchCounts::new(1, 0, 0));
    }

    #[test]
    fn interaction_type_mismatch_is_counted_twice() {
        let mentions = vec![
            mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("m1", MentionKind::Trigger, 0, vec![(4, 5)]),
        ];
        let gold = doc_with(
            mentions.clone(),
            vec![Interaction {
                ddi_type: DdiType::Pd,
                precipitant: "m0".to_string(),
                trigger: "m1".to_string(),
                specific_interaction: None,
                pk_subtype: None,
            }],
        );
        let mut pred = gold.clone();
        pred.interactions[0].ddi_type = DdiType::Un;
        assert_eq!(match_interactions(&gold, &pred, false), MatchCounts::new(0, 1, 1));
    }

    #[test]
    fn pk_subtype_mismatch_is_strict_by_default_and_forgiven_when_lenient() {
        let mentions = vec![
            mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("m1", MentionKind::Trigger, 0, vec![(4, 5)]),
        ];
        let gold = doc_with(mentions.clone(), vec![pk_interaction("m0", "m1", Some(PkSubtype::all()[0]))]);
        let pred = doc_with(mentions, vec![pk_interaction("m0", "m1", Some(PkSubtype::all()[1]))]);
        assert_eq!(match_interactions(&gold, &pred, false), MatchCounts::new(0, 1, 1));
        assert_eq!(match_interactions(&gold, &pred, true), MatchCounts::new(1, 0, 0));
    }

    #[test]
    fn f1_arithmetic_matches_hand_computation() {
        let counts = MatchCounts::new(3, 2, 1);
        assert!((counts.precision() - 0.6).abs() < 1e-12);
        assert!((counts.recall() - 0.75).abs() < 1e-12);
        assert!((counts.f1() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_yield_zero_metrics() {
        let counts = MatchCounts::new(0, 0, 0);
        assert_eq!((counts.precision(), counts.recall(), counts.f1()), (0.0, 0.0, 0.0));
        assert_eq!(MatchCounts::new(0, 3, 0).recall(), 0.0);
        assert_eq!(MatchCounts::new(0, 0, 3).precision(), 0.0);
    }

    #[test]
    fn swapping_gold_and_pred_swaps_precision_and_recall() {
        let gold = vec![
            mention("m0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("m1", MentionKind::Trigger, 0, vec![(4, 5)]),
            mention("m2", MentionKind::Precipitant, 1, vec![(0, 0)]),
        ];
        let pred = vec![
            mention("p0", MentionKind::Precipitant, 0, vec![(2, 2)]),
            mention("p1", MentionKind::Trigger, 0, vec![(9, 9)]),
        ];
        let forward = match_mentions(&gold, &pred);
        let backward = match_mentions(&pred, &gold);
        assert_eq!(forward.precision(), backward.recall());
        assert_eq!(forward.recall(), backward.precision());
    }

    #[test]
    fn micro_average_is_f1_of_summed_counts_not_mean_of_f1s() {
        // Document A: perfect on one mention. Document B: one miss, no preds.
        let doc_a = {
            let mut d = doc_with(vec![mention("m0", MentionKind::Precipitant, 0, vec![(1, 1)])], vec![]);
            d.id = "a".to_string();
            d
        };
        let doc_b = {
            let mut d = doc_with(vec![mention("m0", MentionKind::Precipitant, 0, vec![(3, 3)])], vec![]);
            d.id = "b".to_string();
            d
        };
        let pred_a = doc_a.clone();
        let mut pred_b = doc_b.clone();
        pred_b.mentions.clear();

        let eval = evaluate_corpus(&[doc_a, doc_b], &[pred_a, pred_b], false);
        assert_eq!(eval.mention_micro, MatchCounts::new(1, 0, 1));
        // Summed-count F1 is 2/3; the mean of per-document F1s (1.0 and 0.0)
        // would be 0.5 instead.
        assert!((eval.mention_micro.f1() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn documents_are_paired_by_id_and_orphans_still_count() {
        let gold_doc = doc_with(vec![mention("m0", MentionKind::Precipitant, 0, vec![(1, 1)])], vec![]);
        let mut stray = gold_doc.clone();
        stray.id = "other".to_string();
        // The prediction writes the right mention under the wrong document id:
        // the gold document sees a miss and the stray document a false alarm.
        let eval = evaluate_corpus(&[gold_doc], &[stray], false);
        assert_eq!(eval.mention_micro, MatchCounts::new(0, 1, 1));
    }
}
