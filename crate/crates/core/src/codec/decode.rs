use super::{CodecError, Tag, TagFamily, TagSequence};
use crate::corpus::{DdiType, Span};

#[derive(Debug, Clone)]
struct Run {
    family: TagFamily,
    first: usize,
    last: usize,
    ddis: Vec<Option<DdiType>>,
}

impl Run {
    fn tokens(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

/// Decodes a tag sequence back into `(span, ddi)` mentions.
///
/// Maximal same-family runs are cut wherever a begin tag appears. Plain
/// runs are mentions on their own. `H` runs form maximal blocks of
/// consecutive runs (outside tokens do not break a block); each block is
/// bounded by the start or end of the sentence, a plain run, or a `D`
/// run. A block with a `D` run on exactly one side belongs to that run; a
/// block between two `D` runs splits, its last `H` run going to the right
/// `D` run and the rest to the left one. Every pairing yields one mention
/// (the union of the `D` run and one `H` run); `H` runs paired with
/// nothing become mentions by themselves.
///
/// Decoding is total over the scheme's alphabet. Malformed sequences are
/// repaired: an inside tag with no open run starts one, and orphan `H`/`D`
/// runs stand alone. A `D` run with exactly one partner collapses into a
/// single mention when the union is contiguous and falls apart into the
/// two separate runs otherwise. In the fine-grained scheme a mention's
/// DDI type is the majority vote of its tokens' types (ties resolved in
/// PK, PD, UN order).
pub fn decode(seq: &TagSequence) -> Result<Vec<(Span, Option<DdiType>)>, CodecError> {
    let mut parsed: Vec<Tag> = Vec::with_capacity(seq.tags.len());
    for tag in &seq.tags {
        if seq.scheme.index_of(tag).is_none() {
            return Err(CodecError::UnknownTag { tag: tag.clone(), scheme: seq.scheme });
        }
        parsed.push(Tag::parse(tag)?);
    }

    // Cut the sequence into maximal runs.
    let mut runs: Vec<Run> = Vec::new();
    let mut open: Option<Run> = None;
    for (t, tag) in parsed.iter().enumerate() {
        match *tag {
            Tag::Outside => {
                if let Some(run) = open.take() {
                    runs.push(run);
                }
            }
            Tag::Mark { family, begin, ddi } => {
                let extends = !begin && open.as_ref().is_some_and(|r| r.family == family);
                if extends {
                    let run = open.as_mut().unwrap();
                    run.last = t;
                    run.ddis.push(ddi);
                } else {
                    if let Some(run) = open.take() {
                        runs.push(run);
                    }
                    open = Some(Run { family, first: t, last: t, ddis: vec![ddi] });
                }
            }
        }
    }
    if let Some(run) = open.take() {
        runs.push(run);
    }

    // Pair each D run with its H partners, block by block.
    let mut partner_of: Vec<Vec<usize>> = vec![Vec::new(); runs.len()];
    let mut h_used: Vec<bool> = vec![false; runs.len()];
    let mut i = 0;
    while i < runs.len() {
        if runs[i].family != TagFamily::Overlap {
            i += 1;
            continue;
        }
        let start = i;
        while i < runs.len() && runs[i].family == TagFamily::Overlap {
            i += 1;
        }
        let block: Vec<usize> = (start..i).collect();
        let left = (start > 0 && runs[start - 1].family == TagFamily::Shared)
            .then(|| start - 1);
        let right = (i < runs.len() && runs[i].family == TagFamily::Shared).then_some(i);
        let claimed = match (left, right) {
            (Some(l), Some(r)) => {
                // Between two D runs the last H run is the right run's
                // preceding partner; the rest follow the left run.
                let (rest, last) = block.split_at(block.len() - 1);
                partner_of[l].extend_from_slice(rest);
                partner_of[r].push(last[0]);
                true
            }
            (Some(l), None) => {
                partner_of[l].extend_from_slice(&block);
                true
            }
            (None, Some(r)) => {
                partner_of[r].extend_from_slice(&block);
                true
            }
            (None, None) => false,
        };
        if claimed {
            for &b in &block {
                h_used[b] = true;
            }
        }
    }

    let mut mentions: Vec<(Span, Option<DdiType>)> = Vec::new();
    let standalone = |run: &Run| -> (Span, Option<DdiType>) {
        (Span::contiguous(run.first, run.last), majority(run.ddis.iter().copied()))
    };
    for (i, run) in runs.iter().enumerate() {
        match run.family {
            TagFamily::Plain => mentions.push(standalone(run)),
            TagFamily::Overlap => {
                if !h_used[i] {
                    mentions.push(standalone(run));
                }
            }
            TagFamily::Shared => {
                let partners = &partner_of[i];
                match partners.len() {
                    0 => mentions.push(standalone(run)),
                    1 => {
                        let h = &runs[partners[0]];
                        let span = union_span(run, h);
                        if span.is_contiguous() {
                            let ddi =
                                majority(run.ddis.iter().chain(h.ddis.iter()).copied());
                            mentions.push((span, ddi));
                        } else {
                            // The gap means this cannot have come from one
                            // mention; keep the two runs separate.
                            mentions.push(standalone(run));
                            mentions.push(standalone(h));
                        }
                    }
                    _ => {
                        for &p in partners {
                            let h = &runs[p];
                            let ddi =
                                majority(run.ddis.iter().chain(h.ddis.iter()).copied());
                            mentions.push((union_span(run, h), ddi));
                        }
                    }
                }
            }
        }
    }

    mentions.sort();
    Ok(mentions)
}

fn union_span(a: &Run, b: &Run) -> Span {
    let mut indices: Vec<usize> = a.tokens().chain(b.tokens()).collect();
    indices.sort_unstable();
    Span::from_token_indices(&indices)
}

/// Majority DDI type; ties resolve in PK, PD, UN order. All-`None` inputs
/// (the plain schemes) yield `None`.
fn majority(ddis: impl Iterator<Item = Option<DdiType>>) -> Option<DdiType> {
    let mut counts = [0usize; 3];
    let mut any = false;
    for ddi in ddis.flatten() {
        any = true;
        counts[ddi as usize] += 1;
    }
    if !any {
        return None;
    }
    let best = DdiType::ALL
        .into_iter()
        .max_by_key(|&d| (counts[d as usize], std::cmp::Reverse(d)))
        .unwrap();
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::super::TagScheme;
    use super::*;

    fn seq(scheme: TagScheme, tags: &[&str]) -> TagSequence {
        TagSequence::new(scheme, tags.iter().map(|t| t.to_string()).collect())
    }

    fn frags(mentions: &[(Span, Option<DdiType>)]) -> Vec<Vec<(usize, usize)>> {
        mentions.iter().map(|(s, _)| s.fragments.clone()).collect()
    }

    #[test]
    fn shared_word_pair_decodes_to_both_mentions() {
        let s = seq(TagScheme::Biohd, &["D-B", "H-B", "H-I", "H-I", "O", "H-B", "H-I"]);
        let m = decode(&s).unwrap();
        assert_eq!(frags(&m), vec![vec![(0, 0), (5, 6)], vec![(0, 3)]]);
    }

    #[test]
    fn all_outside_decodes_to_nothing() {
        let s = seq(TagScheme::Bio, &["O", "O", "O"]);
        assert!(decode(&s).unwrap().is_empty());
        assert!(decode(&TagSequence::new(TagScheme::Bio, vec![])).unwrap().is_empty());
    }

    #[test]
    fn orphan_inside_opens_a_mention() {
        let s = seq(TagScheme::Bio, &["O", "I", "I", "O"]);
        let m = decode(&s).unwrap();
        assert_eq!(frags(&m), vec![vec![(1, 2)]]);
    }

    #[test]
    fn orphan_h_and_d_runs_stand_alone() {
        let s = seq(TagScheme::Biohd, &["O", "H-B", "H-I", "O"]);
        assert_eq!(frags(&decode(&s).unwrap()), vec![vec![(1, 2)]]);
        let s = seq(TagScheme::Biohd, &["D-B", "D-I", "O", "O"]);
        assert_eq!(frags(&decode(&s).unwrap()), vec![vec![(0, 1)]]);
    }

    #[test]
    fn single_partner_with_gap_falls_apart() {
        let s = seq(TagScheme::Biohd, &["D-B", "O", "H-B"]);
        assert_eq!(frags(&decode(&s).unwrap()), vec![vec![(0, 0)], vec![(2, 2)]]);
        // ... but an adjacent single partner merges into one mention.
        let s = seq(TagScheme::Biohd, &["D-B", "H-B", "H-I"]);
        assert_eq!(frags(&decode(&s).unwrap()), vec![vec![(0, 2)]]);
    }

    #[test]
    fn fine_tags_vote_on_the_interaction_type() {
        let s = seq(TagScheme::BiohdDdi, &["B-PK", "I-PK", "I-PD", "O"]);
        let m = decode(&s).unwrap();
        assert_eq!(m, vec![(Span::contiguous(0, 2), Some(DdiType::Pk))]);
        // Exact tie resolves to PK over PD over UN.
        let s = seq(TagScheme::BiohdDdi, &["B-UN", "I-PD", "O"]);
        assert_eq!(decode(&s).unwrap()[0].1, Some(DdiType::Pd));
        let s = seq(TagScheme::BiohdDdi, &["B-UN", "I-PK", "O"]);
        assert_eq!(decode(&s).unwrap()[0].1, Some(DdiType::Pk));
    }

    #[test]
    fn tags_outside_the_alphabet_are_errors() {
        let s = seq(TagScheme::Bio, &["B", "H-B"]);
        assert!(matches!(decode(&s), Err(CodecError::UnknownTag { .. })));
        let s = seq(TagScheme::Biohd, &["B-PK"]);
        assert!(matches!(decode(&s), Err(CodecError::UnknownTag { .. })));
    }

    #[test]
    fn two_groups_separated_by_a_plain_run_stay_apart() {
        let s = seq(
            TagScheme::Biohd,
            &["H-B", "D-B", "H-B", "B", "H-B", "D-B", "H-B"],
        );
        let m = decode(&s).unwrap();
        assert_eq!(
            frags(&m),
            vec![
                vec![(0, 1)],
                vec![(1, 2)],
                vec![(3, 3)],
                vec![(4, 5)],
                vec![(5, 6)],
            ]
        );
    }

    #[test]
    fn coordinated_mentions_share_the_tail_word() {
        // "hepatic and renal toxicity": "hepatic ... toxicity" plus
        // "renal toxicity", both preceding the shared word.
        let s = seq(TagScheme::Biohd, &["H-B", "O", "H-B", "D-B"]);
        let m = decode(&s).unwrap();
        assert_eq!(frags(&m), vec![vec![(0, 0), (3, 3)], vec![(2, 3)]]);
        // The same with adjacent exclusive runs.
        let s = seq(TagScheme::Biohd, &["H-B", "H-B", "D-B"]);
        let m = decode(&s).unwrap();
        assert_eq!(frags(&m), vec![vec![(0, 0), (2, 2)], vec![(1, 2)]]);
    }

    #[test]
    fn h_run_directly_before_a_later_d_run_pairs_with_it() {
        // Two back-to-back groups: the middle H runs split between them.
        let s = seq(
            TagScheme::Biohd,
            &["H-B", "D-B", "H-B", "H-B", "D-B", "H-B"],
        );
        let m = decode(&s).unwrap();
        assert_eq!(
            frags(&m),
            vec![
                vec![(0, 1)],
                vec![(1, 2)],
                vec![(3, 4)],
                vec![(4, 5)],
            ]
        );
    }
}
