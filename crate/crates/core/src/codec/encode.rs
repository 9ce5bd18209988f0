use std::collections::BTreeSet;

use super::{decode, CodecError, Tag, TagFamily, TagScheme, TagSequence};
use crate::corpus::{DdiType, Span};

/// Encodes a mention set into per-token tags.
///
/// Contiguous, pairwise-disjoint mentions use plain `B`/`I`. A token
/// belonging to two or more mentions is tagged `D-*`; a token belonging to
/// exactly one mention of an overlap group is tagged `H-*`. For the
/// fine-grained scheme every mention must carry a DDI type; for the plain
/// schemes the type is ignored.
///
/// Not every mention set is representable: the shared portion of an
/// overlap group must be one contiguous segment contained in every group
/// member, each member must add exactly one contiguous exclusive run of
/// its own, and a discontinuous mention that shares no token with another
/// cannot be expressed at all. Unrepresentable sets produce
/// [`CodecError::Unrepresentable`]; as a final safety net the encoder
/// decodes its own output and verifies it reproduces the input exactly,
/// which also rejects the rare adjacency layouts the decoder would
/// misattribute.
pub fn encode(
    token_count: usize,
    mentions: &[(Span, Option<DdiType>)],
    scheme: TagScheme,
) -> Result<TagSequence, CodecError> {
    for (span, ddi) in mentions {
        span.validate(token_count)
            .map_err(|e| CodecError::unrepresentable(scheme, e.to_string()))?;
        if scheme.is_fine() && ddi.is_none() {
            return Err(CodecError::unrepresentable(
                scheme,
                "mention without a DDI type in the fine-grained scheme",
            ));
        }
    }

    let mut tags: Vec<Tag> = vec![Tag::Outside; token_count];
    let use_ddi = scheme.is_fine();

    // Which mentions cover each token.
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); token_count];
    for (mi, (span, _)) in mentions.iter().enumerate() {
        for t in span.token_indices() {
            owners[t].push(mi);
        }
    }

    // Overlap groups: connected components under token sharing.
    let mut group_of: Vec<usize> = (0..mentions.len()).collect();
    fn root(group_of: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while group_of[r] != r {
            r = group_of[r];
        }
        let mut i = i;
        while group_of[i] != r {
            let next = group_of[i];
            group_of[i] = r;
            i = next;
        }
        r
    }
    for owner_list in &owners {
        for w in owner_list.windows(2) {
            let (a, b) = (root(&mut group_of, w[0]), root(&mut group_of, w[1]));
            if a != b {
                group_of[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    {
        let mut by_root: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for mi in 0..mentions.len() {
            let r = root(&mut group_of, mi);
            let gi = *by_root.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[gi].push(mi);
        }
    }

    for group in &groups {
        if group.len() == 1 {
            let (span, ddi) = &mentions[group[0]];
            if !span.is_contiguous() {
                return Err(CodecError::unrepresentable(
                    scheme,
                    "discontinuous mention shares no token with any other mention",
                ));
            }
            place_run(&mut tags, TagFamily::Plain, span.fragments[0], if use_ddi { *ddi } else { None });
        } else {
            if scheme == TagScheme::Bio {
                return Err(CodecError::unrepresentable(
                    scheme,
                    "overlapping mentions cannot be expressed in plain BIO",
                ));
            }
            encode_group(&mut tags, mentions, group, scheme)?;
        }
    }

    let seq = TagSequence {
        scheme,
        tags: tags.iter().map(Tag::render).collect(),
    };

    // Safety net: the output must decode back to exactly the input.
    let decoded = decode(&seq)?;
    if normalize(&decoded, use_ddi) != normalize(mentions, use_ddi) {
        return Err(CodecError::unrepresentable(
            scheme,
            "mention set does not survive a decode round-trip",
        ));
    }
    Ok(seq)
}

fn place_run(tags: &mut [Tag], family: TagFamily, (first, last): (usize, usize), ddi: Option<DdiType>) {
    for t in first..=last {
        tags[t] = Tag::Mark { family, begin: t == first, ddi };
    }
}

fn encode_group(
    tags: &mut [Tag],
    mentions: &[(Span, Option<DdiType>)],
    group: &[usize],
    scheme: TagScheme,
) -> Result<(), CodecError> {
    // Shared segment: tokens covered by at least two group members.
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &mi in group {
        for t in mentions[mi].0.token_indices() {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let shared: BTreeSet<usize> =
        counts.iter().filter(|&(_, &c)| c >= 2).map(|(&t, _)| t).collect();
    let (&s_first, &s_last) = (shared.iter().next().unwrap(), shared.iter().last().unwrap());
    if shared.len() != s_last - s_first + 1 {
        return Err(CodecError::unrepresentable(
            scheme,
            "shared portion of an overlap group is not one contiguous segment",
        ));
    }
    let shared_len = shared.len();

    // Each member must contain the whole shared segment and contribute one
    // contiguous exclusive run of its own.
    let mut exclusives: Vec<(usize, (usize, usize), Option<DdiType>)> = Vec::new();
    for &mi in group {
        let (span, ddi) = &mentions[mi];
        let tokens: BTreeSet<usize> = span.token_indices().into_iter().collect();
        if !shared.iter().all(|t| tokens.contains(t)) {
            return Err(CodecError::unrepresentable(
                scheme,
                "group member does not contain the whole shared segment",
            ));
        }
        let excl: Vec<usize> = tokens.difference(&shared).copied().collect();
        if excl.is_empty() {
            return Err(CodecError::unrepresentable(
                scheme,
                "group member has no tokens of its own",
            ));
        }
        let (e_first, e_last) = (excl[0], *excl.last().unwrap());
        if excl.len() != e_last - e_first + 1 {
            return Err(CodecError::unrepresentable(
                scheme,
                "exclusive portion of a group member is not one contiguous run",
            ));
        }
        exclusives.push((mi, (e_first, e_last), *ddi));
    }

    // The DDI type written on the shared segment. Members vote with their
    // exclusive runs when decoding, so a member whose exclusive run is not
    // longer than the shared segment constrains the choice.
    let shared_ddi = if !scheme.is_fine() {
        None
    } else {
        let first = exclusives[0].2;
        if exclusives.iter().all(|&(_, _, d)| d == first) {
            first
        } else {
            let candidate = DdiType::ALL.into_iter().find(|&cand| {
                exclusives.iter().all(|&(_, (e0, e1), d)| {
                    let d = d.unwrap();
                    let excl_len = e1 - e0 + 1;
                    d == cand
                        || excl_len > shared_len
                        || (excl_len == shared_len && d <= cand)
                })
            });
            match candidate {
                Some(c) => Some(c),
                None => {
                    return Err(CodecError::unrepresentable(
                        scheme,
                        "group members with conflicting DDI types cannot share a segment",
                    ));
                }
            }
        }
    };

    place_run(tags, TagFamily::Shared, (s_first, s_last), shared_ddi);
    for &(_, run, ddi) in &exclusives {
        place_run(tags, TagFamily::Overlap, run, if scheme.is_fine() { ddi } else { None });
    }
    Ok(())
}

/// Canonical multiset view of a mention list for round-trip comparison.
fn normalize(
    mentions: &[(Span, Option<DdiType>)],
    use_ddi: bool,
) -> Vec<(Vec<(usize, usize)>, Option<DdiType>)> {
    let mut v: Vec<_> = mentions
        .iter()
        .map(|(span, ddi)| (span.fragments.clone(), if use_ddi { *ddi } else { None }))
        .collect();
    v.sort();
    v
}
