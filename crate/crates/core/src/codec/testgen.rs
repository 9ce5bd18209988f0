//! Deterministic generators for representable mention sets, shared by the
//! property tests, the acceptance suite and the benchmarks.

use rand::Rng;

use super::TagScheme;
use crate::corpus::{DdiType, Span};

fn random_ddi<R: Rng>(rng: &mut R, scheme: TagScheme) -> Option<DdiType> {
    if scheme.is_fine() {
        Some(DdiType::ALL[rng.random_range(0..3)])
    } else {
        None
    }
}

/// Generates `(token_count, mentions)` guaranteed to be representable in
/// `scheme`: a mix of plain contiguous mentions and, for the BIOHD
/// schemes, an optional shared-word group (one shared segment, two or
/// three members, each contributing one exclusive run before or after the
/// segment). Group members share one DDI type; plain mentions draw theirs
/// independently.
pub fn random_representable<R: Rng>(
    rng: &mut R,
    max_tokens: usize,
    max_mentions: usize,
    scheme: TagScheme,
) -> (usize, Vec<(Span, Option<DdiType>)>) {
    assert!(max_tokens >= 1 && max_mentions >= 1);
    let token_count = rng.random_range(1..=max_tokens);
    let mut mentions: Vec<(Span, Option<DdiType>)> = Vec::new();
    let mut budget = rng.random_range(0..=max_mentions);

    // A shared-word group needs room: shared segment + two exclusive runs.
    let mut free_from = 0usize; // first token index not yet claimed
    if scheme != TagScheme::Bio && budget >= 2 && token_count >= 4 && rng.random_bool(0.6) {
        let members = if budget >= 3 && token_count >= 6 && rng.random_bool(0.4) { 3 } else { 2 };
        let shared_len = rng.random_range(1..=2.min(token_count - members));
        let pre_members = rng.random_range(0..=members.min(2));
        let post_members = members - pre_members;
        let mut cursor = rng.random_range(0..=1);
        let group_ddi = random_ddi(rng, scheme);
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for _ in 0..pre_members {
            let len = 1 + usize::from(rng.random_bool(0.3));
            runs.push((cursor, cursor + len - 1));
            cursor += len + rng.random_range(0..=1); // optional O gap
        }
        let shared = (cursor, cursor + shared_len - 1);
        cursor += shared_len;
        for _ in 0..post_members {
            cursor += rng.random_range(0..=1); // optional O gap
            let len = 1 + usize::from(rng.random_bool(0.3));
            runs.push((cursor, cursor + len - 1));
            cursor += len;
        }
        if cursor <= token_count {
            for run in runs {
                let span = Span::from_fragments(vec![run, shared]);
                mentions.push((span, group_ddi));
                budget = budget.saturating_sub(1);
            }
            free_from = cursor + 1; // keep a gap so plain runs stay clear
        }
    }

    // Plain contiguous mentions in the remaining tail, separated by gaps.
    let mut cursor = free_from;
    while budget > 0 && cursor < token_count {
        let remaining = token_count - cursor;
        if rng.random_bool(0.5) {
            let len = rng.random_range(1..=3.min(remaining));
            mentions.push((
                Span::contiguous(cursor, cursor + len - 1),
                random_ddi(rng, scheme),
            ));
            budget -= 1;
            cursor += len;
        } else {
            cursor += rng.random_range(1..=2.min(remaining));
        }
    }

    (token_count, mentions)
}
