use std::fmt;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::CorpusError;
use crate::pksubtype::PkSubtype;

/// One token of a sentence with its character offsets (0-based, `end`
/// exclusive, counted in chars rather than bytes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// A possibly discontinuous extent over the tokens of one sentence.
///
/// Fragments are inclusive `(first, last)` token-index pairs, sorted,
/// pairwise disjoint and non-adjacent (adjacent fragments must be merged
/// into one).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub fragments: Vec<(usize, usize)>,
}

impl Span {
    /// Single contiguous fragment covering tokens `first..=last`.
    pub fn contiguous(first: usize, last: usize) -> Self {
        Span { fragments: vec![(first, last)] }
    }

    /// Builds a span from fragment pairs, normalizing order and merging
    /// adjacent or overlapping fragments.
    pub fn from_fragments(mut fragments: Vec<(usize, usize)>) -> Self {
        fragments.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(fragments.len());
        for (a, b) in fragments {
            match merged.last_mut() {
                Some((_, last)) if a <= *last + 1 => *last = (*last).max(b),
                _ => merged.push((a, b)),
            }
        }
        Span { fragments: merged }
    }

    /// Builds a span from a sorted set of covered token indices.
    pub fn from_token_indices(indices: &[usize]) -> Self {
        Span::from_fragments(indices.iter().map(|&i| (i, i)).collect())
    }

    pub fn is_contiguous(&self) -> bool {
        self.fragments.len() == 1
    }

    pub fn first_token(&self) -> usize {
        self.fragments[0].0
    }

    pub fn last_token(&self) -> usize {
        self.fragments[self.fragments.len() - 1].1
    }

    /// Token indices covered by this span, in order.
    pub fn token_indices(&self) -> Vec<usize> {
        self.fragments.iter().flat_map(|&(a, b)| a..=b).collect()
    }

    pub fn contains(&self, token_index: usize) -> bool {
        self.fragments.iter().any(|&(a, b)| a <= token_index && token_index <= b)
    }

    pub fn token_count(&self) -> usize {
        self.fragments.iter().map(|&(a, b)| b - a + 1).sum()
    }

    /// Covered token texts joined with single spaces.
    pub fn covered_text(&self, tokens: &[Token]) -> String {
        let texts: Vec<&str> =
            self.token_indices().iter().map(|&i| tokens[i].text.as_str()).collect();
        texts.join(" ")
    }

    pub(crate) fn validate(&self, token_count: usize) -> Result<(), CorpusError> {
        if self.fragments.is_empty() {
            return Err(CorpusError::Invariant("span has no fragments".into()));
        }
        let mut prev_end: Option<usize> = None;
        for &(a, b) in &self.fragments {
            if a > b {
                return Err(CorpusError::Invariant(format!("bad fragment {a}-{b}")));
            }
            if b >= token_count {
                return Err(CorpusError::Invariant(format!(
                    "fragment {a}-{b} out of range for {token_count} tokens"
                )));
            }
            if let Some(p) = prev_end {
                if a <= p + 1 {
                    return Err(CorpusError::Invariant(format!(
                        "fragments not sorted, disjoint and non-adjacent near {a}-{b}"
                    )));
                }
            }
            prev_end = Some(b);
        }
        Ok(())
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, b)) in self.fragments.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}-{b}")?;
        }
        Ok(())
    }
}

/// Interaction category: pharmacokinetic, pharmacodynamic or unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DdiType {
    Pk,
    Pd,
    Un,
}

impl DdiType {
    pub const ALL: [DdiType; 3] = [DdiType::Pk, DdiType::Pd, DdiType::Un];

    pub fn as_str(&self) -> &'static str {
        match self {
            DdiType::Pk => "PK",
            DdiType::Pd => "PD",
            DdiType::Un => "UN",
        }
    }

    pub fn parse(s: &str) -> Option<DdiType> {
        match s {
            "PK" => Some(DdiType::Pk),
            "PD" => Some(DdiType::Pd),
            "UN" => Some(DdiType::Un),
            _ => None,
        }
    }
}

impl fmt::Display for DdiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a mention denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MentionKind {
    Precipitant,
    Trigger,
    SpecificInteraction,
}

impl MentionKind {
    pub const ALL: [MentionKind; 3] =
        [MentionKind::Precipitant, MentionKind::Trigger, MentionKind::SpecificInteraction];

    pub fn as_str(&self) -> &'static str {
        match self {
            MentionKind::Precipitant => "Precipitant",
            MentionKind::Trigger => "Trigger",
            MentionKind::SpecificInteraction => "SpecificInteraction",
        }
    }

    pub fn parse(s: &str) -> Option<MentionKind> {
        match s {
            "Precipitant" => Some(MentionKind::Precipitant),
            "Trigger" => Some(MentionKind::Trigger),
            "SpecificInteraction" => Some(MentionKind::SpecificInteraction),
            _ => None,
        }
    }
}

impl fmt::Display for MentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An annotated mention. Triggers always carry a [`DdiType`]; precipitants
/// and specific interactions never do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub kind: MentionKind,
    pub sentence_index: usize,
    pub span: Span,
    pub ddi_type: Option<DdiType>,
}

/// One extracted drug-drug interaction.
///
/// `precipitant`, `trigger` and `specific_interaction` reference mention
/// ids within the same document; all referenced mentions share a sentence.
/// PD interactions carry a specific interaction, PK interactions a subtype,
/// UN interactions neither.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub ddi_type: DdiType,
    pub precipitant: String,
    pub trigger: String,
    pub specific_interaction: Option<String>,
    pub pk_subtype: Option<PkSubtype>,
}

/// One sentence: the raw text plus its tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub raw: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Sentence { raw, tokens }
    }
}

/// A drug-label document: the label drug (with its known aliases), the
/// pre-split sentences, and gold or predicted annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub label_drug: String,
    pub label_drug_aliases: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<Mention>,
    pub interactions: Vec<Interaction>,
}

impl Document {
    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    /// Checks every data-model invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (si, sent) in self.sentences.iter().enumerate() {
            let mut prev_end: Option<usize> = None;
            for tok in &sent.tokens {
                if tok.start >= tok.end {
                    return Err(CorpusError::Invariant(format!(
                        "token offsets {}..{} empty in sentence {si}",
                        tok.start, tok.end
                    )));
                }
                if let Some(p) = prev_end {
                    if tok.start < p {
                        return Err(CorpusError::Invariant(format!(
                            "tokens overlap or out of order in sentence {si}"
                        )));
                    }
                }
                prev_end = Some(tok.end);
            }
        }

        let mut seen_ids = std::collections::HashSet::new();
        let matcher = LabelDrugMatcher::for_document(self);
        for m in &self.mentions {
            if !seen_ids.insert(m.id.as_str()) {
                return Err(CorpusError::Invariant(format!("duplicate mention id {}", m.id)));
            }
            let sent = self.sentences.get(m.sentence_index).ok_or_else(|| {
                CorpusError::Invariant(format!(
                    "mention {} references missing sentence {}",
                    m.id, m.sentence_index
                ))
            })?;
            m.span.validate(sent.tokens.len())?;
            match m.kind {
                MentionKind::Trigger => {
                    if m.ddi_type.is_none() {
                        return Err(CorpusError::Invariant(format!(
                            "trigger mention {} has no DDI type",
                            m.id
                        )));
                    }
                }
                MentionKind::Precipitant | MentionKind::SpecificInteraction => {
                    if m.ddi_type.is_some() {
                        return Err(CorpusError::Invariant(format!(
                            "{} mention {} carries a DDI type",
                            m.kind, m.id
                        )));
                    }
                }
            }
            // The label drug is a document attribute, never a precipitant.
            if m.kind == MentionKind::Precipitant
                && matcher.matches_span(&sent.tokens, &m.span)
            {
                return Err(CorpusError::Invariant(format!(
                    "precipitant mention {} matches the label drug",
                    m.id
                )));
            }
        }

        for it in &self.interactions {
            let prec = self.mention(&it.precipitant).ok_or_else(|| {
                CorpusError::Invariant(format!("dangling mention id {}", it.precipitant))
            })?;
            let trig = self.mention(&it.trigger).ok_or_else(|| {
                CorpusError::Invariant(format!("dangling mention id {}", it.trigger))
            })?;
            let sentence = prec.sentence_index;
            if trig.sentence_index != sentence {
                return Err(CorpusError::Invariant(format!(
                    "interaction mentions span sentences {} and {}",
                    sentence, trig.sentence_index
                )));
            }
            match it.ddi_type {
                DdiType::Pd => {
                    let si_id = it.specific_interaction.as_deref().ok_or_else(|| {
                        CorpusError::Invariant(
                            "PD interaction lacks a specific interaction".into(),
                        )
                    })?;
                    let si = self.mention(si_id).ok_or_else(|| {
                        CorpusError::Invariant(format!("dangling mention id {si_id}"))
                    })?;
                    if si.sentence_index != sentence {
                        return Err(CorpusError::Invariant(format!(
                            "interaction mentions span sentences {} and {}",
                            sentence, si.sentence_index
                        )));
                    }
                    if it.pk_subtype.is_some() {
                        return Err(CorpusError::Invariant(
                            "PD interaction carries a PK subtype".into(),
                        ));
                    }
                }
                DdiType::Pk => {
                    if it.pk_subtype.is_none() {
                        return Err(CorpusError::Invariant(
                            "PK interaction lacks a subtype".into(),
                        ));
                    }
                    if it.specific_interaction.is_some() {
                        return Err(CorpusError::Invariant(
                            "PK interaction carries a specific interaction".into(),
                        ));
                    }
                }
                DdiType::Un => {
                    if it.specific_interaction.is_some() || it.pk_subtype.is_some() {
                        return Err(CorpusError::Invariant(
                            "UN interaction carries PD/PK attributes".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

use super::matcher::LabelDrugMatcher;
