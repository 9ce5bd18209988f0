//! Tag codec for possibly-discontinuous mentions.
//!
//! Three schemes are supported. Plain `BIO` handles contiguous,
//! non-overlapping mentions. `BIOHD` adds two tag families for mentions
//! that share words: `D-*` marks the shared portion of a group of
//! overlapping mentions and `H-*` marks each mention's own, non-shared
//! portion. `BIOHD_DDI` crosses the six non-`O` BIOHD tags with the three
//! interaction categories so a single labeling pass both finds triggers
//! and types them.
//!
//! The canonical example: in `increase the blood pressure and heart rate`
//! the two mentions `increase the blood pressure` and
//! `increase … heart rate` share the word `increase`, which is tagged
//! `D-B`; the two continuations are tagged as separate `H-B H-I…` runs.

mod decode;
mod encode;
pub mod testgen;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DdiType;

pub use decode::decode;
pub use encode::encode;

/// Tag alphabet selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagScheme {
    Bio,
    Biohd,
    BiohdDdi,
}

const BIO_ALPHABET: &[&str] = &["B", "I", "O"];
const BIOHD_ALPHABET: &[&str] = &["B", "I", "H-B", "H-I", "D-B", "D-I", "O"];
const BIOHD_DDI_ALPHABET: &[&str] = &[
    "B-PK", "B-PD", "B-UN", "I-PK", "I-PD", "I-UN", "H-B-PK", "H-B-PD", "H-B-UN", "H-I-PK",
    "H-I-PD", "H-I-UN", "D-B-PK", "D-B-PD", "D-B-UN", "D-I-PK", "D-I-PD", "D-I-UN", "O",
];

impl TagScheme {
    pub fn name(&self) -> &'static str {
        match self {
            TagScheme::Bio => "BIO",
            TagScheme::Biohd => "BIOHD",
            TagScheme::BiohdDdi => "BIOHD_DDI",
        }
    }

    pub fn parse(s: &str) -> Option<TagScheme> {
        match s {
            "BIO" => Some(TagScheme::Bio),
            "BIOHD" => Some(TagScheme::Biohd),
            "BIOHD_DDI" => Some(TagScheme::BiohdDdi),
            _ => None,
        }
    }

    /// The fixed, ordered label alphabet. The order indexes tagger outputs
    /// and must never change.
    pub fn alphabet(&self) -> &'static [&'static str] {
        match self {
            TagScheme::Bio => BIO_ALPHABET,
            TagScheme::Biohd => BIOHD_ALPHABET,
            TagScheme::BiohdDdi => BIOHD_DDI_ALPHABET,
        }
    }

    pub fn size(&self) -> usize {
        self.alphabet().len()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.alphabet().iter().position(|&t| t == tag)
    }

    pub fn outside_index(&self) -> usize {
        self.size() - 1
    }

    /// Whether tags carry an interaction category.
    pub fn is_fine(&self) -> bool {
        matches!(self, TagScheme::BiohdDdi)
    }
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which of the three non-`O` tag families a tag belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagFamily {
    /// Plain `B`/`I`: contiguous mention with no sharing.
    Plain,
    /// `H-*`: the non-shared portion of an overlapping mention.
    Overlap,
    /// `D-*`: the portion shared by several mentions.
    Shared,
}

/// A structurally parsed tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Mark { family: TagFamily, begin: bool, ddi: Option<DdiType> },
}

impl Tag {
    pub fn parse(s: &str) -> Result<Tag, CodecError> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (base, ddi) = match s.rsplit_once('-') {
            Some((head, tail)) if DdiType::parse(tail).is_some() => {
                (head, Some(DdiType::parse(tail).unwrap()))
            }
            _ => (s, None),
        };
        let (family, begin) = match base {
            "B" => (TagFamily::Plain, true),
            "I" => (TagFamily::Plain, false),
            "H-B" => (TagFamily::Overlap, true),
            "H-I" => (TagFamily::Overlap, false),
            "D-B" => (TagFamily::Shared, true),
            "D-I" => (TagFamily::Shared, false),
            _ => return Err(CodecError::MalformedTag { tag: s.to_string() }),
        };
        Ok(Tag::Mark { family, begin, ddi })
    }

    pub fn render(&self) -> String {
        match self {
            Tag::Outside => "O".to_string(),
            Tag::Mark { family, begin, ddi } => {
                let base = match (family, begin) {
                    (TagFamily::Plain, true) => "B",
                    (TagFamily::Plain, false) => "I",
                    (TagFamily::Overlap, true) => "H-B",
                    (TagFamily::Overlap, false) => "H-I",
                    (TagFamily::Shared, true) => "D-B",
                    (TagFamily::Shared, false) => "D-I",
                };
                match ddi {
                    Some(d) => format!("{base}-{d}"),
                    None => base.to_string(),
                }
            }
        }
    }

    pub fn ddi(&self) -> Option<DdiType> {
        match self {
            Tag::Outside => None,
            Tag::Mark { ddi, .. } => *ddi,
        }
    }
}

/// One tag string per token of a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub scheme: TagScheme,
    pub tags: Vec<String>,
}

impl TagSequence {
    pub fn new(scheme: TagScheme, tags: Vec<String>) -> Self {
        TagSequence { scheme, tags }
    }

    /// Builds a sequence from alphabet indices (the tagger's native output).
    pub fn from_indices(scheme: TagScheme, indices: &[usize]) -> Self {
        let alphabet = scheme.alphabet();
        TagSequence {
            scheme,
            tags: indices.iter().map(|&i| alphabet[i].to_string()).collect(),
        }
    }

    pub fn all_outside(scheme: TagScheme, len: usize) -> Self {
        TagSequence { scheme, tags: vec!["O".to_string(); len] }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Alphabet indices of the tags; errors on a tag outside the alphabet.
    pub fn indices(&self) -> Result<Vec<usize>, CodecError> {
        self.tags
            .iter()
            .map(|t| {
                self.scheme.index_of(t).ok_or_else(|| CodecError::UnknownTag {
                    tag: t.clone(),
                    scheme: self.scheme,
                })
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("mention set not representable in {scheme}: {reason}")]
    Unrepresentable { scheme: TagScheme, reason: String },
    #[error("tag {tag:?} is not in the {scheme} alphabet")]
    UnknownTag { tag: String, scheme: TagScheme },
    #[error("malformed tag string {tag:?}")]
    MalformedTag { tag: String },
    #[error("length mismatch: {expected} tokens but {found} tags")]
    LengthMismatch { expected: usize, found: usize },
}

impl CodecError {
    pub(crate) fn unrepresentable(scheme: TagScheme, reason: impl Into<String>) -> Self {
        CodecError::Unrepresentable { scheme, reason: reason.into() }
    }
}

/// Joins a base tag with an interaction category: `("H-I", PD)` → `H-I-PD`.
/// The base must be one of the six non-`O` BIOHD tags.
pub fn fine_tag(base: &str, ddi: DdiType) -> Result<String, CodecError> {
    match base {
        "B" | "I" | "H-B" | "H-I" | "D-B" | "D-I" => Ok(format!("{base}-{ddi}")),
        other => Err(CodecError::MalformedTag { tag: other.to_string() }),
    }
}

/// Exact inverse of [`fine_tag`]; `O` maps to `("O", None)`.
pub fn split_fine_tag(tag: &str) -> Result<(&str, Option<DdiType>), CodecError> {
    if tag == "O" {
        return Ok(("O", None));
    }
    let (base, suffix) = tag
        .rsplit_once('-')
        .ok_or_else(|| CodecError::MalformedTag { tag: tag.to_string() })?;
    let ddi =
        DdiType::parse(suffix).ok_or_else(|| CodecError::MalformedTag { tag: tag.to_string() })?;
    match base {
        "B" | "I" | "H-B" | "H-I" | "D-B" | "D-I" => Ok((base, Some(ddi))),
        _ => Err(CodecError::MalformedTag { tag: tag.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_sizes_are_fixed() {
        assert_eq!(TagScheme::Bio.size(), 3);
        assert_eq!(TagScheme::Biohd.size(), 7);
        assert_eq!(TagScheme::BiohdDdi.size(), 19);
    }

    #[test]
    fn fine_alphabet_is_six_bases_times_three_types_plus_outside() {
        let mut expected = Vec::new();
        for base in ["B", "I", "H-B", "H-I", "D-B", "D-I"] {
            for ddi in DdiType::ALL {
                expected.push(fine_tag(base, ddi).unwrap());
            }
        }
        expected.push("O".to_string());
        assert_eq!(TagScheme::BiohdDdi.alphabet().to_vec(), expected);
        assert_eq!(TagScheme::BiohdDdi.outside_index(), 18);
    }

    #[test]
    fn fine_tag_round_trips() {
        assert_eq!(fine_tag("B", DdiType::Pk).unwrap(), "B-PK");
        assert_eq!(split_fine_tag("H-I-PD").unwrap(), ("H-I", Some(DdiType::Pd)));
        assert_eq!(split_fine_tag("O").unwrap(), ("O", None));
        assert!(split_fine_tag("H-I").is_err());
        assert!(split_fine_tag("X-PK").is_err());
        assert!(fine_tag("O", DdiType::Pk).is_err());
        for tag in TagScheme::BiohdDdi.alphabet() {
            let (base, ddi) = split_fine_tag(tag).unwrap();
            match ddi {
                Some(d) => assert_eq!(&fine_tag(base, d).unwrap(), tag),
                None => assert_eq!(*tag, "O"),
            }
        }
    }

    #[test]
    fn tag_parse_render_round_trips_every_alphabet_entry() {
        for scheme in [TagScheme::Bio, TagScheme::Biohd, TagScheme::BiohdDdi] {
            for (i, s) in scheme.alphabet().iter().enumerate() {
                let tag = Tag::parse(s).unwrap();
                assert_eq!(tag.render(), **s);
                assert_eq!(scheme.index_of(s), Some(i));
            }
        }
        assert!(Tag::parse("Q").is_err());
        assert!(Tag::parse("B-XX").is_err());
    }

    #[test]
    fn sequence_indices_round_trip() {
        let seq = TagSequence::from_indices(TagScheme::Biohd, &[0, 1, 6, 4]);
        assert_eq!(seq.tags, vec!["B", "I", "O", "D-B"]);
        assert_eq!(seq.indices().unwrap(), vec![0, 1, 6, 4]);
        let bad = TagSequence::new(TagScheme::Bio, vec!["H-B".into()]);
        assert!(bad.indices().is_err());
    }
}
