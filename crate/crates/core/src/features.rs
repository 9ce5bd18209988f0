//! Per-token feature rows for the sequence taggers.
//!
//! Step 1 (precipitant tagging) anchors its position feature on the
//! label-drug occurrences; steps 2 and 3 (trigger tagging) anchor on the
//! precipitant under consideration. Every row carries the token's
//! vocabulary id, a four-way word-shape class, a coarse distance bucket,
//! and character ids; which of them a model consumes is its own
//! configuration.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Sentence, Span};

/// Four-way word-shape classification.
///
/// Checked in order: no letters at all → `NumPunc`; every letter uppercase
/// → `Upper`; first character an uppercase letter and every other letter
/// lowercase → `UpperFirst`; anything else (including mixed case like
/// "mRNA") → `Lower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    Upper = 0,
    UpperFirst = 1,
    Lower = 2,
    NumPunc = 3,
}

impl ShapeClass {
    pub const COUNT: usize = 4;

    pub fn of(token: &str) -> ShapeClass {
        let mut letters = token.chars().filter(|c| c.is_alphabetic()).peekable();
        if letters.peek().is_none() {
            return ShapeClass::NumPunc;
        }
        if letters.clone().all(|c| c.is_uppercase()) {
            return ShapeClass::Upper;
        }
        let mut chars = token.chars();
        let first_upper = chars.next().is_some_and(|c| c.is_uppercase());
        if first_upper && chars.filter(|c| c.is_alphabetic()).all(|c| c.is_lowercase()) {
            return ShapeClass::UpperFirst;
        }
        ShapeClass::Lower
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Coarse token-to-anchor distance: bucket `floor(d/5)` where `d` counts
/// the tokens strictly between the token and the nearest anchor token
/// (0 inside an anchor), or the sentinel 200 when the sentence has no
/// anchor occurrence at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PositionFeature(pub usize);

impl PositionFeature {
    pub const ABSENT: PositionFeature = PositionFeature(200);
    /// Dense index range for embedding tables: buckets 0..=199 plus the
    /// absent sentinel.
    pub const COUNT: usize = 201;

    pub fn index(self) -> usize {
        self.0
    }
}

/// Returns the position feature of `token_index` relative to the nearest
/// anchor occurrence. Distance is direction-symmetric; with several
/// occurrences the nearest one wins. Buckets are capped at 199 so the
/// sentinel stays unambiguous (a real distance that large never occurs in
/// sentence-sized input).
pub fn distance_bucket(token_index: usize, anchor_occurrences: &[Span]) -> PositionFeature {
    let mut best: Option<usize> = None;
    for span in anchor_occurrences {
        for &(first, last) in &span.fragments {
            let d = if token_index < first {
                first - token_index - 1
            } else if token_index > last {
                token_index - last - 1
            } else {
                0
            };
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    match best {
        None => PositionFeature::ABSENT,
        Some(d) => PositionFeature((d / 5).min(199)),
    }
}

/// One token's model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub word_id: usize,
    pub shape: ShapeClass,
    pub position: PositionFeature,
    pub char_ids: Vec<usize>,
}

/// Word and character index tables with reserved PAD (0) and UNK (1).
///
/// Words are lowercased before lookup — the shape feature carries the case
/// information — and so are characters. Index assignment is first-seen
/// order during fitting, making vocabularies deterministic for a fixed
/// corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: HashMap<String, usize>,
    chars: HashMap<char, usize>,
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const RESERVED: usize = 2;

/// Errors loading a persisted vocabulary.
#[derive(Debug, Error)]
pub enum VocabError {
    #[error("io error reading vocabulary: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vocabulary at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

impl Vocab {
    /// Fits a vocabulary over an iterator of token texts.
    pub fn fit<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut vocab = Vocab { words: HashMap::new(), chars: HashMap::new() };
        for token in tokens {
            let lowered = token.to_lowercase();
            let next = RESERVED + vocab.words.len();
            vocab.words.entry(lowered.clone()).or_insert(next);
            for c in lowered.chars() {
                let next = RESERVED + vocab.chars.len();
                vocab.chars.entry(c).or_insert(next);
            }
        }
        vocab
    }

    /// Number of word indices including PAD and UNK.
    pub fn word_count(&self) -> usize {
        RESERVED + self.words.len()
    }

    /// Number of character indices including PAD and UNK.
    pub fn char_count(&self) -> usize {
        RESERVED + self.chars.len()
    }

    pub fn word_id(&self, token: &str) -> usize {
        self.words.get(&token.to_lowercase()).copied().unwrap_or(UNK_ID)
    }

    pub fn char_ids(&self, token: &str) -> Vec<usize> {
        token
            .to_lowercase()
            .chars()
            .map(|c| self.chars.get(&c).copied().unwrap_or(UNK_ID))
            .collect()
    }

    /// Writes the vocabulary as a plain text file: header lines carrying
    /// the reserved ids, then `<index>\t<token>` entries per section.
    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let mut out = String::new();
        out.push_str(&format!("#PAD\t{PAD_ID}\n#UNK\t{UNK_ID}\n"));
        out.push_str("#WORDS\n");
        for (word, id) in sorted_by_id(&self.words) {
            out.push_str(&format!("{id}\t{word}\n"));
        }
        out.push_str("#CHARS\n");
        for (c, id) in sorted_by_id(&self.chars) {
            out.push_str(&format!("{id}\t{c}\n"));
        }
        let mut file = fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab, VocabError> {
        let text = fs::read_to_string(path)?;
        let mut words = HashMap::new();
        let mut chars = HashMap::new();
        let mut in_chars = false;
        for (i, line) in text.lines().enumerate() {
            let malformed = |msg: &str| VocabError::Malformed { line: i + 1, msg: msg.into() };
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                match header.split('\t').next().unwrap_or("") {
                    "WORDS" => in_chars = false,
                    "CHARS" => in_chars = true,
                    "PAD" | "UNK" => {}
                    other => return Err(malformed(&format!("unknown header {other:?}"))),
                }
                continue;
            }
            let (id, token) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected <index>\\t<token>"))?;
            let id: usize =
                id.parse().map_err(|_| malformed(&format!("bad index {id:?}")))?;
            if id < RESERVED {
                return Err(malformed("entry index collides with PAD/UNK"));
            }
            if in_chars {
                let mut it = token.chars();
                let (Some(c), None) = (it.next(), it.next()) else {
                    return Err(malformed("character entry must be one character"));
                };
                chars.insert(c, id);
            } else {
                words.insert(token.to_string(), id);
            }
        }
        let vocab = Vocab { words, chars };
        if !indices_dense(vocab.words.values()) || !indices_dense(vocab.chars.values()) {
            return Err(VocabError::Malformed {
                line: 0,
                msg: "indices are not dense from 2".into(),
            });
        }
        Ok(vocab)
    }
}

fn indices_dense<'a>(ids: impl Iterator<Item = &'a usize>) -> bool {
    let mut ids: Vec<usize> = ids.copied().collect();
    ids.sort_unstable();
    ids.iter().enumerate().all(|(i, &id)| id == RESERVED + i)
}

fn sorted_by_id<K: Clone + Ord>(table: &HashMap<K, usize>) -> Vec<(K, usize)> {
    let mut entries: Vec<(K, usize)> = table.iter().map(|(k, &v)| (k.clone(), v)).collect();
    entries.sort_by_key(|&(_, id)| id);
    entries
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ShapeClass::Upper => "UPPER",
            ShapeClass::UpperFirst => "UPPER_FIRST",
            ShapeClass::Lower => "LOWER",
            ShapeClass::NumPunc => "NUM_PUNC",
        };
        f.write_str(name)
    }
}

fn build_rows(sentence: &Sentence, anchors: &[Span], vocab: &Vocab) -> Vec<FeatureRow> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(i, token)| FeatureRow {
            word_id: vocab.word_id(&token.text),
            shape: ShapeClass::of(&token.text),
            position: distance_bucket(i, anchors),
            char_ids: vocab.char_ids(&token.text),
        })
        .collect()
}

/// Feature rows for the precipitant tagger: position is anchored on the
/// label-drug occurrences.
pub fn build_step1_features(
    sentence: &Sentence,
    label_drug_occurrences: &[Span],
    vocab: &Vocab,
) -> Vec<FeatureRow> {
    build_rows(sentence, label_drug_occurrences, vocab)
}

/// Feature rows for the trigger taggers: position is anchored on one
/// precipitant.
pub fn build_step2_features(
    sentence: &Sentence,
    precipitant: &Span,
    vocab: &Vocab,
) -> Vec<FeatureRow> {
    build_rows(sentence, std::slice::from_ref(precipitant), vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_corpus;

    #[test]
    fn shapes_partition_all_tokens() {
        assert_eq!(ShapeClass::of("KETOCONAZOLE"), ShapeClass::Upper);
        assert_eq!(ShapeClass::of("86%"), ShapeClass::NumPunc);
        assert_eq!(ShapeClass::of("Aspirin"), ShapeClass::UpperFirst);
        assert_eq!(ShapeClass::of("plasma"), ShapeClass::Lower);
        assert_eq!(ShapeClass::of("mRNA"), ShapeClass::Lower);
        assert_eq!(ShapeClass::of("."), ShapeClass::NumPunc);
        assert_eq!(ShapeClass::of("B-12"), ShapeClass::Upper);
        assert_eq!(ShapeClass::of("Co-administration"), ShapeClass::UpperFirst);
        assert_eq!(ShapeClass::of("half-life"), ShapeClass::Lower);
    }

    #[test]
    fn distance_buckets() {
        // Anchor absent.
        assert_eq!(distance_bucket(3, &[]), PositionFeature::ABSENT);
        let anchor = [Span::contiguous(10, 11)];
        // d = 7: token 2, anchor starts at 10 → 7 tokens strictly between.
        assert_eq!(distance_bucket(2, &anchor), PositionFeature(1));
        // Inside the anchor.
        assert_eq!(distance_bucket(10, &anchor), PositionFeature(0));
        // Boundary d = 5 goes to the upper bucket.
        assert_eq!(distance_bucket(4, &anchor), PositionFeature(1));
        // d = 4 stays in bucket 0; direction-symmetric on the right.
        assert_eq!(distance_bucket(5, &anchor), PositionFeature(0));
        assert_eq!(distance_bucket(16, &anchor), PositionFeature(0));
        assert_eq!(distance_bucket(17, &anchor), PositionFeature(1));
        // Multiple occurrences: nearest wins.
        let anchors = [Span::contiguous(0, 0), Span::contiguous(20, 20)];
        assert_eq!(distance_bucket(19, &anchors), PositionFeature(0));
    }

    #[test]
    fn distance_is_monotone_in_d() {
        let anchor = [Span::contiguous(0, 0)];
        let mut last = 0;
        for t in 1..120 {
            let PositionFeature(b) = distance_bucket(t, &anchor);
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn step1_rows_follow_the_label_drug() {
        let vocab = Vocab::fit(["adoxamil", "increases", "exposure"]);
        let s = Sentence::new("Adoxamil increases exposure");
        let rows = build_step1_features(&s, &[], &vocab);
        assert!(rows.iter().all(|r| r.position == PositionFeature::ABSENT));
        let rows = build_step1_features(&s, &[Span::contiguous(0, 0)], &vocab);
        assert_eq!(rows[0].position, PositionFeature(0));
        assert_eq!(rows[0].word_id, vocab.word_id("Adoxamil"));
        assert_ne!(rows[0].word_id, UNK_ID);
    }

    #[test]
    fn row_count_always_equals_token_count() {
        let corpus = synth_corpus(21, 30);
        let vocab = Vocab::fit(
            corpus
                .iter()
                .flat_map(|d| d.sentences.iter())
                .flat_map(|s| s.tokens.iter())
                .map(|t| t.text.as_str()),
        );
        let mut sentences = 0;
        for doc in &corpus {
            for sentence in &doc.sentences {
                let rows = build_step1_features(sentence, &[], &vocab);
                assert_eq!(rows.len(), sentence.tokens.len());
                sentences += 1;
            }
        }
        assert!(sentences >= 60);
    }

    #[test]
    fn step2_rows_anchor_on_the_precipitant() {
        let vocab = Vocab::fit(["ketoconazole", "increases", "it"]);
        let s = Sentence::new("ketoconazole taken daily with food sharply and measurably increases it");
        let rows = build_step2_features(&s, &Span::contiguous(0, 0), &vocab);
        // Token adjacent to the precipitant: d = 0 → bucket 0.
        assert_eq!(rows[1].position, PositionFeature(0));
        assert_eq!(vocab.char_ids("abc").len(), 3);
        assert!(vocab.char_ids("abc").iter().all(|&c| c != PAD_ID));
        // Two different precipitants: rows differ only in position.
        let a = build_step2_features(&s, &Span::contiguous(0, 0), &vocab);
        let b = build_step2_features(&s, &Span::contiguous(9, 9), &vocab);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.word_id, rb.word_id);
            assert_eq!(ra.shape, rb.shape);
            assert_eq!(ra.char_ids, rb.char_ids);
        }
        assert_ne!(
            a.iter().map(|r| r.position).collect::<Vec<_>>(),
            b.iter().map(|r| r.position).collect::<Vec<_>>()
        );
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let vocab = Vocab::fit(["known"]);
        assert_eq!(vocab.word_id("unknown-token"), UNK_ID);
        assert_eq!(vocab.word_id("KNOWN"), vocab.word_id("known"));
        assert!(vocab.char_ids("zq").iter().any(|&c| c == UNK_ID));
    }

    #[test]
    fn vocab_round_trips_through_disk() {
        let corpus = synth_corpus(5, 10);
        let vocab = Vocab::fit(
            corpus
                .iter()
                .flat_map(|d| d.sentences.iter())
                .flat_map(|s| s.tokens.iter())
                .map(|t| t.text.as_str()),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        vocab.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(loaded, vocab);
        assert_eq!(loaded.word_count(), vocab.word_count());
        assert_eq!(loaded.char_count(), vocab.char_count());
    }

    #[test]
    fn malformed_vocab_files_are_rejected()  {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "#WORDS\nnot-a-row\n").unwrap();
        assert!(matches!(Vocab::load(&path), Err(VocabError::Malformed { line: 2, .. })));
        std::fs::write(&path, "#WORDS\n1\tcollides\n").unwrap();
        assert!(Vocab::load(&path).is_err());
        std::fs::write(&path, "#WORDS\n5\tgap\n").unwrap();
        assert!(Vocab::load(&path).is_err());
    }
}
