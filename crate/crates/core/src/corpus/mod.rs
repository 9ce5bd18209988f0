//! Annotation data model, document file format, foreign-format converter and
//! synthetic corpus generator.
//!
//! A [`Document`] is one drug label: the label drug is a document-level
//! attribute (it is never annotated as a mention), sentences are pre-split
//! and tokenized, and annotations are [`Mention`]s with possibly
//! discontinuous [`Span`]s plus typed [`Interaction`]s tying a precipitant
//! to its trigger and, for PD, its specific interaction.

mod foreign;
mod format;
mod matcher;
mod synth;
mod tokenize;
mod types;

pub use foreign::{
    convert_nlm180, document_to_foreign, parse_foreign_document, serialize_foreign_document,
    ForeignDocument, ForeignInteraction, ForeignMention, ForeignMentionKind,
};
pub use format::{load_corpus_dir, parse_document, serialize_document};
pub use matcher::LabelDrugMatcher;
pub use synth::synth_corpus;
pub use tokenize::tokenize;
pub use types::{
    DdiType, Document, Interaction, Mention, MentionKind, Sentence, Span, Token,
};

use thiserror::Error;

/// Errors produced while parsing, converting or validating documents.
#[derive(Debug, Error)]
pub enum CorpusError {
    /// Malformed input text; `line` and `col` are 1-based.
    #[error("syntax error at line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    /// Structurally well-formed input that violates a data-model invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// A PD record in the foreign format without the auxiliary trigger field.
    #[error("missing PD trigger for interaction with precipitant {0}")]
    MissingPdTrigger(String),
}

impl CorpusError {
    pub(crate) fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        CorpusError::Syntax { line, col, msg: msg.into() }
    }
}
