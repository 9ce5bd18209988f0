//! Extraction of drug-drug-interaction mentions and interaction types from
//! drug-label sentences.
//!
//! The crate is organized around a three-stage tagging pipeline:
//!
//! 1. a sequence tagger finds precipitant drugs in each sentence,
//! 2. a second tagger, anchored on each precipitant, finds its trigger
//!    phrase and the interaction type (PK / PD / UN) in one pass,
//! 3. a third tagger recovers the real trigger of PD interactions, whose
//!    second-step target is the specific-interaction phrase.
//!
//! Supporting pieces: the [`codec`] module encodes possibly-discontinuous
//! mention sets to per-token tag sequences and back, [`features`] builds
//! per-token model inputs, [`tagger`] is a CNN-encoder / BiGRU-decoder
//! sequence labeler trained with Adadelta and decoded with beam search,
//! [`pksubtype`] classifies pharmacokinetic interactions into a 20-code
//! grid with keyword dictionaries, [`ensemble`] combines three taggers by
//! cross-model sequence rescoring, and [`eval`] scores predictions against
//! gold annotations.

pub mod codec;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod pksubtype;
pub mod tagger;

pub use codec::{decode, encode, Tag, TagScheme, TagSequence};
pub use corpus::{DdiType, Document, Interaction, Mention, MentionKind, Sentence, Span, Token};
pub use eval::{evaluate_corpus, CorpusEval, MatchCounts};
pub use features::{FeatureRow, PositionFeature, ShapeClass, Vocab};
pub use pksubtype::PkSubtype;
pub use tagger::{TaggerConfig, TaggerModel};
