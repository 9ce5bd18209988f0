use super::tokenize::tokenize;
use super::types::{Document, Span, Token};

/// Finds occurrences of a document's label drug (canonical name or any
/// alias) in tokenized sentences.
///
/// Matching is an exact, case-insensitive comparison of token-text
/// sequences: each name is tokenized with the same tokenizer as the
/// sentences and compared token by token.
#[derive(Debug, Clone)]
pub struct LabelDrugMatcher {
    /// Lowercased token sequences, longest first so the longest match wins
    /// at any given start position.
    patterns: Vec<Vec<String>>,
}

impl LabelDrugMatcher {
    pub fn new(canonical: &str, aliases: &[String]) -> Self {
        let mut patterns: Vec<Vec<String>> = std::iter::once(canonical)
            .chain(aliases.iter().map(|s| s.as_str()))
            .map(|name| {
                tokenize(name).into_iter().map(|t| t.text.to_lowercase()).collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty())
            .collect();
        patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        patterns.dedup();
        LabelDrugMatcher { patterns }
    }

    pub fn for_document(doc: &Document) -> Self {
        LabelDrugMatcher::new(&doc.label_drug, &doc.label_drug_aliases)
    }

    /// All occurrences as contiguous spans. At each start position only the
    /// longest matching pattern is reported; occurrences may overlap.
    pub fn occurrences(&self, tokens: &[Token]) -> Vec<Span> {
        let lowered: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut out = Vec::new();
        for start in 0..lowered.len() {
            if let Some(pat) = self
                .patterns
                .iter()
                .find(|pat| lowered[start..].starts_with(pat.as_slice()))
            {
                out.push(Span::contiguous(start, start + pat.len() - 1));
            }
        }
        out
    }

    /// True when `span` is contiguous and its token texts equal the
    /// canonical name or an alias, case-insensitively.
    pub fn matches_span(&self, tokens: &[Token], span: &Span) -> bool {
        if !span.is_contiguous() {
            return false;
        }
        let (a, b) = span.fragments[0];
        let lowered: Vec<String> =
            tokens[a..=b].iter().map(|t| t.text.to_lowercase()).collect();
        self.patterns.iter().any(|p| p.as_slice() == lowered.as_slice())
    }
}
