use super::types::Token;

/// Splits a sentence into tokens with character offsets.
///
/// Rules:
/// * split on whitespace first;
/// * a chunk containing no alphabetic character is kept whole
///   (`86%`, `1.5`, `--`);
/// * otherwise leading and trailing non-alphanumeric characters are peeled
///   off as single-character tokens (`KETOCONAZOLE.` becomes
///   `KETOCONAZOLE` followed by `.`; `(digoxin)` becomes `(`, `digoxin`,
///   `)`), while interior punctuation such as hyphens stays attached
///   (`beta-blockers`, `3,4-dihydro`).
pub fn tokenize(raw: &str) -> Vec<Token> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        push_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn push_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let has_alpha = chars[start..end].iter().any(|c| c.is_alphabetic());
    if !has_alpha {
        out.push(make_token(chars, start, end));
        return;
    }
    let mut core_start = start;
    let mut core_end = end;
    while core_start < core_end && !chars[core_start].is_alphanumeric() {
        core_start += 1;
    }
    while core_end > core_start && !chars[core_end - 1].is_alphanumeric() {
        core_end -= 1;
    }
    for j in start..core_start {
        out.push(make_token(chars, j, j + 1));
    }
    if core_start < core_end {
        out.push(make_token(chars, core_start, core_end));
    }
    for j in core_end..end {
        out.push(make_token(chars, j, j + 1));
    }
}

fn make_token(chars: &[char], start: usize, end: usize) -> Token {
    Token { text: chars[start..end].iter().collect(), start, end }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(raw: &str) -> Vec<String> {
        tokenize(raw).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn plain_words_split_on_whitespace() {
        assert_eq!(texts("digoxin levels rise"), vec!["digoxin", "levels", "rise"]);
    }

    #[test]
    fn trailing_punctuation_is_peeled() {
        assert_eq!(
            texts("Coadministration of KETOCONAZOLE."),
            vec!["Coadministration", "of", "KETOCONAZOLE", "."]
        );
    }

    #[test]
    fn wrapping_punctuation_is_peeled_per_character() {
        assert_eq!(texts("(e.g., digoxin)"), vec!["(", "e.g", ".", ",", "digoxin", ")"]);
    }

    #[test]
    fn non_alphabetic_chunks_stay_whole() {
        assert_eq!(texts("increased 86% (p<0.05)"), vec!["increased", "86%", "(", "p<0.05", ")"]);
    }

    #[test]
    fn internal_hyphens_survive() {
        assert_eq!(texts("beta-blockers, too"), vec!["beta-blockers", ",", "too"]);
    }

    #[test]
    fn offsets_are_char_based_and_exclusive() {
        let toks = tokenize("a bc.");
        assert_eq!(toks[0], Token { text: "a".into(), start: 0, end: 1 });
        assert_eq!(toks[1], Token { text: "bc".into(), start: 2, end: 4 });
        assert_eq!(toks[2], Token { text: ".".into(), start: 4, end: 5 });
    }

    #[test]
    fn empty_and_whitespace_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }
}
