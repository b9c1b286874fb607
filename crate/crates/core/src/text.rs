//! Tokenization shared by chunking, keyword extraction and the built-in embedder.
//!
//! Two notions of token exist:
//!
//! - a *word* is a whitespace-delimited run, used for chunk and prompt budgets;
//! - a *term* is a lowercase alphanumeric run that is not a stop-word and is
//!   longer than one character (digits are always kept), used for keywords and
//!   hashing.

use std::collections::HashSet;
use std::sync::OnceLock;

static STOP_WORDS_LIST: &str = include_str!("ingest/stopwords.txt");
static STOP_WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();

/// The fixed English stop-word list shipped with the crate.
pub fn stop_words() -> &'static HashSet<&'static str> {
    STOP_WORDS.get_or_init(|| {
        STOP_WORDS_LIST
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

pub fn is_stop_word(term: &str) -> bool {
    stop_words().contains(term)
}

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercase content terms in order of appearance, duplicates kept.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|raw| !raw.is_empty())
        .map(str::to_lowercase)
        .filter(|t| keep_term(t))
        .collect()
}

fn keep_term(term: &str) -> bool {
    if is_stop_word(term) {
        return false;
    }
    term.chars().count() > 1 || term.chars().all(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_list_has_expected_size() {
        let n = stop_words().len();
        assert!((110..=140).contains(&n), "stop list size {n}");
        assert!(is_stop_word("a"));
        assert!(is_stop_word("this"));
        assert!(!is_stop_word("database"));
    }

    #[test]
    fn terms_lowercase_and_filter() {
        assert_eq!(
            terms("What's an Index? COSC-404, B+Tree"),
            vec!["index", "cosc", "404", "tree"]
        );
        assert!(terms("a a a").is_empty());
        assert_eq!(terms("x 7"), vec!["7"]);
    }

    #[test]
    fn word_count_uses_whitespace() {
        assert_eq!(word_count("  one\ttwo\nthree  "), 3);
        assert_eq!(word_count(""), 0);
    }
}
