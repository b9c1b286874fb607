use tracing::warn;

use super::session::Message;
use crate::llm::ChatProvider;

const MARKERS: &[&[&str]] = &[
    &["this"],
    &["that"],
    &["it"],
    &["these"],
    &["those"],
    &["why"],
    &["how", "come"],
    &["my", "first", "question"],
];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whether the question leans on earlier turns ("why do we need this?").
pub fn is_anaphoric(question: &str) -> bool {
    let words = words(question);
    MARKERS.iter().any(|marker| {
        words
            .windows(marker.len())
            .any(|w| w.iter().map(String::as_str).eq(marker.iter().copied()))
    })
}

/// Rewrites a follow-up into a standalone query. Provider failures fall back
/// to the original question.
pub fn condense_query(history: &[Message], question: &str, provider: &dyn ChatProvider) -> String {
    if history.is_empty() || !is_anaphoric(question) {
        return question.to_string();
    }
    match provider.condense(history, question) {
        Ok(rewritten) if !rewritten.trim().is_empty() => rewritten.trim().to_string(),
        Ok(_) => question.to_string(),
        Err(e) => {
            warn!(error = %e, "condensation failed, using the original question");
            question.to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockProvider;

    #[test]
    fn marker_detection() {
        assert!(is_anaphoric("Why do we need this?"));
        assert!(is_anaphoric("How come?"));
        assert!(is_anaphoric("WHAT WAS MY FIRST QUESTION"));
        assert!(is_anaphoric("is it required"));
        assert!(!is_anaphoric("What is a hash function?"));
        // word boundaries, not substrings
        assert!(!is_anaphoric("Explain thistle and iterators"));
        assert!(!is_anaphoric("how do I come to class"));
        assert!(!is_anaphoric("my question first"));
    }

    #[test]
    fn identity_without_history_or_markers() {
        let mock = MockProvider::new();
        assert_eq!(condense_query(&[], "Why do we need this?", &mock), "Why do we need this?");
        let history = vec![Message::user("What is a hash function?")];
        assert_eq!(
            condense_query(&history, "What are the midterm dates?", &mock),
            "What are the midterm dates?"
        );
        assert_eq!(mock.total_calls(), 0);
    }

    #[test]
    fn follow_up_rewritten_by_mock() {
        let mock = MockProvider::new();
        let history = vec![Message::user("What is a hash function?")];
        assert_eq!(
            condense_query(&history, "Why do we need this?", &mock),
            "Why do we need this? (What is a hash function?)"
        );
        assert_eq!(mock.condense_calls(), 1);
    }

    #[test]
    fn provider_failure_falls_back() {
        let mock = MockProvider::new();
        mock.set_failing(true);
        let history = vec![Message::user("What is a hash function?")];
        assert_eq!(condense_query(&history, "Why do we need this?", &mock), "Why do we need this?");
    }
}
