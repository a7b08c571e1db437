use std::sync::LazyLock;

use regex::Regex;

// Words keep internal apostrophes and hyphens ("didn't", "well-known");
// every other non-space symbol is its own token.
static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{L}\p{N}]+(?:['’\-][\p{L}\p{N}]+)*|[^\s\p{L}\p{N}]").unwrap()
});

/// Whitespace-plus-punctuation tokenizer. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    TOKEN.find_iter(text).map(|m| m.as_str().to_string()).collect()
}
