//! Small text utilities shared across stages.

use crate::corpus::Segmentation;

/// Lowercases alphabetic characters; other scripts pass through unchanged.
pub fn fold_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_alphabetic() {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Splits text into tokens according to `seg`. Whitespace never appears in a token.
pub fn tokenize(text: &str, seg: Segmentation) -> Vec<&str> {
    match seg {
        Segmentation::Whitespace => text.split_whitespace().collect(),
        Segmentation::Codepoint => text
            .char_indices()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
    }
}
