//! Case and diacritic folding shared by name keys and lexicons.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Lowercases and strips combining marks after canonical decomposition.
/// Ligatures common in French (œ, æ) are expanded.
pub fn fold(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfd() {
        if is_combining_mark(c) {
            continue;
        }
        match c {
            'œ' | 'Œ' => out.push_str("oe"),
            'æ' | 'Æ' => out.push_str("ae"),
            // typographic apostrophe
            '\u{2019}' => out.push('\''),
            _ => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// Folded first name: [`fold`], then the first component of a hyphenated
/// compound ("Jean-Pierre" -> "jean").
pub fn fold_name(s: &str) -> String {
    let folded = fold(s.trim());
    folded
        .split('-')
        .find(|p| !p.is_empty())
        .unwrap_or("")
        .to_string()
}

pub fn is_punctuation(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric())
}
