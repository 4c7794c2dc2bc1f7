//! Shared text utilities: word tokenization, the pinned stopword list,
//! set overlap and char/byte offset conversion.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

const STOPWORDS_SRC: &str = include_str!("../data/stopwords.txt");

fn parse_word_list(src: &str) -> HashSet<&str> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| parse_word_list(STOPWORDS_SRC))
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercased alphanumeric word tokens, in order.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercased word tokens with stopwords removed, in order (duplicates kept).
pub fn content_words(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).collect()
}

pub fn content_word_set(text: &str) -> BTreeSet<String> {
    content_words(text).into_iter().collect()
}

/// |a ∩ b| / |a ∪ b|; two empty sets are defined to overlap fully.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// 64-bit FNV-1a. Used wherever a hash must be stable across builds and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `char_idx`-th character; `char_len` maps to `text.len()`.
pub fn byte_offset(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .nth(char_idx)
}

/// Substring by char range `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(text, start)?;
    let b1 = byte_offset(text, end)?;
    text.get(b0..b1)
}

/// Char range of the first case-insensitive occurrence of `needle` in `haystack`.
pub fn find_case_insensitive(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    // One char in, one char out, so char indices stay aligned with the original.
    let fold = |c: char| c.to_lowercase().next().unwrap_or(c);
    let needle: Vec<char> = needle.chars().map(fold).collect();
    if needle.is_empty() {
        return None;
    }
    let hay: Vec<char> = haystack.chars().map(fold).collect();
    if needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len())
        .find(|&i| hay[i..i + needle.len()] == needle[..])
        .map(|i| (i, i + needle.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn stopword_list_is_pinned() {
        assert_eq!(stopwords().len(), 148);
        assert!(is_stopword("the"));
        assert!(!is_stopword("danson"));
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&["x"]), &set(&["y"])), 0.0);
        assert_eq!(jaccard(&set(&["x", "y"]), &set(&["x", "y"])), 1.0);
    }

    #[test]
    fn content_words_drop_stopwords_and_punctuation() {
        assert_eq!(
            content_words("The series, The Good Place!"),
            vec!["series", "good", "place"]
        );
    }

    #[test]
    fn char_offsets_handle_multibyte() {
        let s = "São Paulo is big";
        assert_eq!(char_slice(s, 0, 9), Some("São Paulo"));
        assert_eq!(char_slice(s, 13, 16), Some("big"));
        assert_eq!(byte_offset(s, 16), Some(s.len()));
        assert_eq!(byte_offset(s, 17), None);
    }

    #[test]
    fn find_is_case_insensitive() {
        assert_eq!(find_case_insensitive("Paris is nice", "paris"), Some((0, 5)));
        assert_eq!(find_case_insensitive("in São Paulo", "são paulo"), Some((3, 12)));
        assert_eq!(find_case_insensitive("abc", "zz"), None);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
