//! Hand-crafted feature vectors for the binary IPT classifier and the
//! contact-segment classifier. Token counting is longest-match-first,
//! non-overlapping, left-to-right, over case-folded text.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::extract::urls::extract_urls;
use crate::symbols::is_symbol_char;

pub const BINARY_BRACKETS: [char; 8] = ['{', '}', '[', ']', '【', '】', '『', '』'];

pub const IM_PATTERNS: [&str; 17] = [
    "微信", "q微", "扣微", "微", "薇", "扣扣", "qq", "www", "com", "fun", "cc", "tg",
    "telegram", "飞机", "@", "网", "V信",
];

pub const CONTACT_INDICATORS: [&str; 17] = [
    "微信", "q微", "扣微", "微", "薇", "扣扣", "qq", "com", "fun", "cc", "hash", "tg",
    "telegram", "飞机", "@", "网", "复制",
];

pub const FILE_SUFFIXES: [&str; 12] = [
    ".html", ".shtml", ".htm", ".php", ".pdf", ".jpg", ".jpeg", ".png", ".xlsx", ".docx",
    ".pptx", ".xml",
];

pub const SEPARATOR_PUNCT: [char; 6] = ['.', ':', '：', '·', 'ͺ', '-'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryIptFeatures {
    pub char_len: u32,
    pub bracket_count: u32,
    pub url_count: u32,
    pub digit_count: u32,
    pub symbol_count: u32,
    pub im_pattern_count: u32,
    pub has_file_suffix: bool,
}

impl BinaryIptFeatures {
    pub const DIM: usize = 7;

    /// Fixed serialization order for model I/O.
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.char_len as f64,
            self.bracket_count as f64,
            self.url_count as f64,
            self.digit_count as f64,
            self.symbol_count as f64,
            self.im_pattern_count as f64,
            if self.has_file_suffix { 1.0 } else { 0.0 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContactSegmentFeatures {
    pub char_len: u32,
    pub url_count: u32,
    pub non_alnum_count: u32,
    pub alnum_count: u32,
    pub digit_count: u32,
    pub contact_indicator_count: u32,
    pub separator_punct_count: u32,
    pub has_file_suffix: bool,
}

impl ContactSegmentFeatures {
    pub const DIM: usize = 8;

    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.char_len as f64,
            self.url_count as f64,
            self.non_alnum_count as f64,
            self.alnum_count as f64,
            self.digit_count as f64,
            self.contact_indicator_count as f64,
            self.separator_punct_count as f64,
            if self.has_file_suffix { 1.0 } else { 0.0 },
        ]
    }
}

pub fn binary_ipt_features(text: &str) -> BinaryIptFeatures {
    let mut f = BinaryIptFeatures::default();
    for c in text.chars() {
        f.char_len += 1;
        if BINARY_BRACKETS.contains(&c) {
            f.bracket_count += 1;
        }
        if c.is_ascii_digit() {
            f.digit_count += 1;
        }
        if is_symbol_char(c) {
            f.symbol_count += 1;
        }
    }
    f.url_count = extract_urls(text).len() as u32;
    f.im_pattern_count = count_tokens(text, im_tokens());
    f.has_file_suffix = has_any_suffix(text);
    f
}

pub fn contact_segment_features(segment: &str) -> ContactSegmentFeatures {
    let mut f = ContactSegmentFeatures::default();
    for c in segment.chars() {
        f.char_len += 1;
        if c.is_alphanumeric() {
            f.alnum_count += 1;
        } else {
            f.non_alnum_count += 1;
        }
        if c.is_ascii_digit() {
            f.digit_count += 1;
        }
        if SEPARATOR_PUNCT.contains(&c) {
            f.separator_punct_count += 1;
        }
    }
    f.url_count = extract_urls(segment).len() as u32;
    f.contact_indicator_count = count_tokens(segment, contact_tokens());
    f.has_file_suffix = has_any_suffix(segment);
    f
}

/// Tokens as lowercase char slices, longest first (stable within a length).
fn sorted_tokens(raw: &[&str]) -> Vec<Vec<char>> {
    let mut toks: Vec<Vec<char>> = raw
        .iter()
        .map(|t| t.to_lowercase().chars().collect())
        .collect();
    toks.sort_by_key(|t| std::cmp::Reverse(t.len()));
    toks
}

fn im_tokens() -> &'static [Vec<char>] {
    static T: OnceLock<Vec<Vec<char>>> = OnceLock::new();
    T.get_or_init(|| sorted_tokens(&IM_PATTERNS))
}

fn contact_tokens() -> &'static [Vec<char>] {
    static T: OnceLock<Vec<Vec<char>>> = OnceLock::new();
    T.get_or_init(|| sorted_tokens(&CONTACT_INDICATORS))
}

fn count_tokens(text: &str, tokens: &[Vec<char>]) -> u32 {
    let lower: Vec<char> = text.to_lowercase().chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i < lower.len() {
        let mut advanced = false;
        for tok in tokens {
            if lower.len() - i >= tok.len() && lower[i..i + tok.len()] == tok[..] {
                count += 1;
                i += tok.len();
                advanced = true;
                break;
            }
        }
        if !advanced {
            i += 1;
        }
    }
    count
}

fn has_any_suffix(text: &str) -> bool {
    let lower = text.to_lowercase();
    FILE_SUFFIXES.iter().any(|s| lower.contains(s))
}
