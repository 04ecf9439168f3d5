//! Evasion normalization: five ordered rewrite rules, each edit recorded so
//! the trace replays deterministically and positions can be mapped back.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::OnceLock;
use unicode_normalization::UnicodeNormalization;

use crate::symbols::is_symbol_char;

const CONFUSABLES_TSV: &str = include_str!("../../data/confusables.tsv");

const ZERO_WIDTH: [char; 5] = ['\u{200B}', '\u{200C}', '\u{200D}', '\u{FEFF}', '\u{2060}'];

/// One in-place rewrite. `offset` is a char offset valid in the working
/// string at the moment the edit is applied (edits replay sequentially).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationEdit {
    pub offset: usize,
    pub original: String,
    pub replacement: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationTrace {
    pub normalized_text: String,
    pub edits: Vec<NormalizationEdit>,
}

impl NormalizationTrace {
    /// Replays the edit list over `original`; equals normalized_text.
    pub fn replay(&self, original: &str) -> String {
        let mut work: Vec<char> = original.chars().collect();
        for e in &self.edits {
            let old_len = e.original.chars().count();
            let tail: Vec<char> = work.drain(e.offset..).collect();
            work.extend(e.replacement.chars());
            work.extend(tail.into_iter().skip(old_len));
        }
        work.into_iter().collect()
    }

    /// Maps a char position in normalized_text back to the input string.
    /// Positions inside a replacement snap to the edit's start.
    pub fn map_back(&self, pos: usize) -> usize {
        let mut p = pos;
        for e in self.edits.iter().rev() {
            let new_len = e.replacement.chars().count();
            let old_len = e.original.chars().count();
            if p >= e.offset + new_len {
                p = p - new_len + old_len;
            } else if p > e.offset {
                p = e.offset;
            }
        }
        p
    }
}

fn confusable_map() -> &'static HashMap<char, String> {
    static MAP: OnceLock<HashMap<char, String>> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut map = HashMap::new();
        for line in CONFUSABLES_TSV.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((code, replacement)) = line.split_once('\t') else {
                continue;
            };
            let Some(hex) = code.strip_prefix("U+") else {
                continue;
            };
            let Ok(cp) = u32::from_str_radix(hex, 16) else {
                continue;
            };
            let Some(c) = char::from_u32(cp) else {
                continue;
            };
            map.insert(c, replacement.to_string());
        }
        map
    })
}

/// Planned rewrite on a snapshot: (char index, chars replaced, replacement).
type Planned = (usize, usize, String);

/// Applies non-overlapping ascending rewrites, recording each edit with its
/// offset in the evolving string.
fn apply_planned(
    chars: &[char],
    planned: Vec<Planned>,
    rule: &str,
    edits: &mut Vec<NormalizationEdit>,
) -> Vec<char> {
    if planned.is_empty() {
        return chars.to_vec();
    }
    let mut out: Vec<char> = Vec::with_capacity(chars.len());
    let mut consumed = 0;
    let mut delta: isize = 0;
    for (idx, old_len, replacement) in planned {
        out.extend_from_slice(&chars[consumed..idx]);
        let original: String = chars[idx..idx + old_len].iter().collect();
        edits.push(NormalizationEdit {
            offset: (idx as isize + delta) as usize,
            original,
            replacement: replacement.clone(),
            rule: rule.to_string(),
        });
        let new_len = replacement.chars().count() as isize;
        delta += new_len - old_len as isize;
        out.extend(replacement.chars());
        consumed = idx + old_len;
    }
    out.extend_from_slice(&chars[consumed..]);
    out
}

/// Rule 1: fold characters whose compatibility decomposition is pure ASCII
/// alphanumeric (fullwidth and stylized letters/digits).
fn plan_ascii_fold(chars: &[char]) -> Vec<Planned> {
    let mut planned = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii() {
            continue;
        }
        let folded: String = c.nfkc().collect();
        if folded.chars().all(|f| f.is_ascii_alphanumeric())
            && !folded.is_empty()
            && folded != c.to_string()
        {
            planned.push((i, 1, folded));
        }
    }
    planned
}

/// Rule 2: embedded confusables table (lookalikes to Latin, circled and
/// parenthesized digits to digits).
fn plan_confusables(chars: &[char]) -> Vec<Planned> {
    let map = confusable_map();
    chars
        .iter()
        .enumerate()
        .filter_map(|(i, c)| map.get(c).map(|r| (i, 1, r.clone())))
        .collect()
}

/// Rule 3: '。' or '点' flanked by ASCII alphanumerics becomes '.'.
fn plan_dot_disguise(chars: &[char]) -> Vec<Planned> {
    let mut planned = Vec::new();
    for i in 1..chars.len().saturating_sub(1) {
        if (chars[i] == '。' || chars[i] == '点')
            && chars[i - 1].is_ascii_alphanumeric()
            && chars[i + 1].is_ascii_alphanumeric()
        {
            planned.push((i, 1, ".".to_string()));
        }
    }
    planned
}

/// Rule 4: zero-width and joiner characters removed.
fn plan_zero_width(chars: &[char]) -> Vec<Planned> {
    chars
        .iter()
        .enumerate()
        .filter(|(_, c)| ZERO_WIDTH.contains(c))
        .map(|(i, _)| (i, 1, String::new()))
        .collect()
}

/// Rule 5: decorative symbol characters stitched into one contact-like
/// token are removed. A decorated token is alnum runs joined by single
/// symbol chars; all its separators go when the merged run has at least 5
/// chars and is all digits or starts with a letter.
fn plan_decoration_strip(chars: &[char]) -> Vec<Planned> {
    let mut planned = Vec::new();
    let n = chars.len();
    let mut i = 0;
    while i < n {
        if !chars[i].is_ascii_alphanumeric() {
            i += 1;
            continue;
        }
        // Parse a decorated token starting at the first alnum run.
        let start = i;
        let mut merged = String::new();
        let mut separators: Vec<usize> = Vec::new();
        let mut j = i;
        loop {
            while j < n && chars[j].is_ascii_alphanumeric() {
                merged.push(chars[j]);
                j += 1;
            }
            if j + 1 < n
                && is_symbol_char(chars[j])
                && chars[j + 1].is_ascii_alphanumeric()
            {
                separators.push(j);
                j += 1;
                continue;
            }
            break;
        }
        let _ = start;
        if !separators.is_empty() {
            let all_digits = merged.chars().all(|c| c.is_ascii_digit());
            let letter_start = merged.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
            if merged.chars().count() >= 5 && (all_digits || letter_start) {
                for s in separators {
                    planned.push((s, 1, String::new()));
                }
            }
        }
        i = j.max(i + 1);
    }
    planned
}

/// Runs the five normalization rules in order, recording every edit. The
/// ordered pass repeats until it stabilizes: a later rule's rewrite can
/// expose a new match for an earlier one (a removed joiner may join the
/// alphanumeric runs around a disguised dot), and idempotence is promised.
pub fn normalize_evasions(text: &str) -> NormalizationTrace {
    let mut edits = Vec::new();
    let mut chars: Vec<char> = text.chars().collect();

    // Every rewrite shrinks the text or lands in the rules' fixpoint
    // alphabet, so a few rounds always suffice; the cap is a guard.
    for _ in 0..8 {
        let before = edits.len();
        chars = apply_planned(&chars, plan_ascii_fold(&chars), "ascii_fold", &mut edits);
        chars = apply_planned(&chars, plan_confusables(&chars), "confusables", &mut edits);
        chars = apply_planned(&chars, plan_dot_disguise(&chars), "dot_disguise", &mut edits);
        chars = apply_planned(&chars, plan_zero_width(&chars), "zero_width", &mut edits);
        chars = apply_planned(
            &chars,
            plan_decoration_strip(&chars),
            "decoration_strip",
            &mut edits,
        );
        if edits.len() == before {
            break;
        }
    }

    NormalizationTrace {
        normalized_text: chars.into_iter().collect(),
        edits,
    }
}
