//! Hand-rolled URL scanner over free text. The grammar is deliberately
//! narrow: optional http(s) scheme, a host of two or more dot-separated
//! labels whose final label is a known TLD, then optional port, path, and
//! query. Longest match wins and matches never overlap.

use crate::domains::known_tld;

/// Char-offset span, half-open [start, end).
pub type Span = (usize, usize);

pub fn extract_urls(text: &str) -> Vec<(String, Span)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !can_start(&chars, i) {
            i += 1;
            continue;
        }
        match match_url(&chars, i) {
            Some(end) => {
                let url: String = chars[i..end].iter().collect();
                out.push((url, (i, end)));
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

/// A match may only begin at a token boundary, never inside an alphanumeric
/// or dotted run (blocks matching "com.zz" inside "a.com.zz").
fn can_start(chars: &[char], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let prev = chars[i - 1];
    !(prev.is_ascii_alphanumeric() || prev == '.')
}

/// Attempts a URL starting at `start`; returns the exclusive end on success.
fn match_url(chars: &[char], start: usize) -> Option<usize> {
    let mut i = start;
    if let Some(after) = match_scheme(chars, i) {
        i = after;
    }
    i = match_host(chars, i)?;
    if let Some(after) = match_port(chars, i) {
        i = after;
    }
    if i < chars.len() && chars[i] == '/' {
        i += 1;
        i = consume_path_chars(chars, i);
    }
    if i < chars.len() && chars[i] == '?' {
        i += 1;
        i = consume_path_chars(chars, i);
    }
    // Sentence punctuation that trails the match belongs to the prose.
    while i > start && matches!(chars[i - 1], '.' | ',' | ';' | ':' | '!' | '?') {
        i -= 1;
    }
    Some(i)
}

fn match_scheme(chars: &[char], i: usize) -> Option<usize> {
    for scheme in ["https://", "http://"] {
        let s: Vec<char> = scheme.chars().collect();
        if chars.len() - i >= s.len()
            && chars[i..i + s.len()]
                .iter()
                .zip(&s)
                .all(|(a, b)| a.eq_ignore_ascii_case(b))
        {
            return Some(i + s.len());
        }
    }
    None
}

/// Host = 2+ labels, final label a known TLD. Greedy, then backs off from
/// the right until the final label validates.
fn match_host(chars: &[char], start: usize) -> Option<usize> {
    let mut label_ends: Vec<usize> = Vec::new();
    let mut label_starts: Vec<usize> = Vec::new();
    let mut i = start;
    loop {
        let ls = i;
        while i < chars.len() && is_label_char(chars[i]) {
            i += 1;
        }
        if i == ls || chars[ls] == '-' || chars[i - 1] == '-' {
            break;
        }
        label_starts.push(ls);
        label_ends.push(i);
        if i + 1 < chars.len() && chars[i] == '.' && is_label_char(chars[i + 1]) {
            i += 1;
            continue;
        }
        break;
    }
    // Back off until the trailing label is a listed TLD.
    while label_ends.len() >= 2 {
        let k = label_ends.len() - 1;
        let last: String = chars[label_starts[k]..label_ends[k]]
            .iter()
            .collect::<String>()
            .to_ascii_lowercase();
        if known_tld(&last) {
            return Some(label_ends[k]);
        }
        label_ends.pop();
        label_starts.pop();
    }
    None
}

fn match_port(chars: &[char], i: usize) -> Option<usize> {
    if i >= chars.len() || chars[i] != ':' {
        return None;
    }
    let mut j = i + 1;
    while j < chars.len() && chars[j].is_ascii_digit() && j - i <= 5 {
        j += 1;
    }
    if j == i + 1 {
        None
    } else {
        Some(j)
    }
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-'
}

fn consume_path_chars(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && is_path_char(chars[i]) {
        i += 1;
    }
    i
}

fn is_path_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
        || matches!(
            c,
            '-' | '.' | '_' | '~' | '%' | '/' | '+' | '&' | '=' | ':' | '@' | '!' | '$' | '*'
                | ',' | ';'
        )
}
