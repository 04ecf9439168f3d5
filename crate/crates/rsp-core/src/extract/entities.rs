//! Contact entity extraction: per-kind validation grammars plus the
//! dominant-contact-type classifier that picks which grammar to run.

use crate::error::{Error, Result};
use crate::extract::urls::{extract_urls, Span};
use crate::learn::{train_tree_ensemble, EnsembleParams, TreeEnsembleModel};
use crate::textfeat::SEPARATOR_PUNCT;
use crate::types::{Contact, ContactKind};

/// Tokens that announce a QQ account nearby.
pub const QQ_INDICATORS: [&str; 4] = ["qq", "扣扣", "扣微", "企鹅"];
/// Tokens that announce a Telegram handle nearby.
pub const TELEGRAM_INDICATORS: [&str; 3] = ["tg", "telegram", "飞机"];
/// Tokens that announce a WeChat account nearby.
pub const WECHAT_INDICATORS: [&str; 5] = ["微信", "v信", "微", "薇", "q微"];

/// A candidate account token must start within this many characters after
/// an indicator ends, with only separator punctuation or spaces between.
pub const ADJACENCY_WINDOW: usize = 3;

/// Feature order for the contact-type classifier.
pub const CONTACT_TYPE_FEATURE_NAMES: [&str; 8] = [
    "qq_indicators",
    "wechat_indicators",
    "telegram_indicators",
    "at_signs",
    "qq_digit_runs",
    "phone_digit_runs",
    "urls",
    "plus_signs",
];

/// Class order of the contact-type classifier's label indices.
pub const CONTACT_TYPE_CLASSES: [ContactKind; 6] = [
    ContactKind::Phone,
    ContactKind::Telegram,
    ContactKind::WeChat,
    ContactKind::Qq,
    ContactKind::Website,
    ContactKind::Other,
];

fn ascii_lower_chars(text: &str) -> Vec<char> {
    text.chars().map(|c| c.to_ascii_lowercase()).collect()
}

/// Spans of indicator-token matches, longest token first at each position,
/// non-overlapping, over ASCII-case-folded characters.
fn indicator_spans(lchars: &[char], tokens: &[&str]) -> Vec<Span> {
    let mut toks: Vec<Vec<char>> = tokens
        .iter()
        .map(|t| t.chars().map(|c| c.to_ascii_lowercase()).collect())
        .collect();
    toks.sort_by(|a, b| b.len().cmp(&a.len()));
    let mut out = Vec::new();
    let mut i = 0;
    while i < lchars.len() {
        let mut matched = 0;
        for t in &toks {
            if lchars[i..].starts_with(t) {
                matched = t.len();
                break;
            }
        }
        if matched > 0 {
            out.push((i, i + matched));
            i += matched;
        } else {
            i += 1;
        }
    }
    out
}

/// Maximal ASCII digit runs as (start, end) spans.
fn digit_runs(chars: &[char]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

fn gap_skippable(c: char) -> bool {
    c.is_whitespace() || SEPARATOR_PUNCT.contains(&c)
}

/// True when `pos` is within the adjacency window after some indicator span.
fn adjacent_after(indicators: &[Span], chars: &[char], pos: usize) -> bool {
    indicators.iter().any(|&(_, end)| {
        pos >= end && pos - end <= ADJACENCY_WINDOW && chars[end..pos].iter().all(|&c| gap_skippable(c))
    })
}

/// First non-skippable position after `end`, if it falls inside the window.
fn token_start_after(chars: &[char], end: usize) -> Option<usize> {
    let mut p = end;
    while p < chars.len() && p - end <= ADJACENCY_WINDOW && gap_skippable(chars[p]) {
        p += 1;
    }
    if p < chars.len() && p - end <= ADJACENCY_WINDOW {
        Some(p)
    } else {
        None
    }
}

fn is_handle_char(c: char, allow_hyphen: bool) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || (allow_hyphen && c == '-')
}

/// Maximal handle run at `start`; None unless it begins with an ASCII letter.
fn handle_run(chars: &[char], start: usize, allow_hyphen: bool) -> Option<Span> {
    if start >= chars.len() || !chars[start].is_ascii_alphabetic() {
        return None;
    }
    let mut end = start;
    while end < chars.len() && is_handle_char(chars[end], allow_hyphen) {
        end += 1;
    }
    Some((start, end))
}

fn inside_any(span: Span, regions: &[Span]) -> bool {
    regions.iter().any(|&(s, e)| span.0 >= s && span.1 <= e)
}

/// Checks an extracted value against its kind's grammar. Other never
/// validates because it carries no value.
pub fn contact_value_is_valid(kind: &ContactKind, value: &str) -> bool {
    let chars: Vec<char> = value.chars().collect();
    match kind {
        ContactKind::Qq => {
            (5..=11).contains(&chars.len())
                && chars.iter().all(|c| c.is_ascii_digit())
                && chars[0] != '0'
        }
        ContactKind::Phone => {
            (7..=15).contains(&chars.len()) && chars.iter().all(|c| c.is_ascii_digit())
        }
        ContactKind::Telegram => {
            (5..=32).contains(&chars.len())
                && chars[0].is_ascii_alphabetic()
                && chars.iter().all(|&c| is_handle_char(c, false))
        }
        ContactKind::WeChat => {
            (6..=20).contains(&chars.len())
                && chars[0].is_ascii_alphabetic()
                && chars.iter().all(|&c| is_handle_char(c, true))
        }
        ContactKind::Website => {
            let found = extract_urls(value);
            found.len() == 1 && found[0].0 == value && found[0].1 == (0, chars.len())
        }
        ContactKind::Other => false,
    }
}

fn push_contact(out: &mut Vec<Contact>, kind: ContactKind, value: String, raw_span: Span) {
    out.push(Contact {
        kind,
        value,
        raw_span,
        source_ipt: String::new(),
    });
}

/// Runs the validation grammar for one contact kind over normalized text.
/// Spans are char offsets into `text`. Returns contacts in position order,
/// deduplicated by value.
pub fn extract_contact_entities(text: &str, kind: &ContactKind) -> Vec<Contact> {
    let chars: Vec<char> = text.chars().collect();
    let lchars = ascii_lower_chars(text);
    let mut out = Vec::new();
    match kind {
        ContactKind::Website => {
            for (url, span) in extract_urls(text) {
                push_contact(&mut out, ContactKind::Website, url, span);
            }
        }
        ContactKind::Qq => {
            let inds = indicator_spans(&lchars, &QQ_INDICATORS);
            let url_spans: Vec<Span> = extract_urls(text).into_iter().map(|(_, s)| s).collect();
            for (s, e) in digit_runs(&chars) {
                let valid = (5..=11).contains(&(e - s))
                    && chars[s] != '0'
                    && adjacent_after(&inds, &chars, s)
                    && !inside_any((s, e), &url_spans);
                if valid {
                    push_contact(&mut out, ContactKind::Qq, chars[s..e].iter().collect(), (s, e));
                }
            }
        }
        ContactKind::Phone => {
            let qq_inds = indicator_spans(&lchars, &QQ_INDICATORS);
            let url_spans: Vec<Span> = extract_urls(text).into_iter().map(|(_, s)| s).collect();
            for (s, e) in digit_runs(&chars) {
                let valid = (7..=15).contains(&(e - s))
                    && !adjacent_after(&qq_inds, &chars, s)
                    && !inside_any((s, e), &url_spans);
                if valid {
                    let span_start = if s > 0 && chars[s - 1] == '+' { s - 1 } else { s };
                    push_contact(
                        &mut out,
                        ContactKind::Phone,
                        chars[s..e].iter().collect(),
                        (span_start, e),
                    );
                }
            }
        }
        ContactKind::Telegram => {
            for (i, &c) in chars.iter().enumerate() {
                if c != '@' {
                    continue;
                }
                if let Some((s, e)) = handle_run(&chars, i + 1, false) {
                    if (5..=32).contains(&(e - s)) {
                        push_contact(
                            &mut out,
                            ContactKind::Telegram,
                            chars[s..e].iter().collect(),
                            (i, e),
                        );
                    }
                }
            }
            for (_, ind_end) in indicator_spans(&lchars, &TELEGRAM_INDICATORS) {
                if let Some(p) = token_start_after(&chars, ind_end) {
                    if let Some((s, e)) = handle_run(&chars, p, false) {
                        if (5..=32).contains(&(e - s)) {
                            push_contact(
                                &mut out,
                                ContactKind::Telegram,
                                chars[s..e].iter().collect(),
                                (s, e),
                            );
                        }
                    }
                }
            }
        }
        ContactKind::WeChat => {
            for (_, ind_end) in indicator_spans(&lchars, &WECHAT_INDICATORS) {
                if let Some(p) = token_start_after(&chars, ind_end) {
                    if let Some((s, e)) = handle_run(&chars, p, true) {
                        if (6..=20).contains(&(e - s)) {
                            push_contact(
                                &mut out,
                                ContactKind::WeChat,
                                chars[s..e].iter().collect(),
                                (s, e),
                            );
                        }
                    }
                }
            }
        }
        ContactKind::Other => {}
    }
    out.sort_by_key(|c| c.raw_span);
    let mut seen = std::collections::HashSet::new();
    out.retain(|c| seen.insert(c.value.clone()));
    out
}

/// Indicator and token-shape evidence counts, in
/// `CONTACT_TYPE_FEATURE_NAMES` order.
pub fn contact_type_features(text: &str) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let lchars = ascii_lower_chars(text);
    let runs = digit_runs(&chars);
    let qq_runs = runs
        .iter()
        .filter(|&&(s, e)| (5..=11).contains(&(e - s)) && chars[s] != '0')
        .count();
    let phone_runs = runs.iter().filter(|&&(s, e)| (7..=15).contains(&(e - s))).count();
    vec![
        indicator_spans(&lchars, &QQ_INDICATORS).len() as f64,
        indicator_spans(&lchars, &WECHAT_INDICATORS).len() as f64,
        indicator_spans(&lchars, &TELEGRAM_INDICATORS).len() as f64,
        chars.iter().filter(|&&c| c == '@').count() as f64,
        qq_runs as f64,
        phone_runs as f64,
        extract_urls(text).len() as f64,
        chars.iter().filter(|&&c| c == '+').count() as f64,
    ]
}

/// Picks the dominant contact type for an IPT. Texts with zero evidence in
/// every feature are Other without consulting the model.
pub fn classify_contact_type(text: &str, model: &TreeEnsembleModel) -> Result<ContactKind> {
    let features = contact_type_features(text);
    if features.iter().all(|&v| v == 0.0) {
        return Ok(ContactKind::Other);
    }
    if model.n_classes > CONTACT_TYPE_CLASSES.len() {
        return Err(Error::Model(format!(
            "contact-type model has {} classes, expected at most {}",
            model.n_classes,
            CONTACT_TYPE_CLASSES.len()
        )));
    }
    let probs = model.predict_proba(&features)?;
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    Ok(CONTACT_TYPE_CLASSES[best].clone())
}

/// Trains the contact-type classifier from (text, dominant kind) pairs.
pub fn train_contact_type_model(
    examples: &[(String, ContactKind)],
    params: &EnsembleParams,
) -> Result<TreeEnsembleModel> {
    let rows: Vec<Vec<f64>> = examples.iter().map(|(t, _)| contact_type_features(t)).collect();
    let labels: Vec<usize> = examples
        .iter()
        .map(|(_, k)| {
            CONTACT_TYPE_CLASSES
                .iter()
                .position(|c| c == k)
                .expect("every ContactKind has a class index")
        })
        .collect();
    let names = CONTACT_TYPE_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    train_tree_ensemble(&rows, &labels, names, params)
}
