//! IPT segmentation: URLs come out first, the remainder splits on bracket,
//! symbol, and punctuation separators. Whitespace is not a separator, so a
//! plain sentence stays one segment.

use serde::{Deserialize, Serialize};

use crate::extract::urls::{extract_urls, Span};
use crate::symbols::is_symbol_char;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Url,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IptSegment {
    pub text: String,
    pub span: Span,
    pub kind: SegmentKind,
}

const BRACKET_SEPARATORS: [char; 12] = [
    '{', '}', '[', ']', '【', '】', '『', '』', '(', ')', '（', '）',
];

const PUNCT_SEPARATORS: [char; 15] = [
    '，', '。', '、', '；', '!', '！', '?', '？', '|', '‖', '/', '\\', '~', '～', '…',
];

pub fn is_separator_char(c: char) -> bool {
    BRACKET_SEPARATORS.contains(&c) || PUNCT_SEPARATORS.contains(&c) || is_symbol_char(c)
}

pub fn segment_ipt(text: &str) -> Vec<IptSegment> {
    let chars: Vec<char> = text.chars().collect();
    let urls = extract_urls(text);
    let mut segments: Vec<IptSegment> = Vec::new();
    let mut url_iter = urls.into_iter().peekable();
    let mut run_start: Option<usize> = None;
    let mut i = 0;

    let flush = |segments: &mut Vec<IptSegment>, start: usize, end: usize| {
        if start < end {
            segments.push(IptSegment {
                text: chars[start..end].iter().collect(),
                span: (start, end),
                kind: SegmentKind::Candidate,
            });
        }
    };

    while i < chars.len() {
        if let Some((_, (us, _))) = url_iter.peek() {
            if *us == i {
                let (url, span) = url_iter.next().unwrap();
                if let Some(s) = run_start.take() {
                    flush(&mut segments, s, i);
                }
                segments.push(IptSegment {
                    text: url,
                    span,
                    kind: SegmentKind::Url,
                });
                i = span.1;
                continue;
            }
        }
        if is_separator_char(chars[i]) {
            if let Some(s) = run_start.take() {
                flush(&mut segments, s, i);
            }
        } else if run_start.is_none() {
            run_start = Some(i);
        }
        i += 1;
    }
    if let Some(s) = run_start.take() {
        flush(&mut segments, s, chars.len());
    }
    segments
}
