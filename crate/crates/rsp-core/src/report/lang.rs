//! Script-majority language tagging. A deliberate baseline: real
//! pipelines can plug a stronger identifier through the trait.

/// Pluggable language identification contract.
pub trait LanguageTagger {
    fn tag(&self, text: &str) -> String;
}

/// Built-in baseline: tags by the dominant script's character count.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptMajorityTagger;

impl LanguageTagger for ScriptMajorityTagger {
    fn tag(&self, text: &str) -> String {
        tag_language(text)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Script {
    Han,
    Hangul,
    Kana,
    Latin,
}

fn script_of(c: char) -> Option<Script> {
    match c as u32 {
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF => Some(Script::Han),
        0xAC00..=0xD7AF | 0x1100..=0x11FF | 0x3130..=0x318F => Some(Script::Hangul),
        0x3040..=0x309F | 0x30A0..=0x30FF | 0x31F0..=0x31FF => Some(Script::Kana),
        _ if c.is_ascii_alphabetic() => Some(Script::Latin),
        0x00C0..=0x024F => Some(Script::Latin),
        _ => None,
    }
}

/// Majority-script tag: Han→zh, Hangul→ko, kana→ja, Latin→und-Latn.
/// Mixed text takes the script with the most characters; text with no
/// script characters tags und. Ties resolve in the order zh, ja, ko,
/// und-Latn.
pub fn tag_language(text: &str) -> String {
    let mut han = 0usize;
    let mut hangul = 0usize;
    let mut kana = 0usize;
    let mut latin = 0usize;
    for c in text.chars() {
        match script_of(c) {
            Some(Script::Han) => han += 1,
            Some(Script::Hangul) => hangul += 1,
            Some(Script::Kana) => kana += 1,
            Some(Script::Latin) => latin += 1,
            None => {}
        }
    }
    let ranked = [("zh", han), ("ja", kana), ("ko", hangul), ("und-Latn", latin)];
    // max_by_key keeps the last maximum; reverse so ties land on the
    // earlier entry in the preference order above.
    let best = ranked.iter().rev().max_by_key(|(_, n)| *n).unwrap();
    if best.1 == 0 {
        return "und".to_string();
    }
    best.0.to_string()
}
