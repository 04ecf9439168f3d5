//! Canonical domain types shared by every pipeline stage, plus the text
//! identity rule (normalization + content digest) that deduplicates IPTs.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Search engines the toolkit knows how to talk to. Live engines are stub
/// adapters; `mock` is the fixture-backed engine used in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Google,
    Bing,
    Baidu,
    Sogou,
    Mock,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Engine::Google => "google",
            Engine::Bing => "bing",
            Engine::Baidu => "baidu",
            Engine::Sogou => "sogou",
            Engine::Mock => "mock",
        };
        f.write_str(s)
    }
}

/// One entry of a search-engine result page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResultEntry {
    pub engine: Engine,
    pub query: String,
    /// 1-based rank within the result page.
    pub rank: u32,
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub fetched_at: DateTime<Utc>,
}

impl SearchResultEntry {
    /// Stable identity: digest over engine, query, rank, and url.
    pub fn id(&self) -> String {
        content_digest(&format!(
            "{}\n{}\n{}\n{}",
            self.engine, self.query, self.rank, self.url
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::invariant("search result rank must be >= 1"));
        }
        let parsed = url::Url::parse(&self.url)
            .map_err(|e| Error::invariant(format!("entry url does not parse: {e}")))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(Error::invariant("entry url must be absolute http(s)"));
        }
        Ok(())
    }
}

/// The 14 goods/services categories plus Benign.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum CategoryLabel {
    #[serde(rename = "Black Hat SEO & Advertisement")]
    BlackHatSeoAdvertisement,
    #[serde(rename = "Hacking Service")]
    HackingService,
    #[serde(rename = "Counterfeit Goods")]
    CounterfeitGoods,
    #[serde(rename = "Drug Sales")]
    DrugSales,
    #[serde(rename = "Data Theft")]
    DataTheft,
    #[serde(rename = "Sex Service")]
    SexService,
    #[serde(rename = "Fake Account")]
    FakeAccount,
    #[serde(rename = "Surrogacy Service")]
    SurrogacyService,
    #[serde(rename = "Fake Certificate")]
    FakeCertificate,
    #[serde(rename = "Weapon Sales")]
    WeaponSales,
    #[serde(rename = "Financial Fraud")]
    FinancialFraud,
    #[serde(rename = "Money Laundering")]
    MoneyLaundering,
    Gambling,
    Others,
    Benign,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 15] = [
        CategoryLabel::BlackHatSeoAdvertisement,
        CategoryLabel::HackingService,
        CategoryLabel::CounterfeitGoods,
        CategoryLabel::DrugSales,
        CategoryLabel::DataTheft,
        CategoryLabel::SexService,
        CategoryLabel::FakeAccount,
        CategoryLabel::SurrogacyService,
        CategoryLabel::FakeCertificate,
        CategoryLabel::WeaponSales,
        CategoryLabel::FinancialFraud,
        CategoryLabel::MoneyLaundering,
        CategoryLabel::Gambling,
        CategoryLabel::Others,
        CategoryLabel::Benign,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CategoryLabel::BlackHatSeoAdvertisement => "Black Hat SEO & Advertisement",
            CategoryLabel::HackingService => "Hacking Service",
            CategoryLabel::CounterfeitGoods => "Counterfeit Goods",
            CategoryLabel::DrugSales => "Drug Sales",
            CategoryLabel::DataTheft => "Data Theft",
            CategoryLabel::SexService => "Sex Service",
            CategoryLabel::FakeAccount => "Fake Account",
            CategoryLabel::SurrogacyService => "Surrogacy Service",
            CategoryLabel::FakeCertificate => "Fake Certificate",
            CategoryLabel::WeaponSales => "Weapon Sales",
            CategoryLabel::FinancialFraud => "Financial Fraud",
            CategoryLabel::MoneyLaundering => "Money Laundering",
            CategoryLabel::Gambling => "Gambling",
            CategoryLabel::Others => "Others",
            CategoryLabel::Benign => "Benign",
        }
    }

    pub fn parse(name: &str) -> Option<CategoryLabel> {
        CategoryLabel::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Contact kinds extracted from IPTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContactKind {
    Website,
    Telegram,
    WeChat,
    #[serde(rename = "QQ")]
    Qq,
    Phone,
    Other,
}

impl fmt::Display for ContactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ContactKind::Website => "Website",
            ContactKind::Telegram => "Telegram",
            ContactKind::WeChat => "WeChat",
            ContactKind::Qq => "QQ",
            ContactKind::Phone => "Phone",
            ContactKind::Other => "Other",
        };
        f.write_str(s)
    }
}

/// A contact entity extracted from an IPT, with the span it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contact {
    pub kind: ContactKind,
    /// Normalized value (handle without the `@`, digits only, bare domain).
    pub value: String,
    /// Char offsets (start, end) into the owning IPT's `normalized_text`.
    /// Extraction runs on an evasion-normalized copy and maps spans back.
    pub raw_span: (usize, usize),
    /// Id of the IptRecord this contact came from, when known.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_ipt: String,
}

/// Provenance of one IPT observation: the search entry it surfaced in and
/// the URL reflection scheme that carried it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IptSource {
    pub entry_id: String,
    pub urs_id: String,
}

/// A candidate illicit promotion text with provenance and analysis results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IptRecord {
    /// Content digest of `normalized_text`.
    pub id: String,
    pub text: String,
    pub normalized_text: String,
    /// BCP-47-like tag, or "und" when undetermined.
    pub language: String,
    pub categories: BTreeSet<CategoryLabel>,
    pub contacts: Vec<Contact>,
    pub sources: Vec<IptSource>,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
}

impl IptRecord {
    /// Builds a record from raw text: normalizes, digests, stamps times.
    pub fn new(text: impl Into<String>, source: IptSource, seen: DateTime<Utc>) -> IptRecord {
        let text = text.into();
        let normalized_text = normalize_ipt_text(&text);
        let id = content_digest(&normalized_text);
        IptRecord {
            id,
            text,
            normalized_text,
            language: "und".to_string(),
            categories: BTreeSet::new(),
            contacts: Vec::new(),
            sources: vec![source],
            first_seen: seen,
            last_seen: seen,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id != content_digest(&self.normalized_text) {
            return Err(Error::invariant("ipt id is not the digest of normalized_text"));
        }
        if self.normalized_text != normalize_ipt_text(&self.text) {
            return Err(Error::invariant("normalized_text does not match text"));
        }
        if self.sources.is_empty() {
            return Err(Error::invariant("persisted ipt record needs >= 1 source"));
        }
        if self.first_seen > self.last_seen {
            return Err(Error::invariant("first_seen after last_seen"));
        }
        if self.categories.contains(&CategoryLabel::Benign) && self.categories.len() > 1 {
            return Err(Error::invariant("Benign excludes all illicit labels"));
        }
        let text_chars = self.normalized_text.chars().count();
        for c in &self.contacts {
            if c.raw_span.0 > c.raw_span.1 || c.raw_span.1 > text_chars {
                return Err(Error::invariant("contact span out of text bounds"));
            }
        }
        Ok(())
    }
}

/// Canonical text identity: Unicode compatibility (NFKC) fold, collapse
/// whitespace runs to a single space, trim the ends. Idempotent.
pub fn normalize_ipt_text(raw: &str) -> String {
    let folded: String = raw.nfkc().collect();
    let mut out = String::with_capacity(folded.len());
    let mut in_ws = false;
    for c in folded.chars() {
        if c.is_whitespace() {
            in_ws = true;
            continue;
        }
        if in_ws && !out.is_empty() {
            out.push(' ');
        }
        in_ws = false;
        out.push(c);
    }
    out
}

/// 128-bit stable content hash as lowercase hex (truncated SHA-256).
pub fn content_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_empty() {
        assert_eq!(normalize_ipt_text(""), "");
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize_ipt_text("  a\t b "), "a b");
    }

    #[test]
    fn normalize_folds_fullwidth() {
        // Fullwidth letters plus ideographic space: oracle is per-character
        // compatibility decomposition (ＡＢ -> AB, U+3000 -> space).
        assert_eq!(normalize_ipt_text("ＡＢ　ｃ"), "AB c");
    }

    #[test]
    fn digest_is_32_hex_chars() {
        let d = content_digest("hello");
        assert_eq!(d.len(), 32);
        assert!(d.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(d, content_digest("hello"));
        assert_ne!(d, content_digest("hello!"));
    }

    #[test]
    fn category_label_roundtrip() {
        for c in CategoryLabel::ALL {
            assert_eq!(CategoryLabel::parse(c.name()), Some(c));
            let json = serde_json::to_string(&c).unwrap();
            let back: CategoryLabel = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn benign_exclusive_with_illicit() {
        let src = IptSource {
            entry_id: "e".into(),
            urs_id: "u".into(),
        };
        let mut rec = IptRecord::new("加微信abc123", src, Utc::now());
        rec.categories.insert(CategoryLabel::Benign);
        rec.categories.insert(CategoryLabel::Gambling);
        assert!(rec.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,60}") {
            let once = normalize_ipt_text(&s);
            prop_assert_eq!(normalize_ipt_text(&once), once);
        }

        #[test]
        fn ids_equal_iff_normalized_text_equal(a in "\\PC{0,30}", b in "\\PC{0,30}") {
            let ra = normalize_ipt_text(&a);
            let rb = normalize_ipt_text(&b);
            let same_id = content_digest(&ra) == content_digest(&rb);
            prop_assert_eq!(same_id, ra == rb);
        }
    }
}
