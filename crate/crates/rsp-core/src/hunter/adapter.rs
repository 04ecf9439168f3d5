//! Search engine adapters: the behavioral contract, a deterministic mock
//! engine backed by a JSON-lines corpus, and disabled live stubs.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflection::ReflectionLocation;
use crate::types::{Engine, SearchResultEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterCapabilities {
    pub supports_site_filter: bool,
    pub max_results_per_query: usize,
}

/// Contract every search engine backend implements. Results are capped by
/// `max_results_per_query`; the mock is deterministic for a fixed corpus.
pub trait SearchEngineAdapter {
    fn id(&self) -> &str;
    fn capabilities(&self) -> AdapterCapabilities;
    fn query(&self, query: &str) -> Result<Vec<SearchResultEntry>>;
}

/// Fetches location-tagged page text for reflection checks beyond the
/// SERP-visible title and snippet.
pub trait PageTextFetcher {
    fn page_text(&self, url: &str) -> Result<BTreeMap<ReflectionLocation, String>>;
}

/// One indexed document of the mock engine's world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockDoc {
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub snippet: String,
    #[serde(default)]
    pub body_text_by_location: BTreeMap<ReflectionLocation, String>,
    /// The only text the engine matches queries against.
    #[serde(default)]
    pub index_terms: Vec<String>,
}

/// Deterministic in-memory search engine. Keyword tokens match by
/// case-insensitive substring against `index_terms` (every token must
/// match); a `site:` token restricts to URLs under that scheme-less
/// prefix. Ranking is total term frequency descending, then URL ascending.
pub struct MockSearchEngine {
    id: String,
    caps: AdapterCapabilities,
    docs: Vec<MockDoc>,
    timestamp: DateTime<Utc>,
}

impl MockSearchEngine {
    pub fn new(id: impl Into<String>, mut docs: Vec<MockDoc>) -> MockSearchEngine {
        docs.sort_by(|a, b| a.url.cmp(&b.url));
        MockSearchEngine {
            id: id.into(),
            caps: AdapterCapabilities {
                supports_site_filter: true,
                max_results_per_query: 10,
            },
            docs,
            // Fixed so repeated runs produce identical records.
            timestamp: Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap(),
        }
    }

    pub fn with_capabilities(mut self, caps: AdapterCapabilities) -> MockSearchEngine {
        self.caps = caps;
        self
    }

    pub fn with_timestamp(mut self, timestamp: DateTime<Utc>) -> MockSearchEngine {
        self.timestamp = timestamp;
        self
    }

    pub fn load_corpus(path: &Path) -> Result<Vec<MockDoc>> {
        let file = std::fs::File::open(path)?;
        let mut docs = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            docs.push(serde_json::from_str(&line)?);
        }
        Ok(docs)
    }

    pub fn docs(&self) -> &[MockDoc] {
        &self.docs
    }

    fn doc_matches(&self, doc: &MockDoc, site: Option<&str>, keywords: &[String]) -> Option<u64> {
        if let Some(prefix) = site {
            if !site_prefix_matches(&doc.url, prefix) {
                return None;
            }
        }
        let mut tf = 0u64;
        for kw in keywords {
            let hits: u64 = doc
                .index_terms
                .iter()
                .filter(|t| t.to_lowercase().contains(kw))
                .count() as u64;
            if hits == 0 {
                return None;
            }
            tf += hits;
        }
        Some(tf)
    }
}

/// Scheme-stripped prefix match with a path-segment boundary: the next
/// character after the prefix must start a new URL component.
fn site_prefix_matches(url: &str, prefix: &str) -> bool {
    let bare = strip_scheme(url);
    if !bare.starts_with(prefix) {
        return false;
    }
    match bare[prefix.len()..].chars().next() {
        None => true,
        Some(c) => matches!(c, '/' | '?' | '#' | ':') || prefix.ends_with('/'),
    }
}

pub fn strip_scheme(url: &str) -> &str {
    let lower = url.to_ascii_lowercase();
    for scheme in ["https://", "http://"] {
        if lower.starts_with(scheme) {
            return &url[scheme.len()..];
        }
    }
    url
}

impl SearchEngineAdapter for MockSearchEngine {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> AdapterCapabilities {
        self.caps
    }

    fn query(&self, query: &str) -> Result<Vec<SearchResultEntry>> {
        let mut site: Option<String> = None;
        let mut keywords: Vec<String> = Vec::new();
        for token in query.split_whitespace() {
            if let Some(rest) = token.strip_prefix("site:") {
                if !self.caps.supports_site_filter {
                    return Err(Error::Adapter {
                        adapter: self.id.clone(),
                        reason: "site: filter not supported".into(),
                    });
                }
                site = Some(rest.to_string());
            } else {
                keywords.push(token.to_lowercase());
            }
        }
        if site.is_none() && keywords.is_empty() {
            return Ok(Vec::new());
        }

        let mut scored: Vec<(u64, &MockDoc)> = self
            .docs
            .iter()
            .filter_map(|d| self.doc_matches(d, site.as_deref(), &keywords).map(|tf| (tf, d)))
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.url.cmp(&b.1.url)));
        scored.truncate(self.caps.max_results_per_query);

        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (_, d))| SearchResultEntry {
                engine: Engine::Mock,
                query: query.to_string(),
                rank: (i + 1) as u32,
                url: d.url.clone(),
                title: d.title.clone(),
                snippet: d.snippet.clone(),
                fetched_at: self.timestamp,
            })
            .collect())
    }
}

impl PageTextFetcher for MockSearchEngine {
    fn page_text(&self, url: &str) -> Result<BTreeMap<ReflectionLocation, String>> {
        self.docs
            .iter()
            .find(|d| d.url == url)
            .map(|d| d.body_text_by_location.clone())
            .ok_or_else(|| Error::Fetch {
                url: url.to_string(),
                reason: "not in mock corpus".into(),
            })
    }
}

/// Placeholder for real engines. Querying always fails with a clear
/// reason: live scraping needs credentials and a network policy review,
/// neither of which belongs in tests.
pub struct LiveAdapterStub {
    engine: Engine,
    id: String,
}

impl LiveAdapterStub {
    pub fn new(engine: Engine) -> LiveAdapterStub {
        LiveAdapterStub {
            id: format!("{engine}-live"),
            engine,
        }
    }
}

impl SearchEngineAdapter for LiveAdapterStub {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> AdapterCapabilities {
        AdapterCapabilities {
            supports_site_filter: true,
            max_results_per_query: 100,
        }
    }

    fn query(&self, _query: &str) -> Result<Vec<SearchResultEntry>> {
        Err(Error::Adapter {
            adapter: self.id.clone(),
            reason: format!(
                "live {} querying is disabled in this build; configure a mock corpus instead",
                self.engine
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(url: &str, title: &str, terms: &[&str]) -> MockDoc {
        MockDoc {
            url: url.into(),
            title: title.into(),
            snippet: String::new(),
            body_text_by_location: BTreeMap::new(),
            index_terms: terms.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn engine() -> MockSearchEngine {
        MockSearchEngine::new(
            "mock",
            vec![
                doc("a.com/1", "one", &["fifa", "coins"]),
                doc("a.com/2", "two", &["fifa", "fifa", "coins"]),
                doc("b.com/1", "three", &["coins"]),
                doc("b.com/sub?q=x", "four", &["微信", "fifa"]),
            ],
        )
    }

    #[test]
    fn ranking_is_tf_then_url() {
        let hits = engine().query("fifa").unwrap();
        let urls: Vec<&str> = hits.iter().map(|h| h.url.as_str()).collect();
        // a.com/2 has two fifa terms; the tie between a.com/1 and
        // b.com/sub?q=x breaks on URL order.
        assert_eq!(urls, ["a.com/2", "a.com/1", "b.com/sub?q=x"]);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[2].rank, 3);
    }

    #[test]
    fn all_tokens_must_match() {
        let hits = engine().query("fifa coins").unwrap();
        let urls: Vec<&str> = hits.iter().map(|h| h.url.as_str()).collect();
        assert_eq!(urls, ["a.com/2", "a.com/1"]);
    }

    #[test]
    fn site_filter_restricts_and_combines() {
        let hits = engine().query("site:b.com").unwrap();
        assert_eq!(hits.len(), 2);
        let hits = engine().query("site:b.com fifa").unwrap();
        let urls: Vec<&str> = hits.iter().map(|h| h.url.as_str()).collect();
        assert_eq!(urls, ["b.com/sub?q=x"]);
    }

    #[test]
    fn site_prefix_needs_component_boundary() {
        assert!(site_prefix_matches("v.example.com/video?q=1", "v.example.com/video"));
        assert!(site_prefix_matches("https://v.example.com/video", "v.example.com/video"));
        assert!(!site_prefix_matches("v.example.com/videos/2", "v.example.com/video"));
    }

    #[test]
    fn result_cap_truncates() {
        let e = engine().with_capabilities(AdapterCapabilities {
            supports_site_filter: true,
            max_results_per_query: 1,
        });
        let hits = e.query("coins").unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].url, "a.com/1");
    }

    #[test]
    fn unknown_url_fetch_fails() {
        let e = engine();
        assert!(e.page_text("missing.com").is_err());
        assert!(e.page_text("a.com/1").is_ok());
    }

    #[test]
    fn live_stub_refuses_queries() {
        let live = LiveAdapterStub::new(Engine::Google);
        assert!(live.query("anything").is_err());
        assert_eq!(live.id(), "google-live");
    }

    #[test]
    fn corpus_roundtrips_through_jsonl() {
        let docs = vec![doc("a.com/1", "one", &["fifa"])];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut text = String::new();
        for d in &docs {
            text.push_str(&serde_json::to_string(d).unwrap());
            text.push('\n');
        }
        std::fs::write(&path, text).unwrap();
        assert_eq!(MockSearchEngine::load_corpus(&path).unwrap(), docs);
    }
}
