//! Reflected-value detection and URL Reflection Scheme (URS) handling.
//! A URS is a single-slot URL template: the reflected parameter value is
//! replaced by the placeholder `{R}`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::domains::apex_domain;
use crate::error::{Error, Result};
use crate::types::{content_digest, SearchResultEntry};

/// Where reflected text was observed on the result page.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionLocation {
    Title,
    Snippet,
    BodyText,
    Metadata,
    ScriptVar,
    Anchor,
    DataAttr,
}

impl fmt::Display for ReflectionLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReflectionLocation::Title => "title",
            ReflectionLocation::Snippet => "snippet",
            ReflectionLocation::BodyText => "body_text",
            ReflectionLocation::Metadata => "metadata",
            ReflectionLocation::ScriptVar => "script_var",
            ReflectionLocation::Anchor => "anchor",
            ReflectionLocation::DataAttr => "data_attr",
        };
        f.write_str(s)
    }
}

/// One reflected parameter occurrence. `param_name` is the query key, or
/// `path[<i>]` for the i-th path segment (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectedParam {
    pub param_name: String,
    pub param_value: String,
    pub location: ReflectionLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionFinding {
    pub url: String,
    pub reflected_params: Vec<ReflectedParam>,
}

/// The reflection slot within a URS template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReflectionParam {
    Query(String),
    PathIndex(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlReflectionScheme {
    pub template: String,
    pub fqdn: String,
    pub apex_domain: String,
    pub reflection_param: ReflectionParam,
}

impl UrlReflectionScheme {
    /// Stable identity for provenance links: digest of the template.
    pub fn id(&self) -> String {
        content_digest(&self.template)
    }
}

/// Minimum decoded length for a parameter value to count as reflected;
/// shorter values match page text spuriously.
pub const MIN_REFLECTED_LEN: usize = 3;

const PLACEHOLDER: &str = "{R}";

/// Percent-decodes one pass (no recursion); `plus_as_space` additionally
/// folds '+' to ' ' (query-value semantics). Invalid escapes pass through.
pub fn percent_decode(s: &str, plus_as_space: bool) -> String {
    let bytes = s.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' if i + 2 < bytes.len()
                && bytes[i + 1].is_ascii_hexdigit()
                && bytes[i + 2].is_ascii_hexdigit() =>
            {
                let hi = (bytes[i + 1] as char).to_digit(16).unwrap() as u8;
                let lo = (bytes[i + 2] as char).to_digit(16).unwrap() as u8;
                out.push(hi * 16 + lo);
                i += 3;
            }
            b'+' if plus_as_space => {
                out.push(b' ');
                i += 1;
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// One raw query pair, kept verbatim for template reconstruction.
struct RawParam {
    raw: String,
    raw_key: String,
    raw_value: String,
}

fn query_pairs(query: &str) -> Vec<RawParam> {
    if query.is_empty() {
        return Vec::new();
    }
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (k, v) = match pair.split_once('=') {
                Some((k, v)) => (k, v),
                None => (pair, ""),
            };
            RawParam {
                raw: pair.to_string(),
                raw_key: k.to_string(),
                raw_value: v.to_string(),
            }
        })
        .collect()
}

/// Splits an absolute http(s) URL string into (before-path, path, query)
/// with the fragment discarded. Pure string surgery so reconstruction
/// preserves the original byte-for-byte.
fn split_url(url: &str) -> Result<(String, String, String)> {
    url::Url::parse(url).map_err(|e| Error::malformed_url(url, e.to_string()))?;
    let no_frag = match url.split_once('#') {
        Some((head, _)) => head,
        None => url,
    };
    let (base, query) = match no_frag.split_once('?') {
        Some((b, q)) => (b.to_string(), q.to_string()),
        None => (no_frag.to_string(), String::new()),
    };
    let authority_start = match base.find("://") {
        Some(p) => p + 3,
        None => return Err(Error::malformed_url(url, "missing scheme")),
    };
    match base[authority_start..].find('/') {
        Some(rel) => {
            let path_start = authority_start + rel;
            Ok((
                base[..path_start].to_string(),
                base[path_start..].to_string(),
                query,
            ))
        }
        None => Ok((base, String::new(), query)),
    }
}

/// Returns a finding iff a query-param value or the terminal path segment
/// (decoded, length >= MIN_REFLECTED_LEN) appears verbatim in any provided
/// location text. Lists every matching (param, location) pair.
pub fn detect_reflection(
    entry: &SearchResultEntry,
    page_text_by_location: &BTreeMap<ReflectionLocation, String>,
) -> Result<Option<ReflectionFinding>> {
    let (_, path, query) = split_url(&entry.url)?;

    // Candidates in a fixed order: query pairs first, then the terminal
    // path segment.
    let mut candidates: Vec<(String, String)> = Vec::new();
    for p in query_pairs(&query) {
        let decoded_key = percent_decode(&p.raw_key, false);
        let decoded_val = percent_decode(&p.raw_value, true);
        candidates.push((decoded_key, decoded_val));
    }
    let segments: Vec<&str> = path
        .trim_start_matches('/')
        .split('/')
        .collect();
    if let Some((idx, seg)) = segments
        .iter()
        .enumerate()
        .rev()
        .find(|(_, s)| !s.is_empty())
    {
        candidates.push((format!("path[{idx}]"), percent_decode(seg, false)));
    }

    let mut reflected = Vec::new();
    for (name, value) in &candidates {
        if value.chars().count() < MIN_REFLECTED_LEN {
            continue;
        }
        for (loc, text) in page_text_by_location {
            if text.contains(value.as_str()) {
                reflected.push(ReflectedParam {
                    param_name: name.clone(),
                    param_value: value.clone(),
                    location: *loc,
                });
            }
        }
    }
    if reflected.is_empty() {
        Ok(None)
    } else {
        Ok(Some(ReflectionFinding {
            url: entry.url.clone(),
            reflected_params: reflected,
        }))
    }
}

fn parse_path_param(name: &str) -> Option<usize> {
    name.strip_prefix("path[")?
        .strip_suffix(']')?
        .parse()
        .ok()
}

/// Canonicalizes a finding into a URS. The slot is the first reflected
/// query param in query-string order; a path segment is chosen only when
/// no query param reflected. Fragment is stripped, other params verbatim.
pub fn canonicalize_urs(finding: &ReflectionFinding) -> Result<UrlReflectionScheme> {
    let (head, path, query) = split_url(&finding.url)?;
    let pairs = query_pairs(&query);

    let mut chosen: Option<ReflectionParam> = None;
    // Query-string order, not finding order: scan pairs left to right.
    'outer: for pair in &pairs {
        let decoded_key = percent_decode(&pair.raw_key, false);
        for p in &finding.reflected_params {
            if p.param_name == decoded_key && parse_path_param(&p.param_name).is_none() {
                chosen = Some(ReflectionParam::Query(decoded_key.clone()));
                break 'outer;
            }
        }
    }
    if chosen.is_none() {
        for p in &finding.reflected_params {
            if let Some(idx) = parse_path_param(&p.param_name) {
                chosen = Some(ReflectionParam::PathIndex(idx));
                break;
            }
        }
    }
    let chosen = chosen.ok_or_else(|| {
        Error::malformed_url(&finding.url, "finding lists no usable reflected param")
    })?;

    let template = match &chosen {
        ReflectionParam::Query(name) => {
            let mut rebuilt: Vec<String> = Vec::with_capacity(pairs.len());
            let mut replaced = false;
            for pair in &pairs {
                if !replaced && percent_decode(&pair.raw_key, false) == *name {
                    rebuilt.push(format!("{}={PLACEHOLDER}", pair.raw_key));
                    replaced = true;
                } else {
                    rebuilt.push(pair.raw.clone());
                }
            }
            format!("{head}{path}?{}", rebuilt.join("&"))
        }
        ReflectionParam::PathIndex(idx) => {
            let mut segments: Vec<String> = path
                .trim_start_matches('/')
                .split('/')
                .map(str::to_string)
                .collect();
            if *idx >= segments.len() {
                return Err(Error::malformed_url(
                    &finding.url,
                    "path index out of range",
                ));
            }
            segments[*idx] = PLACEHOLDER.to_string();
            let new_path = format!("/{}", segments.join("/"));
            if query.is_empty() {
                format!("{head}{new_path}")
            } else {
                format!("{head}{new_path}?{query}")
            }
        }
    };

    let parsed = url::Url::parse(&finding.url)
        .map_err(|e| Error::malformed_url(&finding.url, e.to_string()))?;
    let fqdn = parsed
        .host_str()
        .ok_or_else(|| Error::malformed_url(&finding.url, "no host"))?
        .to_string();
    Ok(UrlReflectionScheme {
        apex_domain: apex_domain(&fqdn),
        fqdn,
        template,
        reflection_param: chosen,
    })
}

/// Substitutes the placeholder with `value` verbatim.
pub fn instantiate(urs: &UrlReflectionScheme, value: &str) -> String {
    urs.template.replacen(PLACEHOLDER, value, 1)
}

/// Returns the `{R}` binding iff `url` instantiates the template exactly:
/// identical bytes around the slot and a binding free of structure
/// delimiters for the slot's form.
pub fn match_urs(urs: &UrlReflectionScheme, url: &str) -> Result<Option<String>> {
    url::Url::parse(url).map_err(|e| Error::malformed_url(url, e.to_string()))?;
    let slot = match urs.template.find(PLACEHOLDER) {
        Some(p) => p,
        None => return Ok(None),
    };
    let prefix = &urs.template[..slot];
    let suffix = &urs.template[slot + PLACEHOLDER.len()..];
    if url.len() < prefix.len() + suffix.len()
        || !url.starts_with(prefix)
        || !url.ends_with(suffix)
    {
        return Ok(None);
    }
    let binding = &url[prefix.len()..url.len() - suffix.len()];
    if binding.is_empty() {
        return Ok(None);
    }
    let forbidden: &[char] = match urs.reflection_param {
        ReflectionParam::Query(_) => &['&', '#', '?'],
        ReflectionParam::PathIndex(_) => &['/', '?', '#'],
    };
    if binding.contains(forbidden) {
        return Ok(None);
    }
    Ok(Some(binding.to_string()))
}
