//! Redirect chain walking: HTTP 3xx Location headers first, then meta
//! refresh, then static JS location assignments. Bounded by a hop cap and
//! a visited set so every walk terminates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infiltrate::backend::{FetchBackend, FetchResponse};
use crate::infiltrate::html::{find_js_redirect, find_meta_refresh};

pub const DEFAULT_HOP_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopMechanism {
    Initial,
    #[serde(rename = "http_3xx")]
    Http3xx,
    MetaRefresh,
    JsLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub url: String,
    pub fqdn: String,
    /// How this hop was reached. The first hop is always `initial`.
    pub mechanism: HopMechanism,
    pub status: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectChain {
    pub hops: Vec<Hop>,
    pub distinct_fqdn_count: usize,
    /// A hop redirected to an already-visited URL.
    pub looped: bool,
    /// The hop cap cut the walk short.
    pub truncated: bool,
    /// A fetch failed mid-walk; the chain is a prefix of the real one.
    pub partial: bool,
}

impl RedirectChain {
    /// True when the walk ended on a page with no further redirect.
    pub fn terminal(&self) -> bool {
        !self.looped && !self.truncated && !self.partial && !self.hops.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.hops.first() {
            if first.mechanism != HopMechanism::Initial {
                return Err(Error::invariant("first hop mechanism must be initial"));
            }
        }
        for hop in self.hops.iter().skip(1) {
            if hop.mechanism == HopMechanism::Initial {
                return Err(Error::invariant("only the first hop is initial"));
            }
        }
        let distinct: BTreeSet<&str> = self.hops.iter().map(|h| h.fqdn.as_str()).collect();
        if distinct.len() != self.distinct_fqdn_count {
            return Err(Error::invariant("distinct_fqdn_count does not match hops"));
        }
        Ok(())
    }
}

/// A finished walk: the chain plus the terminal response when one exists.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub chain: RedirectChain,
    /// Body and headers of the landing page; None when the walk ended on
    /// an error, a loop, or the hop cap.
    pub landing: Option<FetchResponse>,
}

fn host_of(url: &str) -> Result<String> {
    let parsed = url::Url::parse(url)
        .map_err(|e| Error::malformed_url(url, format!("unparseable url: {e}")))?;
    parsed
        .host_str()
        .map(|h| h.to_ascii_lowercase())
        .ok_or_else(|| Error::malformed_url(url, "url has no host"))
}

/// The redirect target of a response, with the mechanism that produced
/// it: Location header on 3xx, else meta refresh, else static JS.
fn next_hop(resp: &FetchResponse) -> Option<(String, HopMechanism)> {
    if (300..400).contains(&resp.status) {
        if let Some(loc) = resp.header("location") {
            return Some((loc.to_string(), HopMechanism::Http3xx));
        }
    }
    if let Some(url) = find_meta_refresh(&resp.body) {
        return Some((url, HopMechanism::MetaRefresh));
    }
    if let Some(url) = find_js_redirect(&resp.body) {
        return Some((url, HopMechanism::JsLocation));
    }
    None
}

/// Walks redirects from `url` until a terminal page, a loop, a failed
/// fetch, or `hop_cap` hops. Relative targets resolve against the hop
/// that issued them; an unresolvable target ends the walk as partial.
pub fn fetch_chain(
    url: &str,
    backend: &dyn FetchBackend,
    hop_cap: usize,
) -> Result<ChainOutcome> {
    host_of(url)?;
    let mut hops: Vec<Hop> = Vec::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut looped = false;
    let mut truncated = false;
    let mut partial = false;
    let mut landing = None;

    let mut current = url.to_string();
    let mut mechanism = HopMechanism::Initial;
    loop {
        if hops.len() == hop_cap {
            truncated = true;
            break;
        }
        if !visited.insert(current.clone()) {
            looped = true;
            break;
        }
        let resp = match backend.get(&current) {
            Ok(r) => r,
            Err(_) => {
                partial = true;
                break;
            }
        };
        hops.push(Hop {
            url: current.clone(),
            fqdn: host_of(&current)?,
            mechanism,
            status: resp.status,
        });
        match next_hop(&resp) {
            Some((target, how)) => {
                let base = match url::Url::parse(&current) {
                    Ok(b) => b,
                    Err(_) => {
                        partial = true;
                        break;
                    }
                };
                match base.join(&target) {
                    Ok(resolved) => {
                        current = resolved.to_string();
                        mechanism = how;
                    }
                    Err(_) => {
                        partial = true;
                        break;
                    }
                }
            }
            None => {
                landing = Some(resp);
                break;
            }
        }
    }

    let distinct: BTreeSet<&str> = hops.iter().map(|h| h.fqdn.as_str()).collect();
    let chain = RedirectChain {
        distinct_fqdn_count: distinct.len(),
        hops,
        looped,
        truncated,
        partial,
    };
    chain.validate()?;
    Ok(ChainOutcome { chain, landing })
}
