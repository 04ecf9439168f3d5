//! Next-hop infiltration: redirect chains, site snapshots, iframe
//! cloaking detection, vantage comparison, landing clusters, and the
//! Telegram transport layer.

pub mod backend;
pub mod chain;
pub mod html;
pub mod telegram;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domains::apex_domain;
use crate::error::{Error, Result};
use crate::learn::multilabel::MultiLabelModel;
use crate::store::StoredRecord;
use crate::types::{content_digest, CategoryLabel};

pub use backend::{
    FetchBackend, FetchResponse, FixtureHttpServer, HttpBackend, RouteSpec, RouteVariant,
    Scenario, ScenarioBackend,
};
pub use chain::{fetch_chain, ChainOutcome, Hop, HopMechanism, RedirectChain, DEFAULT_HOP_CAP};
pub use html::{extract_iframe_sources, find_js_redirect, find_meta_refresh, visible_text};
pub use telegram::{
    classify_messages, tg_fetch, FixtureTransport, MessageClassSummary, MessagingTransport,
    StoredTgMessage, TelegramAccountProfile, TgAccountKind, TgFetchOutcome, TgMessage,
};

/// Block-message patterns matched case-insensitively against the landing
/// body. The set is configurable; these are the defaults.
pub const DEFAULT_BLOCK_PATTERNS: [&str; 3] = ["access denied", "captcha", "forbidden"];

const BLOCK_STATUSES: [u16; 4] = [401, 403, 429, 451];

/// Evidence string when the landing looks blocked, None otherwise.
pub fn block_evidence(status: u16, body: &str, patterns: &[&str]) -> Option<String> {
    if BLOCK_STATUSES.contains(&status) {
        return Some(format!("status {status}"));
    }
    let lowered = body.to_lowercase();
    patterns
        .iter()
        .find(|p| lowered.contains(&p.to_lowercase()))
        .map(|p| format!("block pattern \"{p}\""))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSnapshot {
    pub website: String,
    pub taken_at: DateTime<Utc>,
    pub vantage: String,
    pub chain: RedirectChain,
    /// FQDN of the last hop; empty when the first fetch already failed.
    pub landing_fqdn: String,
    /// Digest of the whitespace-normalized landing body; empty when no
    /// landing body was obtained.
    pub content_digest: String,
    pub iframe_sources: Vec<String>,
    pub blocked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_evidence: Option<String>,
    /// A fetch failed before any landing body was obtained.
    pub unreachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landing_status: Option<u16>,
}

impl SiteSnapshot {
    pub fn landing_url(&self) -> Option<&str> {
        self.chain.hops.last().map(|h| h.url.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        let last_fqdn = self.chain.hops.last().map(|h| h.fqdn.as_str()).unwrap_or("");
        if self.landing_fqdn != last_fqdn {
            return Err(Error::invariant("landing_fqdn must match the last hop"));
        }
        if self.blocked && self.block_evidence.is_none() {
            return Err(Error::invariant("blocked snapshots need block evidence"));
        }
        Ok(())
    }
}

impl StoredRecord for SiteSnapshot {
    const KIND: &'static str = "snapshots";

    fn record_id(&self) -> String {
        content_digest(&format!(
            "{}|{}|{}",
            self.website,
            self.vantage,
            self.taken_at.to_rfc3339()
        ))
    }

    fn validate(&self) -> Result<()> {
        SiteSnapshot::validate(self)
    }
}

/// Walks the redirect chain from `website` and captures the landing:
/// digest of the whitespace-normalized body, iframe sources, and a
/// blocked flag per status code and block-message patterns.
pub fn snapshot_site(
    website: &str,
    backend: &dyn FetchBackend,
    hop_cap: usize,
    block_patterns: &[&str],
    taken_at: DateTime<Utc>,
) -> Result<SiteSnapshot> {
    let outcome = fetch_chain(website, backend, hop_cap)?;
    let landing_fqdn = outcome
        .chain
        .hops
        .last()
        .map(|h| h.fqdn.clone())
        .unwrap_or_default();
    let (digest, iframes, blocked, evidence, status) = match &outcome.landing {
        Some(resp) => {
            let evidence = block_evidence(resp.status, &resp.body, block_patterns);
            (
                content_digest(&html::normalize_ws(&resp.body)),
                extract_iframe_sources(&resp.body),
                evidence.is_some(),
                evidence,
                Some(resp.status),
            )
        }
        None => (String::new(), Vec::new(), false, None, None),
    };
    let snapshot = SiteSnapshot {
        website: website.to_string(),
        taken_at,
        vantage: backend.vantage().to_string(),
        unreachable: outcome.chain.partial,
        chain: outcome.chain,
        landing_fqdn,
        content_digest: digest,
        iframe_sources: iframes,
        blocked,
        block_evidence: evidence,
        landing_status: status,
    };
    snapshot.validate()?;
    Ok(snapshot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloakingFinding {
    pub website: String,
    pub iframe_url: String,
    pub iframe_apex: String,
    pub host_apex: String,
    pub iframe_categories: BTreeSet<CategoryLabel>,
}

#[derive(Debug, Clone, Default)]
pub struct CloakingReport {
    pub finding: Option<CloakingFinding>,
    /// (iframe source, failure reason) per iframe that could not be read.
    pub fetch_failures: Vec<(String, String)>,
}

fn is_benign_only(labels: &BTreeSet<CategoryLabel>) -> bool {
    labels.iter().all(|l| *l == CategoryLabel::Benign)
}

/// Flags iframe cloaking: an iframe landing on a foreign apex whose text
/// classifies illicit while the host page classifies Benign. Each iframe
/// source is fetched one hop; failures are reported per source.
pub fn detect_iframe_cloaking(
    snapshot: &SiteSnapshot,
    backend: &dyn FetchBackend,
    model: &MultiLabelModel,
) -> Result<CloakingReport> {
    let mut report = CloakingReport::default();
    if snapshot.iframe_sources.is_empty() {
        return Ok(report);
    }
    let landing_url = match snapshot.landing_url() {
        Some(u) => u.to_string(),
        None => return Ok(report),
    };
    let host_apex = apex_domain(&snapshot.landing_fqdn);
    let host_resp = match backend.get(&landing_url) {
        Ok(r) => r,
        Err(e) => {
            report.fetch_failures.push((landing_url, e.to_string()));
            return Ok(report);
        }
    };
    let host_labels = model.predict_labels(&visible_text(&host_resp.body));
    if !is_benign_only(&host_labels) {
        return Ok(report);
    }
    let base = url::Url::parse(&landing_url)
        .map_err(|e| Error::malformed_url(&landing_url, format!("unparseable landing: {e}")))?;
    for src in &snapshot.iframe_sources {
        let resolved = match base.join(src) {
            Ok(u) => u,
            Err(e) => {
                report.fetch_failures.push((src.clone(), e.to_string()));
                continue;
            }
        };
        let iframe_fqdn = match resolved.host_str() {
            Some(h) => h.to_ascii_lowercase(),
            None => {
                report.fetch_failures.push((src.clone(), "no host".into()));
                continue;
            }
        };
        let iframe_apex = apex_domain(&iframe_fqdn);
        if iframe_apex == host_apex {
            continue;
        }
        let resp = match backend.get(resolved.as_str()) {
            Ok(r) => r,
            Err(e) => {
                report.fetch_failures.push((src.clone(), e.to_string()));
                continue;
            }
        };
        let labels = model.predict_labels(&visible_text(&resp.body));
        if is_benign_only(&labels) {
            continue;
        }
        report.finding = Some(CloakingFinding {
            website: snapshot.website.clone(),
            iframe_url: resolved.to_string(),
            iframe_apex,
            host_apex: host_apex.clone(),
            iframe_categories: labels
                .into_iter()
                .filter(|l| *l != CategoryLabel::Benign)
                .collect(),
        });
        break;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub website: String,
    pub vantage_a: String,
    pub vantage_b: String,
    pub divergent: bool,
    pub apex_a: String,
    pub apex_b: String,
    /// Digest comparison, present only when both snapshots landed 200.
    pub digest_equal: Option<bool>,
    pub blocked_a: bool,
    pub blocked_b: bool,
    /// Set when exactly one side is blocked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked_annotation: Option<String>,
}

fn default_vantage_window() -> chrono::Duration {
    chrono::Duration::hours(24)
}

/// Compares the latest snapshots of one website from two vantages.
/// Divergent when landing apexes differ, when both landed 200 with
/// unequal digests, or when exactly one side is blocked.
pub fn compare_vantage(
    snapshots: &[SiteSnapshot],
    vantage_a: &str,
    vantage_b: &str,
    window: Option<chrono::Duration>,
) -> Result<DivergenceReport> {
    let website = snapshots
        .first()
        .map(|s| s.website.clone())
        .unwrap_or_default();
    if snapshots.iter().any(|s| s.website != website) {
        return Err(Error::invariant("compare_vantage needs one website"));
    }
    let latest = |vantage: &str| -> Option<&SiteSnapshot> {
        snapshots
            .iter()
            .filter(|s| s.vantage == vantage)
            .max_by_key(|s| s.taken_at)
    };
    let missing = |vantage: &str| Error::MissingCounterpart {
        website: website.clone(),
        vantage: vantage.to_string(),
    };
    let a = latest(vantage_a).ok_or_else(|| missing(vantage_a))?;
    let b = latest(vantage_b).ok_or_else(|| missing(vantage_b))?;
    let window = window.unwrap_or_else(default_vantage_window);
    if (a.taken_at - b.taken_at).abs() > window {
        return Err(missing(if a.taken_at < b.taken_at {
            vantage_a
        } else {
            vantage_b
        }));
    }

    let apex_a = apex_domain(&a.landing_fqdn);
    let apex_b = apex_domain(&b.landing_fqdn);
    let both_ok = a.landing_status == Some(200) && b.landing_status == Some(200);
    let digest_equal = both_ok.then(|| a.content_digest == b.content_digest);
    let blocked_annotation = match (a.blocked, b.blocked) {
        (true, false) => Some(format!("blocked at vantage {vantage_a}")),
        (false, true) => Some(format!("blocked at vantage {vantage_b}")),
        _ => None,
    };
    let divergent =
        apex_a != apex_b || digest_equal == Some(false) || blocked_annotation.is_some();
    Ok(DivergenceReport {
        website,
        vantage_a: vantage_a.to_string(),
        vantage_b: vantage_b.to_string(),
        divergent,
        apex_a,
        apex_b,
        digest_equal,
        blocked_a: a.blocked,
        blocked_b: b.blocked,
        blocked_annotation,
    })
}

#[derive(Debug, Clone, Default)]
pub struct LandingClusters {
    /// epoch (taken_at, RFC 3339) → landing_fqdn → websites.
    pub by_epoch: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    /// website → distinct landing FQDNs across all its snapshots.
    pub distinct_landings: BTreeMap<String, usize>,
}

/// Partitions snapshotted websites by landing FQDN per epoch, and counts
/// each website's distinct landings over time. Epochs are snapshot
/// timestamps; within one epoch the latest record per website wins.
/// Snapshots with no landing are left out of the partition.
pub fn cluster_by_landing(snapshots: &[SiteSnapshot]) -> Result<LandingClusters> {
    if snapshots.is_empty() {
        return Err(Error::invariant("cluster_by_landing needs snapshots"));
    }
    let mut per_epoch_site: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut landings_seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for snap in snapshots {
        if snap.landing_fqdn.is_empty() {
            continue;
        }
        let epoch = snap.taken_at.to_rfc3339();
        per_epoch_site
            .entry(epoch)
            .or_default()
            .insert(snap.website.clone(), snap.landing_fqdn.clone());
        landings_seen
            .entry(snap.website.clone())
            .or_default()
            .insert(snap.landing_fqdn.clone());
    }
    let mut clusters = LandingClusters::default();
    for (epoch, sites) in per_epoch_site {
        let inverted = clusters.by_epoch.entry(epoch).or_default();
        for (website, landing) in sites {
            inverted.entry(landing).or_default().insert(website);
        }
    }
    clusters.distinct_landings = landings_seen
        .into_iter()
        .map(|(site, landings)| (site, landings.len()))
        .collect();
    Ok(clusters)
}

/// Bucket boundaries for the redirect-length distribution.
pub const LENGTH_BUCKETS: [usize; 6] = [1, 2, 3, 4, 5, 10];

/// For each k in LENGTH_BUCKETS, how many snapshots have chains of at
/// least k hops. Counts are cumulative-monotone by construction.
pub fn redirect_length_buckets(snapshots: &[SiteSnapshot]) -> Vec<(usize, usize)> {
    LENGTH_BUCKETS
        .iter()
        .map(|&k| {
            let count = snapshots.iter().filter(|s| s.chain.hops.len() >= k).count();
            (k, count)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::desk_category_model;
    use chrono::TimeZone;

    fn ts(n: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + n, 0).unwrap()
    }

    fn backend(routes: &[(&str, RouteSpec)]) -> ScenarioBackend {
        let mut s = Scenario::default();
        for (url, route) in routes {
            s.insert(url.to_string(), route.clone());
        }
        ScenarioBackend::new(s, "us")
    }

    fn snap(website: &str, backend: &ScenarioBackend, at: DateTime<Utc>) -> SiteSnapshot {
        snapshot_site(website, backend, DEFAULT_HOP_CAP, &DEFAULT_BLOCK_PATTERNS, at).unwrap()
    }

    #[test]
    fn static_benign_page_makes_a_one_hop_snapshot() {
        let b = backend(&[(
            "http://shop.a.test/",
            RouteSpec::plain(200, "<p>周末读书会 照常举行</p>"),
        )]);
        let s = snap("http://shop.a.test/", &b, ts(0));
        assert_eq!(s.chain.hops.len(), 1);
        assert!(s.iframe_sources.is_empty());
        assert!(!s.blocked);
        assert!(!s.unreachable);
        assert_eq!(s.landing_fqdn, "shop.a.test");
        assert_eq!(s.landing_status, Some(200));
        assert_eq!(
            s.content_digest,
            content_digest("<p>周末读书会 照常举行</p>")
        );
    }

    #[test]
    fn iframe_sources_are_captured() {
        let b = backend(&[(
            "http://host.test/",
            RouteSpec::plain(200, r#"<iframe src="https://bad.test/g"></iframe>"#),
        )]);
        let s = snap("http://host.test/", &b, ts(0));
        assert_eq!(s.iframe_sources, vec!["https://bad.test/g"]);
    }

    #[test]
    fn status_403_marks_blocked_with_evidence() {
        let b = backend(&[("http://gate.test/", RouteSpec::plain(403, "nope"))]);
        let s = snap("http://gate.test/", &b, ts(0));
        assert!(s.blocked);
        assert_eq!(s.block_evidence.as_deref(), Some("status 403"));
    }

    #[test]
    fn block_pattern_in_body_marks_blocked() {
        let b = backend(&[(
            "http://gate.test/",
            RouteSpec::plain(200, "<h1>Please solve the CAPTCHA to continue</h1>"),
        )]);
        let s = snap("http://gate.test/", &b, ts(0));
        assert!(s.blocked);
        assert_eq!(s.block_evidence.as_deref(), Some("block pattern \"captcha\""));
    }

    #[test]
    fn unreachable_site_is_flagged_not_blocked() {
        let b = backend(&[]);
        let s = snap("http://nowhere.test/", &b, ts(0));
        assert!(s.unreachable);
        assert!(!s.blocked);
        assert!(s.landing_fqdn.is_empty());
        assert!(s.content_digest.is_empty());
        assert_eq!(s.landing_status, None);
    }

    #[test]
    fn snapshot_follows_redirects_to_the_landing() {
        let b = backend(&[
            ("http://a.test/", RouteSpec::redirect(302, "http://b.test/page")),
            ("http://b.test/page", RouteSpec::plain(200, "landed")),
        ]);
        let s = snap("http://a.test/", &b, ts(0));
        assert_eq!(s.chain.hops.len(), 2);
        assert_eq!(s.landing_fqdn, "b.test");
    }

    fn cloaking_routes() -> Vec<(String, RouteSpec)> {
        vec![
            (
                "http://shell.test/".into(),
                RouteSpec::plain(
                    200,
                    r#"<html><body><p>周末读书会照常举行 社区义诊活动预告</p>
                    <iframe src="https://casino.example/g"></iframe></body></html>"#,
                ),
            ),
            (
                "https://casino.example/g".into(),
                RouteSpec::plain(200, "<p>网赌上分平台 稳定回水 彩票计划群 内部号码</p>"),
            ),
            (
                "http://plain.test/".into(),
                RouteSpec::plain(
                    200,
                    r#"<p>周末读书会照常举行</p><iframe src="http://notes.plain.test/x"></iframe>"#,
                ),
            ),
            (
                "http://notes.plain.test/x".into(),
                RouteSpec::plain(200, "<p>网赌上分平台 稳定回水</p>"),
            ),
            (
                "http://green.test/".into(),
                RouteSpec::plain(
                    200,
                    r#"<p>周末读书会照常举行</p><iframe src="https://cdn.other.example/w"></iframe>"#,
                ),
            ),
            (
                "https://cdn.other.example/w".into(),
                RouteSpec::plain(200, "<p>家常菜食谱更新了 春季旅行攻略分享</p>"),
            ),
        ]
    }

    fn cloaking_backend() -> ScenarioBackend {
        let mut s = Scenario::default();
        for (u, r) in cloaking_routes() {
            s.insert(u, r);
        }
        ScenarioBackend::new(s, "us")
    }

    #[test]
    fn foreign_apex_illicit_iframe_is_flagged() {
        let b = cloaking_backend();
        let model = desk_category_model(17);
        let s = snap("http://shell.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        let finding = report.finding.expect("cloaking finding");
        assert_eq!(finding.iframe_apex, "casino.example");
        assert_eq!(finding.host_apex, "shell.test");
        assert!(finding.iframe_categories.contains(&CategoryLabel::Gambling));
        assert!(report.fetch_failures.is_empty());
    }

    #[test]
    fn same_apex_iframe_is_not_cloaking() {
        let b = cloaking_backend();
        let model = desk_category_model(17);
        let s = snap("http://plain.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        assert!(report.finding.is_none());
    }

    #[test]
    fn benign_foreign_iframe_is_not_cloaking() {
        let b = cloaking_backend();
        let model = desk_category_model(17);
        let s = snap("http://green.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        assert!(report.finding.is_none());
    }

    #[test]
    fn illicit_host_page_is_not_cloaking() {
        let b = backend(&[
            (
                "http://loud.test/",
                RouteSpec::plain(
                    200,
                    r#"<p>网赌上分平台 稳定回水</p><iframe src="https://casino.example/g"></iframe>"#,
                ),
            ),
            (
                "https://casino.example/g",
                RouteSpec::plain(200, "<p>网赌上分平台 稳定回水</p>"),
            ),
        ]);
        let model = desk_category_model(17);
        let s = snap("http://loud.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        assert!(report.finding.is_none());
    }

    #[test]
    fn iframe_fetch_failures_are_reported_per_source() {
        let b = backend(&[(
            "http://shell.test/",
            RouteSpec::plain(
                200,
                r#"<p>周末读书会照常举行</p><iframe src="https://gone.example/x"></iframe>"#,
            ),
        )]);
        let model = desk_category_model(17);
        let s = snap("http://shell.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        assert!(report.finding.is_none());
        assert_eq!(report.fetch_failures.len(), 1);
        assert_eq!(report.fetch_failures[0].0, "https://gone.example/x");
    }

    #[test]
    fn page_without_iframes_yields_no_finding() {
        let b = backend(&[("http://quiet.test/", RouteSpec::plain(200, "<p>hi</p>"))]);
        let model = desk_category_model(17);
        let s = snap("http://quiet.test/", &b, ts(0));
        let report = detect_iframe_cloaking(&s, &b, &model).unwrap();
        assert!(report.finding.is_none());
        assert!(report.fetch_failures.is_empty());
    }

    fn vantage_pair(body_a: &str, body_b: &str, status_b: u16) -> Vec<SiteSnapshot> {
        let site = "http://promo.test/";
        let mut scenario_a = Scenario::default();
        scenario_a.insert(site.to_string(), RouteSpec::plain(200, body_a));
        let mut scenario_b = Scenario::default();
        scenario_b.insert(site.to_string(), RouteSpec::plain(status_b, body_b));
        let ba = ScenarioBackend::new(scenario_a, "us");
        let bb = ScenarioBackend::new(scenario_b, "cn");
        vec![
            snapshot_site(site, &ba, DEFAULT_HOP_CAP, &DEFAULT_BLOCK_PATTERNS, ts(0)).unwrap(),
            snapshot_site(site, &bb, DEFAULT_HOP_CAP, &DEFAULT_BLOCK_PATTERNS, ts(60)).unwrap(),
        ]
    }

    #[test]
    fn identical_landings_are_not_divergent() {
        let snaps = vantage_pair("<p>same</p>", "<p>same</p>", 200);
        let report = compare_vantage(&snaps, "us", "cn", None).unwrap();
        assert!(!report.divergent);
        assert_eq!(report.digest_equal, Some(true));
    }

    #[test]
    fn different_bodies_diverge_when_both_land_200() {
        let snaps = vantage_pair("<p>storefront</p>", "<p>redirect shell</p>", 200);
        let report = compare_vantage(&snaps, "us", "cn", None).unwrap();
        assert!(report.divergent);
        assert_eq!(report.digest_equal, Some(false));
    }

    #[test]
    fn different_landing_apexes_diverge() {
        let site = "http://promo.test/";
        let mut sa = Scenario::default();
        sa.insert(site, RouteSpec::redirect(302, "https://www.google.com/"));
        sa.insert("https://www.google.com/", RouteSpec::plain(200, "g"));
        let mut sb = Scenario::default();
        sb.insert(site, RouteSpec::plain(200, "local page"));
        let ba = ScenarioBackend::new(sa, "us");
        let bb = ScenarioBackend::new(sb, "cn");
        let snaps = vec![
            snapshot_site(site, &ba, DEFAULT_HOP_CAP, &DEFAULT_BLOCK_PATTERNS, ts(0)).unwrap(),
            snapshot_site(site, &bb, DEFAULT_HOP_CAP, &DEFAULT_BLOCK_PATTERNS, ts(60)).unwrap(),
        ];
        let report = compare_vantage(&snaps, "us", "cn", None).unwrap();
        assert!(report.divergent);
        assert_eq!(report.apex_a, "google.com");
        assert_eq!(report.apex_b, "promo.test");
    }

    #[test]
    fn blocked_counterpart_reports_annotation() {
        let snaps = vantage_pair("<p>open</p>", "access denied", 200);
        let report = compare_vantage(&snaps, "us", "cn", None).unwrap();
        assert!(report.divergent);
        assert!(report.blocked_b);
        assert_eq!(
            report.blocked_annotation.as_deref(),
            Some("blocked at vantage cn")
        );
    }

    #[test]
    fn missing_counterpart_is_an_error() {
        let snaps = vantage_pair("<p>x</p>", "<p>x</p>", 200);
        let err = compare_vantage(&snaps, "us", "jp", None).unwrap_err();
        assert!(matches!(err, Error::MissingCounterpart { vantage, .. } if vantage == "jp"));
    }

    #[test]
    fn stale_counterpart_outside_window_is_missing() {
        let mut snaps = vantage_pair("<p>x</p>", "<p>x</p>", 200);
        snaps[1].taken_at = ts(60 * 60 * 48);
        let err = compare_vantage(&snaps, "us", "cn", None).unwrap_err();
        assert!(matches!(err, Error::MissingCounterpart { vantage, .. } if vantage == "us"));
    }

    fn quick_snapshot(website: &str, landing: &str, at: DateTime<Utc>) -> SiteSnapshot {
        let url = format!("http://{landing}/");
        SiteSnapshot {
            website: website.to_string(),
            taken_at: at,
            vantage: "us".into(),
            chain: RedirectChain {
                hops: vec![Hop {
                    url: url.clone(),
                    fqdn: landing.to_string(),
                    mechanism: HopMechanism::Initial,
                    status: 200,
                }],
                distinct_fqdn_count: 1,
                looped: false,
                truncated: false,
                partial: false,
            },
            landing_fqdn: landing.to_string(),
            content_digest: content_digest(&url),
            iframe_sources: Vec::new(),
            blocked: false,
            block_evidence: None,
            unreachable: false,
            landing_status: Some(200),
        }
    }

    #[test]
    fn eighty_eight_sites_on_one_landing_form_one_cluster() {
        let snaps: Vec<SiteSnapshot> = (0..88)
            .map(|i| quick_snapshot(&format!("http://site{i:02}.test/"), "hub.landing.test", ts(0)))
            .collect();
        let clusters = cluster_by_landing(&snaps).unwrap();
        let epoch = clusters.by_epoch.values().next().unwrap();
        assert_eq!(epoch.len(), 1);
        assert_eq!(epoch["hub.landing.test"].len(), 88);
    }

    #[test]
    fn distinct_landings_make_singleton_clusters() {
        let snaps: Vec<SiteSnapshot> = (0..5)
            .map(|i| {
                quick_snapshot(
                    &format!("http://site{i}.test/"),
                    &format!("land{i}.test"),
                    ts(0),
                )
            })
            .collect();
        let clusters = cluster_by_landing(&snaps).unwrap();
        let epoch = clusters.by_epoch.values().next().unwrap();
        assert_eq!(epoch.len(), 5);
        assert!(epoch.values().all(|sites| sites.len() == 1));
    }

    #[test]
    fn clusters_partition_each_epoch() {
        let mut snaps = Vec::new();
        for i in 0..6 {
            let landing = if i % 2 == 0 { "even.test" } else { "odd.test" };
            snaps.push(quick_snapshot(&format!("http://s{i}.test/"), landing, ts(0)));
            snaps.push(quick_snapshot(
                &format!("http://s{i}.test/"),
                "later.test",
                ts(1),
            ));
        }
        let clusters = cluster_by_landing(&snaps).unwrap();
        for epoch in clusters.by_epoch.values() {
            let mut seen = BTreeSet::new();
            let mut total = 0;
            for sites in epoch.values() {
                total += sites.len();
                seen.extend(sites.iter().cloned());
            }
            assert_eq!(seen.len(), total, "clusters overlap");
            assert_eq!(seen.len(), 6, "clusters must cover every website");
        }
    }

    #[test]
    fn landing_change_across_epochs_counts_two() {
        let snaps = vec![
            quick_snapshot("http://flip.test/", "x.test", ts(0)),
            quick_snapshot("http://flip.test/", "y.test", ts(86_400)),
            quick_snapshot("http://steady.test/", "x.test", ts(0)),
            quick_snapshot("http://steady.test/", "x.test", ts(86_400)),
        ];
        let clusters = cluster_by_landing(&snaps).unwrap();
        assert_eq!(clusters.distinct_landings["http://flip.test/"], 2);
        assert_eq!(clusters.distinct_landings["http://steady.test/"], 1);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(cluster_by_landing(&[]).is_err());
    }

    #[test]
    fn length_buckets_are_cumulative_monotone() {
        let mut snaps = Vec::new();
        for len in [1usize, 1, 2, 3, 3, 3, 5, 6, 10, 12] {
            let mut s = quick_snapshot("http://w.test/", "w.test", ts(len as i64));
            let hop = s.chain.hops[0].clone();
            for i in 1..len {
                let mut extra = hop.clone();
                extra.url = format!("http://w.test/{i}");
                extra.mechanism = HopMechanism::Http3xx;
                s.chain.hops.push(extra);
            }
            snaps.push(s);
        }
        let buckets = redirect_length_buckets(&snaps);
        assert_eq!(buckets[0], (1, 10));
        assert_eq!(buckets[1], (2, 8));
        assert_eq!(buckets[2], (3, 7));
        assert_eq!(buckets[3], (4, 4));
        assert_eq!(buckets[4], (5, 4));
        assert_eq!(buckets[5], (10, 2));
        for pair in buckets.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn snapshot_validate_catches_landing_mismatch() {
        let mut s = quick_snapshot("http://w.test/", "w.test", ts(0));
        s.landing_fqdn = "other.test".into();
        assert!(SiteSnapshot::validate(&s).is_err());
    }

    #[test]
    fn snapshot_roundtrips_through_store() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = crate::store::RecordStore::open(dir.path()).unwrap();
        let s = quick_snapshot("http://w.test/", "w.test", ts(0));
        let id = store.append(&s).unwrap();
        let got: SiteSnapshot = store.get(&id).unwrap().unwrap();
        assert_eq!(got, s);
    }
}
