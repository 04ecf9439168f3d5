//! Registrable-domain (apex) extraction against an embedded public-suffix
//! snapshot, so popularity joins work offline and reproducibly.

use std::collections::HashSet;
use std::sync::OnceLock;

const SNAPSHOT: &str = include_str!("../data/public_suffix_snapshot.txt");

fn suffix_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        SNAPSHOT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// True when `label` (lowercase) is a single-label top-level domain from the
/// embedded snapshot. The URL grammar requires the final host label to pass.
pub(crate) fn known_tld(label: &str) -> bool {
    static TLDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    TLDS.get_or_init(|| {
        suffix_set()
            .iter()
            .copied()
            .filter(|s| !s.contains('.'))
            .collect()
    })
    .contains(label)
}

/// Extracts the registrable domain (public suffix + one label) from a host
/// name. Longest listed suffix wins; an unlisted TLD falls back to the final
/// label. Hosts that are IP addresses or a bare suffix are returned as-is.
pub fn apex_domain(fqdn: &str) -> String {
    let host = fqdn.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() {
        return host;
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() < 2 {
        return host;
    }
    let suffixes = suffix_set();
    // Longest suffix match: try the full tail first, then shorter tails.
    for start in 0..labels.len() {
        let tail = labels[start..].join(".");
        if suffixes.contains(tail.as_str()) {
            if start == 0 {
                return host; // host is itself a public suffix
            }
            return format!("{}.{}", labels[start - 1], tail);
        }
    }
    // Unlisted TLD: registrable domain is the last two labels.
    labels[labels.len() - 2..].join(".")
}
