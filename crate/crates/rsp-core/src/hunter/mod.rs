//! Snowballing discovery of reflected promotion texts: build queries from
//! keyword and URS frontiers, dispatch them under a rate policy, keep
//! entries whose URL parameters reflect into page text, classify the
//! reflected text, and grow the frontiers from what the new IPTs yield.

pub mod adapter;
pub mod rate;

pub use adapter::{
    strip_scheme, AdapterCapabilities, LiveAdapterStub, MockDoc, MockSearchEngine,
    PageTextFetcher, SearchEngineAdapter,
};
pub use rate::{
    window_budget_respected, Clock, RateGovernor, RateLimitPolicy, SystemClock, VirtualClock,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::extract_keywords;
use crate::learn::TreeEnsembleModel;
use crate::reflection::{
    canonicalize_urs, detect_reflection, ReflectionFinding, ReflectionLocation, ReflectionParam,
    UrlReflectionScheme,
};
use crate::store::RecordStore;
use crate::textfeat::binary_ipt_features;
use crate::types::{content_digest, normalize_ipt_text, IptRecord, IptSource, SearchResultEntry};

/// Keyword variants appended to `site:` queries, one query per variant.
pub const SITE_QUERY_KEYWORDS: [&str; 8] =
    ["url", "tg", "telegram", "微", "薇", "扣", "qq", "飞机"];

/// Trained models the hunt loop needs: the binary IPT classifier and the
/// contact-segment classifier that drives keyword extraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HuntModels {
    pub binary: TreeEnsembleModel,
    pub segment: TreeEnsembleModel,
}

/// Resumable loop state. Frontiers hold work for the next round and stay
/// disjoint from the known sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HuntState {
    pub round: u32,
    pub keyword_frontier: BTreeSet<String>,
    /// URS templates scheduled for `site:` queries.
    pub urs_frontier: BTreeSet<String>,
    pub known_ipt_ids: BTreeSet<String>,
    pub known_urs_templates: BTreeSet<String>,
}

impl HuntState {
    pub fn seeded(
        keywords: impl IntoIterator<Item = String>,
        urs_templates: impl IntoIterator<Item = String>,
    ) -> HuntState {
        HuntState {
            round: 0,
            keyword_frontier: keywords.into_iter().collect(),
            urs_frontier: urs_templates.into_iter().collect(),
            known_ipt_ids: BTreeSet::new(),
            known_urs_templates: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.urs_frontier.is_disjoint(&self.known_urs_templates) {
            return Err(Error::invariant("urs frontier overlaps known templates"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub queries_issued: usize,
    pub query_errors: usize,
    pub entries_seen: usize,
    pub reflections: usize,
    pub entry_errors: usize,
    pub new_ipts: usize,
    pub new_keywords: usize,
    pub new_urs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HuntSummary {
    pub rounds: Vec<RoundSummary>,
    pub total_queries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HuntLimits {
    pub max_rounds: u32,
    pub max_queries: usize,
}

impl Default for HuntLimits {
    fn default() -> HuntLimits {
        HuntLimits {
            max_rounds: 6,
            max_queries: 10_000,
        }
    }
}

/// The `site:` filter argument for a URS: template head before the slot,
/// scheme stripped, cut at the query string, trailing slash trimmed.
pub fn urs_site_prefix(template: &str) -> String {
    let head = match template.find("{R}") {
        Some(i) => &template[..i],
        None => template,
    };
    let stripped = strip_scheme(head);
    let cut = match stripped.find('?') {
        Some(i) => &stripped[..i],
        None => stripped,
    };
    cut.trim_end_matches('/').to_string()
}

/// Expands the frontiers into query strings: keywords verbatim, then per
/// URS template (when the adapter supports `site:`) the vanilla prefix
/// query plus one variant per `SITE_QUERY_KEYWORDS` entry. Deduplicated,
/// first occurrence wins.
pub fn build_queries(state: &HuntState, caps: &AdapterCapabilities) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let push = |q: String, seen: &mut BTreeSet<String>, out: &mut Vec<String>| {
        if seen.insert(q.clone()) {
            out.push(q);
        }
    };
    for kw in &state.keyword_frontier {
        push(kw.clone(), &mut seen, &mut out);
    }
    if caps.supports_site_filter {
        for template in &state.urs_frontier {
            let prefix = urs_site_prefix(template);
            push(format!("site:{prefix}"), &mut seen, &mut out);
            for variant in SITE_QUERY_KEYWORDS {
                push(format!("site:{prefix} {variant}"), &mut seen, &mut out);
            }
        }
    }
    out
}

/// Entries that passed the reflection filter, plus per-entry errors
/// (failed fetches, unparseable URLs). Errors never drop the SERP-level
/// title/snippet check.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub matched: Vec<(SearchResultEntry, ReflectionFinding)>,
    /// (entry url, reason) pairs.
    pub errors: Vec<(String, String)>,
}

/// Runs detect_reflection over each entry. The entry's own title and
/// snippet are always checked; fetched page text extends them when the
/// fetch succeeds.
pub fn filter_reflection_entries(
    entries: &[SearchResultEntry],
    fetcher: &dyn PageTextFetcher,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for entry in entries {
        let mut text_by_location: BTreeMap<ReflectionLocation, String> = BTreeMap::new();
        if !entry.title.is_empty() {
            text_by_location.insert(ReflectionLocation::Title, entry.title.clone());
        }
        if !entry.snippet.is_empty() {
            text_by_location.insert(ReflectionLocation::Snippet, entry.snippet.clone());
        }
        match fetcher.page_text(&entry.url) {
            Ok(fetched) => {
                for (loc, text) in fetched {
                    text_by_location
                        .entry(loc)
                        .and_modify(|t| {
                            t.push('\n');
                            t.push_str(&text);
                        })
                        .or_insert(text);
                }
            }
            Err(e) => outcome.errors.push((entry.url.clone(), e.to_string())),
        }
        match detect_reflection(entry, &text_by_location) {
            Ok(Some(finding)) => outcome.matched.push((entry.clone(), finding)),
            Ok(None) => {}
            Err(e) => outcome.errors.push((entry.url.clone(), e.to_string())),
        }
    }
    outcome
}

/// The reflected value bound to the URS slot, if the finding has it.
pub fn reflected_text(urs: &UrlReflectionScheme, finding: &ReflectionFinding) -> Option<String> {
    let wanted = match &urs.reflection_param {
        ReflectionParam::Query(name) => name.clone(),
        ReflectionParam::PathIndex(i) => format!("path[{i}]"),
    };
    finding
        .reflected_params
        .iter()
        .find(|p| p.param_name == wanted)
        .map(|p| p.param_value.clone())
}

/// One hunt run: adapters, a page fetcher, models, and per-adapter rate
/// governors. Query dedup is per session, keyed on (adapter id, query).
pub struct HuntSession<'a> {
    adapters: Vec<&'a dyn SearchEngineAdapter>,
    fetcher: &'a dyn PageTextFetcher,
    models: &'a HuntModels,
    clock: &'a dyn Clock,
    governors: Vec<RateGovernor>,
    issued: BTreeSet<(String, String)>,
    scheduled_keywords: BTreeSet<String>,
    queries_total: usize,
    query_budget: usize,
}

impl<'a> HuntSession<'a> {
    pub fn new(
        adapters: Vec<&'a dyn SearchEngineAdapter>,
        fetcher: &'a dyn PageTextFetcher,
        models: &'a HuntModels,
        policy: RateLimitPolicy,
        clock: &'a dyn Clock,
    ) -> HuntSession<'a> {
        let governors = adapters.iter().map(|_| RateGovernor::new(policy)).collect();
        HuntSession {
            adapters,
            fetcher,
            models,
            clock,
            governors,
            issued: BTreeSet::new(),
            scheduled_keywords: BTreeSet::new(),
            queries_total: 0,
            query_budget: usize::MAX,
        }
    }

    pub fn queries_total(&self) -> usize {
        self.queries_total
    }

    /// Dispatch logs per adapter, for rate-policy audits.
    pub fn governors(&self) -> &[RateGovernor] {
        &self.governors
    }

    /// Runs one round: query the frontiers, filter reflections, classify
    /// reflected text, persist accepted IPTs and their URSs, and derive
    /// the next frontiers from what the new IPTs contain. Adapter and
    /// fetch errors are recorded and skipped; store failures abort.
    pub fn hunt_round(
        &mut self,
        state: &HuntState,
        store: &mut RecordStore,
    ) -> Result<(HuntState, RoundSummary)> {
        state.validate()?;
        let mut next = state.clone();
        next.round = state.round + 1;
        next.keyword_frontier.clear();
        next.urs_frontier.clear();
        next.known_urs_templates
            .extend(state.urs_frontier.iter().cloned());
        self.scheduled_keywords
            .extend(state.keyword_frontier.iter().cloned());

        let mut summary = RoundSummary {
            round: state.round,
            ..RoundSummary::default()
        };

        let mut entries: Vec<SearchResultEntry> = Vec::new();
        let clock = self.clock;
        for (i, adapter) in self.adapters.iter().enumerate() {
            let queries = build_queries(state, &adapter.capabilities());
            for q in queries {
                if self.queries_total >= self.query_budget {
                    break;
                }
                let key = (adapter.id().to_string(), q.clone());
                if !self.issued.insert(key) {
                    continue;
                }
                self.governors[i].acquire(clock);
                self.queries_total += 1;
                summary.queries_issued += 1;
                match adapter.query(&q) {
                    Ok(batch) => entries.extend(batch),
                    Err(_) => summary.query_errors += 1,
                }
            }
        }
        summary.entries_seen = entries.len();
        for entry in &entries {
            store.append(entry)?;
        }

        let outcome = filter_reflection_entries(&entries, self.fetcher);
        summary.reflections = outcome.matched.len();
        summary.entry_errors = outcome.errors.len();

        for (entry, finding) in &outcome.matched {
            let urs = match canonicalize_urs(finding) {
                Ok(u) => u,
                Err(_) => {
                    summary.entry_errors += 1;
                    continue;
                }
            };
            let Some(text) = reflected_text(&urs, finding) else {
                continue;
            };
            if !self.models.binary.classify(&binary_ipt_features(&text).to_vec())? {
                continue;
            }
            store.append(&urs)?;
            let source = IptSource {
                entry_id: entry.id(),
                urs_id: urs.id(),
            };
            let record = IptRecord::new(text, source, entry.fetched_at);
            let id = record.id.clone();
            store.append(&record)?;
            if !next.known_ipt_ids.insert(id) {
                continue;
            }
            summary.new_ipts += 1;
            // Frontier and known stay disjoint: a template is known once
            // its round has dispatched, so fresh ones wait in the frontier.
            if !next.known_urs_templates.contains(&urs.template)
                && next.urs_frontier.insert(urs.template.clone())
            {
                summary.new_urs += 1;
            }
            for kw in extract_keywords(&record, &self.models.segment)? {
                if self.scheduled_keywords.insert(kw.clone()) {
                    next.keyword_frontier.insert(kw);
                }
            }
        }
        summary.new_keywords = next.keyword_frontier.len();
        Ok((next, summary))
    }

    /// Seeds a state and iterates hunt_round until the frontiers empty or
    /// a limit is hit. Known sets only grow; no query repeats per adapter
    /// within the run.
    pub fn snowball_run(
        &mut self,
        seed_keywords: impl IntoIterator<Item = String>,
        seed_urs_templates: impl IntoIterator<Item = String>,
        store: &mut RecordStore,
        limits: &HuntLimits,
    ) -> Result<(HuntState, HuntSummary)> {
        self.issued.clear();
        self.scheduled_keywords.clear();
        self.queries_total = 0;
        self.query_budget = limits.max_queries;

        let mut state = HuntState::seeded(seed_keywords, seed_urs_templates);
        let mut rounds = Vec::new();
        while state.round < limits.max_rounds
            && !(state.keyword_frontier.is_empty() && state.urs_frontier.is_empty())
            && self.queries_total < limits.max_queries
        {
            let (next, summary) = self.hunt_round(&state, store)?;
            rounds.push(summary);
            state = next;
        }
        Ok((
            state,
            HuntSummary {
                rounds,
                total_queries: self.queries_total,
            },
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub k: usize,
    /// Keywords whose top-k entries contain at least one classified IPT.
    pub poisoned_queries: usize,
    /// Percentage over successfully queried keywords.
    pub poisoned_rate: f64,
    /// Distinct IPT texts seen within top k across all keywords.
    pub ipt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub rows: Vec<ExposureRow>,
    pub queried_keywords: usize,
    /// (keyword, reason) pairs for adapter failures.
    pub skipped: Vec<(String, String)>,
}

/// Queries each keyword once and reports, per cutoff k, how many keywords
/// surface at least one classified IPT within their top k entries. Only
/// SERP-visible text (title, snippet) feeds the reflection check.
pub fn exposure_probe(
    keywords: &[String],
    adapter: &dyn SearchEngineAdapter,
    k_levels: &[usize],
    model: &TreeEnsembleModel,
) -> Result<ExposureReport> {
    if k_levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invariant("k_levels must be sorted ascending"));
    }
    let mut skipped = Vec::new();
    // Per keyword: ranks and ids of entries whose reflected text classified
    // as an IPT.
    let mut hits_per_keyword: Vec<Vec<(u32, String)>> = Vec::new();
    for kw in keywords {
        let entries = match adapter.query(kw) {
            Ok(e) => e,
            Err(e) => {
                skipped.push((kw.clone(), e.to_string()));
                continue;
            }
        };
        let mut hits = Vec::new();
        for entry in &entries {
            let mut text_by_location = BTreeMap::new();
            if !entry.title.is_empty() {
                text_by_location.insert(ReflectionLocation::Title, entry.title.clone());
            }
            if !entry.snippet.is_empty() {
                text_by_location.insert(ReflectionLocation::Snippet, entry.snippet.clone());
            }
            let Some(finding) = detect_reflection(entry, &text_by_location)? else {
                continue;
            };
            let Ok(urs) = canonicalize_urs(&finding) else {
                continue;
            };
            let Some(text) = reflected_text(&urs, &finding) else {
                continue;
            };
            if model.classify(&binary_ipt_features(&text).to_vec())? {
                hits.push((entry.rank, content_digest(&normalize_ipt_text(&text))));
            }
        }
        hits_per_keyword.push(hits);
    }

    let queried = hits_per_keyword.len();
    let mut rows = Vec::new();
    for &k in k_levels {
        let mut poisoned = 0usize;
        let mut ids = BTreeSet::new();
        for hits in &hits_per_keyword {
            let within: Vec<&(u32, String)> =
                hits.iter().filter(|(rank, _)| *rank as usize <= k).collect();
            if !within.is_empty() {
                poisoned += 1;
            }
            for (_, id) in within {
                ids.insert(id.clone());
            }
        }
        let rate = if queried == 0 {
            0.0
        } else {
            100.0 * poisoned as f64 / queried as f64
        };
        rows.push(ExposureRow {
            k,
            poisoned_queries: poisoned,
            poisoned_rate: rate,
            ipt_count: ids.len(),
        });
    }
    Ok(ExposureReport {
        rows,
        queried_keywords: queried,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use chrono::TimeZone;
    use chrono::Utc;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::sync::OnceLock;
    use tempfile::TempDir;

    fn models() -> &'static HuntModels {
        static MODELS: OnceLock<HuntModels> = OnceLock::new();
        MODELS.get_or_init(|| HuntModels {
            binary: synth::desk_binary_model(41),
            segment: synth::desk_segment_model(41),
        })
    }

    fn entry(url: &str, title: &str, rank: u32) -> SearchResultEntry {
        SearchResultEntry {
            engine: crate::types::Engine::Mock,
            query: "probe".into(),
            rank,
            url: url.into(),
            title: title.into(),
            snippet: String::new(),
            fetched_at: Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn keyword_frontier_maps_to_verbatim_queries() {
        let state = HuntState::seeded(["cheapfifa23coins.com".to_string()], []);
        let no_site = AdapterCapabilities {
            supports_site_filter: false,
            max_results_per_query: 10,
        };
        assert_eq!(
            build_queries(&state, &no_site),
            vec!["cheapfifa23coins.com".to_string()]
        );
    }

    #[test]
    fn urs_frontier_expands_to_nine_queries() {
        let state = HuntState::seeded(
            [],
            ["https://h.example.com/s?q={R}".to_string()],
        );
        let caps = AdapterCapabilities {
            supports_site_filter: true,
            max_results_per_query: 10,
        };
        let queries = build_queries(&state, &caps);
        assert_eq!(queries.len(), 9);
        assert_eq!(queries[0], "site:h.example.com/s");
        assert_eq!(queries[1], "site:h.example.com/s url");
        assert_eq!(queries[8], "site:h.example.com/s 飞机");

        let no_site = AdapterCapabilities {
            supports_site_filter: false,
            max_results_per_query: 10,
        };
        assert!(build_queries(&state, &no_site).is_empty());
    }

    #[test]
    fn empty_frontiers_build_no_queries() {
        let state = HuntState::seeded([], []);
        let caps = AdapterCapabilities {
            supports_site_filter: true,
            max_results_per_query: 10,
        };
        assert!(build_queries(&state, &caps).is_empty());
    }

    #[test]
    fn duplicate_expansions_collapse() {
        // A keyword that collides with a generated site query is kept once.
        let state = HuntState::seeded(
            ["site:h.example.com/s".to_string()],
            ["https://h.example.com/s?q={R}".to_string()],
        );
        let caps = AdapterCapabilities {
            supports_site_filter: true,
            max_results_per_query: 10,
        };
        assert_eq!(build_queries(&state, &caps).len(), 9);
    }

    #[test]
    fn site_prefix_strips_scheme_query_and_slash() {
        assert_eq!(
            urs_site_prefix("https://p.example.com/search?q={R}&src=x"),
            "p.example.com/search"
        );
        assert_eq!(urs_site_prefix("http://x.example.com/s/{R}"), "x.example.com/s");
        assert_eq!(urs_site_prefix("https://x.example.com/{R}"), "x.example.com");
    }

    #[test]
    fn mixed_corpus_filter_keeps_exactly_the_planted_reflections() {
        let (docs, reflected) = synth::reflection_mix(9, 10, 20);
        let engine = MockSearchEngine::new("mock", docs.clone());
        let entries: Vec<SearchResultEntry> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| entry(&d.url, &d.title, (i + 1) as u32))
            .collect();
        let outcome = filter_reflection_entries(&entries, &engine);
        let kept: std::collections::BTreeSet<String> =
            outcome.matched.iter().map(|(e, _)| e.url.clone()).collect();
        assert_eq!(kept, reflected);
        assert!(outcome.errors.is_empty());
    }

    #[test]
    fn fetch_error_is_recorded_but_serp_text_still_checked() {
        let engine = MockSearchEngine::new("mock", Vec::new());
        let e = entry(
            "https://gone.example.com/find?q=promo%20text%20here",
            "promo text here - page",
            1,
        );
        let outcome = filter_reflection_entries(&[e], &engine);
        assert_eq!(outcome.errors.len(), 1);
        assert_eq!(outcome.matched.len(), 1);
        assert_eq!(
            outcome.matched[0].1.reflected_params[0].param_value,
            "promo text here"
        );
    }

    #[test]
    fn static_pages_are_dropped() {
        let engine = MockSearchEngine::new("mock", Vec::new());
        let e = entry("https://s.example.com/about.html", "about us", 1);
        let outcome = filter_reflection_entries(&[e], &engine);
        assert!(outcome.matched.is_empty());
    }

    #[test]
    fn empty_frontier_round_only_increments() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(1, 4, 2, 0);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let state = HuntState::seeded([], []);
        let (next, summary) = session.hunt_round(&state, &mut store).unwrap();
        assert_eq!(next.round, 1);
        assert_eq!(summary.queries_issued, 0);
        assert_eq!(
            (next.known_ipt_ids, next.keyword_frontier),
            (state.known_ipt_ids.clone(), state.keyword_frontier.clone())
        );
    }

    #[test]
    fn one_planted_ipt_grows_frontier_and_known_set() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(2, 1, 1, 0);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let state = HuntState::seeded([world.seed_keyword.clone()], []);
        let (next, summary) = session.hunt_round(&state, &mut store).unwrap();
        assert_eq!(summary.new_ipts, 1);
        assert_eq!(next.known_ipt_ids.len(), 1);
        assert!(next.known_ipt_ids.contains(&world.planted[0].id));
        for kw in &world.planted[0].keywords {
            assert!(next.keyword_frontier.contains(kw), "missing {kw}");
        }
        assert_eq!(next.urs_frontier.len(), 1);
        assert_eq!(store.count("ipts"), 1);
        assert_eq!(store.count("urs"), 1);
    }

    #[test]
    fn benign_reflections_produce_no_ipt_records() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let docs = vec![MockDoc {
            url: "https://b.example.com/find?q=%E8%8F%9C%E8%B0%B1%E5%88%86%E4%BA%AB%20hello".into(),
            title: "菜谱分享 hello - 页面".into(),
            snippet: String::new(),
            body_text_by_location: BTreeMap::new(),
            index_terms: vec!["probe".into()],
        }];
        let engine = MockSearchEngine::new("mock", docs);
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let state = HuntState::seeded(["probe".to_string()], []);
        let (next, summary) = session.hunt_round(&state, &mut store).unwrap();
        assert_eq!(summary.reflections, 1);
        assert_eq!(summary.new_ipts, 0);
        assert_eq!(store.count("ipts"), 0);
        assert!(next.known_ipt_ids.is_empty());
    }

    #[test]
    fn repeating_a_round_issues_no_duplicate_queries() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(3, 4, 2, 0);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let state = HuntState::seeded([world.seed_keyword.clone()], []);
        let (_, first) = session.hunt_round(&state, &mut store).unwrap();
        assert_eq!(first.queries_issued, 1);
        let (_, second) = session.hunt_round(&state, &mut store).unwrap();
        assert_eq!(second.queries_issued, 0);
    }

    #[test]
    fn snowball_discovers_the_reachability_closure() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(4, 12, 3, 2);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let (state, summary) = session
            .snowball_run(
                [world.seed_keyword.clone()],
                [world.seed_urs_template.clone()],
                &mut store,
                &HuntLimits {
                    max_rounds: 8,
                    max_queries: 10_000,
                },
            )
            .unwrap();
        assert_eq!(state.known_ipt_ids, world.reachable_ipt_ids);
        assert!(state.known_ipt_ids.is_disjoint(&world.unreachable_ipt_ids));
        state.validate().unwrap();
        let from_rounds: usize = summary.rounds.iter().map(|r| r.new_ipts).sum();
        assert_eq!(from_rounds, state.known_ipt_ids.len());
        assert_eq!(store.count("ipts"), 12);
    }

    #[test]
    fn snowball_scales_to_the_hundred_ipt_world() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(7, 100, 10, 5);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let (state, summary) = session
            .snowball_run(
                [world.seed_keyword.clone()],
                [world.seed_urs_template.clone()],
                &mut store,
                &HuntLimits {
                    max_rounds: 6,
                    max_queries: 10_000,
                },
            )
            .unwrap();
        assert!(
            state.known_ipt_ids.len() >= 90,
            "discovered {} of 100",
            state.known_ipt_ids.len()
        );
        assert!(state.known_ipt_ids.is_subset(&world.reachable_ipt_ids));
        assert!(state.known_ipt_ids.is_disjoint(&world.unreachable_ipt_ids));
        assert_eq!(summary.total_queries, session.queries_total());
        assert!(window_budget_respected(
            session.governors()[0].dispatch_log(),
            session.governors()[0].policy().interval,
            session.governors()[0].policy().tokens_per_interval,
        ));
    }

    #[test]
    fn zero_round_limit_issues_nothing() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(5, 4, 2, 0);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let (state, summary) = session
            .snowball_run(
                [world.seed_keyword.clone()],
                [],
                &mut store,
                &HuntLimits {
                    max_rounds: 0,
                    max_queries: 100,
                },
            )
            .unwrap();
        assert!(summary.rounds.is_empty());
        assert_eq!(summary.total_queries, 0);
        assert!(state.known_ipt_ids.is_empty());
        assert_eq!(store.count("search_results"), 0);
    }

    #[test]
    fn query_budget_caps_dispatch() {
        let tmp = TempDir::new().unwrap();
        let mut store = RecordStore::open(tmp.path()).unwrap();
        let world = synth::snowball_world(6, 12, 3, 0);
        let engine = MockSearchEngine::new("mock", world.docs.clone());
        let clock = VirtualClock::new();
        let mut session = HuntSession::new(
            vec![&engine],
            &engine,
            models(),
            RateLimitPolicy::default(),
            &clock,
        );
        let (_, summary) = session
            .snowball_run(
                [world.seed_keyword.clone()],
                [world.seed_urs_template.clone()],
                &mut store,
                &HuntLimits {
                    max_rounds: 8,
                    max_queries: 3,
                },
            )
            .unwrap();
        assert_eq!(summary.total_queries, 3);
    }

    #[test]
    fn hunt_state_roundtrips_through_json() {
        let mut state = HuntState::seeded(["kw".to_string()], ["https://a.example.com/?q={R}".to_string()]);
        state.round = 3;
        state.known_ipt_ids.insert("abc".into());
        let json = serde_json::to_string(&state).unwrap();
        let back: HuntState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn probe_with_no_ipts_reports_zero_everywhere() {
        let docs = vec![MockDoc {
            url: "https://plain.example.com/page".into(),
            title: "plain page".into(),
            snippet: String::new(),
            body_text_by_location: BTreeMap::new(),
            index_terms: vec!["kw0".into()],
        }];
        let engine = MockSearchEngine::new("mock", docs);
        let report = exposure_probe(
            &["kw0".to_string(), "kw1".to_string()],
            &engine,
            &[2, 10],
            &models().binary,
        )
        .unwrap();
        assert_eq!(report.queried_keywords, 2);
        for row in &report.rows {
            assert_eq!(row.poisoned_queries, 0);
            assert_eq!(row.poisoned_rate, 0.0);
            assert_eq!(row.ipt_count, 0);
        }
    }

    #[test]
    fn probe_counts_rank_three_hits_only_past_that_cutoff() {
        // 10 keywords; for 5 of them the engine ranks an IPT page third.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut docs = Vec::new();
        let mut keywords = Vec::new();
        for i in 0..10 {
            let kw = format!("kw{i:02}");
            // Two fillers with higher term frequency hold ranks 1 and 2.
            for (j, reps) in [(1usize, 3usize), (2, 2)] {
                docs.push(MockDoc {
                    url: format!("https://f{i}{j}.example.com/p"),
                    title: format!("filler {i} {j}"),
                    snippet: String::new(),
                    body_text_by_location: BTreeMap::new(),
                    index_terms: vec![vec![kw.clone(); reps].join(" ")],
                });
            }
            if i < 5 {
                let text = synth::ipt_text(&mut rng);
                docs.push(MockDoc {
                    url: format!(
                        "https://r{i}.example.com/find?q={}",
                        synth::percent_encode(&text)
                    ),
                    title: format!("{text} - 页面"),
                    snippet: String::new(),
                    body_text_by_location: BTreeMap::new(),
                    index_terms: vec![kw.clone()],
                });
            }
            keywords.push(kw);
        }
        let engine = MockSearchEngine::new("mock", docs);
        let report =
            exposure_probe(&keywords, &engine, &[2, 10], &models().binary).unwrap();
        assert_eq!(report.rows[0].poisoned_queries, 0);
        assert_eq!(report.rows[0].poisoned_rate, 0.0);
        assert_eq!(report.rows[1].poisoned_queries, 5);
        assert_eq!(report.rows[1].poisoned_rate, 50.0);
        assert_eq!(report.rows[1].ipt_count, 5);
    }

    #[test]
    fn probe_skips_and_reports_adapter_failures() {
        let engine = MockSearchEngine::new("mock", Vec::new())
            .with_capabilities(AdapterCapabilities {
                supports_site_filter: false,
                max_results_per_query: 10,
            });
        let report = exposure_probe(
            &["ok".to_string(), "site:x.example.com bad".to_string()],
            &engine,
            &[10],
            &models().binary,
        )
        .unwrap();
        assert_eq!(report.queried_keywords, 1);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, "site:x.example.com bad");
    }

    #[test]
    fn unsorted_k_levels_are_rejected() {
        let engine = MockSearchEngine::new("mock", Vec::new());
        let err = exposure_probe(&[], &engine, &[10, 2], &models().binary).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn poisoned_rate_is_monotone_in_k(
            seed in 0u64..500,
            n_reflected in 0usize..6,
            n_plain in 0usize..6,
            ks in proptest::collection::btree_set(1usize..20, 1..5),
        ) {
            let (mut docs, _) = synth::reflection_mix(seed, n_reflected, n_plain);
            for d in &mut docs {
                d.index_terms = vec!["kw".into()];
            }
            let engine = MockSearchEngine::new("mock", docs);
            let k_levels: Vec<usize> = ks.into_iter().collect();
            let report = exposure_probe(
                &["kw".to_string()],
                &engine,
                &k_levels,
                &models().binary,
            ).unwrap();
            for pair in report.rows.windows(2) {
                prop_assert!(pair[0].poisoned_rate <= pair[1].poisoned_rate);
                prop_assert!(pair[0].ipt_count <= pair[1].ipt_count);
            }
        }
    }
}
