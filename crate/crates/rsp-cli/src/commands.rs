//! One function per subcommand. Each wires config, store, and models
//! into the corresponding library operation and prints structured
//! progress lines on stderr; tables go to stdout.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use rsp_core::extract::{
    classify_contact_type, extract_contacts, train_contact_type_model, ContactModels,
};
use rsp_core::hunter::adapter::{AdapterCapabilities, MockSearchEngine, SearchEngineAdapter};
use rsp_core::hunter::rate::{RateGovernor, VirtualClock};
use rsp_core::hunter::{exposure_probe, HuntModels, HuntSession};
use rsp_core::infiltrate::{
    detect_iframe_cloaking, snapshot_site, tg_fetch, FetchBackend, FixtureTransport, HttpBackend,
    Scenario, ScenarioBackend, DEFAULT_BLOCK_PATTERNS, DEFAULT_HOP_CAP,
};
use rsp_core::learn::{
    evaluate, train_multilabel, ConfusionCounts, EnsembleParams, MaxFeatures, MultiLabelModel,
    TreeEnsembleModel,
};
use rsp_core::report::{
    report_category_distribution, report_popularity_overlap, report_top_abused, tag_language,
    OutputFormat, ReportTable,
};
use rsp_core::synth::train_binary_model;
use rsp_core::textfeat::binary_ipt_features;
use rsp_core::store::RecordStore;
use rsp_core::types::{CategoryLabel, ContactKind, IptRecord};

use crate::config::Config;
use crate::{CliError, ModelKind, ReportKind};

pub struct Ctx {
    pub config: Option<Config>,
    pub store_override: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Ctx {
    fn config(&self) -> Result<&Config, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError("this command needs --config <file>".into()))
    }

    fn store_path(&self) -> Result<PathBuf, CliError> {
        if let Some(path) = &self.store_override {
            return Ok(path.clone());
        }
        if let Some(config) = &self.config {
            if let Some(path) = &config.store.path {
                return Ok(config.resolve(path));
            }
        }
        Err(CliError(
            "no store path: pass --store or set [store] path in the config".into(),
        ))
    }

    fn open_store(&self) -> Result<RecordStore, CliError> {
        Ok(RecordStore::open(self.store_path()?)?)
    }

    fn model_path(&self, which: &str, path: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        let config = self.config()?;
        path.as_ref()
            .map(|p| config.resolve(p))
            .ok_or_else(|| CliError(format!("config has no [models] {which} path")))
    }

    fn binary_model(&self) -> Result<TreeEnsembleModel, CliError> {
        let path = self.model_path("binary", &self.config()?.models.binary)?;
        Ok(TreeEnsembleModel::load(&path)?)
    }

    fn segment_model(&self) -> Result<TreeEnsembleModel, CliError> {
        let path = self.model_path("segment", &self.config()?.models.segment)?;
        Ok(TreeEnsembleModel::load(&path)?)
    }

    fn contact_type_model(&self) -> Result<TreeEnsembleModel, CliError> {
        let path = self.model_path("contact_type", &self.config()?.models.contact_type)?;
        Ok(TreeEnsembleModel::load(&path)?)
    }

    fn category_model(&self) -> Result<MultiLabelModel, CliError> {
        let path = self.model_path("category", &self.config()?.models.category)?;
        Ok(MultiLabelModel::load(&path)?)
    }
}

fn progress(event: &str, fields: &[(&str, String)]) {
    let mut line = format!("event={event}");
    for (key, value) in fields {
        line.push_str(&format!(" {key}={value}"));
    }
    eprintln!("{line}");
}

fn read_lines(path: &Path, purpose: &str) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {purpose} file `{}`: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn print_table(table: &ReportTable, format: OutputFormat) {
    print!("{}", table.render(format));
}

pub fn hunt(ctx: &Ctx, seeds_keywords: &Path, seeds_urs: &Path) -> Result<(), CliError> {
    let config = ctx.config()?;
    let keywords = read_lines(seeds_keywords, "seeds-keywords")?;
    let urs_templates = read_lines(seeds_urs, "seeds-urs")?;
    if config.adapters.is_empty() {
        return Err(CliError("config has no [[adapters]]".into()));
    }
    let mut engines = Vec::new();
    let mut all_docs = Vec::new();
    for section in &config.adapters {
        let path = config.resolve(&section.corpus);
        let docs = MockSearchEngine::load_corpus(&path)
            .map_err(|e| CliError(format!("adapter `{}` corpus: {e}", section.id)))?;
        all_docs.extend(docs.clone());
        engines.push(
            MockSearchEngine::new(section.id.clone(), docs).with_capabilities(
                AdapterCapabilities {
                    supports_site_filter: section.site_filter,
                    max_results_per_query: section.max_results,
                },
            ),
        );
    }
    let fetcher = MockSearchEngine::new("page-fetcher", all_docs);
    let models = HuntModels {
        binary: ctx.binary_model()?,
        segment: ctx.segment_model()?,
    };
    let clock = VirtualClock::new();
    let adapter_refs: Vec<&dyn SearchEngineAdapter> =
        engines.iter().map(|e| e as &dyn SearchEngineAdapter).collect();
    let mut session = HuntSession::new(
        adapter_refs,
        &fetcher,
        &models,
        config.rate_limit.policy(),
        &clock,
    );
    let mut store = ctx.open_store()?;
    let (state, summary) =
        session.snowball_run(keywords, urs_templates, &mut store, &config.hunt.limits())?;
    for round in &summary.rounds {
        progress(
            "hunt_round",
            &[
                ("round", round.round.to_string()),
                ("queries", round.queries_issued.to_string()),
                ("entries", round.entries_seen.to_string()),
                ("reflections", round.reflections.to_string()),
                ("new_ipts", round.new_ipts.to_string()),
                ("new_keywords", round.new_keywords.to_string()),
                ("new_urs", round.new_urs.to_string()),
            ],
        );
    }
    progress(
        "hunt_done",
        &[
            ("rounds", summary.rounds.len().to_string()),
            ("total_queries", summary.total_queries.to_string()),
            ("known_ipts", state.known_ipt_ids.len().to_string()),
            ("known_urs", state.known_urs_templates.len().to_string()),
        ],
    );
    Ok(())
}

pub fn classify(ctx: &Ctx) -> Result<(), CliError> {
    let model = ctx.category_model()?;
    let mut store = ctx.open_store()?;
    let records: Vec<IptRecord> = store.all()?;
    let total = records.len();
    let mut updated = 0usize;
    for mut record in records {
        let mut changed = false;
        if record.categories.is_empty() {
            let mut labels = model.predict_labels(&record.normalized_text);
            // Benign is exclusive: drop it when an illicit label fired too.
            if labels.len() > 1 {
                labels.remove(&CategoryLabel::Benign);
            }
            record.categories = labels;
            changed = true;
        }
        if record.language == "und" {
            let tag = tag_language(&record.normalized_text);
            if tag != "und" {
                record.language = tag;
                changed = true;
            }
        }
        if changed {
            store.append(&record)?;
            updated += 1;
        }
    }
    progress(
        "classify",
        &[("records", total.to_string()), ("updated", updated.to_string())],
    );
    Ok(())
}

pub fn extract_contacts_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let models = ContactModels {
        type_model: ctx.contact_type_model()?,
    };
    let mut store = ctx.open_store()?;
    let records: Vec<IptRecord> = store.all()?;
    let total = records.len();
    let mut updated = 0usize;
    let mut contacts_found = 0usize;
    for mut record in records {
        if !record.contacts.is_empty() {
            continue;
        }
        let contacts = extract_contacts(&record, &models)?;
        if contacts.is_empty() {
            continue;
        }
        contacts_found += contacts.len();
        record.contacts = contacts;
        store.append(&record)?;
        updated += 1;
    }
    progress(
        "extract_contacts",
        &[
            ("records", total.to_string()),
            ("updated", updated.to_string()),
            ("contacts", contacts_found.to_string()),
        ],
    );
    Ok(())
}

fn build_backend(
    config: &Config,
    vantage_flag: Option<&str>,
) -> Result<Box<dyn FetchBackend>, CliError> {
    let vantage = vantage_flag
        .map(str::to_string)
        .or_else(|| config.fetch.vantage.clone())
        .or_else(|| config.fetch.vantages.first().cloned())
        .unwrap_or_else(|| "default".to_string());
    match config.fetch.backend.as_deref().unwrap_or("scenario") {
        "scenario" => {
            let path = config.fetch.scenario.as_ref().ok_or_else(|| {
                CliError("config has no [fetch] scenario path".into())
            })?;
            let scenario = Scenario::load(&config.resolve(path))?;
            Ok(Box::new(ScenarioBackend::new(scenario, vantage)))
        }
        "http" => match &config.fetch.proxy {
            Some(proxy) => Ok(Box::new(HttpBackend::with_proxy(vantage, proxy)?)),
            None => Ok(Box::new(HttpBackend::new(vantage))),
        },
        other => Err(CliError(format!(
            "unknown fetch backend `{other}`, expected scenario or http"
        ))),
    }
}

pub fn infiltrate(
    ctx: &Ctx,
    websites: &Path,
    vantage: Option<&str>,
    cloaking: bool,
    taken_at: Option<&str>,
) -> Result<(), CliError> {
    let config = ctx.config()?;
    let sites = read_lines(websites, "websites")?;
    let backend = build_backend(config, vantage)?;
    let hop_cap = config.fetch.hop_cap.unwrap_or(DEFAULT_HOP_CAP);
    let patterns: Vec<&str> = if config.fetch.block_patterns.is_empty() {
        DEFAULT_BLOCK_PATTERNS.to_vec()
    } else {
        config.fetch.block_patterns.iter().map(String::as_str).collect()
    };
    let taken_at: DateTime<Utc> = match taken_at {
        Some(raw) => DateTime::parse_from_rfc3339(raw)
            .map_err(|e| CliError(format!("bad --taken-at `{raw}`: {e}")))?
            .with_timezone(&Utc),
        None => Utc::now(),
    };
    let category_model = if cloaking { Some(ctx.category_model()?) } else { None };
    let mut store = ctx.open_store()?;
    let mut errors = 0usize;
    for site in &sites {
        let snapshot = match snapshot_site(site, backend.as_ref(), hop_cap, &patterns, taken_at) {
            Ok(s) => s,
            Err(e) => {
                errors += 1;
                progress(
                    "snapshot_error",
                    &[("website", site.clone()), ("error", e.to_string())],
                );
                continue;
            }
        };
        store.append(&snapshot)?;
        progress(
            "snapshot",
            &[
                ("website", site.clone()),
                ("vantage", snapshot.vantage.clone()),
                ("hops", snapshot.chain.hops.len().to_string()),
                ("landing", snapshot.landing_fqdn.clone()),
                ("blocked", snapshot.blocked.to_string()),
                ("unreachable", snapshot.unreachable.to_string()),
            ],
        );
        if let Some(model) = &category_model {
            let report = detect_iframe_cloaking(&snapshot, backend.as_ref(), model)?;
            for (source, reason) in &report.fetch_failures {
                progress(
                    "iframe_fetch_error",
                    &[("website", site.clone()), ("src", source.clone()), ("error", reason.clone())],
                );
            }
            if let Some(finding) = report.finding {
                progress(
                    "cloaking",
                    &[
                        ("website", site.clone()),
                        ("iframe", finding.iframe_url),
                        ("iframe_apex", finding.iframe_apex),
                        ("host_apex", finding.host_apex),
                        (
                            "categories",
                            finding
                                .iframe_categories
                                .iter()
                                .map(|c| c.name())
                                .collect::<Vec<_>>()
                                .join("|"),
                        ),
                    ],
                );
            }
        }
    }
    progress(
        "infiltrate_done",
        &[
            ("websites", sites.len().to_string()),
            ("errors", errors.to_string()),
        ],
    );
    Ok(())
}

pub fn tg_fetch_cmd(ctx: &Ctx, handles: &Path) -> Result<(), CliError> {
    let config = ctx.config()?;
    let fixture = config
        .transport
        .fixture
        .as_ref()
        .ok_or_else(|| CliError("config has no [transport] fixture path".into()))?;
    let transport = FixtureTransport::load(config.resolve(fixture))?;
    let mut governor = RateGovernor::new(config.rate_limit.policy());
    let clock = VirtualClock::new();
    let mut store = ctx.open_store()?;
    for handle in read_lines(handles, "handles")? {
        let outcome = tg_fetch(&handle, &transport, &mut store, &mut governor, &clock)?;
        progress(
            "tg_fetch",
            &[
                ("handle", handle.clone()),
                ("kind", format!("{:?}", outcome.profile.kind).to_lowercase()),
                ("new_messages", outcome.new_messages.len().to_string()),
            ],
        );
    }
    Ok(())
}

#[derive(Deserialize)]
struct BoolRow {
    text: String,
    label: bool,
}

#[derive(Deserialize)]
struct KindRow {
    text: String,
    kind: ContactKind,
}

#[derive(Deserialize)]
struct LabelsRow {
    text: String,
    labels: Vec<String>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read corpus file `{}`: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(line).map_err(|e| {
            CliError(format!("corpus `{}` line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(rows)
}

fn labeled_corpus(path: &Path) -> Result<Vec<(String, BTreeSet<CategoryLabel>)>, CliError> {
    let rows: Vec<LabelsRow> = read_jsonl(path)?;
    rows.into_iter()
        .map(|row| {
            let mut labels = BTreeSet::new();
            for name in &row.labels {
                let label = CategoryLabel::parse(name).ok_or_else(|| {
                    CliError(format!("unknown category label `{name}` in corpus"))
                })?;
                labels.insert(label);
            }
            Ok((row.text, labels))
        })
        .collect()
}

pub fn train(
    kind: ModelKind,
    corpus: &Path,
    out: &Path,
    seed: u64,
    n_estimators: usize,
) -> Result<(), CliError> {
    let params = EnsembleParams {
        n_estimators,
        seed,
        max_features: match kind {
            ModelKind::Category => MaxFeatures::Sqrt,
            _ => MaxFeatures::One,
        },
        ..EnsembleParams::default()
    };
    let rows = match kind {
        ModelKind::Binary => {
            let rows: Vec<BoolRow> = read_jsonl(corpus)?;
            let corpus: Vec<(String, bool)> =
                rows.into_iter().map(|r| (r.text, r.label)).collect();
            let model = train_binary_model(&corpus, &params)?;
            model.save(out)?;
            corpus.len()
        }
        ModelKind::ContactType => {
            let rows: Vec<KindRow> = read_jsonl(corpus)?;
            let corpus: Vec<(String, ContactKind)> =
                rows.into_iter().map(|r| (r.text, r.kind)).collect();
            let model = train_contact_type_model(&corpus, &params)?;
            model.save(out)?;
            corpus.len()
        }
        ModelKind::Category => {
            let corpus = labeled_corpus(corpus)?;
            let label_set: BTreeSet<CategoryLabel> =
                corpus.iter().flat_map(|(_, ls)| ls.iter().copied()).collect();
            let labels: Vec<CategoryLabel> = label_set.into_iter().collect();
            let model = train_multilabel(&corpus, &labels, &params)?;
            model.save(out)?;
            corpus.len()
        }
    };
    progress(
        "train",
        &[
            ("kind", format!("{kind:?}").to_lowercase()),
            ("rows", rows.to_string()),
            ("out", out.display().to_string()),
        ],
    );
    Ok(())
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.4}")
}

pub fn eval(
    ctx: &Ctx,
    kind: ModelKind,
    model_path: &Path,
    corpus: &Path,
) -> Result<(), CliError> {
    let table = match kind {
        ModelKind::Binary => {
            let model = TreeEnsembleModel::load(model_path)?;
            let rows: Vec<BoolRow> = read_jsonl(corpus)?;
            let mut counts = ConfusionCounts::default();
            for row in &rows {
                let predicted = model.classify(&binary_ipt_features(&row.text).to_vec())?;
                match (predicted, row.label) {
                    (true, true) => counts.tp += 1,
                    (true, false) => counts.fp += 1,
                    (false, true) => counts.fn_count += 1,
                    (false, false) => counts.tn += 1,
                }
            }
            let eval = rsp_core::learn::ClassEval::from_counts("positive".into(), counts);
            ReportTable {
                title: "Binary IPT classifier evaluation".into(),
                columns: vec![
                    "label".into(),
                    "precision".into(),
                    "recall".into(),
                    "f1".into(),
                ],
                rows: vec![vec![
                    eval.label,
                    fmt_metric(eval.precision),
                    fmt_metric(eval.recall),
                    fmt_metric(eval.f1),
                ]],
                provenance: format!("{} rows from {}", rows.len(), corpus.display()),
            }
        }
        ModelKind::ContactType => {
            let model = TreeEnsembleModel::load(model_path)?;
            let rows: Vec<KindRow> = read_jsonl(corpus)?;
            let mut correct = 0usize;
            for row in &rows {
                if classify_contact_type(&row.text, &model)? == row.kind {
                    correct += 1;
                }
            }
            let accuracy = if rows.is_empty() {
                0.0
            } else {
                correct as f64 / rows.len() as f64
            };
            ReportTable {
                title: "Contact-type classifier evaluation".into(),
                columns: vec!["metric".into(), "value".into()],
                rows: vec![
                    vec!["rows".into(), rows.len().to_string()],
                    vec!["correct".into(), correct.to_string()],
                    vec!["accuracy".into(), fmt_metric(accuracy)],
                ],
                provenance: format!("{} rows from {}", rows.len(), corpus.display()),
            }
        }
        ModelKind::Category => {
            let model = MultiLabelModel::load(model_path)?;
            let corpus_rows = labeled_corpus(corpus)?;
            let report = evaluate(&model, &corpus_rows)?;
            let mut rows: Vec<Vec<String>> = report
                .per_class
                .iter()
                .map(|c| {
                    vec![
                        c.label.clone(),
                        fmt_metric(c.precision),
                        fmt_metric(c.recall),
                        fmt_metric(c.f1),
                    ]
                })
                .collect();
            rows.push(vec![
                "micro".into(),
                fmt_metric(report.micro_precision),
                fmt_metric(report.micro_recall),
                fmt_metric(report.micro_f1),
            ]);
            rows.push(vec![
                "lrap".into(),
                fmt_metric(report.lrap),
                String::new(),
                String::new(),
            ]);
            ReportTable {
                title: "Category classifier evaluation".into(),
                columns: vec![
                    "label".into(),
                    "precision".into(),
                    "recall".into(),
                    "f1".into(),
                ],
                rows,
                provenance: format!("{} rows from {}", corpus_rows.len(), corpus.display()),
            }
        }
    };
    print_table(&table, ctx.format);
    Ok(())
}

pub fn report(
    ctx: &Ctx,
    kind: ReportKind,
    ranking: Option<&Path>,
    top: usize,
) -> Result<(), CliError> {
    let store = ctx.open_store()?;
    match kind {
        ReportKind::Categories => {
            let table = report_category_distribution(&store)?;
            print_table(&table, ctx.format);
        }
        ReportKind::Abuse => {
            let tables = report_top_abused(&store, top)?;
            print_table(&tables.urs, ctx.format);
            println!();
            print_table(&tables.apex, ctx.format);
        }
        ReportKind::Popularity => {
            let ranking = ranking.ok_or_else(|| {
                CliError("report --kind popularity needs --ranking <file>".into())
            })?;
            let table = report_popularity_overlap(&store, ranking)?;
            print_table(&table, ctx.format);
        }
    }
    Ok(())
}

pub fn probe_exposure(ctx: &Ctx, keywords: &Path, k_levels: &str) -> Result<(), CliError> {
    let config = ctx.config()?;
    let keywords = read_lines(keywords, "keywords")?;
    let ks: Vec<usize> = k_levels
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError(format!("bad k value `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let section = config
        .adapters
        .first()
        .ok_or_else(|| CliError("config has no [[adapters]]".into()))?;
    let docs = MockSearchEngine::load_corpus(&config.resolve(&section.corpus))?;
    let engine = MockSearchEngine::new(section.id.clone(), docs).with_capabilities(
        AdapterCapabilities {
            supports_site_filter: section.site_filter,
            max_results_per_query: section.max_results,
        },
    );
    let model = ctx.binary_model()?;
    let report = exposure_probe(&keywords, &engine, &ks, &model)?;
    for (keyword, reason) in &report.skipped {
        progress(
            "probe_skipped",
            &[("keyword", keyword.clone()), ("error", reason.clone())],
        );
    }
    let rows = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.k.to_string(),
                row.poisoned_queries.to_string(),
                format!("{:.2}", row.poisoned_rate),
                row.ipt_count.to_string(),
            ]
        })
        .collect();
    let table = ReportTable {
        title: "Search exposure probe".into(),
        columns: vec![
            "top_k".into(),
            "poisoned_keywords".into(),
            "poisoned_rate_percent".into(),
            "distinct_ipts".into(),
        ],
        rows,
        provenance: format!(
            "{} keywords queried on adapter {}; {} skipped",
            report.queried_keywords,
            section.id,
            report.skipped.len()
        ),
    };
    print_table(&table, ctx.format);
    Ok(())
}
