//! End-to-end tests against the compiled `rsp` binary. A shared fixture
//! directory holds the mock search corpus, trained desk models, fetch
//! scenario, and Telegram fixture; each test gets its own store.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use chrono::{TimeZone, Utc};
use tempfile::TempDir;

use rsp_core::apex_domain;
use rsp_core::reflection::{ReflectionParam, UrlReflectionScheme};
use rsp_core::store::RecordStore;
use rsp_core::synth::{
    binary_corpus, desk_binary_model, desk_category_model, desk_contact_type_model,
    desk_segment_model, snowball_world,
};
use rsp_core::types::{CategoryLabel, IptRecord, IptSource};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rsp")
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    Output {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

static FIXTURE: OnceLock<TempDir> = OnceLock::new();

/// Builds the shared fixture tree once per test process.
fn fixture() -> &'static Path {
    FIXTURE
        .get_or_init(|| {
            let dir = tempfile::tempdir().expect("tempdir");
            let root = dir.path();

            let world = snowball_world(7, 24, 3, 2);
            let mut corpus = String::new();
            for doc in &world.docs {
                corpus.push_str(&serde_json::to_string(doc).unwrap());
                corpus.push('\n');
            }
            fs::write(root.join("corpus.jsonl"), corpus).unwrap();
            fs::write(root.join("seeds_kw.txt"), format!("{}\n", world.seed_keyword)).unwrap();
            fs::write(
                root.join("seeds_urs.txt"),
                format!("{}\n", world.seed_urs_template),
            )
            .unwrap();

            fs::create_dir(root.join("models")).unwrap();
            desk_binary_model(41).save(&root.join("models/binary.json")).unwrap();
            desk_segment_model(41).save(&root.join("models/segment.json")).unwrap();
            desk_contact_type_model(41)
                .save(&root.join("models/contact_type.json"))
                .unwrap();
            desk_category_model(41).save(&root.join("models/category.json")).unwrap();

            let scenario = serde_json::json!({
                "routes": {
                    "https://shop000a.com/": {
                        "status": 302,
                        "headers": {"Location": "https://host-shell.test/"}
                    },
                    "https://host-shell.test/": {
                        "status": 200,
                        "body": "<html><body>周末读书会照常举行 \
                                 <iframe src=\"https://casino-frame.example/\"></iframe>\
                                 </body></html>"
                    },
                    "https://casino-frame.example/": {
                        "status": 200,
                        "body": "<html><body>网赌上分平台 稳定回水 彩票计划群</body></html>"
                    },
                    "https://blocked.example.com/": {
                        "status": 403,
                        "body": "Access denied"
                    }
                }
            });
            fs::write(root.join("scenario.json"), scenario.to_string()).unwrap();

            let tg = serde_json::json!({
                "promo_channel": {
                    "profile": {
                        "handle": "promo_channel",
                        "kind": "channel",
                        "subscriber_or_member_count": 1200,
                        "fetched_at": "2023-06-01T00:00:00Z"
                    },
                    "messages": [
                        {"id": 1, "timestamp": "2023-06-01T00:00:00Z",
                         "text": "网赌上分平台 稳定回水 加微信:bet01ax"},
                        {"id": 2, "timestamp": "2023-06-01T01:00:00Z",
                         "text": "第2期读书会周末照常举行"}
                    ]
                }
            });
            fs::write(root.join("tg_fixture.json"), tg.to_string()).unwrap();

            fs::write(
                root.join("config.toml"),
                r#"[store]
path = "store-default"

[models]
binary = "models/binary.json"
segment = "models/segment.json"
contact_type = "models/contact_type.json"
category = "models/category.json"

[[adapters]]
id = "mock0"
corpus = "corpus.jsonl"

[fetch]
backend = "scenario"
scenario = "scenario.json"
vantage = "us"

[transport]
fixture = "tg_fixture.json"
"#,
            )
            .unwrap();
            dir
        })
        .path()
}

fn config_arg() -> String {
    fixture().join("config.toml").display().to_string()
}

fn seeds_kw() -> String {
    fixture().join("seeds_kw.txt").display().to_string()
}

fn seeds_urs() -> String {
    fixture().join("seeds_urs.txt").display().to_string()
}

/// Runs hunt into `store`, panicking on failure.
fn hunt_into(store: &Path) -> Output {
    let out = run(&[
        "--config",
        &config_arg(),
        "--store",
        &store.display().to_string(),
        "hunt",
        "--seeds-keywords",
        &seeds_kw(),
        "--seeds-urs",
        &seeds_urs(),
    ]);
    assert_eq!(out.code, 0, "hunt failed: {}", out.stderr);
    out
}

fn classify_store(store: &Path) {
    let out = run(&[
        "--config",
        &config_arg(),
        "--store",
        &store.display().to_string(),
        "classify",
    ]);
    assert_eq!(out.code, 0, "classify failed: {}", out.stderr);
}

/// Path of one record file inside a store rooted at `dir`.
fn store_file(dir: &Path, kind: &str) -> PathBuf {
    dir.join("store").join(format!("{kind}.jsonl"))
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.code, 2);
}

#[test]
fn missing_seeds_file_is_an_operational_error() {
    let store = tempfile::tempdir().unwrap();
    let out = run(&[
        "--config",
        &config_arg(),
        "--store",
        &store.path().display().to_string(),
        "hunt",
        "--seeds-keywords",
        "/nonexistent/seeds.txt",
        "--seeds-urs",
        &seeds_urs(),
    ]);
    assert_eq!(out.code, 1);
    assert!(
        out.stderr.contains("/nonexistent/seeds.txt"),
        "stderr must name the missing file: {}",
        out.stderr
    );
}

#[test]
fn hunt_without_config_is_an_operational_error() {
    let out = run(&[
        "hunt",
        "--seeds-keywords",
        &seeds_kw(),
        "--seeds-urs",
        &seeds_urs(),
    ]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("--config"), "{}", out.stderr);
}

#[test]
fn hunt_discovers_planted_ipts() {
    let store = tempfile::tempdir().unwrap();
    let out = hunt_into(store.path());
    assert!(out.stderr.contains("event=hunt_done"), "{}", out.stderr);
    assert!(line_count(&store_file(store.path(), "ipts")) >= 10);
    assert!(line_count(&store_file(store.path(), "urs")) >= 3);
}

#[test]
fn classify_then_category_report_prints_a_table() {
    let store = tempfile::tempdir().unwrap();
    hunt_into(store.path());
    classify_store(store.path());
    let out = run(&[
        "--store",
        &store.path().display().to_string(),
        "report",
        "--kind",
        "categories",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("IPT category distribution"), "{}", out.stdout);
    assert!(out.stdout.contains("provenance:"), "{}", out.stdout);
}

#[test]
fn report_reads_a_prebuilt_fixture_store() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = RecordStore::open(dir.path()).unwrap();
    let template = "https://www.fixture-portal.com/s?wd={R}";
    let probe = url::Url::parse(&template.replacen("{R}", "x", 1)).unwrap();
    let fqdn = probe.host_str().unwrap().to_string();
    let urs = UrlReflectionScheme {
        template: template.to_string(),
        apex_domain: apex_domain(&fqdn),
        fqdn,
        reflection_param: ReflectionParam::Query("wd".into()),
    };
    store.append(&urs).unwrap();
    let seen = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
    for i in 0..4 {
        let source = IptSource {
            entry_id: format!("entry{i}"),
            urs_id: urs.id(),
        };
        let mut record = IptRecord::new(format!("网赌上分{i}【微信:qw{i:02}aa】"), source, seen);
        record.categories.insert(CategoryLabel::Gambling);
        store.append(&record).unwrap();
    }
    drop(store);

    let out = run(&[
        "--store",
        &dir.path().display().to_string(),
        "report",
        "--kind",
        "categories",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("Gambling"), "{}", out.stdout);
    assert!(out.stdout.contains("100.00"), "{}", out.stdout);

    let abuse = run(&[
        "--store",
        &dir.path().display().to_string(),
        "report",
        "--kind",
        "abuse",
    ]);
    assert_eq!(abuse.code, 0, "{}", abuse.stderr);
    assert!(abuse.stdout.contains("fixture-portal.com"), "{}", abuse.stdout);
}

#[test]
fn report_on_empty_store_is_an_operational_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--store",
        &dir.path().display().to_string(),
        "report",
        "--kind",
        "categories",
    ]);
    assert_eq!(out.code, 1);
}

#[test]
fn csv_format_emits_a_csv_header() {
    let store = tempfile::tempdir().unwrap();
    hunt_into(store.path());
    classify_store(store.path());
    let out = run(&[
        "--store",
        &store.path().display().to_string(),
        "--format",
        "csv",
        "report",
        "--kind",
        "categories",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let first = out.stdout.lines().next().unwrap_or_default();
    assert!(first.contains(','), "csv header expected: {first}");
    assert!(!out.stdout.contains("provenance:"), "csv has no provenance tail");
}

#[test]
fn popularity_report_needs_a_ranking_file() {
    let store = tempfile::tempdir().unwrap();
    hunt_into(store.path());
    let out = run(&[
        "--store",
        &store.path().display().to_string(),
        "report",
        "--kind",
        "popularity",
    ]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("--ranking"), "{}", out.stderr);
}

#[test]
fn popularity_report_counts_ranked_domains() {
    let store = tempfile::tempdir().unwrap();
    hunt_into(store.path());
    let ranking = store.path().join("ranking.txt");
    fs::write(&ranking, "portal00.example.com\nexample.com\n").unwrap();
    let out = run(&[
        "--store",
        &store.path().display().to_string(),
        "report",
        "--kind",
        "popularity",
        "--ranking",
        &ranking.display().to_string(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("rank_within"), "{}", out.stdout);
}

#[test]
fn extract_contacts_fills_contact_fields() {
    let store = tempfile::tempdir().unwrap();
    hunt_into(store.path());
    let out = run(&[
        "--config",
        &config_arg(),
        "--store",
        &store.path().display().to_string(),
        "extract-contacts",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stderr.contains("event=extract_contacts"), "{}", out.stderr);
    let ipts = fs::read_to_string(store_file(store.path(), "ipts")).unwrap();
    assert!(ipts.contains("\"contacts\":[{"), "contacts were extracted");
}

#[test]
fn infiltrate_snapshots_and_flags_cloaking() {
    let store = tempfile::tempdir().unwrap();
    let websites = store.path().join("websites.txt");
    fs::write(&websites, "https://shop000a.com/\nhttps://blocked.example.com/\n").unwrap();
    let out = run(&[
        "--config",
        &config_arg(),
        "--store",
        &store.path().display().to_string(),
        "infiltrate",
        "--websites",
        &websites.display().to_string(),
        "--cloaking",
        "--taken-at",
        "2023-06-02T00:00:00Z",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(line_count(&store_file(store.path(), "snapshots")), 2);
    assert!(out.stderr.contains("blocked=true"), "{}", out.stderr);
    assert!(
        out.stderr.contains("event=cloaking"),
        "cloaking finding expected: {}",
        out.stderr
    );
    assert!(out.stderr.contains("casino-frame.example"), "{}", out.stderr);
}

#[test]
fn tg_fetch_persists_messages_once() {
    let store = tempfile::tempdir().unwrap();
    let handles = store.path().join("handles.txt");
    fs::write(&handles, "promo_channel\n").unwrap();
    let args = [
        "--config",
        &config_arg(),
        "--store",
        &store.path().display().to_string(),
        "tg-fetch",
        "--handles",
        &handles.display().to_string(),
    ];
    let first = run(&args.iter().map(|s| s as &str).collect::<Vec<_>>());
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert!(first.stderr.contains("new_messages=2"), "{}", first.stderr);
    assert_eq!(line_count(&store_file(store.path(), "tg_messages")), 2);

    let second = run(&args.iter().map(|s| s as &str).collect::<Vec<_>>());
    assert_eq!(second.code, 0, "{}", second.stderr);
    assert!(second.stderr.contains("new_messages=0"), "{}", second.stderr);
    assert_eq!(line_count(&store_file(store.path(), "tg_messages")), 2);
}

#[test]
fn train_and_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("binary.jsonl");
    let mut lines = String::new();
    for (text, label) in binary_corpus(5, 40, 40) {
        lines.push_str(
            &serde_json::to_string(&serde_json::json!({"text": text, "label": label})).unwrap(),
        );
        lines.push('\n');
    }
    fs::write(&corpus_path, lines).unwrap();
    let model_path = dir.path().join("model.json");

    let train = run(&[
        "train",
        "--kind",
        "binary",
        "--corpus",
        &corpus_path.display().to_string(),
        "--out",
        &model_path.display().to_string(),
        "--seed",
        "9",
        "--n-estimators",
        "15",
    ]);
    assert_eq!(train.code, 0, "{}", train.stderr);
    assert!(model_path.exists());

    let eval = run(&[
        "eval",
        "--kind",
        "binary",
        "--model",
        &model_path.display().to_string(),
        "--corpus",
        &corpus_path.display().to_string(),
    ]);
    assert_eq!(eval.code, 0, "{}", eval.stderr);
    assert!(eval.stdout.contains("precision"), "{}", eval.stdout);
}

#[test]
fn probe_exposure_prints_the_cutoff_table() {
    let dir = tempfile::tempdir().unwrap();
    let keywords = dir.path().join("keywords.txt");
    fs::write(&keywords, "seedkw000\n微信:wxh000a\nnosuchkeywordxyz\n").unwrap();
    let out = run(&[
        "--config",
        &config_arg(),
        "probe-exposure",
        "--keywords",
        &keywords.display().to_string(),
        "--k",
        "1,5,10",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("top_k"), "{}", out.stdout);
    assert_eq!(
        out.stdout.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(),
        3,
        "one row per cutoff: {}",
        out.stdout
    );
}

#[test]
fn hunt_pipeline_is_deterministic() {
    let store_a = tempfile::tempdir().unwrap();
    let store_b = tempfile::tempdir().unwrap();
    hunt_into(store_a.path());
    hunt_into(store_b.path());
    classify_store(store_a.path());
    classify_store(store_b.path());
    for kind in ["ipts.jsonl", "urs.jsonl", "search_results.jsonl"] {
        let a = fs::read(store_a.path().join("store").join(kind)).unwrap();
        let b = fs::read(store_b.path().join("store").join(kind)).unwrap();
        assert_eq!(a, b, "{kind} differs between identical runs");
    }
    let report_a = run(&[
        "--store",
        &store_a.path().display().to_string(),
        "report",
        "--kind",
        "abuse",
    ]);
    let report_b = run(&[
        "--store",
        &store_b.path().display().to_string(),
        "report",
        "--kind",
        "abuse",
    ]);
    assert_eq!(report_a.code, 0);
    assert_eq!(report_a.stdout, report_b.stdout);
}
