//! Measurement report tables over a record store: category distribution,
//! most-abused reflection schemes and apex domains, and overlap with a
//! site popularity ranking.

pub mod lang;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflection::UrlReflectionScheme;
use crate::store::RecordStore;
use crate::types::{CategoryLabel, IptRecord};

pub use lang::{tag_language, LanguageTagger, ScriptMajorityTagger};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<OutputFormat> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown format `{other}`, expected text or csv"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Human-readable description of the store query behind the rows.
    pub provenance: String,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ReportTable {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.render_text(),
            OutputFormat::Csv => self.render_csv(),
        }
    }

    /// Aligned plain-text table with title and provenance lines.
    pub fn render_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let fmt_row = |cells: &[String]| -> String {
            let padded: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{c:<width$}", width = widths[i]))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&fmt_row(&self.columns));
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&fmt_row(row));
            out.push('\n');
        }
        out.push_str(&format!("provenance: {}\n", self.provenance));
        out
    }

    /// Header plus rows; title and provenance are not part of the CSV.
    pub fn render_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| csv_field(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64 * 100.0
    }
}

fn fmt_pct(p: f64) -> String {
    format!("{p:.2}")
}

/// Per-category share of illicit label assignments across classified
/// records. A multi-label record counts once per assigned label; rows
/// sort by share descending, then category name.
pub fn report_category_distribution(store: &RecordStore) -> Result<ReportTable> {
    let records: Vec<IptRecord> = store.all()?;
    if records.is_empty() {
        return Err(Error::EmptyStore("no ipt records to report on".into()));
    }
    let mut per_label: BTreeMap<CategoryLabel, usize> = BTreeMap::new();
    let mut benign_only = 0usize;
    let mut unclassified = 0usize;
    for record in &records {
        if record.categories.is_empty() {
            unclassified += 1;
            continue;
        }
        let illicit: Vec<CategoryLabel> = record
            .categories
            .iter()
            .copied()
            .filter(|l| *l != CategoryLabel::Benign)
            .collect();
        if illicit.is_empty() {
            benign_only += 1;
            continue;
        }
        for label in illicit {
            *per_label.entry(label).or_insert(0) += 1;
        }
    }
    let assignments: usize = per_label.values().sum();
    if assignments == 0 {
        return Err(Error::EmptyStore(
            "no classified ipt records to report on".into(),
        ));
    }
    let mut tallies: Vec<(CategoryLabel, usize)> = per_label.into_iter().collect();
    tallies.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name().cmp(b.0.name())));
    let rows = tallies
        .into_iter()
        .map(|(label, count)| {
            vec![
                label.name().to_string(),
                count.to_string(),
                fmt_pct(pct(count, assignments)),
            ]
        })
        .collect();
    Ok(ReportTable {
        title: "IPT category distribution".into(),
        columns: vec!["category".into(), "ipts".into(), "share_percent".into()],
        rows,
        provenance: format!(
            "{} ipt records; {} illicit label assignments; {} benign-only and {} unclassified records excluded",
            records.len(),
            assignments,
            benign_only,
            unclassified
        ),
    })
}

/// Who gets credit for an IPT: the distinct IPT ids seen through a key
/// and the (urs, entry) source pairs behind them.
#[derive(Debug, Clone, Default)]
struct Attribution {
    ipts: BTreeSet<String>,
    pairs: BTreeSet<(String, String)>,
}

struct AbuseIndex {
    by_template: BTreeMap<String, Attribution>,
    by_apex: BTreeMap<String, Attribution>,
    total_ipts: usize,
    total_pairs: usize,
}

fn abuse_index(store: &RecordStore) -> Result<AbuseIndex> {
    let records: Vec<IptRecord> = store.all()?;
    if records.is_empty() {
        return Err(Error::EmptyStore("no ipt records to report on".into()));
    }
    let schemes: Vec<UrlReflectionScheme> = store.all()?;
    let by_id: BTreeMap<String, &UrlReflectionScheme> =
        schemes.iter().map(|s| (s.id(), s)).collect();

    let mut by_template: BTreeMap<String, Attribution> = BTreeMap::new();
    let mut by_apex: BTreeMap<String, Attribution> = BTreeMap::new();
    let mut all_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for record in &records {
        for source in &record.sources {
            // Sources pointing at schemes the store has lost keep their
            // raw id as the key so the tally stays complete.
            let (template, apex) = match by_id.get(&source.urs_id) {
                Some(s) => (s.template.clone(), s.apex_domain.clone()),
                None => (source.urs_id.clone(), source.urs_id.clone()),
            };
            let pair = (source.urs_id.clone(), source.entry_id.clone());
            all_pairs.insert(pair.clone());
            for (map, key) in [(&mut by_template, template), (&mut by_apex, apex)] {
                let slot = map.entry(key).or_default();
                slot.ipts.insert(record.id.clone());
                slot.pairs.insert(pair.clone());
            }
        }
    }
    Ok(AbuseIndex {
        by_template,
        by_apex,
        total_ipts: records.len(),
        total_pairs: all_pairs.len(),
    })
}

/// Rows sorted by distinct-IPT count descending, then key. Returned as
/// (key, attribution) ready for table building.
fn ranked(map: &BTreeMap<String, Attribution>) -> Vec<(&String, &Attribution)> {
    let mut rows: Vec<(&String, &Attribution)> = map.iter().collect();
    rows.sort_by(|a, b| {
        b.1.ipts
            .len()
            .cmp(&a.1.ipts.len())
            .then_with(|| a.0.cmp(b.0))
    });
    rows
}

/// Share of all IPT ids covered by the top `k_percent` of ranked keys,
/// counting each id once however many keys it appears under.
fn cumulative_share(rows: &[(&String, &Attribution)], total_ipts: usize, k_percent: usize) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let take = (rows.len() * k_percent).div_ceil(100).max(1);
    let mut union: BTreeSet<&String> = BTreeSet::new();
    for (_, attribution) in rows.iter().take(take) {
        union.extend(attribution.ipts.iter());
    }
    pct(union.len(), total_ipts)
}

pub const CUMULATIVE_SHARE_KS: [usize; 2] = [5, 10];

#[derive(Debug, Clone)]
pub struct AbuseTables {
    pub urs: ReportTable,
    pub apex: ReportTable,
    /// (k percent, cumulative %IPTs of the top k% URS templates).
    pub urs_cumulative: Vec<(usize, f64)>,
    pub apex_cumulative: Vec<(usize, f64)>,
}

fn abuse_table(
    title: &str,
    key_column: &str,
    rows: &[(&String, &Attribution)],
    n: usize,
    index: &AbuseIndex,
    cumulative: &[(usize, f64)],
) -> ReportTable {
    let table_rows = rows
        .iter()
        .take(n)
        .map(|(key, attribution)| {
            vec![
                (*key).clone(),
                attribution.ipts.len().to_string(),
                fmt_pct(pct(attribution.ipts.len(), index.total_ipts)),
                attribution.pairs.len().to_string(),
                fmt_pct(pct(attribution.pairs.len(), index.total_pairs)),
            ]
        })
        .collect();
    let shares: Vec<String> = cumulative
        .iter()
        .map(|(k, share)| format!("top {k}% cover {} of ipts", fmt_pct(*share)))
        .collect();
    ReportTable {
        title: title.into(),
        columns: vec![
            key_column.into(),
            "ipts".into(),
            "ipt_share_percent".into(),
            "rsps".into(),
            "rsp_share_percent".into(),
        ],
        rows: table_rows,
        provenance: format!(
            "{} ipt records over {} source pairs; {}",
            index.total_ipts,
            index.total_pairs,
            shares.join("; ")
        ),
    }
}

/// Top-n most-abused URS templates and apex domains, with each key's
/// share of distinct IPT ids and of reflected search results (RSPs),
/// plus cumulative top-k% IPT coverage for k in {5, 10}.
pub fn report_top_abused(store: &RecordStore, n: usize) -> Result<AbuseTables> {
    let index = abuse_index(store)?;
    let template_rows = ranked(&index.by_template);
    let apex_rows = ranked(&index.by_apex);
    let urs_cumulative: Vec<(usize, f64)> = CUMULATIVE_SHARE_KS
        .iter()
        .map(|&k| (k, cumulative_share(&template_rows, index.total_ipts, k)))
        .collect();
    let apex_cumulative: Vec<(usize, f64)> = CUMULATIVE_SHARE_KS
        .iter()
        .map(|&k| (k, cumulative_share(&apex_rows, index.total_ipts, k)))
        .collect();
    Ok(AbuseTables {
        urs: abuse_table(
            "Most abused URS templates",
            "template",
            &template_rows,
            n,
            &index,
            &urs_cumulative,
        ),
        apex: abuse_table(
            "Most abused apex domains",
            "apex_domain",
            &apex_rows,
            n,
            &index,
            &apex_cumulative,
        ),
        urs_cumulative,
        apex_cumulative,
    })
}

pub const POPULARITY_THRESHOLDS: [usize; 5] = [100, 1_000, 10_000, 100_000, 1_000_000];

fn load_ranking(path: &Path) -> Result<BTreeMap<String, usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::UnreadableRanking {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut ranks = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let apex = line.trim().to_ascii_lowercase();
        if apex.is_empty() {
            continue;
        }
        // First occurrence keeps the better rank.
        ranks.entry(apex).or_insert(i + 1);
    }
    Ok(ranks)
}

/// Joins abused apex domains against a popularity ranking (one apex per
/// line, rank = line number). One row per threshold: abused domains at
/// or above it, with their IPT and RSP shares. A ranking disjoint from
/// the abused set yields an empty table.
pub fn report_popularity_overlap(store: &RecordStore, ranking: &Path) -> Result<ReportTable> {
    let index = abuse_index(store)?;
    let ranks = load_ranking(ranking)?;
    let provenance = format!(
        "{} abused apex domains joined against {} ranked domains; {} ipt records, {} source pairs",
        index.by_apex.len(),
        ranks.len(),
        index.total_ipts,
        index.total_pairs
    );
    let any_overlap = index.by_apex.keys().any(|apex| ranks.contains_key(apex));
    let mut rows = Vec::new();
    if any_overlap {
        for threshold in POPULARITY_THRESHOLDS {
            let mut domains = 0usize;
            let mut ipts: BTreeSet<&String> = BTreeSet::new();
            let mut pairs: BTreeSet<&(String, String)> = BTreeSet::new();
            for (apex, attribution) in &index.by_apex {
                match ranks.get(apex) {
                    Some(&rank) if rank <= threshold => {
                        domains += 1;
                        ipts.extend(attribution.ipts.iter());
                        pairs.extend(attribution.pairs.iter());
                    }
                    _ => {}
                }
            }
            rows.push(vec![
                threshold.to_string(),
                domains.to_string(),
                fmt_pct(pct(ipts.len(), index.total_ipts)),
                fmt_pct(pct(pairs.len(), index.total_pairs)),
            ]);
        }
    }
    Ok(ReportTable {
        title: "Abuse of popular websites".into(),
        columns: vec![
            "rank_within".into(),
            "abused_domains".into(),
            "ipt_share_percent".into(),
            "rsp_share_percent".into(),
        ],
        rows,
        provenance,
    })
}
