//! `rsp` command line. Subcommands map one-to-one onto library
//! operations: hunt, classify, extract-contacts, infiltrate, tg-fetch,
//! train, eval, report, probe-exposure.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use rsp_core::report::OutputFormat;

pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<rsp_core::Error> for CliError {
    fn from(e: rsp_core::Error) -> CliError {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelKind {
    Binary,
    ContactType,
    Category,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReportKind {
    Categories,
    Abuse,
    Popularity,
}

#[derive(Parser)]
#[command(name = "rsp", version, about = "Search-poisoning study toolkit")]
struct Cli {
    /// TOML config file; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record store directory; overrides the config's [store] path.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Table output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Snowball IPT discovery across the configured search adapters.
    Hunt {
        /// File with one seed keyword per line.
        #[arg(long)]
        seeds_keywords: PathBuf,
        /// File with one seed URS template per line.
        #[arg(long)]
        seeds_urs: PathBuf,
    },
    /// Assign category labels and language tags to stored IPTs.
    Classify,
    /// Extract typed contacts from stored IPTs.
    ExtractContacts,
    /// Snapshot websites: follow redirects, record landings, flag blocks.
    Infiltrate {
        /// File with one website URL per line.
        #[arg(long)]
        websites: PathBuf,
        /// Vantage label; defaults to the config's fetch vantage.
        #[arg(long)]
        vantage: Option<String>,
        /// Also run iframe cloaking detection on each snapshot.
        #[arg(long)]
        cloaking: bool,
        /// RFC 3339 snapshot timestamp; defaults to now.
        #[arg(long)]
        taken_at: Option<String>,
    },
    /// Fetch Telegram profiles and incremental messages.
    TgFetch {
        /// File with one handle per line.
        #[arg(long)]
        handles: PathBuf,
    },
    /// Train a model from a JSONL corpus.
    Train {
        #[arg(long, value_enum)]
        kind: ModelKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 41)]
        seed: u64,
        #[arg(long, default_value_t = 31)]
        n_estimators: usize,
    },
    /// Evaluate a saved model against a labeled JSONL corpus.
    Eval {
        #[arg(long, value_enum)]
        kind: ModelKind,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Print measurement tables from the record store.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Popularity ranking file, one apex domain per line (rank = line).
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Row cap for the abuse tables.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Measure how often IPTs surface in top-k results per keyword.
    ProbeExposure {
        /// File with one keyword per line.
        #[arg(long)]
        keywords: PathBuf,
        /// Comma-separated ascending cutoffs.
        #[arg(long, default_value = "10,20,50,100")]
        k: String,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Some(config::Config::load(path)?),
        None => None,
    };
    let ctx = commands::Ctx {
        config,
        store_override: cli.store.clone(),
        format: match cli.format {
            Format::Text => OutputFormat::Text,
            Format::Csv => OutputFormat::Csv,
        },
    };
    match &cli.command {
        Command::Hunt { seeds_keywords, seeds_urs } => {
            commands::hunt(&ctx, seeds_keywords, seeds_urs)
        }
        Command::Classify => commands::classify(&ctx),
        Command::ExtractContacts => commands::extract_contacts_cmd(&ctx),
        Command::Infiltrate { websites, vantage, cloaking, taken_at } => commands::infiltrate(
            &ctx,
            websites,
            vantage.as_deref(),
            *cloaking,
            taken_at.as_deref(),
        ),
        Command::TgFetch { handles } => commands::tg_fetch_cmd(&ctx, handles),
        Command::Train { kind, corpus, out, seed, n_estimators } => {
            commands::train(*kind, corpus, out, *seed, *n_estimators)
        }
        Command::Eval { kind, model, corpus } => commands::eval(&ctx, *kind, model, corpus),
        Command::Report { kind, ranking, top } => {
            commands::report(&ctx, *kind, ranking.as_deref(), *top)
        }
        Command::ProbeExposure { keywords, k } => commands::probe_exposure(&ctx, keywords, k),
    }
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn main() {
    std::process::exit(cli_main(std::env::args_os()));
}
