//! Telegram account infiltration over an abstract messaging transport:
//! profile lookup, incremental message pulls for channels and groups,
//! and category distribution over fetched messages.

use std::cell::Cell;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hunter::rate::{Clock, RateGovernor};
use crate::learn::multilabel::MultiLabelModel;
use crate::store::{RecordStore, StoredRecord};
use crate::types::CategoryLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TgAccountKind {
    User,
    Bot,
    Channel,
    Group,
}

impl TgAccountKind {
    /// Only channels and groups carry a message history worth pulling.
    pub fn has_messages(self) -> bool {
        matches!(self, TgAccountKind::Channel | TgAccountKind::Group)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelegramAccountProfile {
    pub handle: String,
    pub kind: TgAccountKind,
    /// None when the transport could not determine the count.
    pub subscriber_or_member_count: Option<u64>,
    pub fetched_at: DateTime<Utc>,
}

impl StoredRecord for TelegramAccountProfile {
    const KIND: &'static str = "tg_profiles";

    fn record_id(&self) -> String {
        self.handle.clone()
    }

    fn validate(&self) -> Result<()> {
        if self.handle.is_empty() {
            return Err(Error::invariant("profile handle must be non-empty"));
        }
        Ok(())
    }

    fn merge_from(&mut self, newer: &Self) -> bool {
        if newer.fetched_at >= self.fetched_at {
            *self = newer.clone();
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TgMessage {
    pub id: u64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredTgMessage {
    pub handle: String,
    pub id: u64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

impl StoredRecord for StoredTgMessage {
    const KIND: &'static str = "tg_messages";

    fn record_id(&self) -> String {
        format!("{}:{}", self.handle, self.id)
    }

    fn validate(&self) -> Result<()> {
        if self.handle.is_empty() {
            return Err(Error::invariant("message handle must be non-empty"));
        }
        Ok(())
    }
}

/// Messaging transport contract: profile lookup, message history since a
/// given id, and joining an account before reading it.
pub trait MessagingTransport {
    fn get_profile(&self, handle: &str) -> Result<TelegramAccountProfile>;
    fn fetch_messages(&self, handle: &str, since_id: Option<u64>) -> Result<Vec<TgMessage>>;
    fn join(&self, handle: &str) -> Result<()>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureMessage {
    id: u64,
    timestamp: DateTime<Utc>,
    text: String,
    /// Messages become visible once the fixture's epoch reaches this.
    #[serde(default)]
    epoch: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureAccount {
    profile: TelegramAccountProfile,
    #[serde(default)]
    messages: Vec<FixtureMessage>,
}

/// File-fixture transport. Accounts come from a JSON map keyed by handle;
/// advancing the epoch reveals later messages, which lets tests replay
/// incremental fetches against a fixed fixture.
pub struct FixtureTransport {
    accounts: BTreeMap<String, FixtureAccount>,
    current_epoch: Cell<usize>,
    /// Handles whose first `rate_limit_failures` message fetches fail
    /// with a transport rate-limit error.
    rate_limited: BTreeMap<String, Cell<u32>>,
}

impl FixtureTransport {
    pub fn from_json(json: &str) -> Result<FixtureTransport> {
        let accounts: BTreeMap<String, FixtureAccount> = serde_json::from_str(json)?;
        Ok(FixtureTransport {
            accounts,
            current_epoch: Cell::new(0),
            rate_limited: BTreeMap::new(),
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<FixtureTransport> {
        let json = std::fs::read_to_string(path.as_ref()).map_err(Error::StorageIo)?;
        FixtureTransport::from_json(&json)
    }

    pub fn set_epoch(&self, epoch: usize) {
        self.current_epoch.set(epoch);
    }

    /// Makes the next `failures` fetch_messages calls for `handle` fail
    /// with a rate-limit transport error.
    pub fn rate_limit_next(&mut self, handle: &str, failures: u32) {
        self.rate_limited
            .insert(handle.to_string(), Cell::new(failures));
    }

    fn account(&self, handle: &str) -> Result<&FixtureAccount> {
        self.accounts
            .get(handle)
            .ok_or_else(|| Error::UnknownHandle(handle.to_string()))
    }
}

impl MessagingTransport for FixtureTransport {
    fn get_profile(&self, handle: &str) -> Result<TelegramAccountProfile> {
        Ok(self.account(handle)?.profile.clone())
    }

    fn fetch_messages(&self, handle: &str, since_id: Option<u64>) -> Result<Vec<TgMessage>> {
        if let Some(left) = self.rate_limited.get(handle) {
            if left.get() > 0 {
                left.set(left.get() - 1);
                return Err(Error::Transport("rate limit exceeded".into()));
            }
        }
        let account = self.account(handle)?;
        let epoch = self.current_epoch.get();
        let floor = since_id.unwrap_or(0);
        let mut out: Vec<TgMessage> = account
            .messages
            .iter()
            .filter(|m| m.epoch <= epoch && (since_id.is_none() || m.id > floor))
            .map(|m| TgMessage {
                id: m.id,
                timestamp: m.timestamp,
                text: m.text.clone(),
            })
            .collect();
        out.sort_by_key(|m| m.id);
        Ok(out)
    }

    fn join(&self, handle: &str) -> Result<()> {
        self.account(handle).map(|_| ())
    }
}

const RATE_LIMIT_RETRIES: u32 = 3;

fn is_rate_limit(err: &Error) -> bool {
    matches!(err, Error::Transport(msg) if msg.to_ascii_lowercase().contains("rate limit"))
}

/// One transport call under the governor, retried with the policy's
/// backoff on rate-limit errors. Other errors propagate immediately.
fn governed<T>(
    governor: &mut RateGovernor,
    clock: &dyn Clock,
    mut call: impl FnMut() -> Result<T>,
) -> Result<T> {
    let backoff = governor.policy().backoff_on_limit;
    let mut attempts = 0;
    loop {
        governor.acquire(clock);
        match call() {
            Ok(v) => return Ok(v),
            Err(e) if is_rate_limit(&e) && attempts < RATE_LIMIT_RETRIES => {
                attempts += 1;
                clock.wait(backoff);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TgFetchOutcome {
    pub profile: TelegramAccountProfile,
    /// Messages persisted by this fetch, in id order. Empty for user and
    /// bot accounts and for fully caught-up channels.
    pub new_messages: Vec<StoredTgMessage>,
}

/// Fetches one account: persists its profile, and for channels and
/// groups joins then pulls messages newer than the last stored id.
pub fn tg_fetch(
    handle: &str,
    transport: &dyn MessagingTransport,
    store: &mut RecordStore,
    governor: &mut RateGovernor,
    clock: &dyn Clock,
) -> Result<TgFetchOutcome> {
    let profile = governed(governor, clock, || transport.get_profile(handle))?;
    store.append(&profile)?;
    if !profile.kind.has_messages() {
        return Ok(TgFetchOutcome {
            profile,
            new_messages: Vec::new(),
        });
    }
    governed(governor, clock, || transport.join(handle))?;

    let since_id = store
        .query::<StoredTgMessage, _>(|m| m.handle == handle)
        .filter_map(|m| m.ok())
        .map(|m| m.id)
        .max();
    let batch = governed(governor, clock, || {
        transport.fetch_messages(handle, since_id)
    })?;

    let mut new_messages = Vec::new();
    for msg in batch {
        let stored = StoredTgMessage {
            handle: handle.to_string(),
            id: msg.id,
            timestamp: msg.timestamp,
            text: msg.text,
        };
        if store.contains(StoredTgMessage::KIND, &stored.record_id()) {
            continue;
        }
        store.append(&stored)?;
        new_messages.push(stored);
    }
    new_messages.sort_by_key(|m| m.id);
    Ok(TgFetchOutcome {
        profile,
        new_messages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: CategoryLabel,
    pub messages: usize,
    /// Share of illicit label assignments, in percent.
    pub percent_of_illicit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageClassSummary {
    pub total_messages: usize,
    /// Messages carrying at least one non-Benign label.
    pub illicit_messages: usize,
    pub benign_messages: usize,
    pub distribution: Vec<CategoryShare>,
    pub illicit_percent_of_total: f64,
}

/// Classifies messages and tabulates the illicit category distribution.
/// Percentages are over illicit label assignments so they sum to 100;
/// Benign-only messages count toward totals but not the distribution.
pub fn classify_messages(
    messages: &[StoredTgMessage],
    model: &MultiLabelModel,
) -> Result<MessageClassSummary> {
    let mut per_category: BTreeMap<CategoryLabel, usize> = BTreeMap::new();
    let mut illicit_messages = 0usize;
    for msg in messages {
        let labels = model.predict_labels(&msg.text);
        let illicit: Vec<CategoryLabel> = labels
            .into_iter()
            .filter(|l| *l != CategoryLabel::Benign)
            .collect();
        if illicit.is_empty() {
            continue;
        }
        illicit_messages += 1;
        for label in illicit {
            *per_category.entry(label).or_insert(0) += 1;
        }
    }
    let assignments: usize = per_category.values().sum();
    let mut distribution: Vec<CategoryShare> = per_category
        .into_iter()
        .map(|(category, messages)| CategoryShare {
            category,
            messages,
            percent_of_illicit: if assignments == 0 {
                0.0
            } else {
                messages as f64 / assignments as f64 * 100.0
            },
        })
        .collect();
    distribution.sort_by(|a, b| {
        b.messages
            .cmp(&a.messages)
            .then_with(|| a.category.name().cmp(b.category.name()))
    });
    let total = messages.len();
    Ok(MessageClassSummary {
        total_messages: total,
        illicit_messages,
        benign_messages: total - illicit_messages,
        distribution,
        illicit_percent_of_total: if total == 0 {
            0.0
        } else {
            illicit_messages as f64 / total as f64 * 100.0
        },
    })
}
