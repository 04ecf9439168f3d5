//! Toolkit for hunting, analyzing, and infiltrating illicit promotion texts
//! (IPTs) distributed through reflected search poisoning (RSP).
//!
//! The pipeline has three stages. The hunter queries search engines (mock or
//! live adapters) with IPT keywords and URL reflection schemes, filters the
//! results down to genuine URL-reflection cases, and classifies the reflected
//! text with a binary classifier. The analyzer assigns category labels to
//! each IPT and extracts embedded contacts (Telegram/WeChat/QQ handles, phone
//! numbers, websites) despite homoglyph and separator evasion. The
//! infiltrator follows the next hops: website redirect chains, iframe
//! cloaking, vantage-dependent landings, and Telegram channels via a
//! pluggable transport.
//!
//! Everything runs at desk scale against fixture corpora and a scenario-file
//! HTTP backend; live search/fetch adapters are thin stubs behind the same
//! contracts.

pub mod error;
pub mod extract;
pub mod hunter;
pub mod infiltrate;
pub mod learn;
pub mod reflection;
pub mod report;
pub mod store;
pub mod synth;
pub mod textfeat;
pub mod types;

mod domains;
mod symbols;
mod symbols_table;

pub use domains::apex_domain;
pub use error::{Error, Result};
pub use symbols::is_symbol_char;
