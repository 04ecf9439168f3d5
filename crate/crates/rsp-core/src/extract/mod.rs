//! IPT analysis: URL scanning, segmentation, evasion normalization,
//! keyword selection, and contact extraction.

pub mod entities;
pub mod keywords;
pub mod normalize;
pub mod segment;
pub mod urls;

pub use entities::{
    classify_contact_type, contact_type_features, contact_value_is_valid,
    extract_contact_entities, train_contact_type_model, CONTACT_TYPE_CLASSES,
    CONTACT_TYPE_FEATURE_NAMES, QQ_INDICATORS, TELEGRAM_INDICATORS, WECHAT_INDICATORS,
};
pub use keywords::{extract_keywords, url_host};
pub use normalize::{normalize_evasions, NormalizationEdit, NormalizationTrace};
pub use segment::{segment_ipt, IptSegment, SegmentKind};
pub use urls::{extract_urls, Span};

use crate::error::Result;
use crate::learn::TreeEnsembleModel;
use crate::types::{Contact, ContactKind, IptRecord};

/// Trained models the contact pipeline needs.
#[derive(Debug, Clone)]
pub struct ContactModels {
    pub type_model: TreeEnsembleModel,
}

/// Full contact pipeline over one IPT: undo evasions, pick the dominant
/// contact type, run its grammar, and always collect websites. Spans are
/// mapped back to `ipt.normalized_text` coordinates.
pub fn extract_contacts(ipt: &IptRecord, models: &ContactModels) -> Result<Vec<Contact>> {
    let trace = normalize_evasions(&ipt.normalized_text);
    let text = &trace.normalized_text;
    let dominant = classify_contact_type(text, &models.type_model)?;

    let mut found = Vec::new();
    if dominant != ContactKind::Website && dominant != ContactKind::Other {
        found.extend(extract_contact_entities(text, &dominant));
    }
    found.extend(extract_contact_entities(text, &ContactKind::Website));

    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for mut c in found {
        if !seen.insert((c.kind.clone(), c.value.clone())) {
            continue;
        }
        c.raw_span = (trace.map_back(c.raw_span.0), trace.map_back(c.raw_span.1));
        c.source_ipt = ipt.id.clone();
        out.push(c);
    }
    out.sort_by_key(|c| c.raw_span);
    Ok(out)
}
