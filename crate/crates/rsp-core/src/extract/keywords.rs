//! Search keyword selection: URL hosts plus the text segments a trained
//! classifier marks as contact segments.

use crate::error::Result;
use crate::extract::segment::{segment_ipt, SegmentKind};
use crate::learn::TreeEnsembleModel;
use crate::textfeat::contact_segment_features;
use crate::types::IptRecord;

/// Host part of a matched URL: scheme stripped, cut before port, path, or
/// query.
pub fn url_host(url: &str) -> &str {
    let lower = url.to_ascii_lowercase();
    let rest = if let Some(stripped) = lower.strip_prefix("https://") {
        &url[url.len() - stripped.len()..]
    } else if let Some(stripped) = lower.strip_prefix("http://") {
        &url[url.len() - stripped.len()..]
    } else {
        url
    };
    let end = rest.find(['/', ':', '?']).unwrap_or(rest.len());
    &rest[..end]
}

/// Keywords worth feeding back into search: hosts of every URL segment and
/// every candidate segment the contact-segment classifier accepts, in text
/// order, first occurrence kept.
pub fn extract_keywords(ipt: &IptRecord, segment_model: &TreeEnsembleModel) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for seg in segment_ipt(&ipt.normalized_text) {
        let keyword = match seg.kind {
            SegmentKind::Url => url_host(&seg.text).to_string(),
            SegmentKind::Candidate => {
                let features = contact_segment_features(&seg.text).to_vec();
                if !segment_model.classify(&features)? {
                    continue;
                }
                seg.text.clone()
            }
        };
        if !keyword.is_empty() && seen.insert(keyword.clone()) {
            out.push(keyword);
        }
    }
    Ok(out)
}
