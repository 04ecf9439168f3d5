//! Minimal HTML scanning for redirect targets, iframes, and visible text.
//! No DOM and no JS engine: byte scanning with case-insensitive matching
//! is deterministic and sufficient for fixture pages. ASCII lowercasing
//! preserves byte offsets, so the lowered shadow string indexes the
//! original.

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for c in s.chars() {
        if c.is_whitespace() {
            in_ws = true;
            continue;
        }
        if in_ws && !out.is_empty() {
            out.push(' ');
        }
        in_ws = false;
        out.push(c);
    }
    out
}

/// Value of `name="..."` inside one tag's source, quoted or bare.
fn attr_value(tag: &str, name: &str) -> Option<String> {
    let lower = tag.to_ascii_lowercase();
    let bytes = tag.as_bytes();
    let mut from = 0;
    while let Some(i) = lower[from..].find(name) {
        let at = from + i;
        let bounded = at == 0
            || (!bytes[at - 1].is_ascii_alphanumeric() && bytes[at - 1] != b'-');
        let mut j = at + name.len();
        while j < bytes.len() && bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        if bounded && j < bytes.len() && bytes[j] == b'=' {
            j += 1;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if j >= bytes.len() {
                return None;
            }
            return match bytes[j] {
                q @ (b'"' | b'\'') => {
                    let rest = &tag[j + 1..];
                    let end = rest.find(q as char)?;
                    Some(rest[..end].trim().to_string())
                }
                _ => {
                    let rest = &tag[j..];
                    let end = rest
                        .find(|c: char| c.is_ascii_whitespace() || c == '>')
                        .unwrap_or(rest.len());
                    Some(rest[..end].trim().to_string())
                }
            };
        }
        from = at + name.len();
    }
    None
}

/// Target of the first `<meta http-equiv="refresh">` tag, from the `url=`
/// part of its content attribute.
pub fn find_meta_refresh(html: &str) -> Option<String> {
    let lower = html.to_ascii_lowercase();
    let mut pos = 0;
    while let Some(i) = lower[pos..].find("<meta") {
        let start = pos + i;
        let end = start + lower[start..].find('>')?;
        let tag = &html[start..=end];
        let ltag = &lower[start..=end];
        if ltag.contains("http-equiv") && ltag.contains("refresh") {
            if let Some(content) = attr_value(tag, "content") {
                let lc = content.to_ascii_lowercase();
                if let Some(u) = lc.find("url=") {
                    let raw = content[u + 4..]
                        .trim()
                        .trim_matches(|c| c == '\'' || c == '"')
                        .trim();
                    if !raw.is_empty() {
                        return Some(raw.to_string());
                    }
                }
            }
        }
        pos = end + 1;
    }
    None
}

fn literal_after(html: &str, mut j: usize, sep: u8) -> Option<String> {
    let bytes = html.as_bytes();
    while j < bytes.len() && bytes[j].is_ascii_whitespace() {
        j += 1;
    }
    if j >= bytes.len() || bytes[j] != sep {
        return None;
    }
    j += 1;
    while j < bytes.len() && bytes[j].is_ascii_whitespace() {
        j += 1;
    }
    let quote = *bytes.get(j)?;
    if quote != b'"' && quote != b'\'' {
        return None;
    }
    let rest = &html[j + 1..];
    let end = rest.find(quote as char)?;
    let v = rest[..end].trim();
    if v.is_empty() {
        None
    } else {
        Some(v.to_string())
    }
}

/// Target of the first static JS redirect in document order. Only string
/// literals count; computed targets are a declared blind spot.
pub fn find_js_redirect(html: &str) -> Option<String> {
    let lower = html.to_ascii_lowercase();
    let mut best: Option<(usize, String)> = None;
    for (pattern, sep) in [
        ("location.href", b'='),
        ("window.location", b'='),
        ("location.replace", b'('),
    ] {
        let mut from = 0;
        while let Some(i) = lower[from..].find(pattern) {
            let at = from + i;
            if let Some(url) = literal_after(html, at + pattern.len(), sep) {
                if best.as_ref().map_or(true, |(b, _)| at < *b) {
                    best = Some((at, url));
                }
                break;
            }
            from = at + pattern.len();
        }
    }
    best.map(|(_, url)| url)
}

/// `src` values of every iframe tag, in document order.
pub fn extract_iframe_sources(html: &str) -> Vec<String> {
    let lower = html.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(i) = lower[pos..].find("<iframe") {
        let start = pos + i;
        let Some(rel) = lower[start..].find('>') else {
            break;
        };
        let end = start + rel;
        if let Some(src) = attr_value(&html[start..=end], "src") {
            if !src.is_empty() {
                out.push(src);
            }
        }
        pos = end + 1;
    }
    out
}

fn strip_blocks(html: &str, tag: &str) -> String {
    let open = format!("<{tag}");
    let close = format!("</{tag}");
    let lower = html.to_ascii_lowercase();
    let mut out = String::with_capacity(html.len());
    let mut pos = 0;
    while let Some(i) = lower[pos..].find(&open) {
        let start = pos + i;
        out.push_str(&html[pos..start]);
        let after = match lower[start..].find(&close) {
            Some(c) => {
                let from_close = start + c;
                match lower[from_close..].find('>') {
                    Some(g) => from_close + g + 1,
                    None => lower.len(),
                }
            }
            None => lower.len(),
        };
        pos = after;
    }
    out.push_str(&html[pos..]);
    out
}

/// Tag-stripped page text with script and style blocks removed, whitespace
/// collapsed. Entities are left as-is; fixtures do not rely on them.
pub fn visible_text(html: &str) -> String {
    let stripped = strip_blocks(&strip_blocks(html, "script"), "style");
    let mut out = String::with_capacity(stripped.len());
    let mut in_tag = false;
    for c in stripped.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    normalize_ws(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_refresh_with_delay_and_quotes() {
        let html = r#"<html><META HTTP-EQUIV="Refresh" content="5; url='http://b.test/next'"></html>"#;
        assert_eq!(find_meta_refresh(html).as_deref(), Some("http://b.test/next"));
    }

    #[test]
    fn meta_without_refresh_is_ignored() {
        let html = r#"<meta charset="utf-8"><meta name="refresh-rate" content="url=x">"#;
        // Second tag has no http-equiv attribute.
        assert_eq!(find_meta_refresh(html), None);
    }

    #[test]
    fn js_redirect_patterns_all_match() {
        assert_eq!(
            find_js_redirect(r#"<script>location.href = "http://a.test/";</script>"#).as_deref(),
            Some("http://a.test/")
        );
        assert_eq!(
            find_js_redirect(r#"<script>window.location='/rel';</script>"#).as_deref(),
            Some("/rel")
        );
        assert_eq!(
            find_js_redirect(r#"<script>location.replace( 'http://c.test/x' )</script>"#).as_deref(),
            Some("http://c.test/x")
        );
    }

    #[test]
    fn first_redirect_in_document_order_wins() {
        let html = r#"<script>location.replace("http://late.test/")</script>
                      <script>location.href="http://early.test/"</script>"#;
        // replace appears earlier in the document.
        assert_eq!(find_js_redirect(html).as_deref(), Some("http://late.test/"));
    }

    #[test]
    fn computed_targets_are_not_followed() {
        assert_eq!(find_js_redirect("location.href = base + path;"), None);
        assert_eq!(find_js_redirect("window.location.reload()"), None);
    }

    #[test]
    fn window_location_href_chain_parses_via_href_rule() {
        let html = r#"window.location.href = "http://x.test/";"#;
        assert_eq!(find_js_redirect(html).as_deref(), Some("http://x.test/"));
    }

    #[test]
    fn iframe_sources_in_order() {
        let html = r#"<iframe src="http://one.test/a"></iframe>
                      <IFRAME SRC='http://two.test/b'>
                      <iframe data-x="1" src=http://three.test/c>"#;
        assert_eq!(
            extract_iframe_sources(html),
            vec![
                "http://one.test/a".to_string(),
                "http://two.test/b".to_string(),
                "http://three.test/c".to_string(),
            ]
        );
    }

    #[test]
    fn iframe_without_src_is_skipped() {
        assert!(extract_iframe_sources("<iframe name=\"x\"></iframe>").is_empty());
    }

    #[test]
    fn visible_text_drops_script_and_tags() {
        let html = "<html><script>var x = 'hidden';</script><body><p>Hello  <b>world</b></p>\n<style>p{}</style>tail</body>";
        assert_eq!(visible_text(html), "Hello world tail");
    }

    #[test]
    fn attr_value_requires_word_boundary() {
        // data-src must not satisfy a lookup for src.
        let tag = r#"<iframe data-src="http://no.test/">"#;
        assert_eq!(attr_value(tag, "src"), None);
    }
}
