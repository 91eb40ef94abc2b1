//! URL canonicalization, host extraction and anchor harvesting.

use std::collections::HashSet;

use scraper::{Html, Selector};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UrlError {
    #[error("unparseable url {url:?}: {reason}")]
    Parse { url: String, reason: String },
    #[error("unsupported scheme {scheme:?} in {url:?}")]
    Scheme { url: String, scheme: String },
    #[error("url {0:?} has no host")]
    NoHost(String),
}

fn parse_web_url(raw: &str) -> Result<Url, UrlError> {
    let url = Url::parse(raw).map_err(|e| UrlError::Parse {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    match url.scheme() {
        "http" | "https" => {}
        other => {
            return Err(UrlError::Scheme {
                url: raw.to_string(),
                scheme: other.to_string(),
            })
        }
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(UrlError::NoHost(raw.to_string()));
    }
    Ok(url)
}

/// Canonical form used for dedup: lowercase host, no default port, no
/// fragment.
pub fn canonicalize_url(raw: &str) -> Result<String, UrlError> {
    let mut url = parse_web_url(raw.trim())?;
    url.set_fragment(None);
    Ok(url.into())
}

/// Lowercased host with port and credentials removed.
pub fn host_of(raw: &str) -> Result<String, UrlError> {
    let url = parse_web_url(raw.trim())?;
    Ok(url.host_str().unwrap_or_default().to_ascii_lowercase())
}

/// Absolute http(s) targets of every `<a href>`, canonicalized, first
/// occurrence kept.
pub fn extract_links(body: &[u8], base_url: &str) -> Vec<String> {
    let Ok(base) = Url::parse(base_url) else {
        return Vec::new();
    };
    let text = String::from_utf8_lossy(body);
    let doc = Html::parse_document(&text);
    let selector = Selector::parse("a[href]").expect("static selector");
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for anchor in doc.select(&selector) {
        let Some(href) = anchor.value().attr("href") else {
            continue;
        };
        let Ok(mut target) = base.join(href.trim()) else {
            continue;
        };
        if !matches!(target.scheme(), "http" | "https") || target.host_str().is_none() {
            continue;
        }
        target.set_fragment(None);
        let target: String = target.into();
        if seen.insert(target.clone()) {
            out.push(target);
        }
    }
    out
}
