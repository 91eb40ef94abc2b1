//! Page fetchers.
//!
//! [`MockFetcher`] serves a fixed in-memory corpus and is what tests and
//! the default CLI use. A corpus directory holds a `manifest.tsv` with one
//! `<url>\t<relative body path>` line per page:
//!
//! ```text
//! http://news.example.com/index.html<TAB>index.html
//! http://news.example.com/a.html<TAB>a.html
//! ```
//!
//! `HttpFetcher` (feature `http`) talks to the network and honours
//! `Disallow` rules from `robots.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Success,
    FetchError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResult {
    pub url: String,
    pub status: FetchStatus,
    /// Non-empty exactly when `status` is `Success`.
    pub body: Vec<u8>,
    pub fetched_at: SystemTime,
}

impl FetchResult {
    pub fn success(url: impl Into<String>, body: Vec<u8>) -> Self {
        if body.is_empty() {
            return Self::error(url, "empty body");
        }
        FetchResult {
            url: url.into(),
            status: FetchStatus::Success,
            body,
            fetched_at: SystemTime::now(),
        }
    }

    pub fn error(url: impl Into<String>, reason: impl Into<String>) -> Self {
        FetchResult {
            url: url.into(),
            status: FetchStatus::FetchError(reason.into()),
            body: Vec::new(),
            fetched_at: SystemTime::now(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == FetchStatus::Success
    }
}

pub trait Fetcher: Send + Sync {
    /// Never panics on network or lookup failure; errors go in the result.
    fn fetch(&self, url: &str) -> FetchResult;
}

impl<F: Fetcher + ?Sized> Fetcher for &F {
    fn fetch(&self, url: &str) -> FetchResult {
        (**self).fetch(url)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: expected `<url>\\t<file>`")]
    Manifest { path: PathBuf, line: usize },
}

/// Deterministic fetcher over a url → body map.
#[derive(Debug, Clone, Default)]
pub struct MockFetcher {
    pages: BTreeMap<String, Vec<u8>>,
}

impl MockFetcher {
    pub fn new(pages: impl IntoIterator<Item = (String, Vec<u8>)>) -> Self {
        MockFetcher {
            pages: pages.into_iter().collect(),
        }
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let manifest = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).map_err(|source| CorpusError::Io {
            path: manifest.clone(),
            source,
        })?;
        let mut pages = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (url, file) = line.split_once('\t').ok_or_else(|| CorpusError::Manifest {
                path: manifest.clone(),
                line: i + 1,
            })?;
            let path = dir.join(file.trim());
            let body = fs::read(&path).map_err(|source| CorpusError::Io { path, source })?;
            pages.insert(url.trim().to_string(), body);
        }
        Ok(MockFetcher { pages })
    }

    pub fn insert(&mut self, url: impl Into<String>, body: impl Into<Vec<u8>>) {
        self.pages.insert(url.into(), body.into());
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.pages.keys().map(String::as_str)
    }
}

impl Fetcher for MockFetcher {
    fn fetch(&self, url: &str) -> FetchResult {
        match self.pages.get(url) {
            Some(body) => FetchResult::success(url, body.clone()),
            None => FetchResult::error(url, "not in mock corpus"),
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpFetcher;

#[cfg(feature = "http")]
mod http {
    use std::collections::HashMap;
    use std::io::Read;
    use std::sync::Mutex;
    use std::time::Duration;

    use url::Url;

    use super::{FetchResult, Fetcher};

    const USER_AGENT: &str = concat!("crawlrank/", env!("CARGO_PKG_VERSION"));
    const MAX_BODY: u64 = 8 << 20;

    /// Blocking network fetcher with a per-host `robots.txt` cache.
    pub struct HttpFetcher {
        agent: ureq::Agent,
        robots: Mutex<HashMap<String, Vec<String>>>,
    }

    impl Default for HttpFetcher {
        fn default() -> Self {
            Self::new(Duration::from_secs(15))
        }
    }

    impl HttpFetcher {
        pub fn new(timeout: Duration) -> Self {
            HttpFetcher {
                agent: ureq::AgentBuilder::new()
                    .timeout(timeout)
                    .user_agent(USER_AGENT)
                    .build(),
                robots: Mutex::new(HashMap::new()),
            }
        }

        fn get(&self, url: &str) -> Result<Vec<u8>, String> {
            let response = self.agent.get(url).call().map_err(|e| e.to_string())?;
            let mut body = Vec::new();
            response
                .into_reader()
                .take(MAX_BODY)
                .read_to_end(&mut body)
                .map_err(|e| e.to_string())?;
            Ok(body)
        }

        fn allowed(&self, url: &Url) -> bool {
            let origin = url.origin().ascii_serialization();
            let mut cache = self.robots.lock().expect("robots cache");
            let rules = cache.entry(origin.clone()).or_insert_with(|| {
                self.get(&format!("{origin}/robots.txt"))
                    .map(|body| disallow_rules(&String::from_utf8_lossy(&body)))
                    .unwrap_or_default()
            });
            let path = url.path();
            !rules.iter().any(|prefix| path.starts_with(prefix.as_str()))
        }
    }

    /// `Disallow` prefixes of the `User-agent: *` groups.
    pub(crate) fn disallow_rules(robots: &str) -> Vec<String> {
        let mut rules = Vec::new();
        let mut applies = false;
        let mut in_agents = false;
        for line in robots.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim().to_ascii_lowercase().as_str() {
                "user-agent" => {
                    if !in_agents {
                        applies = false;
                    }
                    in_agents = true;
                    applies |= value == "*";
                }
                "disallow" => {
                    in_agents = false;
                    if applies && !value.is_empty() {
                        rules.push(value.to_string());
                    }
                }
                _ => in_agents = false,
            }
        }
        rules
    }

    impl Fetcher for HttpFetcher {
        fn fetch(&self, url: &str) -> FetchResult {
            let parsed = match Url::parse(url) {
                Ok(u) => u,
                Err(e) => return FetchResult::error(url, e.to_string()),
            };
            if !self.allowed(&parsed) {
                return FetchResult::error(url, "disallowed by robots.txt");
            }
            match self.get(url) {
                Ok(body) => FetchResult::success(url, body),
                Err(reason) => FetchResult::error(url, reason),
            }
        }
    }

}
