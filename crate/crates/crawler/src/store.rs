//! On-disk page store with URL dedup and dense id assignment.
//!
//! Layout of a store directory:
//!
//! * `meta.jsonl`: one JSON [`PageRecord`] per line, in id order, without
//!   the page body
//! * `raw/<id>`: the body bytes of page `id`
//! * `NEXT_ID`: the id the next inserted page will get
//!
//! Ids start at 1 and have no gaps.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crawlrank_core::graph_io::{EdgeList, VertexId};
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;
use crate::links::{canonicalize_url, extract_links, UrlError};

pub const META_FILE: &str = "meta.jsonl";
pub const RAW_DIR: &str = "raw";
pub const NEXT_ID_FILE: &str = "NEXT_ID";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("rejected url: {0}")]
    Url(#[from] UrlError),
    #[error("{path}:{line}: corrupt record: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub id: u64,
    pub url: String,
    pub title: String,
    pub keywords: String,
    pub media: String,
    pub comment_count: u64,
    #[serde(skip)]
    pub content: String,
    pub content_hash: u64,
    pub out_links: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageFields {
    pub title: String,
    pub keywords: String,
    pub media: String,
    pub comment_count: u64,
}

/// Best-effort metadata from `<title>` and `<meta>` tags.
///
/// `media` comes from a `media` or `source` meta tag; `comment_count` from a
/// `comment` or `comment_count` meta tag, and only when it is a plain
/// number.
pub fn extract_fields(body: &[u8]) -> PageFields {
    let mut fields = PageFields::default();
    if body.is_empty() {
        return fields;
    }
    let doc = Html::parse_document(&String::from_utf8_lossy(body));
    let title = Selector::parse("title").expect("static selector");
    if let Some(t) = doc.select(&title).next() {
        fields.title = t.text().collect::<String>().trim().to_string();
    }
    let meta = Selector::parse("meta[name][content]").expect("static selector");
    for tag in doc.select(&meta) {
        let name = tag.value().attr("name").unwrap_or_default().to_ascii_lowercase();
        let content = tag.value().attr("content").unwrap_or_default().trim();
        match name.as_str() {
            "keywords" if fields.keywords.is_empty() => fields.keywords = content.to_string(),
            "media" | "source" if fields.media.is_empty() => fields.media = content.to_string(),
            "comment" | "comment_count" => {
                if let Ok(n) = content.parse() {
                    fields.comment_count = n;
                }
            }
            _ => {}
        }
    }
    fields
}

/// Everything needed to insert one fetched page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageCandidate {
    pub url: String,
    pub body: Vec<u8>,
    pub fields: PageFields,
    pub out_links: Vec<String>,
}

impl PageCandidate {
    /// Extracts fields and links from `body`.
    pub fn from_body(url: impl Into<String>, body: Vec<u8>) -> Self {
        let url = url.into();
        let fields = extract_fields(&body);
        let out_links = extract_links(&body, &url);
        PageCandidate {
            url,
            body,
            fields,
            out_links,
        }
    }
}

/// Single-writer page store. Reads go through [`PageStore::records`].
#[derive(Debug)]
pub struct PageStore {
    dir: PathBuf,
    records: Vec<PageRecord>,
    by_url: HashMap<String, u64>,
    meta: File,
}

impl PageStore {
    /// Opens or creates a store, reloading any existing records.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        let raw = dir.join(RAW_DIR);
        fs::create_dir_all(&raw).map_err(io_err(&raw))?;
        let meta_path = dir.join(META_FILE);
        let mut records = Vec::new();
        if meta_path.exists() {
            let reader = BufReader::new(File::open(&meta_path).map_err(io_err(&meta_path))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err(&meta_path))?;
                if line.is_empty() {
                    continue;
                }
                let corrupt = |reason: String| StoreError::Corrupt {
                    path: meta_path.clone(),
                    line: i + 1,
                    reason,
                };
                let mut record: PageRecord =
                    serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if record.id != records.len() as u64 + 1 {
                    return Err(corrupt(format!(
                        "expected id {}, found {}",
                        records.len() + 1,
                        record.id
                    )));
                }
                let body_path = raw.join(record.id.to_string());
                let body = fs::read(&body_path).map_err(io_err(&body_path))?;
                record.content = String::from_utf8_lossy(&body).into_owned();
                records.push(record);
            }
        }
        let by_url = records.iter().map(|r| (r.url.clone(), r.id)).collect();
        let meta = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&meta_path)
            .map_err(io_err(&meta_path))?;
        let store = PageStore {
            dir,
            records,
            by_url,
            meta,
        };
        store.write_next_id()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.records.len() as u64 + 1
    }

    pub fn records(&self) -> &[PageRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&PageRecord> {
        id.checked_sub(1).and_then(|i| self.records.get(i as usize))
    }

    pub fn id_of(&self, url: &str) -> Option<u64> {
        canonicalize_url(url)
            .ok()
            .and_then(|u| self.by_url.get(&u).copied())
    }

    pub fn contains(&self, url: &str) -> bool {
        self.id_of(url).is_some()
    }

    /// Inserts a page unless its canonical url is already stored.
    pub fn put(&mut self, candidate: PageCandidate) -> Result<(u64, bool), StoreError> {
        let url = canonicalize_url(&candidate.url)?;
        if let Some(&id) = self.by_url.get(&url) {
            return Ok((id, false));
        }
        let id = self.next_id();
        let record = PageRecord {
            id,
            url: url.clone(),
            title: candidate.fields.title,
            keywords: candidate.fields.keywords,
            media: candidate.fields.media,
            comment_count: candidate.fields.comment_count,
            content: String::from_utf8_lossy(&candidate.body).into_owned(),
            content_hash: fnv1a64(&candidate.body),
            out_links: candidate.out_links,
        };
        // body first, so a crash never leaves a record without content
        let body_path = self.dir.join(RAW_DIR).join(id.to_string());
        fs::write(&body_path, &candidate.body).map_err(io_err(&body_path))?;
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        let meta_path = self.dir.join(META_FILE);
        self.meta
            .write_all(line.as_bytes())
            .and_then(|_| self.meta.flush())
            .map_err(io_err(&meta_path))?;
        self.by_url.insert(url, id);
        self.records.push(record);
        self.write_next_id()?;
        Ok((id, true))
    }

    fn write_next_id(&self) -> Result<(), StoreError> {
        let path = self.dir.join(NEXT_ID_FILE);
        fs::write(&path, format!("{}\n", self.next_id())).map_err(io_err(&path))
    }

    /// Link graph over stored pages. Links to unstored urls are dropped;
    /// self-loops are kept.
    pub fn export_edge_list(&self) -> EdgeList {
        let mut edges = BTreeSet::<(VertexId, VertexId)>::new();
        for record in &self.records {
            for link in &record.out_links {
                if let Some(&target) = self.by_url.get(link) {
                    edges.insert((record.id, target));
                }
            }
        }
        EdgeList {
            vertex_ids: self.records.iter().map(|r| r.id).collect(),
            edges: edges.into_iter().collect(),
        }
    }
}
