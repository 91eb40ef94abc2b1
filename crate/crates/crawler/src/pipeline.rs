//! MapReduce-staged crawl: split → map → combine → partition → reduce.
//!
//! Every stage materializes its full output before the next one starts.
//! The map stage turns `(offset, url)` lines into `(url, offset)` pairs,
//! the combiner collapses repeated urls within one split, the partitioner
//! sends each url to `fnv1a64(host) mod R`, and each reducer fetches its
//! urls with a bounded number of lanes, one host at a time per lane.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fetch::{FetchResult, FetchStatus, Fetcher};
use crate::hash::fnv1a64;
use crate::links::{canonicalize_url, host_of, UrlError};
use crate::store::{PageCandidate, PageStore, StoreError};

pub const DEFAULT_SPLIT_SIZE: usize = 1024;
/// Hadoop's default input split size.
pub const HADOOP_SPLIT_SIZE: usize = 64 << 20;
pub const DEFAULT_REDUCERS: usize = 3;
pub const DEFAULT_FETCH_LANES: usize = 16;

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("cannot read seed file {path}: {source}")]
    Seed { path: PathBuf, source: io::Error },
    #[error("invalid crawl config: {0}")]
    Config(String),
    #[error(transparent)]
    Url(#[from] UrlError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write stage dump {path}: {source}")]
    Dump { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSplit {
    pub split_index: usize,
    /// Offset of the split's first line in the seed file.
    pub byte_offset: u64,
    /// `(line offset, trimmed url text)`, in file order.
    pub lines: Vec<(u64, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct KeyValuePair {
    pub key: String,
    pub value: u64,
}

impl KeyValuePair {
    pub fn new(key: impl Into<String>, value: u64) -> Self {
        KeyValuePair {
            key: key.into(),
            value,
        }
    }
}

/// A seed line the map stage could not turn into a url.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapError {
    pub offset: u64,
    pub line: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MapOutput {
    pub pairs: Vec<KeyValuePair>,
    pub errors: Vec<MapError>,
}

pub fn read_seed_file(path: impl AsRef<Path>) -> Result<Vec<u8>, CrawlError> {
    let path = path.as_ref();
    fs::read(path).map_err(|source| CrawlError::Seed {
        path: path.to_path_buf(),
        source,
    })
}

/// Packs whole lines greedily into splits of at most `split_size` bytes.
///
/// A line's size includes its terminating LF. A split closes when the next
/// line would overflow it, so a line is never cut; a line longer than
/// `split_size` gets a split of its own. Blank lines are dropped and take
/// no room.
pub fn split_input(seed: &[u8], split_size: usize) -> Vec<SeedSplit> {
    assert!(split_size >= 1, "split size must be at least 1");
    let mut splits: Vec<SeedSplit> = Vec::new();
    let mut used = 0usize;
    let mut offset = 0usize;
    while offset < seed.len() {
        let end = seed[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(seed.len(), |i| offset + i);
        let span = (end + 1).min(seed.len()) - offset;
        let text = String::from_utf8_lossy(&seed[offset..end]).trim().to_string();
        if !text.is_empty() {
            let fits = splits.last().is_some_and(|_| used + span <= split_size);
            if !fits {
                splits.push(SeedSplit {
                    split_index: splits.len(),
                    byte_offset: offset as u64,
                    lines: Vec::new(),
                });
                used = 0;
            }
            used += span;
            splits.last_mut().expect("split exists").lines.push((offset as u64, text));
        }
        offset = end + 1;
    }
    splits
}

/// Swaps each `(offset, url)` into `(url, offset)`, canonicalizing the url.
pub fn map_swap(split: &SeedSplit) -> MapOutput {
    let mut out = MapOutput::default();
    for (offset, line) in &split.lines {
        match canonicalize_url(line) {
            Ok(key) => out.pairs.push(KeyValuePair::new(key, *offset)),
            Err(e) => out.errors.push(MapError {
                offset: *offset,
                line: line.clone(),
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Collapses repeated keys of one map task, keeping the smallest offset.
/// Output is sorted by key.
pub fn combine(pairs: &[KeyValuePair]) -> Vec<KeyValuePair> {
    let mut merged: BTreeMap<&str, u64> = BTreeMap::new();
    for p in pairs {
        merged
            .entry(&p.key)
            .and_modify(|v| *v = (*v).min(p.value))
            .or_insert(p.value);
    }
    merged
        .into_iter()
        .map(|(k, v)| KeyValuePair::new(k, v))
        .collect()
}

/// Reducer bucket of `url`: FNV-1a 64 of its host, modulo `reducers`.
pub fn partition(url: &str, reducers: usize) -> Result<usize, UrlError> {
    assert!(reducers >= 1, "reducer count must be at least 1");
    let host = host_of(url)?;
    Ok((fnv1a64(host.as_bytes()) % reducers as u64) as usize)
}

/// Routes combined map outputs to `reducers` buckets, each sorted by
/// (key, offset). Identical keys from different splits stay separate
/// pairs; the reducer fetches each key once.
pub fn shuffle(
    map_outputs: &[Vec<KeyValuePair>],
    reducers: usize,
) -> Result<Vec<Vec<KeyValuePair>>, UrlError> {
    let mut buckets = vec![Vec::new(); reducers];
    for pair in map_outputs.iter().flatten() {
        buckets[partition(&pair.key, reducers)?].push(pair.clone());
    }
    for b in &mut buckets {
        b.sort();
    }
    Ok(buckets)
}

/// Fetches every distinct url of a bucket once.
///
/// Urls are grouped by host and each group is worked by a single lane, so
/// requests to one host are sequential and start at least
/// `per_host_delay` apart. Results come back sorted by url.
pub fn reduce_fetch<F: Fetcher + ?Sized>(
    bucket: &[KeyValuePair],
    fetcher: &F,
    fetch_lanes: usize,
    per_host_delay: Duration,
) -> Vec<FetchResult> {
    let lanes = fetch_lanes.max(1);
    let mut by_host: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut unroutable = Vec::new();
    for pair in bucket {
        match host_of(&pair.key) {
            Ok(host) => {
                by_host.entry(host).or_default().insert(&pair.key);
            }
            Err(e) => unroutable.push(FetchResult::error(&pair.key, e.to_string())),
        }
    }
    let queue: Mutex<VecDeque<Vec<&str>>> =
        Mutex::new(by_host.into_values().map(|urls| urls.into_iter().collect()).collect());
    let results = Mutex::new(unroutable);
    let workers = lanes.min(queue.lock().expect("queue").len());

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(urls) = queue.lock().expect("queue").pop_front() else {
                    break;
                };
                let mut last_start: Option<Instant> = None;
                for url in urls {
                    if let Some(prev) = last_start {
                        let wait = per_host_delay.saturating_sub(prev.elapsed());
                        if !wait.is_zero() {
                            thread::sleep(wait);
                        }
                    }
                    last_start = Some(Instant::now());
                    let result = fetcher.fetch(url);
                    results.lock().expect("results").push(result);
                }
            });
        }
    });

    let mut results = results.into_inner().expect("results");
    results.sort_by(|a, b| a.url.cmp(&b.url));
    results
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlConfig {
    pub split_size: usize,
    pub reducers: usize,
    pub fetch_lanes: usize,
    pub rounds: usize,
    pub per_host_delay: Duration,
    /// When set, each stage's output is written under this directory.
    pub dump_dir: Option<PathBuf>,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            split_size: DEFAULT_SPLIT_SIZE,
            reducers: DEFAULT_REDUCERS,
            fetch_lanes: DEFAULT_FETCH_LANES,
            rounds: 1,
            per_host_delay: Duration::ZERO,
            dump_dir: None,
        }
    }
}

impl CrawlConfig {
    pub fn validate(&self) -> Result<(), CrawlError> {
        for (name, v) in [
            ("split_size", self.split_size),
            ("reducers", self.reducers),
            ("fetch_lanes", self.fetch_lanes),
            ("rounds", self.rounds),
        ] {
            if v == 0 {
                return Err(CrawlError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundSummary {
    pub round: usize,
    /// Distinct urls handed to reducers.
    pub urls: usize,
    pub fetched: usize,
    pub stored: usize,
    pub errors: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrawlSummary {
    pub pages_fetched: usize,
    pub pages_stored: usize,
    pub errors: usize,
    pub bytes: u64,
    pub rounds: Vec<RoundSummary>,
    pub map_errors: Vec<MapError>,
    /// `(url, reason)` for every failed fetch.
    pub fetch_errors: Vec<(String, String)>,
    /// Every url fetched during the run, in fetch-result order.
    pub fetched_urls: Vec<String>,
}

/// Runs the full pipeline for `config.rounds` rounds.
///
/// Round 1 crawls the seed file. Each later round crawls the links found on
/// pages stored in the previous round that are neither in the store nor
/// already attempted during this run.
pub fn run_pipeline<F: Fetcher + ?Sized>(
    seed: &[u8],
    config: &CrawlConfig,
    fetcher: &F,
    store: &mut PageStore,
) -> Result<CrawlSummary, CrawlError> {
    config.validate()?;
    let mut summary = CrawlSummary::default();
    let mut attempted: HashSet<String> = HashSet::new();
    let mut round_seed = seed.to_vec();

    for round in 1..=config.rounds {
        if round_seed.is_empty() {
            break;
        }
        let dump = config.dump_dir.as_ref().map(|d| d.join(format!("round_{round}")));

        let splits = split_input(&round_seed, config.split_size);
        let mapped: Vec<MapOutput> = thread::scope(|scope| {
            let handles: Vec<_> = splits.iter().map(|s| scope.spawn(move || map_swap(s))).collect();
            handles.into_iter().map(|h| h.join().expect("map task")).collect()
        });
        let combined: Vec<Vec<KeyValuePair>> = mapped.iter().map(|m| combine(&m.pairs)).collect();
        let buckets = shuffle(&combined, config.reducers)?;
        if let Some(dir) = &dump {
            for (i, m) in mapped.iter().enumerate() {
                dump_pairs(dir, &format!("map_{i}.tsv"), &m.pairs)?;
                dump_pairs(dir, &format!("combine_{i}.tsv"), &combined[i])?;
            }
            for (i, b) in buckets.iter().enumerate() {
                dump_pairs(dir, &format!("partition_{i}.tsv"), b)?;
            }
        }
        for m in mapped {
            summary.map_errors.extend(m.errors);
        }

        let buckets: Vec<Vec<KeyValuePair>> = buckets
            .into_iter()
            .map(|b| b.into_iter().filter(|p| !attempted.contains(&p.key)).collect())
            .collect();
        let mut results: Vec<FetchResult> = thread::scope(|scope| {
            let handles: Vec<_> = buckets
                .iter()
                .map(|b| {
                    scope.spawn(move || {
                        reduce_fetch(b, fetcher, config.fetch_lanes, config.per_host_delay)
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("reducer"))
                .collect()
        });
        results.sort_by(|a, b| a.url.cmp(&b.url));

        let mut stats = RoundSummary {
            round,
            urls: results.len(),
            ..Default::default()
        };
        let mut next: Vec<String> = Vec::new();
        let mut queued: HashSet<String> = HashSet::new();
        for result in results {
            attempted.insert(result.url.clone());
            summary.fetched_urls.push(result.url.clone());
            match result.status {
                FetchStatus::Success => {
                    stats.fetched += 1;
                    stats.bytes += result.body.len() as u64;
                    let candidate = PageCandidate::from_body(result.url, result.body);
                    let links = candidate.out_links.clone();
                    let (_, inserted) = store.put(candidate)?;
                    if inserted {
                        stats.stored += 1;
                        for link in links {
                            if !store.contains(&link)
                                && !attempted.contains(&link)
                                && queued.insert(link.clone())
                            {
                                next.push(link);
                            }
                        }
                    }
                }
                FetchStatus::FetchError(reason) => {
                    stats.errors += 1;
                    summary.fetch_errors.push((result.url, reason));
                }
            }
        }
        next.retain(|u| !attempted.contains(u));
        round_seed = next.iter().fold(String::new(), |mut s, u| {
            let _ = writeln!(s, "{u}");
            s
        })
        .into_bytes();

        summary.pages_fetched += stats.fetched;
        summary.pages_stored += stats.stored;
        summary.bytes += stats.bytes;
        summary.rounds.push(stats);
    }
    summary.errors = summary.map_errors.len() + summary.fetch_errors.len();
    Ok(summary)
}

fn dump_pairs(dir: &Path, name: &str, pairs: &[KeyValuePair]) -> Result<(), CrawlError> {
    let path = dir.join(name);
    let mut sorted = pairs.to_vec();
    sorted.sort();
    let text = sorted.iter().fold(String::new(), |mut s, p| {
        let _ = writeln!(s, "{}\t{}", p.key, p.value);
        s
    });
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, text))
        .map_err(|source| CrawlError::Dump { path, source })
}
