//! Crawler pipeline and page store.
//!
//! [`pipeline::run_pipeline`] feeds a seed file through split, map, combine,
//! host-hash partition and concurrent fetch stages, and writes the fetched
//! pages into a [`store::PageStore`], whose link graph can be exported for
//! PageRank.

pub mod fetch;
pub mod hash;
pub mod links;
pub mod pipeline;
pub mod store;

pub use fetch::{FetchResult, FetchStatus, Fetcher, MockFetcher};
#[cfg(feature = "http")]
pub use fetch::HttpFetcher;
pub use hash::fnv1a64;
pub use links::{canonicalize_url, extract_links, host_of, UrlError};
pub use pipeline::{
    combine, map_swap, partition, read_seed_file, reduce_fetch, run_pipeline, shuffle,
    split_input, CrawlConfig, CrawlError, CrawlSummary, KeyValuePair, SeedSplit,
};
pub use store::{extract_fields, PageCandidate, PageFields, PageRecord, PageStore, StoreError};
