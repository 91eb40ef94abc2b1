//! Command implementations behind the `crawlrank` binary.
//!
//! Each `cmd_*` function writes its console report to `out` and warnings
//! to `err`, so the commands can be driven from tests as well as `main`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crawlrank_core::{
    emit_edge_list, emit_partition, parse_partition, partition_file_name, partition_graph, rank,
    run_loaded, EdgeList, EngineConfig, GraphPartition, LoadedGraph, PageRankParams64,
    PageRankProgram, RankTable64, RunReport64,
};
use crawlrank_core::pagerank::emit_results;
use crawlrank_crawler::{read_seed_file, run_pipeline, CrawlConfig, CrawlSummary, Fetcher, MockFetcher, PageStore};

#[derive(Debug, Parser)]
#[command(name = "crawlrank", version, about = "Staged web crawl and BSP PageRank")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: CliConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Crawl the seed file into the page store.
    Crawl,
    /// Export the store's link graph and split it into worker partitions.
    BuildGraph,
    /// Run PageRank over the partition files.
    Pagerank,
    /// crawl, build-graph and pagerank in sequence.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FetcherKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Args)]
pub struct CliConfig {
    /// Seed file: one absolute URL per line.
    #[arg(long, global = true, default_value = "seeds.txt")]
    pub seed: PathBuf,
    #[arg(long = "store", global = true, env = "CRAWLRANK_STORE", default_value = "store")]
    pub store_dir: PathBuf,
    /// Whole-graph file; partitions go to `<graph>_<i>`.
    #[arg(long = "graph", global = true, default_value = "graph/graph")]
    pub graph_path: PathBuf,
    /// Merged result file; per-worker results go to `<out>_<i>`.
    #[arg(long = "out", global = true, default_value = "out/pagerank")]
    pub out_path: PathBuf,
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub reducers: u64,
    #[arg(long, global = true, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub fetch_lanes: u64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, global = true, default_value_t = 0.85)]
    pub damping: f64,
    #[arg(long, global = true, default_value_t = 1)]
    pub rounds: u64,
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_supersteps: u64,
    #[arg(long, global = true, value_enum, env = "CRAWLRANK_FETCHER", default_value = "mock")]
    pub fetcher: FetcherKind,
    /// Directory with `manifest.tsv` for the mock fetcher.
    #[arg(long, global = true, env = "CRAWLRANK_CORPUS", default_value = "fixtures/corpus")]
    pub corpus: PathBuf,
    #[arg(long, global = true, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    pub split_size: u64,
    /// Minimum gap between requests to one host; defaults to 0 for mock and
    /// 500 for http.
    #[arg(long, global = true)]
    pub per_host_delay_ms: Option<u64>,
    /// Write each crawl stage's output under this directory.
    #[arg(long, global = true)]
    pub dump_dir: Option<PathBuf>,
    /// Rank table rows printed by `pagerank`.
    #[arg(long, global = true, default_value_t = 10)]
    pub top: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Cli::parse_from(["crawlrank", "crawl"]).config
    }
}

impl CliConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            bail!("--damping must lie strictly between 0 and 1, got {}", self.damping);
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            bail!("--eps must be non-negative, got {}", self.eps);
        }
        if self.rounds == 0 {
            bail!("--rounds must be at least 1");
        }
        Ok(())
    }

    fn workers(&self) -> usize {
        self.workers as usize
    }

    fn crawl_config(&self) -> CrawlConfig {
        let default_delay = match self.fetcher {
            FetcherKind::Mock => 0,
            FetcherKind::Http => 500,
        };
        CrawlConfig {
            split_size: self.split_size as usize,
            reducers: self.reducers as usize,
            fetch_lanes: self.fetch_lanes as usize,
            rounds: self.rounds as usize,
            per_host_delay: Duration::from_millis(self.per_host_delay_ms.unwrap_or(default_delay)),
            dump_dir: self.dump_dir.clone(),
        }
    }

    fn params(&self) -> Result<PageRankParams64> {
        Ok(PageRankParams64::new(self.damping, self.eps)?)
    }
}

fn make_fetcher(config: &CliConfig) -> Result<Box<dyn Fetcher>> {
    match config.fetcher {
        FetcherKind::Mock => Ok(Box::new(
            MockFetcher::from_dir(&config.corpus).context("loading mock corpus")?,
        )),
        #[cfg(feature = "http")]
        FetcherKind::Http => Ok(Box::new(crawlrank_crawler::HttpFetcher::default())),
        #[cfg(not(feature = "http"))]
        FetcherKind::Http => bail!("http fetcher unavailable: rebuild with `--features http`"),
    }
}

pub fn cmd_crawl(config: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<CrawlSummary> {
    config.validate()?;
    let fetcher = make_fetcher(config)?;
    let seed = read_seed_file(&config.seed)?;
    let mut store = PageStore::open(&config.store_dir)?;
    let summary = run_pipeline(&seed, &config.crawl_config(), fetcher.as_ref(), &mut store)?;
    for r in &summary.rounds {
        writeln!(
            out,
            "round {}: urls={} fetched={} stored={} errors={}",
            r.round, r.urls, r.fetched, r.stored, r.errors
        )?;
    }
    for e in &summary.map_errors {
        writeln!(err, "warning: seed offset {}: {}", e.offset, e.reason)?;
    }
    for (url, reason) in &summary.fetch_errors {
        writeln!(err, "warning: fetch {url}: {reason}")?;
    }
    writeln!(
        out,
        "pages={} errors={} bytes={} stored={} total={}",
        summary.pages_fetched,
        summary.errors,
        summary.bytes,
        summary.pages_stored,
        store.len()
    )?;
    Ok(summary)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn suffixed(base: &Path, worker_index: usize) -> PathBuf {
    PathBuf::from(partition_file_name(&base.to_string_lossy(), worker_index))
}

pub fn cmd_build_graph(
    config: &CliConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(EdgeList, Vec<GraphPartition>)> {
    config.validate()?;
    if !config.store_dir.is_dir() {
        bail!("store directory {} does not exist", config.store_dir.display());
    }
    let store = PageStore::open(&config.store_dir)?;
    if store.is_empty() {
        writeln!(err, "warning: store {} is empty", config.store_dir.display())?;
    }
    let graph = store.export_edge_list();
    write_file(&config.graph_path, &emit_edge_list(&graph))?;
    let parts = partition_graph(&graph, config.workers());
    for p in &parts {
        write_file(&suffixed(&config.graph_path, p.worker_index), &emit_partition(p))?;
    }
    writeln!(
        out,
        "vertices={} edges={} workers={}",
        graph.vertex_ids.len(),
        graph.canonical_edges().len(),
        parts.len()
    )?;
    Ok((graph, parts))
}

pub fn read_partitions(base: &Path, workers: usize) -> Result<Vec<GraphPartition>> {
    (0..workers)
        .map(|i| {
            let path = suffixed(base, i);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            parse_partition(&text, i, workers).with_context(|| format!("parsing {}", path.display()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PageRankOutcome {
    pub report: RunReport64,
    pub table: RankTable64,
    pub elapsed: Duration,
}

pub fn cmd_pagerank(config: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<PageRankOutcome> {
    config.validate()?;
    let params = config.params()?;
    let workers = config.workers();
    let parts = read_partitions(&config.graph_path, workers)?;
    let graph = LoadedGraph::from_partitions(&parts, workers).context("loading partitions")?;
    let engine = EngineConfig::with_workers(workers).max_supersteps(config.max_supersteps);

    let start = Instant::now();
    let mut trace = Ok(());
    let report = run_loaded(graph, &PageRankProgram::new(params), &engine, |s| {
        if trace.is_ok() {
            trace = writeln!(out, "superstep: {}", s.superstep);
        }
    })?;
    trace?;
    let elapsed = start.elapsed();
    if !report.halted_naturally {
        writeln!(
            err,
            "warning: did not converge within {} supersteps",
            config.max_supersteps
        )?;
    }

    for w in 0..workers {
        let owned = report
            .final_values
            .iter()
            .filter(|(&id, _)| crawlrank_core::assign_worker(id, workers) == w);
        write_file(&suffixed(&config.out_path, w), &emit_results(owned))?;
    }
    let table = rank(&report.final_values);
    write_file(
        &config.out_path,
        &emit_results(table.entries.iter().map(|(id, v)| (id, v))),
    )?;

    writeln!(out, "elapsed: {:.6}", elapsed.as_secs_f64())?;
    writeln!(out, "rank\tid\tvalue")?;
    for (i, (id, v)) in table.entries.iter().take(config.top).enumerate() {
        writeln!(out, "{}\t{id}\t{}", i + 1, crawlrank_core::format_significant(*v))?;
    }
    Ok(PageRankOutcome {
        report,
        table,
        elapsed,
    })
}

pub fn cmd_pipeline(config: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<PageRankOutcome> {
    config.validate()?;
    cmd_crawl(config, out, err).context("crawl stage")?;
    cmd_build_graph(config, out, err).context("build-graph stage")?;
    cmd_pagerank(config, out, err).context("pagerank stage")
}

pub fn run_command(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Crawl => cmd_crawl(&cli.config, out, err).map(drop),
        Command::BuildGraph => cmd_build_graph(&cli.config, out, err).map(drop),
        Command::Pagerank => cmd_pagerank(&cli.config, out, err).map(drop),
        Command::Pipeline => cmd_pipeline(&cli.config, out, err).map(drop),
    }
}
