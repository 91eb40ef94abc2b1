use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn crawlrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crawlrank"))
        .current_dir(dir)
        .args(args)
        .env_remove("CRAWLRANK_STORE")
        .env_remove("CRAWLRANK_FETCHER")
        .env_remove("CRAWLRANK_CORPUS")
        .output()
        .expect("spawn crawlrank")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture_args() -> Vec<String> {
    vec![
        "--seed".into(),
        fixtures().join("seeds.txt").display().to_string(),
        "--corpus".into(),
        fixtures().join("corpus").display().to_string(),
    ]
}

fn run_with(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let owned = fixture_args();
    let mut args: Vec<&str> = vec![cmd];
    args.extend(owned.iter().map(String::as_str));
    args.extend_from_slice(extra);
    crawlrank(dir, &args)
}

#[test]
fn crawl_reports_fixture_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), "crawl", &["--rounds", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pages=3 errors=0"), "{}", stdout(&o));
}

#[test]
fn empty_seed_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("seeds.txt"), "").unwrap();
    let corpus = fixtures().join("corpus").display().to_string();
    let o = crawlrank(dir.path(), &["crawl", "--corpus", &corpus]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pages=0"));
}

#[test]
fn missing_seed_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = crawlrank(dir.path(), &["crawl", "--seed", "nope.txt", "--corpus", "."]);
    assert!(!o.status.success());
    assert_eq!(stderr(&o).lines().count(), 1, "{}", stderr(&o));
}

#[cfg(not(feature = "http"))]
#[test]
fn http_without_feature_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), "crawl", &["--fetcher", "http"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("http"));
}

#[test]
fn invalid_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!run_with(dir.path(), "pipeline", &["--rounds", "0"]).status.success());
    assert!(!run_with(dir.path(), "pipeline", &["--workers", "0"]).status.success());
    assert!(!run_with(dir.path(), "pipeline", &["--damping", "1.5"]).status.success());
}

#[test]
fn build_graph_on_empty_store_writes_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("store")).unwrap();
    let o = crawlrank(dir.path(), &["build-graph", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty"));
    for name in ["graph/graph", "graph/graph_1", "graph/graph_2"] {
        assert_eq!(fs::read_to_string(dir.path().join(name)).unwrap(), "0\n0\n");
    }
}

#[test]
fn build_graph_whole_file_for_fixture() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_with(dir.path(), "crawl", &["--rounds", "2"]).status.success());
    let o = crawlrank(dir.path(), &["build-graph", "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let whole = fs::read_to_string(dir.path().join("graph/graph")).unwrap();
    assert_eq!(whole, "3\n5\n1 2\n1 3\n2 1\n2 3\n3 1\n");
    assert_eq!(fs::read_to_string(dir.path().join("graph/graph_1")).unwrap(), whole);
}

#[test]
fn two_cycle_ties_break_to_vertex_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("g")).unwrap();
    fs::write(dir.path().join("g/c_1"), "1\n1\n0 1\n").unwrap();
    fs::write(dir.path().join("g/c_2"), "1\n1\n1 0\n").unwrap();
    let o = crawlrank(dir.path(), &["pagerank", "--graph", "g/c", "--out", "r/c", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("r/c")).unwrap(), "0\t1\n1\t1\n");
    assert_eq!(fs::read_to_string(dir.path().join("r/c_1")).unwrap(), "0\t1\n");
    assert_eq!(fs::read_to_string(dir.path().join("r/c_2")).unwrap(), "1\t1\n");
    assert!(stdout(&o).contains("superstep: 0"));
    assert!(stdout(&o).contains("elapsed: "));
}

#[test]
fn capped_run_warns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t_1"), "3\n4\n0 1\n0 2\n1 2\n2 0\n").unwrap();
    let o = crawlrank(
        dir.path(),
        &["pagerank", "--graph", "t", "--out", "o", "--workers", "1", "--max-supersteps", "1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn dangling_destination_without_home_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    // vertex 3 lives on worker 1, which declares no vertices
    fs::write(dir.path().join("t_1"), "1\n1\n0 3\n").unwrap();
    fs::write(dir.path().join("t_2"), "0\n0\n").unwrap();
    let o = crawlrank(dir.path(), &["pagerank", "--graph", "t", "--out", "o", "--workers", "2"]);
    assert!(!o.status.success());
    assert!(!stdout(&o).contains("superstep"));
}

#[test]
fn pipeline_is_reproducible_and_idempotent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = run_with(d, "pipeline", &["--rounds", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let files = [
        "store/meta.jsonl",
        "store/NEXT_ID",
        "graph/graph",
        "graph/graph_2",
        "out/pagerank",
        "out/pagerank_2",
    ];
    for f in files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rank_before = fs::read(a.path().join("out/pagerank")).unwrap();
    let o = run_with(a.path(), "pipeline", &["--rounds", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("stored=0 total=3"), "{}", stdout(&o));
    assert_eq!(fs::read(a.path().join("out/pagerank")).unwrap(), rank_before);
}
