use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hcsplit_core::io::read_tree;

fn hcsplit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcsplit"))
        .args(args)
        .current_dir(dir)
        .env("HCSPLIT_WORKERS", "1")
        .output()
        .expect("binary runs")
}

/// Rows of a CSV on stdout, as header-keyed maps.
fn rows(out: &Output) -> Vec<Vec<(String, String)>> {
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).expect("column").1
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = hcsplit(&["generate", "--n", "64", "--seed", "7", "--out", out], dir.path());
        assert!(o.status.success());
    }
    for name in ["graph-n64-s7.json", "tree-n64-s7.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn caterpillar_has_full_depth() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcsplit(&["generate", "--n", "32", "--shape", "caterpillar"], dir.path());
    assert!(o.status.success());
    let t = read_tree(&dir.path().join("tree-n32-s0.json")).unwrap();
    assert_eq!(t.height(), 31);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcsplit(&["generate", "--n", "1"], dir.path()).status.code(), Some(2));
    let o = hcsplit(&["build", "--algo", "hc-das", "--n", "64", "--tau", "32", "--exact-limit", "20"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(hcsplit(&["build", "--n", "64", "--p", "0.3"], dir.path()).status.code(), Some(2));
    assert_eq!(hcsplit(&["build", "--n", "64", "--adversary", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcsplit(&["build", "--tree", "missing.json"], dir.path()).status.code(), Some(4));
}

#[test]
fn perfect_mw_build_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcsplit(&["build", "--algo", "hc-mw", "--p", "1", "--preset", "desk", "--n", "256", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&o);
    assert_eq!(rows.len(), 1);
    assert_eq!(field(&rows[0], "consistency"), "pass");
    assert!(dir.path().join("out/tree-s0.json").exists());
    assert!(dir.path().join("out/trace-s0.jsonl").exists());
}

#[test]
fn seed_sweep_emits_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcsplit(
        &["build", "--algo", "hc-das", "--p", "0.9", "--n", "24", "--tau", "16", "--seed", "1..50"],
        dir.path(),
    );
    assert!(matches!(o.status.code(), Some(0) | Some(3)));
    let rows = rows(&o);
    assert_eq!(rows.len(), 50);
    let seeds: Vec<&str> = rows.iter().map(|r| field(r, "seed")).collect();
    assert_eq!(seeds[0], "1");
    assert_eq!(seeds[49], "50");
}

#[test]
fn stream_matches_offline() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcsplit(&["stream", "--n", "128", "--tau", "16", "--seed", "3", "--check-offline", "--out", "s"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&o);
    assert_eq!(field(&rows[0], "consistency"), "pass");
    assert!(!field(&rows[0], "mem_bits").is_empty());
    assert!(dir.path().join("s/memory-s3.json").exists());
}

#[test]
fn cancelled_stream_equals_empty_stream() {
    let dir = tempfile::tempdir().unwrap();
    hcsplit(&["generate", "--n", "40"], dir.path());
    fs::write(dir.path().join("empty.txt"), "").unwrap();
    fs::write(dir.path().join("cancel.txt"), "+ 0 1 3\n+ 2 5 1\n- 0 1 3\n- 2 5 1\n").unwrap();
    for name in ["empty", "cancel"] {
        let o = hcsplit(
            &["stream", "--tree", "tree-n40-s0.json", "--stream", &format!("{name}.txt"), "--tau", "16", "--out", name],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("empty/stream-tree-s0.json")).unwrap();
    let b = fs::read(dir.path().join("cancel/stream-tree-s0.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn negative_stream_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    hcsplit(&["generate", "--n", "16"], dir.path());
    fs::write(dir.path().join("bad.txt"), "- 0 1 2\n").unwrap();
    let o = hcsplit(&["stream", "--tree", "tree-n16-s0.json", "--stream", "bad.txt", "--tau", "16"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn planted_tree_scores_ratio_one() {
    let dir = tempfile::tempdir().unwrap();
    hcsplit(&["generate", "--n", "48", "--seed", "2"], dir.path());
    let (g, t) = ("graph-n48-s2.json", "tree-n48-s2.json");
    for objective in ["das", "mw"] {
        let o = hcsplit(&["eval", "--graph", g, "--tree", t, "--planted", t, "--objective", objective], dir.path());
        assert!(o.status.success());
        assert_eq!(field(&rows(&o)[0], "ratio"), "1.0");
    }
}

#[test]
fn bench_reports_true_optimum_at_small_n() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcsplit(&["bench", "--n", "7", "--seed", "0..1", "--p-list", "1,0.9"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&o);
    // Two oracle rows and two oracle-free rows per seed.
    assert_eq!(rows.len(), 8);
    for row in &rows {
        assert!(!field(row, "opt_exact").is_empty());
        if field(row, "algo") == "recursive-sparsest" {
            assert!(field(row, "p").is_empty());
            assert!(field(row, "queries").is_empty());
        }
    }
}
