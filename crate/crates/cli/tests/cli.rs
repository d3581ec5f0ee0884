use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn labelprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelprop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn exact_output_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.tsv");
    let run = labelprop(&[
        "propagate",
        "--graph",
        path_str(&fixture("graph.tsv")),
        "--seeds",
        path_str(&fixture("seeds.tsv")),
        "--method",
        "exact",
        "--iterations",
        "10",
        "--output",
        path_str(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        fs::read_to_string(fixture("exact_golden.tsv")).unwrap()
    );
    let log = String::from_utf8_lossy(&run.stderr);
    assert_eq!(log.lines().filter(|l| l.starts_with("iteration=") && l.contains("objective=")).count(), 10);
}

#[test]
fn output_goes_to_stdout_without_output_flag() {
    let run = labelprop(&[
        "propagate",
        "--graph",
        path_str(&fixture("graph.tsv")),
        "--seeds",
        path_str(&fixture("seeds.tsv")),
        "--method",
        "exact",
    ]);
    assert!(run.status.success());
    assert_eq!(stdout(&run), fs::read_to_string(fixture("exact_golden.tsv")).unwrap());
}

#[test]
fn partitions_do_not_change_streaming_output() {
    let dir = tempfile::tempdir().unwrap();
    let gen = labelprop(&[
        "gen-synthetic",
        "--clusters",
        "4",
        "--nodes-per-cluster",
        "60",
        "--intra",
        "0.15",
        "--inter",
        "0.01",
        "--seeds-per-cluster",
        "3",
        "--rng-seed",
        "9",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert!(gen.status.success());
    let graph = dir.path().join("graph.tsv");
    let seeds = dir.path().join("seeds.tsv");
    let mut outputs = Vec::new();
    for (parts, workers) in [("1", "1"), ("4", "3")] {
        let run = labelprop(&[
            "propagate",
            "--graph",
            path_str(&graph),
            "--seeds",
            path_str(&seeds),
            "--method",
            "streaming",
            "--k",
            "2",
            "--partitions",
            parts,
            "--workers",
            workers,
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        outputs.push(run.stdout);
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn missing_seeds_is_a_usage_error() {
    let run = labelprop(&["propagate", "--graph", path_str(&fixture("graph.tsv"))]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("--seeds"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    let g = fixture("graph.tsv");
    let s = fixture("seeds.tsv");
    for extra in [["--method", "dense"], ["--partitions", "0"], ["--delta-mode", "x"]] {
        let mut args = vec!["propagate", "--graph", path_str(&g), "--seeds", path_str(&s)];
        args.extend(extra);
        assert_eq!(labelprop(&args).status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let missing = labelprop(&["propagate", "--graph", "/nonexistent/g.tsv", "--seeds", "/nonexistent/s.tsv"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_k = labelprop(&[
        "propagate",
        "--graph",
        path_str(&fixture("graph.tsv")),
        "--seeds",
        path_str(&fixture("seeds.tsv")),
        "--k",
        "0",
    ]);
    assert_eq!(bad_k.status.code(), Some(1));
}

#[test]
fn help_lists_defaults() {
    let help = stdout(&labelprop(&["propagate", "--help"]));
    for needle in [
        "--mu1 <MU1>",
        "[default: 1]",
        "[default: 0.01]",
        "[default: 10]",
        "[default: 0.001]",
        "[default: streaming]",
    ] {
        assert!(help.contains(needle), "missing {needle}");
    }
    let help = stdout(&labelprop(&["augment", "--help"]));
    for needle in ["[default: 0.6]", "[default: 12]", "[default: 10]"] {
        assert!(help.contains(needle), "missing {needle}");
    }
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "method=exact\niterations=10\nk=1\n").unwrap();
    let (g, s) = (fixture("graph.tsv"), fixture("seeds.tsv"));
    let base = [
        "propagate",
        "--graph",
        path_str(&g),
        "--seeds",
        path_str(&s),
        "--config",
        path_str(&conf),
    ];
    let from_config = labelprop(&base);
    assert!(from_config.status.success());
    assert_eq!(stdout(&from_config), fs::read_to_string(fixture("exact_golden.tsv")).unwrap());

    let mut overridden = base.to_vec();
    overridden.extend(["--method", "streaming"]);
    let run = labelprop(&overridden);
    assert!(run.status.success());
    // streaming with k=1 from the file keeps one label per node
    assert_eq!(stdout(&run).lines().count(), 6);

    fs::write(&conf, "no-such-flag=1\n").unwrap();
    assert_eq!(labelprop(&base).status.code(), Some(2));
}

#[test]
fn gen_synthetic_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let run = labelprop(&["gen-synthetic", "--clusters", "3", "--out-dir", path_str(dir.path())]);
        assert!(run.status.success());
    }
    for name in ["graph.tsv", "gold.tsv", "seeds.tsv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let gold = fs::read_to_string(a.path().join("gold.tsv")).unwrap();
    assert_eq!(gold.lines().count(), 150);
}

#[test]
fn evaluate_prints_table_and_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let gen = labelprop(&["gen-synthetic", "--out-dir", path_str(dir.path())]);
    assert!(gen.status.success());
    let tsv = dir.path().join("report.tsv");
    let run = labelprop(&[
        "evaluate",
        "--graph",
        path_str(&dir.path().join("graph.tsv")),
        "--gold",
        path_str(&dir.path().join("gold.tsv")),
        "--methods",
        "exact,streaming",
        "--k",
        "1",
        "--output",
        path_str(&tsv),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = fs::read_to_string(&tsv).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "method\tmrr\tp@1\tp@5\tp@10\tp@20\tsecs\tentries");
    assert!(lines[1].starts_with("exact\t"));
    // k=1 of 2 labels: MRR and P@K for K > 1 are unavailable
    let streaming: Vec<&str> = lines[2].split('\t').collect();
    assert_eq!(streaming[0], "streaming(k=1)");
    assert_eq!(&streaming[1..6], &["NA", streaming[2], "NA", "NA", "NA"]);
    assert!(stdout(&run).lines().next().unwrap().starts_with("method"));
}

#[test]
fn augment_adds_similarity_edges() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.tsv");
    let emb = dir.path().join("e.tsv");
    fs::write(&graph, "big apple\tnew_york\t1\nparis\tlondon\t1\n").unwrap();
    fs::write(&emb, "big\t1,0,0\napple\t0,1,0\nnew_york\t0.5,0.5,0\nparis\t0,0,1\n").unwrap();
    let run = labelprop(&["augment", "--graph", path_str(&graph), "--embeddings", path_str(&emb)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    // "big apple" averages to (0.5, 0.5, 0), identical in direction to new_york;
    // london has no vector; paris is orthogonal to everything else.
    assert_eq!(stdout(&run), "big apple\tnew_york\t1\nlondon\tparis\t1\n");
}

#[test]
fn partition_stats_reports_cut() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("k4.tsv");
    fs::write(&graph, "a\tb\na\tc\na\td\nb\tc\nb\td\nc\td\n").unwrap();
    let run = labelprop(&["partition-stats", "--graph", path_str(&graph), "--partitions", "2"]);
    assert!(run.status.success());
    assert_eq!(stdout(&run), "partition\tnodes\tcross_edges\n0\t2\t4\n1\t2\t4\ncut\t6\t4\n");
}
