use std::path::PathBuf;
use std::process::Command;

use purgemerge_cli::run_cli;

fn fixture(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("purgemerge").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const PUZZLE: &str = "52...6.........7.13...........4..8..6......5...........418.........3..2...87.....";

#[test]
fn solve_prints_a_grid_that_verifies() {
    let puzzle = scratch("one.sdk", PUZZLE);
    let (code, out, _) = run(&["solve", puzzle.to_str().unwrap()]);
    assert_eq!(code, 0);
    let line = out.trim();
    assert_eq!(line.len(), 81);
    assert!(line.chars().zip(PUZZLE.chars()).all(|(s, p)| p == '.' || s == p));
    let answer = scratch("one.answer", &out);
    let (code, out, _) = run(&["verify", puzzle.to_str().unwrap(), answer.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn verify_rejects_a_wrong_grid() {
    let puzzle = scratch("wrong.sdk", PUZZLE);
    let (_, out, _) = run(&["solve", puzzle.to_str().unwrap()]);
    let mut bad: Vec<char> = out.trim().chars().collect();
    bad.swap(2, 3);
    let answer = scratch("wrong.answer", &bad.into_iter().collect::<String>());
    let (code, out, _) = run(&["verify", puzzle.to_str().unwrap(), answer.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("invalid"), "{out}");
}

#[test]
fn contradictory_puzzle_exits_one() {
    // r1c1 must be 1 by its row, but column 1 already holds a 1.
    let text = format!(".23456789{}1{}", ".".repeat(18), ".".repeat(53));
    let puzzle = scratch("contradiction.sdk", &text);
    let (code, _, err) = run(&["solve", puzzle.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("unsatisfiable"), "{err}");
}

#[test]
fn usage_and_parse_errors_exit_three() {
    assert_eq!(run(&["solve"]).0, 3);
    assert_eq!(run(&["frobnicate"]).0, 3);
    assert_eq!(run(&["solve", "--metric", "bogus", "x.sdk"]).0, 3);
    assert_eq!(run(&["solve", "/definitely/not/here.sdk"]).0, 3);
    let short = scratch("short.sdk", "123");
    assert_eq!(run(&["solve", short.to_str().unwrap()]).0, 3);
    let dup = scratch("dup.sdk", &format!("11{}", ".".repeat(79)));
    let (code, _, err) = run(&["solve", dup.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("appears twice"), "{err}");
    let growth = fixture("dice.json");
    assert_eq!(run(&["solve", &growth, "--threshold-growth", "0"]).0, 3);
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("bench"));
    assert_eq!(run(&["--version"]).0, 0);
    assert_eq!(run(&["solve", "--help"]).0, 0);
}

#[test]
fn stats_json_matches_the_golden_file() {
    let dice = fixture("dice.json");
    let (code, out, err) = run(&["enumerate", &dice, "--stats", "json"]);
    assert_eq!(code, 0);
    assert_eq!(out, "d1=4 d2=6\nd1=5 d2=5\nd1=6 d2=4\n");
    let mut row: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert!(row["wall_time_secs"].as_f64().unwrap() >= 0.0);
    row["wall_time_secs"] = serde_json::json!(0.0);
    row["puzzle"] = serde_json::json!("dice.json:1");
    let golden: serde_json::Value = serde_json::from_str(include_str!("golden/dice_stats.json")).unwrap();
    assert_eq!(row, golden);
    // Field order is part of the format too.
    let keys = [
        "puzzle",
        "metric",
        "threshold_init",
        "threshold_growth",
        "outcome",
        "wall_time_secs",
        "rounds",
        "peak_table_entries",
        "peak_table_bits",
        "solution_count",
        "truncated",
    ];
    assert_eq!(keys.len(), golden.as_object().unwrap().len());
    let raw = err.trim();
    let mut last = 0;
    for k in keys {
        let at = raw.find(&format!("\"{k}\"")).unwrap();
        assert!(at >= last, "{k} out of order");
        last = at;
    }
}

#[test]
fn all_solutions_respects_the_cap() {
    let dice = fixture("dice.json");
    let (code, out, err) = run(&["solve", &dice, "--all-solutions", "--cap", "2", "--stats", "json"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
    assert!(err.contains("\"truncated\":true"), "{err}");
}

#[test]
fn dump_graph_lists_clusters() {
    let dice = fixture("dice.json");
    let (_, _, err) = run(&["solve", &dice, "--dump-graph"]);
    assert!(err.starts_with("# round 0\ncluster 0: d1 d2\n"), "{err}");
}

#[test]
fn oracle_subcommand_enumerates() {
    let dice = fixture("dice.json");
    let (code, out, _) = run(&["oracle", &dice]);
    assert_eq!(code, 0);
    assert_eq!(out, "d1=4 d2=6\nd1=5 d2=5\nd1=6 d2=4\n");
    let (code, _, err) = run(&["oracle", &dice, "--cap", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("budget exceeded"));
}

#[test]
fn bench_emits_one_row_per_run_in_order() {
    let small = scratch("bench.sdk", "1...\n..3.\n.4..\n...2\n");
    let corpus = scratch(
        "bench_corpus.sdk",
        &format!("{}\n{}\n", ".1....3...23....", ".".repeat(16)),
    );
    let (code, out, _) = run(&[
        "bench",
        corpus.to_str().unwrap(),
        small.to_str().unwrap(),
        "--metric",
        "gravity,entropy,overlap",
        "--threshold-init",
        "1.0,2.0",
        "--jobs",
        "3",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3 * 3 * 2);
    assert_eq!(rows[0]["metric"], "gravity");
    assert_eq!(rows[0]["threshold_init"], 1.0);
    assert_eq!(rows[1]["threshold_init"], 2.0);
    assert_eq!(rows[2]["metric"], "entropy");
    assert!(rows[6]["puzzle"].as_str().unwrap().ends_with(":2"));
    assert!(rows.iter().all(|r| r["outcome"] == "solved"));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_purgemerge");
    let status = Command::new(exe)
        .args(["solve", &fixture("dice.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(exe)
        .args(["solve", &fixture("clique12.json"), "--max-table-entries", "100000"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(exe).args(["solve", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(3));
}
