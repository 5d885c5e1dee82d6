use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn roadevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadevo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_grid(dir: &TempDir, name: &str, rows: usize, seed: u64) -> PathBuf {
    let p = dir.path().join(name);
    let rows = rows.to_string();
    let seed = seed.to_string();
    let out = roadevo(&[
        "gen",
        "grid",
        "--rows",
        &rows,
        "--cols",
        &rows,
        "--rng-seed",
        &seed,
        "-o",
        path_str(&p),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    p
}

#[test]
fn malformed_erg_exits_one_with_line_number() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.erg");
    fs::write(&bad, "ERG 1\nn 2\na 0 1\nz nonsense\n").unwrap();
    let out = roadevo(&["match", path_str(&bad), path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = roadevo(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(roadevo(&["--help"]).status.code(), Some(0));
}

#[test]
fn product_bound_exits_two_with_guidance() {
    // Two copies of the 1-2-1 path in each graph: every label is shared by
    // at least two vertices per side at any depth.
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("paths.erg");
    fs::write(
        &g,
        "ERG 1\nn 6\na 0 1\na 1 0 2\na 2 1\na 3 4\na 4 3 5\na 5 4\n",
    )
    .unwrap();
    let out = roadevo(&["match", "--max-product", "1", path_str(&g), path_str(&g)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tune-k"), "{err}");
}

#[test]
fn identical_generated_graphs_match_fully() {
    let dir = TempDir::new().unwrap();
    let g = gen_grid(&dir, "g.erg", 15, 4);
    let m = dir.path().join("m.txt");
    let out = roadevo(&[
        "match",
        "--auto-k",
        path_str(&g),
        path_str(&g),
        "-o",
        path_str(&m),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&m).unwrap();
    assert!(text.contains("matched: 225"), "{text}");
    assert!(text.contains("unmatched1: 0"));

    let out = roadevo(&["validate", path_str(&m), path_str(&g), path_str(&g)]);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("conformal: true"), "{report}");
    assert!(report.contains("threshold_ratio@5mi: 1.000000"), "{report}");
}

#[test]
fn no_timing_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let g1 = gen_grid(&dir, "g1.erg", 12, 9);
    let g2 = dir.path().join("g2.erg");
    let truth = dir.path().join("t.txt");
    let out = roadevo(&[
        "perturb",
        "--remove-vertices",
        "0.05",
        "--remove-edges",
        "0.03",
        "--add-edges",
        "0.02",
        "--rng-seed",
        "5",
        path_str(&g1),
        "-o",
        path_str(&g2),
        "--truth",
        path_str(&truth),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = || {
        let out = roadevo(&[
            "match",
            "--auto-k",
            "--no-timing",
            "--rng-seed",
            "7",
            path_str(&g1),
            path_str(&g2),
        ]);
        assert!(out.status.success());
        out.stdout
    };
    let a = run();
    assert_eq!(a, run());
    assert!(!String::from_utf8_lossy(&a).contains("seed_time"));
}

#[test]
fn generation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = gen_grid(&dir, "a.erg", 10, 2);
    let b = gen_grid(&dir, "b.erg", 10, 2);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn label_and_tune_k_report_stats() {
    let dir = TempDir::new().unwrap();
    let g = gen_grid(&dir, "g.erg", 8, 1);
    let out = roadevo(&["label", "--k", "3", path_str(&g)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("label ")).count(), 64);
    assert!(text.contains("distinct_labels: "));

    let out = roadevo(&["tune-k", "--k-max", "4", path_str(&g)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("k ")).count(), 4);
    assert!(text.contains("chosen_k: "));
}

#[test]
fn oracle_on_toy_graphs() {
    let dir = TempDir::new().unwrap();
    let p3 = dir.path().join("p3.erg");
    let p4 = dir.path().join("p4.erg");
    fs::write(&p3, "ERG 1\nn 3\na 0 1\na 1 0 2\na 2 1\n").unwrap();
    fs::write(&p4, "ERG 1\nn 4\na 0 1\na 1 0 2\na 2 1 3\na 3 2\n").unwrap();
    let out = roadevo(&["oracle", path_str(&p3), path_str(&p4)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("maximum: 2"));

    let g = gen_grid(&dir, "big.erg", 5, 0);
    let out = roadevo(&["oracle", path_str(&g), path_str(&g)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segment_input_builds_a_graph() {
    let dir = TempDir::new().unwrap();
    let s = dir.path().join("roads.txt");
    fs::write(&s, segments_fixture()).unwrap();
    let out = roadevo(&["label", "--format", "segments", "--k", "2", path_str(&s)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("vertices: 4"));
}

fn segments_fixture() -> String {
    let pts = roadevo::ingest::SegmentSet {
        polylines: vec![
            vec![
                roadevo::LonLat::new(0.0, 0.0),
                roadevo::LonLat::new(0.0, 1.0),
            ],
            vec![
                roadevo::LonLat::new(0.0, 0.0),
                roadevo::LonLat::new(1.0, 0.0),
            ],
            vec![
                roadevo::LonLat::new(0.0, 0.0),
                roadevo::LonLat::new(-1.0, 0.0),
            ],
        ],
    };
    roadevo::ingest::emit_segments(&pts)
}
