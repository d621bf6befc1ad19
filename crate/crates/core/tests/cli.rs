use std::path::Path;
use std::process::{Command, Output};

use hybrid_nas::export::{FrontExport, RunManifest};
use hybrid_nas::search_space::{sample, SearchSpaceConfig};

const BIN: &str = env!("CARGO_BIN_EXE_hybrid-nas");

fn hnas(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn export(dir: &Path, name: &str) -> FrontExport {
    FrontExport::from_json(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn search_writes_export_manifest_and_scatter() {
    let dir = tempfile::tempdir().unwrap();
    let space = data("toy_space.json");
    let profile = data("unit_profile.json");
    let o = hnas(
        dir.path(),
        &[
            "search",
            "--space",
            &space,
            "--profile",
            &profile,
            "--pop",
            "8",
            "--gens",
            "4",
            "--seed",
            "1",
            "--out",
            "f.json",
            "--scatter",
            "f.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ex = export(dir.path(), "f.json");
    let labels: Vec<_> = ex.runs.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["1-branch", "2-branch", "3-branch"]);
    for r in &ex.runs {
        assert_eq!(r.stats.offspring_evaluations, 32);
        assert!(r
            .candidates
            .iter()
            .all(|c| c.genome.branch_count == r.branches.unwrap()));
    }
    let manifest = RunManifest::from_json(
        &std::fs::read_to_string(dir.path().join("f.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest.command, "search");
    assert_eq!(manifest.seed, 1);
    assert_eq!(manifest.space_source, space);
    assert_eq!(
        manifest.evaluations,
        ex.runs.iter().map(|r| r.stats.evaluations).sum::<usize>()
    );
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(
        csv.lines().count(),
        1 + ex.runs.iter().map(|r| r.candidates.len()).sum::<usize>()
    );
    assert!(stdout(&o).contains("wrote f.json"));
}

#[test]
fn search_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "search",
        "--space",
        "toy",
        "--pop",
        "6",
        "--gens",
        "3",
        "--seed",
        "9",
        "--branches",
        "2",
    ];
    assert!(
        hnas(dir.path(), &[&args[..], &["--out", "a.json"]].concat())
            .status
            .success()
    );
    assert!(
        hnas(dir.path(), &[&args[..], &["--out", "b.json"]].concat())
            .status
            .success()
    );
    assert!(hnas(
        dir.path(),
        &["replay", "a.manifest.json", "--out", "c.json"]
    )
    .status
    .success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(a, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn missing_seed_is_generated_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = hnas(
        dir.path(),
        &[
            "search",
            "--space",
            "toy",
            "--pop",
            "4",
            "--gens",
            "1",
            "--branches",
            "1",
        ],
    );
    assert!(o.status.success());
    let line = stderr(&o);
    let seed: u64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    let manifest = RunManifest::from_json(
        &std::fs::read_to_string(dir.path().join("front.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest.seed, seed);
}

#[test]
fn json_summary_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = hnas(
        dir.path(),
        &[
            "search",
            "--space",
            "toy",
            "--pop",
            "4",
            "--gens",
            "1",
            "--branches",
            "3",
            "--seed",
            "2",
            "--json",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"][0]["label"], "3-branch");
    assert!(!v["runs"][0]["front"].as_array().unwrap().is_empty());
}

#[test]
fn cost_table1_prints_the_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = hnas(
        dir.path(),
        &["cost", "--table1", "--profile", &data("unit_profile.json")],
    );
    assert!(o.status.success());
    let out = stdout(&o);
    let conv = out.lines().find(|l| l.starts_with("Convolution")).unwrap();
    let cols: Vec<&str> = conv.split_whitespace().collect();
    assert_eq!(&cols[1..4], ["Linear", "1.208", "0.590"]);
    assert_eq!(
        out.lines()
            .filter(|l| l.contains("ear ") || l.contains("Quadratic"))
            .count(),
        4
    );

    let o = hnas(dir.path(), &["cost", "--table1", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
}

#[test]
fn cost_of_a_genome_and_of_an_invalid_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = SearchSpaceConfig::toy();
    let g = sample(&config, 4);
    std::fs::write(
        dir.path().join("g.json"),
        serde_json::to_string(&g).unwrap(),
    )
    .unwrap();
    let o = hnas(
        dir.path(),
        &["cost", "--space", "toy", "--genome", "g.json", "--json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let flops: u64 = v["breakdown"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["flops"].as_u64().unwrap())
        .sum();
    assert!((flops as f64 / 1e9 - v["flops_g"].as_f64().unwrap()).abs() < 1e-12);
    for key in ["params_m", "peak_mem_mb", "est_latency_ms"] {
        assert!(v[key].as_f64().unwrap() > 0.0);
    }

    let mut bad = g.clone();
    bad.head_index = 42;
    std::fs::write(
        dir.path().join("bad.json"),
        serde_json::to_string(&bad).unwrap(),
    )
    .unwrap();
    let o = hnas(
        dir.path(),
        &["cost", "--space", "toy", "--genome", "bad.json"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("validate genome"));
    assert!(stderr(&o).contains("  - "));
}

#[test]
fn local_baseline_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = hnas(
        dir.path(),
        &[
            "baseline",
            "local",
            "--space",
            "toy",
            "--seeds",
            "5",
            "--iters",
            "32",
            "--neighbors",
            "5",
            "--evaluator",
            "const:50",
            "--seed",
            "3",
            "--out",
            "l.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        export(dir.path(), "l.json").runs[0].candidates.len(),
        5 * (1 + 32 * 5)
    );
}

#[test]
fn random_baseline_single_candidate_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "baseline", "random", "--space", "toy", "--n", "1", "--seed", "8",
    ];
    assert!(
        hnas(dir.path(), &[&args[..], &["--out", "r1.json"]].concat())
            .status
            .success()
    );
    let ex = export(dir.path(), "r1.json");
    assert_eq!(ex.runs[0].candidates.len(), 1);
    assert_eq!(ex.runs[0].front, vec![0]);
    let args = [
        "baseline", "random", "--space", "toy", "--n", "20", "--seed", "8",
    ];
    assert!(
        hnas(dir.path(), &[&args[..], &["--out", "a.json"]].concat())
            .status
            .success()
    );
    assert!(
        hnas(dir.path(), &[&args[..], &["--out", "b.json"]].concat())
            .status
            .success()
    );
    assert!(hnas(
        dir.path(),
        &["replay", "a.manifest.json", "--out", "c.json"]
    )
    .status
    .success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(a, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn correlate_identical_anti_and_misaligned() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
    w("a.csv", "id,v\nx,1\ny,2\nz,3\nw,4\n");
    w("anti.tsv", "x\t4\ny\t3\nz\t2\nw\t1\n");
    w("short.csv", "x,1\ny,2\n");
    let o = hnas(dir.path(), &["correlate", "a.csv", "a.csv"]);
    assert!(stdout(&o).contains("tau  1.0000"));
    assert!(stdout(&o).contains("rho  1.0000"));
    let o = hnas(dir.path(), &["correlate", "a.csv", "anti.tsv"]);
    assert!(stdout(&o).contains("tau  -1.0000"));
    let o = hnas(dir.path(), &["correlate", "a.csv", "short.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ids do not line up"));
}

#[test]
fn exit_codes_partition_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(hnas(p, &["search", "--pop", "many"]).status.code(), Some(2));
    assert_eq!(
        hnas(p, &["search", "--space", "nope.json"]).status.code(),
        Some(2)
    );
    assert_eq!(hnas(p, &["--help"]).status.code(), Some(0));

    let crash = format!("exec:{BIN} mock-evaluator --fault crash --fault-after 3");
    let o = hnas(
        p,
        &[
            "search",
            "--space",
            "toy",
            "--pop",
            "4",
            "--gens",
            "1",
            "--seed",
            "1",
            "--evaluator",
            &crash,
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("search 1-branch"));
    assert!(stderr(&o).contains("crashed"));
    assert!(
        !p.join("front.json").exists(),
        "no partial export on failure"
    );

    let o = hnas(
        p,
        &[
            "search",
            "--space",
            "toy",
            "--pop",
            "4",
            "--gens",
            "1",
            "--seed",
            "1",
            "--lat-cap",
            "1e-6",
        ],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("S_max"));
}

#[test]
fn external_evaluator_search_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let ev = format!("exec:{BIN} mock-evaluator --rule cells --report-latency");
    let o = hnas(
        dir.path(),
        &[
            "search",
            "--space",
            "toy",
            "--pop",
            "6",
            "--gens",
            "2",
            "--seed",
            "4",
            "--branches",
            "2",
            "--evaluator",
            &ev,
            "--workers",
            "3",
            "--out",
            "e.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ex = export(dir.path(), "e.json");
    assert!(ex.runs[0]
        .candidates
        .iter()
        .all(|c| c.objectives.source == hybrid_nas::evaluator::Source::External));
}
