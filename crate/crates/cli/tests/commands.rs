use std::path::Path;
use std::process::{Command, Output};

use specbal_core::instance::{read_instance, write_instance};
use specbal_core::{brute_force_min, ConcentrationParams, Instance, SolveReport};

fn specbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specbal")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", path_str(&out)]);
    let res = specbal(&full);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn gen_writes_the_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "lb8.json", &["lower-bound", "--n", "8"]);
    let inst = read_instance(&path).unwrap();
    assert_eq!((inst.n(), inst.d()), (8, 8));
}

#[test]
fn gen_prints_parameters_matching_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lr.json");
    let res = specbal(&[
        "gen",
        "--family",
        "low-rank",
        "--n",
        "32",
        "--d",
        "32",
        "--r",
        "4",
        "--seed",
        "3",
        "--out",
        path_str(&out),
    ]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let p = ConcentrationParams::compute(&read_instance(&out).unwrap()).unwrap();
    assert!(text.contains(&format!("sigma = {:.6}", p.sigma)), "{text}");
    assert!(text.contains(&format!("v = {:.6}", p.v)), "{text}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(specbal(&["gen", "low-rank"]).status.code(), Some(2));
    assert_eq!(specbal(&["gen", "nonsense", "--n", "4"]).status.code(), Some(2));
    assert_eq!(specbal(&["solve", "/nonexistent/instance.json"]).status.code(), Some(2));
}

#[test]
fn solve_zero_instance_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("zero.json");
    write_instance(&Instance::zeros(6, 3).unwrap(), &inst).unwrap();
    let report = dir.path().join("report.json");
    let res = specbal(&["solve", path_str(&inst), "--seed", "1", "--out", path_str(&report)]);
    assert!(res.status.success());
    let report: SolveReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report.discrepancy, 0.0);
}

#[test]
fn solve_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = gen(
        dir.path(),
        "lr.json",
        &["low-rank", "--n", "30", "--r", "2", "--seed", "8"],
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let res = specbal(&["solve", path_str(&inst_path), "--seed", "17", "--out", path_str(out)]);
        assert!(res.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());

    let report: SolveReport = serde_json::from_slice(&bytes_a).unwrap();
    let inst = read_instance(&inst_path).unwrap();
    assert!((inst.discrepancy(&report.signs) - report.discrepancy).abs() <= 1e-8);
    assert_eq!(report.seed, Some(17));
}

#[test]
fn solve_without_seed_prints_the_drawn_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "lb.json", &["lower-bound", "--n", "6"]);
    let res = specbal(&["solve", path_str(&inst)]);
    assert!(res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    let seed: u64 = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .unwrap()
        .parse()
        .unwrap();
    let report: SolveReport = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report.seed, Some(seed));
}

#[test]
fn solver_failure_exits_with_three_and_a_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(
        dir.path(),
        "lr.json",
        &["low-rank", "--n", "40", "--r", "2", "--seed", "1"],
    );
    let report = dir.path().join("partial.json");
    // A radius this small cannot freeze anything.
    let res = specbal(&[
        "solve",
        path_str(&inst),
        "--seed",
        "1",
        "--c-bound",
        "1e-9",
        "--max-restarts",
        "1",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(value["error"].as_str().unwrap().contains("partial coloring failed"));
    assert_eq!(value["seed"], 1);
}

#[test]
fn bench_includes_brute_force_below_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = gen(dir.path(), "lb12.json", &["lower-bound", "--n", "12"]);
    let res = specbal(&["bench", path_str(&inst_path), "--seed", "2", "--samples", "50"]);
    assert!(res.status.success());
    let mut reader = csv::Reader::from_reader(res.stdout.as_slice());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["method", "discrepancy", "normalized", "runtime_ms", "seed"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let value = |name: &str| -> f64 { rows.iter().find(|r| &r[0] == name).unwrap()[1].parse().unwrap() };
    let (_, exact) = brute_force_min(&read_instance(&inst_path).unwrap()).unwrap();
    assert!((value("brute-force") - exact).abs() < 1e-6);
    assert!(value("solver") >= value("brute-force") - 1e-6);
    let methods: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(
        methods,
        ["solver", "random", "brute-force", "chernoff_bound", "bbvh_bound"]
    );
}

#[test]
fn bench_skips_brute_force_above_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = gen(dir.path(), "ds.json", &["diagonal-spencer", "--n", "40", "--seed", "1"]);
    let csv_path = dir.path().join("bench.csv");
    let res = specbal(&[
        "bench",
        path_str(&inst_path),
        "--seed",
        "2",
        "--samples",
        "20",
        "--out",
        path_str(&csv_path),
    ]);
    assert!(res.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.contains("brute-force,skipped (n>24)"), "{text}");
}

#[test]
fn bench_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = gen(
        dir.path(),
        "lr.json",
        &["low-rank", "--n", "20", "--r", "2", "--seed", "5"],
    );
    let strip_runtime = |out: Output| -> Vec<String> {
        let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
        reader
            .records()
            .map(|r| {
                let r = r.unwrap();
                format!("{},{},{}", &r[0], &r[1], &r[4])
            })
            .collect()
    };
    let one = strip_runtime(specbal(&[
        "--threads",
        "1",
        "bench",
        path_str(&inst_path),
        "--seed",
        "3",
        "--samples",
        "64",
    ]));
    let four = strip_runtime(specbal(&[
        "--threads",
        "4",
        "bench",
        path_str(&inst_path),
        "--seed",
        "3",
        "--samples",
        "64",
    ]));
    assert_eq!(one, four);
}

#[test]
fn verify_passes_on_generated_low_rank() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(
        dir.path(),
        "lr.json",
        &["low-rank", "--n", "8", "--d", "6", "--r", "2", "--seed", "4"],
    );
    let res = specbal(&["verify", path_str(&inst), "--seed", "1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("PASS gram-covariance"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_rejects_asymmetric_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"n": 1, "d": 2, "label": "bad", "matrices": [[1.0, 0.5, 0.0, 1.0]]}"#,
    )
    .unwrap();
    let res = specbal(&["verify", path_str(&path), "--seed", "0"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not symmetric"));
}

#[test]
fn verify_fails_on_oversized_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    std::fs::write(
        &path,
        r#"{"n": 1, "d": 2, "label": "big", "matrices": [[2.0, 0.0, 0.0, 0.0]]}"#,
    )
    .unwrap();
    let res = specbal(&["verify", path_str(&path), "--seed", "0"]);
    assert_eq!(res.status.code(), Some(1));
}
