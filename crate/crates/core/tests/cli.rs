//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[factors]
icc = [[0.01, 0.01], [0.20, 0.20]]
design = ["many_small", "few_large"]
mechanism = ["individual"]
eta = ["low"]
nonresponse = ["equal"]
[run]
M = 3
N = 4
seed = 11
"#;

fn crtmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crtmi")).args(args).output().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn run_summarize_anova_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let run_dir = dir.path().join("run");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let out = crtmi(&["run", "--config", &s(&cfg), "--out", &s(&run_dir), "--seed", "2024", "--replicates", "3", "--parallelism", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(&run_dir.join("replicates.csv"));
    // 4 scenarios × 3 replicates × 4 methods × 2 outcomes
    assert_eq!(records.len(), 1 + 4 * 3 * 4 * 2);
    assert_eq!(lines(&run_dir.join("performance.csv")).len(), 1 + 4 * 4 * 2);

    let sum_dir = dir.path().join("summary");
    let out = crtmi(&["summarize", "--in", &s(&run_dir), "--out", &s(&sum_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(lines(&sum_dir.join("performance.csv")), lines(&run_dir.join("performance.csv")));
    assert!(sum_dir.join("pct_bias_table.csv").exists());
    assert!(sum_dir.join("coverage_table.csv").exists());

    let table = dir.path().join("coverage_anova.csv");
    let out = crtmi(&["anova", "--in", &s(&sum_dir), "--measure", "coverage", "--out", &s(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.contains("design") && text.contains("icc"));
}

#[test]
fn run_subset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let mut outputs = Vec::new();
    for k in ["1", "3"] {
        let out_dir = dir.path().join(format!("p{k}"));
        let out = crtmi(&[
            "run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
            "--replicates", "2", "--parallelism", k, "--methods", "CCA,MMI",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(out_dir.join("replicates.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(!text.contains("SMI") && !text.contains("FMI"));
}

#[test]
fn calibrate_prints_intercept() {
    let out = crtmi(&["calibrate", "--mechanism", "individual", "--eta", "1", "--target", "0.2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let alpha: f64 = row[3].parse().unwrap();
    let rate: f64 = row[4].parse().unwrap();
    assert!((alpha + 1.649703).abs() < 1e-5, "{alpha}");
    assert!((rate - 0.2).abs() < 1e-9);
}

#[test]
fn bad_input_is_reported() {
    let out = crtmi(&["calibrate", "--mechanism", "sideways", "--eta", "1", "--target", "0.2"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let out = crtmi(&["run", "--config", "/nonexistent/study.toml", "--out", "/tmp/never"]);
    assert!(!out.status.success());
}

#[test]
fn acceptance_subcommand_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    std::fs::write(
        &suite,
        r#"
        [[case]]
        name = "oracles"
        criterion = 7
        scenarios = []
        seed = 2024
        assertions = [
            { metric = "oracle.rubin_qbar_err", cmp = "lt", bound = 1e-12 },
            { metric = "oracle.anova_2x2_max_rel_err", cmp = "lt", bound = 1e-10 },
        ]
        "#,
    )
    .unwrap();
    let report = dir.path().join("report.csv");
    let out = crtmi(&["acceptance", "--suite", suite.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("criterion 7: PASS"));
    assert_eq!(lines(&report).len(), 3);
}
