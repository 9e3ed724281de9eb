use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ROUNDS_HEADER: &str = "round,strategy,mechanism,mean_reward,normalized_reward,budget";
const FIGURE1_HEADER: &str = "round,k,strategy,curve,normalized_reward";

/// A quick configuration: 30 rounds, 20 tasks, 120 agents.
const SMALL: &str = r#"
seed = 11
rounds = 30

[tasks]
per_round = 20
answers = 3
deadline = 1.0

[population]
agents = 120
agents_per_task = 2

[[population.mix]]
fraction = 0.6

[population.mix.strategy]
kind = "trustworthy"
accuracy = 0.9
solve_time = { lo = 0.5, hi = 1.0 }

[[population.mix]]
fraction = 0.4

[population.mix.strategy]
kind = "random"
report_time = { lo = 0.5, hi = 1.0 }

[mechanism]
name = "reform-rptsc"
k = 2
alpha = 11.0
decay = "constant"

[term]
lambda = 0.9
gompertz = { a = 1.0, b = -1.0, c = -0.5 }
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reform-sim"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn reform-sim");
    assert!(
        out.status.success(),
        "reform-sim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

fn simulate(cfg: &str, out: &Path, extra: &[&str]) {
    let out = out.display().to_string();
    let mut args = vec!["simulate", "--config", cfg, "--out-dir", &out];
    args.extend_from_slice(extra);
    run(&args);
}

#[test]
fn simulate_writes_golden_headers_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    simulate(&cfg, &out, &["--k", "2"]);
    let csv = read(out.join("rounds.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(ROUNDS_HEADER));
    // 30 rounds, two strategies
    assert_eq!(lines.clone().count(), 60);
    assert!(lines.all(|l| l.split(',').nth(2) == Some("reform-rptsc")));

    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    for key in ["result", "baseline", "budget", "config"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert!(summary["result"]["gamma"]["gamma"].is_number());
    assert!(summary["budget"]["alpha_normalized_overhead"].is_number());
    assert!(summary["result"]["qualitative_fairness"]["verdict"].is_string());
    let meta: Value = serde_json::from_str(&read(out.join("meta.json"))).unwrap();
    assert_eq!(summary["config"], meta);
    assert_eq!(meta["seed"], 11);
}

#[test]
fn baseline_mechanism_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("rptsc");
    simulate(&cfg, &out, &["--mechanism", "rptsc", "--alpha", "10"]);
    let csv = read(out.join("rounds.csv"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("rptsc")));
    let meta: Value = serde_json::from_str(&read(out.join("meta.json"))).unwrap();
    assert_eq!(meta["mechanism"]["alpha"], 10.0);
    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert!(summary.get("baseline").is_none());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    simulate(&cfg, &a, &["--seed", "7"]);
    simulate(&cfg, &b, &["--seed", "7"]);
    for f in ["rounds.csv", "summary.json", "meta.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let c = dir.path().join("c");
    simulate(&cfg, &c, &["--seed", "8"]);
    assert_ne!(read(a.join("rounds.csv")), read(c.join("rounds.csv")));
}

#[test]
fn rerun_from_meta_reproduces_rounds() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("first");
    simulate(&cfg, &first, &["--decay", "exp:0.7", "--alpha", "3.3"]);
    let meta = first.join("meta.json").display().to_string();
    let second = dir.path().join("second");
    simulate(&meta, &second, &[]);
    assert_eq!(read(first.join("rounds.csv")), read(second.join("rounds.csv")));
    assert_eq!(read(first.join("meta.json")), read(second.join("meta.json")));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let output = bin()
            .env("REFORM_SIM_THREADS", threads)
            .args(["simulate", "--config", &cfg, "--out-dir", &out.display().to_string()])
            .output()
            .unwrap();
        assert!(output.status.success());
        outputs.push(read(out.join("rounds.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn invalid_inputs_exit_non_zero_with_message() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("x").display().to_string();
    let cases: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), dir.path().join("missing.toml").display().to_string()],
        vec!["simulate".into(), "--config".into(), cfg.clone(), "--k".into(), "0".into()],
        vec!["simulate".into(), "--config".into(), cfg.clone(), "--alpha".into(), "-1".into()],
        vec!["simulate".into(), "--mechanism".into(), "bogus".into()],
        vec!["simulate".into(), "--decay".into(), "exp:-1".into()],
    ];
    for mut args in cases {
        args.extend(["--out-dir".into(), out.clone()]);
        let o = bin().args(&args).output().unwrap();
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SMALL.replace("lambda = 0.9", "lambda = 1.5")).unwrap();
    let o = bin().args(["simulate", "--config", &bad.display().to_string(), "--out-dir", &out]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("λ"));
    assert!(!Path::new(&out).join("rounds.csv").exists());
}

#[test]
fn figure1_has_one_row_per_round_k_strategy_and_curve() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig");
    run(&["figure1", "--out-dir", &out.display().to_string()]);
    let csv = read(out.join("figure1.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(FIGURE1_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 200 * 3 * 2 * 2);
    let mean = |k: &str, strategy: &str, curve: &str| {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == k && r[2] == strategy && r[3] == curve)
            .map(|r| r[4].parse::<f64>().unwrap())
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    assert!(mean("8", "trustworthy", "N-REFORM") > mean("2", "trustworthy", "N-REFORM"));
    let base: Vec<f64> = ["2", "4", "8"].iter().map(|k| mean(k, "random", "N-RPTSC")).collect();
    assert!(base.windows(2).all(|w| w[0] == w[1]));
    let summary: Value = serde_json::from_str(&read(out.join("figure1_summary.json"))).unwrap();
    assert!(summary["last_50_round_means"]["k8"]["trustworthy"].is_number());
}

fn analyze_json(dir: &Path, name: &str, body: &str) -> Value {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    let out = run(&["analyze", "--json", &p.display().to_string()]);
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_zero_r_gives_equal_gammas() {
    let dir = TempDir::new().unwrap();
    let v = analyze_json(
        dir.path(),
        "r0.toml",
        "prior = [0.5, 0.3, 0.2]\nposterior = [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]]\nr = 0.0\nn = 10\nalpha = 2.0\n",
    );
    assert_eq!(v["gamma_rptsc"], v["gamma_reform"]);
    assert!(v["gamma_rptsc"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_identity_posterior_single_equals_optimal() {
    let dir = TempDir::new().unwrap();
    let v = analyze_json(
        dir.path(),
        "id.json",
        r#"{"prior": [0.6, 0.4], "posterior": [[1.0, 0.0], [0.0, 1.0]], "r": 0.4, "n": 5, "alpha": 1.5}"#,
    );
    for row in v["per_answer"].as_array().unwrap() {
        assert_eq!(row["expected_single"], row["optimal"]);
    }
}

#[test]
fn analyze_reference_beliefs_satisfy_a1() {
    let dir = TempDir::new().unwrap();
    let t = 1.0 / 3.0;
    let off = 0.05;
    let body = format!(
        "prior = [{t}, {t}, {t}]\nposterior = [[0.9, {off}, {off}], [{off}, 0.9, {off}], [{off}, {off}, 0.9]]\nr = 0.6\nn = 50\nalpha = 11.0\ncost_high = 1.0\ncost_low = 0.0\n"
    );
    let v = analyze_json(dir.path(), "reference.toml", &body);
    assert_eq!(v["assumptions"]["A1"], true);
    assert_eq!(v["assumptions"]["cost_gap"], 1.0);
    assert_eq!(v["per_answer"][0]["expected_by_k"].as_array().unwrap().len(), 8);

    let table = run(&["analyze", &dir.path().join("reference.toml").display().to_string()]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("assumptions.A1") && l.trim_end().ends_with("true")));
}

#[test]
fn analyze_reports_invalid_beliefs_by_name() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "prior = [0.5, 0.6]\nposterior = [[1.0, 0.0], [0.0, 1.0]]\nr = 0.5\nn = 5\nalpha = 1.0\n").unwrap();
    let o = bin().args(["analyze", &p.display().to_string()]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("prior"));
}

#[test]
fn default_config_round_trips_through_simulate() {
    let dir = TempDir::new().unwrap();
    let out = run(&["default-config"]);
    let p = dir.path().join("ref.toml");
    fs::write(&p, &out.stdout).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rounds = 200"));
    let run_dir = dir.path().join("ref");
    simulate(&p.display().to_string(), &run_dir, &["--rounds", "3", "--no-baseline"]);
    assert_eq!(read(run_dir.join("rounds.csv")).lines().count(), 1 + 3 * 2);
}
