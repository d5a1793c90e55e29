use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blindbounds"));
    cmd.args(args).env_remove("BLINDBOUNDS_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV with one header comment line and a column line.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# blindbounds "));
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (columns, data)
}

fn field<'a>(columns: &[String], row: &'a [String], name: &str) -> &'a str {
    let i = columns
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    &row[i]
}

fn number(columns: &[String], row: &[String], name: &str) -> f64 {
    field(columns, row, name).parse().unwrap()
}

#[test]
fn example_prints_exact_rationals() {
    let o = run(&["example-2x2"]);
    assert!(o.status.success());
    let (cols, data) = rows(&stdout(&o));
    let exact: Vec<&str> = data.iter().map(|r| field(&cols, r, "exact")).collect();
    assert_eq!(exact, ["1/6", "7/36", "1/36", "0/1", "1/2592"]);

    let o = run(&["example-2x2", "--eps", "1/72"]);
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(field(&cols, &data[4], "exact"), "0/1");

    let o = run(&["example-2x2", "--eps", "0.001"]);
    let (cols, data) = rows(&stdout(&o));
    // (1 - 72/1000)² / 2592
    assert_eq!(field(&cols, &data[4], "exact"), "841/2531250");

    assert_eq!(run(&["example-2x2", "--eps", "-1/2"]).status.code(), Some(2));
    assert_eq!(run(&["example-2x2", "--eps", "x"]).status.code(), Some(2));
}

#[test]
fn separation_rows() {
    let o = run(&["separation", "--d", "2,8,16,32,64,128,256,4096"]);
    assert!(o.status.success());
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(
        cols,
        [
            "d",
            "epsilon",
            "rate_bound",
            "holevo",
            "conditional_entropy",
            "defect_term",
            "vacuous"
        ]
    );
    assert_eq!(field(&cols, &data[0], "vacuous"), "true");
    let d256 = &data[6];
    assert_eq!(number(&cols, d256, "rate_bound"), 1.0);
    assert!(number(&cols, d256, "holevo") <= 1.0);
    let rates: Vec<f64> = data[1..].iter().map(|r| number(&cols, r, "rate_bound")).collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, r#"{"d": [2, 8, 16, 32, 64, 128, 256, 4096]}"#).unwrap();
    let from_config = run(&["separation", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout(&from_config), stdout(&o));

    assert_eq!(run(&["separation", "--d", "1"]).status.code(), Some(2));
}

fn protocol_files(dir: &Path, tag: &str, seed: &str) -> (String, String) {
    let csv = dir.join(format!("{tag}.csv"));
    let table = dir.join(format!("{tag}.json"));
    let o = run(&[
        "protocol",
        "--d",
        "1024",
        "--delta",
        "0.1",
        "--gamma",
        "0.1",
        "--seed",
        seed,
        "--copies",
        "20000",
        "--out",
        csv.to_str().unwrap(),
        "--table",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (fs::read_to_string(csv).unwrap(), fs::read_to_string(table).unwrap())
}

#[test]
fn protocol_is_deterministic_and_within_error() {
    let dir = tempfile::tempdir().unwrap();
    let first = protocol_files(dir.path(), "a", "9");
    let second = protocol_files(dir.path(), "b", "9");
    assert_eq!(first, second);
    let (csv, table) = first;
    assert!(csv.starts_with("# blindbounds 0.1.0 seed=9\n"));
    let (cols, data) = rows(&csv);
    assert!(number(&cols, &data[0], "local_error_rho") <= 0.2);
    assert!(number(&cols, &data[0], "local_error_sigma") <= 0.2);
    assert!(number(&cols, &data[0], "bits_sent") <= number(&cols, &data[0], "rate_bound"));
    let doc: serde_json::Value = serde_json::from_str(&table).unwrap();
    assert_eq!(doc["seed"], 9);
    assert_eq!(doc["u"].as_u64().unwrap() as f64, number(&cols, &data[0], "u"));
    let symbols: usize = doc["buckets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["symbols"].as_array().unwrap().len())
        .sum();
    assert_eq!(symbols, 1024);

    let other = protocol_files(dir.path(), "c", "10").0;
    assert_ne!(other, csv);
}

#[test]
fn protocol_edge_cases() {
    let o = run(&[
        "protocol", "--d", "1", "--delta", "0.1", "--gamma", "0.1", "--copies", "100",
    ]);
    assert!(o.status.success());
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(number(&cols, &data[0], "local_error_rho"), 0.0);
    assert_eq!(number(&cols, &data[0], "local_error_sigma"), 0.0);

    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair.json");
    fs::write(&pair, r#"[["0.5", "0.5", 0], [0.25, 0.25, "1/2"]]"#).unwrap();
    let o = run(&[
        "protocol",
        "--d",
        "3",
        "--delta",
        "0.2",
        "--gamma",
        "0.2",
        "--copies",
        "0",
        "--pair",
        pair.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!stdout(&o).contains("mc_error_rho"));
    let o = run(&[
        "protocol",
        "--d",
        "4",
        "--delta",
        "0.2",
        "--gamma",
        "0.2",
        "--pair",
        pair.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    for (delta, gamma) in [("0.5", "0.1"), ("0.1", "0"), ("nan", "0.1")] {
        let o = run(&["protocol", "--d", "8", "--delta", delta, "--gamma", gamma]);
        assert_eq!(o.status.code(), Some(2), "δ={delta} γ={gamma}");
    }
}

#[test]
fn audit_passes_and_catches_a_wrong_constant() {
    let o = run(&["audit", "--trials", "300"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(data.len(), 14);
    assert!(data.iter().all(|r| field(&cols, r, "status") == "pass"));

    // Entrywise ratios |N - M|/dε stay below 4 on these channels, so a
    // constant of 2 is the smallest round value that must trip the audit.
    let o = run(&["audit", "--trials", "300", "--approximation-constant", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(field(&cols, &data[0], "status"), "fail");
    assert!(String::from_utf8_lossy(&o.stderr).contains("doubly-stochastic-approximation"));

    let o = run(&["audit", "--trials", "0"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    assert_eq!(run(&["audit", "--d-max", "9"]).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let one = run_env(
        &["audit", "--trials", "200", "--seed", "4"],
        &[("BLINDBOUNDS_THREADS", "1")],
    );
    let three = run_env(
        &["audit", "--trials", "200", "--seed", "4"],
        &[("BLINDBOUNDS_THREADS", "3")],
    );
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
    assert!(stdout(&one).starts_with("# blindbounds 0.1.0 seed=4\n"));
    let zero = run_env(&["audit", "--trials", "10"], &[("BLINDBOUNDS_THREADS", "0")]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn decompose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    fs::write(&m, "[[0.5, 0.5, 0], [0.25, 0.25, 0.5], [0.25, 0.25, 0.5]]").unwrap();
    let o = run(&["decompose", m.to_str().unwrap()]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["permutations"][0], serde_json::json!([0, 1, 2]));
    let total: f64 = doc["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(doc["reconstruction_error"].as_f64().unwrap() <= 1e-9);

    fs::write(&m, "[[0.9, 0.1], [0.5, 0.5]]").unwrap();
    assert_eq!(run(&["decompose", m.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["decompose", "/nonexistent/m.json"]).status.code(), Some(1));
}

#[test]
fn defect_from_flags_and_file() {
    let o = run(&[
        "defect",
        "--state",
        "0.5,0.5",
        "--state",
        "1/3,2/3",
        "--eps",
        "0.01",
        "--restarts",
        "2",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["seed"], 1);
    let value = doc["solution"]["value"].as_f64().unwrap();
    assert!(value >= (1.0f64 - 0.72).powi(2) / 2592.0);
    assert!(doc["solution"]["constraint_slack"].as_f64().unwrap() >= -1e-9);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("problem.json");
    fs::write(&p, serde_json::to_string(&doc["problem"]).unwrap()).unwrap();
    let again = run(&["defect", "--problem", p.to_str().unwrap()]);
    assert_eq!(again.stdout, o.stdout);

    assert_eq!(run(&["defect", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(
        run(&["defect", "--staircase", "3", "--eps", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["defect", "--state", "0.5,0.6", "--state", "1,0"]).status.code(),
        Some(2)
    );
}
