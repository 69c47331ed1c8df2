use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rank-phase"))
}

fn quickstart() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quickstart.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_matrix(dir: &TempDir, name: &str, cells: &[Vec<Option<f64>>]) -> PathBuf {
    let text: String = cells
        .iter()
        .map(|row| {
            let line: Vec<String> = row
                .iter()
                .map(|c| c.map_or(String::new(), |v| v.to_string()))
                .collect();
            line.join(",") + "\r\n"
        })
        .collect();
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn differential_matrix(theta: &[f64]) -> Vec<Vec<Option<f64>>> {
    (0..theta.len())
        .map(|i| {
            (0..theta.len())
                .map(|j| (i != j).then(|| theta[i] - theta[j]))
                .collect()
        })
        .collect()
}

fn ranks(file: &Path) -> Vec<u64> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "index,rank")
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn quickstart_writes_header_and_one_row_per_replication() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&[
        "simulate",
        "--config",
        path(&quickstart()),
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.ends_with('\n'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "model,n,snr,beta,sigma,estimator,q,rep,seed,loss,exact_recovery,iters,wall_time_ms"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("differential,20,"));
}

#[test]
fn reruns_are_byte_identical_and_seed_override_changes_seeds() {
    let dir = TempDir::new().unwrap();
    let config = quickstart();
    let csv = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", path(&config), "--out", path(&out)];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = csv("a.csv", &[]);
    let b = csv("b.csv", &[]);
    assert_eq!(a, b);
    let c = csv("c.csv", &["--seed", "99"]);
    assert_ne!(a, c);
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let o = run(&["simulate", "--config", path(&quickstart()), "--reps", "3"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("recovery"));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn malformed_config_is_a_usage_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"model":"differential","n":10,"reps":1,"master_seed":1,"estimator":"feature_match_oracle_theta","snr_grid":[1],"sgima":1}"#,
    )
    .unwrap();
    let o = run(&["simulate", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sgima"), "{}", stderr(&o));

    fs::write(
        &cfg,
        r#"{"model":"differential","n":10,"reps":1,"master_seed":1,"estimator":"feature_match_oracle_theta"}"#,
    )
    .unwrap();
    let o = run(&["simulate", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "no grid given");

    let o = run(&[
        "simulate",
        "--config",
        path(&dir.path().join("missing.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_flags_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--bogus"]).status.code(), Some(2));
}

#[test]
fn filled_diagonal_is_rejected_with_its_position() {
    let dir = TempDir::new().unwrap();
    let mut cells = differential_matrix(&[0.0, 1.0, 2.0, 3.0]);
    cells[2][2] = Some(0.5);
    let input = write_matrix(&dir, "m.csv", &cells);
    let out = dir.path().join("r.txt");
    let o = run(&[
        "estimate",
        "--input",
        path(&input),
        "--kind",
        "comparison",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3, column 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn symmetric_comparison_matrix_is_a_degenerate_fit() {
    let dir = TempDir::new().unwrap();
    let x = [
        [0.0, 0.3, -1.2, 2.0],
        [0.1, 0.0, 0.4, 0.9],
        [0.7, -0.5, 0.0, 1.1],
        [0.2, 0.6, 0.8, 0.0],
    ];
    let cells: Vec<Vec<Option<f64>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| (i != j).then(|| x[i][j] + x[j][i]))
                .collect()
        })
        .collect();
    let input = write_matrix(&dir, "m.csv", &cells);
    let out = dir.path().join("r.txt");
    let o = run(&[
        "estimate",
        "--input",
        path(&input),
        "--kind",
        "comparison",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn noiseless_comparisons_give_back_the_identity_ranking() {
    let dir = TempDir::new().unwrap();
    let theta: Vec<f64> = (1..=8).map(|k| 0.3 + 0.7 * k as f64).collect();
    let input = write_matrix(&dir, "m.csv", &differential_matrix(&theta));
    let out = dir.path().join("r.txt");
    let o = run(&[
        "estimate",
        "--input",
        path(&input),
        "--kind",
        "comparison",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(ranks(&out), (1..=8).collect::<Vec<u64>>());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# intercept "));
    assert!(text.ends_with('\n'));
}

#[test]
fn collaboration_matrix_with_na_diagonal_is_accepted() {
    let dir = TempDir::new().unwrap();
    let theta = [1.0, 2.0, 3.0, 4.0, 5.0];
    let text: String = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| {
                    if i == j {
                        "NA".to_string()
                    } else {
                        (theta[i] + theta[j]).to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    let input = dir.path().join("m.csv");
    fs::write(&input, text).unwrap();
    let out = dir.path().join("r.txt");
    let o = run(&[
        "estimate",
        "--input",
        path(&input),
        "--kind",
        "collaboration",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(ranks(&out), vec![1, 2, 3, 4, 5]);
}

#[test]
fn oracle_check_agrees_on_small_instances_and_refuses_large_n() {
    let o = run(&[
        "oracle-check",
        "--n",
        "4",
        "--instances",
        "50",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.matches("match rate 1.0000").count(), 2, "{text}");
    assert_eq!(run(&["oracle-check", "--n", "7"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_injected_failures_are_caught() {
    let o = run(&["verify"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["verify", "--fail-inject", "hat_matrix"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hat_matrix"));
    assert_eq!(
        run(&["verify", "--fail-inject", "nonsense"]).status.code(),
        Some(2)
    );
}

#[test]
fn phase_diagram_writes_its_tables_and_refits_from_csv() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let o = run(&[
        "phase-diagram",
        "--config",
        path(&quickstart()),
        "--snr",
        "0.01,0.1,0.5,2,3,4",
        "--reps",
        "4",
        "--out",
        path(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "summary.csv", "fits.csv", "regimes.json"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("regimes.json")).unwrap()).unwrap();
    assert_eq!(json["grid"].as_array().unwrap().len(), 6);

    let second = dir.path().join("second");
    let o = run(&[
        "phase-diagram",
        "--from-csv",
        path(&first.join("results.csv")),
        "--out",
        path(&second),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!second.join("results.csv").exists());
    for f in ["summary.csv", "fits.csv", "regimes.json"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }

    let o = run(&[
        "phase-diagram",
        "--from-csv",
        path(&first.join("results.csv")),
        "--seed",
        "3",
        "--out",
        path(&second),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let outputs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("t{t}.csv"));
            let o = bin()
                .args([
                    "simulate",
                    "--config",
                    path(&quickstart()),
                    "--reps",
                    "6",
                    "--out",
                    path(&out),
                ])
                .env("RANK_PHASE_THREADS", t)
                .output()
                .unwrap();
            assert!(o.status.success(), "{}", stderr(&o));
            fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let o = bin()
        .args(["simulate", "--config", path(&quickstart())])
        .env("RANK_PHASE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_recovery_at_n50_above_the_threshold() {
    let o = run(&[
        "simulate",
        "--config",
        path(&quickstart()),
        "--n",
        "50",
        "--snr",
        &(3.0 * 50f64.ln()).to_string(),
        "--reps",
        "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let recovered = text
        .lines()
        .skip(1)
        .filter(|l| l.contains(",true,"))
        .count();
    assert!(recovered >= 18, "{recovered}/20");
}
