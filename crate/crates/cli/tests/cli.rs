use std::path::Path;
use std::process::{Command, Output};

fn qdiscord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdiscord")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn compute_prints_six_decimals() {
    let o = qdiscord(&["compute", "--state", "named:bell", "--measure", "qd", "--partition", "A|B"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "D_{A;B} = 1.000000 bits");
    let o = qdiscord(&["compute", "--state", "named:product_random", "--measure", "mqd", "--partition", "A|B|C"]);
    let value: f64 = stdout(&o).split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(value <= 1e-4);
}

#[test]
fn json_report_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qdiscord(&[
        "compute", "--state", "random:2x2x2:2:3", "--measure", "gqd", "--partition", "A|B|C", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["state"], "random:2x2x2:2:3");
    assert_eq!(v["config"]["seed"], 7);
    let params: Vec<f64> = serde_json::from_value(v["result"]["opt"]["params"].clone()).unwrap();
    assert_eq!(params.len(), 6);
    let value = v["result"]["value"].as_f64().unwrap();

    // the stored measurement reproduces the stored value
    use qdiscord_core::measure::{apply_product, ProductMeasurement};
    use qdiscord_core::qstate::{mutual_information, sample_random_state};
    use qdiscord_core::Partition;
    let rho = sample_random_state(&[2, 2, 2], 2, 3).unwrap();
    let p = Partition::parse("A|B|C").unwrap();
    let m = ProductMeasurement::from_params(&[2, 2, 2], &p, &params).unwrap();
    let post = apply_product(&rho, &m).unwrap();
    let again = mutual_information(&rho, &p).unwrap() - mutual_information(&post, &p).unwrap();
    assert!((again - value).abs() < 1e-12, "{again} {value}");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("opt.toml");
    std::fs::write(&cfg, "restarts = 3\nseed = 11\n").unwrap();
    let out = dir.path().join("r.json");
    let o = qdiscord(&[
        "compute", "--state", "named:bell", "--measure", "qd", "--partition", "A|B", "--config", cfg.to_str().unwrap(),
        "--seed", "12", "--format", "json", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["restarts"], 3);
    assert_eq!(v["config"]["seed"], 12);
    std::fs::write(&cfg, "restarts = \"many\"\n").unwrap();
    let o = qdiscord(&["compute", "--state", "named:bell", "--measure", "qd", "--partition", "A|B", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qdiscord(&["compute", "--state", "named:bell"]).status.code(), Some(2));
    assert_eq!(qdiscord(&["compute", "--state", "named:nope", "--measure", "qd", "--partition", "A|B"]).status.code(), Some(2));
    assert_eq!(qdiscord(&["compute", "--state", "named:bell", "--measure", "qd", "--partition", "A|C"]).status.code(), Some(2));
    assert_eq!(qdiscord(&["reproduce", "nothing"]).status.code(), Some(2));
    assert_eq!(qdiscord(&["scan", "--sampler", "haar", "--samples", "1"]).status.code(), Some(2));
    assert_eq!(qdiscord(&["check", "--state", "file:/nonexistent.state"]).status.code(), Some(2));
}

#[test]
fn reproduce_exit_codes() {
    assert_eq!(qdiscord(&["reproduce", "gqd_incompatibility"]).status.code(), Some(0));
    let o = qdiscord(&["reproduce", "xi_listings"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("PASS Xi(A|B|C|D|E - A|C)"));
}

#[test]
fn empty_scan_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = qdiscord(&["scan", "--samples", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("state_id,"));
}

#[test]
fn catalog_scan_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = qdiscord(&[
            "scan", "--suite", "prop1", "--sampler", "ginibre:2", "--samples", "4", "--seed", "5", "--restarts", "6", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 4 * 6);
    assert!(!Path::new(&dir.path().join("a_offenders")).exists());
}

#[test]
fn check_modes() {
    let o = qdiscord(&["check", "--state", "named:paper_cx_1p11", "--measure", "gqd", "--coarser", "A|B"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("dis-correlated: false"));
    let o = qdiscord(&["check", "--state", "named:classical_random:3,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("holds")).count(), 7);
    let o = qdiscord(&["check", "--state", "named:paper_cx_p11", "--prop", "gqd_bound_eq26"]);
    assert!(stdout(&o).starts_with("inconclusive"));
}

#[test]
fn alpha_subcommand() {
    let o = qdiscord(&["alpha", "1", "0.6", "0.6", "0"]);
    assert_eq!(stdout(&o).trim(), "alpha = 1.356915");
    assert_eq!(qdiscord(&["alpha", "1", "1.5"]).status.code(), Some(1));
}
