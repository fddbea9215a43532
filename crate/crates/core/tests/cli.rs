use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const MODEL: &str =
    r#"{"d":2,"signature":[0,1],"generator":{"family":"von_mises","params":{"phi1":4,"phi2":0}}}"#;

fn wrapcop(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapcop"))
        .args(args)
        .current_dir(dir)
        .env_remove("WRAPCOP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), MODEL).unwrap();
    let args = ["sample", "--model", "m.json", "--n", "50", "--seed", "11"];
    let a = stdout(&wrapcop(&args, dir.path()));
    let b = stdout(&wrapcop(&args, dir.path()));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 51);
    assert!(a.starts_with("u1,u2\n"));
    let other = stdout(&wrapcop(
        &["sample", "--model", "m.json", "--n", "50", "--seed", "12"],
        dir.path(),
    ));
    assert_ne!(a, other);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), MODEL).unwrap();
    stdout(&wrapcop(
        &[
            "sample", "--model", "m.json", "--n", "300", "--out", "s.csv",
        ],
        dir.path(),
    ));
    let fit = |threads: &str| {
        stdout(&wrapcop(
            &[
                "fit",
                "--data",
                "s.csv",
                "--family",
                "von_mises",
                "--signature",
                "0,1",
                "--threads",
                threads,
            ],
            dir.path(),
        ))
    };
    assert_eq!(fit("1"), fit("3"));
}

#[test]
fn uniform_generator_has_zero_concordance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("u.json"),
        r#"{"d":2,"signature":[0,0],"generator":{"family":"uniform"}}"#,
    )
    .unwrap();
    let v: Value = serde_json::from_str(&stdout(&wrapcop(
        &["concordance", "--model", "u.json"],
        dir.path(),
    )))
    .unwrap();
    for key in ["rho", "tau", "xi"] {
        assert!(v[key].as_f64().unwrap().abs() < 1e-12, "{key} = {}", v[key]);
    }
    assert_eq!(v["source"], "closed_form");
}

#[test]
fn selection_recovers_the_sampled_signature() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), MODEL).unwrap();
    stdout(&wrapcop(
        &[
            "sample", "--model", "m.json", "--n", "400", "--out", "s.csv",
        ],
        dir.path(),
    ));
    for method in ["ks", "cvm"] {
        let v: Value = serde_json::from_str(&stdout(&wrapcop(
            &["select-signature", "--data", "s.csv", "--method", method],
            dir.path(),
        )))
        .unwrap();
        assert_eq!(v["chosen"], serde_json::json!([0, 1]), "{v}");
        assert_eq!(v["statistic_per_candidate"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn study_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"study":"signature_recovery","dimensions":[2],"sample_sizes":[30],
            "generators":[{"family":"von_mises","params":{"phi1":5,"phi2":0}}],"replicates":5}"#,
    )
    .unwrap();
    stdout(&wrapcop(
        &["study", "--config", "cfg.json", "--out", "res.csv"],
        dir.path(),
    ));
    let csv = std::fs::read_to_string(dir.path().join("res.csv")).unwrap();
    assert!(
        csv.starts_with("study,d,n,generator,method,metric,value,mc_stderr\n"),
        "{csv}"
    );
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("res.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["input_hash"].as_str().unwrap().len(), 40);
    assert_eq!(manifest["config"]["replicates"], 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wrapcop(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(
        wrapcop(&["sample", "--n", "3"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(wrapcop(&["nonsense"], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.csv"), "a,b\n0.1,0.2\n0.3,x\n").unwrap();
    let o = wrapcop(&["select-signature", "--data", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"d":3,"signature":[0,1],"generator":{"family":"uniform"}}"#,
    )
    .unwrap();
    assert_eq!(
        wrapcop(&["sample", "--model", "m.json", "--n", "3"], dir.path())
            .status
            .code(),
        Some(2)
    );
}
