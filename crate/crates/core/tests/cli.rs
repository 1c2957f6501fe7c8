use std::process::{Command, Output};

use serde_json::Value;

fn qshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn sdc_run_reports_two_thirds() {
    let out = qshare(&["sdc-run", "--trials", "100000", "--seed", "42", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["command", "config", "seed", "generator", "version", "result"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["command"], "sdc-run");
    assert_eq!(v["seed"], 42);
    let est = v["result"]["statistics"]["estimate"].as_f64().unwrap();
    assert!((est - 2.0 / 3.0).abs() < 0.01);
    assert_eq!(v["result"]["conditional_decode_accuracy"], 1.0);
}

#[test]
fn same_seed_gives_identical_bytes() {
    for args in [
        &["sdc-run", "--trials", "5000", "--seed", "3"][..],
        &[
            "qss-attack",
            "--adversary",
            "intercept-resend",
            "--trials",
            "2000",
            "--seed",
            "3",
        ][..],
        &["sdc-n", "--users", "5", "--trials", "3000", "--csv"][..],
        &["qss-run", "--trials", "300", "--seed", "11"][..],
    ] {
        let a = qshare(args);
        let b = qshare(args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn decomp_verify_lists_findings_and_exits_zero() {
    let out = qshare(&["decomp-verify"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let ops = v["result"]["ops"].as_array().unwrap();
    let structural = |op: &str| {
        ops.iter().find(|o| o["op"] == op).unwrap()["structural"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(structural("I"), 0);
    assert!(structural("X") >= 1);
    assert!(structural("iY") >= 1);
}

#[test]
fn qss_decode_table_is_sorted_and_complete() {
    let out = qshare(&["decode-table", "--protocol", "qss", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("o14,o25,o36,op"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[0], "Phi+,Phi+,Phi+,I");
    assert!(rows.contains(&"Phi-,Phi-,Phi-,Z"));
    assert!(rows.contains(&"Phi-,Phi-,Phi+,I"));
    let rank = |s: &str| ["Phi+", "Phi-", "Psi+", "Psi-"].iter().position(|&o| o == s).unwrap();
    let keys: Vec<Vec<usize>> = rows.iter().map(|r| r.split(',').take(3).map(rank).collect()).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sdc_decode_table() {
    let out = qshare(&["decode-table", "--protocol", "sdc", "--csv"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "bell_outcome,op\nPhi+,X\nPhi-,iY\nPsi+,I\nPsi-,Z\n"
    );
}

#[test]
fn sdc_csv_trial_log() {
    let out = qshare(&["sdc-run", "--trials", "10", "--seed", "4", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("seed,op,receiver,bell_outcome,bystander_bits,status,decoded_op")
    );
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 7);
        assert_eq!(f[0], "4");
        assert_eq!(f[2], "bob");
        if f[5] == "success" {
            assert_eq!(f[1], f[6]);
        } else {
            assert_eq!(f[4], "1");
            assert_eq!(f[6], "");
        }
    }
}

#[test]
fn sdc_cheat_flags_receiver() {
    let out = qshare(&["sdc-cheat", "--receiver", "charlie", "--trials", "20000", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let analytic = &v["result"]["cheat"]["analytic"];
    assert!((analytic["charlie_solo_accuracy"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((analytic["bob_solo_accuracy"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn bad_arguments_exit_one_with_usage() {
    for args in [
        &["sdc-run", "--bogus"][..],
        &["teleport"][..],
        &["sdc-n", "--users", "1"][..],
        &["sdc-n", "--users", "3", "--receiver", "user7"][..],
        &["qss-run", "--check-fraction", "1.5"][..],
        &["qss-attack", "--policy", "fixed:alice,alice,bob"][..],
        &["sdc-run", "--json", "--csv"][..],
    ] {
        let out = qshare(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    let out = qshare(&["sdc-run", "--bogus"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn detected_eavesdropper_aborts_session() {
    let out = qshare(&[
        "qss-run",
        "--trials",
        "200",
        "--adversary",
        "intercept-resend",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["result"]["aborted"], true);
    assert_eq!(
        qshare(&["qss-run", "--trials", "200", "--seed", "1"]).status.code(),
        Some(0)
    );
}

#[test]
fn failed_comparison_exits_two() {
    // a small run whose estimate lands outside the 1% acceptance region
    let out = qshare(&["sdc-run", "--trials", "200", "--seed", "30"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["comparison"]["pass"], false);
}

#[test]
fn late_declarer_policies() {
    let last = json(&qshare(&[
        "qss-attack",
        "--adversary",
        "late-declarer",
        "--policy",
        "bob-last",
        "--trials",
        "2000",
    ]));
    assert_eq!(last["result"]["late_declarer"]["empirical"], 1.0);
    let random = json(&qshare(&[
        "qss-attack",
        "--adversary",
        "late-declarer",
        "--trials",
        "2000",
    ]));
    assert!(random["result"]["late_declarer"]["empirical"].as_f64().unwrap() < 1.0);
}

#[test]
fn trials_config_file() {
    let dir = std::env::temp_dir().join(format!("qshare-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"protocol":"sdc-solo","guesser":2,"trials":20000,"seed":8}"#).unwrap();
    let out = qshare(&["trials", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["result"]["statistics"]["analytic"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    std::fs::write(&path, r#"{"protocol":"teleport","trials":10}"#).unwrap();
    assert_eq!(
        qshare(&["trials", "--config", path.to_str().unwrap()]).status.code(),
        Some(1)
    );
    std::fs::remove_dir_all(&dir).unwrap();
}
