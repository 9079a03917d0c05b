//! Exit codes and files of the `cyverify` binary.

use std::process::Command;

fn cyverify(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cyverify")).args(args).env_remove("CYVERIFY_REPORT_DIR").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn chi_alone_passes() {
    let (code, out) = cyverify(&["verify", "k3-product", "--check", "chi"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("chi(E) = 3"));
}

#[test]
fn anomaly_exit_follows_the_discrepancy_policy() {
    let (code, out) = cyverify(&["verify", "k3-product", "--check", "anomaly"]);
    assert_eq!(code, 2);
    assert!(out.contains("claimed 9*T - 6*wT.w1 + 6*wT.w2 / derived 9*T + 6*wT.w1 - 6*wT.w2"), "{out}");
    assert_eq!(cyverify(&["verify", "k3-product", "--check", "anomaly", "--discrepancy", "fail"]).0, 1);
    assert_eq!(cyverify(&["verify", "k3-product", "--check", "anomaly", "--strict"]).0, 1);
    assert_eq!(cyverify(&["verify", "k3-product", "--check", "anomaly", "--discrepancy", "open"]).0, 2);
}

#[test]
fn informational_discrepancies_do_not_change_the_exit() {
    let (code, out) = cyverify(&["verify", "k3-product", "--check", "chi", "--strict"]);
    assert_eq!(code, 0);
    assert!(out.contains("h0(I[ZB](O)): claimed 3 / derived 0 (informational)"), "{out}");
}

#[test]
fn quotient_with_sphere_pairings_pass() {
    let (code, out) = cyverify(&["verify", "enriques-sphere", "--check", "pairings"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn json_report_is_canonical() {
    let (code, out) = cyverify(&["verify", "enriques-quotient", "--check", "det,chi", "--report", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["exit_code"], 0);
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", out);
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scene");
    std::fs::write(&bad, "scene x\ngeometry k3\nfoo bar\n").unwrap();
    assert_eq!(cyverify(&["verify", bad.to_str().unwrap()]).0, 3);
    assert_eq!(cyverify(&["verify", "no-such-scene"]).0, 3);
    assert_eq!(cyverify(&["verify", "k3-product", "--check", "frob"]).0, 3);
    assert_eq!(cyverify(&["search", "k3-product", "--rank-max", "3", "--box", "40"]).0, 3);
}

#[test]
fn report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cyverify"))
        .args(["verify", "k3-product", "--check", "chi"])
        .env("CYVERIFY_REPORT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = std::fs::read_to_string(dir.path().join("k3-product.json")).unwrap();
    assert!(json.contains("\"exit_code\": 0"));
}

#[test]
fn search_resumes_from_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let surv = dir.path().join("survivors");
    let base = ["search", "k3-product", "--rank-max", "2", "--box", "3"];
    let (ck_s, surv_s) = (ck.to_str().unwrap(), surv.to_str().unwrap());

    let (code, out) = cyverify(&[&base[..], &["--resume", ck_s, "--limit", "400"]].concat());
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("400 of 686 candidates enumerated (partial)"), "{out}");
    let (code, out) = cyverify(&[&base[..], &["--resume", ck_s, "--emit-survivors", surv_s]].concat());
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("686 of 686 candidates enumerated (complete)"), "{out}");

    let fresh = dir.path().join("fresh");
    let (_, direct) = cyverify(&[&base[..], &["--emit-survivors", fresh.to_str().unwrap()]].concat());
    assert_eq!(direct, out);
    assert_eq!(std::fs::read_to_string(&surv).unwrap(), std::fs::read_to_string(&fresh).unwrap());
}
