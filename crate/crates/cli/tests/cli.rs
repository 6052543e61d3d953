use std::process::Command;

fn lab(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dskp-lab")).args(args).output().expect("binary runs");
    (out.status.success(), String::from_utf8(out.stdout).expect("utf8 output"))
}

#[test]
fn symbolic_z_of_a2_has_220_monomials() {
    let (ok, out) = lab(&["z", "--graph", "aztec:2", "--mode", "symbolic"]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["monomials"], 220);
}

#[test]
fn limitshape_csv_header() {
    let (ok, out) = lab(&["limitshape", "--q", "7/10", "--k", "200", "--grid", "3x3"]);
    assert!(ok);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,y,rho,k_rho,log_rate"));
    assert_eq!(lines.count(), 9);
}

#[test]
fn verify_reports_each_check() {
    let (ok, out) = lab(&["verify", "--suite", "paper", "--seed", "1", "--only", "1,6,9"]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_suite_fails() {
    assert!(!lab(&["verify", "--suite", "nope"]).0);
}

#[test]
fn seeded_output_is_byte_identical() {
    let args = ["y", "--graph", "bump:6:0,0,4", "--seed", "11"];
    assert_eq!(lab(&args), lab(&args));
    let args = ["evolve", "--recurrence", "chi5", "--level", "3", "--seed", "4"];
    assert_eq!(lab(&args), lab(&args));
}

#[test]
fn weights_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("dskp-lab-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let w = dir.join("w.json");
    std::fs::write(&w, r#"{"0,0": "0", "1,0": "1", "-1,0": "2", "0,1": "3", "0,-1": "4"}"#).unwrap();
    let out_path = dir.join("y.json");
    let (ok, _) = lab(&["y", "--graph", "aztec:1", "--weights", w.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["y"], "11/5");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn chi_counts_json() {
    let (ok, out) = lab(&["chi", "--variant", "chi5", "--k", "2", "--counts", "--emit-polys"]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["numerator"].as_u64(), v["denominator"].as_u64()), (Some(23), Some(3)));
    assert!(v["polynomials"]["denominator"].is_string());
}

#[test]
fn size_guard_is_actionable() {
    let out = Command::new(env!("CARGO_BIN_EXE_dskp-lab"))
        .args(["forests", "--k", "4"])
        .env("DSKP_SIZE_GUARD", "1")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("DSKP_SIZE_GUARD"));
}
